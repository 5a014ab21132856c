//! Subcommand definitions and drivers.

use std::path::PathBuf;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use bqo_core::benchmarks::{
    heat_system, random_admissible, HeatBenchmarkSpec, QuadraticOutputVariant,
};
use bqo_core::gramians::{GramianSet, GramianVariant};
use bqo_core::lyapunov::SolverOptions;
use bqo_core::model::existence_margins;
use bqo_core::reduction::{balanced_truncation, GRAMIAN_CLIP_TOL};
use bqo_core::simulation::{error_metrics, simulate, Trajectory};
use bqo_core::BqoSystem;

use crate::io::{self, RunManifest};
use crate::signals::{build_input, InputKind, InputTable};

/// Balanced truncation workflows for bilinear systems with quadratic
/// outputs.
#[derive(Debug, Parser)]
#[command(name = "bqo", version, about)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a benchmark system bundle.
    Build(BuildArgs),
    /// Compute a Gramian pair (plus certificate and residual report).
    Gramians(GramiansArgs),
    /// Square-root balanced truncation to a reduced bundle.
    Reduce(ReduceArgs),
    /// Simulate a system (and optionally reduced models) over time.
    Simulate(SimulateArgs),
    /// Sweep the output error over reduced orders and variants.
    Errsweep(ErrsweepArgs),
}

#[derive(Debug, Args, Serialize)]
pub struct BuildArgs {
    #[command(subcommand)]
    pub example: BuildExample,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum BuildExample {
    /// Boundary-controlled heat equation on a k x k grid.
    Heat(HeatArgs),
    /// Deterministic random system with prescribed existence margin.
    Random(RandomArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OutputVariantArg {
    /// Quadratic output `x^T (k^-4 ones) x` (squared average).
    Ones,
    /// Quadratic output `x^T (k^-2 I) x` (mean square).
    Identity,
}

#[derive(Debug, Args, Serialize)]
pub struct HeatArgs {
    /// Grid points per side (state dimension k^2).
    #[arg(long)]
    pub k: usize,
    /// Shape of the quadratic output.
    #[arg(long, value_enum, default_value = "identity")]
    pub output_variant: OutputVariantArg,
    /// Input scaling baked into the bundle.
    #[arg(long, default_value_t = 1.0)]
    pub gamma: f64,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct RandomArgs {
    #[arg(long)]
    pub n: usize,
    #[arg(long)]
    pub m: usize,
    #[arg(long)]
    pub p: usize,
    #[arg(long)]
    pub seed: u64,
    /// Existence margin as a fraction of the admissibility threshold.
    #[arg(long)]
    pub margin: f64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CertificateMode {
    /// Compute for moderate dimensions, skip above the auto threshold.
    Auto,
    On,
    Off,
}

#[derive(Debug, Args, Serialize)]
pub struct GramiansArgs {
    /// System bundle directory.
    #[arg(long)]
    pub system: PathBuf,
    /// Gramian variant: S | A | M | P | TS | TP | TA | reach | Treach.
    #[arg(long, value_parser = parse_variant)]
    pub variant: GramianVariantArg,
    /// Extra input scaling applied before computing.
    #[arg(long)]
    pub gamma: Option<f64>,
    /// Mixing parameters for the M variant, comma separated.
    #[arg(long, value_parser = parse_f64_list)]
    pub phi: Option<F64List>,
    /// Relative residual tolerance of the solvers.
    #[arg(long, default_value_t = bqo_core::lyapunov::DEFAULT_RESIDUAL_TOL)]
    pub residual_tol: f64,
    /// Relative iterate-change tolerance of the fixed-point solver.
    #[arg(long, default_value_t = bqo_core::lyapunov::DEFAULT_REL_DIFF_TOL)]
    pub rel_diff_tol: f64,
    /// Iteration cap of the fixed-point solver.
    #[arg(long, default_value_t = bqo_core::lyapunov::DEFAULT_MAX_ITER)]
    pub max_iter: usize,
    /// Whether to compute the stability certificate.
    #[arg(long, value_enum, default_value = "auto")]
    pub certificate: CertificateMode,
    #[arg(long)]
    pub out: PathBuf,
}

/// Newtype so clap can parse the variant tag.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct GramianVariantArg(#[serde(serialize_with = "serialize_variant")] pub GramianVariant);

fn serialize_variant<S: serde::Serializer>(
    v: &GramianVariant,
    s: S,
) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(v.tag())
}

fn parse_variant(s: &str) -> std::result::Result<GramianVariantArg, String> {
    GramianVariant::from_tag(s)
        .map(GramianVariantArg)
        .ok_or_else(|| {
            format!("unknown variant {s:?}; expected one of S, A, M, P, TS, TP, TA, reach, Treach")
        })
}

#[derive(Debug, Clone, Serialize)]
pub struct F64List(pub Vec<f64>);

fn parse_f64_list(s: &str) -> std::result::Result<F64List, String> {
    s.split(',')
        .map(|tok| {
            tok.trim()
                .parse::<f64>()
                .map_err(|e| format!("bad number {tok:?}: {e}"))
        })
        .collect::<std::result::Result<Vec<_>, _>>()
        .map(F64List)
}

#[derive(Debug, Clone, Serialize)]
pub struct UsizeList(pub Vec<usize>);

fn parse_usize_list(s: &str) -> std::result::Result<UsizeList, String> {
    s.split(',')
        .map(|tok| {
            tok.trim()
                .parse::<usize>()
                .map_err(|e| format!("bad count {tok:?}: {e}"))
        })
        .collect::<std::result::Result<Vec<_>, _>>()
        .map(UsizeList)
}

#[derive(Debug, Clone)]
pub struct VariantList(pub Vec<GramianVariant>);

impl Serialize for VariantList {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_seq(self.0.iter().map(|v| v.tag()))
    }
}

fn parse_variant_list(s: &str) -> std::result::Result<VariantList, String> {
    s.split(',')
        .map(|tok| parse_variant(tok.trim()).map(|v| v.0))
        .collect::<std::result::Result<Vec<_>, _>>()
        .map(VariantList)
}

#[derive(Debug, Args, Serialize)]
pub struct ReduceArgs {
    /// System bundle the Gramians were computed for.
    #[arg(long)]
    pub system: PathBuf,
    /// Gramian bundle directory.
    #[arg(long)]
    pub gramians: PathBuf,
    /// Reduced order.
    #[arg(long)]
    pub r: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct SimulateArgs {
    /// Full system bundle.
    #[arg(long)]
    pub system: PathBuf,
    /// Reduced system bundles to compare against the full model.
    #[arg(long)]
    pub reduced: Vec<PathBuf>,
    #[arg(long, value_enum)]
    pub input: InputKind,
    /// Input table (CSV: t, u_1, ..., u_m) for `--input table`.
    #[arg(long)]
    pub table: Option<PathBuf>,
    #[arg(long)]
    pub t_end: f64,
    /// Number of recorded grid intervals.
    #[arg(long)]
    pub steps: usize,
    /// RK4 substeps per recorded interval (integration runs on the finer
    /// grid; outputs are recorded on the coarse one).
    #[arg(long, default_value_t = 1)]
    pub substeps: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct ErrsweepArgs {
    #[arg(long)]
    pub system: PathBuf,
    /// Gramian variants to sweep, comma separated (e.g. S,A,TS,TP,TA).
    #[arg(long, value_parser = parse_variant_list)]
    pub variants: VariantList,
    /// Reduced orders to sweep, comma separated.
    #[arg(long, value_parser = parse_usize_list)]
    pub r_list: UsizeList,
    #[arg(long, value_enum)]
    pub input: InputKind,
    #[arg(long)]
    pub table: Option<PathBuf>,
    #[arg(long)]
    pub t_end: f64,
    #[arg(long)]
    pub steps: usize,
    #[arg(long, default_value_t = 1)]
    pub substeps: usize,
    /// Extra input scaling applied before computing Gramians.
    #[arg(long)]
    pub gamma: Option<f64>,
    /// Mixing parameters for the M variant.
    #[arg(long, value_parser = parse_f64_list)]
    pub phi: Option<F64List>,
    /// Worker-thread cap for the (variant, r) jobs.
    #[arg(long, default_value_t = 1)]
    pub threads: usize,
    #[arg(long)]
    pub out: PathBuf,
}

/// Entry point used by `main`.
pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Build(args) => cmd_build(args),
        Command::Gramians(args) => cmd_gramians(args),
        Command::Reduce(args) => cmd_reduce(args),
        Command::Simulate(args) => cmd_simulate(args),
        Command::Errsweep(args) => cmd_errsweep(args),
    }
}

fn cmd_build(args: BuildArgs) -> Result<()> {
    let (sys, gamma, out, options) = match &args.example {
        BuildExample::Heat(heat) => {
            let variant = match heat.output_variant {
                OutputVariantArg::Ones => QuadraticOutputVariant::Ones,
                OutputVariantArg::Identity => QuadraticOutputVariant::Identity,
            };
            let spec = HeatBenchmarkSpec {
                k: heat.k,
                output_variant: variant,
                gamma: heat.gamma,
            };
            (
                heat_system(&spec)?,
                heat.gamma,
                heat.out.clone(),
                serde_json::to_value(&args)?,
            )
        }
        BuildExample::Random(rnd) => (
            random_admissible(rnd.n, rnd.m, rnd.p, rnd.seed, rnd.margin)?,
            1.0,
            rnd.out.clone(),
            serde_json::to_value(&args)?,
        ),
    };
    io::save_system(&out, &sys, gamma)?;
    RunManifest::new("build", vec![], options, &out).save(&out)?;
    Ok(())
}

/// Dimension above which the certificate is skipped in `auto` mode (its
/// exponential sampling gets expensive for large states).
const CERTIFICATE_AUTO_CAP: usize = 400;

fn cmd_gramians(args: GramiansArgs) -> Result<()> {
    let (sys, manifest) = io::load_system(&args.system)?;
    let sys = match args.gamma {
        Some(g) => sys.scale_input(g)?,
        None => sys,
    };
    let opts = SolverOptions::new(
        args.residual_tol,
        args.rel_diff_tol,
        args.max_iter,
        bqo_core::lyapunov::ORACLE_DIM_CAP,
    )?;
    let variant = args.variant.0;

    let compute_cert = match args.certificate {
        CertificateMode::On => true,
        CertificateMode::Off => false,
        CertificateMode::Auto => sys.n() <= CERTIFICATE_AUTO_CAP,
    };
    let cert = if compute_cert {
        Some(existence_margins(&sys)?)
    } else {
        None
    };
    if let Some(cert) = &cert {
        let needed = match variant {
            GramianVariant::Standard | GramianVariant::Series | GramianVariant::Mixed => {
                cert.exists_qs
            }
            GramianVariant::Alternative => cert.exists_qa,
            _ => cert.exists_p,
        };
        if !needed {
            eprintln!(
                "warning: existence margin exceeds threshold (Gamma_P = {:.3e}, Gamma_QS = {:.3e}, \
                 threshold = {:.3e}); the condition is sufficient only, attempting anyway",
                cert.gamma_p, cert.gamma_qs, cert.threshold
            );
        }
    }

    let phi = args.phi.as_ref().map(|l| l.0.clone());
    let (set, stages) = GramianSet::compute_with_stages(&sys, variant, phi.as_deref(), &opts)?;
    io::save_gramians(
        &args.out,
        &set.p,
        set.q.as_ref(),
        set.variant,
        set.phi.as_deref(),
        &set.residuals,
        &stages,
    )?;
    if let Some(cert) = &cert {
        io::write_json(
            &args.out.join("certificate.json"),
            &io::CertificateReport::from(cert),
        )?;
    }
    let _ = manifest;
    RunManifest::new(
        "gramians",
        vec![args.system.clone()],
        serde_json::to_value(&args)?,
        &args.out,
    )
    .save(&args.out)?;
    Ok(())
}

#[derive(Debug, Serialize)]
struct BalancingReport {
    requested_order: usize,
    numerical_rank: usize,
    boundary_tie: bool,
    hsv_count: usize,
}

fn cmd_reduce(args: ReduceArgs) -> Result<()> {
    let (sys, manifest) = io::load_system(&args.system)?;
    let (p, q, _report) = io::load_gramians(&args.gramians)?;
    let q = q.ok_or_else(|| {
        anyhow!(
            "gramian bundle {} has no observability Gramian",
            args.gramians.display()
        )
    })?;
    let u = bqo_core::lyapunov::psd_factor(&p, GRAMIAN_CLIP_TOL)?;
    let l = bqo_core::lyapunov::psd_factor(&q, GRAMIAN_CLIP_TOL)?;
    let res = balanced_truncation(&sys, &u, &l, args.r)?;
    if res.boundary_tie {
        eprintln!(
            "warning: truncation boundary falls on a near-tie of Hankel singular values \
             (sigma_{} ~ sigma_{}); result kept",
            args.r,
            args.r + 1
        );
    }
    io::save_system(&args.out, &res.reduced, manifest.gamma_applied)?;
    io::write_hsv_csv(&args.out.join("hsv.csv"), &res.hsv)?;
    io::write_json(
        &args.out.join("balancing.json"),
        &BalancingReport {
            requested_order: args.r,
            numerical_rank: res.numerical_rank,
            boundary_tie: res.boundary_tie,
            hsv_count: res.hsv.len(),
        },
    )?;
    RunManifest::new(
        "reduce",
        vec![args.system.clone(), args.gramians.clone()],
        serde_json::to_value(&args)?,
        &args.out,
    )
    .save(&args.out)?;
    Ok(())
}

/// Integrates on `steps * substeps` RK4 steps and records every
/// `substeps`-th sample.
fn simulate_sampled(
    sys: &BqoSystem,
    u: &(dyn Fn(f64) -> nalgebra::DVector<f64> + Send + Sync),
    t_end: f64,
    steps: usize,
    substeps: usize,
) -> Result<Trajectory> {
    let fine = simulate(sys, u, t_end, steps * substeps.max(1))?;
    Ok(fine.decimate(substeps.max(1)))
}

#[derive(Debug, Serialize)]
struct SimulationErrorSummary {
    reduced: PathBuf,
    frobenius_rel: f64,
    max_pointwise_rel: f64,
}

fn cmd_simulate(args: SimulateArgs) -> Result<()> {
    let (sys, _) = io::load_system(&args.system)?;
    let table = match args.input {
        InputKind::Table => Some(InputTable::load(
            args.table
                .as_ref()
                .context("--input table requires --table FILE")?,
            sys.m(),
        )?),
        _ => None,
    };
    let u = build_input(args.input, sys.m(), table)?;
    std::fs::create_dir_all(&args.out)?;
    let full = simulate_sampled(&sys, u.as_ref(), args.t_end, args.steps, args.substeps)?;
    io::write_trajectory_csv(&args.out.join("trajectory_full.csv"), &full)?;

    let mut summaries = Vec::new();
    for (idx, dir) in args.reduced.iter().enumerate() {
        let (red, _) = io::load_system(dir)?;
        if red.m() != sys.m() || red.p() != sys.p() {
            bail!(
                "reduced bundle {} has incompatible input/output counts",
                dir.display()
            );
        }
        let traj = simulate_sampled(&red, u.as_ref(), args.t_end, args.steps, args.substeps)?;
        let report = error_metrics(&full, &traj)?;
        io::write_trajectory_csv(
            &args.out.join(format!("trajectory_reduced_{}.csv", idx + 1)),
            &traj,
        )?;
        let mut csv = String::from("t,pointwise_rel\n");
        for (t, e) in full.times.iter().zip(&report.pointwise_rel) {
            csv.push_str(&format!("{},{}\n", io::format_f64(*t), io::format_f64(*e)));
        }
        std::fs::write(args.out.join(format!("errors_{}.csv", idx + 1)), csv)?;
        summaries.push(SimulationErrorSummary {
            reduced: dir.clone(),
            frobenius_rel: report.frobenius_rel,
            max_pointwise_rel: report.pointwise_rel.iter().copied().fold(0.0, f64::max),
        });
    }
    if !summaries.is_empty() {
        io::write_json(&args.out.join("errors.json"), &summaries)?;
    }
    let mut inputs = vec![args.system.clone()];
    inputs.extend(args.reduced.iter().cloned());
    RunManifest::new("simulate", inputs, serde_json::to_value(&args)?, &args.out)
        .save(&args.out)?;
    Ok(())
}

#[derive(Debug, Clone, Serialize)]
struct SweepRow {
    variant: String,
    r: usize,
    frobenius_rel: f64,
}

fn cmd_errsweep(args: ErrsweepArgs) -> Result<()> {
    let (sys, _) = io::load_system(&args.system)?;
    let sys = match args.gamma {
        Some(g) => sys.scale_input(g)?,
        None => sys,
    };
    let table = match args.input {
        InputKind::Table => Some(InputTable::load(
            args.table
                .as_ref()
                .context("--input table requires --table FILE")?,
            sys.m(),
        )?),
        _ => None,
    };
    let u = build_input(args.input, sys.m(), table)?;
    std::fs::create_dir_all(&args.out)?;

    let opts = SolverOptions::default();
    let phi = args.phi.as_ref().map(|l| l.0.clone());
    let full = simulate_sampled(&sys, u.as_ref(), args.t_end, args.steps, args.substeps)?;

    // One Gramian set per variant, reused across all orders.
    let mut sets = Vec::new();
    for &variant in &args.variants.0 {
        let set = GramianSet::compute(&sys, variant, phi.as_deref(), &opts)?;
        let reduction = bqo_core::reduction::reduce_with(&sys, &set, 1)?;
        io::write_hsv_csv(
            &args.out.join(format!("hsv_{}.csv", variant.tag())),
            &reduction.hsv,
        )?;
        sets.push((variant, set));
    }

    let jobs: Vec<(usize, GramianVariant, usize)> = sets
        .iter()
        .enumerate()
        .flat_map(|(si, (variant, _))| args.r_list.0.iter().map(move |&r| (si, *variant, r)))
        .collect();

    let worker = |job: &(usize, GramianVariant, usize)| -> Result<SweepRow> {
        let (si, variant, r) = *job;
        let reduction = bqo_core::reduction::reduce_with(&sys, &sets[si].1, r)?;
        let traj = simulate_sampled(
            &reduction.reduced,
            u.as_ref(),
            args.t_end,
            args.steps,
            args.substeps,
        )?;
        let report = error_metrics(&full, &traj)?;
        Ok(SweepRow {
            variant: variant.tag().to_string(),
            r,
            frobenius_rel: report.frobenius_rel,
        })
    };

    type JobSlot = Option<Result<SweepRow>>;
    let threads = args.threads.max(1);
    let mut rows: Vec<JobSlot> = (0..jobs.len()).map(|_| None).collect();
    if threads == 1 {
        for (slot, job) in rows.iter_mut().zip(&jobs) {
            *slot = Some(worker(job));
        }
    } else {
        let next = std::sync::atomic::AtomicUsize::new(0);
        let slots = std::sync::Mutex::new(&mut rows);
        std::thread::scope(|scope| {
            for _ in 0..threads.min(jobs.len()) {
                scope.spawn(|| loop {
                    let i = next.fetch_add(1, std::sync::atomic::Ordering::SeqCst);
                    if i >= jobs.len() {
                        break;
                    }
                    let row = worker(&jobs[i]);
                    slots.lock().expect("sweep mutex")[i] = Some(row);
                });
            }
        });
    }
    let rows: Vec<SweepRow> = rows
        .into_iter()
        .map(|slot| slot.expect("every job ran"))
        .collect::<Result<Vec<_>>>()?;

    let mut csv = String::from("variant,r,frobenius_rel\n");
    for row in &rows {
        csv.push_str(&format!(
            "{},{},{}\n",
            row.variant,
            row.r,
            io::format_f64(row.frobenius_rel)
        ));
    }
    std::fs::write(args.out.join("errors.csv"), csv)?;
    io::write_json(&args.out.join("errors.json"), &rows)?;
    RunManifest::new(
        "errsweep",
        vec![args.system.clone()],
        serde_json::to_value(&args)?,
        &args.out,
    )
    .save(&args.out)?;
    Ok(())
}
