//! Reachability and observability Gramians, their series expansions, and
//! the truncated variants computable from standard Lyapunov solves only.
//!
//! All Gramians are characterized as solutions of (generalized) Lyapunov
//! equations:
//!
//! * reachability `P`:  `A P + P A^T + sum_k N_k P N_k^T + B B^T = 0`
//! * standard `Q^S`:    `A^T Q + Q A + sum_k N_k^T Q N_k + sum_j M_j P M_j + C^T C = 0`
//! * alternative `Q^A`: `A^T Q + Q A + sum_j M_j P M_j + C^T C = 0`
//! * mixed `Q^M`:       as `Q^S` with `N_k` replaced by `phi_k N_k`
//!
//! The standard and alternative observability Gramians arise from two
//! different primal/dual splittings of the same system; the mixed family
//! interpolates between them (`phi = 1` gives `Q^S`, `phi = 0` gives
//! `Q^A`). A further equivalent construction assembles the observability
//! Gramian from the bilinear-system series plus quadratic cross terms;
//! because the underlying equation has a unique psd solution the series
//! converges to `Q^S`, which [`SeriesTerms`] exposes for verification.
//!
//! Truncated Gramians keep a fixed number of series terms and therefore
//! need only standard Lyapunov solves (no fixed-point iteration); see
//! [`truncated_reachability`] and the three truncated observability
//! constructions.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linalg::{self, symmetrize};
use crate::lyapunov::{
    solve_generalized_fixed_point, solve_standard, LyapunovSolution, SchurSolver, Side,
    SolverOptions,
};
use crate::model::BqoSystem;

/// Relative psd tolerance admitted for computed Gramians:
/// `lambda_min >= -GRAMIAN_PSD_TOL * lambda_max`.
pub const GRAMIAN_PSD_TOL: f64 = 1e-10;
/// Relative eigenvalue threshold defining the numerical kernel of a
/// Gramian.
pub const KERNEL_EIG_TOL: f64 = 1e-10;
/// Default depth of the observability series used for verification.
pub const DEFAULT_SERIES_DEPTH: usize = 8;
/// Series terms smaller than this fraction of the partial sum are not
/// accumulated further.
pub const SERIES_EARLY_STOP: f64 = 1e-12;

/// Which Gramian pair a [`GramianSet`] holds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GramianVariant {
    /// Full `P` with the standard observability Gramian `Q^S`.
    Standard,
    /// Full `P` with the alternative observability Gramian `Q^A`.
    Alternative,
    /// Full `P` with the mixed observability Gramian `Q^M(phi)`.
    Mixed,
    /// Full `P` with the observability Gramian assembled from the series
    /// expansion (equal to `Q^S` when both exist).
    Series,
    /// Truncated `P_T` with the three-solve truncated `Q^S_T`.
    TruncatedStandard,
    /// Truncated `P_T` with the two-solve truncated series Gramian
    /// `Q^P_T`.
    TruncatedSeries,
    /// Truncated `P_T` with the truncated alternative Gramian `Q^A_T`.
    TruncatedAlternative,
    /// Reachability Gramian only.
    Reachability,
    /// Truncated reachability Gramian only.
    TruncatedReachability,
}

impl GramianVariant {
    /// Short tag used by file formats and the command line.
    pub fn tag(&self) -> &'static str {
        match self {
            GramianVariant::Standard => "S",
            GramianVariant::Alternative => "A",
            GramianVariant::Mixed => "M",
            GramianVariant::Series => "P",
            GramianVariant::TruncatedStandard => "TS",
            GramianVariant::TruncatedSeries => "TP",
            GramianVariant::TruncatedAlternative => "TA",
            GramianVariant::Reachability => "reach",
            GramianVariant::TruncatedReachability => "Treach",
        }
    }

    /// Inverse of [`GramianVariant::tag`].
    pub fn from_tag(tag: &str) -> Option<Self> {
        Some(match tag {
            "S" => GramianVariant::Standard,
            "A" => GramianVariant::Alternative,
            "M" => GramianVariant::Mixed,
            "P" => GramianVariant::Series,
            "TS" => GramianVariant::TruncatedStandard,
            "TP" => GramianVariant::TruncatedSeries,
            "TA" => GramianVariant::TruncatedAlternative,
            "reach" => GramianVariant::Reachability,
            "Treach" => GramianVariant::TruncatedReachability,
            _ => return None,
        })
    }
}

impl core::fmt::Display for GramianVariant {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str(self.tag())
    }
}

/// Named intermediate matrices produced on the way to a Gramian set
/// (`P_1` and the chained observability stages).
pub type GramianStages = Vec<(String, DMatrix<f64>)>;

/// A computed Gramian pair with provenance.
///
/// `p` is psd and symmetric; `q` is present unless the variant is
/// reachability-only. `residuals` records the relative residual of every
/// Lyapunov equation solved on the way, in solve order.
#[derive(Debug, Clone)]
pub struct GramianSet {
    pub p: DMatrix<f64>,
    pub q: Option<DMatrix<f64>>,
    pub variant: GramianVariant,
    pub residuals: Vec<(String, f64)>,
    pub phi: Option<Vec<f64>>,
}

fn check_psd(x: &DMatrix<f64>, _what: &str) -> Result<()> {
    let (min, max) = linalg::symmetric_eigen_bounds(x);
    if min < -GRAMIAN_PSD_TOL * max.max(0.0) {
        return Err(Error::NotPsd {
            min_eigenvalue: min,
            max_eigenvalue: max,
        });
    }
    Ok(())
}

/// `B B^T`, the reachability right-hand side.
fn reach_rhs(sys: &BqoSystem) -> DMatrix<f64> {
    sys.b() * sys.b().transpose()
}

/// `C^T C + sum_j M_j X M_j`, the observability right-hand side.
fn obs_rhs(sys: &BqoSystem, x: &DMatrix<f64>) -> DMatrix<f64> {
    let mut f = sys.c().transpose() * sys.c();
    for mj in sys.ms() {
        f += mj * x * mj;
    }
    symmetrize(&f)
}

/// `sum_k N_k^T X N_k`, the bilinear observability coupling.
fn bilinear_obs_term(sys: &BqoSystem, x: &DMatrix<f64>) -> DMatrix<f64> {
    let mut f = DMatrix::zeros(sys.n(), sys.n());
    for nk in sys.ns() {
        f += nk.transpose() * x * nk;
    }
    symmetrize(&f)
}

/// Full reachability Gramian via the fixed-point iteration.
///
/// Convergence is guaranteed when the existence margin `Gamma_P` stays
/// below `2 alpha / beta^2`; the solver still attempts the iteration
/// otherwise and reports `NoConvergence` with the last residual if it
/// fails (the margin condition is sufficient, not necessary).
pub fn reachability(sys: &BqoSystem, opts: &SolverOptions) -> Result<LyapunovSolution> {
    let sol = solve_generalized_fixed_point(sys.a(), sys.ns(), &reach_rhs(sys), Side::Right, opts)?;
    check_psd(&sol.x, "P")?;
    Ok(sol)
}

/// Standard observability Gramian `Q^S`, depending on the full
/// reachability Gramian `p`.
pub fn observability_standard(
    sys: &BqoSystem,
    p: &DMatrix<f64>,
    opts: &SolverOptions,
) -> Result<LyapunovSolution> {
    let sol = solve_generalized_fixed_point(sys.a(), sys.ns(), &obs_rhs(sys, p), Side::Left, opts)?;
    check_psd(&sol.x, "Q^S")?;
    Ok(sol)
}

/// Alternative observability Gramian `Q^A`: one standard solve, no
/// fixed-point iteration.
pub fn observability_alternative(sys: &BqoSystem, p: &DMatrix<f64>) -> Result<LyapunovSolution> {
    let sol = solve_standard(sys.a(), &obs_rhs(sys, p), Side::Left)?;
    check_psd(&sol.x, "Q^A")?;
    Ok(sol)
}

/// Mixed observability Gramian `Q^M` interpolating between `Q^S`
/// (`phi = 1`) and `Q^A` (`phi = 0`) per input channel.
pub fn observability_mixed(
    sys: &BqoSystem,
    p: &DMatrix<f64>,
    phi: &[f64],
    opts: &SolverOptions,
) -> Result<LyapunovSolution> {
    if phi.len() != sys.m() {
        return Err(Error::InvalidOptions {
            what: format!(
                "phi must have one entry per input ({}), got {}",
                sys.m(),
                phi.len()
            ),
        });
    }
    for (k, &ph) in phi.iter().enumerate() {
        if !(0.0..=1.0).contains(&ph) {
            return Err(Error::InvalidOptions {
                what: format!("phi_{} = {ph} outside [0, 1]", k + 1),
            });
        }
    }
    let scaled: Vec<DMatrix<f64>> = sys.ns().iter().zip(phi).map(|(nk, &ph)| nk * ph).collect();
    let sol = solve_generalized_fixed_point(sys.a(), &scaled, &obs_rhs(sys, p), Side::Left, opts)?;
    check_psd(&sol.x, "Q^M")?;
    Ok(sol)
}

/// Terms of the Gramian series expansions, all obtained from standard
/// Lyapunov solves.
///
/// * `reach[i]` — reachability terms `P_{i+1}`
/// * `obs_standard[i]` — standard observability terms `Q^S_{i+1}`
/// * `obs_bilinear[i]` — bilinear observability terms (quadratic outputs
///   ignored)
/// * `cross[i][j]` — quadratic-output cross terms of total order
///   `i + j + 2`, stored for `i + j + 2 <= depth + 1`
///
/// Every term is symmetric psd, so all partial sums are monotonically
/// nondecreasing in the psd order.
#[derive(Debug, Clone)]
pub struct SeriesTerms {
    pub reach: Vec<DMatrix<f64>>,
    pub obs_standard: Vec<DMatrix<f64>>,
    pub obs_bilinear: Vec<DMatrix<f64>>,
    pub cross: Vec<Vec<DMatrix<f64>>>,
    pub depth: usize,
}

impl SeriesTerms {
    /// Partial sum of the reachability series up to `depth` terms.
    pub fn reach_partial_sum(&self, depth: usize) -> DMatrix<f64> {
        sum_terms(&self.reach[..depth.min(self.reach.len())])
    }

    /// Partial sum of the standard observability series.
    pub fn standard_partial_sum(&self, depth: usize) -> DMatrix<f64> {
        sum_terms(&self.obs_standard[..depth.min(self.obs_standard.len())])
    }

    /// Partial sum of the series-based observability Gramian: bilinear
    /// terms up to `depth` plus all stored cross terms of total order at
    /// most `depth + 1`.
    pub fn series_partial_sum(&self, depth: usize) -> DMatrix<f64> {
        let mut sum = sum_terms(&self.obs_bilinear[..depth.min(self.obs_bilinear.len())]);
        for (i, row) in self.cross.iter().enumerate() {
            for (j, term) in row.iter().enumerate() {
                if i + j + 2 <= depth + 1 {
                    sum += term;
                }
            }
        }
        symmetrize(&sum)
    }
}

fn sum_terms(terms: &[DMatrix<f64>]) -> DMatrix<f64> {
    let n = terms.first().map_or(0, |t| t.nrows());
    let mut sum = DMatrix::zeros(n, n);
    for t in terms {
        sum += t;
    }
    sum
}

/// Computes the series terms up to the given depth.
///
/// Recursions (all standard solves, right side for reachability, left
/// side for observability):
///
/// * `A P_1 + P_1 A^T + B B^T = 0`, then
///   `A P_i + P_i A^T + sum_k N_k P_{i-1} N_k^T = 0`
/// * `A^T Q_1 + Q_1 A + C^T C = 0`, then
///   `A^T Q_i + Q_i A + sum_k N_k^T Q_{i-1} N_k + sum_j M_j P_{i-1} M_j = 0`
/// * bilinear terms drop the `M_j` contribution
/// * cross terms start from
///   `A^T X + X A + sum_j M_j P_c M_j = 0` for each reachability term
///   `P_c` and then iterate the bilinear coupling.
pub fn series_terms(sys: &BqoSystem, depth: usize) -> Result<SeriesTerms> {
    if depth == 0 {
        return Err(Error::InvalidOptions {
            what: String::from("series depth must be at least 1"),
        });
    }
    let right = SchurSolver::new(sys.a())?;
    let left = SchurSolver::new(&sys.a().transpose())?;
    let n = sys.n();

    let mut reach = Vec::with_capacity(depth);
    reach.push(right.solve(&reach_rhs(sys))?);
    for i in 1..depth {
        let mut rhs = DMatrix::zeros(n, n);
        for nk in sys.ns() {
            rhs += nk * &reach[i - 1] * nk.transpose();
        }
        reach.push(right.solve(&symmetrize(&rhs))?);
    }

    let ctc = sys.c().transpose() * sys.c();
    let mut obs_standard = Vec::with_capacity(depth);
    obs_standard.push(left.solve(&ctc)?);
    for i in 1..depth {
        let mut rhs = bilinear_obs_term(sys, &obs_standard[i - 1]);
        for mj in sys.ms() {
            rhs += mj * &reach[i - 1] * mj;
        }
        obs_standard.push(left.solve(&symmetrize(&rhs))?);
    }

    let mut obs_bilinear = Vec::with_capacity(depth);
    obs_bilinear.push(obs_standard[0].clone());
    for i in 1..depth {
        let rhs = bilinear_obs_term(sys, &obs_bilinear[i - 1]);
        obs_bilinear.push(left.solve(&rhs)?);
    }

    let mut cross: Vec<Vec<DMatrix<f64>>> = Vec::new();
    for i in 1..=depth {
        let mut row = Vec::new();
        for j in 1..=(depth + 1 - i) {
            let term = if i == 1 {
                let mut rhs = DMatrix::zeros(n, n);
                for mj in sys.ms() {
                    rhs += mj * &reach[j - 1] * mj;
                }
                left.solve(&symmetrize(&rhs))?
            } else {
                let prev = &cross[i - 2][j - 1];
                left.solve(&bilinear_obs_term(sys, prev))?
            };
            row.push(term);
        }
        cross.push(row);
    }

    Ok(SeriesTerms {
        reach,
        obs_standard,
        obs_bilinear,
        cross,
        depth,
    })
}

/// Truncated reachability Gramian: two standard solves.
///
/// Returns `(P_1, P_T)` where `P_1` solves `A P_1 + P_1 A^T + B B^T = 0`
/// and `P_T` solves the same equation with the right-hand side augmented
/// by `sum_k N_k P_1 N_k^T`, keeping the first two series terms.
pub fn truncated_reachability(sys: &BqoSystem) -> Result<(LyapunovSolution, LyapunovSolution)> {
    let bbt = reach_rhs(sys);
    let p1 = solve_standard(sys.a(), &bbt, Side::Right)?;
    let mut rhs = bbt;
    for nk in sys.ns() {
        rhs += nk * &p1.x * nk.transpose();
    }
    let pt = solve_standard(sys.a(), &symmetrize(&rhs), Side::Right)?;
    check_psd(&p1.x, "P_1")?;
    check_psd(&pt.x, "P_T")?;
    Ok((p1, pt))
}

/// Truncated standard observability Gramian: three chained standard
/// solves reusing `P_1` and `P_T`.
///
/// Returns `(Q_1, Q_hat, Q^S_T)`: `Q_1` solves the linear equation,
/// `Q_hat` adds the couplings built from `Q_1` and `P_1`, and `Q^S_T`
/// adds the couplings built from `Q_hat` and `P_T`.
pub fn truncated_observability_standard(
    sys: &BqoSystem,
    p1: &DMatrix<f64>,
    p_t: &DMatrix<f64>,
) -> Result<(LyapunovSolution, LyapunovSolution, LyapunovSolution)> {
    let ctc = sys.c().transpose() * sys.c();
    let q1 = solve_standard(sys.a(), &ctc, Side::Left)?;

    let mut rhs = &ctc + bilinear_obs_term(sys, &q1.x);
    for mj in sys.ms() {
        rhs += mj * p1 * mj;
    }
    let q_hat = solve_standard(sys.a(), &symmetrize(&rhs), Side::Left)?;

    let mut rhs = &ctc + bilinear_obs_term(sys, &q_hat.x);
    for mj in sys.ms() {
        rhs += mj * p_t * mj;
    }
    let q_t = solve_standard(sys.a(), &symmetrize(&rhs), Side::Left)?;
    check_psd(&q_t.x, "Q^S_T")?;
    Ok((q1, q_hat, q_t))
}

/// Truncated series observability Gramian: two standard solves reusing
/// `P_T` in both right-hand sides (one solve fewer than the standard
/// truncation).
///
/// Returns `(Q_hat, Q^P_T)`. The intermediate `Q_hat` coincides with the
/// truncated alternative Gramian `Q^A_T`.
pub fn truncated_observability_series(
    sys: &BqoSystem,
    p_t: &DMatrix<f64>,
) -> Result<(LyapunovSolution, LyapunovSolution)> {
    let q_hat = truncated_observability_alternative(sys, p_t)?;
    let rhs = obs_rhs(sys, p_t) + bilinear_obs_term(sys, &q_hat.x);
    let q_t = solve_standard(sys.a(), &symmetrize(&rhs), Side::Left)?;
    check_psd(&q_t.x, "Q^P_T")?;
    Ok((q_hat, q_t))
}

/// Truncated alternative observability Gramian: one standard solve with
/// `P_T` in place of `P`. Note `Q^A_T != Q^A` in general.
pub fn truncated_observability_alternative(
    sys: &BqoSystem,
    p_t: &DMatrix<f64>,
) -> Result<LyapunovSolution> {
    let sol = solve_standard(sys.a(), &obs_rhs(sys, p_t), Side::Left)?;
    check_psd(&sol.x, "Q^A_T")?;
    Ok(sol)
}

/// Orthonormal basis of the numerical kernel of a Gramian: eigenvectors
/// with eigenvalues at or below `KERNEL_EIG_TOL * lambda_max`.
pub fn gramian_kernel(q: &DMatrix<f64>) -> Vec<nalgebra::DVector<f64>> {
    linalg::numerical_kernel(q, KERNEL_EIG_TOL)
}

impl GramianSet {
    /// Computes the Gramian pair for the requested variant.
    ///
    /// `phi` is required exactly for [`GramianVariant::Mixed`].
    pub fn compute(
        sys: &BqoSystem,
        variant: GramianVariant,
        phi: Option<&[f64]>,
        opts: &SolverOptions,
    ) -> Result<Self> {
        Self::compute_with_stages(sys, variant, phi, opts).map(|(set, _)| set)
    }

    /// Like [`GramianSet::compute`] but also returns the named
    /// intermediate matrices (`P_1`, the chained observability stages)
    /// so callers can export them.
    pub fn compute_with_stages(
        sys: &BqoSystem,
        variant: GramianVariant,
        phi: Option<&[f64]>,
        opts: &SolverOptions,
    ) -> Result<(Self, GramianStages)> {
        if variant != GramianVariant::Mixed && phi.is_some() {
            return Err(Error::InvalidOptions {
                what: String::from("phi is only meaningful for the mixed variant"),
            });
        }
        let mut residuals = Vec::new();
        let mut stages = Vec::new();
        let set = match variant {
            GramianVariant::Standard
            | GramianVariant::Alternative
            | GramianVariant::Mixed
            | GramianVariant::Series
            | GramianVariant::Reachability => {
                let p = reachability(sys, opts)?;
                residuals.push((String::from("P"), p.relative_residual));
                let (q, phi_used) = match variant {
                    GramianVariant::Standard => {
                        let q = observability_standard(sys, &p.x, opts)?;
                        residuals.push((String::from("Q^S"), q.relative_residual));
                        (Some(q.x), None)
                    }
                    GramianVariant::Alternative => {
                        let q = observability_alternative(sys, &p.x)?;
                        residuals.push((String::from("Q^A"), q.relative_residual));
                        (Some(q.x), None)
                    }
                    GramianVariant::Mixed => {
                        let phi = phi.ok_or_else(|| Error::InvalidOptions {
                            what: String::from("the mixed variant requires phi"),
                        })?;
                        let q = observability_mixed(sys, &p.x, phi, opts)?;
                        residuals.push((String::from("Q^M"), q.relative_residual));
                        (Some(q.x), Some(phi.to_vec()))
                    }
                    GramianVariant::Series => {
                        let terms = series_terms(sys, DEFAULT_SERIES_DEPTH)?;
                        let mut q = terms.series_partial_sum(1);
                        for d in 2..=DEFAULT_SERIES_DEPTH {
                            let next = terms.series_partial_sum(d);
                            let increment = (&next - &q).norm();
                            q = next;
                            if increment < SERIES_EARLY_STOP * q.norm() {
                                break;
                            }
                        }
                        check_psd(&q, "Q^P")?;
                        let res = crate::lyapunov::residual_norm(
                            sys.a(),
                            sys.ns(),
                            &obs_rhs(sys, &p.x),
                            &q,
                            Side::Left,
                        )?;
                        residuals.push((String::from("Q^P"), res));
                        (Some(q), None)
                    }
                    GramianVariant::Reachability => (None, None),
                    _ => unreachable!(),
                };
                GramianSet {
                    p: p.x,
                    q,
                    variant,
                    residuals,
                    phi: phi_used,
                }
            }
            GramianVariant::TruncatedStandard
            | GramianVariant::TruncatedSeries
            | GramianVariant::TruncatedAlternative
            | GramianVariant::TruncatedReachability => {
                let (p1, pt) = truncated_reachability(sys)?;
                residuals.push((String::from("P_1"), p1.relative_residual));
                residuals.push((String::from("P_T"), pt.relative_residual));
                stages.push((String::from("P1"), p1.x.clone()));
                let q = match variant {
                    GramianVariant::TruncatedStandard => {
                        let (q1, q_hat, q_t) = truncated_observability_standard(sys, &p1.x, &pt.x)?;
                        residuals.push((String::from("Q_1"), q1.relative_residual));
                        residuals.push((String::from("Q_hat"), q_hat.relative_residual));
                        residuals.push((String::from("Q^S_T"), q_t.relative_residual));
                        stages.push((String::from("Q1"), q1.x));
                        stages.push((String::from("Qhat"), q_hat.x));
                        Some(q_t.x)
                    }
                    GramianVariant::TruncatedSeries => {
                        let (q_hat, q_t) = truncated_observability_series(sys, &pt.x)?;
                        residuals.push((String::from("Q_hat"), q_hat.relative_residual));
                        residuals.push((String::from("Q^P_T"), q_t.relative_residual));
                        stages.push((String::from("Qhat"), q_hat.x));
                        Some(q_t.x)
                    }
                    GramianVariant::TruncatedAlternative => {
                        let q_t = truncated_observability_alternative(sys, &pt.x)?;
                        residuals.push((String::from("Q^A_T"), q_t.relative_residual));
                        Some(q_t.x)
                    }
                    GramianVariant::TruncatedReachability => None,
                    _ => unreachable!(),
                };
                GramianSet {
                    p: pt.x,
                    q,
                    variant,
                    residuals,
                    phi: None,
                }
            }
        };
        Ok((set, stages))
    }
}
