//! Bundle formats: matrix CSV files, system/Gramian manifests, trajectory
//! and error exports, and the per-run manifest.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use bqo_core::gramians::GramianVariant;
use bqo_core::model::StabilityCertificate;
use bqo_core::simulation::Trajectory;
use bqo_core::BqoSystem;

/// Formats one value with 17 significant digits, enough to recover the
/// exact `f64` on parse.
pub fn format_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// Writes a dense matrix as CSV, one row per line.
pub fn write_matrix_csv(path: &Path, m: &DMatrix<f64>) -> Result<()> {
    let mut out = String::new();
    for i in 0..m.nrows() {
        let row: Vec<String> = (0..m.ncols()).map(|j| format_f64(m[(i, j)])).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    fs::write(path, out).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

/// Reads a dense matrix from CSV written by [`write_matrix_csv`].
pub fn read_matrix_csv(path: &Path) -> Result<DMatrix<f64>> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let row: Vec<f64> = line
            .split(',')
            .map(|tok| {
                tok.trim().parse::<f64>().with_context(|| {
                    format!("{}:{}: bad number {tok:?}", path.display(), lineno + 1)
                })
            })
            .collect::<Result<_>>()?;
        if let Some(first) = rows.first() {
            if row.len() != first.len() {
                bail!("{}:{}: ragged row", path.display(), lineno + 1);
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        bail!("{}: empty matrix file", path.display());
    }
    let nrows = rows.len();
    let ncols = rows[0].len();
    Ok(DMatrix::from_fn(nrows, ncols, |i, j| rows[i][j]))
}

/// Manifest of a system bundle.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SystemManifest {
    pub n: usize,
    pub m: usize,
    pub p: usize,
    /// Cumulative input scaling already baked into `B` and the `N_k`.
    pub gamma_applied: f64,
}

/// Writes a system bundle: `manifest.json` plus `A.csv`, `B.csv`,
/// `C.csv`, `N1.csv`..., `M1.csv`...
pub fn save_system(dir: &Path, sys: &BqoSystem, gamma_applied: f64) -> Result<()> {
    fs::create_dir_all(dir)?;
    let manifest = SystemManifest {
        n: sys.n(),
        m: sys.m(),
        p: sys.p(),
        gamma_applied,
    };
    write_json(&dir.join("manifest.json"), &manifest)?;
    write_matrix_csv(&dir.join("A.csv"), sys.a())?;
    write_matrix_csv(&dir.join("B.csv"), sys.b())?;
    write_matrix_csv(&dir.join("C.csv"), sys.c())?;
    for (k, nk) in sys.ns().iter().enumerate() {
        write_matrix_csv(&dir.join(format!("N{}.csv", k + 1)), nk)?;
    }
    for (j, mj) in sys.ms().iter().enumerate() {
        write_matrix_csv(&dir.join(format!("M{}.csv", j + 1)), mj)?;
    }
    Ok(())
}

/// Loads a system bundle written by [`save_system`].
pub fn load_system(dir: &Path) -> Result<(BqoSystem, SystemManifest)> {
    let manifest: SystemManifest = read_json(&dir.join("manifest.json"))?;
    let a = read_matrix_csv(&dir.join("A.csv"))?;
    let b = read_matrix_csv(&dir.join("B.csv"))?;
    let c = read_matrix_csv(&dir.join("C.csv"))?;
    let ns = (0..manifest.m)
        .map(|k| read_matrix_csv(&dir.join(format!("N{}.csv", k + 1))))
        .collect::<Result<Vec<_>>>()?;
    let ms = (0..manifest.p)
        .map(|j| read_matrix_csv(&dir.join(format!("M{}.csv", j + 1))))
        .collect::<Result<Vec<_>>>()?;
    let sys = BqoSystem::new(a, b, c, ns, ms)?;
    if sys.n() != manifest.n || sys.m() != manifest.m || sys.p() != manifest.p {
        bail!(
            "bundle dimensions disagree with manifest in {}",
            dir.display()
        );
    }
    Ok((sys, manifest))
}

/// One solved equation in a Gramian report.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ResidualEntry {
    pub equation: String,
    pub relative_residual: f64,
}

/// Residual report stored next to the Gramian CSVs.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GramianReport {
    pub variant: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub phi: Option<Vec<f64>>,
    pub residuals: Vec<ResidualEntry>,
}

/// Writes a Gramian bundle: `P.csv`, optional `Q.csv`, stage matrices,
/// and `residuals.json`.
pub fn save_gramians(
    dir: &Path,
    p: &DMatrix<f64>,
    q: Option<&DMatrix<f64>>,
    variant: GramianVariant,
    phi: Option<&[f64]>,
    residuals: &[(String, f64)],
    stages: &[(String, DMatrix<f64>)],
) -> Result<()> {
    fs::create_dir_all(dir)?;
    write_matrix_csv(&dir.join("P.csv"), p)?;
    if let Some(q) = q {
        write_matrix_csv(&dir.join("Q.csv"), q)?;
    }
    for (name, mat) in stages {
        write_matrix_csv(&dir.join(format!("{name}.csv")), mat)?;
    }
    let report = GramianReport {
        variant: variant.tag().to_string(),
        phi: phi.map(|v| v.to_vec()),
        residuals: residuals
            .iter()
            .map(|(equation, r)| ResidualEntry {
                equation: equation.clone(),
                relative_residual: *r,
            })
            .collect(),
    };
    write_json(&dir.join("residuals.json"), &report)
}

/// Loads the Gramian pair of a bundle.
pub fn load_gramians(dir: &Path) -> Result<(DMatrix<f64>, Option<DMatrix<f64>>, GramianReport)> {
    let p = read_matrix_csv(&dir.join("P.csv"))?;
    let q_path = dir.join("Q.csv");
    let q = if q_path.exists() {
        Some(read_matrix_csv(&q_path)?)
    } else {
        None
    };
    let report: GramianReport = read_json(&dir.join("residuals.json"))?;
    Ok((p, q, report))
}

/// Hankel singular values as a single-column CSV.
pub fn write_hsv_csv(path: &Path, hsv: &[f64]) -> Result<()> {
    let mut out = String::new();
    for &s in hsv {
        out.push_str(&format_f64(s));
        out.push('\n');
    }
    fs::write(path, out).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

/// Trajectory as CSV with columns `t, y_1, ..., y_p`.
pub fn write_trajectory_csv(path: &Path, traj: &Trajectory) -> Result<()> {
    let p = traj.outputs.first().map_or(0, DVector::len);
    let mut out = String::from("t");
    for j in 0..p {
        out.push_str(&format!(",y_{}", j + 1));
    }
    out.push('\n');
    for (t, y) in traj.times.iter().zip(&traj.outputs) {
        out.push_str(&format_f64(*t));
        for j in 0..p {
            out.push(',');
            out.push_str(&format_f64(y[j]));
        }
        out.push('\n');
    }
    fs::write(path, out).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

/// Stability certificate serialized next to Gramian bundles.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CertificateReport {
    pub alpha: f64,
    pub beta: f64,
    pub threshold: f64,
    pub gamma_p: f64,
    pub gamma_qs: f64,
    pub gamma_qa: f64,
    pub exists_p: bool,
    pub exists_qs: bool,
    pub exists_qa: bool,
    pub loose_gamma_p: f64,
    pub loose_gamma_qs: f64,
    pub loose_gamma_qa: f64,
}

impl From<&StabilityCertificate> for CertificateReport {
    fn from(c: &StabilityCertificate) -> Self {
        Self {
            alpha: c.alpha,
            beta: c.beta,
            threshold: c.threshold,
            gamma_p: c.gamma_p,
            gamma_qs: c.gamma_qs,
            gamma_qa: c.gamma_qa,
            exists_p: c.exists_p,
            exists_qs: c.exists_qs,
            exists_qa: c.exists_qa,
            loose_gamma_p: c.loose_gamma_p,
            loose_gamma_qs: c.loose_gamma_qs,
            loose_gamma_qa: c.loose_gamma_qa,
        }
    }
}

/// The per-run manifest written into every output directory.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub inputs: Vec<PathBuf>,
    pub options: serde_json::Value,
    pub output_dir: PathBuf,
    pub tool_version: String,
}

impl RunManifest {
    pub fn new(
        command: &str,
        inputs: Vec<PathBuf>,
        options: serde_json::Value,
        output_dir: &Path,
    ) -> Self {
        Self {
            command: command.to_string(),
            inputs,
            options,
            output_dir: output_dir.to_path_buf(),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
        }
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        write_json(&dir.join("run_manifest.json"), self)
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}
