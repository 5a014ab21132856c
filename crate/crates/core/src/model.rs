//! The bilinear-with-quadratic-output system model and its stability
//! metadata.

use alloc::format;
use alloc::vec::Vec;

use nalgebra::{ComplexField, DMatrix, DVector};
use num_complex::Complex;

use crate::error::{Error, Result};
use crate::linalg::{self, spectral_norm, symmetrize, to_complex, C64, SCHUR_MAX_ITER};

/// Number of points of the logarithmic grid used to verify the sampled
/// stability bound.
const VERIFY_SAMPLES: usize = 64;
/// Relative slack admitted by the sampled bound check.
const VERIFY_SLACK: f64 = 1e-8;
/// Retries of the shrink-and-resample fallback.
const VERIFY_RETRIES: usize = 10;
/// Condition number of the eigenvector basis beyond which the matrix is
/// treated as numerically non-diagonalizable.
const DIAGONALIZABLE_COND_CAP: f64 = 1e8;

/// A bilinear system with quadratic outputs:
///
/// ```text
/// x'(t) = A x(t) + sum_k N_k x(t) u_k(t) + B u(t),    x(0) = 0,
/// y_j(t) = (C x(t))_j + x(t)^T M_j x(t).
/// ```
///
/// There is one `N_k` per input channel and one `M_j` per output channel;
/// every `M_j` is symmetrized on construction, which leaves the quadratic
/// form unchanged. Instances are immutable and safe to share across
/// threads.
#[derive(Debug, Clone, PartialEq)]
pub struct BqoSystem {
    a: DMatrix<f64>,
    b: DMatrix<f64>,
    c: DMatrix<f64>,
    ns: Vec<DMatrix<f64>>,
    ms: Vec<DMatrix<f64>>,
}

impl BqoSystem {
    /// Validates shapes and entries and builds a system; each `M_j` is
    /// replaced by its symmetric part.
    pub fn new(
        a: DMatrix<f64>,
        b: DMatrix<f64>,
        c: DMatrix<f64>,
        ns: Vec<DMatrix<f64>>,
        ms: Vec<DMatrix<f64>>,
    ) -> Result<Self> {
        let n = a.nrows();
        if a.ncols() != n {
            return Err(Error::ShapeMismatch {
                what: format!("A must be square, got {}x{}", a.nrows(), a.ncols()),
            });
        }
        if b.nrows() != n {
            return Err(Error::ShapeMismatch {
                what: format!("B must have {n} rows, got {}", b.nrows()),
            });
        }
        if c.ncols() != n {
            return Err(Error::ShapeMismatch {
                what: format!("C must have {n} columns, got {}", c.ncols()),
            });
        }
        let m = b.ncols();
        let p = c.nrows();
        if ns.len() != m {
            return Err(Error::ShapeMismatch {
                what: format!(
                    "expected {m} bilinear matrices (one per input), got {}",
                    ns.len()
                ),
            });
        }
        if ms.len() != p {
            return Err(Error::ShapeMismatch {
                what: format!(
                    "expected {p} quadratic-output matrices (one per output), got {}",
                    ms.len()
                ),
            });
        }
        for (k, nk) in ns.iter().enumerate() {
            if nk.nrows() != n || nk.ncols() != n {
                return Err(Error::ShapeMismatch {
                    what: format!(
                        "N_{} must be {n}x{n}, got {}x{}",
                        k + 1,
                        nk.nrows(),
                        nk.ncols()
                    ),
                });
            }
        }
        for (j, mj) in ms.iter().enumerate() {
            if mj.nrows() != n || mj.ncols() != n {
                return Err(Error::ShapeMismatch {
                    what: format!(
                        "M_{} must be {n}x{n}, got {}x{}",
                        j + 1,
                        mj.nrows(),
                        mj.ncols()
                    ),
                });
            }
        }
        linalg::require_finite(&a, "A")?;
        linalg::require_finite(&b, "B")?;
        linalg::require_finite(&c, "C")?;
        for (k, nk) in ns.iter().enumerate() {
            linalg::require_finite(nk, &format!("N_{}", k + 1))?;
        }
        for (j, mj) in ms.iter().enumerate() {
            linalg::require_finite(mj, &format!("M_{}", j + 1))?;
        }
        let ms = ms.iter().map(symmetrize).collect();
        Ok(Self { a, b, c, ns, ms })
    }

    /// State dimension.
    pub fn n(&self) -> usize {
        self.a.nrows()
    }

    /// Number of inputs.
    pub fn m(&self) -> usize {
        self.b.ncols()
    }

    /// Number of outputs.
    pub fn p(&self) -> usize {
        self.c.nrows()
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn b(&self) -> &DMatrix<f64> {
        &self.b
    }

    pub fn c(&self) -> &DMatrix<f64> {
        &self.c
    }

    /// Bilinear coupling matrices, one per input channel.
    pub fn ns(&self) -> &[DMatrix<f64>] {
        &self.ns
    }

    /// Quadratic output matrices, one per output channel; all symmetric.
    pub fn ms(&self) -> &[DMatrix<f64>] {
        &self.ms
    }

    /// Horizontal stack `[N_1 ... N_m]`.
    pub fn stacked_n(&self) -> DMatrix<f64> {
        stack_horizontal(self.n(), &self.ns, false)
    }

    /// Horizontal stack `[N_1^T ... N_m^T]`.
    pub fn stacked_n_t(&self) -> DMatrix<f64> {
        stack_horizontal(self.n(), &self.ns, true)
    }

    /// Horizontal stack `[M_1 ... M_p]`.
    pub fn stacked_m(&self) -> DMatrix<f64> {
        stack_horizontal(self.n(), &self.ms, false)
    }

    /// Output map `y(x)` combining the linear and quadratic parts.
    pub fn output(&self, x: &DVector<f64>) -> DVector<f64> {
        let mut y = &self.c * x;
        for (j, mj) in self.ms.iter().enumerate() {
            y[j] += (x.transpose() * mj * x)[(0, 0)];
        }
        y
    }

    /// Input rescaling `u -> u / gamma`: multiplies every `N_k` and `B`
    /// by `gamma` while `C` and the `M_j` stay untouched. Shrinking
    /// `gamma` tightens the Gramian existence margins quadratically.
    pub fn scale_input(&self, gamma: f64) -> Result<BqoSystem> {
        if !(gamma > 0.0 && gamma <= 1.0) {
            return Err(Error::BadGamma { gamma });
        }
        Ok(BqoSystem {
            a: self.a.clone(),
            b: &self.b * gamma,
            c: self.c.clone(),
            ns: self.ns.iter().map(|nk| nk * gamma).collect(),
            ms: self.ms.clone(),
        })
    }
}

fn stack_horizontal(n: usize, mats: &[DMatrix<f64>], transpose: bool) -> DMatrix<f64> {
    let q = mats.len();
    let mut out = DMatrix::<f64>::zeros(n, n * q);
    for (k, mat) in mats.iter().enumerate() {
        let block = if transpose {
            mat.transpose()
        } else {
            mat.clone()
        };
        out.view_mut((0, k * n), (n, n)).copy_from(&block);
    }
    out
}

/// Decay-rate / transient-bound pair `(alpha, beta)` with
/// `||e^{At}|| <= beta e^{-alpha t}`, plus the Gramian existence margins
/// measured against the threshold `2 alpha / beta^2`.
///
/// The `loose_*` fields report the weaker margins obtained by replacing
/// the spectral norms of the stacked matrices with sums of squared
/// per-matrix norms; they are informational only.
#[derive(Debug, Clone, PartialEq)]
pub struct StabilityCertificate {
    pub alpha: f64,
    pub beta: f64,
    pub gamma_p: f64,
    pub gamma_qs: f64,
    pub gamma_qa: f64,
    pub threshold: f64,
    pub exists_p: bool,
    pub exists_qs: bool,
    pub exists_qa: bool,
    pub loose_gamma_p: f64,
    pub loose_gamma_qs: f64,
    pub loose_gamma_qa: f64,
}

/// Eigenvector matrix of `a` computed from the complex Schur form by
/// back-substitution. Near-defective matrices yield an ill-conditioned
/// basis, which the caller detects through the condition number.
fn eigenvector_basis(a: &DMatrix<f64>) -> Result<(DMatrix<C64>, Vec<C64>)> {
    let n = a.nrows();
    let schur = nalgebra::linalg::Schur::try_new(to_complex(a), f64::EPSILON, SCHUR_MAX_ITER)
        .ok_or(Error::SchurFailed)?;
    let (q, t) = schur.unpack();
    let scale = (0..n)
        .flat_map(|i| (i..n).map(move |j| (i, j)))
        .map(|(i, j)| t[(i, j)].norm())
        .fold(0.0_f64, f64::max)
        .max(1e-300);
    let tiny = f64::EPSILON * scale;
    let mut v = DMatrix::<C64>::zeros(n, n);
    let mut lambdas = Vec::with_capacity(n);
    for i in 0..n {
        let lambda = t[(i, i)];
        lambdas.push(lambda);
        let mut y = DVector::<C64>::zeros(n);
        y[i] = Complex::new(1.0, 0.0);
        for row in (0..i).rev() {
            let mut acc = -t[(row, i)];
            for l in (row + 1)..i {
                acc -= t[(row, l)] * y[l];
            }
            let mut pivot = t[(row, row)] - lambda;
            if pivot.norm() < tiny {
                pivot = Complex::new(tiny, 0.0);
            }
            y[row] = acc / pivot;
        }
        let mut col = &q * y;
        let norm = col.norm();
        if norm > 0.0 {
            col /= Complex::new(norm, 0.0);
        }
        v.column_mut(i).copy_from(&col);
    }
    Ok((v, lambdas))
}

fn complex_cond2(v: &DMatrix<C64>) -> f64 {
    let svd = nalgebra::linalg::SVD::new(v.clone(), false, false);
    let max = svd.singular_values.max();
    let min = svd.singular_values.min();
    if min <= 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

/// Samples `||e^{At}||` on the given grid. Uses the eigenbasis propagator
/// when the basis reproduces `A` accurately, otherwise falls back to the
/// dense exponential per sample.
struct ExpNormSampler<'a> {
    a: &'a DMatrix<f64>,
    eig: Option<(DMatrix<C64>, DMatrix<C64>, Vec<C64>)>,
}

impl<'a> ExpNormSampler<'a> {
    fn new(a: &'a DMatrix<f64>) -> Self {
        let eig = eigenvector_basis(a).ok().and_then(|(v, lambdas)| {
            let lu = v.clone().lu();
            let eye = DMatrix::<C64>::identity(a.nrows(), a.nrows());
            let w = lu.solve(&eye)?;
            let mut rec = DMatrix::<C64>::zeros(a.nrows(), a.nrows());
            for (i, lambda) in lambdas.iter().enumerate() {
                let vi = v.column(i);
                let wi = w.row(i);
                rec += (vi * wi) * *lambda;
            }
            let err = (&rec - to_complex(a)).norm();
            if err <= 1e-9 * a.norm().max(1e-300) {
                Some((v, w, lambdas))
            } else {
                None
            }
        });
        Self { a, eig }
    }

    fn norm_at(&self, t: f64) -> f64 {
        match &self.eig {
            Some((v, w, lambdas)) => {
                let n = self.a.nrows();
                let mut prop = DMatrix::<C64>::zeros(n, n);
                for (i, lambda) in lambdas.iter().enumerate() {
                    let factor = (lambda * t).exp();
                    prop += (v.column(i) * w.row(i)) * factor;
                }
                spectral_norm(&linalg::real_part(&prop))
            }
            None => spectral_norm(&linalg::expm(&(self.a * t))),
        }
    }
}

fn log_grid(alpha: f64) -> Vec<f64> {
    let t0 = 1e-3 / alpha;
    let t1 = 20.0 / alpha;
    let log0 = ComplexField::ln(t0);
    let log1 = ComplexField::ln(t1);
    (0..VERIFY_SAMPLES)
        .map(|i| {
            let s = i as f64 / (VERIFY_SAMPLES - 1) as f64;
            ComplexField::exp(log0 + s * (log1 - log0))
        })
        .collect()
}

/// Estimates stability parameters `(alpha, beta)` with
/// `||e^{At}|| <= beta e^{-alpha t}` for all `t >= 0`.
///
/// For (numerically) diagonalizable `A` the estimate is
/// `alpha = -max Re(lambda)` and `beta = cond_2(V)` with `V` the
/// eigenvector matrix; the pair is then verified by sampling the bound on
/// a logarithmic grid. If verification fails or the eigenbasis is too
/// ill-conditioned, `alpha` is shrunk by `0.9` and `beta` re-estimated as
/// the sampled supremum of `||e^{At}|| e^{alpha t}`, retrying a bounded
/// number of times.
pub fn stability_params(a: &DMatrix<f64>) -> Result<(f64, f64)> {
    linalg::require_finite(a, "A")?;
    let eigs = linalg::require_stable(a)?;
    let max_re = eigs.iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max);
    let mut alpha = -max_re;

    let sampler = ExpNormSampler::new(a);
    let verify = |alpha: f64, beta: f64, sampler: &ExpNormSampler<'_>| -> bool {
        log_grid(alpha).iter().all(|&t| {
            sampler.norm_at(t) <= beta * ComplexField::exp(-alpha * t) * (1.0 + VERIFY_SLACK)
        })
    };
    let sampled_sup = |alpha: f64, sampler: &ExpNormSampler<'_>| -> f64 {
        log_grid(alpha)
            .iter()
            .map(|&t| sampler.norm_at(t) * ComplexField::exp(alpha * t))
            .fold(1.0_f64, f64::max)
    };

    let mut beta = match eigenvector_basis(a) {
        Ok((v, _)) => {
            let cond = complex_cond2(&v);
            if cond.is_finite() && cond <= DIAGONALIZABLE_COND_CAP {
                cond.max(1.0)
            } else {
                sampled_sup(alpha, &sampler)
            }
        }
        Err(_) => sampled_sup(alpha, &sampler),
    };

    if verify(alpha, beta, &sampler) {
        return Ok((alpha, beta));
    }
    for _ in 0..VERIFY_RETRIES {
        alpha *= 0.9;
        beta = sampled_sup(alpha, &sampler);
        if verify(alpha, beta, &sampler) {
            return Ok((alpha, beta));
        }
    }
    Err(Error::VerificationFailed)
}

/// Computes the Gramian existence margins of a system against the
/// threshold `2 alpha / beta^2`.
pub fn existence_margins(sys: &BqoSystem) -> Result<StabilityCertificate> {
    let (alpha, beta) = stability_params(sys.a())?;
    let gamma_p = spectral_norm(&sys.stacked_n()).powi(2);
    let norm_nt_sq = spectral_norm(&sys.stacked_n_t()).powi(2);
    let norm_m_sq = spectral_norm(&sys.stacked_m()).powi(2);
    let gamma_qs = gamma_p.max(norm_nt_sq).max(norm_m_sq);
    let gamma_qa = gamma_p.max(norm_m_sq);
    let threshold = 2.0 * alpha / (beta * beta);

    let sum_n_sq: f64 = sys.ns().iter().map(|nk| spectral_norm(nk).powi(2)).sum();
    let sum_m_sq: f64 = sys.ms().iter().map(|mj| spectral_norm(mj).powi(2)).sum();

    Ok(StabilityCertificate {
        alpha,
        beta,
        gamma_p,
        gamma_qs,
        gamma_qa,
        threshold,
        exists_p: gamma_p < threshold,
        exists_qs: gamma_qs < threshold,
        exists_qa: gamma_qa < threshold,
        loose_gamma_p: sum_n_sq,
        loose_gamma_qs: sum_n_sq.max(sum_m_sq),
        loose_gamma_qa: sum_n_sq.max(sum_m_sq),
    })
}
