//! Solvers for standard and generalized Lyapunov equations.
//!
//! Right-sided equations have the form
//!
//! ```text
//! A X + X A^T + sum_k N_k X N_k^T + F = 0,
//! ```
//!
//! left-sided equations the transposed form
//!
//! ```text
//! A^T X + X A + sum_k N_k^T X N_k + F = 0.
//! ```
//!
//! The standard case (`N_k` absent) is solved directly through a Schur
//! reduction followed by triangular back-substitution (Bartels-Stewart
//! family). The generalized case is solved by a fixed-point iteration in
//! which every step is one standard solve; the iterates reproduce the
//! partial sums of the Gramian series. A dense Kronecker-product solver
//! doubles as an independent oracle for verification at small dimensions.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use nalgebra::{ComplexField, DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::{
    self, real_part, spectral_norm, symmetrize, to_complex, vectorize, C64, SCHUR_MAX_ITER,
};

/// Default relative residual threshold.
pub const DEFAULT_RESIDUAL_TOL: f64 = 1e-8;
/// Default relative iterate-change threshold.
pub const DEFAULT_REL_DIFF_TOL: f64 = 1e-7;
/// Default iteration cap of the fixed-point solver.
pub const DEFAULT_MAX_ITER: usize = 50;
/// Hard cap on the dimension admitted by the dense Kronecker oracle;
/// the operator has `n^2 x n^2` entries.
pub const ORACLE_DIM_CAP: usize = 64;

/// Which side of the equation `A` acts on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    /// `A X + X A^T + ... + F = 0`
    Right,
    /// `A^T X + X A + ... + F = 0`
    Left,
}

/// Tolerances and caps for the iterative solver.
#[derive(Debug, Clone)]
pub struct SolverOptions {
    /// Relative residual threshold (dimensionless).
    pub residual_tol: f64,
    /// Relative iterate-change threshold (dimensionless).
    pub rel_diff_tol: f64,
    /// Iteration cap of the fixed-point solver.
    pub max_iter: usize,
    /// Maximum dimension admitted by the Kronecker oracle.
    pub oracle_dim_cap: usize,
}

impl SolverOptions {
    /// Validated constructor.
    pub fn new(
        residual_tol: f64,
        rel_diff_tol: f64,
        max_iter: usize,
        oracle_dim_cap: usize,
    ) -> Result<Self> {
        if residual_tol <= 0.0 || !residual_tol.is_finite() {
            return Err(Error::InvalidOptions {
                what: format!("residual_tol must be positive and finite, got {residual_tol}"),
            });
        }
        if rel_diff_tol <= 0.0 || !rel_diff_tol.is_finite() {
            return Err(Error::InvalidOptions {
                what: format!("rel_diff_tol must be positive and finite, got {rel_diff_tol}"),
            });
        }
        if max_iter == 0 {
            return Err(Error::InvalidOptions {
                what: String::from("max_iter must be at least 1"),
            });
        }
        if oracle_dim_cap == 0 || oracle_dim_cap > ORACLE_DIM_CAP {
            return Err(Error::InvalidOptions {
                what: format!(
                    "oracle_dim_cap must lie in 1..={ORACLE_DIM_CAP}, got {oracle_dim_cap}"
                ),
            });
        }
        Ok(Self {
            residual_tol,
            rel_diff_tol,
            max_iter,
            oracle_dim_cap,
        })
    }
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            residual_tol: DEFAULT_RESIDUAL_TOL,
            rel_diff_tol: DEFAULT_REL_DIFF_TOL,
            max_iter: DEFAULT_MAX_ITER,
            oracle_dim_cap: ORACLE_DIM_CAP,
        }
    }
}

/// Solution of a Lyapunov equation together with diagnostics.
///
/// The matrix is symmetrized on output, so `x == x.transpose()` holds
/// bit-exactly. `converged` is equivalent to
/// `relative_residual <= residual_tol` and can be re-checked through
/// [`residual_norm`].
#[derive(Debug, Clone)]
pub struct LyapunovSolution {
    /// Symmetric solution matrix.
    pub x: DMatrix<f64>,
    /// Relative residual in the spectral norm.
    pub relative_residual: f64,
    /// Number of standard solves performed.
    pub iterations: usize,
    /// Whether the residual threshold was met.
    pub converged: bool,
}

/// Complex Schur factorization of the left operand, reused across the
/// solves of a fixed-point iteration.
pub(crate) struct SchurSolver {
    q: DMatrix<C64>,
    t: DMatrix<C64>,
    n: usize,
}

impl SchurSolver {
    /// Factorizes `a` and rejects unstable matrices.
    pub(crate) fn new(a: &DMatrix<f64>) -> Result<Self> {
        let n = a.nrows();
        if n != a.ncols() {
            return Err(Error::ShapeMismatch {
                what: format!("matrix must be square, got {}x{}", a.nrows(), a.ncols()),
            });
        }
        let schur = nalgebra::linalg::Schur::try_new(to_complex(a), f64::EPSILON, SCHUR_MAX_ITER)
            .ok_or(Error::SchurFailed)?;
        let (q, t) = schur.unpack();
        let max_re = (0..n)
            .map(|i| t[(i, i)].re)
            .fold(f64::NEG_INFINITY, f64::max);
        if n > 0 && (max_re >= 0.0 || max_re.is_nan()) {
            return Err(Error::NotStable {
                max_real_part: max_re,
            });
        }
        Ok(Self { q, t, n })
    }

    /// Solves `A X + X A^T + F = 0` for symmetric `F` and returns the
    /// symmetrized real solution.
    pub(crate) fn solve(&self, f: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        let n = self.n;
        if f.nrows() != n || f.ncols() != n {
            return Err(Error::ShapeMismatch {
                what: format!(
                    "right-hand side must be {n}x{n}, got {}x{}",
                    f.nrows(),
                    f.ncols()
                ),
            });
        }
        let qh = self.q.adjoint();
        let g = &qh * to_complex(f) * &self.q;
        let t = &self.t;

        // T Y + Y T^H = -G, T upper triangular: back-substitute column by
        // column from the right.
        let mut y = DMatrix::<C64>::zeros(n, n);
        for j in (0..n).rev() {
            let mut rhs = DVector::<C64>::zeros(n);
            for i in 0..n {
                rhs[i] = -g[(i, j)];
            }
            for k in (j + 1)..n {
                let coeff = t[(j, k)].conj();
                for i in 0..n {
                    rhs[i] -= y[(i, k)] * coeff;
                }
            }
            let shift = t[(j, j)].conj();
            for i in (0..n).rev() {
                let mut acc = rhs[i];
                for l in (i + 1)..n {
                    acc -= t[(i, l)] * y[(l, j)];
                }
                let pivot = t[(i, i)] + shift;
                if pivot.norm_sqr() < 1e-300 {
                    return Err(Error::SingularDecomposition);
                }
                y[(i, j)] = acc / pivot;
            }
        }
        let x = &self.q * y * qh;
        Ok(symmetrize(&real_part(&x)))
    }
}

fn check_square(m: &DMatrix<f64>, name: &str, n: usize) -> Result<()> {
    if m.nrows() != n || m.ncols() != n {
        return Err(Error::ShapeMismatch {
            what: format!("{name} must be {n}x{n}, got {}x{}", m.nrows(), m.ncols()),
        });
    }
    Ok(())
}

/// Right-form operand pair: for [`Side::Left`] the equation is transposed
/// so that the remaining code only handles `A X + X A^T + ...`.
fn effective_operands(
    a: &DMatrix<f64>,
    ns: &[DMatrix<f64>],
    side: Side,
) -> (DMatrix<f64>, Vec<DMatrix<f64>>) {
    match side {
        Side::Right => (a.clone(), ns.to_vec()),
        Side::Left => (a.transpose(), ns.iter().map(|n| n.transpose()).collect()),
    }
}

fn generalized_rhs(f: &DMatrix<f64>, ns: &[DMatrix<f64>], x: &DMatrix<f64>) -> DMatrix<f64> {
    let mut rhs = f.clone();
    for nk in ns {
        rhs += nk * x * nk.transpose();
    }
    rhs
}

/// Residual matrix `A X + X A^T + sum N X N^T + F` in right form.
fn residual_matrix(
    a: &DMatrix<f64>,
    ns: &[DMatrix<f64>],
    f: &DMatrix<f64>,
    x: &DMatrix<f64>,
) -> DMatrix<f64> {
    let mut r = a * x + x * a.transpose() + f;
    for nk in ns {
        r += nk * x * nk.transpose();
    }
    r
}

/// Relative residual `||L_A(X) + Pi(X) + F|| / ||F||` in spectral norms.
///
/// When `F` is the zero matrix the absolute residual norm is returned.
pub fn residual_norm(
    a: &DMatrix<f64>,
    ns: &[DMatrix<f64>],
    f: &DMatrix<f64>,
    x: &DMatrix<f64>,
    side: Side,
) -> Result<f64> {
    let n = a.nrows();
    check_square(a, "A", n)?;
    check_square(f, "F", n)?;
    check_square(x, "X", n)?;
    for (k, nk) in ns.iter().enumerate() {
        check_square(nk, &format!("N_{}", k + 1), n)?;
    }
    let (ae, nse) = effective_operands(a, ns, side);
    let r = residual_matrix(&ae, &nse, f, x);
    let denom = spectral_norm(f);
    let num = spectral_norm(&r);
    Ok(if denom > 0.0 { num / denom } else { num })
}

/// Direct solve of the standard Lyapunov equation.
///
/// `Side::Right` solves `A X + X A^T + F = 0`, `Side::Left` solves
/// `A^T X + X A + F = 0`. `A` must be stable and `F` symmetric.
pub fn solve_standard(a: &DMatrix<f64>, f: &DMatrix<f64>, side: Side) -> Result<LyapunovSolution> {
    let n = a.nrows();
    check_square(a, "A", n)?;
    check_square(f, "F", n)?;
    let (ae, _) = effective_operands(a, &[], side);
    let solver = SchurSolver::new(&ae)?;
    let x = solver.solve(f)?;
    let relative_residual = residual_norm(a, &[], f, &x, side)?;
    Ok(LyapunovSolution {
        x,
        relative_residual,
        iterations: 1,
        converged: relative_residual <= DEFAULT_RESIDUAL_TOL,
    })
}

/// Fixed-point solve of the generalized Lyapunov equation.
///
/// The seed solves the standard equation with the same `F`; every further
/// iterate solves the standard equation with right-hand side
/// `F + sum_k N_k X N_k^T`, which reproduces the partial sums of the
/// Gramian series. Iteration stops when the relative residual falls below
/// `opts.residual_tol` or the relative iterate change falls below
/// `opts.rel_diff_tol`; exhausting `opts.max_iter` with the residual still
/// above tolerance is an error that reports the last residual.
pub fn solve_generalized_fixed_point(
    a: &DMatrix<f64>,
    ns: &[DMatrix<f64>],
    f: &DMatrix<f64>,
    side: Side,
    opts: &SolverOptions,
) -> Result<LyapunovSolution> {
    let n = a.nrows();
    check_square(a, "A", n)?;
    check_square(f, "F", n)?;
    for (k, nk) in ns.iter().enumerate() {
        check_square(nk, &format!("N_{}", k + 1), n)?;
    }
    let (ae, nse) = effective_operands(a, ns, side);
    let solver = SchurSolver::new(&ae)?;
    let denom = spectral_norm(f);
    let rel_residual = |x: &DMatrix<f64>| -> f64 {
        let num = spectral_norm(&residual_matrix(&ae, &nse, f, x));
        if denom > 0.0 {
            num / denom
        } else {
            num
        }
    };

    let mut x = solver.solve(f)?;
    let mut iterations = 1usize;
    let mut residual = rel_residual(&x);
    let mut converged = residual <= opts.residual_tol;
    let mut stagnated = false;

    while !converged && !stagnated && iterations < opts.max_iter {
        let rhs = generalized_rhs(f, &nse, &x);
        let x_new = solver.solve(&rhs)?;
        let diff = (&x_new - &x).norm();
        let scale = x_new.norm();
        let rel_diff = if scale > 0.0 { diff / scale } else { diff };
        x = x_new;
        iterations += 1;
        let prev_residual = residual;
        residual = rel_residual(&x);
        converged = residual <= opts.residual_tol;
        // The iterate-change threshold is a last-resort stagnation stop:
        // it only ends the iteration once the residual has stopped
        // improving as well, so it cannot preempt the residual stop while
        // the contraction is still making progress.
        stagnated = !converged && rel_diff <= opts.rel_diff_tol && residual >= 0.99 * prev_residual;
    }

    if !converged && !stagnated {
        return Err(Error::NoConvergence {
            iterations,
            last_residual: residual,
        });
    }
    Ok(LyapunovSolution {
        x,
        relative_residual: residual,
        iterations,
        converged,
    })
}

fn kron_operator(a: &DMatrix<f64>, ns: &[DMatrix<f64>]) -> DMatrix<f64> {
    let n = a.nrows();
    let eye = DMatrix::<f64>::identity(n, n);
    let mut k = eye.kronecker(a) + a.kronecker(&eye);
    for nk in ns {
        k += nk.kronecker(nk);
    }
    k
}

/// Dense Kronecker-product solve of the generalized equation, used as the
/// independent verification oracle.
///
/// Solves `(I (x) A + A (x) I + sum_k N_k (x) N_k) vec(X) = -vec(F)` for
/// [`Side::Right`]; the transposed operators are used for [`Side::Left`].
/// Only dimensions up to [`ORACLE_DIM_CAP`] are admitted since the dense
/// operator has `n^2 x n^2` entries.
pub fn solve_generalized_kron_oracle(
    a: &DMatrix<f64>,
    ns: &[DMatrix<f64>],
    f: &DMatrix<f64>,
    side: Side,
) -> Result<LyapunovSolution> {
    let n = a.nrows();
    check_square(a, "A", n)?;
    check_square(f, "F", n)?;
    for (k, nk) in ns.iter().enumerate() {
        check_square(nk, &format!("N_{}", k + 1), n)?;
    }
    if n > ORACLE_DIM_CAP {
        return Err(Error::DimTooLarge {
            dim: n,
            cap: ORACLE_DIM_CAP,
        });
    }
    let (ae, nse) = effective_operands(a, ns, side);
    let op = kron_operator(&ae, &nse);
    let rhs = -vectorize(f);
    let lu = op.lu();
    let sol = lu.solve(&rhs).ok_or(Error::SingularOperator)?;
    if sol.iter().any(|v| !v.is_finite()) {
        return Err(Error::SingularOperator);
    }
    let x = symmetrize(&linalg::unvectorize(&sol, n));
    let relative_residual = residual_norm(a, ns, f, &x, side)?;
    Ok(LyapunovSolution {
        x,
        relative_residual,
        iterations: 1,
        converged: relative_residual <= DEFAULT_RESIDUAL_TOL,
    })
}

/// Spectral radius of `-(I (x) A + A (x) I)^{-1} (sum_k N_k (x) N_k)`.
///
/// The fixed-point iteration for the generalized equation converges for
/// every admissible right-hand side exactly when this radius is below one.
pub fn spectral_radius_certificate(a: &DMatrix<f64>, ns: &[DMatrix<f64>]) -> Result<(f64, bool)> {
    let n = a.nrows();
    check_square(a, "A", n)?;
    for (k, nk) in ns.iter().enumerate() {
        check_square(nk, &format!("N_{}", k + 1), n)?;
    }
    if n > ORACLE_DIM_CAP {
        return Err(Error::DimTooLarge {
            dim: n,
            cap: ORACLE_DIM_CAP,
        });
    }
    linalg::require_stable(a)?;
    if ns.iter().all(|nk| nk.iter().all(|&v| v == 0.0)) {
        return Ok((0.0, true));
    }
    let eye = DMatrix::<f64>::identity(n, n);
    let lyap_op = eye.kronecker(a) + a.kronecker(&eye);
    let mut pi = DMatrix::<f64>::zeros(n * n, n * n);
    for nk in ns {
        pi += nk.kronecker(nk);
    }
    let lu = lyap_op.lu();
    let solved = lu.solve(&pi).ok_or(Error::SingularOperator)?;
    let iter_matrix = -solved;
    let rho = iter_matrix
        .complex_eigenvalues()
        .iter()
        .map(|z| z.norm())
        .fold(0.0_f64, f64::max);
    Ok((rho, rho < 1.0))
}

/// Default clip tolerance for [`psd_factor`]: `n * machine epsilon`,
/// applied relative to the largest eigenvalue.
pub fn default_clip_tol(n: usize) -> f64 {
    n as f64 * f64::EPSILON
}

/// Factors a near-psd symmetric matrix as `X ~ L L^T`.
///
/// Eigenvalues at or below `clip_tol * lambda_max` are clipped to zero and
/// their columns dropped, so `L` has one column per numerically
/// significant eigenvalue and `||X - L L^T|| <= clip_tol * ||X||`. An
/// eigenvalue below `-clip_tol * lambda_max` signals a failed Gramian
/// computation and is rejected.
pub fn psd_factor(x: &DMatrix<f64>, clip_tol: f64) -> Result<DMatrix<f64>> {
    let n = x.nrows();
    check_square(x, "X", n)?;
    if clip_tol < 0.0 || !clip_tol.is_finite() {
        return Err(Error::InvalidOptions {
            what: format!("clip_tol must be nonnegative and finite, got {clip_tol}"),
        });
    }
    let eig = symmetrize(x).symmetric_eigen();
    let lambda_max = eig
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max);
    let lambda_min = eig
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min);
    if n == 0 {
        return Ok(DMatrix::zeros(0, 0));
    }
    let threshold = clip_tol * lambda_max;
    if lambda_min < -threshold {
        return Err(Error::NotPsd {
            min_eigenvalue: lambda_min,
            max_eigenvalue: lambda_max,
        });
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| {
        eig.eigenvalues[j]
            .partial_cmp(&eig.eigenvalues[i])
            .expect("eigenvalues are finite")
    });
    let kept: Vec<usize> = order
        .into_iter()
        .filter(|&i| eig.eigenvalues[i] > threshold)
        .collect();
    let mut factor = DMatrix::<f64>::zeros(n, kept.len());
    for (col, &i) in kept.iter().enumerate() {
        let scale = ComplexField::sqrt(eig.eigenvalues[i]);
        factor
            .column_mut(col)
            .copy_from(&(eig.eigenvectors.column(i) * scale));
    }
    Ok(factor)
}
