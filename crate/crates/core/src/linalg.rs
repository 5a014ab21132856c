//! Small dense linear-algebra helpers shared across the crate.
//!
//! Everything here operates on `nalgebra` dynamic matrices at desk scale;
//! no sparsity is exploited.

use alloc::string::String;
use alloc::vec::Vec;

use nalgebra::{ComplexField, DMatrix, DVector};
use num_complex::Complex;

use crate::error::{Error, Result};

/// Complex scalar used by the Schur-based solvers.
pub type C64 = Complex<f64>;

/// Iteration cap handed to nalgebra's Schur algorithm.
pub(crate) const SCHUR_MAX_ITER: usize = 100_000;

/// Lift a real matrix into the complex plane.
pub fn to_complex(m: &DMatrix<f64>) -> DMatrix<C64> {
    m.map(|x| Complex::new(x, 0.0))
}

/// Real part of a complex matrix.
pub fn real_part(m: &DMatrix<C64>) -> DMatrix<f64> {
    m.map(|z| z.re)
}

/// Exact symmetrization `(M + M^T) / 2`.
pub fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    let mut s = m.clone();
    let n = m.nrows();
    for i in 0..n {
        for j in 0..i {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            s[(i, j)] = v;
            s[(j, i)] = v;
        }
    }
    s
}

/// Spectral norm (largest singular value); zero for empty matrices.
pub fn spectral_norm(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0.0;
    }
    let svd = nalgebra::linalg::SVD::new(m.clone(), false, false);
    svd.singular_values.max()
}

/// Largest absolute column sum, used for exponential scaling.
fn one_norm(m: &DMatrix<f64>) -> f64 {
    let mut best = 0.0_f64;
    for j in 0..m.ncols() {
        let s: f64 = m.column(j).iter().map(|x| ComplexField::abs(*x)).sum();
        if s > best {
            best = s;
        }
    }
    best
}

/// Eigenvalue range of a symmetric matrix, returned as `(min, max)`.
pub fn symmetric_eigen_bounds(m: &DMatrix<f64>) -> (f64, f64) {
    let eig = m.clone().symmetric_eigen();
    let mut min = f64::INFINITY;
    let mut max = f64::NEG_INFINITY;
    for &l in eig.eigenvalues.iter() {
        min = min.min(l);
        max = max.max(l);
    }
    (min, max)
}

/// Checks that all eigenvalues of `a` have negative real part and returns
/// them on success.
pub fn require_stable(a: &DMatrix<f64>) -> Result<Vec<C64>> {
    let eig = a.complex_eigenvalues();
    let max_re = eig.iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max);
    if max_re >= 0.0 || max_re.is_nan() {
        return Err(Error::NotStable {
            max_real_part: max_re,
        });
    }
    Ok(eig.iter().copied().collect())
}

/// Ensures every entry of `m` is finite.
pub fn require_finite(m: &DMatrix<f64>, what: &str) -> Result<()> {
    if m.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite {
            what: String::from(what),
        });
    }
    Ok(())
}

/// Column-major vectorization of a matrix.
pub fn vectorize(m: &DMatrix<f64>) -> DVector<f64> {
    DVector::from_column_slice(m.as_slice())
}

/// Inverse of [`vectorize`] for an `n x n` matrix.
pub fn unvectorize(v: &DVector<f64>, n: usize) -> DMatrix<f64> {
    DMatrix::from_column_slice(n, n, v.as_slice())
}

/// Pade(13) coefficients for the scaling-and-squaring exponential.
const PADE13: [f64; 14] = [
    64_764_752_532_480_000.0,
    32_382_376_266_240_000.0,
    7_771_770_303_897_600.0,
    1_187_353_796_428_800.0,
    129_060_195_264_000.0,
    10_559_470_521_600.0,
    670_442_572_800.0,
    33_522_128_640.0,
    1_323_241_920.0,
    40_840_800.0,
    960_960.0,
    16_380.0,
    182.0,
    1.0,
];

const PADE13_THETA: f64 = 5.371_920_351_148_152;

/// Dense matrix exponential via scaling and squaring with a Pade(13)
/// approximant.
pub fn expm(a: &DMatrix<f64>) -> DMatrix<f64> {
    let n = a.nrows();
    assert_eq!(n, a.ncols(), "expm needs a square matrix");
    let norm = one_norm(a);
    let mut squarings = 0u32;
    let mut scaled = a.clone();
    if norm > PADE13_THETA {
        let ratio = norm / PADE13_THETA;
        squarings = ComplexField::ceil(ComplexField::log2(ratio)) as u32;
        scaled /= ComplexField::powi(2.0_f64, squarings as i32);
    }

    let ident = DMatrix::<f64>::identity(n, n);
    let a2 = &scaled * &scaled;
    let a4 = &a2 * &a2;
    let a6 = &a4 * &a2;
    let b = &PADE13;

    let u_inner = &a6 * (b[13] * &a6 + b[11] * &a4 + b[9] * &a2)
        + b[7] * &a6
        + b[5] * &a4
        + b[3] * &a2
        + b[1] * &ident;
    let u = &scaled * u_inner;
    let v = &a6 * (b[12] * &a6 + b[10] * &a4 + b[8] * &a2)
        + b[6] * &a6
        + b[4] * &a4
        + b[2] * &a2
        + b[0] * &ident;

    let lhs = &v - &u;
    let rhs = &v + &u;
    let mut exp = lhs
        .lu()
        .solve(&rhs)
        .expect("Pade denominator is nonsingular for scaled input");
    for _ in 0..squarings {
        exp = &exp * &exp;
    }
    exp
}

/// Orthonormal eigenvectors of a symmetric matrix whose eigenvalues fall
/// at or below `rel_tol * lambda_max`, i.e. the numerical kernel.
pub fn numerical_kernel(m: &DMatrix<f64>, rel_tol: f64) -> Vec<DVector<f64>> {
    let eig = m.clone().symmetric_eigen();
    let max = eig.eigenvalues.iter().fold(0.0_f64, |acc, &l| acc.max(l));
    let threshold = rel_tol * max;
    let mut kernel = Vec::new();
    for (i, &l) in eig.eigenvalues.iter().enumerate() {
        if l <= threshold {
            kernel.push(eig.eigenvectors.column(i).clone_owned());
        }
    }
    kernel
}
