//! Square-root balanced truncation.
//!
//! Given factors `P = U U^T` and `Q = L L^T` of a reachability /
//! observability Gramian pair, the reduction computes the SVD
//! `U^T L = Z Sigma Y^T`, whose singular values are the Hankel singular
//! values, and forms the Petrov-Galerkin pair
//!
//! ```text
//! W = L Y_1 Sigma_1^{-1/2},      V = U Z_1 Sigma_1^{-1/2},
//! ```
//!
//! with `W^T V = I_r`. The reduced system is `(W^T A V, W^T B, C V,
//! W^T N_k V, V^T M_j V)`; the quadratic output matrices stay symmetric
//! by construction. Explicit balancing transforms are never formed.

use alloc::format;
use alloc::vec::Vec;

use nalgebra::{ComplexField, DMatrix};

use crate::error::{Error, Result};
use crate::gramians::GramianSet;
use crate::lyapunov::psd_factor;
use crate::model::BqoSystem;

/// Singular values below `RANK_TOL * sigma_1` do not count towards the
/// numerical rank of `U^T L`.
pub const RANK_TOL: f64 = 1e-12;
/// A truncation boundary with `sigma_r - sigma_{r+1}` below
/// `TIE_TOL * sigma_1` is flagged as a tie.
pub const TIE_TOL: f64 = 1e-10;
/// Clip tolerance used when factoring computed Gramians, matching the
/// psd tolerance the Gramian solvers guarantee.
pub const GRAMIAN_CLIP_TOL: f64 = 1e-10;

/// Outcome of a balanced truncation.
#[derive(Debug, Clone)]
pub struct BalancingResult {
    /// All Hankel singular values of `U^T L`, nonincreasing.
    pub hsv: Vec<f64>,
    /// Left projection, `n x r`.
    pub w: DMatrix<f64>,
    /// Right projection, `n x r`, with `W^T V = I_r`.
    pub v: DMatrix<f64>,
    /// The reduced system of order `r`.
    pub reduced: BqoSystem,
    /// Number of singular values above the rank threshold.
    pub numerical_rank: usize,
    /// True when the truncation boundary fell on a (near-)tie
    /// `sigma_r ~ sigma_{r+1}`; the reduction proceeds regardless.
    pub boundary_tie: bool,
}

/// Balanced truncation from Gramian square-root factors.
///
/// `u` and `l` are `n x r_P` / `n x r_Q` factors with `P = U U^T` and
/// `Q = L L^T` (see [`psd_factor`]); `r` is the target order and must not
/// exceed the numerical rank of `U^T L`.
///
/// SVD signs are fixed so that the largest-magnitude entry of every left
/// singular vector is positive, making the projections reproducible
/// across platforms.
pub fn balanced_truncation(
    sys: &BqoSystem,
    u: &DMatrix<f64>,
    l: &DMatrix<f64>,
    r: usize,
) -> Result<BalancingResult> {
    let n = sys.n();
    if u.nrows() != n || l.nrows() != n {
        return Err(Error::ShapeMismatch {
            what: format!(
                "factors must have {n} rows, got {} and {}",
                u.nrows(),
                l.nrows()
            ),
        });
    }
    let product = u.transpose() * l;
    let svd = nalgebra::linalg::SVD::new(product, true, true);
    let hsv: Vec<f64> = svd.singular_values.iter().copied().collect();
    let mut z = svd.u.expect("SVD with vectors requested");
    let mut y_t = svd.v_t.expect("SVD with vectors requested");

    let sigma1 = hsv.first().copied().unwrap_or(0.0);
    let numerical_rank = hsv
        .iter()
        .filter(|&&s| s > RANK_TOL * sigma1 && s > 0.0)
        .count();
    if r == 0 || r > numerical_rank {
        return Err(Error::RankDeficient {
            requested: r,
            achievable: numerical_rank,
        });
    }
    let boundary_tie = r < hsv.len() && (hsv[r - 1] - hsv[r]).abs() <= TIE_TOL * sigma1;

    // Sign convention: largest-magnitude entry of each left singular
    // vector positive.
    for i in 0..z.ncols().min(y_t.nrows()) {
        let col = z.column(i);
        let mut best = 0usize;
        let mut best_abs = 0.0;
        for (row, &val) in col.iter().enumerate() {
            if ComplexField::abs(val) > best_abs {
                best_abs = ComplexField::abs(val);
                best = row;
            }
        }
        if col[best] < 0.0 {
            z.column_mut(i).neg_mut();
            y_t.row_mut(i).neg_mut();
        }
    }

    let z1 = z.columns(0, r);
    let y1_t = y_t.rows(0, r);
    let inv_sqrt = DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
        r,
        hsv[..r].iter().map(|&s| 1.0 / ComplexField::sqrt(s)),
    ));
    let w = l * y1_t.transpose() * &inv_sqrt;
    let v = u * z1 * &inv_sqrt;

    let a_r = w.transpose() * sys.a() * &v;
    let b_r = w.transpose() * sys.b();
    let c_r = sys.c() * &v;
    let ns_r: Vec<DMatrix<f64>> = sys.ns().iter().map(|nk| w.transpose() * nk * &v).collect();
    let ms_r: Vec<DMatrix<f64>> = sys.ms().iter().map(|mj| v.transpose() * mj * &v).collect();
    let reduced = BqoSystem::new(a_r, b_r, c_r, ns_r, ms_r)?;

    Ok(BalancingResult {
        hsv,
        w,
        v,
        reduced,
        numerical_rank,
        boundary_tie,
    })
}

/// Compares the Hankel singular values produced by one reachability
/// factor `u` against two observability factors.
///
/// Returns both spectra (shorter one padded with zeros) and whether
/// `sigma_i(U^T L_a) <= sigma_i(U^T L_b) + TIE_TOL * sigma_1(b)` holds for
/// every index, which is guaranteed whenever the Gramian behind `l_b`
/// dominates the one behind `l_a` in the psd order.
pub fn hsv_compare(
    u: &DMatrix<f64>,
    l_a: &DMatrix<f64>,
    l_b: &DMatrix<f64>,
) -> Result<(Vec<f64>, Vec<f64>, bool)> {
    if l_a.nrows() != u.nrows() || l_b.nrows() != u.nrows() {
        return Err(Error::ShapeMismatch {
            what: format!(
                "factors must share the state dimension {}, got {} and {}",
                u.nrows(),
                l_a.nrows(),
                l_b.nrows()
            ),
        });
    }
    let sv = |l: &DMatrix<f64>| -> Vec<f64> {
        nalgebra::linalg::SVD::new(u.transpose() * l, false, false)
            .singular_values
            .iter()
            .copied()
            .collect()
    };
    let mut hsv_a = sv(l_a);
    let mut hsv_b = sv(l_b);
    let len = hsv_a.len().max(hsv_b.len());
    hsv_a.resize(len, 0.0);
    hsv_b.resize(len, 0.0);
    let tol = TIE_TOL * hsv_b.first().copied().unwrap_or(0.0);
    let dominated = hsv_a.iter().zip(&hsv_b).all(|(&a, &b)| a <= b + tol);
    Ok((hsv_a, hsv_b, dominated))
}

/// Factors the Gramian pair of `set` and runs [`balanced_truncation`].
pub fn reduce_with(sys: &BqoSystem, set: &GramianSet, r: usize) -> Result<BalancingResult> {
    let q = set.q.as_ref().ok_or_else(|| Error::InvalidOptions {
        what: format!(
            "variant {} has no observability Gramian to balance against",
            set.variant
        ),
    })?;
    let u = psd_factor(&set.p, GRAMIAN_CLIP_TOL)?;
    let l = psd_factor(q, GRAMIAN_CLIP_TOL)?;
    balanced_truncation(sys, &u, &l, r)
}

/// Smallest order whose trailing Hankel singular values all fall below
/// `rel_tol * sigma_1`; a simple heuristic for choosing `r`.
pub fn suggest_reduced_order(hsv: &[f64], rel_tol: f64) -> usize {
    let sigma1 = hsv.first().copied().unwrap_or(0.0);
    hsv.iter()
        .filter(|&&s| s > rel_tol * sigma1 && s > 0.0)
        .count()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::benchmarks::random_admissible;
    use crate::gramians::{self, GramianVariant};
    use crate::lyapunov::{solve_standard, Side, SolverOptions};
    use alloc::vec;
    use approx::assert_relative_eq;

    fn linear_system(a: DMatrix<f64>, b: DMatrix<f64>, c: DMatrix<f64>) -> BqoSystem {
        let n = a.nrows();
        let m = b.ncols();
        let p = c.nrows();
        BqoSystem::new(
            a,
            b,
            c,
            vec![DMatrix::zeros(n, n); m],
            vec![DMatrix::zeros(n, n); p],
        )
        .unwrap()
    }

    #[test]
    fn identity_factors_reproduce_the_system() {
        // U = L = Sigma^{1/2} with Sigma diagonal: the algorithm must
        // return W = V = I and the original matrices.
        let sigma =
            DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(&[4.0, 1.0, 0.25]));
        let factor = sigma.map(ComplexField::sqrt);
        let sys = linear_system(
            DMatrix::from_row_slice(3, 3, &[-1.0, 0.2, 0.0, 0.1, -2.0, 0.3, 0.0, 0.0, -3.0]),
            DMatrix::from_column_slice(3, 1, &[1.0, 0.5, 0.2]),
            DMatrix::from_row_slice(1, 3, &[1.0, 0.0, 1.0]),
        );
        let res = balanced_truncation(&sys, &factor, &factor, 3).unwrap();
        assert_relative_eq!(res.hsv[0], 4.0, max_relative = 1e-13);
        assert_relative_eq!(res.hsv[2], 0.25, max_relative = 1e-13);
        assert_relative_eq!((res.reduced.a() - sys.a()).norm(), 0.0, epsilon = 1e-12);
        assert_relative_eq!((res.reduced.b() - sys.b()).norm(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn biorthogonality_holds() {
        let sys = random_admissible(8, 2, 2, 5, 0.3).unwrap();
        let set = GramianSet::compute(
            &sys,
            GramianVariant::Standard,
            None,
            &SolverOptions::default(),
        )
        .unwrap();
        for r in [1, 3, 5] {
            let res = reduce_with(&sys, &set, r).unwrap();
            let gap = (res.w.transpose() * &res.v - DMatrix::<f64>::identity(r, r)).norm();
            assert!(gap <= 1e-8, "W^T V - I = {gap:e} at r = {r}");
            for mj in res.reduced.ms() {
                assert_eq!(mj, &mj.transpose());
            }
        }
    }

    #[test]
    fn two_state_linear_model_matches_eigenvalue_oracle() {
        // A = diag(-1, -10), B = [1; 1], C = [1 1]: P = Q by symmetry and
        // the Hankel singular values equal the eigenvalues of P.
        let sys = linear_system(
            DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(&[-1.0, -10.0])),
            DMatrix::from_column_slice(2, 1, &[1.0, 1.0]),
            DMatrix::from_row_slice(1, 2, &[1.0, 1.0]),
        );
        let p = solve_standard(sys.a(), &(sys.b() * sys.b().transpose()), Side::Right).unwrap();
        let q = solve_standard(sys.a(), &(sys.c().transpose() * sys.c()), Side::Left).unwrap();

        // Independent oracle: eigenvalues of the product P Q.
        let mut oracle: Vec<f64> = (&p.x * &q.x)
            .complex_eigenvalues()
            .iter()
            .map(|z| ComplexField::sqrt(z.re))
            .collect();
        oracle.sort_by(|a, b| b.partial_cmp(a).unwrap());

        let u = psd_factor(&p.x, GRAMIAN_CLIP_TOL).unwrap();
        let l = psd_factor(&q.x, GRAMIAN_CLIP_TOL).unwrap();
        let res = balanced_truncation(&sys, &u, &l, 1).unwrap();
        assert_eq!(res.hsv.len(), 2);
        for (got, want) in res.hsv.iter().zip(&oracle) {
            assert_relative_eq!(got, want, max_relative = 1e-10);
        }

        // For linear balanced truncation the reduced system is balanced:
        // its Gramians both equal the leading Hankel block.
        let p_r = solve_standard(
            res.reduced.a(),
            &(res.reduced.b() * res.reduced.b().transpose()),
            Side::Right,
        )
        .unwrap();
        let q_r = solve_standard(
            res.reduced.a(),
            &(res.reduced.c().transpose() * res.reduced.c()),
            Side::Left,
        )
        .unwrap();
        assert_relative_eq!(p_r.x[(0, 0)], res.hsv[0], max_relative = 1e-9);
        assert_relative_eq!(q_r.x[(0, 0)], res.hsv[0], max_relative = 1e-9);
    }

    #[test]
    fn rank_deficient_request_reports_achievable_order() {
        let sys = linear_system(
            DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(&[-1.0, -2.0])),
            DMatrix::from_column_slice(2, 1, &[1.0, 0.0]),
            DMatrix::from_row_slice(1, 2, &[1.0, 0.0]),
        );
        // Rank-1 factors: only one admissible direction.
        let u = DMatrix::from_column_slice(2, 1, &[1.0, 0.0]);
        let err = balanced_truncation(&sys, &u, &u, 2).unwrap_err();
        match err {
            Error::RankDeficient {
                requested,
                achievable,
            } => {
                assert_eq!(requested, 2);
                assert_eq!(achievable, 1);
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn scalar_full_order_reduction_is_equivalent() {
        let sys = BqoSystem::new(
            DMatrix::from_element(1, 1, -1.0),
            DMatrix::from_element(1, 1, 1.0),
            DMatrix::from_element(1, 1, 1.0),
            vec![DMatrix::from_element(1, 1, 0.5)],
            vec![DMatrix::from_element(1, 1, 1.0)],
        )
        .unwrap();
        let opts = SolverOptions::new(1e-12, 1e-13, 100, 64).unwrap();
        let set = GramianSet::compute(&sys, GramianVariant::Standard, None, &opts).unwrap();
        let res = reduce_with(&sys, &set, 1).unwrap();
        // Order-one reduction of a scalar system is a similarity with
        // W^T V = 1; the input-output maps agree.
        let wv = res.w[(0, 0)] * res.v[(0, 0)];
        assert_relative_eq!(wv, 1.0, max_relative = 1e-10);
        assert_relative_eq!(res.reduced.a()[(0, 0)], -1.0, max_relative = 1e-10);
        let bc = res.reduced.b()[(0, 0)] * res.reduced.c()[(0, 0)];
        assert_relative_eq!(bc, 1.0, max_relative = 1e-10);
    }

    #[test]
    fn hsv_dominance_for_ordered_gramians() {
        let sys = random_admissible(8, 2, 2, 23, 0.3).unwrap();
        let opts = SolverOptions::default();
        let p = gramians::reachability(&sys, &opts).unwrap();
        let qs = gramians::observability_standard(&sys, &p.x, &opts).unwrap();
        let qa = gramians::observability_alternative(&sys, &p.x).unwrap();
        let u = psd_factor(&p.x, GRAMIAN_CLIP_TOL).unwrap();
        let l_s = psd_factor(&qs.x, GRAMIAN_CLIP_TOL).unwrap();
        let l_a = psd_factor(&qa.x, GRAMIAN_CLIP_TOL).unwrap();
        let (_, _, dominated) = hsv_compare(&u, &l_a, &l_s).unwrap();
        assert!(dominated);

        // Identical factors dominate themselves.
        let (a, b, dominated) = hsv_compare(&u, &l_s, &l_s).unwrap();
        assert_eq!(a, b);
        assert!(dominated);
    }

    #[test]
    fn hsv_invariant_under_input_permutation() {
        let sys = random_admissible(6, 2, 2, 31, 0.3).unwrap();
        let permuted = BqoSystem::new(
            sys.a().clone(),
            {
                let mut b = sys.b().clone();
                b.swap_columns(0, 1);
                b
            },
            sys.c().clone(),
            vec![sys.ns()[1].clone(), sys.ns()[0].clone()],
            sys.ms().to_vec(),
        )
        .unwrap();
        let opts = SolverOptions::new(1e-12, 1e-13, 100, 64).unwrap();
        let hsv = |s: &BqoSystem| -> Vec<f64> {
            let set = GramianSet::compute(s, GramianVariant::Standard, None, &opts).unwrap();
            reduce_with(s, &set, 3).unwrap().hsv
        };
        let h1 = hsv(&sys);
        let h2 = hsv(&permuted);
        for (a, b) in h1.iter().zip(&h2) {
            assert!(
                (a - b).abs() <= 1e-12 * h1[0],
                "hsv changed under permutation"
            );
        }
    }

    #[test]
    fn order_suggestion_counts_significant_values() {
        let hsv = [1.0, 0.1, 1e-9, 1e-15];
        assert_eq!(suggest_reduced_order(&hsv, 1e-6), 2);
        assert_eq!(suggest_reduced_order(&hsv, 1e-12), 3);
    }
}
