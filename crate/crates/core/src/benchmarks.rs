//! Benchmark system generators: a boundary-controlled heat equation and
//! deterministic random systems sized for property tests.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{ComplexField, DMatrix};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::linalg::spectral_norm;
use crate::model::{stability_params, BqoSystem};

/// Shape of the quadratic output of the heat benchmark.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QuadraticOutputVariant {
    /// `M = k^{-4} * ones`: the squared average temperature.
    Ones,
    /// `M = k^{-2} * I`: the mean squared temperature.
    Identity,
}

/// Parameters of the heat benchmark.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HeatBenchmarkSpec {
    /// Grid points per side; the state dimension is `k^2`.
    pub k: usize,
    pub output_variant: QuadraticOutputVariant,
    /// Input scaling applied to the assembled system.
    pub gamma: f64,
}

/// Heat transfer on the unit square with Robin-type boundary control.
///
/// The diffusion equation `x_t = Laplace(x)` is discretized with the
/// standard 5-point stencil on a `k x k` grid of unknowns with spacing
/// `h = 1/(k+1)`. The right and top boundaries are held at zero
/// (Dirichlet, those nodes are eliminated); on the left and bottom edges
/// the fluxes `n . grad(x) = u_1 (x - 1)` resp. `u_2 (x - 1)` act as
/// bilinear controls. One-sided elimination of the boundary flux makes
/// the first node layer gain the term `(u/h)(x_b - 1)`, whose state part
/// lands in `N_1`/`N_2` (diagonal entries `1/h` on the edge nodes) and
/// whose affine part lands in `B` (entries `-1/h`).
///
/// Outputs: `y_1` is the average temperature (`C = k^{-2} [1 ... 1]`) and
/// `y_2 = x^T M x` with `M` chosen by the output variant.
pub fn heat_system(spec: &HeatBenchmarkSpec) -> Result<BqoSystem> {
    let k = spec.k;
    if k < 3 {
        return Err(Error::BadSpec {
            what: format!("grid needs k >= 3, got {k}"),
        });
    }
    if !(spec.gamma > 0.0 && spec.gamma <= 1.0) {
        return Err(Error::BadSpec {
            what: format!("gamma must lie in (0, 1], got {}", spec.gamma),
        });
    }
    let n = k * k;
    let h = 1.0 / (k as f64 + 1.0);
    let c2 = 1.0 / (h * h);
    let idx = |ix: usize, iy: usize| ix + k * iy;

    let mut a = DMatrix::<f64>::zeros(n, n);
    let mut n1 = DMatrix::<f64>::zeros(n, n);
    let mut n2 = DMatrix::<f64>::zeros(n, n);
    let mut b = DMatrix::<f64>::zeros(n, 2);
    for iy in 0..k {
        for ix in 0..k {
            let row = idx(ix, iy);
            // x-direction stencil: Robin edge at ix = 0, Dirichlet at ix = k-1.
            if ix > 0 {
                a[(row, idx(ix - 1, iy))] += c2;
            }
            if ix < k - 1 {
                a[(row, idx(ix + 1, iy))] += c2;
            }
            a[(row, row)] += if ix == 0 { -c2 } else { -2.0 * c2 };
            // y-direction stencil: Robin edge at iy = 0, Dirichlet at iy = k-1.
            if iy > 0 {
                a[(row, idx(ix, iy - 1))] += c2;
            }
            if iy < k - 1 {
                a[(row, idx(ix, iy + 1))] += c2;
            }
            a[(row, row)] += if iy == 0 { -c2 } else { -2.0 * c2 };
            // Boundary flux u (x - 1) / h on the control edges.
            if ix == 0 {
                n1[(row, row)] = 1.0 / h;
                b[(row, 0)] = -1.0 / h;
            }
            if iy == 0 {
                n2[(row, row)] = 1.0 / h;
                b[(row, 1)] = -1.0 / h;
            }
        }
    }

    let mut c = DMatrix::<f64>::zeros(2, n);
    let avg = 1.0 / (k * k) as f64;
    for col in 0..n {
        c[(0, col)] = avg;
    }
    let m2 = match spec.output_variant {
        QuadraticOutputVariant::Ones => DMatrix::from_element(n, n, 1.0 / (k as f64).powi(4)),
        QuadraticOutputVariant::Identity => DMatrix::<f64>::identity(n, n) * (1.0 / (k * k) as f64),
    };
    let sys = BqoSystem::new(a, b, c, vec![n1, n2], vec![DMatrix::zeros(n, n), m2])?;
    sys.scale_input(spec.gamma)
}

/// Deterministic random system whose Gramian existence margins sit at
/// `margin` times the admissibility threshold `2 alpha / beta^2`.
///
/// `A` is a random orthogonal similarity of a negative diagonal (hence
/// normal and stable); `B`, `C`, `N_k`, `M_j` are uniform random and the
/// couplings are rescaled so that `Gamma_{Q^S} = margin * threshold`,
/// which makes all Gramian variants exist for `margin < 1`. Equal seeds
/// give bit-identical systems.
pub fn random_admissible(
    n: usize,
    m: usize,
    p: usize,
    seed: u64,
    margin: f64,
) -> Result<BqoSystem> {
    if n == 0 || m == 0 || p == 0 {
        return Err(Error::BadSpec {
            what: format!("dimensions must be positive, got ({n}, {m}, {p})"),
        });
    }
    if !(margin > 0.0 && margin < 1.0) {
        return Err(Error::BadSpec {
            what: format!("margin must lie in (0, 1), got {margin}"),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut uniform = move || rng.gen::<f64>() * 2.0 - 1.0;

    let diag = DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            -(0.5 + 0.75 * (uniform() + 1.0))
        } else {
            0.0
        }
    });
    let gauss = DMatrix::from_fn(n, n, |_, _| uniform());
    let q = gauss.qr().q();
    let a = &q * diag * q.transpose();

    let b = DMatrix::from_fn(n, m, |_, _| uniform());
    let c = DMatrix::from_fn(p, n, |_, _| uniform());
    let ns_raw: Vec<DMatrix<f64>> = (0..m)
        .map(|_| DMatrix::from_fn(n, n, |_, _| uniform()))
        .collect();
    let ms_raw: Vec<DMatrix<f64>> = (0..p)
        .map(|_| DMatrix::from_fn(n, n, |_, _| uniform()))
        .collect();

    let (alpha, beta) = stability_params(&a)?;
    let threshold = 2.0 * alpha / (beta * beta);

    let stack = |mats: &[DMatrix<f64>], transpose: bool| -> DMatrix<f64> {
        let mut out = DMatrix::<f64>::zeros(n, n * mats.len());
        for (k, mat) in mats.iter().enumerate() {
            let block = if transpose {
                mat.transpose()
            } else {
                mat.clone()
            };
            out.view_mut((0, k * n), (n, n)).copy_from(&block);
        }
        out
    };
    let ms_sym: Vec<DMatrix<f64>> = ms_raw.iter().map(crate::linalg::symmetrize).collect();
    let gamma_raw = spectral_norm(&stack(&ns_raw, false))
        .powi(2)
        .max(spectral_norm(&stack(&ns_raw, true)).powi(2))
        .max(spectral_norm(&stack(&ms_sym, false)).powi(2));
    let scale = ComplexField::sqrt(margin * threshold / gamma_raw);

    BqoSystem::new(
        a,
        b,
        c,
        ns_raw.into_iter().map(|nk| nk * scale).collect(),
        ms_sym.into_iter().map(|mj| mj * scale).collect(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gramians;
    use crate::lyapunov::SolverOptions;
    use crate::model::existence_margins;
    use approx::assert_relative_eq;

    fn spec(k: usize) -> HeatBenchmarkSpec {
        HeatBenchmarkSpec {
            k,
            output_variant: QuadraticOutputVariant::Identity,
            gamma: 1.0,
        }
    }

    #[test]
    fn heat_dimensions_at_large_grid() {
        let sys = heat_system(&spec(50)).unwrap();
        assert_eq!((sys.n(), sys.m(), sys.p()), (2500, 2, 2));
    }

    #[test]
    fn heat_small_grid_is_stable_by_eigensolve() {
        let sys = heat_system(&spec(3)).unwrap();
        assert_eq!(sys.n(), 9);
        // A is symmetric, so direct eigenvalues decide stability.
        let eigs = sys.a().clone().symmetric_eigen().eigenvalues;
        assert!(eigs.iter().all(|&l| l < 0.0), "A must be negative definite");
    }

    #[test]
    fn heat_grids_are_negative_definite_for_all_tested_sizes() {
        for k in 3..=30 {
            let sys = heat_system(&spec(k)).unwrap();
            assert_eq!(sys.a(), &sys.a().transpose(), "stencil must stay symmetric");
            // Negative definiteness via Cholesky of -A.
            assert!(
                (-sys.a()).cholesky().is_some(),
                "heat stencil lost negative definiteness at k = {k}"
            );
            if k <= 10 {
                let eigs = sys.a().clone().symmetric_eigen().eigenvalues;
                assert!(eigs.iter().all(|&l| l < 0.0));
            }
        }
    }

    #[test]
    fn heat_control_structure() {
        let k = 6;
        let sys = heat_system(&spec(k)).unwrap();
        let nonzero_rows = |m: &DMatrix<f64>| -> usize {
            (0..m.nrows())
                .filter(|&i| m.row(i).iter().any(|&v| v != 0.0))
                .count()
        };
        assert_eq!(nonzero_rows(&sys.ns()[0]), k);
        assert_eq!(nonzero_rows(&sys.ns()[1]), k);
        // The affine Robin contribution sits in B on the same rows.
        for i in 0..sys.n() {
            assert_eq!(sys.b()[(i, 0)] != 0.0, sys.ns()[0][(i, i)] != 0.0);
            assert_eq!(sys.b()[(i, 1)] != 0.0, sys.ns()[1][(i, i)] != 0.0);
        }
    }

    #[test]
    fn heat_average_temperature_of_constant_field() {
        let sys = heat_system(&spec(5)).unwrap();
        let x = nalgebra::DVector::from_element(sys.n(), 3.0);
        let y = sys.output(&x);
        assert_relative_eq!(y[0], 3.0, max_relative = 1e-13);
    }

    #[test]
    fn heat_quadratic_output_variants_are_ordered() {
        let ones = heat_system(&HeatBenchmarkSpec {
            k: 4,
            output_variant: QuadraticOutputVariant::Ones,
            gamma: 1.0,
        })
        .unwrap();
        let ident = heat_system(&spec(4)).unwrap();
        let mut state = 7u64;
        for _ in 0..20 {
            state = state
                .wrapping_mul(6364136223846793005)
                .wrapping_add(1442695040888963407);
            let x = nalgebra::DVector::from_fn(ones.n(), |i, _| {
                (((state >> 17) as f64).sin() * (i as f64 + 1.0)).sin()
            });
            let q_ones = (x.transpose() * &ones.ms()[1] * &x)[(0, 0)];
            let q_ident = (x.transpose() * &ident.ms()[1] * &x)[(0, 0)];
            assert!(q_ones <= q_ident + 1e-12 * q_ident.abs());
        }
    }

    #[test]
    fn ones_variant_quadratic_output_is_squared_average() {
        // With M = k^{-4} ones the quadratic output is exactly the square
        // of the average-temperature output.
        let sys = heat_system(&HeatBenchmarkSpec {
            k: 5,
            output_variant: QuadraticOutputVariant::Ones,
            gamma: 1.0,
        })
        .unwrap();
        let mut state = 11u64;
        for _ in 0..10 {
            let x = nalgebra::DVector::from_fn(sys.n(), |i, _| {
                state = state
                    .wrapping_mul(6364136223846793005)
                    .wrapping_add(1442695040888963407);
                ((state >> 11) as f64) / ((1u64 << 53) as f64) * 2.0 - 1.0 + (i as f64) * 0.01
            });
            let y = sys.output(&x);
            assert_relative_eq!(y[1], y[0] * y[0], max_relative = 1e-12);
        }
    }

    #[test]
    fn heat_rejects_bad_spec() {
        assert!(heat_system(&spec(2)).is_err());
        assert!(heat_system(&HeatBenchmarkSpec {
            k: 5,
            output_variant: QuadraticOutputVariant::Identity,
            gamma: 0.0,
        })
        .is_err());
    }

    #[test]
    fn random_systems_are_admissible_by_construction() {
        let sys = random_admissible(8, 2, 2, 42, 0.5).unwrap();
        let cert = existence_margins(&sys).unwrap();
        assert!(cert.exists_p && cert.exists_qs && cert.exists_qa);
        assert_relative_eq!(cert.gamma_qs, 0.5 * cert.threshold, max_relative = 1e-6);
    }

    #[test]
    fn random_systems_are_deterministic() {
        let s1 = random_admissible(6, 2, 3, 9, 0.4).unwrap();
        let s2 = random_admissible(6, 2, 3, 9, 0.4).unwrap();
        assert_eq!(s1, s2);
    }

    #[test]
    fn random_system_gramian_converges_quickly() {
        let sys = random_admissible(10, 2, 2, 3, 0.5).unwrap();
        let sol = gramians::reachability(&sys, &SolverOptions::default()).unwrap();
        assert!(sol.converged);
        assert!(sol.iterations <= 50);
    }

    #[test]
    fn heat_needs_substepping_at_coarse_sampling() {
        // The grid operator has eigenvalues near -9.5e2, so RK4 with
        // h = 5e-3 (10^3 steps over [0, 5]) sits far outside the
        // stability region and must blow up, while 5x substepping is
        // stable. This is why error sweeps sample 10^3 points but
        // integrate on a finer grid.
        let sys = heat_system(&HeatBenchmarkSpec {
            k: 10,
            output_variant: QuadraticOutputVariant::Identity,
            gamma: 0.1,
        })
        .unwrap();
        let u = |t: f64| {
            nalgebra::DVector::from_fn(2, |j, _| ((j + 1) as f64 * core::f64::consts::PI * t).cos())
        };
        let err = crate::simulation::simulate(&sys, u, 5.0, 1000).unwrap_err();
        assert!(matches!(err, crate::error::Error::NonFiniteState { .. }));
        let fine = crate::simulation::simulate(&sys, u, 5.0, 5000).unwrap();
        assert!(fine.states.iter().all(|x| x.norm().is_finite()));
    }

    #[test]
    fn heat_gramian_factors_reconstruct() {
        let sys = heat_system(&HeatBenchmarkSpec {
            k: 10,
            output_variant: QuadraticOutputVariant::Identity,
            gamma: 0.1,
        })
        .unwrap();
        let p = gramians::reachability(&sys, &SolverOptions::default()).unwrap();
        let factor = crate::lyapunov::psd_factor(&p.x, 1e-12).unwrap();
        let err = (&factor * factor.transpose() - &p.x).norm();
        assert!(err <= 1e-10 * p.x.norm(), "reconstruction error {err:e}");
    }
}
