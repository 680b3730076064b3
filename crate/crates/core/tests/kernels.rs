//! Heat kernels checked without their own formulas: the radial heat equation
//! by finite differences, the semigroup identity by quadrature, concentration
//! as `t -> 0`, and tail mass against simulated paths.

use std::f64::consts::PI;

use proptest::prelude::*;
use rfk_core::kernels::{heat_kernel, ln_heat_kernel, mass_conservation, radial_density, tail_mass};
use rfk_core::pathsim::{endpoint, Scheme, Stepper};
use rfk_core::quad::{integrate_with_breaks, QuadOptions};
use rfk_core::rng::path_rng;
use rfk_core::stats::ks_distance;
use rfk_core::{ChartPoint, ManifoldModel};

fn models() -> Vec<ManifoldModel> {
    vec![
        ManifoldModel::euclidean(1).unwrap(),
        ManifoldModel::euclidean(2).unwrap(),
        ManifoldModel::euclidean(3).unwrap(),
        ManifoldModel::hyperbolic_disk(),
        ManifoldModel::hyperbolic3(),
    ]
}

/// `(n - 1) · (log of the sphere-area growth)'` in the radial Laplacian
/// `f'' + m'(r) f'`.
fn radial_drift(m: &ManifoldModel, r: f64) -> f64 {
    let n = m.dim() as f64;
    if m.is_hyperbolic() {
        (n - 1.0) / r.tanh()
    } else {
        (n - 1.0) / r
    }
}

/// With `q = ln p` the radial heat equation reads `q_t = q'' + q'^2 + m' q'`,
/// which stays well scaled deep in the tail.
#[test]
fn kernels_solve_the_radial_heat_equation() {
    for m in models() {
        for t in [0.05, 0.3, 1.0, 4.0] {
            for r in [0.2, 0.7, 1.5, 3.0] {
                let q = |t: f64, r: f64| ln_heat_kernel(&m, t, r).unwrap();
                let (ht, hr) = (1e-4 * t, 1e-3);
                let qt = (q(t + ht, r) - q(t - ht, r)) / (2.0 * ht);
                let qr = (q(t, r + hr) - q(t, r - hr)) / (2.0 * hr);
                let qrr = (q(t, r + hr) - 2.0 * q(t, r) + q(t, r - hr)) / (hr * hr);
                let residual = qt - qrr - qr * qr - radial_drift(&m, r) * qr;
                let scale = qt.abs() + qrr.abs() + qr * qr + 1.0 / t;
                assert!(residual.abs() < 1e-5 * scale, "{m} t={t} r={r}: residual {residual:e} vs {scale:e}");
            }
        }
    }
}

/// `p(t + s, x, x) = ∫ p(t, x, y) p(s, y, x) dvol(y)`, integrated radially.
#[test]
fn chapman_kolmogorov_at_the_diagonal() {
    for m in models() {
        for (t, s) in [(0.1, 0.2), (0.5, 0.5), (1.0, 2.0)] {
            let mut integrand = |r: f64| {
                let shell = if m.dim() == 1 { 2.0 } else { m.sphere_area(r) };
                heat_kernel(&m, t, r).unwrap() * heat_kernel(&m, s, r).unwrap() * shell
            };
            let reach = 2.0 * (t + s) * (m.dim() as f64) + 12.0 * (t + s).sqrt() + 2.0;
            let lhs = integrate_with_breaks(&mut integrand, &[0.0, 1.0, reach], QuadOptions::rel(1e-11)).unwrap();
            let rhs = heat_kernel(&m, t + s, 0.0).unwrap();
            assert!((lhs / rhs - 1.0).abs() < 1e-8, "{m} t={t} s={s}: {lhs} vs {rhs}");
        }
    }
}

#[test]
fn kernels_concentrate_as_time_shrinks() {
    for m in models() {
        let mut last = f64::INFINITY;
        for t in [1e-1, 1e-2, 1e-3, 1e-4] {
            let outside = tail_mass(&m, t, 0.1).unwrap();
            assert!(outside < last, "{m}: tail not shrinking at t={t}");
            last = outside;
        }
        assert!(last < 1e-10, "{m}: {last}");
        // ∫ p(t, o, y) f(y) dvol -> f(o) for f = cos(d(o, y))
        let smooth = integrate_with_breaks(
            &mut |r: f64| radial_density(&m, 1e-3, r).unwrap() * r.cos(),
            &[0.0, 0.1, 1.0],
            QuadOptions::rel(1e-12),
        )
        .unwrap();
        assert!((smooth - 1.0).abs() < 1e-2, "{m}: {smooth}");
    }
}

#[test]
fn stochastic_completeness_over_a_long_range_of_times() {
    for m in models() {
        for t in [0.01, 0.1, 1.0, 5.0, 10.0] {
            let mass = mass_conservation(&m, t).unwrap();
            assert!((mass - 1.0).abs() < 1e-6, "{m} t={t}: {mass}");
        }
    }
}

#[test]
fn three_dimensional_hyperbolic_kernel_reference() {
    // (4πt)^{-3/2} (r / sinh r) e^{-t - r^2/(4t)} at t = 1, r = 1
    let v = heat_kernel(&ManifoldModel::hyperbolic3(), 1.0, 1.0).unwrap();
    let expected = (4.0 * PI).powf(-1.5) / 1f64.sinh() * (-1.25f64).exp();
    assert!((v / expected - 1.0).abs() < 1e-14);
}

/// Fraction of simulated paths beyond distance `R` at time `t` against the
/// tail mass, within four binomial standard errors plus the step bias.
#[test]
fn simulated_tail_matches_tail_mass() {
    let n = 20_000;
    for (m, dt) in [
        (ManifoldModel::euclidean(2).unwrap(), 1e-3),
        (ManifoldModel::hyperbolic_disk(), 1e-3),
    ] {
        let (t, radius) = (0.5, 1.5);
        let stepper = Stepper::new(&m, Scheme::EulerMaruyama, dt).unwrap();
        let o = ChartPoint::origin(2);
        let beyond = (0..n)
            .filter(|&i| {
                let mut rng = path_rng(17, i);
                let y = endpoint(&stepper, &o, t, &mut rng).expect("path stays in the chart");
                m.geodesic_distance(&o, &y).unwrap() > radius
            })
            .count() as f64
            / n as f64;
        let exact = tail_mass(&m, t, radius).unwrap();
        let se = (exact * (1.0 - exact) / n as f64).sqrt();
        assert!((beyond - exact).abs() < 4.0 * se + 0.005, "{m}: {beyond} vs {exact}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    /// Absolute residual of `∂_t p = p'' + 2 coth(d) p'` for the closed form.
    #[test]
    fn three_dimensional_hyperbolic_kernel_pde_residual(t in 0.1f64..5.0, d in 0.1f64..5.0) {
        let m = ManifoldModel::hyperbolic3();
        let p = |t: f64, d: f64| heat_kernel(&m, t, d).unwrap();
        // fourth-order five-point stencils
        let h = 2e-3;
        let d1 = |f: &dyn Fn(f64) -> f64, x: f64| (f(x - 2.0 * h) - 8.0 * f(x - h) + 8.0 * f(x + h) - f(x + 2.0 * h)) / (12.0 * h);
        let d2 = |f: &dyn Fn(f64) -> f64, x: f64| {
            (-f(x - 2.0 * h) + 16.0 * f(x - h) - 30.0 * f(x) + 16.0 * f(x + h) - f(x + 2.0 * h)) / (12.0 * h * h)
        };
        let pt = d1(&|s| p(s, d), t);
        let pd = d1(&|r| p(t, r), d);
        let pdd = d2(&|r| p(t, r), d);
        let residual = pt - pdd - 2.0 / d.tanh() * pd;
        prop_assert!(residual.abs() < 1e-6, "t={} d={}: {:e}", t, d, residual);
    }
}

/// Empirical law of `d(o, B_t)` against the radial density, with the CDF
/// tabulated by quadrature and interpolated linearly.
#[test]
fn simulated_radial_law_matches_the_radial_density() {
    let n = 100_000;
    let t = 0.5;
    for m in [ManifoldModel::euclidean(2).unwrap(), ManifoldModel::hyperbolic_disk()] {
        let stepper = Stepper::new(&m, Scheme::EulerMaruyama, 2e-3).unwrap();
        let o = ChartPoint::origin(2);
        let samples: Vec<f64> = (0..n)
            .map(|i| {
                let mut rng = path_rng(23, i);
                m.geodesic_distance(&o, &endpoint(&stepper, &o, t, &mut rng).unwrap()).unwrap()
            })
            .collect();
        let (top, cells) = (8.0, 800);
        let h = top / cells as f64;
        let mut table = vec![0.0];
        for k in 0..cells {
            let piece = integrate_with_breaks(
                &mut |r: f64| radial_density(&m, t, r).unwrap(),
                &[k as f64 * h, (k + 1) as f64 * h],
                QuadOptions::rel(1e-12),
            )
            .unwrap();
            table.push(table[k] + piece);
        }
        assert!((table[cells] - 1.0).abs() < 1e-8);
        let cdf = |r: f64| {
            let x = (r / h).min(cells as f64 - 1e-9);
            let k = x as usize;
            table[k] + (x - k as f64) * (table[k + 1] - table[k])
        };
        let ks = ks_distance(&samples, cdf);
        assert!(ks <= 0.01, "{m}: KS {ks}");
    }
}
