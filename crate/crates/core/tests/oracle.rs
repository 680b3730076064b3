//! Deterministic boundary-value oracles: solutions plugged back into their
//! equations, closed forms, blow-up at the principal eigenvalue and agreement
//! between the disk and radial solvers.

use proptest::prelude::*;
use rfk_core::oracle::{principal_eigenvalue, solve_disk_bvp, solve_radial_bvp, FourierMode};
use rfk_core::quad::{integrate_with_breaks, QuadOptions};
use rfk_core::special::bessel_i;
use rfk_core::{Complex64, Error, ManifoldModel};

fn radial_drift(m: &ManifoldModel, r: f64) -> f64 {
    let n = m.dim() as f64;
    if m.is_hyperbolic() {
        (n - 1.0) / r.tanh()
    } else {
        (n - 1.0) / r
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    /// `v'' + m'(r) v' = λ v` at interior radii, by finite differences of the
    /// interpolated solution, and `v(R) = φ`.
    #[test]
    fn radial_solutions_satisfy_their_equation(
        which in 0usize..4,
        radius in 0.5f64..2.5,
        re in -0.5f64..3.0,
        im in -2.0f64..2.0,
        frac in 0.2f64..0.8,
    ) {
        let m = [
            ManifoldModel::euclidean(1).unwrap(),
            ManifoldModel::euclidean(2).unwrap(),
            ManifoldModel::euclidean(3).unwrap(),
            ManifoldModel::hyperbolic_disk(),
        ][which];
        let lambda = Complex64::new(re, im);
        let phi = Complex64::new(1.0, -0.5);
        let sol = solve_radial_bvp(&m, radius, lambda, phi).unwrap();
        prop_assert!((sol.value_at(radius).unwrap() - phi).norm() < 1e-9);
        let r = frac * radius;
        let h = 1e-3 * radius;
        let v = |r: f64| sol.value_at(r).unwrap();
        let d1 = (v(r + h) - v(r - h)) / (2.0 * h);
        let d2 = (v(r + h) - 2.0 * v(r) + v(r - h)) / (h * h);
        let residual = d2 + d1 * radial_drift(&m, r) - lambda * v(r);
        let scale = d2.norm() + lambda.norm() * v(r).norm() + 1.0;
        prop_assert!(residual.norm() < 1e-4 * scale, "{} r={}: {}", m, r, residual);
    }
}

/// Integral form of the radial equation on the solver's own grid:
/// `S(b) v'(b) - S(a) v'(a) = λ ∫_a^b S v dr` with `S` the sphere area.
#[test]
fn radial_solutions_conserve_flux_on_their_grid() {
    for m in [
        ManifoldModel::euclidean(1).unwrap(),
        ManifoldModel::euclidean(2).unwrap(),
        ManifoldModel::euclidean(3).unwrap(),
        ManifoldModel::hyperbolic_disk(),
        ManifoldModel::hyperbolic3(),
    ] {
        for lambda in [Complex64::new(1.0, 0.0), Complex64::new(-0.8, 0.0), Complex64::new(0.5, 2.0)] {
            let sol = solve_radial_bvp(&m, 1.5, lambda, Complex64::new(1.0, 0.0)).unwrap();
            let area = |r: f64| if m.dim() == 1 { 1.0 } else { m.sphere_area(r) };
            let step = 50;
            for start in (0..sol.grid.len() - 1).step_by(step) {
                let end = (start + step).min(sol.grid.len() - 1);
                let (a, b) = (sol.grid[start], sol.grid[end]);
                let flux = sol.derivs[end] * area(b) - sol.derivs[start] * area(a);
                let part = |f: fn(Complex64) -> f64| {
                    integrate_with_breaks(
                        &mut |r: f64| f(sol.value_at(r).unwrap()) * area(r),
                        &sol.grid[start..=end],
                        QuadOptions::rel(1e-13),
                    )
                    .unwrap()
                };
                let mass = lambda * Complex64::new(part(|v| v.re), part(|v| v.im));
                let scale = flux.norm() + mass.norm() + 1e-3;
                assert!((flux - mass).norm() < 1e-8 * scale, "{m} λ={lambda} on [{a}, {b}]: {flux} vs {mass}");
            }
        }
    }
}

#[test]
fn interval_and_flat_disk_closed_forms() {
    let e1 = ManifoldModel::euclidean(1).unwrap();
    let e2 = ManifoldModel::euclidean(2).unwrap();
    let one = Complex64::new(1.0, 0.0);
    // cosh(√λ x)/cosh(√λ) and I0(√λ r)/I0(√λ)
    let v = solve_radial_bvp(&e1, 1.0, one, one).unwrap().center_value();
    assert!((v.re - 1.0 / 1f64.cosh()).abs() < 1e-9);
    let v = solve_radial_bvp(&e1, 1.0, Complex64::new(-2.0, 0.0), one).unwrap().center_value();
    assert!((v.re - 1.0 / 2f64.sqrt().cos()).abs() < 1e-8);
    let v = solve_radial_bvp(&e2, 1.0, one, one).unwrap().center_value();
    assert!((v.re - 1.0 / bessel_i(0, 1.0)).abs() < 1e-9);
    // complex λ: cosh(√λ)^{-1} with the principal root
    let lambda = Complex64::new(1.0, 1.0);
    let v = solve_radial_bvp(&e1, 1.0, lambda, one).unwrap().center_value();
    let exact = 1.0 / lambda.sqrt().cosh();
    assert!((v - exact).norm() < 1e-9, "{v} vs {exact}");
}

#[test]
fn solutions_blow_up_at_the_principal_eigenvalue() {
    for m in [ManifoldModel::euclidean(1).unwrap(), ManifoldModel::hyperbolic_disk()] {
        let lambda1 = principal_eigenvalue(&m, 1.0).unwrap();
        let one = Complex64::new(1.0, 0.0);
        let at = |eps: f64| {
            solve_radial_bvp(&m, 1.0, Complex64::new(lambda1 + eps, 0.0), one)
                .unwrap()
                .center_value()
                .re
        };
        assert!(at(0.01) >= 10.0 * at(0.1), "{m}");
        // simple pole: eps · h(0) tends to a nonzero constant
        let (a, b) = (1e-2 * at(1e-2), 1e-4 * at(1e-4));
        assert!(at(1e-4) > 50.0 * at(1e-2).abs(), "{m}");
        assert!((a / b - 1.0).abs() < 0.05, "{m}: residues {a} {b}");
        let below = solve_radial_bvp(&m, 1.0, Complex64::new(lambda1 - 1e-3, 0.0), one);
        assert!(matches!(below, Err(Error::EigenvalueCrossing { .. })), "{m}");
    }
}

#[test]
fn zero_order_disk_mode_matches_the_radial_solver() {
    let e2 = ManifoldModel::euclidean(2).unwrap();
    for lambda in [Complex64::new(0.7, 0.0), Complex64::new(2.0, -1.5), Complex64::new(-3.0, 0.0)] {
        let c = Complex64::new(0.4, 0.9);
        let disk = solve_disk_bvp(lambda, &[FourierMode { order: 0, coefficient: c }], 1.3, 400).unwrap();
        let radial = solve_radial_bvp(&e2, 1.3, lambda, c).unwrap();
        for r in [0.0, 0.3, 0.9, 1.3] {
            let (a, b) = (disk.value(r, 0.7).unwrap(), radial.value_at(r).unwrap());
            assert!((a - b).norm() < 1e-8, "λ={lambda} r={r}: {a} vs {b}");
        }
    }
}

#[test]
fn disk_modes_are_modified_bessel_ratios() {
    // I_m(r)/I_m(1) · cos(mθ) for λ = 1
    for m in 1..4 {
        let modes = [
            FourierMode { order: m, coefficient: Complex64::new(0.5, 0.0) },
            FourierMode { order: -m, coefficient: Complex64::new(0.5, 0.0) },
        ];
        let sol = solve_disk_bvp(Complex64::new(1.0, 0.0), &modes, 1.0, 400).unwrap();
        for (r, th) in [(0.5, 0.0), (0.8, 1.1), (0.2, -2.0)] {
            let exact = bessel_i(m as u32, r) / bessel_i(m as u32, 1.0) * (m as f64 * th).cos();
            let got = sol.value(r, th).unwrap();
            assert!((got.re - exact).abs() < 1e-9 && got.im.abs() < 1e-12, "m={m} r={r}: {got} vs {exact}");
        }
    }
}
