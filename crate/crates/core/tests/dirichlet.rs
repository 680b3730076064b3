//! Dirichlet spectra against constructions that share no code with them: the
//! method of images on the interval, a finite-difference eigenvalue solver for
//! the hyperbolic ball, and quadrature for orthonormality.

use std::f64::consts::PI;

use proptest::prelude::*;
use rfk_core::dirichlet::{domination_check, spectrum};
use rfk_core::exitmc::Domain;
use rfk_core::oracle::principal_eigenvalue;
use rfk_core::quad::{integrate, integrate_with_breaks, QuadOptions};
use rfk_core::{ChartPoint, ManifoldModel};

/// Dirichlet kernel of `(-1, 1)` for the generator Δ by reflection: images
/// of `y` at `4k + y` (positive) and `4k + 2 - y` (negative).
fn image_kernel(t: f64, x: f64, y: f64) -> f64 {
    let g = |d: f64| (-d * d / (4.0 * t)).exp() / (4.0 * PI * t).sqrt();
    (-20..=20)
        .map(|k| {
            let shift = 4.0 * k as f64;
            g(x - y - shift) - g(x + y - 2.0 - shift)
        })
        .sum()
}

fn image_survival(t: f64, x: f64) -> f64 {
    integrate_with_breaks(
        &mut |y: f64| image_kernel(t, x, y),
        &[-1.0, x.clamp(-1.0, 1.0), 1.0],
        QuadOptions::rel(1e-12),
    )
    .unwrap()
}

#[test]
fn interval_kernel_matches_the_method_of_images() {
    let d = Domain::interval(1.0).unwrap();
    let s = spectrum(&d, None).unwrap();
    for t in [0.05, 0.2, 1.0, 3.0] {
        for (x, y) in [(0.0, 0.0), (0.3, -0.6), (0.9, 0.85), (-0.5, 0.99)] {
            let series = s.kernel(t, &ChartPoint::x1(x), &ChartPoint::x1(y)).unwrap();
            let images = image_kernel(t, x, y);
            assert!((series - images).abs() < 1e-9, "t={t} x={x} y={y}: {series} vs {images}");
        }
    }
}

#[test]
fn interval_survival_matches_the_method_of_images() {
    let d = Domain::interval(1.0).unwrap();
    let s = spectrum(&d, None).unwrap();
    for t in [0.02, 0.1, 0.5, 2.0] {
        for x in [0.0, 0.4, -0.8, 0.97] {
            let series = s.survival(t, &ChartPoint::x1(x)).unwrap().raw;
            let images = image_survival(t, x);
            assert!((series - images).abs() < 1e-9, "t={t} x={x}: {series} vs {images}");
        }
    }
    // frozen from the image sum
    assert!((image_survival(0.5, 0.0) - 0.370_78).abs() < 1e-5);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn survival_is_a_decreasing_probability(x in -0.99f64..0.99, t in 0.01f64..3.0, dt in 0.001f64..1.0) {
        let s = spectrum(&Domain::interval(1.0).unwrap(), None).unwrap();
        let p = ChartPoint::x1(x);
        let now = s.survival(t, &p).unwrap().clamped;
        let later = s.survival(t + dt, &p).unwrap().clamped;
        prop_assert!((0.0..=1.0).contains(&now));
        prop_assert!(later <= now + 1e-12);
    }

    #[test]
    fn disk_kernel_is_symmetric_and_dominated(
        a in 0.0f64..0.95, b in 0.0f64..0.95, u in 0.0f64..(2.0 * PI), v in 0.0f64..(2.0 * PI), t in 0.05f64..1.0,
    ) {
        let e = ManifoldModel::euclidean(2).unwrap();
        let d = Domain::chart_disk(&e, &ChartPoint::x2(0.0, 0.0), 1.0).unwrap();
        let s = spectrum(&d, None).unwrap();
        let x = ChartPoint::x2(a * u.cos(), a * u.sin());
        let y = ChartPoint::x2(b * v.cos(), b * v.sin());
        let kxy = s.kernel(t, &x, &y).unwrap();
        prop_assert!((kxy - s.kernel(t, &y, &x).unwrap()).abs() < 1e-10);
        prop_assert!(domination_check(&s, &[(t, x, y)]).unwrap().pass);
    }
}

#[test]
fn eigenfunctions_are_orthonormal() {
    let opts = QuadOptions::rel(1e-10);
    let interval = spectrum(&Domain::interval(1.0).unwrap(), Some(6)).unwrap();
    let e = ManifoldModel::euclidean(2).unwrap();
    let disk = spectrum(&Domain::chart_disk(&e, &ChartPoint::x2(0.0, 0.0), 1.0).unwrap(), Some(6)).unwrap();
    let h = ManifoldModel::hyperbolic_disk();
    let ball = spectrum(&Domain::geodesic_ball(&h, &ChartPoint::x2(0.0, 0.0), 1.0).unwrap(), Some(4)).unwrap();

    for j in 0..6 {
        for k in 0..=j {
            let want = if j == k { 1.0 } else { 0.0 };
            let f = |x: f64| {
                let p = ChartPoint::x1(x);
                interval.eigenfunction(j, &p).unwrap() * interval.eigenfunction(k, &p).unwrap()
            };
            let got = integrate(f, -1.0, 1.0, opts).unwrap();
            assert!((got - want).abs() < 1e-8, "interval ({j},{k}): {got}");

            // polar quadrature over the flat unit disk
            let radial = |r: f64| {
                let ring = |th: f64| {
                    let p = ChartPoint::x2(r * th.cos(), r * th.sin());
                    disk.eigenfunction(j, &p).unwrap() * disk.eigenfunction(k, &p).unwrap()
                };
                r * integrate(ring, 0.0, 2.0 * PI, opts).unwrap()
            };
            let got = integrate(radial, 0.0, 1.0, QuadOptions::rel(1e-8)).unwrap();
            assert!((got - want).abs() < 1e-6, "disk ({j},{k}): {got}");
        }
    }
    // radial modes on the hyperbolic ball, volume element sinh(r) dr dθ
    for j in 0..4 {
        for k in 0..=j {
            let want = if j == k { 1.0 } else { 0.0 };
            let f = |r: f64| {
                let c = (0.5 * r).tanh();
                let p = ChartPoint::x2(c, 0.0);
                ball.eigenfunction(j, &p).unwrap() * ball.eigenfunction(k, &p).unwrap() * h.sphere_area(r)
            };
            let got = integrate(f, 0.0, 1.0, opts).unwrap();
            assert!((got - want).abs() < 1e-6, "ball ({j},{k}): {got}");
        }
    }
}

/// Smallest eigenvalue of `-(1/sinh r)(sinh r f')'` on `(0, R)` with
/// `f(R) = 0`: cell-centred differences, symmetrised, then Sturm-sequence
/// bisection on the tridiagonal matrix.
fn fd_ball_eigenvalue(radius: f64, cells: usize) -> f64 {
    let h = radius / cells as f64;
    let w: Vec<f64> = (0..cells).map(|i| ((i as f64 + 0.5) * h).sinh()).collect();
    let face = |i: usize| (i as f64 * h).sinh();
    let mut diag = vec![0.0; cells];
    let mut off = vec![0.0; cells.saturating_sub(1)];
    for i in 0..cells {
        let right = if i + 1 == cells {
            // ghost cell mirrors to zero at the boundary face
            2.0 * face(cells)
        } else {
            face(i + 1)
        };
        diag[i] = (face(i) + right) / (h * h * w[i]);
        if i + 1 < cells {
            off[i] = -face(i + 1) / (h * h * (w[i] * w[i + 1]).sqrt());
        }
    }
    let below = |mu: f64| {
        let mut count = 0;
        let mut q = 1.0;
        for i in 0..cells {
            let c = if i == 0 { 0.0 } else { off[i - 1] * off[i - 1] / q };
            q = diag[i] - mu - c;
            if q == 0.0 {
                q = 1e-300;
            }
            if q < 0.0 {
                count += 1;
            }
        }
        count
    };
    let (mut lo, mut hi) = (0.0, 100.0 / (radius * radius) + 10.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if below(mid) >= 1 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

#[test]
fn hyperbolic_ball_principal_eigenvalue_matches_finite_differences() {
    let h = ManifoldModel::hyperbolic_disk();
    for radius in [0.5, 1.0, 2.0, 4.0] {
        // Richardson on two resolutions of a second-order scheme
        let coarse = fd_ball_eigenvalue(radius, 2000);
        let fine = fd_ball_eigenvalue(radius, 4000);
        let fd = -(fine + (fine - coarse) / 3.0);
        let shooting = principal_eigenvalue(&h, radius).unwrap();
        let spec = spectrum(&Domain::geodesic_ball(&h, &ChartPoint::x2(0.0, 0.0), radius).unwrap(), Some(3))
            .unwrap()
            .eigenvalues()[0];
        assert!((fd - shooting).abs() < 1e-6 * fd.abs(), "R={radius}: fd {fd} vs shooting {shooting}");
        assert!((spec - shooting).abs() < 1e-8 * fd.abs(), "R={radius}: spectrum {spec}");
    }
}

#[test]
fn flat_principal_eigenvalues_are_bessel_and_sine_zeros() {
    let e2 = ManifoldModel::euclidean(2).unwrap();
    let e1 = ManifoldModel::euclidean(1).unwrap();
    let j01 = 2.404_825_557_695_773;
    for r in [0.5, 1.0, 3.0] {
        assert!((principal_eigenvalue(&e2, r).unwrap() + (j01 / r).powi(2)).abs() < 1e-9);
        assert!((principal_eigenvalue(&e1, r).unwrap() + (PI / (2.0 * r)).powi(2)).abs() < 1e-9);
    }
}
