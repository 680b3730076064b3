//! Deterministic reference solutions: radial boundary-value and eigenvalue
//! problems by shooting, the disk by separation of variables, and closed-form
//! mean exit times.
//!
//! Every radial problem here has the form `u'' + q(r) u' = λ u` with
//! `q(r) ~ (n-1)/r` near the origin, so the regular solution starts from the
//! series `u = 1 + λ r² / (2n) + O(r⁴)`. The equation is linear, so shooting
//! on `u(0)` needs a single pass: integrate the regular solution `w` with
//! `w(0) = 1` and rescale by `c / w(R)`.

use num_complex::Complex64;

use crate::error::{invalid, Error, Result};
use crate::exitmc::Domain;
use crate::geometry::{ChartPoint, ManifoldModel, ModelKind};
use crate::ode::{integrate_to_grid, OdeOptions};

/// Radial nodes stored per solution.
const DEFAULT_NODES: usize = 400;

/// Radial coefficient `q(r)` together with the effective dimension used by
/// the series start.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum RadialOperator {
    /// `q = (n-1)/r`; `n = 1` is the interval.
    Flat(f64),
    /// `q = (n-1) coth r`.
    Hyperbolic(f64),
}

impl RadialOperator {
    pub(crate) fn for_model(model: &ManifoldModel) -> Self {
        match model.kind() {
            ModelKind::Euclidean(n) => RadialOperator::Flat(n as f64),
            _ => RadialOperator::Hyperbolic(model.dim() as f64),
        }
    }

    fn dim(&self) -> f64 {
        match *self {
            RadialOperator::Flat(n) | RadialOperator::Hyperbolic(n) => n,
        }
    }

    #[inline]
    fn q(&self, r: f64) -> f64 {
        match *self {
            RadialOperator::Flat(n) => (n - 1.0) / r,
            RadialOperator::Hyperbolic(n) => (n - 1.0) / r.tanh(),
        }
    }
}

/// Regular solution with `w(0) = 1` sampled on `grid` (first node 0), plus
/// the number of sign changes of `Re w` on `(0, grid.last()]`.
pub(crate) struct RegularSolution {
    pub values: Vec<Complex64>,
    pub derivs: Vec<Complex64>,
    pub sign_changes: usize,
}

pub(crate) fn regular_solution(
    op: RadialOperator,
    lambda: Complex64,
    grid: &[f64],
    opts: OdeOptions,
) -> Result<RegularSolution> {
    let radius = *grid.last().expect("non-empty grid");
    let eps = (1e-6f64).min(1e-3 * grid.get(1).copied().unwrap_or(radius));
    let n = op.dim();
    let u0 = Complex64::new(1.0, 0.0) + lambda * (eps * eps / (2.0 * n));
    let du0 = lambda * (eps / n);
    let rhs = |r: f64, y: &[f64; 4]| {
        let q = op.q(r);
        // y = [Re u, Im u, Re u', Im u']
        [
            y[2],
            y[3],
            lambda.re * y[0] - lambda.im * y[1] - q * y[2],
            lambda.re * y[1] + lambda.im * y[0] - q * y[3],
        ]
    };
    let mut last_sign = 1.0f64;
    let mut sign_changes = 0usize;
    let states = integrate_to_grid(
        rhs,
        eps,
        [u0.re, u0.im, du0.re, du0.im],
        &grid[1..],
        opts,
        |_, y| {
            if y[0] != 0.0 && y[0].signum() != last_sign {
                sign_changes += 1;
                last_sign = y[0].signum();
            }
            Ok(())
        },
    )?;
    let mut values = Vec::with_capacity(grid.len());
    let mut derivs = Vec::with_capacity(grid.len());
    values.push(Complex64::new(1.0, 0.0));
    derivs.push(Complex64::new(0.0, 0.0));
    for y in &states {
        values.push(Complex64::new(y[0], y[1]));
        derivs.push(Complex64::new(y[2], y[3]));
    }
    // an exact zero at R counts as a crossing
    if states.last().is_some_and(|y| y[0] == 0.0) {
        sign_changes += 1;
    }
    Ok(RegularSolution {
        values,
        derivs,
        sign_changes,
    })
}

fn uniform_grid(radius: f64, nodes: usize) -> Vec<f64> {
    (0..=nodes).map(|i| radius * i as f64 / nodes as f64).collect()
}

/// Radial profile `u(r)` on `[0, R]`, stored on a uniform grid with
/// derivatives and evaluated by cubic Hermite interpolation.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialSolution {
    pub radius: f64,
    pub lambda: Complex64,
    pub boundary_value: Complex64,
    pub grid: Vec<f64>,
    pub values: Vec<Complex64>,
    pub derivs: Vec<Complex64>,
}

impl RadialSolution {
    pub(crate) fn scale(&mut self, s: f64) {
        for v in self.values.iter_mut().chain(self.derivs.iter_mut()) {
            *v *= s;
        }
        self.boundary_value *= s;
    }

    pub fn center_value(&self) -> Complex64 {
        self.values[0]
    }

    pub fn value_at(&self, r: f64) -> Result<Complex64> {
        if !(0.0..=self.radius * (1.0 + 1e-12)).contains(&r) {
            return invalid(format!("radius {r} outside [0, {}]", self.radius));
        }
        let n = self.grid.len() - 1;
        let h = self.radius / n as f64;
        let i = ((r / h) as usize).min(n - 1);
        let s = (r - self.grid[i]) / h;
        let (s2, s3) = (s * s, s * s * s);
        let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
        let h10 = s3 - 2.0 * s2 + s;
        let h01 = -2.0 * s3 + 3.0 * s2;
        let h11 = s3 - s2;
        Ok(self.values[i] * h00
            + self.derivs[i] * (h10 * h)
            + self.values[i + 1] * h01
            + self.derivs[i + 1] * (h11 * h))
    }
}

fn solve_with_operator(
    op: RadialOperator,
    radius: f64,
    lambda: Complex64,
    boundary_value: Complex64,
    nodes: usize,
) -> Result<RadialSolution> {
    if !(radius > 0.0) || !radius.is_finite() {
        return invalid(format!("radius must be positive, got {radius}"));
    }
    if !lambda.re.is_finite() || !lambda.im.is_finite() {
        return invalid("lambda must be finite");
    }
    let grid = uniform_grid(radius, nodes);
    let w = regular_solution(op, lambda, &grid, OdeOptions::default())?;
    let w_end = *w.values.last().expect("non-empty");
    if lambda.im == 0.0 && w.sign_changes > 0 {
        return Err(Error::EigenvalueCrossing { lambda: lambda.re });
    }
    if w_end.norm() == 0.0 {
        return Err(Error::EigenvalueCrossing { lambda: lambda.re });
    }
    let scale = boundary_value / w_end;
    Ok(RadialSolution {
        radius,
        lambda,
        boundary_value,
        values: w.values.iter().map(|v| v * scale).collect(),
        derivs: w.derivs.iter().map(|v| v * scale).collect(),
        grid,
    })
}

/// Radial solution of `Δu = λu` on the ball of radius `R` with `u(R) = c`.
///
/// Fails with [`Error::EigenvalueCrossing`] for real `λ` at or below the
/// principal Dirichlet eigenvalue, where the regular solution changes sign
/// before reaching `R` and no positive bounded solution exists.
pub fn solve_radial_bvp(
    model: &ManifoldModel,
    radius: f64,
    lambda: Complex64,
    boundary_value: Complex64,
) -> Result<RadialSolution> {
    solve_with_operator(
        RadialOperator::for_model(model),
        radius,
        lambda,
        boundary_value,
        DEFAULT_NODES,
    )
}

/// Unnormalised regular solution at real `λ` on `nodes` uniform intervals;
/// `boundary_value` holds `w(R)`.
pub(crate) fn regular_profile(op: RadialOperator, radius: f64, lambda: f64, nodes: usize) -> Result<RadialSolution> {
    let grid = uniform_grid(radius, nodes);
    let w = regular_solution(op, Complex64::new(lambda, 0.0), &grid, OdeOptions::default())?;
    Ok(RadialSolution {
        radius,
        lambda: Complex64::new(lambda, 0.0),
        boundary_value: *w.values.last().expect("non-empty"),
        grid,
        values: w.values,
        derivs: w.derivs,
    })
}

/// Number of sign changes on `(0, R]` of the regular radial solution at real `λ`.
pub(crate) fn nodal_count(op: RadialOperator, radius: f64, lambda: f64) -> Result<usize> {
    let grid = [0.0, radius];
    Ok(regular_solution(op, Complex64::new(lambda, 0.0), &grid, OdeOptions::default())?.sign_changes)
}

/// Largest real `λ` whose regular solution has at least `k` sign changes on
/// `(0, R]`, i.e. the `k`-th radial Dirichlet eigenvalue. `upper` must have
/// fewer than `k` sign changes.
pub(crate) fn radial_eigenvalue(op: RadialOperator, radius: f64, k: usize, upper: f64) -> Result<f64> {
    let mut hi = upper;
    if nodal_count(op, radius, hi)? >= k {
        return Err(Error::Bracket(format!("upper bracket {hi} already has {k} nodes")));
    }
    let mut step = 1.0f64.max(hi.abs());
    let mut lo = hi - step;
    let mut expansions = 0;
    while nodal_count(op, radius, lo)? < k {
        hi = lo;
        step *= 2.0;
        lo -= step;
        expansions += 1;
        if expansions > 80 {
            return Err(Error::Bracket(format!("no lower bracket for mode {k}")));
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi || hi - lo <= 4e-15 * lo.abs() {
            break;
        }
        if nodal_count(op, radius, mid)? >= k {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Principal Dirichlet eigenvalue of the geodesic ball of radius `R`.
pub fn principal_eigenvalue(model: &ManifoldModel, radius: f64) -> Result<f64> {
    if !(radius > 0.0) || !radius.is_finite() {
        return invalid(format!("radius must be positive, got {radius}"));
    }
    radial_eigenvalue(RadialOperator::for_model(model), radius, 1, 0.0)
}

/// One Fourier mode `c e^{imθ}` of boundary data on a circle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FourierMode {
    pub order: i32,
    pub coefficient: Complex64,
}

/// Solution of `Δh = λh` on the flat disk of radius `R` with boundary data
/// given as a finite Fourier series.
#[derive(Debug, Clone, PartialEq)]
pub struct DiskSolution {
    pub radius: f64,
    pub lambda: Complex64,
    modes: Vec<(FourierMode, RadialSolution)>,
}

impl DiskSolution {
    /// `h(r, θ)` for `0 <= r <= R`.
    pub fn value(&self, r: f64, theta: f64) -> Result<Complex64> {
        let mut sum = Complex64::new(0.0, 0.0);
        for (mode, v) in &self.modes {
            let m = mode.order.unsigned_abs() as i32;
            let profile = if m == 0 {
                v.value_at(r)?
            } else {
                v.value_at(r)? * (r / self.radius).powi(m)
            };
            sum += mode.coefficient * profile * Complex64::from_polar(1.0, mode.order as f64 * theta);
        }
        Ok(sum)
    }

    /// Radial profile `ρ_m(r)` of order `m`, normalised by `ρ_m(R) = 1`.
    pub fn profile(&self, order: i32, r: f64) -> Result<Complex64> {
        let m = order.unsigned_abs() as i32;
        let (_, v) = self
            .modes
            .iter()
            .find(|(mode, _)| mode.order.unsigned_abs() as i32 == m)
            .ok_or_else(|| Error::InvalidArgument(format!("order {order} not in the series")))?;
        Ok(v.value_at(r)? * (r / self.radius).powi(m))
    }
}

/// Separation of variables on the flat disk. The radial factor of order `m`
/// is `ρ_m = (r/R)^{|m|} v(r)/v(R)`, where `v` is the regular solution of
/// `v'' + (2|m|+1)/r v' = λv`, so the `r^{-m}` singularity never enters.
pub fn solve_disk_bvp(
    lambda: Complex64,
    boundary: &[FourierMode],
    radius: f64,
    radial_nodes: usize,
) -> Result<DiskSolution> {
    if boundary.is_empty() {
        return invalid("boundary series is empty");
    }
    if radial_nodes < 2 {
        return invalid("need at least two radial nodes");
    }
    let one = Complex64::new(1.0, 0.0);
    let mut modes = Vec::with_capacity(boundary.len());
    for mode in boundary {
        let m = mode.order.unsigned_abs() as f64;
        let op = RadialOperator::Flat(2.0 * m + 2.0);
        let v = solve_with_operator(op, radius, lambda, one, radial_nodes)?;
        modes.push((*mode, v));
    }
    Ok(DiskSolution { radius, lambda, modes })
}

/// Closed-form `E_x[τ]` for flat balls: `(R² - r²) / (2n)` under generator Δ.
#[derive(Debug, Clone)]
pub struct MeanExitTime {
    domain: Domain,
    radius: f64,
    dim: usize,
}

impl MeanExitTime {
    pub fn at(&self, x: &ChartPoint) -> Result<f64> {
        let sd = self.domain.signed_distance(x)?;
        if sd > 0.0 {
            return invalid("point lies outside the domain");
        }
        let r2 = x.chart_dist_sq(&self.domain.chart_center());
        Ok(((self.radius * self.radius - r2) / (2.0 * self.dim as f64)).max(0.0))
    }
}

pub fn mean_exit_time(domain: &Domain) -> Result<MeanExitTime> {
    match domain.model().kind() {
        ModelKind::Euclidean(n) if domain.inner_radius() == 0.0 => Ok(MeanExitTime {
            domain: domain.clone(),
            radius: domain.chart_radius(),
            dim: n,
        }),
        _ => Err(Error::Unsupported(
            "closed-form mean exit time needs a flat ball or interval".into(),
        )),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::special::{bessel_i, bessel_j_zeros};

    fn real(x: f64) -> Complex64 {
        Complex64::new(x, 0.0)
    }

    #[test]
    fn interval_matches_cosh() {
        let m = ManifoldModel::euclidean(1).unwrap();
        let u = solve_radial_bvp(&m, 1.0, real(1.0), real(1.0)).unwrap();
        assert!((u.center_value().re - 1.0 / 1f64.cosh()).abs() < 1e-8);
        for &r in &[0.13, 0.5, 0.77] {
            let v = u.value_at(r).unwrap().re;
            assert!((v - r.cosh() / 1f64.cosh()).abs() < 1e-8, "r={r}");
        }
    }

    #[test]
    fn flat_disk_matches_bessel_i() {
        let m = ManifoldModel::euclidean(2).unwrap();
        let u = solve_radial_bvp(&m, 1.0, real(1.0), real(1.0)).unwrap();
        assert!((u.center_value().re - 1.0 / bessel_i(0, 1.0)).abs() < 1e-8);
    }

    #[test]
    fn zero_lambda_is_constant() {
        let m = ManifoldModel::hyperbolic_disk();
        let u = solve_radial_bvp(&m, 1.5, real(0.0), real(2.0)).unwrap();
        for v in &u.values {
            assert!((v.re - 2.0).abs() < 1e-12 && v.im == 0.0);
        }
    }

    #[test]
    fn crossing_below_principal_eigenvalue() {
        let m = ManifoldModel::euclidean(1).unwrap();
        assert!(matches!(
            solve_radial_bvp(&m, 1.0, real(-2.6), real(1.0)),
            Err(Error::EigenvalueCrossing { .. })
        ));
        // complex λ never crosses
        assert!(solve_radial_bvp(&m, 1.0, Complex64::new(-2.6, 0.5), real(1.0)).is_ok());
    }

    #[test]
    fn principal_eigenvalues_flat() {
        let line = ManifoldModel::euclidean(1).unwrap();
        let l1 = principal_eigenvalue(&line, 1.0).unwrap();
        assert!((l1 + std::f64::consts::PI.powi(2) / 4.0).abs() < 1e-9);
        let plane = ManifoldModel::euclidean(2).unwrap();
        let j = bessel_j_zeros(0, 1)[0];
        assert!((principal_eigenvalue(&plane, 1.0).unwrap() + j * j).abs() < 1e-8);
    }

    #[test]
    fn disk_modes() {
        let cos1 = [
            FourierMode {
                order: 1,
                coefficient: real(0.5),
            },
            FourierMode {
                order: -1,
                coefficient: real(0.5),
            },
        ];
        let harmonic = solve_disk_bvp(real(0.0), &cos1, 1.0, 200).unwrap();
        assert!((harmonic.value(0.5, 0.0).unwrap().re - 0.5).abs() < 1e-12);
        let sol = solve_disk_bvp(real(1.0), &cos1, 1.0, 200).unwrap();
        let expect = bessel_i(1, 0.5) / bessel_i(1, 1.0);
        assert!((sol.value(0.5, 0.0).unwrap().re - expect).abs() < 1e-8);
    }

    #[test]
    fn value_at_rejects_outside() {
        let m = ManifoldModel::euclidean(1).unwrap();
        let u = solve_radial_bvp(&m, 1.0, real(1.0), real(1.0)).unwrap();
        assert!(u.value_at(1.5).is_err());
        assert!(u.value_at(-0.1).is_err());
    }
}
