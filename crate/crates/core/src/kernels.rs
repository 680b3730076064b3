//! Closed-form heat kernels of the model spaces and checks of the Gaussian
//! bounds they satisfy.
//!
//! Kernels solve `∂_t p = Δp` and depend on the pair of points only through
//! their distance. Values are computed in log space so that bound ratios stay
//! finite where `p` itself underflows.

use std::f64::consts::{PI, SQRT_2};

use crate::error::{invalid, Error, Result};
use crate::geometry::{ManifoldModel, ModelKind};
use crate::quad::{integrate_with_breaks, QuadOptions};
use crate::stats::{linear_fit, LinearFit};

/// Log-space cutoff for the tails of radial integrands.
const TAIL_EXPONENT: f64 = 70.0;

/// `ln sinh(x)` for `x > 0` without overflow.
fn ln_sinh(x: f64) -> f64 {
    if x < 20.0 {
        x.sinh().ln()
    } else {
        x - std::f64::consts::LN_2 + (-(-2.0 * x).exp()).ln_1p()
    }
}

/// `ln(d / sinh d)`.
fn ln_d_over_sinh(d: f64) -> f64 {
    if d < 1e-4 {
        -d * d / 6.0
    } else {
        d.ln() - ln_sinh(d)
    }
}

/// `∫_d^∞ s e^{-(s²-d²)/(4t)} / √(cosh s - cosh d) ds` for the plane, via
/// `s = d + w²`, which removes the endpoint singularity.
fn mckean_integral(t: f64, d: f64) -> Result<f64> {
    let g = |w: f64| -> f64 {
        if w == 0.0 {
            return if d == 0.0 { 0.0 } else { 2.0 * d / d.sinh().sqrt() };
        }
        let w2 = w * w;
        // cosh(d + w²) - cosh d = 2 sinh(d + w²/2) sinh(w²/2)
        let ln_den = 0.5 * (std::f64::consts::LN_2 + ln_sinh(d + 0.5 * w2) + ln_sinh(0.5 * w2));
        let ln_num = (2.0 * w * (d + w2)).ln() - (2.0 * d * w2 + w2 * w2) / (4.0 * t);
        (ln_num - ln_den).exp()
    };
    // w² where the exponent (2 d w² + w⁴)/(4t) + w²/2 reaches `level`
    let reach = |level: f64| {
        let a = 1.0 / (4.0 * t);
        let b = d / (2.0 * t) + 0.5;
        ((-b + (b * b + 4.0 * a * level).sqrt()) / (2.0 * a)).sqrt()
    };
    let (w1, w2, w_max) = (reach(1.0), reach(8.0), reach(TAIL_EXPONENT));
    let mut g = g;
    integrate_with_breaks(&mut g, &[0.0, w1, w2, w_max], QuadOptions::rel(1e-10))
}

/// `ln p(t, d)`.
pub fn ln_heat_kernel(model: &ManifoldModel, t: f64, d: f64) -> Result<f64> {
    if !(t > 0.0) || !t.is_finite() {
        return invalid(format!("time must be positive, got {t}"));
    }
    if !(d >= 0.0) || !d.is_finite() {
        return invalid(format!("distance must be nonnegative, got {d}"));
    }
    Ok(match model.kind() {
        ModelKind::Euclidean(n) => -0.5 * n as f64 * (4.0 * PI * t).ln() - d * d / (4.0 * t),
        ModelKind::Hyperbolic3 => -1.5 * (4.0 * PI * t).ln() + ln_d_over_sinh(d) - t - d * d / (4.0 * t),
        ModelKind::HyperbolicDisk2 | ModelKind::HyperbolicHalfPlane2 => {
            let integral = mckean_integral(t, d)?;
            SQRT_2.ln() - 1.5 * (4.0 * PI * t).ln() - 0.25 * t - d * d / (4.0 * t) + integral.ln()
        }
    })
}

pub fn heat_kernel(model: &ManifoldModel, t: f64, d: f64) -> Result<f64> {
    ln_heat_kernel(model, t, d).map(f64::exp)
}

/// A kernel value with its arguments.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HeatKernelEval {
    pub model: ManifoldModel,
    pub t: f64,
    pub distance: f64,
    pub value: f64,
}

impl HeatKernelEval {
    pub fn new(model: &ManifoldModel, t: f64, distance: f64) -> Result<Self> {
        Ok(Self {
            model: *model,
            t,
            distance,
            value: heat_kernel(model, t, distance)?,
        })
    }
}

/// Density of `d(x, B_t)`: `p(t, r) · |S_r|`.
pub fn radial_density(model: &ManifoldModel, t: f64, r: f64) -> Result<f64> {
    if r == 0.0 {
        return Ok(if model.dim() == 1 {
            2.0 * heat_kernel(model, t, 0.0)?
        } else {
            0.0
        });
    }
    Ok((ln_heat_kernel(model, t, r)? + model.sphere_area(r).ln()).exp())
}

/// Radius where most of the mass of `d(x, B_t)` sits.
fn radial_bulk(model: &ManifoldModel, t: f64) -> f64 {
    let n = model.dim() as f64;
    let drift = if model.is_hyperbolic() { (n - 1.0) * t } else { 0.0 };
    drift + (2.0 * n * t).sqrt()
}

fn radial_integral(model: &ManifoldModel, t: f64, from: f64, opts: QuadOptions) -> Result<f64> {
    let width = (4.0 * t).sqrt();
    let bulk = radial_bulk(model, t).max(from);
    let upper = bulk + width * TAIL_EXPONENT.sqrt() + 1.0;
    let mut breaks = vec![from];
    for k in [0.5, 1.0, 2.0, 4.0] {
        let b = bulk + (k - 1.0) * width;
        if b > *breaks.last().expect("non-empty") && b < upper {
            breaks.push(b);
        }
    }
    breaks.push(upper);
    let mut err = None;
    let mut f = |r: f64| match radial_density(model, t, r) {
        Ok(v) => v,
        Err(e) => {
            err.get_or_insert(e);
            0.0
        }
    };
    let v = integrate_with_breaks(&mut f, &breaks, opts)?;
    match err {
        Some(e) => Err(e),
        None => Ok(v),
    }
}

/// `∫ p(t, x, y) dvol(y)` by radial quadrature.
pub fn mass_conservation(model: &ManifoldModel, t: f64) -> Result<f64> {
    if !(t > 0.0) {
        return invalid("time must be positive");
    }
    radial_integral(model, t, 0.0, QuadOptions::rel(1e-10))
}

/// `∫_{X - B(x,R)} p(t, x, y) dvol(y)`.
pub fn tail_mass(model: &ManifoldModel, t: f64, radius: f64) -> Result<f64> {
    if !(t > 0.0) {
        return invalid("time must be positive");
    }
    if !(radius >= 0.0) {
        return invalid("radius must be nonnegative");
    }
    let opts = QuadOptions {
        abs_tol: 0.0,
        rel_tol: 1e-12,
        max_intervals: 4000,
    };
    radial_integral(model, t, radius, opts)
}

/// Constants of the Gaussian estimates. Fitted values are filled in by the
/// `fit_*` functions; the rest are fixed by the model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TailBoundParams {
    /// Tail prefactor.
    pub kappa: f64,
    /// Tail exponent rate.
    pub eta: f64,
    /// Short-time prefactor.
    pub big_c: f64,
    /// Multiplier of `λ1 t` in the short-time bound.
    pub c: f64,
    /// Gaussian width constant, greater than 4.
    pub d_const: f64,
    /// Long-time prefactor.
    pub k_long: f64,
    /// Volume growth `J(r) <= K_vol e^{h_vol r}`.
    pub k_vol: f64,
    pub h_vol: f64,
}

impl TailBoundParams {
    pub fn for_model(model: &ManifoldModel) -> Self {
        Self {
            kappa: f64::NAN,
            eta: f64::NAN,
            big_c: f64::NAN,
            c: 1.0,
            d_const: 5.0,
            k_long: f64::NAN,
            k_vol: 1.0,
            h_vol: model.volume_growth_rate(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.d_const > 4.0) {
            return invalid(format!("D_const must exceed 4, got {}", self.d_const));
        }
        if !(self.c > 0.0 && self.k_vol > 0.0 && self.h_vol >= 0.0) {
            return invalid("bound constants must be positive");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundViolation {
    pub t: f64,
    /// Spatial arguments: a distance, a radius or a point pair.
    pub at: Vec<f64>,
    pub lhs: f64,
    pub rhs: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundReport {
    pub name: String,
    pub checked: usize,
    /// Prefactor used (given or fitted).
    pub constant: f64,
    /// Largest `lhs / (rhs / constant)` seen.
    pub max_ratio: f64,
    pub violations: Vec<BoundViolation>,
    pub pass: bool,
}

/// `(t, d)` grid for the kernel bounds.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundGrid {
    pub times: Vec<f64>,
    pub distances: Vec<f64>,
}

fn log_spaced(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| (lo.ln() + (hi.ln() - lo.ln()) * i as f64 / (n - 1) as f64).exp())
        .collect()
}

fn lin_spaced(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
}

impl BoundGrid {
    /// `t` log-spaced on `[1e-3, 10]`, `d` linear on `[0, 10]`.
    pub fn short_time() -> Self {
        Self {
            times: log_spaced(1e-3, 10.0, 41),
            distances: lin_spaced(0.0, 10.0, 41),
        }
    }

    /// `t` log-spaced on `[1, 50]`, `d` linear on `[0, 10]`.
    pub fn long_time() -> Self {
        Self {
            times: log_spaced(1.0, 50.0, 31),
            distances: lin_spaced(0.0, 10.0, 41),
        }
    }
}

/// Evaluates `ln(lhs / shape)` on the grid, fits the prefactor as the
/// maximum ratio when `constant` is `None`, and lists points over it.
fn bound_report<F>(name: &str, points: &[(f64, Vec<f64>, f64)], shape: F, constant: Option<f64>) -> BoundReport
where
    F: Fn(f64, &[f64]) -> f64,
{
    let ln_ratios: Vec<f64> = points.iter().map(|(t, at, ln_lhs)| ln_lhs - shape(*t, at)).collect();
    let max_ln = ln_ratios.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let finite = ln_ratios.iter().all(|v| v.is_finite() || *v == f64::NEG_INFINITY) && max_ln.is_finite();
    let constant = constant.unwrap_or(max_ln.exp());
    let mut violations = Vec::new();
    for ((t, at, ln_lhs), ln_r) in points.iter().zip(&ln_ratios) {
        if !(*ln_r <= constant.ln() + 1e-12) {
            violations.push(BoundViolation {
                t: *t,
                at: at.clone(),
                lhs: ln_lhs.exp(),
                rhs: (constant.ln() + shape(*t, at)).exp(),
            });
        }
    }
    BoundReport {
        name: name.to_string(),
        checked: points.len(),
        constant,
        max_ratio: max_ln.exp(),
        pass: finite && constant.is_finite() && constant > 0.0 && violations.is_empty(),
        violations,
    }
}

fn kernel_points(model: &ManifoldModel, grid: &BoundGrid) -> Result<Vec<(f64, Vec<f64>, f64)>> {
    let mut out = Vec::with_capacity(grid.times.len() * grid.distances.len());
    for &t in &grid.times {
        for &d in &grid.distances {
            out.push((t, vec![d], ln_heat_kernel(model, t, d)?));
        }
    }
    Ok(out)
}

/// `p(t,d) <= C t^{-n/2} exp(c λ1 t - d²/(D t))` with `params.big_c`, or
/// with the smallest valid `C` if that is NaN.
pub fn check_short_bound(model: &ManifoldModel, params: &TailBoundParams, grid: &BoundGrid) -> Result<BoundReport> {
    params.validate()?;
    let n = model.dim() as f64;
    let (c, dc, l1) = (params.c, params.d_const, model.lambda1());
    let points = kernel_points(model, grid)?;
    let given = (!params.big_c.is_nan()).then_some(params.big_c);
    Ok(bound_report(
        "short_time",
        &points,
        |t, at| -0.5 * n * t.ln() + c * l1 * t - at[0] * at[0] / (dc * t),
        given,
    ))
}

/// `p(t,d) <= K (1 + d²/t)^{1+n/2} exp(λ1 t - d²/(4t))` for `t >= 1`; a NaN
/// `k_long` fits the smallest valid constant.
pub fn check_long_bound(model: &ManifoldModel, k_long: f64, grid: &BoundGrid) -> Result<BoundReport> {
    if grid.times.iter().any(|&t| t < 1.0) {
        return invalid("long-time bound needs t >= 1");
    }
    let n = model.dim() as f64;
    let l1 = model.lambda1();
    let points = kernel_points(model, grid)?;
    let given = (!k_long.is_nan()).then_some(k_long);
    Ok(bound_report(
        "long_time",
        &points,
        |t, at| {
            let d = at[0];
            (1.0 + 0.5 * n) * (d * d / t).ln_1p() + l1 * t - d * d / (4.0 * t)
        },
        given,
    ))
}

/// Fitted tail estimate `tail_mass(t, R) <= κ e^{-η R²/t}`.
#[derive(Debug, Clone, PartialEq)]
pub struct TailFit {
    pub eta: f64,
    pub kappa: f64,
    /// Regression of `ln tail` on `R²/t`.
    pub fit: LinearFit,
    pub report: BoundReport,
}

fn tail_points(model: &ManifoldModel, pairs: &[(f64, f64)], params: &TailBoundParams) -> Result<Vec<(f64, Vec<f64>, f64)>> {
    params.validate()?;
    let floor = params.d_const * params.h_vol;
    let mut out = Vec::with_capacity(pairs.len());
    for &(t, r) in pairs {
        if !(t > 0.0 && r > 0.0) {
            return invalid("tail pairs need t > 0 and R > 0");
        }
        if r < floor * t {
            return invalid(format!("R = {r} below the regime R >= D h t = {} at t = {t}", floor * t));
        }
        out.push((t, vec![r], tail_mass(model, t, r)?.ln()));
    }
    Ok(out)
}

/// Checks `tail_mass(t, R) <= κ e^{-η R²/t}` at the given `(t, R)` pairs.
pub fn check_tail_bound(
    model: &ManifoldModel,
    kappa: f64,
    eta: f64,
    pairs: &[(f64, f64)],
    params: &TailBoundParams,
) -> Result<BoundReport> {
    if !(kappa > 0.0 && eta > 0.0) {
        return invalid("κ and η must be positive");
    }
    let points = tail_points(model, pairs, params)?;
    Ok(bound_report("tail", &points, |t, at| -eta * at[0] * at[0] / t, Some(kappa)))
}

/// Fits `η` from the slope of `ln tail` against `R²/t`, then `κ` as the
/// smallest prefactor making the bound hold on every pair.
pub fn fit_tail_bound(model: &ManifoldModel, pairs: &[(f64, f64)], params: &TailBoundParams) -> Result<TailFit> {
    if pairs.len() < 3 {
        return invalid("need at least three (t, R) pairs");
    }
    let points = tail_points(model, pairs, params)?;
    let xs: Vec<f64> = points.iter().map(|(t, at, _)| at[0] * at[0] / t).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.2).collect();
    let fit = linear_fit(&xs, &ys).ok_or_else(|| Error::InvalidArgument("degenerate tail regression".into()))?;
    let eta = -fit.slope;
    if !(eta > 0.0) {
        return Ok(TailFit {
            eta,
            kappa: f64::NAN,
            fit,
            report: BoundReport {
                name: "tail".into(),
                checked: points.len(),
                constant: f64::NAN,
                max_ratio: f64::NAN,
                violations: Vec::new(),
                pass: false,
            },
        });
    }
    let report = bound_report("tail", &points, |t, at| -eta * at[0] * at[0] / t, None);
    Ok(TailFit {
        eta,
        kappa: report.constant,
        fit,
        report,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flat_kernel_reference() {
        let e = ManifoldModel::euclidean(2).unwrap();
        assert!((heat_kernel(&e, 0.25, 0.0).unwrap() - 1.0 / PI).abs() < 1e-15);
        assert!(heat_kernel(&e, 0.0, 1.0).is_err());
        assert!(heat_kernel(&e, 1.0, -1.0).is_err());
    }

    #[test]
    fn hyperbolic3_limit_at_zero_distance() {
        let h = ManifoldModel::hyperbolic3();
        let p0 = heat_kernel(&h, 1.0, 0.0).unwrap();
        assert!((p0 - (4.0 * PI).powf(-1.5) * (-1.0f64).exp()).abs() < 1e-16);
        let near = heat_kernel(&h, 1.0, 1e-6).unwrap();
        assert!((near - p0).abs() < 1e-12 * p0);
    }

    #[test]
    fn plane_kernel_short_time_is_nearly_flat() {
        // at small t and d the hyperbolic kernel approaches the flat one
        let h = ManifoldModel::hyperbolic_disk();
        let e = ManifoldModel::euclidean(2).unwrap();
        let (ph, pe) = (heat_kernel(&h, 1e-3, 0.0).unwrap(), heat_kernel(&e, 1e-3, 0.0).unwrap());
        assert!((ph / pe - 1.0).abs() < 1e-3);
    }

    #[test]
    fn gaussian_tail() {
        let e = ManifoldModel::euclidean(2).unwrap();
        let tail = tail_mass(&e, 0.1, 2.0).unwrap();
        assert!((tail / (-10.0f64).exp() - 1.0).abs() < 1e-8);
        assert!((tail_mass(&e, 0.1, 0.0).unwrap() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn flat_short_bound_with_unit_constant() {
        let e = ManifoldModel::euclidean(2).unwrap();
        let mut p = TailBoundParams::for_model(&e);
        p.big_c = 1.0;
        let r = check_short_bound(&e, &p, &BoundGrid::short_time()).unwrap();
        assert!(r.pass, "{:?}", r.violations.first());
        p.d_const = 3.0;
        assert!(check_short_bound(&e, &p, &BoundGrid::short_time()).is_err());
    }

    #[test]
    fn violations_are_listed() {
        let e = ManifoldModel::euclidean(2).unwrap();
        let mut p = TailBoundParams::for_model(&e);
        p.big_c = 1e-3;
        let r = check_short_bound(&e, &p, &BoundGrid::short_time()).unwrap();
        assert!(!r.pass && !r.violations.is_empty());
    }
}
