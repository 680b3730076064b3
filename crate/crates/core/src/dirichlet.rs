//! Dirichlet spectra of reference domains and the quantities built from
//! them: the Dirichlet heat kernel `p_D = Σ e^{λ_k t} φ_k(x) φ_k(y)`, the
//! survival function `P_x(τ >= t) = ∫ p_D(t, x, y) dy`, domination by the
//! free kernel and small-time exit estimates.
//!
//! Every truncated sum carries a bound on the omitted modes. With `Λ` a lower
//! bound on `|λ_k|` for every omitted mode,
//! `Σ_omitted e^{λ_k t} φ_k(x)² <= e^{-Λt/2} p(t/2, x, x)`, and the
//! off-diagonal and integrated tails follow by Cauchy–Schwarz.

use std::f64::consts::PI;

use crate::error::{invalid, Error, Result};
use crate::exitmc::Domain;
use crate::geometry::{ChartPoint, ManifoldModel, ModelKind};
use crate::kernels::{heat_kernel, BoundReport, BoundViolation};
use crate::oracle::{radial_eigenvalue, regular_profile, RadialOperator, RadialSolution};
use crate::special::{bessel_j, bessel_j_zero_table};
use crate::stats::{linear_fit, LinearFit};

/// Largest truncation error accepted by kernel and survival evaluations.
pub const TRUNCATION_TOLERANCE: f64 = 1e-10;

pub const DEFAULT_INTERVAL_MODES: usize = 200;
/// Orders and zeros per order for the flat disk.
pub const DEFAULT_DISK_MODES: usize = 60;
pub const DEFAULT_BALL_MODES: usize = 40;

#[derive(Debug, Clone, Copy, PartialEq)]
enum Trig {
    None,
    Cos,
    Sin,
}

#[derive(Debug, Clone, PartialEq)]
enum Shape {
    /// `sin(kπ(u + a)/(2a)) / √a` with `u` the offset from the center.
    Sine { k: usize },
    /// `norm · J_m(j r / R) · trig(mθ)`.
    Bessel { order: usize, zero: f64, norm: f64, trig: Trig },
    /// Normalised radial profile in the geodesic radius.
    Radial { profile: RadialSolution },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mode {
    pub eigenvalue: f64,
    /// `∫_D φ_k dvol`.
    pub integral: f64,
    shape: Shape,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpectrumKind {
    Interval,
    FlatDisk,
    /// Radial modes only: evaluations need a point at the center, except
    /// survival, to which non-radial modes contribute nothing.
    HyperbolicBall,
}

/// Truncated Dirichlet eigen-expansion of a reference domain.
#[derive(Debug, Clone, PartialEq)]
pub struct DirichletSpectrum {
    pub kind: SpectrumKind,
    domain: Domain,
    /// Sorted by decreasing eigenvalue.
    modes: Vec<Mode>,
    /// Lower bound on `|λ|` over every omitted mode.
    cutoff: f64,
    volume: f64,
}

/// Builds the spectrum of `domain`. `modes` overrides the default truncation
/// (for the flat disk: orders and zeros per order).
pub fn spectrum(domain: &Domain, modes: Option<usize>) -> Result<DirichletSpectrum> {
    let model = domain.model();
    let (_, radius) = domain
        .ball()
        .ok_or_else(|| Error::Unsupported(format!("no spectrum for {}", domain.describe())))?;
    match model.kind() {
        ModelKind::Euclidean(1) => interval_spectrum(domain, radius, modes.unwrap_or(DEFAULT_INTERVAL_MODES)),
        ModelKind::Euclidean(2) => disk_spectrum(domain, radius, modes.unwrap_or(DEFAULT_DISK_MODES)),
        ModelKind::HyperbolicDisk2 | ModelKind::HyperbolicHalfPlane2 => {
            ball_spectrum(domain, radius, modes.unwrap_or(DEFAULT_BALL_MODES))
        }
        _ => Err(Error::Unsupported(format!("no spectrum for {}", domain.describe()))),
    }
}

fn interval_spectrum(domain: &Domain, a: f64, count: usize) -> Result<DirichletSpectrum> {
    if count == 0 {
        return invalid("need at least one mode");
    }
    let modes = (1..=count)
        .map(|k| {
            let kf = k as f64;
            Mode {
                eigenvalue: -(kf * PI / (2.0 * a)).powi(2),
                integral: if k % 2 == 1 { 4.0 * a.sqrt() / (kf * PI) } else { 0.0 },
                shape: Shape::Sine { k },
            }
        })
        .collect();
    Ok(DirichletSpectrum {
        kind: SpectrumKind::Interval,
        domain: domain.clone(),
        modes,
        cutoff: ((count + 1) as f64 * PI / (2.0 * a)).powi(2),
        volume: 2.0 * a,
    })
}

fn disk_spectrum(domain: &Domain, radius: f64, count: usize) -> Result<DirichletSpectrum> {
    if count == 0 {
        return invalid("need at least one mode");
    }
    let zeros = bessel_j_zero_table(count - 1, count);
    let mut modes = Vec::with_capacity(count * (2 * count - 1));
    for (m, row) in zeros.iter().enumerate() {
        for &j in row {
            let jm1 = bessel_j(m + 1, j);
            let eigenvalue = -(j / radius).powi(2);
            if m == 0 {
                modes.push(Mode {
                    eigenvalue,
                    integral: 2.0 * PI.sqrt() * radius / (j * jm1.signum()),
                    shape: Shape::Bessel {
                        order: 0,
                        zero: j,
                        norm: 1.0 / (PI.sqrt() * radius * jm1.abs()),
                        trig: Trig::None,
                    },
                });
            } else {
                let norm = (2.0 / PI).sqrt() / (radius * jm1.abs());
                for trig in [Trig::Cos, Trig::Sin] {
                    modes.push(Mode {
                        eigenvalue,
                        integral: 0.0,
                        shape: Shape::Bessel {
                            order: m,
                            zero: j,
                            norm,
                            trig,
                        },
                    });
                }
            }
        }
    }
    modes.sort_by(|a, b| b.eigenvalue.total_cmp(&a.eigenvalue));
    // omitted modes have order >= count (j > count) or a zero beyond the
    // last one kept, which exceeds the last zero of J_0
    let last_j0 = *zeros[0].last().expect("count >= 1");
    Ok(DirichletSpectrum {
        kind: SpectrumKind::FlatDisk,
        domain: domain.clone(),
        modes,
        cutoff: ((count as f64).min(last_j0) / radius).powi(2),
        volume: PI * radius * radius,
    })
}

/// Gauss–Legendre nodes and weights on `[0, 1]`, four points.
const GL4: [(f64, f64); 4] = [
    (0.069_431_844_202_973_71, 0.173_927_422_568_726_93),
    (0.330_009_478_207_571_9, 0.326_072_577_431_273_07),
    (0.669_990_521_792_428_1, 0.326_072_577_431_273_07),
    (0.930_568_155_797_026_3, 0.173_927_422_568_726_93),
];

/// `∫_0^R f(r) dr` cellwise on the profile grid.
fn grid_integral<F: Fn(f64) -> Result<f64>>(grid: &[f64], f: F) -> Result<f64> {
    let mut sum = 0.0;
    for w in grid.windows(2) {
        let h = w[1] - w[0];
        for (s, wt) in GL4 {
            sum += wt * h * f(w[0] + s * h)?;
        }
    }
    Ok(sum)
}

fn ball_spectrum(domain: &Domain, radius: f64, count: usize) -> Result<DirichletSpectrum> {
    if count == 0 {
        return invalid("need at least one mode");
    }
    let model = domain.model();
    let op = RadialOperator::for_model(model);
    let nodes = 1000 + 100 * count;
    let mut modes = Vec::with_capacity(count);
    let mut upper = 0.0;
    for k in 1..=count {
        let eigenvalue = radial_eigenvalue(op, radius, k, upper)?;
        upper = eigenvalue;
        let mut profile = regular_profile(op, radius, eigenvalue, nodes)?;
        let area = |r: f64| model.sphere_area(r);
        let norm2 = grid_integral(&profile.grid, |r| Ok(profile.value_at(r)?.re.powi(2) * area(r)))?;
        profile.scale(1.0 / norm2.sqrt());
        let integral = grid_integral(&profile.grid, |r| Ok(profile.value_at(r)?.re * area(r)))?;
        modes.push(Mode {
            eigenvalue,
            integral,
            shape: Shape::Radial { profile },
        });
    }
    Ok(DirichletSpectrum {
        kind: SpectrumKind::HyperbolicBall,
        domain: domain.clone(),
        cutoff: -upper,
        modes,
        volume: model.volume_ball(radius)?,
    })
}

/// Survival probability with its unclamped series value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Survival {
    pub raw: f64,
    pub clamped: f64,
    pub truncation_bound: f64,
}

impl DirichletSpectrum {
    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn len(&self) -> usize {
        self.modes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.modes.is_empty()
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        self.modes.iter().map(|m| m.eigenvalue).collect()
    }

    pub fn modes(&self) -> &[Mode] {
        &self.modes
    }

    /// Lower bound on `|λ|` over the omitted modes.
    pub fn cutoff(&self) -> f64 {
        self.cutoff
    }

    fn local(&self, x: &ChartPoint) -> Result<(f64, f64)> {
        if self.domain.signed_distance(x)? > 1e-12 {
            return invalid("point lies outside the domain");
        }
        let c = self.domain.chart_center();
        let r = match self.kind {
            SpectrumKind::HyperbolicBall => self.domain.radial_coordinate(x).expect("ball"),
            _ => x.chart_dist_sq(&c).sqrt(),
        };
        Ok((r, self.domain.boundary_angle(x)))
    }

    fn eval(&self, mode: &Mode, x: &ChartPoint, r: f64, theta: f64) -> Result<f64> {
        let radius = self.domain.ball().expect("ball").1;
        Ok(match &mode.shape {
            Shape::Sine { k } => {
                let u = x.coords()[0] - self.domain.chart_center().coords()[0];
                (*k as f64 * PI * (u + radius) / (2.0 * radius)).sin() / radius.sqrt()
            }
            Shape::Bessel { order, zero, norm, trig } => {
                let radial = norm * bessel_j(*order, (zero * r / radius).min(*zero));
                match trig {
                    Trig::None => radial,
                    Trig::Cos => radial * (*order as f64 * theta).cos(),
                    Trig::Sin => radial * (*order as f64 * theta).sin(),
                }
            }
            Shape::Radial { profile } => profile.value_at(r.min(radius))?.re,
        })
    }

    /// `φ_k(x)` for the `k`-th mode (0-based, decreasing eigenvalue).
    pub fn eigenfunction(&self, k: usize, x: &ChartPoint) -> Result<f64> {
        let mode = self
            .modes
            .get(k)
            .ok_or_else(|| Error::InvalidArgument(format!("mode {k} not in the truncation")))?;
        let (r, theta) = self.local(x)?;
        self.eval(mode, x, r, theta)
    }

    fn diagonal_free_kernel(&self, t: f64) -> Result<f64> {
        heat_kernel(self.domain.model(), 0.5 * t, 0.0)
    }

    fn check_truncation(&self, t: f64, bound: f64) -> Result<()> {
        if bound > TRUNCATION_TOLERANCE || !bound.is_finite() {
            Err(Error::Truncation {
                t,
                bound,
                tolerance: TRUNCATION_TOLERANCE,
            })
        } else {
            Ok(())
        }
    }

    /// Bound on the omitted part of `p_D(t, x, y)`.
    pub fn kernel_truncation_bound(&self, t: f64) -> Result<f64> {
        Ok((-0.5 * self.cutoff * t).exp() * self.diagonal_free_kernel(t)?)
    }

    /// Truncated `p_D(t, x, y)`.
    pub fn kernel(&self, t: f64, x: &ChartPoint, y: &ChartPoint) -> Result<f64> {
        if !(t > 0.0) {
            return invalid("time must be positive");
        }
        let (rx, tx) = self.local(x)?;
        let (ry, ty) = self.local(y)?;
        if self.kind == SpectrumKind::HyperbolicBall && rx.min(ry) > 1e-12 {
            return Err(Error::Unsupported(
                "hyperbolic ball kernel needs one point at the center (radial modes only)".into(),
            ));
        }
        self.check_truncation(t, self.kernel_truncation_bound(t)?)?;
        let mut sum = 0.0;
        for mode in &self.modes {
            let w = (mode.eigenvalue * t).exp();
            if w == 0.0 {
                break;
            }
            sum += w * self.eval(mode, x, rx, tx)? * self.eval(mode, y, ry, ty)?;
        }
        Ok(sum)
    }

    /// Bound on the omitted part of the survival series.
    pub fn survival_truncation_bound(&self, t: f64) -> Result<f64> {
        Ok((-0.5 * self.cutoff * t).exp() * (self.diagonal_free_kernel(t)? * self.volume).sqrt())
    }

    /// Survival coefficients `c_k = φ_k(x) ∫φ_k` of the modes with nonzero
    /// integral, paired with their eigenvalues.
    fn survival_terms(&self, x: &ChartPoint) -> Result<Vec<(f64, f64)>> {
        let (r, theta) = self.local(x)?;
        let mut out = Vec::new();
        for mode in self.modes.iter().filter(|m| m.integral != 0.0) {
            out.push((mode.eigenvalue, self.eval(mode, x, r, theta)? * mode.integral));
        }
        Ok(out)
    }

    /// `P_x(τ >= t) = Σ e^{λ_k t} φ_k(x) ∫φ_k`.
    pub fn survival(&self, t: f64, x: &ChartPoint) -> Result<Survival> {
        if !(t > 0.0) {
            return invalid("time must be positive");
        }
        let truncation_bound = self.survival_truncation_bound(t)?;
        self.check_truncation(t, truncation_bound)?;
        let raw: f64 = self
            .survival_terms(x)?
            .iter()
            .map(|(l, c)| (l * t).exp() * c)
            .sum();
        Ok(Survival {
            raw,
            clamped: raw.clamp(0.0, 1.0),
            truncation_bound,
        })
    }

    /// `E_x[e^{-aτ} | τ < T]`, integrating the survival series termwise:
    /// `E[e^{-aτ}; τ < T] = 1 - e^{-aT} S(T) - a Σ c_k (e^{(λ_k - a)T} - 1)/(λ_k - a)`.
    pub fn conditional_moment(&self, x: &ChartPoint, rate: f64, horizon: f64) -> Result<f64> {
        if !(horizon > 0.0) {
            return invalid("horizon must be positive");
        }
        let terms = self.survival_terms(x)?;
        let mut survival = 0.0;
        let mut integral = 0.0;
        for (l, c) in &terms {
            survival += c * (l * horizon).exp();
            let g = l - rate;
            integral += c * if g.abs() < 1e-12 { horizon } else { (g * horizon).exp_m1() / g };
        }
        let joint = 1.0 - (-rate * horizon).exp() * survival - rate * integral;
        let exited = 1.0 - survival;
        if !(exited > 0.0) {
            return invalid("no exit mass before the horizon");
        }
        Ok(joint / exited)
    }
}

/// Checks `p_D(t, x, y) <= p(t, x, y)` at every `(t, x, y)`, with `1e-9`
/// slack for truncation.
pub fn domination_check(spectrum: &DirichletSpectrum, points: &[(f64, ChartPoint, ChartPoint)]) -> Result<BoundReport> {
    if points.is_empty() {
        return invalid("no points to check");
    }
    let model = spectrum.domain().model();
    let mut violations = Vec::new();
    let mut max_ratio = 0.0f64;
    for (t, x, y) in points {
        let lhs = spectrum.kernel(*t, x, y)?;
        let rhs = heat_kernel(model, *t, model.geodesic_distance(x, y)?)?;
        if rhs > 0.0 {
            max_ratio = max_ratio.max(lhs / rhs);
        }
        if lhs > rhs + 1e-9 {
            let mut at = x.coords().to_vec();
            at.extend_from_slice(y.coords());
            violations.push(BoundViolation { t: *t, at, lhs, rhs });
        }
    }
    Ok(BoundReport {
        name: "domination".into(),
        checked: points.len(),
        constant: 1.0,
        max_ratio,
        pass: violations.is_empty(),
        violations,
    })
}

/// Small-time exit estimates at distance `δ` from the boundary.
#[derive(Debug, Clone, PartialEq)]
pub struct SmallTimeReport {
    pub delta: f64,
    pub times: Vec<f64>,
    /// `P_x(τ < t)` from the survival series.
    pub exit_probability: Vec<f64>,
    /// Regression of `ln P` on `1/t`.
    pub exit_fit: LinearFit,
    pub beta_prime: f64,
    pub gamma: f64,
    /// `max_y |p(t, x, y) - p_D(t, x, y)|` over a grid of `y` in the closure.
    pub kernel_gap: Vec<f64>,
    pub gap_fit: LinearFit,
    pub beta: f64,
    pub alpha: f64,
    /// Largest spread of `P(τ < t)` over points at the same distance `δ`.
    pub uniformity_spread: f64,
    pub pass: bool,
}

/// Points at distance `δ` from the boundary of a ball, related by symmetry.
fn symmetric_points(spectrum: &DirichletSpectrum, delta: f64) -> Result<Vec<ChartPoint>> {
    let domain = spectrum.domain();
    let model = domain.model();
    let (center, radius) = domain.ball().expect("spectra live on balls");
    let rho = radius - delta;
    if rho < 0.0 {
        return invalid(format!("δ = {delta} exceeds the ball radius {radius}"));
    }
    if rho == 0.0 {
        return Ok(vec![center]);
    }
    match model.kind() {
        ModelKind::Euclidean(1) => Ok(vec![
            ChartPoint::x1(center.coords()[0] - rho),
            ChartPoint::x1(center.coords()[0] + rho),
        ]),
        _ => (0..8)
            .map(|k| {
                let a = k as f64 * PI / 4.0;
                model.exp_map(&center, &[a.cos(), a.sin()], rho)
            })
            .collect(),
    }
}

fn free_kernel_between(model: &ManifoldModel, t: f64, x: &ChartPoint, y: &ChartPoint) -> Result<f64> {
    heat_kernel(model, t, model.geodesic_distance(x, y)?)
}

/// `P_x(τ < t) <= γ e^{-δ² β'/t}` and `|p - p_D| <= α e^{-δ² β/t}` on the
/// given small times, with `β', γ, β, α` fitted, plus exact uniformity over
/// symmetric points.
pub fn small_time_exit_check(
    spectrum: &DirichletSpectrum,
    delta: f64,
    times: &[f64],
    d_const: f64,
) -> Result<SmallTimeReport> {
    let domain = spectrum.domain();
    let model = domain.model();
    if times.len() < 3 {
        return invalid("need at least three times");
    }
    if !(delta > 0.0) {
        return invalid("δ must be positive");
    }
    let h_vol = model.volume_growth_rate();
    let t_max = if h_vol > 0.0 { (delta / (d_const * h_vol)).min(1.0) } else { 1.0 };
    if let Some(t) = times.iter().find(|&&t| !(t > 0.0 && t < t_max)) {
        return invalid(format!("t = {t} outside the small-time regime (0, {t_max})"));
    }
    let positions = symmetric_points(spectrum, delta)?;
    let x = positions[0];
    let (center, radius) = domain.ball().expect("ball");
    // y grid across a diameter through x, endpoints on the boundary
    let direction: Vec<f64> = if model.dim() == 1 {
        vec![1.0]
    } else {
        let d: Vec<f64> = x.coords().iter().zip(center.coords()).map(|(a, b)| a - b).collect();
        let len = d.iter().map(|v| v * v).sum::<f64>().sqrt();
        if len == 0.0 {
            let mut e = vec![0.0; model.dim()];
            e[0] = 1.0;
            e
        } else {
            d.iter().map(|v| v / len).collect()
        }
    };
    let ys: Vec<ChartPoint> = (0..=40)
        .map(|i| {
            let s = -radius + 2.0 * radius * i as f64 / 40.0;
            if model.dim() == 1 {
                Ok(ChartPoint::x1(center.coords()[0] + s))
            } else if s == 0.0 {
                Ok(center)
            } else {
                let dir: Vec<f64> = direction.iter().map(|v| v * s.signum()).collect();
                model.exp_map(&center, &dir, s.abs())
            }
        })
        .collect::<Result<_>>()?;
    let needs_center = spectrum.kind == SpectrumKind::HyperbolicBall;
    let mut exit_probability = Vec::with_capacity(times.len());
    let mut kernel_gap = Vec::with_capacity(times.len());
    let mut spread = 0.0f64;
    for &t in times {
        let p: Vec<f64> = positions
            .iter()
            .map(|q| spectrum.survival(t, q).map(|s| 1.0 - s.raw))
            .collect::<Result<_>>()?;
        let lo = p.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = p.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        spread = spread.max(hi - lo);
        exit_probability.push(p[0]);
        let mut gap = 0.0f64;
        if !needs_center || x == center {
            for y in &ys {
                let g = free_kernel_between(model, t, &x, y)? - spectrum.kernel(t, &x, y)?;
                gap = gap.max(g.abs());
            }
        }
        kernel_gap.push(gap);
    }
    let inv_t: Vec<f64> = times.iter().map(|t| 1.0 / t).collect();
    let fit_of = |vals: &[f64]| -> Option<LinearFit> {
        if vals.iter().any(|v| !(*v > 0.0)) {
            return None;
        }
        let ln: Vec<f64> = vals.iter().map(|v| v.ln()).collect();
        linear_fit(&inv_t, &ln)
    };
    let nan_fit = LinearFit {
        slope: f64::NAN,
        intercept: f64::NAN,
        r_squared: f64::NAN,
    };
    let exit_fit = fit_of(&exit_probability).unwrap_or(nan_fit);
    let gap_fit = fit_of(&kernel_gap).unwrap_or(nan_fit);
    let d2 = delta * delta;
    let beta_prime = -exit_fit.slope / d2;
    let beta = -gap_fit.slope / d2;
    let prefactor = |vals: &[f64], rate: f64| {
        vals.iter()
            .zip(times)
            .map(|(v, t)| v * (d2 * rate / t).exp())
            .fold(0.0, f64::max)
    };
    let gamma = prefactor(&exit_probability, beta_prime);
    let alpha = prefactor(&kernel_gap, beta);
    // The largest gap sits at a boundary y, where it equals the free kernel,
    // so ln(gap) carries a ln(t) term of weight d/2 and is not exactly linear
    // in 1/t; a positive rate with decay towards t = 0 is what the bound needs.
    let decays = times
        .iter()
        .zip(&kernel_gap)
        .all(|(t, g)| times.iter().zip(&kernel_gap).all(|(u, h)| !(t < u) || g < h));
    let gap_ok = (needs_center && x != center) || (beta > 0.0 && decays);
    let pass = beta_prime > 0.0 && exit_fit.r_squared > 0.999 && gamma.is_finite() && gap_ok && spread <= 1e-12;
    Ok(SmallTimeReport {
        delta,
        times: times.to_vec(),
        exit_probability,
        exit_fit,
        beta_prime,
        gamma,
        kernel_gap,
        gap_fit,
        beta,
        alpha,
        uniformity_spread: spread,
        pass,
    })
}
