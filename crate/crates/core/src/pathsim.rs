//! Sample paths of the diffusion generated by Δ.
//!
//! In a conformal chart `g = e^{2s} I` the Itô SDE is
//! `dX^k = b^k dt + √2 e^{-s} dW^k` with `b^k = (n-2) e^{-2s} ∂_k s`; the
//! `√2` comes from the generator being Δ rather than Δ/2. The geodesic walk
//! instead moves a fixed distance `√(2n dt)` along a uniform direction.

use std::fmt;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{invalid, Error, Result};
use crate::geometry::{ChartPoint, ManifoldModel, ModelKind, MAX_DIM};
use crate::rng::{map_chunks, path_rng, PathRng};
use crate::stats::RunningStats;

/// Largest step for the hyperbolic charts: a 6σ increment then stays inside
/// the chart (`6 √(2 dt) < 1`).
pub const HYPERBOLIC_DT_CAP: f64 = 1.0 / 72.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Scheme {
    EulerMaruyama,
    GeodesicWalk,
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scheme::EulerMaruyama => "euler_maruyama",
            Scheme::GeodesicWalk => "geodesic_walk",
        })
    }
}

impl std::str::FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "euler_maruyama" => Ok(Scheme::EulerMaruyama),
            "geodesic_walk" => Ok(Scheme::GeodesicWalk),
            other => invalid(format!("unknown scheme '{other}'")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimConfig {
    pub dt: f64,
    pub scheme: Scheme,
    pub master_seed: u64,
    pub max_time: f64,
    pub refine_iters: u32,
}

impl SimConfig {
    pub fn new(dt: f64, master_seed: u64) -> Self {
        Self {
            dt,
            scheme: Scheme::EulerMaruyama,
            master_seed,
            max_time: 40.0,
            refine_iters: 30,
        }
    }

    pub fn with_scheme(mut self, scheme: Scheme) -> Self {
        self.scheme = scheme;
        self
    }

    pub fn with_max_time(mut self, max_time: f64) -> Self {
        self.max_time = max_time;
        self
    }

    pub fn with_seed(mut self, master_seed: u64) -> Self {
        self.master_seed = master_seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return invalid(format!("dt must be positive, got {}", self.dt));
        }
        if !(self.max_time >= self.dt) {
            return invalid(format!("max_time {} must be at least dt {}", self.max_time, self.dt));
        }
        Ok(())
    }

    /// Stable text form used for provenance hashes.
    pub fn canonical(&self) -> String {
        format!(
            "dt={:e};scheme={};seed={};max_time={:e};refine_iters={}",
            self.dt, self.scheme, self.master_seed, self.max_time, self.refine_iters
        )
    }
}

/// FNV-1a, 64 bit.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    bytes.iter().fold(0xcbf2_9ce4_8422_2325u64, |h, &b| {
        (h ^ u64::from(b)).wrapping_mul(0x0000_0100_0000_01b3)
    })
}

/// Precomputed stepping rule for one model, scheme and step size.
#[derive(Debug, Clone, Copy)]
pub struct Stepper {
    model: ManifoldModel,
    scheme: Scheme,
    dt: f64,
    sqrt_2dt: f64,
}

impl Stepper {
    pub fn new(model: &ManifoldModel, scheme: Scheme, dt: f64) -> Result<Self> {
        if !(dt > 0.0) {
            return invalid("dt must be positive");
        }
        if model.kind() == ModelKind::Hyperbolic3 {
            return Err(Error::Unsupported("hyperbolic3 is kernels-only; no path simulation".into()));
        }
        let dt = if model.is_hyperbolic() {
            dt.min(HYPERBOLIC_DT_CAP)
        } else {
            dt
        };
        Ok(Self {
            model: *model,
            scheme,
            dt,
            sqrt_2dt: (2.0 * dt).sqrt(),
        })
    }

    /// Effective step (after the chart cap).
    #[inline]
    pub fn dt(&self) -> f64 {
        self.dt
    }

    #[inline]
    pub fn model(&self) -> &ManifoldModel {
        &self.model
    }

    #[inline]
    pub fn scheme(&self) -> Scheme {
        self.scheme
    }

    #[inline]
    pub fn draw_noise(&self, rng: &mut PathRng) -> [f64; MAX_DIM] {
        let mut xi = [0.0; MAX_DIM];
        for v in xi.iter_mut().take(self.model.dim()) {
            *v = rng.sample(StandardNormal);
        }
        xi
    }

    /// One step of size `self.dt()` driven by `noise`; `None` on chart escape.
    #[inline]
    pub fn apply(&self, x: &ChartPoint, noise: &[f64; MAX_DIM]) -> Option<ChartPoint> {
        self.apply_scaled(x, noise, self.sqrt_2dt)
    }

    /// As [`Stepper::apply`] for a step of size `scale^2 / 2`.
    #[inline]
    pub(crate) fn apply_scaled(&self, x: &ChartPoint, noise: &[f64; MAX_DIM], scale: f64) -> Option<ChartPoint> {
        self.propose(x, noise, scale).filter(|y| self.model.contains(y))
    }

    /// Step without the chart-validity check. Callers that stop at a domain
    /// boundary inside the chart detect escapes as exits. `None` only if the
    /// exponential map rejects `x`.
    #[inline]
    pub(crate) fn propose(&self, x: &ChartPoint, noise: &[f64; MAX_DIM], scale: f64) -> Option<ChartPoint> {
        let mut out = *x;
        match self.scheme {
            Scheme::EulerMaruyama => {
                let c = out.coords_mut();
                match self.model.kind() {
                    ModelKind::Euclidean(_) => {
                        for (ci, xi) in c.iter_mut().zip(noise) {
                            *ci += scale * xi;
                        }
                    }
                    ModelKind::HyperbolicDisk2 => {
                        let f = 0.5 * (1.0 - c[0] * c[0] - c[1] * c[1]) * scale;
                        c[0] += f * noise[0];
                        c[1] += f * noise[1];
                    }
                    ModelKind::HyperbolicHalfPlane2 => {
                        let f = c[1] * scale;
                        c[0] += f * noise[0];
                        c[1] += f * noise[1];
                    }
                    ModelKind::Hyperbolic3 => return None,
                }
            }
            Scheme::GeodesicWalk => {
                let n = self.model.dim();
                // √(2n dt) = √n · scale
                let dist = (n as f64).sqrt() * scale;
                let len = noise[..n].iter().map(|v| v * v).sum::<f64>().sqrt();
                if len == 0.0 {
                    return Some(out);
                }
                match self.model.kind() {
                    ModelKind::Euclidean(_) => {
                        for (ci, xi) in out.coords_mut().iter_mut().zip(noise) {
                            *ci += dist * xi / len;
                        }
                    }
                    _ => {
                        out = self.model.exp_map(x, &noise[..n], dist).ok()?;
                    }
                }
            }
        }
        Some(out)
    }
}

/// One step of the process from `x` with explicit standard-normal `noise`.
pub fn step(model: &ManifoldModel, scheme: Scheme, x: &ChartPoint, dt: f64, noise: &[f64]) -> Result<ChartPoint> {
    model.check(x)?;
    if noise.len() != model.dim() {
        return invalid("noise length must equal the model dimension");
    }
    let stepper = Stepper::new(model, scheme, dt)?;
    let mut xi = [0.0; MAX_DIM];
    xi[..noise.len()].copy_from_slice(noise);
    stepper.apply(x, &xi).ok_or_else(|| Error::OutsideChart {
        model: model.name(),
        coords: x.coords().to_vec(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Terminal {
    Exited,
    Horizon,
    ChartEscape,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub samples: Vec<(f64, ChartPoint)>,
    pub terminal: Terminal,
}

impl Trajectory {
    pub fn last(&self) -> &(f64, ChartPoint) {
        self.samples.last().expect("trajectories hold at least the start")
    }
}

/// Runs one path from `x0` until `stop(t, x)` fires or the horizon is hit.
pub fn simulate<S>(
    model: &ManifoldModel,
    x0: &ChartPoint,
    mut stop: S,
    config: &SimConfig,
    path_index: u64,
) -> Result<Trajectory>
where
    S: FnMut(f64, &ChartPoint) -> bool,
{
    config.validate()?;
    model.check(x0)?;
    let stepper = Stepper::new(model, config.scheme, config.dt)?;
    let mut rng = path_rng(config.master_seed, path_index);
    let mut samples = vec![(0.0, *x0)];
    if stop(0.0, x0) {
        return Ok(Trajectory {
            samples,
            terminal: Terminal::Exited,
        });
    }
    let mut x = *x0;
    let mut k = 0u64;
    loop {
        k += 1;
        let t = k as f64 * stepper.dt();
        let xi = stepper.draw_noise(&mut rng);
        match stepper.apply(&x, &xi) {
            Some(next) => x = next,
            None => {
                return Ok(Trajectory {
                    samples,
                    terminal: Terminal::ChartEscape,
                })
            }
        }
        samples.push((t, x));
        if stop(t, &x) {
            return Ok(Trajectory {
                samples,
                terminal: Terminal::Exited,
            });
        }
        if t >= config.max_time {
            return Ok(Trajectory {
                samples,
                terminal: Terminal::Horizon,
            });
        }
    }
}

/// Position at time `t` of path `path_index` started at `x0`, using
/// `ceil(t/dt)` equal sub-steps. `None` on chart escape.
pub fn endpoint(stepper: &Stepper, x0: &ChartPoint, t: f64, rng: &mut PathRng) -> Option<ChartPoint> {
    let k = (t / stepper.dt()).ceil().max(1.0) as u64;
    let scale = (2.0 * t / k as f64).sqrt();
    let mut x = *x0;
    for _ in 0..k {
        let xi = stepper.draw_noise(rng);
        x = stepper.apply_scaled(&x, &xi, scale)?;
    }
    Some(x)
}

/// Smooth test functions with closed-form Laplacians.
///
/// Each is multiplied by a C^∞ cutoff in the geodesic distance from the
/// chart's base point (1 up to `PLATEAU`, 0 beyond `SUPPORT`), so it is
/// compactly supported; [`TestFunction::laplacian`] is exact on the plateau.
#[derive(Debug, Clone, PartialEq)]
pub enum TestFunction {
    /// `|x|^2` in chart coordinates.
    ChartSquaredNorm,
    /// `c + Σ a_i x_i` in chart coordinates.
    Affine { coeffs: Vec<f64>, constant: f64 },
    /// `d(o, x)^2` for the chart base point `o`.
    SquaredDistance,
}

const PLATEAU: f64 = 5.0;
const SUPPORT: f64 = 10.0;

fn smooth_step(u: f64) -> f64 {
    // 1 at u <= 0, 0 at u >= 1
    let psi = |v: f64| if v > 0.0 { (-1.0 / v).exp() } else { 0.0 };
    let a = psi(1.0 - u);
    let b = psi(u);
    if a + b == 0.0 {
        0.0
    } else {
        a / (a + b)
    }
}

/// Chart origin for flat space and the disk, `i = (0, 1)` for the half-plane.
pub fn base_point(model: &ManifoldModel) -> ChartPoint {
    match model.kind() {
        ModelKind::HyperbolicHalfPlane2 => ChartPoint::x2(0.0, 1.0),
        _ => ChartPoint::origin(model.dim()),
    }
}

impl TestFunction {
    pub fn name(&self) -> &'static str {
        match self {
            TestFunction::ChartSquaredNorm => "chart_squared_norm",
            TestFunction::Affine { .. } => "affine",
            TestFunction::SquaredDistance => "squared_distance",
        }
    }

    fn raw(&self, model: &ManifoldModel, x: &ChartPoint) -> f64 {
        match self {
            TestFunction::ChartSquaredNorm => x.norm_sq(),
            TestFunction::Affine { coeffs, constant } => {
                constant + coeffs.iter().zip(x.coords()).map(|(a, c)| a * c).sum::<f64>()
            }
            TestFunction::SquaredDistance => model.distance_unchecked(&base_point(model), x).powi(2),
        }
    }

    pub fn value(&self, model: &ManifoldModel, x: &ChartPoint) -> f64 {
        let rho = model.distance_unchecked(&base_point(model), x);
        let cut = smooth_step((rho - PLATEAU) / (SUPPORT - PLATEAU));
        if cut == 0.0 {
            0.0
        } else {
            cut * self.raw(model, x)
        }
    }

    /// Exact Δ of the function; only defined on the cutoff plateau.
    pub fn laplacian(&self, model: &ManifoldModel, x: &ChartPoint) -> Result<f64> {
        model.check(x)?;
        let o = base_point(model);
        let rho = model.distance_unchecked(&o, x);
        if rho > PLATEAU {
            return invalid(format!("point at distance {rho} lies outside the cutoff plateau"));
        }
        let n = model.dim() as f64;
        if let TestFunction::SquaredDistance = self {
            // Δ r² = 2 + 2 r m(r), m the mean curvature of the distance sphere
            let rm = if rho < 1e-8 {
                n - 1.0
            } else if model.is_hyperbolic() {
                (n - 1.0) * rho / rho.tanh()
            } else {
                n - 1.0
            };
            return Ok(2.0 + 2.0 * rm);
        }
        // Δf = e^{-2s} (Δ₀ f + (n-2) ∇s·∇₀f)
        let c = model.conformal(x);
        let (flat_lap, grad): (f64, Vec<f64>) = match self {
            TestFunction::ChartSquaredNorm => (2.0 * n, x.coords().iter().map(|v| 2.0 * v).collect()),
            TestFunction::Affine { coeffs, .. } => (0.0, coeffs.clone()),
            TestFunction::SquaredDistance => unreachable!(),
        };
        let cross: f64 = grad.iter().zip(&c.grad).map(|(a, b)| a * b).sum();
        Ok((-2.0 * c.log_factor).exp() * (flat_lap + (n - 2.0) * cross))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorReport {
    pub x: ChartPoint,
    pub function: &'static str,
    /// Monte Carlo estimate of `(E_x[φ(B_t)] - φ(x)) / t`.
    pub estimate: f64,
    pub analytic: f64,
    pub std_error: f64,
    pub t: f64,
    pub n_paths: u64,
}

impl GeneratorReport {
    pub fn z_score(&self) -> f64 {
        (self.estimate - self.analytic) / self.std_error
    }
}

/// Estimates the generator `(E_x[φ(B_t)] - φ(x)) / t` by simulation.
pub fn calibrate_generator(
    model: &ManifoldModel,
    x: &ChartPoint,
    phi: &TestFunction,
    t: f64,
    n_paths: u64,
    config: &SimConfig,
) -> Result<GeneratorReport> {
    config.validate()?;
    if !(t > 0.0) {
        return invalid("t must be positive");
    }
    if n_paths < 2 {
        return invalid("need at least two paths");
    }
    let analytic = phi.laplacian(model, x)?;
    let stepper = Stepper::new(model, config.scheme, config.dt.min(t))?;
    let phi0 = phi.value(model, x);
    let chunks = map_chunks(0..n_paths, |range| {
        let mut acc = RunningStats::default();
        let mut escaped = 0u64;
        for i in range {
            let mut rng = path_rng(config.master_seed, i);
            match endpoint(&stepper, x, t, &mut rng) {
                Some(y) => acc.push((phi.value(model, &y) - phi0) / t),
                None => escaped += 1,
            }
        }
        (acc, escaped)
    });
    let mut acc = RunningStats::default();
    let mut escaped = 0;
    for (c, e) in &chunks {
        acc.merge(c);
        escaped += e;
    }
    if escaped > 0 {
        return Err(Error::Unsupported(format!("{escaped} paths escaped the chart")));
    }
    Ok(GeneratorReport {
        x: *x,
        function: phi.name(),
        estimate: acc.mean(),
        analytic,
        std_error: acc.std_error(),
        t,
        n_paths,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_noise_leaves_flat_point_fixed() {
        let m = ManifoldModel::euclidean(3).unwrap();
        let x = ChartPoint::x3(0.1, 2.0, -3.0);
        let y = step(&m, Scheme::EulerMaruyama, &x, 1e-3, &[0.0, 0.0, 0.0]).unwrap();
        assert_eq!(x, y);
    }

    #[test]
    fn hyperbolic3_cannot_be_simulated() {
        let m = ManifoldModel::hyperbolic3();
        assert!(matches!(
            step(&m, Scheme::EulerMaruyama, &ChartPoint::x3(0.0, 0.0, 0.0), 1e-3, &[0.0; 3]),
            Err(Error::Unsupported(_))
        ));
    }

    #[test]
    fn stop_at_start_gives_single_sample() {
        let m = ManifoldModel::euclidean(2).unwrap();
        let tr = simulate(&m, &ChartPoint::x2(0.0, 0.0), |_, _| true, &SimConfig::new(1e-3, 1), 0).unwrap();
        assert_eq!(tr.samples.len(), 1);
        assert_eq!(tr.terminal, Terminal::Exited);
    }

    #[test]
    fn horizon_is_flagged() {
        let m = ManifoldModel::euclidean(1).unwrap();
        let cfg = SimConfig::new(1e-2, 3).with_max_time(0.5);
        let tr = simulate(&m, &ChartPoint::x1(0.0), |_, _| false, &cfg, 0).unwrap();
        assert_eq!(tr.terminal, Terminal::Horizon);
        assert!((tr.last().0 - 0.5).abs() < 1e-12);
        for w in tr.samples.windows(2) {
            assert!(w[1].0 > w[0].0);
        }
    }

    #[test]
    fn config_validation() {
        assert!(SimConfig::new(0.0, 1).validate().is_err());
        assert!(SimConfig::new(1e-3, 1).with_max_time(1e-4).validate().is_err());
        assert!(SimConfig::new(1e-3, 1).validate().is_ok());
    }

    #[test]
    fn test_function_laplacians() {
        let e = ManifoldModel::euclidean(2).unwrap();
        let d = ManifoldModel::hyperbolic_disk();
        let o = ChartPoint::x2(0.0, 0.0);
        assert_eq!(TestFunction::ChartSquaredNorm.laplacian(&e, &o).unwrap(), 4.0);
        assert_eq!(TestFunction::SquaredDistance.laplacian(&d, &o).unwrap(), 4.0);
        let aff = TestFunction::Affine {
            coeffs: vec![1.0, -2.0],
            constant: 3.0,
        };
        assert_eq!(aff.laplacian(&e, &ChartPoint::x2(0.3, 0.4)).unwrap(), 0.0);
        // conformal 2D: Δ|z|² = ((1-|z|²)²/4)·4
        let z = ChartPoint::x2(0.3, 0.4);
        let v = TestFunction::ChartSquaredNorm.laplacian(&d, &z).unwrap();
        assert!((v - 0.75f64.powi(2)).abs() < 1e-14);
    }

    #[test]
    fn cutoff_is_smooth_and_compact() {
        let e = ManifoldModel::euclidean(1).unwrap();
        let f = TestFunction::ChartSquaredNorm;
        assert_eq!(f.value(&e, &ChartPoint::x1(4.0)), 16.0);
        assert_eq!(f.value(&e, &ChartPoint::x1(10.5)), 0.0);
        let mid = f.value(&e, &ChartPoint::x1(7.5));
        assert!(mid > 0.0 && mid < 56.25);
        assert!(f.laplacian(&e, &ChartPoint::x1(6.0)).is_err());
    }
}
