//! Exit times from precompact domains and the Feynman–Kac estimator
//! `h(x) = E_x[e^{-λτ} φ(B_τ)]`.
//!
//! Paths are stepped until the chart point leaves the domain; the crossing is
//! then localised by bisection on the last chart segment and projected onto
//! the boundary. Missed excursions between steps still bias `τ` upwards by
//! `O(√dt)`; [`BiasControl::Extrapolate`] removes the leading term by running
//! a coarse path at `4 dt` on the same Brownian increments and combining the
//! two weights as `2 w_fine - w_coarse`.

use std::f64::consts::PI;
use std::fmt;

use log::warn;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::dirichlet;
use crate::error::{invalid, Error, Result};
use crate::geometry::{stencil_weights, ChartGrid, ChartPoint, ManifoldModel, ModelKind, MAX_DIM};
use crate::oracle::{self, FourierMode};
use crate::pathsim::{fnv1a64, Scheme, SimConfig, Stepper};
use crate::rng::{derive_seed, map_chunks, path_rng, PathRng};
use crate::stats::{ComplexStats, RunningStats};

/// Starts with `signed_distance >= -INTERIOR_MARGIN` are rejected.
pub const INTERIOR_MARGIN: f64 = 1e-12;

/// Coarse-to-fine step ratio of the extrapolated estimator.
const COARSE_RATIO: u64 = 4;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DomainShape {
    GeodesicBall { center: ChartPoint, radius: f64 },
    ChartDisk { center: ChartPoint, radius: f64 },
    ChartAnnulus { center: ChartPoint, inner: f64, outer: f64 },
}

/// A ball, disk or annulus. In every supported chart a geodesic ball is a
/// round chart ball, so all three shapes reduce to chart radii about a chart
/// center.
#[derive(Debug, Clone, PartialEq)]
pub struct Domain {
    model: ManifoldModel,
    shape: DomainShape,
    chart_center: ChartPoint,
    outer: f64,
    inner: f64,
}

impl Domain {
    pub fn geodesic_ball(model: &ManifoldModel, center: &ChartPoint, radius: f64) -> Result<Self> {
        model.check(center)?;
        if !(radius > 0.0) || !radius.is_finite() {
            return invalid(format!("ball radius must be positive, got {radius}"));
        }
        let (chart_center, outer) = match model.kind() {
            ModelKind::Euclidean(_) => (*center, radius),
            ModelKind::HyperbolicDisk2 | ModelKind::Hyperbolic3 => {
                let rho = (0.5 * radius).tanh();
                let c2 = center.norm_sq();
                let denom = 1.0 - rho * rho * c2;
                let mut cc = *center;
                for v in cc.coords_mut() {
                    *v *= (1.0 - rho * rho) / denom;
                }
                (cc, rho * (1.0 - c2) / denom)
            }
            ModelKind::HyperbolicHalfPlane2 => {
                let (x0, y0) = (center.coords()[0], center.coords()[1]);
                (ChartPoint::x2(x0, y0 * radius.cosh()), y0 * radius.sinh())
            }
        };
        let d = Self {
            model: *model,
            shape: DomainShape::GeodesicBall {
                center: *center,
                radius,
            },
            chart_center,
            outer,
            inner: 0.0,
        };
        d.check_in_chart()?;
        Ok(d)
    }

    pub fn chart_disk(model: &ManifoldModel, center: &ChartPoint, radius: f64) -> Result<Self> {
        model.check(center)?;
        if !(radius > 0.0) || !radius.is_finite() {
            return invalid(format!("disk radius must be positive, got {radius}"));
        }
        let d = Self {
            model: *model,
            shape: DomainShape::ChartDisk {
                center: *center,
                radius,
            },
            chart_center: *center,
            outer: radius,
            inner: 0.0,
        };
        d.check_in_chart()?;
        Ok(d)
    }

    pub fn chart_annulus(model: &ManifoldModel, center: &ChartPoint, inner: f64, outer: f64) -> Result<Self> {
        model.check(center)?;
        if !(inner > 0.0 && outer > inner && outer.is_finite()) {
            return invalid(format!("annulus needs 0 < inner < outer, got {inner}, {outer}"));
        }
        if model.dim() < 2 {
            return invalid("annulus needs dimension at least 2");
        }
        let d = Self {
            model: *model,
            shape: DomainShape::ChartAnnulus {
                center: *center,
                inner,
                outer,
            },
            chart_center: *center,
            outer,
            inner,
        };
        d.check_in_chart()?;
        Ok(d)
    }

    /// The interval `(-a, a)` in the line.
    pub fn interval(half_width: f64) -> Result<Self> {
        Self::chart_disk(&ManifoldModel::euclidean(1)?, &ChartPoint::x1(0.0), half_width)
    }

    fn check_in_chart(&self) -> Result<()> {
        let c = self.chart_center.coords();
        let ok = match self.model.kind() {
            ModelKind::Euclidean(_) => true,
            ModelKind::HyperbolicDisk2 | ModelKind::Hyperbolic3 => self.chart_center.norm_sq().sqrt() + self.outer < 1.0,
            ModelKind::HyperbolicHalfPlane2 => c[1] - self.outer > 0.0,
        };
        if ok {
            Ok(())
        } else {
            invalid(format!("closure of {} is not contained in the chart", self.describe()))
        }
    }

    pub fn model(&self) -> &ManifoldModel {
        &self.model
    }

    pub fn shape(&self) -> DomainShape {
        self.shape
    }

    pub fn chart_center(&self) -> ChartPoint {
        self.chart_center
    }

    pub fn chart_radius(&self) -> f64 {
        self.outer
    }

    /// Zero unless the domain is an annulus.
    pub fn inner_radius(&self) -> f64 {
        self.inner
    }

    /// Center and geodesic radius when the domain is a geodesic ball.
    pub fn ball(&self) -> Option<(ChartPoint, f64)> {
        match (self.shape, self.model.kind()) {
            (DomainShape::GeodesicBall { center, radius }, _) => Some((center, radius)),
            (DomainShape::ChartDisk { center, radius }, ModelKind::Euclidean(_)) => Some((center, radius)),
            _ => None,
        }
    }

    /// Geodesic distance from the ball center; `None` for non-balls.
    pub fn radial_coordinate(&self, x: &ChartPoint) -> Option<f64> {
        self.ball().map(|(c, _)| self.model.distance_unchecked(&c, x))
    }

    pub fn describe(&self) -> String {
        let c = |p: &ChartPoint| {
            p.coords()
                .iter()
                .map(|v| format!("{v:e}"))
                .collect::<Vec<_>>()
                .join(" ")
        };
        match self.shape {
            DomainShape::GeodesicBall { center, radius } => {
                format!("{}:geodesic_ball({};{radius:e})", self.model.name(), c(&center))
            }
            DomainShape::ChartDisk { center, radius } => {
                format!("{}:chart_disk({};{radius:e})", self.model.name(), c(&center))
            }
            DomainShape::ChartAnnulus { center, inner, outer } => {
                format!("{}:chart_annulus({};{inner:e};{outer:e})", self.model.name(), c(&center))
            }
        }
    }

    /// Negative inside, zero exactly on the boundary. Geodesic for balls,
    /// chart-Euclidean for disks and annuli.
    pub fn signed_distance(&self, x: &ChartPoint) -> Result<f64> {
        self.model.check(x)?;
        Ok(match self.shape {
            DomainShape::GeodesicBall { center, radius } => self.model.distance_unchecked(&center, x) - radius,
            DomainShape::ChartDisk { .. } => x.chart_dist_sq(&self.chart_center).sqrt() - self.outer,
            DomainShape::ChartAnnulus { .. } => {
                let r = x.chart_dist_sq(&self.chart_center).sqrt();
                (self.inner - r).max(r - self.outer)
            }
        })
    }

    pub fn is_interior(&self, x: &ChartPoint) -> Result<bool> {
        Ok(self.signed_distance(x)? < -INTERIOR_MARGIN)
    }

    pub(crate) fn require_interior(&self, x: &ChartPoint) -> Result<()> {
        if x.dim() != self.model.dim() {
            return invalid("point dimension does not match the model");
        }
        let sd = self.signed_distance(x)?;
        if sd < -INTERIOR_MARGIN {
            Ok(())
        } else {
            Err(Error::NotInterior { signed_distance: sd })
        }
    }

    #[inline]
    fn chart_inside(&self, x: &ChartPoint) -> bool {
        self.inside_raw(x.raw())
    }

    #[inline(always)]
    fn inside_raw(&self, x: &[f64; MAX_DIM]) -> bool {
        let c = self.chart_center.raw();
        let d2 = (x[0] - c[0]) * (x[0] - c[0]) + (x[1] - c[1]) * (x[1] - c[1]) + (x[2] - c[2]) * (x[2] - c[2]);
        d2 < self.outer * self.outer && d2 > self.inner * self.inner
    }

    /// Radial projection from the chart center onto the nearest boundary sphere.
    pub fn boundary_project(&self, x: &ChartPoint) -> ChartPoint {
        let r = x.chart_dist_sq(&self.chart_center).sqrt();
        let target = if self.inner > 0.0 && (r - self.inner).abs() < (r - self.outer).abs() {
            self.inner
        } else {
            self.outer
        };
        let mut out = self.chart_center;
        if r == 0.0 {
            out.coords_mut()[0] += target;
            return out;
        }
        let s = target / r;
        for (o, (xi, ci)) in out
            .coords_mut()
            .iter_mut()
            .zip(x.coords().iter().zip(self.chart_center.coords()))
        {
            *o = ci + s * (xi - ci);
        }
        out
    }

    /// Polar angle about the chart center; `0` or `π` in one dimension.
    pub fn boundary_angle(&self, x: &ChartPoint) -> f64 {
        let c = self.chart_center.coords();
        let p = x.coords();
        if p.len() == 1 {
            if p[0] >= c[0] {
                0.0
            } else {
                PI
            }
        } else {
            (p[1] - c[1]).atan2(p[0] - c[0])
        }
    }
}

/// Boundary data `φ: ∂D → ℂ` as a function of the boundary angle.
#[derive(Debug, Clone, PartialEq)]
pub enum BoundaryData {
    Constant(Complex64),
    /// `Σ c_m e^{imθ}`.
    Fourier(Vec<FourierMode>),
    /// `height · exp(1 - 1/(1 - u²))` with `u = (θ - center)/half_width`,
    /// zero for `|u| >= 1`; angles are wrapped to `(-π, π]`.
    Bump {
        center: f64,
        half_width: f64,
        height: Complex64,
    },
}

impl BoundaryData {
    pub fn constant(c: f64) -> Self {
        BoundaryData::Constant(Complex64::new(c, 0.0))
    }

    /// `cos(kθ)`.
    pub fn cos(k: i32) -> Self {
        if k == 0 {
            return Self::constant(1.0);
        }
        let half = Complex64::new(0.5, 0.0);
        BoundaryData::Fourier(vec![
            FourierMode {
                order: k,
                coefficient: half,
            },
            FourierMode {
                order: -k,
                coefficient: half,
            },
        ])
    }

    pub fn sup_bound(&self) -> f64 {
        match self {
            BoundaryData::Constant(c) => c.norm(),
            BoundaryData::Fourier(modes) => modes.iter().map(|m| m.coefficient.norm()).sum(),
            BoundaryData::Bump { height, .. } => height.norm(),
        }
    }

    pub fn is_constant(&self) -> bool {
        matches!(self, BoundaryData::Constant(_))
    }

    pub fn at_angle(&self, theta: f64) -> Complex64 {
        match self {
            BoundaryData::Constant(c) => *c,
            BoundaryData::Fourier(modes) => modes
                .iter()
                .map(|m| m.coefficient * Complex64::from_polar(1.0, m.order as f64 * theta))
                .sum(),
            BoundaryData::Bump {
                center,
                half_width,
                height,
            } => {
                let mut d = (theta - center).rem_euclid(2.0 * PI);
                if d > PI {
                    d -= 2.0 * PI;
                }
                let u = d / half_width;
                if u.abs() >= 1.0 {
                    Complex64::new(0.0, 0.0)
                } else {
                    height * (1.0 - 1.0 / (1.0 - u * u)).exp()
                }
            }
        }
    }

    /// `φ` extended off the boundary by radial projection.
    pub fn value(&self, domain: &Domain, x: &ChartPoint) -> Complex64 {
        match self {
            BoundaryData::Constant(c) => *c,
            _ => self.at_angle(domain.boundary_angle(x)),
        }
    }

    pub fn describe(&self) -> String {
        match self {
            BoundaryData::Constant(c) => format!("constant({:e},{:e})", c.re, c.im),
            BoundaryData::Fourier(modes) => {
                let terms: Vec<String> = modes
                    .iter()
                    .map(|m| format!("{}:{:e},{:e}", m.order, m.coefficient.re, m.coefficient.im))
                    .collect();
                format!("fourier({})", terms.join(";"))
            }
            BoundaryData::Bump {
                center,
                half_width,
                height,
            } => format!("bump({center:e},{half_width:e},{:e},{:e})", height.re, height.im),
        }
    }
}

/// One simulated exit event.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExitSample {
    /// Refined exit time, or `max_time` when `horizon` is set.
    pub tau: f64,
    /// Boundary point after projection; the last position if `horizon`.
    pub exit_point: ChartPoint,
    pub n_steps: u64,
    pub refined: bool,
    pub horizon: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum Walk {
    Exit { tau: f64, point: ChartPoint, steps: u64 },
    Horizon { steps: u64, last: ChartPoint },
}

/// Path stepper bound to a domain.
#[derive(Debug, Clone)]
pub(crate) struct Walker {
    domain: Domain,
    stepper: Stepper,
    dt: f64,
    scale: f64,
    max_steps: u64,
    refine_iters: u32,
}

impl Walker {
    pub(crate) fn new(domain: &Domain, config: &SimConfig) -> Result<Self> {
        config.validate()?;
        let stepper = Stepper::new(domain.model(), config.scheme, config.dt)?;
        let dt = stepper.dt();
        Ok(Self {
            domain: domain.clone(),
            stepper,
            dt,
            scale: (2.0 * dt).sqrt(),
            max_steps: (config.max_time / dt).ceil() as u64,
            refine_iters: config.refine_iters,
        })
    }

    pub(crate) fn dt(&self) -> f64 {
        self.dt
    }

    /// Crossing on the chart segment `a → b` (`a` inside, `b` outside)
    /// spanning `[t0, t0 + h]`.
    fn refine(&self, a: &ChartPoint, b: &ChartPoint, t0: f64, h: f64) -> (f64, ChartPoint) {
        let (mut lo, mut hi) = (0.0f64, 1.0f64);
        for _ in 0..self.refine_iters {
            let mid = 0.5 * (lo + hi);
            if self.domain.chart_inside(&a.lerp(b, mid)) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let s = if self.refine_iters == 0 { 1.0 } else { 0.5 * (lo + hi) };
        (t0 + s * h, self.domain.boundary_project(&a.lerp(b, s)))
    }

    /// Step rule with a specialised inner loop.
    fn kernel(&self) -> StepRule {
        match (self.stepper.scheme(), self.domain.model().kind()) {
            (Scheme::EulerMaruyama, ModelKind::Euclidean(1)) => StepRule::Flat1,
            (Scheme::EulerMaruyama, ModelKind::Euclidean(2)) => StepRule::Flat2,
            (Scheme::EulerMaruyama, ModelKind::HyperbolicDisk2) => StepRule::Disk,
            (Scheme::EulerMaruyama, ModelKind::HyperbolicHalfPlane2) => StepRule::HalfPlane,
            _ => StepRule::General,
        }
    }

    pub(crate) fn run(&self, x0: &ChartPoint, rng: &mut PathRng) -> Walk {
        dispatch!(self, k => self.run_with(k, x0, rng))
    }

    pub(crate) fn run_coupled(&self, x0: &ChartPoint, rng: &mut PathRng) -> (Walk, Walk) {
        dispatch!(self, k => self.run_coupled_with(k, x0, rng))
    }

    /// Position at time `steps · dt` from `x0`, or the exit time if it comes first.
    pub(crate) fn run_for(&self, x0: &ChartPoint, steps: u64, rng: &mut PathRng) -> std::result::Result<ChartPoint, f64> {
        dispatch!(self, k => self.run_for_with(k, x0, steps, rng))
    }

    // each specialised loop is its own function, small enough for the
    // normal sampler to be inlined into it
    #[inline(always)]
    fn draw<K: StepKernel>(k: &K, rng: &mut PathRng) -> [f64; MAX_DIM] {
        let mut xi = [0.0; MAX_DIM];
        for v in xi.iter_mut().take(k.dim()) {
            *v = rng.sample(StandardNormal);
        }
        xi
    }

    #[inline(never)]
    fn run_with<K: StepKernel>(&self, k: K, x0: &ChartPoint, rng: &mut PathRng) -> Walk {
        let dim = x0.dim();
        let mut x = *x0.raw();
        let mut steps = 0u64;
        while steps < self.max_steps {
            steps += 1;
            let xi = Self::draw(&k, rng);
            let y = k.step(&x, &xi, self.scale);
            if !self.domain.inside_raw(&y) {
                let (a, b) = (ChartPoint::from_raw(x, dim), ChartPoint::from_raw(y, dim));
                let (tau, point) = self.refine(&a, &b, (steps - 1) as f64 * self.dt, self.dt);
                return Walk::Exit { tau, point, steps };
            }
            x = y;
        }
        Walk::Horizon {
            steps: self.max_steps,
            last: ChartPoint::from_raw(x, dim),
        }
    }

    /// Fine path at `dt` and coarse path at `4 dt` driven by the same
    /// increments; each coarse increment is the sum of four fine ones.
    #[inline(never)]
    fn run_coupled_with<K: StepKernel>(&self, k: K, x0: &ChartPoint, rng: &mut PathRng) -> (Walk, Walk) {
        let coarse_dt = COARSE_RATIO as f64 * self.dt;
        let coarse_scale = (2.0 * coarse_dt).sqrt();
        let norm = 1.0 / (COARSE_RATIO as f64).sqrt();
        let dim = x0.dim();
        let mut xf = *x0.raw();
        let mut xc = *x0.raw();
        let mut fine = None;
        let mut coarse = None;
        let mut acc = [0.0; MAX_DIM];
        let mut steps = 0u64;
        while steps < self.max_steps {
            steps += 1;
            let xi = Self::draw(&k, rng);
            if fine.is_none() {
                let y = k.step(&xf, &xi, self.scale);
                if self.domain.inside_raw(&y) {
                    xf = y;
                } else {
                    let (a, b) = (ChartPoint::from_raw(xf, dim), ChartPoint::from_raw(y, dim));
                    let (tau, point) = self.refine(&a, &b, (steps - 1) as f64 * self.dt, self.dt);
                    fine = Some(Walk::Exit { tau, point, steps });
                }
            }
            if coarse.is_none() {
                for (a, v) in acc.iter_mut().zip(&xi) {
                    *a += v;
                }
                if steps.is_multiple_of(COARSE_RATIO) {
                    let mut noise = acc;
                    for v in noise.iter_mut() {
                        *v *= norm;
                    }
                    acc = [0.0; MAX_DIM];
                    let y = k.step(&xc, &noise, coarse_scale);
                    if self.domain.inside_raw(&y) {
                        xc = y;
                    } else {
                        let j = steps / COARSE_RATIO;
                        let (a, b) = (ChartPoint::from_raw(xc, dim), ChartPoint::from_raw(y, dim));
                        let (tau, point) = self.refine(&a, &b, (j - 1) as f64 * coarse_dt, coarse_dt);
                        coarse = Some(Walk::Exit { tau, point, steps: j });
                    }
                }
            } else if fine.is_some() {
                break;
            }
        }
        (
            fine.unwrap_or(Walk::Horizon {
                steps: self.max_steps,
                last: ChartPoint::from_raw(xf, dim),
            }),
            coarse.unwrap_or(Walk::Horizon {
                steps: self.max_steps / COARSE_RATIO,
                last: ChartPoint::from_raw(xc, dim),
            }),
        )
    }

    #[inline(never)]
    fn run_for_with<K: StepKernel>(
        &self,
        k: K,
        x0: &ChartPoint,
        steps: u64,
        rng: &mut PathRng,
    ) -> std::result::Result<ChartPoint, f64> {
        let dim = x0.dim();
        let mut x = *x0.raw();
        for i in 0..steps {
            let xi = Self::draw(&k, rng);
            let y = k.step(&x, &xi, self.scale);
            if !self.domain.inside_raw(&y) {
                let (a, b) = (ChartPoint::from_raw(x, dim), ChartPoint::from_raw(y, dim));
                return Err(self.refine(&a, &b, i as f64 * self.dt, self.dt).0);
            }
            x = y;
        }
        Ok(ChartPoint::from_raw(x, dim))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum StepRule {
    Flat1,
    Flat2,
    Disk,
    HalfPlane,
    General,
}

macro_rules! dispatch {
    ($w:expr, $k:ident => $body:expr) => {
        match $w.kernel() {
            StepRule::Flat1 => {
                let $k = FlatStep::<1>;
                $body
            }
            StepRule::Flat2 => {
                let $k = FlatStep::<2>;
                $body
            }
            StepRule::Disk => {
                let $k = DiskStep;
                $body
            }
            StepRule::HalfPlane => {
                let $k = HalfPlaneStep;
                $body
            }
            StepRule::General => {
                let $k = GeneralStep($w.stepper);
                $body
            }
        }
    };
}
use dispatch;

/// One proposal of the discretised process, without chart checks. Points the
/// step rule cannot produce come back with an infinite first coordinate,
/// which every domain reads as an exit.
trait StepKernel: Copy {
    fn dim(&self) -> usize;
    fn step(&self, x: &[f64; MAX_DIM], noise: &[f64; MAX_DIM], scale: f64) -> [f64; MAX_DIM];
}

#[derive(Clone, Copy)]
struct FlatStep<const D: usize>;

impl<const D: usize> StepKernel for FlatStep<D> {
    #[inline(always)]
    fn dim(&self) -> usize {
        D
    }
    #[inline(always)]
    fn step(&self, x: &[f64; MAX_DIM], noise: &[f64; MAX_DIM], scale: f64) -> [f64; MAX_DIM] {
        let mut out = *x;
        let c = &mut out;
        for i in 0..D {
            c[i] += scale * noise[i];
        }
        out
    }
}

#[derive(Clone, Copy)]
struct DiskStep;

impl StepKernel for DiskStep {
    #[inline(always)]
    fn dim(&self) -> usize {
        2
    }
    #[inline(always)]
    fn step(&self, x: &[f64; MAX_DIM], noise: &[f64; MAX_DIM], scale: f64) -> [f64; MAX_DIM] {
        let mut out = *x;
        let c = &mut out;
        let f = 0.5 * (1.0 - c[0] * c[0] - c[1] * c[1]) * scale;
        c[0] += f * noise[0];
        c[1] += f * noise[1];
        out
    }
}

#[derive(Clone, Copy)]
struct HalfPlaneStep;

impl StepKernel for HalfPlaneStep {
    #[inline(always)]
    fn dim(&self) -> usize {
        2
    }
    #[inline(always)]
    fn step(&self, x: &[f64; MAX_DIM], noise: &[f64; MAX_DIM], scale: f64) -> [f64; MAX_DIM] {
        let mut out = *x;
        let c = &mut out;
        let f = c[1] * scale;
        c[0] += f * noise[0];
        c[1] += f * noise[1];
        out
    }
}

#[derive(Clone, Copy)]
struct GeneralStep(Stepper);

impl StepKernel for GeneralStep {
    #[inline]
    fn dim(&self) -> usize {
        self.0.model().dim()
    }
    #[inline]
    fn step(&self, x: &[f64; MAX_DIM], noise: &[f64; MAX_DIM], scale: f64) -> [f64; MAX_DIM] {
        let p = ChartPoint::from_raw(*x, self.0.model().dim());
        match self.0.propose(&p, noise, scale) {
            Some(y) => *y.raw(),
            None => [f64::INFINITY, x[1], x[2]],
        }
    }
}

/// Simulates one path from `x0` until it leaves `domain`.
pub fn sample_exit(domain: &Domain, x0: &ChartPoint, config: &SimConfig, path_index: u64) -> Result<ExitSample> {
    domain.require_interior(x0)?;
    let walker = Walker::new(domain, config)?;
    let mut rng = path_rng(config.master_seed, path_index);
    Ok(match walker.run(x0, &mut rng) {
        Walk::Exit { tau, point, steps } => ExitSample {
            tau,
            exit_point: point,
            n_steps: steps,
            refined: config.refine_iters > 0,
            horizon: false,
        },
        Walk::Horizon { steps, last } => ExitSample {
            tau: steps as f64 * walker.dt(),
            exit_point: last,
            n_steps: steps,
            refined: false,
            horizon: true,
        },
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BiasControl {
    /// Plain estimator at the configured step.
    None,
    /// Coupled `dt` / `4 dt` extrapolation of the `√dt` exit bias.
    Extrapolate,
}

impl fmt::Display for BiasControl {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BiasControl::None => "none",
            BiasControl::Extrapolate => "extrapolate",
        })
    }
}

impl std::str::FromStr for BiasControl {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(BiasControl::None),
            "extrapolate" => Ok(BiasControl::Extrapolate),
            other => invalid(format!("unknown bias control '{other}'")),
        }
    }
}

/// Which path indices an estimate consumes and how.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PathBudget {
    pub first_path: u64,
    pub n_paths: u64,
    pub bias: BiasControl,
}

impl PathBudget {
    pub fn new(n_paths: u64) -> Self {
        Self {
            first_path: 0,
            n_paths,
            bias: BiasControl::None,
        }
    }

    pub fn starting_at(mut self, first_path: u64) -> Self {
        self.first_path = first_path;
        self
    }

    pub fn with_bias(mut self, bias: BiasControl) -> Self {
        self.bias = bias;
        self
    }

    fn range(&self) -> std::ops::Range<u64> {
        self.first_path..self.first_path + self.n_paths
    }
}

/// Monte Carlo estimate of a path functional with provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct FKEstimate {
    pub lambda: Complex64,
    pub x: ChartPoint,
    pub mean: Complex64,
    pub se_re: f64,
    pub se_im: f64,
    /// Paths requested.
    pub n_paths: u64,
    /// Paths that exited before the horizon (the sample behind `mean`).
    pub n_exited: u64,
    pub horizon_mass: f64,
    /// `horizon_mass · M · e^{-Re λ · T_max}`, reported, never added to `mean`.
    pub truncation_bound: f64,
    pub mean_tau: f64,
    pub dt: f64,
    pub master_seed: u64,
    pub config_hash: u64,
    pub bias: BiasControl,
}

impl FKEstimate {
    pub fn combined_se(&self) -> f64 {
        self.se_re.hypot(self.se_im)
    }
}

struct Tally {
    stats: ComplexStats,
    tau: RunningStats,
    horizon: u64,
}

impl Tally {
    fn new() -> Self {
        Self {
            stats: ComplexStats::default(),
            tau: RunningStats::default(),
            horizon: 0,
        }
    }

    fn merge(&mut self, other: &Tally) {
        self.stats.merge(&other.stats);
        self.tau.merge(&other.tau);
        self.horizon += other.horizon;
    }
}

fn tally<W>(walker: &Walker, x: &ChartPoint, seed: u64, budget: &PathBudget, weight: W) -> Tally
where
    W: Fn(f64, &ChartPoint) -> Complex64 + Sync,
{
    let chunks = map_chunks(budget.range(), |range| {
        let mut t = Tally::new();
        for i in range {
            let mut rng = path_rng(seed, i);
            match budget.bias {
                BiasControl::None => match walker.run(x, &mut rng) {
                    Walk::Exit { tau, point, .. } => {
                        t.stats.push(weight(tau, &point));
                        t.tau.push(tau);
                    }
                    Walk::Horizon { .. } => t.horizon += 1,
                },
                BiasControl::Extrapolate => match walker.run_coupled(x, &mut rng) {
                    (Walk::Exit { tau: tf, point: pf, .. }, Walk::Exit { tau: tc, point: pc, .. }) => {
                        t.stats.push(2.0 * weight(tf, &pf) - weight(tc, &pc));
                        t.tau.push(2.0 * tf - tc);
                    }
                    _ => t.horizon += 1,
                },
            }
        }
        t
    });
    let mut total = Tally::new();
    for c in &chunks {
        total.merge(c);
    }
    total
}

fn warn_below_threshold(model: &ManifoldModel, lambda: Complex64) {
    if lambda.re <= model.lambda1() {
        warn!(
            "Re λ = {} is not above λ1 = {} of {}; the estimator need not converge",
            lambda.re,
            model.lambda1(),
            model.name()
        );
    }
}

fn finish(
    tally: Tally,
    lambda: Complex64,
    x: &ChartPoint,
    sup: f64,
    config: &SimConfig,
    walker: &Walker,
    budget: &PathBudget,
) -> FKEstimate {
    let horizon_mass = tally.horizon as f64 / budget.n_paths as f64;
    FKEstimate {
        lambda,
        x: *x,
        mean: tally.stats.mean(),
        se_re: tally.stats.re.std_error(),
        se_im: tally.stats.im.std_error(),
        n_paths: budget.n_paths,
        n_exited: tally.stats.n(),
        horizon_mass,
        truncation_bound: if tally.horizon == 0 {
            0.0
        } else {
            horizon_mass * sup * (-lambda.re * config.max_time).exp()
        },
        mean_tau: tally.tau.mean(),
        dt: walker.dt(),
        master_seed: config.master_seed,
        config_hash: fnv1a64(config.canonical().as_bytes()),
        bias: budget.bias,
    }
}

/// Feynman–Kac estimate of `h(x) = E_x[e^{-λτ} φ(B_τ)]`.
pub fn estimate_h(
    domain: &Domain,
    x: &ChartPoint,
    lambda: Complex64,
    phi: &BoundaryData,
    config: &SimConfig,
    budget: PathBudget,
) -> Result<FKEstimate> {
    if budget.n_paths == 0 {
        return invalid("N must be at least 1");
    }
    domain.require_interior(x)?;
    warn_below_threshold(domain.model(), lambda);
    let walker = Walker::new(domain, config)?;
    let t = tally(&walker, x, config.master_seed, &budget, |tau, p| {
        (-lambda * tau).exp() * phi.value(domain, p)
    });
    Ok(finish(t, lambda, x, phi.sup_bound(), config, &walker, &budget))
}

/// Estimate of `E_x|e^{-λτ}| = E_x[e^{-Re λ τ}]` with deterministic references.
#[derive(Debug, Clone, PartialEq)]
pub struct AbsMomentEstimate {
    pub estimate: FKEstimate,
    /// `C_λ = u(x)` for the radial problem `Δu = Re λ · u`, `u|∂D = 1`.
    pub oracle: Option<f64>,
    /// Why `oracle` is missing.
    pub oracle_error: Option<String>,
    /// `E_x[e^{-Re λ τ} | τ < T_max]` from the Dirichlet spectrum, the exact
    /// target of the horizon-truncated Monte Carlo mean.
    pub truncated_expectation: Option<f64>,
}

pub fn estimate_abs_moment(
    domain: &Domain,
    x: &ChartPoint,
    lambda: Complex64,
    config: &SimConfig,
    budget: PathBudget,
) -> Result<AbsMomentEstimate> {
    if budget.n_paths == 0 {
        return invalid("N must be at least 1");
    }
    domain.require_interior(x)?;
    warn_below_threshold(domain.model(), lambda);
    let walker = Walker::new(domain, config)?;
    let rate = lambda.re;
    let t = tally(&walker, x, config.master_seed, &budget, |tau, _| {
        Complex64::new((-rate * tau).exp(), 0.0)
    });
    let estimate = finish(t, Complex64::new(rate, 0.0), x, 1.0, config, &walker, &budget);
    let (oracle, oracle_error) = match domain.ball() {
        Some((_, radius)) => {
            let r = domain.radial_coordinate(x).unwrap_or(0.0);
            let one = Complex64::new(1.0, 0.0);
            match oracle::solve_radial_bvp(domain.model(), radius, Complex64::new(rate, 0.0), one)
                .and_then(|u| u.value_at(r.min(radius)))
            {
                Ok(v) => (Some(v.re), None),
                Err(e) => (None, Some(e.to_string())),
            }
        }
        None => (None, Some("no radial oracle for this domain".into())),
    };
    let truncated_expectation = dirichlet::spectrum(domain, None)
        .ok()
        .and_then(|s| s.conditional_moment(x, rate, config.max_time).ok());
    Ok(AbsMomentEstimate {
        estimate,
        oracle,
        oracle_error,
        truncated_expectation,
    })
}

/// Exit times of a batch of paths, with the coarse partner times when
/// extrapolating.
#[derive(Debug, Clone, PartialEq)]
pub struct ExitTimes {
    pub fine: Vec<f64>,
    pub coarse: Option<Vec<f64>>,
    pub horizon: u64,
    pub n_paths: u64,
}

impl ExitTimes {
    /// Empirical `P(τ <= t)`, extrapolated as `2 F_fine - F_coarse` when
    /// coarse times are present. Both vectors must be sorted.
    pub fn cdf(&self, t: f64) -> f64 {
        let frac = |v: &[f64]| v.partition_point(|&s| s <= t) as f64 / self.n_paths as f64;
        match &self.coarse {
            None => frac(&self.fine),
            Some(c) => 2.0 * frac(&self.fine) - frac(c),
        }
    }

    /// Sup-norm distance to a continuous CDF, taken over both one-sided
    /// limits at every jump.
    pub fn sup_distance<F: Fn(f64) -> f64>(&self, cdf: F) -> f64 {
        let mut jumps: Vec<f64> = self.fine.clone();
        if let Some(c) = &self.coarse {
            jumps.extend_from_slice(c);
        }
        jumps.sort_by(f64::total_cmp);
        jumps.dedup();
        let mut sup = 0.0f64;
        for &t in &jumps {
            let f = cdf(t);
            let right = self.cdf(t);
            let left = self.cdf(t.next_down());
            sup = sup.max((right - f).abs()).max((left - f).abs());
        }
        sup
    }
}

/// Exit times of `budget.n_paths` paths from `x`, sorted.
pub fn sample_exit_times(domain: &Domain, x: &ChartPoint, config: &SimConfig, budget: PathBudget) -> Result<ExitTimes> {
    if budget.n_paths == 0 {
        return invalid("N must be at least 1");
    }
    domain.require_interior(x)?;
    let walker = Walker::new(domain, config)?;
    let coupled = budget.bias == BiasControl::Extrapolate;
    let chunks = map_chunks(budget.range(), |range| {
        let mut fine = Vec::with_capacity((range.end - range.start) as usize);
        let mut coarse = Vec::new();
        let mut horizon = 0u64;
        for i in range {
            let mut rng = path_rng(config.master_seed, i);
            if coupled {
                let (f, c) = walker.run_coupled(x, &mut rng);
                for (w, out) in [(f, &mut fine), (c, &mut coarse)] {
                    match w {
                        Walk::Exit { tau, .. } => out.push(tau),
                        Walk::Horizon { .. } => horizon += 1,
                    }
                }
            } else {
                match walker.run(x, &mut rng) {
                    Walk::Exit { tau, .. } => fine.push(tau),
                    Walk::Horizon { .. } => horizon += 1,
                }
            }
        }
        (fine, coarse, horizon)
    });
    let mut fine = Vec::new();
    let mut coarse = Vec::new();
    let mut horizon = 0;
    for (f, c, h) in chunks {
        fine.extend(f);
        coarse.extend(c);
        horizon += h;
    }
    fine.sort_by(f64::total_cmp);
    coarse.sort_by(f64::total_cmp);
    Ok(ExitTimes {
        fine,
        coarse: coupled.then_some(coarse),
        horizon,
        n_paths: budget.n_paths,
    })
}

/// `h` sampled on a chart grid. Nodes not strictly inside the domain hold
/// `None`.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldGrid {
    pub model: ManifoldModel,
    pub grid: ChartGrid,
    pub lambda: Complex64,
    pub values: Vec<Option<Complex64>>,
    pub se_re: Vec<f64>,
    pub se_im: Vec<f64>,
    pub dt: f64,
    pub n_paths_per_node: u64,
    pub horizon_mass: f64,
}

impl FieldGrid {
    /// Field with known values and zero uncertainty.
    pub fn exact(model: &ManifoldModel, grid: &ChartGrid, lambda: Complex64, values: Vec<Option<Complex64>>) -> Result<Self> {
        if values.len() != grid.len() {
            return invalid("value count does not match the grid");
        }
        Ok(Self {
            model: *model,
            grid: grid.clone(),
            lambda,
            se_re: vec![0.0; values.len()],
            se_im: vec![0.0; values.len()],
            values,
            dt: 0.0,
            n_paths_per_node: 0,
            horizon_mass: 0.0,
        })
    }
}

/// Runs [`estimate_h`] at every interior node of `grid`; node `j` (flat
/// index) uses paths `[j N, (j+1) N)` under the shared master seed.
pub fn field_on_grid(
    domain: &Domain,
    lambda: Complex64,
    phi: &BoundaryData,
    grid: &ChartGrid,
    config: &SimConfig,
    paths_per_node: u64,
    bias: BiasControl,
) -> Result<FieldGrid> {
    if grid.is_empty() {
        return invalid("grid has no nodes");
    }
    if grid.dim != domain.model().dim() {
        return invalid("grid dimension does not match the model");
    }
    let mut values = vec![None; grid.len()];
    let mut se_re = vec![0.0; grid.len()];
    let mut se_im = vec![0.0; grid.len()];
    let mut horizon = 0.0;
    let mut dt = config.dt;
    let mut interior = 0usize;
    for (j, value) in values.iter_mut().enumerate() {
        let x = grid.point(&grid.multi_index(j)[..grid.dim]);
        if !domain.model().contains(&x) || !domain.is_interior(&x)? {
            continue;
        }
        let budget = PathBudget::new(paths_per_node)
            .starting_at(j as u64 * paths_per_node)
            .with_bias(bias);
        let est = estimate_h(domain, &x, lambda, phi, config, budget)?;
        *value = Some(est.mean);
        se_re[j] = est.se_re;
        se_im[j] = est.se_im;
        horizon += est.horizon_mass;
        dt = est.dt;
        interior += 1;
    }
    if interior == 0 {
        return invalid("no grid node lies inside the domain");
    }
    Ok(FieldGrid {
        model: *domain.model(),
        grid: grid.clone(),
        lambda,
        values,
        se_re,
        se_im,
        dt,
        n_paths_per_node: paths_per_node,
        horizon_mass: horizon / interior as f64,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResidualReport {
    /// Flat indices of the nodes where the residual was taken.
    pub nodes: Vec<usize>,
    pub residuals: Vec<Complex64>,
    /// Propagated standard deviation of each residual.
    pub noise: Vec<f64>,
    pub max_abs: f64,
    pub rms: f64,
    pub rms_noise: f64,
    pub grid_spacing: f64,
    pub dt: f64,
    /// `3 · rms_noise + C_disc (h² + √dt)`.
    pub threshold: f64,
    pub pass: bool,
}

/// Discretisation allowance per unit of `h² + √dt`.
pub const RESIDUAL_DISCRETISATION: f64 = 1.0;

/// `r = Δ_h h − λ h` at every node whose whole stencil was estimated.
pub fn residual_check(field: &FieldGrid) -> Result<ResidualReport> {
    let grid = &field.grid;
    let mut nodes = Vec::new();
    let mut residuals = Vec::new();
    let mut noise = Vec::new();
    for j in 0..grid.len() {
        let idx = grid.multi_index(j);
        let node = &idx[..grid.dim];
        if field.values[j].is_none() || !grid.has_full_stencil(node) {
            continue;
        }
        let weights = stencil_weights(&field.model, grid, node)?;
        if weights.iter().any(|(k, _)| field.values[*k].is_none()) {
            continue;
        }
        let mut r = -field.lambda * field.values[j].expect("checked");
        let (mut var_re, mut var_im) = (0.0, 0.0);
        for &(k, w) in &weights {
            r += w * field.values[k].expect("checked");
            // the center weight also carries -λ; λ may be complex
            let wk = if k == j {
                Complex64::new(w, 0.0) - field.lambda
            } else {
                Complex64::new(w, 0.0)
            };
            let (sr, si) = (field.se_re[k], field.se_im[k]);
            var_re += (wk.re * sr).powi(2) + (wk.im * si).powi(2);
            var_im += (wk.im * sr).powi(2) + (wk.re * si).powi(2);
        }
        nodes.push(j);
        residuals.push(r);
        noise.push((var_re + var_im).sqrt());
    }
    if nodes.is_empty() {
        return invalid("no node has a fully estimated stencil");
    }
    let count = nodes.len() as f64;
    let rms = (residuals.iter().map(|r| r.norm_sqr()).sum::<f64>() / count).sqrt();
    let rms_noise = (noise.iter().map(|s| s * s).sum::<f64>() / count).sqrt();
    let max_abs = residuals.iter().map(|r| r.norm()).fold(0.0, f64::max);
    let h = grid.spacing;
    let threshold = 3.0 * rms_noise + RESIDUAL_DISCRETISATION * (h * h + field.dt.sqrt());
    Ok(ResidualReport {
        nodes,
        residuals,
        noise,
        max_abs,
        rms,
        rms_noise,
        grid_spacing: h,
        dt: field.dt,
        threshold,
        pass: rms <= threshold,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceReport {
    pub xi: ChartPoint,
    pub target: Complex64,
    pub estimates: Vec<FKEstimate>,
    /// `|h(x_k) - φ(ξ)|`.
    pub gaps: Vec<f64>,
    pub monotone: bool,
    pub final_tolerance: f64,
    pub pass: bool,
}

/// Estimates `h` at `x_k = c + s_k (ξ - c)` for the approach fractions
/// `s_k ∈ (0, 1)` and checks that `h(x_k) → φ(ξ)`.
pub fn boundary_trace_check(
    domain: &Domain,
    lambda: Complex64,
    phi: &BoundaryData,
    xi: &ChartPoint,
    approach: &[f64],
    config: &SimConfig,
    budget: PathBudget,
) -> Result<ConvergenceReport> {
    let sd = domain.signed_distance(xi)?;
    if sd.abs() > 1e-10 {
        return invalid(format!("ξ is not on the boundary (signed distance {sd:e})"));
    }
    if approach.is_empty() {
        return invalid("no approach points");
    }
    let target = phi.value(domain, xi);
    let c = domain.chart_center();
    let mut estimates = Vec::with_capacity(approach.len());
    let mut gaps = Vec::with_capacity(approach.len());
    for (k, &s) in approach.iter().enumerate() {
        if !(s > 0.0 && s < 1.0) {
            return invalid(format!("approach fraction {s} not in (0, 1)"));
        }
        let x = c.lerp(xi, s);
        let b = budget.starting_at(budget.first_path + k as u64 * budget.n_paths);
        let est = estimate_h(domain, &x, lambda, phi, config, b)?;
        gaps.push((est.mean - target).norm());
        estimates.push(est);
    }
    let monotone = gaps.windows(2).zip(estimates.windows(2)).all(|(g, e)| {
        g[1] <= g[0] + 3.0 * e[0].combined_se().hypot(e[1].combined_se())
    });
    let last = estimates.last().expect("non-empty");
    let final_tolerance = 3.0 * last.combined_se() + RESIDUAL_DISCRETISATION * last.dt.sqrt();
    let pass = monotone && *gaps.last().expect("non-empty") <= final_tolerance + approach_gap(domain, xi, approach);
    Ok(ConvergenceReport {
        xi: *xi,
        target,
        estimates,
        gaps,
        monotone,
        final_tolerance,
        pass,
    })
}

/// Chart distance from the last approach point to `ξ`; the true gap there is
/// of this order for Lipschitz `h`, so it is part of the allowance.
fn approach_gap(domain: &Domain, xi: &ChartPoint, approach: &[f64]) -> f64 {
    let s = *approach.last().expect("non-empty");
    (1.0 - s) * xi.chart_dist_sq(&domain.chart_center()).sqrt()
}

#[derive(Debug, Clone, PartialEq)]
pub struct RestartReport {
    pub t: f64,
    /// `E_x[e^{-λ(τ-t)} φ(B_τ); τ >= t]` from restarts at `B_t`.
    pub two_stage: Complex64,
    pub two_stage_se_re: f64,
    pub two_stage_se_im: f64,
    pub h: FKEstimate,
    /// `e^{λt} h(x)`.
    pub scaled_h: Complex64,
    /// Empirical `P_x(τ < t)`.
    pub early_exit: f64,
    pub gap: f64,
    /// `3 · combined SE + M e^{|λ| t} P̂(τ < t)`.
    pub tolerance: f64,
    pub pass: bool,
}

/// Compares the restarted estimator against `e^{λt} h(x)`.
///
/// Stage one runs path `i` to time `t` on a seed derived from the master
/// seed; stage two restarts from `B_t` with path `i` of the master seed. At
/// `t = 0` stage two is exactly the plain estimator.
pub fn markov_restart_check(
    domain: &Domain,
    x: &ChartPoint,
    lambda: Complex64,
    phi: &BoundaryData,
    t: f64,
    config: &SimConfig,
    n_paths: u64,
) -> Result<RestartReport> {
    if !(t >= 0.0) {
        return invalid("restart time must be nonnegative");
    }
    if n_paths < 2 {
        return invalid("need at least two paths");
    }
    domain.require_interior(x)?;
    let walker = Walker::new(domain, config)?;
    let steps = (t / walker.dt()).round() as u64;
    let t_grid = steps as f64 * walker.dt();
    let stage_one = derive_seed(config.master_seed, "restart");
    let budget = PathBudget::new(n_paths);
    let h = estimate_h(domain, x, lambda, phi, config, budget)?;
    let chunks = map_chunks(0..n_paths, |range| {
        let mut t2 = Tally::new();
        let mut early = 0u64;
        for i in range {
            let mut rng1 = path_rng(stage_one, i);
            match walker.run_for(x, steps, &mut rng1) {
                Err(_) => {
                    early += 1;
                    t2.stats.push(Complex64::new(0.0, 0.0));
                }
                Ok(y) => {
                    let mut rng2 = path_rng(config.master_seed, i);
                    match walker.run(&y, &mut rng2) {
                        Walk::Exit { tau, point, .. } => {
                            t2.stats.push((-lambda * tau).exp() * phi.value(domain, &point));
                        }
                        Walk::Horizon { .. } => t2.horizon += 1,
                    }
                }
            }
        }
        (t2, early)
    });
    let mut two = Tally::new();
    let mut early = 0u64;
    for (c, e) in &chunks {
        two.merge(c);
        early += e;
    }
    let early_exit = early as f64 / n_paths as f64;
    let growth = (lambda * t_grid).exp();
    let scaled_h = growth * h.mean;
    let two_stage = two.stats.mean();
    let se_two = two.stats.re.std_error().hypot(two.stats.im.std_error());
    let se = se_two.hypot(growth.norm() * h.combined_se());
    let tolerance = 3.0 * se + phi.sup_bound() * (lambda.norm() * t_grid).exp() * early_exit;
    let gap = (two_stage - scaled_h).norm();
    Ok(RestartReport {
        t: t_grid,
        two_stage,
        two_stage_se_re: two.stats.re.std_error(),
        two_stage_se_im: two.stats.im.std_error(),
        h,
        scaled_h,
        early_exit,
        gap,
        tolerance,
        pass: gap <= tolerance && two.horizon == 0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(dt: f64) -> SimConfig {
        SimConfig::new(dt, 7)
    }

    #[test]
    fn geodesic_ball_chart_radii() {
        let d = ManifoldModel::hyperbolic_disk();
        let ball = Domain::geodesic_ball(&d, &ChartPoint::x2(0.0, 0.0), 1.0).unwrap();
        assert!((ball.chart_radius() - 0.5f64.tanh()).abs() < 1e-15);
        let off = Domain::geodesic_ball(&d, &ChartPoint::x2(0.3, 0.1), 0.7).unwrap();
        // boundary points sit at geodesic distance 0.7 from the center
        for k in 0..8 {
            let a = k as f64 * PI / 4.0;
            let c = off.chart_center();
            let p = ChartPoint::x2(
                c.coords()[0] + off.chart_radius() * a.cos(),
                c.coords()[1] + off.chart_radius() * a.sin(),
            );
            assert!(off.signed_distance(&p).unwrap().abs() < 1e-12);
        }
        let h = ManifoldModel::hyperbolic_halfplane();
        let hb = Domain::geodesic_ball(&h, &ChartPoint::x2(1.0, 2.0), 0.5).unwrap();
        let top = ChartPoint::x2(1.0, hb.chart_center().coords()[1] + hb.chart_radius());
        assert!(hb.signed_distance(&top).unwrap().abs() < 1e-12);
    }

    #[test]
    fn domain_must_fit_chart() {
        let d = ManifoldModel::hyperbolic_disk();
        assert!(Domain::chart_disk(&d, &ChartPoint::x2(0.5, 0.0), 0.6).is_err());
        let h = ManifoldModel::hyperbolic_halfplane();
        assert!(Domain::chart_disk(&h, &ChartPoint::x2(0.0, 1.0), 1.0).is_err());
    }

    #[test]
    fn projection_lands_on_boundary() {
        let e = ManifoldModel::euclidean(2).unwrap();
        let ann = Domain::chart_annulus(&e, &ChartPoint::x2(1.0, 1.0), 0.5, 2.0).unwrap();
        for p in [ChartPoint::x2(1.2, 1.1), ChartPoint::x2(3.5, -1.0), ChartPoint::x2(1.0, 1.0)] {
            let q = ann.boundary_project(&p);
            assert!(ann.signed_distance(&q).unwrap().abs() < 1e-14);
        }
    }

    #[test]
    fn boundary_start_rejected() {
        let d = Domain::interval(1.0).unwrap();
        assert!(matches!(
            sample_exit(&d, &ChartPoint::x1(1.0), &cfg(1e-3), 0),
            Err(Error::NotInterior { .. })
        ));
        assert!(matches!(
            sample_exit(&d, &ChartPoint::x1(1.0 - 1e-13), &cfg(1e-3), 0),
            Err(Error::NotInterior { .. })
        ));
    }

    #[test]
    fn exit_sample_is_on_boundary() {
        let d = Domain::interval(1.0).unwrap();
        for i in 0..20 {
            let s = sample_exit(&d, &ChartPoint::x1(0.3), &cfg(1e-3), i).unwrap();
            assert!(!s.horizon && s.refined);
            assert!(d.signed_distance(&s.exit_point).unwrap().abs() <= 1e-10);
            assert!(s.tau > 0.0 && s.tau <= s.n_steps as f64 * 1e-3);
        }
    }

    #[test]
    fn zero_lambda_constant_data_is_exact() {
        let d = Domain::interval(1.0).unwrap();
        let est = estimate_h(
            &d,
            &ChartPoint::x1(0.2),
            Complex64::new(0.0, 0.0),
            &BoundaryData::constant(1.0),
            &cfg(1e-3),
            PathBudget::new(200),
        )
        .unwrap();
        assert_eq!(est.mean, Complex64::new(1.0, 0.0));
        assert_eq!(est.se_re, 0.0);
        assert_eq!(est.horizon_mass, 0.0);
    }

    #[test]
    fn horizon_is_reported_not_averaged() {
        let d = Domain::interval(1.0).unwrap();
        let c = cfg(1e-2).with_max_time(0.02);
        let est = estimate_h(
            &d,
            &ChartPoint::x1(0.0),
            Complex64::new(1.0, 0.0),
            &BoundaryData::constant(1.0),
            &c,
            PathBudget::new(100),
        )
        .unwrap();
        assert!(est.horizon_mass > 0.9);
        assert!(est.truncation_bound > 0.0);
        assert_eq!(est.n_exited as f64, (1.0 - est.horizon_mass) * 100.0);
    }

    #[test]
    fn restart_at_zero_is_identity() {
        let d = Domain::interval(1.0).unwrap();
        let r = markov_restart_check(
            &d,
            &ChartPoint::x1(0.0),
            Complex64::new(1.0, 0.0),
            &BoundaryData::constant(1.0),
            0.0,
            &cfg(1e-3),
            500,
        )
        .unwrap();
        assert_eq!(r.two_stage, r.h.mean);
        assert!(r.pass);
    }

    #[test]
    fn residual_of_constant_field_vanishes() {
        let e = ManifoldModel::euclidean(1).unwrap();
        let grid = ChartGrid::cube(1, -1.0, 1.0, 11).unwrap();
        let f = FieldGrid::exact(&e, &grid, Complex64::new(0.0, 0.0), vec![Some(Complex64::new(1.0, 0.0)); 11]).unwrap();
        let r = residual_check(&f).unwrap();
        assert_eq!(r.nodes.len(), 9);
        assert!(r.max_abs < 1e-12 && r.pass);
    }

    #[test]
    fn bump_data() {
        let b = BoundaryData::Bump {
            center: PI,
            half_width: 0.5,
            height: Complex64::new(2.0, 0.0),
        };
        assert!((b.at_angle(-PI).re - 2.0).abs() < 1e-12);
        assert_eq!(b.at_angle(0.0).re, 0.0);
        assert_eq!(b.sup_bound(), 2.0);
    }
}
