//! Model-manifold geometry in a single global chart.
//!
//! Every model carries a conformally flat metric `g = e^{2s} I` in its chart:
//! flat space (`s = 0`), the Poincaré disk/ball (`e^s = 2 / (1 - |x|^2)`) and
//! the upper half-plane (`e^s = 1 / y`). Metric data, Christoffel symbols and
//! the Laplace–Beltrami stencil are all derived from `s` and its gradient.

use std::f64::consts::PI;
use std::fmt;

use num_complex::Complex64;

use crate::error::{invalid, Error, Result};

pub const MAX_DIM: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChartPoint {
    coords: [f64; MAX_DIM],
    dim: usize,
}

impl ChartPoint {
    pub fn new(coords: &[f64]) -> Result<Self> {
        if coords.is_empty() || coords.len() > MAX_DIM {
            return invalid(format!("chart points have 1..={MAX_DIM} coordinates"));
        }
        if coords.iter().any(|c| !c.is_finite()) {
            return invalid("chart coordinates must be finite");
        }
        let mut c = [0.0; MAX_DIM];
        c[..coords.len()].copy_from_slice(coords);
        Ok(Self {
            coords: c,
            dim: coords.len(),
        })
    }

    pub fn origin(dim: usize) -> Self {
        Self {
            coords: [0.0; MAX_DIM],
            dim,
        }
    }

    /// Padding entries beyond `dim` must be zero.
    #[inline]
    pub(crate) fn from_raw(coords: [f64; MAX_DIM], dim: usize) -> Self {
        Self { coords, dim }
    }

    pub fn x1(x: f64) -> Self {
        Self {
            coords: [x, 0.0, 0.0],
            dim: 1,
        }
    }

    pub fn x2(x: f64, y: f64) -> Self {
        Self {
            coords: [x, y, 0.0],
            dim: 2,
        }
    }

    pub fn x3(x: f64, y: f64, z: f64) -> Self {
        Self {
            coords: [x, y, z],
            dim: 3,
        }
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn coords(&self) -> &[f64] {
        &self.coords[..self.dim]
    }

    #[inline]
    pub fn coords_mut(&mut self) -> &mut [f64] {
        &mut self.coords[..self.dim]
    }

    #[inline]
    pub fn raw(&self) -> &[f64; MAX_DIM] {
        &self.coords
    }

    #[inline]
    pub fn norm_sq(&self) -> f64 {
        self.coords.iter().map(|c| c * c).sum()
    }

    #[inline]
    pub fn chart_dist_sq(&self, other: &ChartPoint) -> f64 {
        (0..MAX_DIM)
            .map(|i| (self.coords[i] - other.coords[i]).powi(2))
            .sum()
    }

    /// `self + s (other - self)` in chart coordinates.
    #[inline]
    pub fn lerp(&self, other: &ChartPoint, s: f64) -> ChartPoint {
        let mut out = *self;
        for i in 0..MAX_DIM {
            out.coords[i] += s * (other.coords[i] - self.coords[i]);
        }
        out
    }

    fn as_complex(&self) -> Complex64 {
        Complex64::new(self.coords[0], self.coords[1])
    }

    fn from_complex(z: Complex64) -> Self {
        Self::x2(z.re, z.im)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ModelKind {
    Euclidean(usize),
    /// Poincaré disk, curvature -1.
    HyperbolicDisk2,
    /// Upper half-plane, curvature -1.
    HyperbolicHalfPlane2,
    /// Poincaré ball model of H^3; heat kernels only, no path simulation.
    Hyperbolic3,
}

/// Sectional curvature bounds `-b^2 <= K <= -a^2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurvaturePinch {
    pub a2: f64,
    pub b2: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ManifoldModel {
    kind: ModelKind,
    pinch: CurvaturePinch,
    lambda1: f64,
}

impl fmt::Display for ManifoldModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

/// Metric data at a chart point. `christoffel[k][i][j]` is `Γ^k_ij`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChartGeometry {
    pub dim: usize,
    pub metric: [[f64; MAX_DIM]; MAX_DIM],
    pub inverse: [[f64; MAX_DIM]; MAX_DIM],
    pub sqrt_det: f64,
    pub christoffel: [[[f64; MAX_DIM]; MAX_DIM]; MAX_DIM],
}

impl ChartGeometry {
    /// Itô drift `b^k = -g^{ij} Γ^k_ij` of the process generated by Δ.
    pub fn drift(&self) -> [f64; MAX_DIM] {
        let mut b = [0.0; MAX_DIM];
        for (k, bk) in b.iter_mut().enumerate().take(self.dim) {
            for i in 0..self.dim {
                for j in 0..self.dim {
                    *bk -= self.inverse[i][j] * self.christoffel[k][i][j];
                }
            }
        }
        b
    }
}

/// Log conformal factor `s` and its chart gradient.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Conformal {
    pub log_factor: f64,
    pub grad: [f64; MAX_DIM],
}

impl ManifoldModel {
    pub fn euclidean(n: usize) -> Result<Self> {
        if n == 0 || n > MAX_DIM {
            return invalid(format!("euclidean dimension must be in 1..={MAX_DIM}"));
        }
        Ok(Self {
            kind: ModelKind::Euclidean(n),
            pinch: CurvaturePinch { a2: 0.0, b2: 0.0 },
            lambda1: 0.0,
        })
    }

    pub fn hyperbolic_disk() -> Self {
        Self {
            kind: ModelKind::HyperbolicDisk2,
            pinch: CurvaturePinch { a2: 1.0, b2: 1.0 },
            lambda1: -0.25,
        }
    }

    pub fn hyperbolic_halfplane() -> Self {
        Self {
            kind: ModelKind::HyperbolicHalfPlane2,
            pinch: CurvaturePinch { a2: 1.0, b2: 1.0 },
            lambda1: -0.25,
        }
    }

    pub fn hyperbolic3() -> Self {
        Self {
            kind: ModelKind::Hyperbolic3,
            pinch: CurvaturePinch { a2: 1.0, b2: 1.0 },
            lambda1: -1.0,
        }
    }

    /// Parses the names produced by [`ManifoldModel::name`].
    pub fn from_name(name: &str) -> Result<Self> {
        match name {
            "euclidean1" => Self::euclidean(1),
            "euclidean2" => Self::euclidean(2),
            "euclidean3" => Self::euclidean(3),
            "hyperbolic_disk2" => Ok(Self::hyperbolic_disk()),
            "hyperbolic_halfplane2" => Ok(Self::hyperbolic_halfplane()),
            "hyperbolic3" => Ok(Self::hyperbolic3()),
            other => invalid(format!("unknown model '{other}'")),
        }
    }

    pub fn name(&self) -> String {
        match self.kind {
            ModelKind::Euclidean(n) => format!("euclidean{n}"),
            ModelKind::HyperbolicDisk2 => "hyperbolic_disk2".into(),
            ModelKind::HyperbolicHalfPlane2 => "hyperbolic_halfplane2".into(),
            ModelKind::Hyperbolic3 => "hyperbolic3".into(),
        }
    }

    #[inline]
    pub fn kind(&self) -> ModelKind {
        self.kind
    }

    #[inline]
    pub fn dim(&self) -> usize {
        match self.kind {
            ModelKind::Euclidean(n) => n,
            ModelKind::HyperbolicDisk2 | ModelKind::HyperbolicHalfPlane2 => 2,
            ModelKind::Hyperbolic3 => 3,
        }
    }

    pub fn pinch(&self) -> CurvaturePinch {
        self.pinch
    }

    /// Top of the L² spectrum of Δ.
    pub fn lambda1(&self) -> f64 {
        self.lambda1
    }

    pub fn is_hyperbolic(&self) -> bool {
        !matches!(self.kind, ModelKind::Euclidean(_))
    }

    /// `-(n-1)^2 a^2 / 4`.
    pub fn mckean_bound(&self) -> f64 {
        let n = self.dim() as f64;
        -(n - 1.0).powi(2) * self.pinch.a2 / 4.0
    }

    /// Exponential rate `(n-1) b` bounding the growth of geodesic spheres.
    pub fn volume_growth_rate(&self) -> f64 {
        (self.dim() as f64 - 1.0) * self.pinch.b2.sqrt()
    }

    #[inline]
    pub fn contains(&self, x: &ChartPoint) -> bool {
        if x.dim() != self.dim() {
            return false;
        }
        match self.kind {
            ModelKind::Euclidean(_) => true,
            ModelKind::HyperbolicDisk2 | ModelKind::Hyperbolic3 => x.norm_sq() < 1.0,
            ModelKind::HyperbolicHalfPlane2 => x.coords[1] > 0.0,
        }
    }

    pub fn check(&self, x: &ChartPoint) -> Result<()> {
        if self.contains(x) {
            Ok(())
        } else {
            Err(Error::OutsideChart {
                model: self.name(),
                coords: x.coords().to_vec(),
            })
        }
    }

    #[inline]
    pub(crate) fn conformal(&self, x: &ChartPoint) -> Conformal {
        match self.kind {
            ModelKind::Euclidean(_) => Conformal {
                log_factor: 0.0,
                grad: [0.0; MAX_DIM],
            },
            ModelKind::HyperbolicDisk2 | ModelKind::Hyperbolic3 => {
                let q = 1.0 - x.norm_sq();
                let mut grad = [0.0; MAX_DIM];
                for (g, c) in grad.iter_mut().zip(x.coords()) {
                    *g = 2.0 * c / q;
                }
                Conformal {
                    log_factor: (2.0 / q).ln(),
                    grad,
                }
            }
            ModelKind::HyperbolicHalfPlane2 => {
                let y = x.coords[1];
                Conformal {
                    log_factor: -y.ln(),
                    grad: [0.0, -1.0 / y, 0.0],
                }
            }
        }
    }

    /// Closed-form metric, inverse, volume density and Christoffel symbols.
    pub fn metric_at(&self, x: &ChartPoint) -> Result<ChartGeometry> {
        self.check(x)?;
        let n = self.dim();
        let c = self.conformal(x);
        let e2 = (2.0 * c.log_factor).exp();
        let mut metric = [[0.0; MAX_DIM]; MAX_DIM];
        let mut inverse = [[0.0; MAX_DIM]; MAX_DIM];
        for i in 0..n {
            metric[i][i] = e2;
            inverse[i][i] = 1.0 / e2;
        }
        // Γ^k_ij = δ_ik ∂_j s + δ_jk ∂_i s - δ_ij ∂_k s
        let mut christoffel = [[[0.0; MAX_DIM]; MAX_DIM]; MAX_DIM];
        for (k, gk) in christoffel.iter_mut().enumerate().take(n) {
            for i in 0..n {
                for j in 0..n {
                    let mut v = 0.0;
                    if i == k {
                        v += c.grad[j];
                    }
                    if j == k {
                        v += c.grad[i];
                    }
                    if i == j {
                        v -= c.grad[k];
                    }
                    gk[i][j] = v;
                }
            }
        }
        Ok(ChartGeometry {
            dim: n,
            metric,
            inverse,
            sqrt_det: (n as f64 * c.log_factor).exp(),
            christoffel,
        })
    }

    pub fn geodesic_distance(&self, x: &ChartPoint, y: &ChartPoint) -> Result<f64> {
        self.check(x)?;
        self.check(y)?;
        Ok(self.distance_unchecked(x, y))
    }

    #[inline]
    pub(crate) fn distance_unchecked(&self, x: &ChartPoint, y: &ChartPoint) -> f64 {
        let d2 = x.chart_dist_sq(y);
        match self.kind {
            ModelKind::Euclidean(_) => d2.sqrt(),
            // arcosh(1 + 2u) = 2 asinh(sqrt(u))
            ModelKind::HyperbolicDisk2 | ModelKind::Hyperbolic3 => {
                let u = d2 / ((1.0 - x.norm_sq()) * (1.0 - y.norm_sq()));
                2.0 * u.sqrt().asinh()
            }
            ModelKind::HyperbolicHalfPlane2 => {
                let u = d2 / (4.0 * x.coords[1] * y.coords[1]);
                2.0 * u.sqrt().asinh()
            }
        }
    }

    /// Volume of a geodesic ball of radius `r`.
    pub fn volume_ball(&self, r: f64) -> Result<f64> {
        if !(r >= 0.0) {
            return invalid(format!("ball radius must be nonnegative, got {r}"));
        }
        Ok(match self.kind {
            ModelKind::Euclidean(n) => unit_ball_volume(n) * r.powi(n as i32),
            ModelKind::HyperbolicDisk2 | ModelKind::HyperbolicHalfPlane2 => 2.0 * PI * (r.cosh() - 1.0),
            ModelKind::Hyperbolic3 => PI * ((2.0 * r).sinh() - 2.0 * r),
        })
    }

    /// Area of the geodesic sphere of radius `r`; `d/dr` of [`Self::volume_ball`].
    pub fn sphere_area(&self, r: f64) -> f64 {
        match self.kind {
            ModelKind::Euclidean(n) => n as f64 * unit_ball_volume(n) * r.powi(n as i32 - 1),
            ModelKind::HyperbolicDisk2 | ModelKind::HyperbolicHalfPlane2 => 2.0 * PI * r.sinh(),
            ModelKind::Hyperbolic3 => 4.0 * PI * r.sinh().powi(2),
        }
    }

    /// Point at geodesic distance `dist` from `x` in the direction of the
    /// chart unit vector `dir` (normalised internally).
    pub fn exp_map(&self, x: &ChartPoint, dir: &[f64], dist: f64) -> Result<ChartPoint> {
        self.check(x)?;
        let n = self.dim();
        if dir.len() != n {
            return invalid("direction dimension mismatch");
        }
        let len = dir.iter().map(|d| d * d).sum::<f64>().sqrt();
        if len == 0.0 {
            return invalid("zero direction");
        }
        match self.kind {
            ModelKind::Euclidean(_) => {
                let mut out = *x;
                for (c, d) in out.coords_mut().iter_mut().zip(dir) {
                    *c += dist * d / len;
                }
                Ok(out)
            }
            ModelKind::HyperbolicDisk2 => {
                let u = Complex64::new(dir[0] / len, dir[1] / len);
                Ok(ChartPoint::from_complex(disk_exp(x.as_complex(), u, dist)))
            }
            ModelKind::HyperbolicHalfPlane2 => {
                let z = x.as_complex();
                let i = Complex64::i();
                // Cayley map C(z) = (z - i)/(z + i) is an isometry onto the disk
                let w = (z - i) / (z + i);
                let dc = 2.0 * i / ((z + i) * (z + i));
                let u = Complex64::new(dir[0] / len, dir[1] / len) * dc / dc.norm();
                let w2 = disk_exp(w, u, dist);
                let z2 = i * (1.0 + w2) / (1.0 - w2);
                Ok(ChartPoint::x2(z2.re, z2.im.max(f64::MIN_POSITIVE)))
            }
            ModelKind::Hyperbolic3 => Err(Error::Unsupported(
                "hyperbolic3 is kernels-only; no exponential map".into(),
            )),
        }
    }
}

/// Disk exponential map: pull `z` to the origin, move `tanh(d/2) u`, push back.
fn disk_exp(z: Complex64, u: Complex64, dist: f64) -> Complex64 {
    let w = u * (0.5 * dist).tanh();
    (w + z) / (1.0 + z.conj() * w)
}

pub fn unit_ball_volume(n: usize) -> f64 {
    match n {
        0 => 1.0,
        1 => 2.0,
        _ => 2.0 * PI / n as f64 * unit_ball_volume(n - 2),
    }
}

/// Regular grid in chart coordinates: node `(i_0, .., i_{d-1})` sits at
/// `origin + spacing * i`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChartGrid {
    pub dim: usize,
    pub origin: [f64; MAX_DIM],
    pub spacing: f64,
    pub shape: [usize; MAX_DIM],
}

impl ChartGrid {
    pub fn new(origin: &[f64], spacing: f64, shape: &[usize]) -> Result<Self> {
        let dim = origin.len();
        if dim == 0 || dim > MAX_DIM || shape.len() != dim {
            return invalid("grid origin and shape must share a dimension in 1..=3");
        }
        if !(spacing > 0.0) {
            return invalid("grid spacing must be positive");
        }
        let mut o = [0.0; MAX_DIM];
        o[..dim].copy_from_slice(origin);
        let mut s = [1; MAX_DIM];
        s[..dim].copy_from_slice(shape);
        Ok(Self {
            dim,
            origin: o,
            spacing,
            shape: s,
        })
    }

    /// Uniform grid with `nodes` points per axis covering `[lo, hi]^dim`.
    pub fn cube(dim: usize, lo: f64, hi: f64, nodes: usize) -> Result<Self> {
        if nodes < 2 {
            return invalid("a grid axis needs at least two nodes");
        }
        let spacing = (hi - lo) / (nodes - 1) as f64;
        Self::new(&vec![lo; dim], spacing, &vec![nodes; dim])
    }

    pub fn len(&self) -> usize {
        self.shape[..self.dim].iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn flat_index(&self, node: &[usize]) -> usize {
        let mut idx = 0;
        for d in (0..self.dim).rev() {
            idx = idx * self.shape[d] + node[d];
        }
        idx
    }

    pub fn multi_index(&self, mut flat: usize) -> [usize; MAX_DIM] {
        let mut out = [0; MAX_DIM];
        for d in 0..self.dim {
            out[d] = flat % self.shape[d];
            flat /= self.shape[d];
        }
        out
    }

    pub fn point(&self, node: &[usize]) -> ChartPoint {
        let mut c = [0.0; MAX_DIM];
        for d in 0..self.dim {
            c[d] = self.origin[d] + self.spacing * node[d] as f64;
        }
        ChartPoint::new(&c[..self.dim]).expect("grid dimension is valid")
    }

    pub fn has_full_stencil(&self, node: &[usize]) -> bool {
        (0..self.dim).all(|d| node[d] >= 1 && node[d] + 1 < self.shape[d])
    }
}

/// Weights `(flat index, w)` with `Δf(node) ≈ Σ w f`, from the divergence form
/// `(1/√g) ∂_i(√g g^{ii} ∂_i f)` with coefficients taken at half-nodes.
pub fn stencil_weights(model: &ManifoldModel, grid: &ChartGrid, node: &[usize]) -> Result<Vec<(usize, f64)>> {
    if grid.dim != model.dim() || node.len() != grid.dim {
        return invalid("grid dimension does not match the model");
    }
    if !grid.has_full_stencil(node) {
        return Err(Error::IncompleteStencil { node: node.to_vec() });
    }
    let n = grid.dim;
    let x = grid.point(node);
    model.check(&x)?;
    let h = grid.spacing;
    let coeff = |p: &ChartPoint| -> f64 {
        // √g g^{ii} = e^{(n-2)s}
        ((n as f64 - 2.0) * model.conformal(p).log_factor).exp()
    };
    let inv_sqrt_g = (-(n as f64) * model.conformal(&x).log_factor).exp();
    let mut weights = Vec::with_capacity(2 * n + 1);
    let mut center = 0.0;
    for d in 0..n {
        let mut plus = x;
        plus.coords[d] += 0.5 * h;
        let mut minus = x;
        minus.coords[d] -= 0.5 * h;
        model.check(&minus)?;
        model.check(&plus)?;
        let (ap, am) = (coeff(&plus), coeff(&minus));
        let mut up = [0; MAX_DIM];
        up[..n].copy_from_slice(node);
        let mut down = up;
        up[d] += 1;
        down[d] -= 1;
        let s = inv_sqrt_g / (h * h);
        weights.push((grid.flat_index(&up[..n]), s * ap));
        weights.push((grid.flat_index(&down[..n]), s * am));
        center -= s * (ap + am);
    }
    weights.push((grid.flat_index(node), center));
    Ok(weights)
}

pub fn laplace_beltrami_stencil(
    model: &ManifoldModel,
    grid: &ChartGrid,
    values: &[f64],
    node: &[usize],
) -> Result<f64> {
    if values.len() != grid.len() {
        return invalid("field length does not match the grid");
    }
    Ok(stencil_weights(model, grid, node)?
        .iter()
        .map(|&(i, w)| w * values[i])
        .sum())
}
