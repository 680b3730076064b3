//! Exit-time Feynman–Kac estimators for Laplacian eigenfunctions on model
//! manifolds (flat space, the hyperbolic plane and hyperbolic 3-space), with
//! the deterministic references used to verify them: closed-form heat
//! kernels, Dirichlet spectra, and radial shooting solvers.
//!
//! Throughout, the diffusion is generated by Δ itself (not Δ/2), matching the
//! heat equation `∂p/∂t = Δp`.

// `!(x > 0.0)` is how argument checks reject NaN along with the bad range.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
// index loops mirror the tensor notation of the metric formulas
#![allow(clippy::needless_range_loop)]

pub mod dirichlet;
pub mod error;
pub mod exitmc;
pub mod geometry;
pub mod kernels;
pub mod ode;
pub mod oracle;
pub mod pathsim;
pub mod quad;
pub mod rng;
pub mod special;
pub mod stats;

pub use error::{Error, Result};
pub use geometry::{ChartGeometry, ChartGrid, ChartPoint, ManifoldModel, ModelKind};
pub use num_complex::Complex64;
