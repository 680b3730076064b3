//! One function per experiment kind, each turning a typed config into a
//! result table.

use std::fmt;

use rfk_core::dirichlet::{domination_check, small_time_exit_check, spectrum};
use rfk_core::exitmc::{
    boundary_trace_check, estimate_h, field_on_grid, markov_restart_check, residual_check, sample_exit_times,
    BoundaryData, Domain, FKEstimate, PathBudget,
};
use rfk_core::kernels::{check_long_bound, check_short_bound, fit_tail_bound, mass_conservation, tail_mass, BoundGrid};
use rfk_core::kernels::{BoundReport, TailBoundParams};
use rfk_core::oracle::{principal_eigenvalue, solve_disk_bvp, solve_radial_bvp};
use rfk_core::pathsim::{base_point, calibrate_generator, TestFunction};
use rfk_core::{ChartGrid, ChartPoint, Complex64, ManifoldModel, ModelKind};

use crate::accept::{self, AcceptOptions};
use crate::config::{ConfigError, Experiment, ExperimentConfig};
use crate::csv::{McColumns, Row, Table};

#[derive(Debug)]
pub enum RunError {
    Config(ConfigError),
    Compute(rfk_core::Error),
}

impl fmt::Display for RunError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RunError::Config(e) => e.fmt(f),
            RunError::Compute(e) => write!(f, "computation failed: {e}"),
        }
    }
}

impl std::error::Error for RunError {}

impl From<ConfigError> for RunError {
    fn from(e: ConfigError) -> Self {
        RunError::Config(e)
    }
}

impl From<rfk_core::Error> for RunError {
    fn from(e: rfk_core::Error) -> Self {
        RunError::Compute(e)
    }
}

pub type RunResult = Result<Table, RunError>;

/// Runs the configured experiment. `progress` receives one line per
/// finished acceptance criterion.
pub fn run(cfg: &ExperimentConfig, progress: &mut dyn FnMut(&str)) -> RunResult {
    let mut table = Table::new(cfg.experiment.name(), cfg.hash(), cfg.sim.master_seed);
    let rows = match cfg.experiment {
        Experiment::Estimate => estimate(cfg)?,
        Experiment::Field => field(cfg)?,
        Experiment::ExitDist => exitdist(cfg)?,
        Experiment::KernelCheck => kernelcheck(cfg)?,
        Experiment::DirichletCheck => dirichletcheck(cfg)?,
        Experiment::Calibrate => calibrate(cfg)?,
        Experiment::Restart => restart(cfg)?,
        Experiment::Boundary => boundary(cfg)?,
        Experiment::EigenScan => eigenscan(cfg)?,
        Experiment::Accept => {
            let opts = AcceptOptions {
                scale: cfg.raw.get_or("accept.scale", 1.0)?,
                master_seed: cfg.sim.master_seed,
            };
            if !(opts.scale >= 0.0) {
                return Err(ConfigError::new("accept.scale must be >= 0").into());
            }
            let criteria = accept::run_all(&opts, |c| progress(&c.line()));
            return Ok(accept::table(&criteria, cfg.hash(), cfg.sim.master_seed));
        }
    };
    table.rows = rows;
    Ok(table)
}

fn mc(e: &FKEstimate) -> McColumns {
    McColumns {
        se_re: e.se_re,
        se_im: e.se_im,
        horizon_mass: e.horizon_mass,
    }
}

fn budget(cfg: &ExperimentConfig) -> PathBudget {
    PathBudget::new(cfg.n_paths).with_bias(cfg.bias)
}

fn estimate_row(label: &str, e: &FKEstimate) -> Row {
    Row::new("estimate", label, e.mean.re)
        .imag(e.mean.im)
        .sampled(e.n_paths, e.dt, mc(e))
        .note(format!("mean tau {:.6}", e.mean_tau))
}

/// Deterministic value of `h(x)` where an oracle covers the problem: radial
/// data on a ball, or Fourier data on a flat disk.
pub fn oracle_value(domain: &Domain, lambda: Complex64, phi: &BoundaryData, x: &ChartPoint) -> Option<Complex64> {
    let (_, radius) = domain.ball()?;
    let model = domain.model();
    match phi {
        BoundaryData::Constant(c) => {
            let r = domain.radial_coordinate(x)?;
            solve_radial_bvp(model, radius, lambda, *c).ok()?.value_at(r).ok()
        }
        BoundaryData::Fourier(modes) if model.kind() == ModelKind::Euclidean(2) => {
            let r = x.chart_dist_sq(&domain.chart_center()).sqrt();
            solve_disk_bvp(lambda, modes, radius, 400)
                .ok()?
                .value(r, domain.boundary_angle(x))
                .ok()
        }
        _ => None,
    }
}

fn estimate(cfg: &ExperimentConfig) -> Result<Vec<Row>, RunError> {
    let domain = cfg.require_domain()?;
    let x = cfg.point_or_center()?;
    let e = estimate_h(domain, &x, cfg.lambda, &cfg.phi, &cfg.sim, budget(cfg))?;
    let label = format!("{} x={:?}", domain.describe(), x.coords());
    let mut row = estimate_row(&label, &e);
    let clean = e.horizon_mass == 0.0;
    if let Some(reference) = oracle_value(domain, cfg.lambda, &cfg.phi, &x) {
        let tol = 3.0 * e.combined_se() + cfg.raw.get_or("check.tol", 0.01)?;
        let gap = (e.mean - reference).norm();
        row = row.reference(reference.re).verdict(gap <= tol && clean, tol).note(format!(
            "gap {gap:.3e}; reference im {:.10}; mean tau {:.6}",
            reference.im, e.mean_tau
        ));
    } else {
        row = row.passed(clean);
    }
    Ok(vec![row])
}

fn grid_for(cfg: &ExperimentConfig, domain: &Domain) -> Result<ChartGrid, RunError> {
    let c = domain.chart_center();
    let r = domain.chart_radius();
    let lo: f64 = cfg.raw.get_or("grid.lo", c.coords()[0] - r)?;
    let hi: f64 = cfg.raw.get_or("grid.hi", c.coords()[0] + r)?;
    if c.coords().iter().skip(1).any(|v| *v != 0.0) {
        return Err(ConfigError::new("field grids need a domain centered on the first axis").into());
    }
    Ok(ChartGrid::cube(cfg.model.dim(), lo, hi, cfg.grid_nodes)?)
}

fn field(cfg: &ExperimentConfig) -> Result<Vec<Row>, RunError> {
    let domain = cfg.require_domain()?;
    let grid = grid_for(cfg, domain)?;
    let f = field_on_grid(domain, cfg.lambda, &cfg.phi, &grid, &cfg.sim, cfg.n_paths, cfg.bias)?;
    let mut rows = Vec::new();
    for (j, v) in f.values.iter().enumerate() {
        if let Some(v) = v {
            let p = grid.point(&grid.multi_index(j)[..grid.dim]);
            rows.push(
                Row::new("node", format!("{:?}", p.coords()), v.re).imag(v.im).sampled(
                    f.n_paths_per_node,
                    f.dt,
                    McColumns {
                        se_re: f.se_re[j],
                        se_im: f.se_im[j],
                        horizon_mass: f.horizon_mass,
                    },
                ),
            );
        }
    }
    let r = residual_check(&f)?;
    rows.push(
        Row::new("residual", "rms stencil residual", r.rms)
            .count(r.nodes.len() as u64)
            .step(f.dt)
            .verdict(r.pass, r.threshold)
            .note(format!("max {:.4e}; noise rms {:.4e}; h {}", r.max_abs, r.rms_noise, r.grid_spacing)),
    );
    Ok(rows)
}

fn exitdist(cfg: &ExperimentConfig) -> Result<Vec<Row>, RunError> {
    let domain = cfg.require_domain()?;
    let x = cfg.point_or_center()?;
    let spec = spectrum(domain, None)?;
    let times = sample_exit_times(domain, &x, &cfg.sim, budget(cfg))?;
    let series = |t: f64| spec.survival(t, &x).map(|s| 1.0 - s.raw);
    let mut rows = Vec::new();
    for t in cfg.raw.list_or("check.times", &[0.05, 0.1, 0.25, 0.5, 1.0, 2.0])? {
        rows.push(
            Row::new("cdf", format!("t={t}"), times.cdf(t))
                .reference(series(t)?)
                .count(times.n_paths)
                .step(cfg.sim.dt),
        );
    }
    // below the truncation-valid range the exit probability is negligible
    // for interior starts; those jumps compare against zero
    let sup = times.sup_distance(|t| series(t).unwrap_or(0.0));
    let tol = cfg.raw.get_or("check.tol", 0.01)?;
    rows.push(
        Row::new("sup_distance", "empirical vs series CDF", sup)
            .sampled(
                times.n_paths,
                cfg.sim.dt,
                McColumns {
                    se_re: 0.0,
                    se_im: 0.0,
                    horizon_mass: times.horizon as f64 / times.n_paths as f64,
                },
            )
            .verdict(sup <= tol, tol),
    );
    Ok(rows)
}

fn report_row(check: &str, r: &BoundReport) -> Row {
    Row::new(check, r.name.clone(), r.constant)
        .count(r.checked as u64)
        .passed(r.pass && r.constant.is_finite())
        .note(format!("max ratio {:.4e}; {} violations", r.max_ratio, r.violations.len()))
}

/// Without an explicit `model` key the check covers the three curved and flat
/// models that carry closed-form kernels in two and three dimensions.
fn kernelcheck(cfg: &ExperimentConfig) -> Result<Vec<Row>, RunError> {
    if cfg.raw.raw("model").is_some() {
        return kernelcheck_model(cfg, &cfg.model);
    }
    let mut rows = Vec::new();
    for name in ["euclidean2", "hyperbolic_disk2", "hyperbolic3"] {
        let m = ManifoldModel::from_name(name)?;
        for mut r in kernelcheck_model(cfg, &m)? {
            r.label = format!("{name} {}", r.label);
            rows.push(r);
        }
    }
    Ok(rows)
}

fn kernelcheck_model(cfg: &ExperimentConfig, m: &ManifoldModel) -> Result<Vec<Row>, RunError> {
    let params = TailBoundParams::for_model(m);
    let mut rows = vec![
        report_row("short_bound", &check_short_bound(m, &params, &BoundGrid::short_time())?),
        report_row("long_bound", &check_long_bound(m, f64::NAN, &BoundGrid::long_time())?),
    ];
    let tol = if matches!(m.kind(), ModelKind::HyperbolicDisk2 | ModelKind::HyperbolicHalfPlane2) {
        1e-5
    } else {
        1e-6
    };
    for t in cfg.raw.list_or("check.times", &[0.1, 1.0, 5.0])? {
        let mass = mass_conservation(m, t)?;
        rows.push(
            Row::new("mass", format!("t={t}"), mass)
                .reference(1.0)
                .verdict((mass - 1.0).abs() <= tol, tol),
        );
    }
    let pairs: Vec<(f64, f64)> = [0.02, 0.05, 0.1]
        .iter()
        .flat_map(|&t| [1.5, 2.0, 2.5, 3.0].map(|r| (t, r)))
        .collect();
    let fit = fit_tail_bound(m, &pairs, &params)?;
    rows.push(
        Row::new("tail_fit", "slope of ln tail vs R^2/t", fit.fit.slope)
            .count(pairs.len() as u64)
            .passed(fit.fit.slope < 0.0 && fit.fit.r_squared > 0.999 && fit.report.pass)
            .note(format!("R^2 {:.6}; eta {:.4}; kappa {:.4}", fit.fit.r_squared, fit.eta, fit.kappa)),
    );
    if m.kind() == ModelKind::Euclidean(2) {
        let tail = tail_mass(m, 0.1, 2.0)?;
        let exact = (-10f64).exp();
        rows.push(
            Row::new("tail_spot", "t=0.1 R=2", tail)
                .reference(exact)
                .verdict((tail / exact - 1.0).abs() <= 1e-8, 1e-8),
        );
    }
    Ok(rows)
}

/// Points at signed offsets `s` in `[-R, R]` along the first chart axis
/// through the center of a ball.
fn diameter(domain: &Domain, count: usize) -> Result<Vec<ChartPoint>, RunError> {
    let model = domain.model();
    let (center, radius) = domain.ball().ok_or_else(|| {
        RunError::Compute(rfk_core::Error::Unsupported(format!("no spectrum for {}", domain.describe())))
    })?;
    let mut dir = vec![0.0; model.dim()];
    dir[0] = 1.0;
    (0..count)
        .map(|i| {
            let s = -radius + 2.0 * radius * i as f64 / (count - 1) as f64;
            if model.dim() == 1 {
                Ok(ChartPoint::x1(center.coords()[0] + s))
            } else if s == 0.0 {
                Ok(center)
            } else {
                let d: Vec<f64> = dir.iter().map(|v| v * s.signum()).collect();
                Ok(model.exp_map(&center, &d, s.abs())?)
            }
        })
        .collect()
}

fn dirichletcheck(cfg: &ExperimentConfig) -> Result<Vec<Row>, RunError> {
    let domain = cfg.require_domain()?;
    let spec = spectrum(domain, None)?;
    let x = cfg.point_or_center()?;
    let line = diameter(domain, 20)?;
    let center = domain.chart_center();
    let radial_only = domain.model().is_hyperbolic();
    let mut points = Vec::new();
    for t in cfg.raw.list_or("check.times", &[0.05, 0.2, 1.0])? {
        for a in &line {
            if radial_only {
                points.push((t, center, *a));
            } else {
                for b in &line {
                    points.push((t, *a, *b));
                }
            }
        }
    }
    let mut rows = vec![report_row("domination", &domination_check(&spec, &points)?)];
    let delta: f64 = cfg.raw.get_or("check.delta", domain.ball().map(|b| b.1).unwrap_or(1.0))?;
    let small = small_time_exit_check(&spec, delta, &cfg.raw.list_or("check.small_times", &[0.02, 0.04, 0.08])?, 5.0)?;
    rows.push(
        Row::new("small_time", format!("delta={delta}"), small.beta_prime)
            .passed(small.pass)
            .note(format!(
                "slope {:.4}; R^2 {:.6}; gamma {:.4e}; beta {:.4}; gap R^2 {:.6}; alpha {:.4e}; spread {:.1e}",
                small.exit_fit.slope,
                small.exit_fit.r_squared,
                small.gamma,
                small.beta,
                small.gap_fit.r_squared,
                small.alpha,
                small.uniformity_spread
            )),
    );
    let t: f64 = cfg.raw.get_or("check.t", 0.5)?;
    let s = spec.survival(t, &x)?;
    rows.push(
        Row::new("survival", format!("t={t} x={:?}", x.coords()), s.raw)
            .note(format!("truncation bound {:.2e}", s.truncation_bound)),
    );
    Ok(rows)
}

fn calibrate(cfg: &ExperimentConfig) -> Result<Vec<Row>, RunError> {
    let x = cfg.point.unwrap_or_else(|| base_point(&cfg.model));
    let function = match cfg.raw.get_or("check.function", "chart_squared_norm".to_string())?.as_str() {
        "chart_squared_norm" => TestFunction::ChartSquaredNorm,
        "squared_distance" => TestFunction::SquaredDistance,
        other => {
            return Err(ConfigError::new(format!("unknown test function `{other}`")).into())
        }
    };
    let t: f64 = cfg.raw.get_or("check.t", 1e-3)?;
    let r = calibrate_generator(&cfg.model, &x, &function, t, cfg.n_paths, &cfg.sim)?;
    let tol = 3.0 * r.std_error + cfg.raw.get_or("check.tol", 0.05)?;
    Ok(vec![Row::new("generator", r.function, r.estimate)
        .reference(r.analytic)
        .sampled(
            r.n_paths,
            cfg.sim.dt,
            McColumns {
                se_re: r.std_error,
                se_im: 0.0,
                horizon_mass: 0.0,
            },
        )
        .verdict((r.estimate - r.analytic).abs() <= tol, tol)
        .note(format!("t {t}; z {:.3}", r.z_score()))])
}

fn restart(cfg: &ExperimentConfig) -> Result<Vec<Row>, RunError> {
    let domain = cfg.require_domain()?;
    let x = cfg.point_or_center()?;
    let t: f64 = cfg.raw.get_or("check.t", 0.01)?;
    let r = markov_restart_check(domain, &x, cfg.lambda, &cfg.phi, t, &cfg.sim, cfg.n_paths)?;
    Ok(vec![Row::new("restart", format!("t={t}"), r.two_stage.re)
        .imag(r.two_stage.im)
        .reference(r.scaled_h.re)
        .sampled(
            r.h.n_paths,
            r.h.dt,
            McColumns {
                se_re: r.two_stage_se_re,
                se_im: r.two_stage_se_im,
                horizon_mass: r.h.horizon_mass,
            },
        )
        .verdict(r.pass, r.tolerance)
        .note(format!("gap {:.4e}; early exit {:.4e}", r.gap, r.early_exit))])
}

fn boundary(cfg: &ExperimentConfig) -> Result<Vec<Row>, RunError> {
    let domain = cfg.require_domain()?;
    let xi = match cfg.raw.list("check.xi")? {
        Some(v) => ChartPoint::new(&v)?,
        None => {
            let mut p = domain.chart_center();
            p.coords_mut()[0] += domain.chart_radius();
            p
        }
    };
    let default: Vec<f64> = (1..=5).map(|k| 1.0 - 0.5f64.powi(k)).collect();
    let approach = cfg.raw.list_or("check.approach", &default)?;
    let r = boundary_trace_check(domain, cfg.lambda, &cfg.phi, &xi, &approach, &cfg.sim, budget(cfg))?;
    let mut rows: Vec<Row> = approach
        .iter()
        .zip(&r.estimates)
        .zip(&r.gaps)
        .map(|((s, e), g)| estimate_row(&format!("s={s}"), e).reference(r.target.re).note(format!("gap {g:.4e}")))
        .collect();
    rows.push(
        Row::new("trace", "final gap", *r.gaps.last().unwrap_or(&f64::NAN))
            .verdict(r.pass, r.final_tolerance)
            .note(format!("monotone {}", r.monotone)),
    );
    Ok(rows)
}

fn eigenscan(cfg: &ExperimentConfig) -> Result<Vec<Row>, RunError> {
    let m = &cfg.model;
    let limit = m.lambda1();
    let radii = cfg.raw.list_or("check.radii", &[2.0, 4.0, 8.0])?;
    let values = radii
        .iter()
        .map(|&r| principal_eigenvalue(m, r))
        .collect::<rfk_core::Result<Vec<_>>>()?;
    let mut rows: Vec<Row> = radii
        .iter()
        .zip(&values)
        .map(|(r, v)| Row::new("eigenvalue", format!("R={r}"), *v).reference(limit))
        .collect();
    let ordered = values.windows(2).all(|w| w[1] > w[0]) && values.iter().all(|v| *v <= limit);
    rows.push(
        Row::new("ordering", "increasing in R, below lambda1 of the model", if ordered { 1.0 } else { 0.0 })
            .passed(ordered),
    );
    if let Some(tol) = cfg.raw.get::<f64>("check.tol")? {
        let gap = (values.last().copied().unwrap_or(f64::NAN) - limit).abs();
        rows.push(Row::new("limit", "gap at the largest radius", gap).verdict(gap <= tol, tol));
    }
    Ok(rows)
}
