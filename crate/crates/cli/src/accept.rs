//! The acceptance suite: every criterion at its stated sample sizes and
//! tolerances, one verdict each.
//!
//! Path counts are multiplied by `scale` (1 for the real suite; the
//! reproducibility check runs a cheap scaled-down copy). Deterministic checks
//! do not depend on `scale`. Every Monte Carlo run draws from its own derived
//! master seed, so criteria are independent of each other and of run order.

use rfk_core::dirichlet::{domination_check, small_time_exit_check, spectrum};
use rfk_core::exitmc::{
    boundary_trace_check, estimate_abs_moment, estimate_h, field_on_grid, markov_restart_check, residual_check,
    sample_exit_times, BiasControl, BoundaryData, Domain, FKEstimate, FieldGrid, PathBudget,
};
use rfk_core::kernels::{
    check_long_bound, check_short_bound, fit_tail_bound, mass_conservation, tail_mass, BoundGrid, BoundReport,
    TailBoundParams,
};
use rfk_core::oracle::{principal_eigenvalue, solve_disk_bvp, solve_radial_bvp};
use rfk_core::pathsim::{calibrate_generator, SimConfig, TestFunction};
use rfk_core::rng::derive_seed;
use rfk_core::special::bessel_i;
use rfk_core::stats::linear_fit;
use rfk_core::{ChartGrid, ChartPoint, Complex64, Error, ManifoldModel};

use crate::config::cos_modes;
use crate::csv::{McColumns, Row, Table};

/// Criteria that cannot hold as stated; they run and report FAIL.
///
/// 13: the ball eigenvalue at R = 8 sits about 0.117 from the limit −1/4; the
/// gap closes like π²/R², so a 0.02 tolerance needs R above 20.
pub const KNOWN_UNATTAINABLE: &[u32] = &[13];

/// Paths below this are too few for a standard error to mean anything.
const MIN_PATHS: u64 = 200;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AcceptOptions {
    pub scale: f64,
    pub master_seed: u64,
}

impl AcceptOptions {
    fn paths(&self, n: u64) -> u64 {
        ((n as f64 * self.scale).ceil() as u64).max(MIN_PATHS)
    }

    fn sim(&self, tag: &str) -> SimConfig {
        SimConfig::new(1e-4, derive_seed(self.master_seed, tag))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Criterion {
    pub id: u32,
    pub title: &'static str,
    pub pass: bool,
    /// One-line account of the deciding numbers.
    pub summary: String,
    pub rows: Vec<Row>,
}

impl Criterion {
    pub fn line(&self) -> String {
        format!(
            "criterion {:>2} {}: {} ({})",
            self.id,
            if self.pass { "PASS" } else { "FAIL" },
            self.title,
            self.summary
        )
    }
}

pub const TITLES: [&str; 13] = [
    "Feynman-Kac vs ODE oracle, interval",
    "Feynman-Kac vs oracle, Euclidean disk",
    "Feynman-Kac vs shooting oracle, hyperbolic ball",
    "generator convention",
    "exit-time distribution vs survival series",
    "heat kernel bounds",
    "stochastic completeness",
    "domination and small-time exit bounds",
    "eigenfunction residual",
    "boundary convergence",
    "Markov restart identity",
    "threshold behaviour below the principal eigenvalue",
    "McKean limit of ball eigenvalues",
];

fn mc(e: &FKEstimate) -> McColumns {
    McColumns {
        se_re: e.se_re,
        se_im: e.se_im,
        horizon_mass: e.horizon_mass,
    }
}

/// `|ĥ - reference| <= 3 SE + slack` with the combined SE for complex targets.
fn fk_row(check: &str, label: &str, e: &FKEstimate, reference: Complex64, slack: f64) -> Row {
    let complex = reference.im != 0.0 || e.lambda.im != 0.0;
    let (gap, se) = if complex {
        ((e.mean - reference).norm(), e.combined_se())
    } else {
        ((e.mean.re - reference.re).abs(), e.se_re)
    };
    let tol = 3.0 * se + slack;
    let mut row = Row::new(check, label, e.mean.re)
        .reference(reference.re)
        .sampled(e.n_paths, e.dt, mc(e))
        .verdict(gap <= tol, tol)
        .note(format!("gap {gap:.3e}"));
    if complex {
        row = row.imag(e.mean.im).note(format!("gap {gap:.3e}; reference im {:.10}", reference.im));
    }
    row
}

fn bound_row(check: &str, label: &str, r: &BoundReport) -> Row {
    let ok = r.pass && r.constant.is_finite();
    Row::new(check, label, r.constant)
        .count(r.checked as u64)
        .passed(ok)
        .note(format!("max ratio {:.3e}; {} violations", r.max_ratio, r.violations.len()))
}

fn exact_row(check: &str, label: &str, value: f64, reference: f64, tol: f64) -> Row {
    Row::new(check, label, value)
        .reference(reference)
        .verdict((value - reference).abs() <= tol, tol)
}

/// Runs criterion `id` (1..=13). `horizon` is the largest horizon mass seen
/// by earlier Monte Carlo runs, consumed by criterion 7.
pub fn criterion(id: u32, opts: &AcceptOptions, horizon: f64) -> Criterion {
    let result = match id {
        1 => c1(opts),
        2 => c2(opts),
        3 => c3(opts),
        4 => c4(opts),
        5 => c5(opts),
        6 => c6(),
        7 => c7(horizon),
        8 => c8(),
        9 => c9(opts),
        10 => c10(opts),
        11 => c11(opts),
        12 => c12(opts),
        13 => c13(),
        _ => Err(Error::InvalidArgument(format!("no criterion {id}"))),
    };
    let title = TITLES.get(id as usize - 1).copied().unwrap_or("unknown");
    match result {
        Ok((rows, summary)) => Criterion {
            id,
            title,
            pass: !rows.is_empty() && rows.iter().all(|r| r.pass != Some(false)),
            summary,
            rows,
        },
        Err(e) => Criterion {
            id,
            title,
            pass: false,
            summary: format!("error: {e}"),
            rows: vec![Row::new("error", e.to_string(), f64::NAN).passed(false)],
        },
    }
}

/// Criteria 1..=13 in order; the horizon check of criterion 7 covers every
/// other Monte Carlo run.
pub fn run_all(opts: &AcceptOptions, mut progress: impl FnMut(&Criterion)) -> Vec<Criterion> {
    let mut out: Vec<Criterion> = Vec::with_capacity(13);
    for id in (1..=13).filter(|&i| i != 7) {
        let c = criterion(id, opts, 0.0);
        progress(&c);
        out.push(c);
    }
    let horizon = out
        .iter()
        .flat_map(|c| &c.rows)
        .filter_map(|r| r.mc.map(|m| m.horizon_mass))
        .fold(0.0, f64::max);
    let c = criterion(7, opts, horizon);
    progress(&c);
    out.insert(6, c);
    out
}

pub fn table(criteria: &[Criterion], config_hash: u64, master_seed: u64) -> Table {
    let mut t = Table::new("accept", config_hash, master_seed);
    for c in criteria {
        for r in &c.rows {
            let mut r = r.clone();
            r.check = format!("c{}.{}", c.id, r.check);
            t.push(r);
        }
        t.push(Row::new(format!("c{}", c.id), c.title, if c.pass { 1.0 } else { 0.0 }).passed(c.pass).note(&c.summary));
    }
    t
}

type Outcome = rfk_core::Result<(Vec<Row>, String)>;

fn interval() -> rfk_core::Result<Domain> {
    Domain::interval(1.0)
}

fn c1(o: &AcceptOptions) -> Outcome {
    let d = interval()?;
    let e1 = ManifoldModel::euclidean(1)?;
    let x = ChartPoint::x1(0.0);
    let one = BoundaryData::constant(1.0);
    let budget = PathBudget::new(o.paths(200_000)).with_bias(BiasControl::Extrapolate);
    let mut rows = Vec::new();
    let mut gaps = Vec::new();
    let cases: [(&str, Complex64, Complex64, f64); 3] = [
        ("a", Complex64::new(1.0, 0.0), Complex64::new(1.0 / 1f64.cosh(), 0.0), 0.005),
        ("b", Complex64::new(-2.0, 0.0), Complex64::new(1.0 / 2f64.sqrt().cos(), 0.0), 0.08),
        ("c", Complex64::new(1.0, 1.0), Complex64::new(1.0, 1.0).sqrt().cosh().inv(), 0.01),
    ];
    for (tag, lambda, closed, slack) in cases {
        let oracle = solve_radial_bvp(&e1, 1.0, lambda, Complex64::new(1.0, 0.0))?.center_value();
        rows.push(
            exact_row(&format!("{tag}.oracle"), "shooting vs closed form", oracle.re, closed.re, 1e-8)
                .imag(oracle.im)
                .note(format!("closed form im {:.12}", closed.im)),
        );
        let est = estimate_h(&d, &x, lambda, &one, &o.sim(&format!("c1{tag}")), budget)?;
        gaps.push(format!("{tag}: {:.5} vs {:.5}", est.mean.re, oracle.re));
        rows.push(fk_row(tag, &format!("lambda={}{:+}i", lambda.re, lambda.im), &est, oracle, slack));
    }
    Ok((rows, gaps.join("; ")))
}

fn c2(o: &AcceptOptions) -> Outcome {
    let e2 = ManifoldModel::euclidean(2)?;
    let d = Domain::chart_disk(&e2, &ChartPoint::x2(0.0, 0.0), 1.0)?;
    let budget = PathBudget::new(o.paths(200_000)).with_bias(BiasControl::Extrapolate);
    let lambda = Complex64::new(1.0, 0.0);
    let mut rows = Vec::new();

    let closed = 1.0 / bessel_i(0, 1.0);
    let oracle = solve_radial_bvp(&e2, 1.0, lambda, Complex64::new(1.0, 0.0))?.center_value().re;
    rows.push(exact_row("a.oracle", "shooting vs 1/I0(1)", oracle, closed, 1e-8));
    let a = estimate_h(&d, &ChartPoint::x2(0.0, 0.0), lambda, &BoundaryData::constant(1.0), &o.sim("c2a"), budget)?;
    rows.push(fk_row("a", "x=0 phi=1", &a, Complex64::new(closed, 0.0), 0.005));

    let closed_b = bessel_i(1, 0.5) / bessel_i(1, 1.0);
    let disk = solve_disk_bvp(lambda, &cos_modes(1), 1.0, 400)?.value(0.5, 0.0)?.re;
    rows.push(exact_row("b.oracle", "disk solver vs I1(0.5)/I1(1)", disk, closed_b, 1e-8));
    let phi = BoundaryData::Fourier(cos_modes(1));
    let b = estimate_h(&d, &ChartPoint::x2(0.5, 0.0), lambda, &phi, &o.sim("c2b"), budget)?;
    rows.push(fk_row("b", "x=(0.5,0) phi=cos", &b, Complex64::new(closed_b, 0.0), 0.01));
    Ok((rows, format!("{:.5} vs {closed:.5}; {:.5} vs {closed_b:.5}", a.mean.re, b.mean.re)))
}

fn c3(o: &AcceptOptions) -> Outcome {
    let h2 = ManifoldModel::hyperbolic_disk();
    let d = Domain::geodesic_ball(&h2, &ChartPoint::x2(0.0, 0.0), 1.0)?;
    let budget = PathBudget::new(o.paths(100_000)).with_bias(BiasControl::Extrapolate);
    let mut rows = Vec::new();
    let mut parts = Vec::new();
    for (tag, l) in [("a", 0.5), ("b", -0.1)] {
        let lambda = Complex64::new(l, 0.0);
        let oracle = solve_radial_bvp(&h2, 1.0, lambda, Complex64::new(1.0, 0.0))?.center_value();
        let e = estimate_h(
            &d,
            &ChartPoint::x2(0.0, 0.0),
            lambda,
            &BoundaryData::constant(1.0),
            &o.sim(&format!("c3{tag}")),
            budget,
        )?;
        parts.push(format!("lambda {l}: {:.5} vs {:.5}", e.mean.re, oracle.re));
        rows.push(fk_row(tag, &format!("lambda={l}"), &e, oracle, 0.01));
    }
    Ok((rows, parts.join("; ")))
}

fn c4(o: &AcceptOptions) -> Outcome {
    let e2 = ManifoldModel::euclidean(2)?;
    let r = calibrate_generator(
        &e2,
        &ChartPoint::x2(0.0, 0.0),
        &TestFunction::ChartSquaredNorm,
        1e-3,
        o.paths(1_000_000),
        &o.sim("c4"),
    )?;
    let tol = 3.0 * r.std_error + 0.05;
    let mcc = McColumns {
        se_re: r.std_error,
        se_im: 0.0,
        horizon_mass: 0.0,
    };
    let rows = vec![
        exact_row("analytic", "Laplacian of |x|^2", r.analytic, 4.0, 1e-12),
        Row::new("generator", "(E phi(B_t) - phi(x))/t", r.estimate)
            .reference(4.0)
            .sampled(r.n_paths, 1e-4, mcc)
            .verdict((r.estimate - 4.0).abs() <= tol, tol),
        Row::new("half_generator_rejected", "distance from the half-Laplacian value 2", r.estimate)
            .reference(2.0)
            .sampled(r.n_paths, 1e-4, mcc)
            .verdict((r.estimate - 2.0).abs() > tol, tol),
    ];
    Ok((rows, format!("{:.4} +- {:.4}", r.estimate, r.std_error)))
}

fn c5(o: &AcceptOptions) -> Outcome {
    let d = interval()?;
    let x = ChartPoint::x1(0.0);
    let spec = spectrum(&d, None)?;
    let s = spec.survival(0.5, &x)?;
    let times = sample_exit_times(
        &d,
        &x,
        &o.sim("c5"),
        PathBudget::new(o.paths(100_000)).with_bias(BiasControl::Extrapolate),
    )?;
    // from the center the exit probability before 1e-3 is below 1e-100,
    // and the series truncation bound is not met there
    let cdf = |t: f64| {
        if t < 1e-3 {
            0.0
        } else {
            spec.survival(t, &x).map(|s| 1.0 - s.raw).unwrap_or(f64::NAN)
        }
    };
    let sup = times.sup_distance(cdf);
    let rows = vec![
        exact_row("survival", "P(tau >= 0.5) from x=0", s.raw, 0.3708, 0.001),
        Row::new("ks", "sup |F_emp - (1 - survival)|", sup)
            .sampled(
                times.n_paths,
                1e-4,
                McColumns {
                    se_re: 0.0,
                    se_im: 0.0,
                    horizon_mass: times.horizon as f64 / times.n_paths as f64,
                },
            )
            .verdict(sup <= 0.01, 0.01),
    ];
    Ok((rows, format!("survival(0.5) {:.5}; sup distance {sup:.4}", s.raw)))
}

fn c6() -> Outcome {
    let mut rows = Vec::new();
    let models = [
        ManifoldModel::euclidean(2)?,
        ManifoldModel::hyperbolic_disk(),
        ManifoldModel::hyperbolic3(),
    ];
    let mut constants = Vec::new();
    for m in &models {
        let params = TailBoundParams::for_model(m);
        let short = check_short_bound(m, &params, &BoundGrid::short_time())?;
        let long = check_long_bound(m, f64::NAN, &BoundGrid::long_time())?;
        constants.push(format!("{} C={:.3} K={:.3}", m.name(), short.constant, long.constant));
        rows.push(bound_row("short", &m.name(), &short));
        rows.push(bound_row("long", &m.name(), &long));
        let pairs: Vec<(f64, f64)> = [0.02, 0.05, 0.1]
            .iter()
            .flat_map(|&t| [1.5, 2.0, 2.5, 3.0].map(|r| (t, r)))
            .collect();
        let fit = fit_tail_bound(m, &pairs, &params)?;
        rows.push(
            Row::new("tail_fit", m.name(), fit.fit.slope)
                .count(pairs.len() as u64)
                .passed(fit.fit.slope < 0.0 && fit.fit.r_squared > 0.999 && fit.report.pass)
                .note(format!(
                    "R^2 {:.6}; eta {:.4}; kappa {:.4}",
                    fit.fit.r_squared, fit.eta, fit.kappa
                )),
        );
    }
    let tail = tail_mass(&models[0], 0.1, 2.0)?;
    let exact = (-10f64).exp();
    let rel = (tail / exact - 1.0).abs();
    rows.push(
        Row::new("tail_spot", "euclidean2 t=0.1 R=2", tail)
            .reference(exact)
            .verdict(rel <= 1e-8, 1e-8)
            .note(format!("relative error {rel:.2e}")),
    );
    Ok((rows, constants.join("; ")))
}

fn c7(horizon: f64) -> Outcome {
    let mut rows = Vec::new();
    let mut worst = 0.0f64;
    for (m, tol) in [
        (ManifoldModel::euclidean(2)?, 1e-6),
        (ManifoldModel::hyperbolic3(), 1e-6),
        (ManifoldModel::hyperbolic_disk(), 1e-5),
    ] {
        for t in [0.1, 1.0, 5.0] {
            let mass = mass_conservation(&m, t)?;
            worst = worst.max((mass - 1.0).abs());
            rows.push(exact_row("mass", &format!("{} t={t}", m.name()), mass, 1.0, tol));
        }
    }
    rows.push(
        Row::new("horizon", "largest Monte Carlo horizon mass", horizon)
            .reference(0.0)
            .verdict(horizon == 0.0, 0.0),
    );
    Ok((rows, format!("max |mass - 1| {worst:.2e}; horizon mass {horizon}")))
}

fn c8() -> Outcome {
    let mut rows = Vec::new();
    let d = interval()?;
    let spec = spectrum(&d, None)?;
    let nodes: Vec<ChartPoint> = (0..20).map(|i| ChartPoint::x1(-1.0 + 2.0 * i as f64 / 19.0)).collect();
    let mut points = Vec::new();
    for t in [0.05, 0.2, 1.0] {
        for x in &nodes {
            for y in &nodes {
                points.push((t, *x, *y));
            }
        }
    }
    let dom = domination_check(&spec, &points)?;
    rows.push(bound_row("domination", "interval, 3 x 20 x 20", &dom));

    let times = [0.02, 0.04, 0.08];
    let small = small_time_exit_check(&spec, 1.0, &times, 5.0)?;
    rows.push(
        Row::new("small_time", "interval x=0 delta=1", small.beta_prime)
            .passed(small.pass)
            .note(format!(
                "slope {:.4}; R^2 {:.6}; gamma {:.3e}; beta {:.4}; gap R^2 {:.6}",
                small.exit_fit.slope, small.exit_fit.r_squared, small.gamma, small.beta, small.gap_fit.r_squared
            )),
    );

    let e2 = ManifoldModel::euclidean(2)?;
    let h2 = ManifoldModel::hyperbolic_disk();
    let balls = [
        ("euclidean disk R=1 delta=0.5", Domain::chart_disk(&e2, &ChartPoint::x2(0.0, 0.0), 1.0)?),
        ("hyperbolic ball R=1 delta=0.5", Domain::geodesic_ball(&h2, &ChartPoint::x2(0.0, 0.0), 1.0)?),
    ];
    let mut spreads = vec![small.uniformity_spread];
    for (label, ball) in balls {
        let s = spectrum(&ball, None)?;
        let r = small_time_exit_check(&s, 0.5, &times, 5.0)?;
        spreads.push(r.uniformity_spread);
        rows.push(
            Row::new("uniformity", label, r.uniformity_spread)
                .verdict(r.uniformity_spread <= 1e-12, 1e-12)
                .note(format!("P(tau<0.02) {:.6e}", r.exit_probability[0])),
        );
    }
    Ok((
        rows,
        format!(
            "max ratio {:.3}; beta' {:.4} (R^2 {:.6}); spread {:.1e}",
            dom.max_ratio,
            small.beta_prime,
            small.exit_fit.r_squared,
            spreads.iter().copied().fold(0.0, f64::max)
        ),
    ))
}

fn c9(o: &AcceptOptions) -> Outcome {
    let d = interval()?;
    let e1 = ManifoldModel::euclidean(1)?;
    let lambda = Complex64::new(1.0, 0.0);
    let grid = ChartGrid::cube(1, -1.0, 1.0, 21)?;
    // the exit-time bias of each node solves the same equation to leading
    // order, so the residual needs no extrapolation
    let field = field_on_grid(
        &d,
        lambda,
        &BoundaryData::constant(1.0),
        &grid,
        &o.sim("c9"),
        o.paths(1_000_000),
        BiasControl::None,
    )?;
    let report = residual_check(&field)?;
    let mut rows = vec![Row::new("residual", "interval 21 nodes, rms", report.rms)
        .sampled(
            field.n_paths_per_node,
            field.dt,
            McColumns {
                se_re: report.rms_noise,
                se_im: 0.0,
                horizon_mass: field.horizon_mass,
            },
        )
        .verdict(report.pass, report.threshold)
        .note(format!("max {:.4}; {} nodes", report.max_abs, report.nodes.len()))];

    // deterministic field: the stencil residual of the exact solution
    let mut hs = Vec::new();
    let mut res = Vec::new();
    for nodes in [11, 21, 41, 81] {
        let g = ChartGrid::cube(1, -1.0, 1.0, nodes)?;
        let values = (0..g.len())
            .map(|j| Some(Complex64::new(g.point(&[j]).coords()[0].cosh() / 1f64.cosh(), 0.0)))
            .collect();
        let exact = FieldGrid::exact(&e1, &g, lambda, values)?;
        let r = residual_check(&exact)?;
        hs.push(r.grid_spacing.ln());
        res.push(r.max_abs.ln());
    }
    let order = linear_fit(&hs, &res).map(|f| f.slope).unwrap_or(f64::NAN);
    rows.push(Row::new("order", "exact field residual order in h", order).reference(2.0).passed(order >= 1.8));
    Ok((
        rows,
        format!(
            "rms {:.4} <= {:.4}; observed order {order:.3}",
            report.rms, report.threshold
        ),
    ))
}

fn c10(o: &AcceptOptions) -> Outcome {
    let approach: Vec<f64> = (1..=5).map(|k| 1.0 - 0.5f64.powi(k)).collect();
    let budget = PathBudget::new(o.paths(100_000)).with_bias(BiasControl::Extrapolate);
    let mut rows = Vec::new();

    let e2 = ManifoldModel::euclidean(2)?;
    let disk = Domain::chart_disk(&e2, &ChartPoint::x2(0.0, 0.0), 1.0)?;
    let phi = BoundaryData::Fourier(cos_modes(1));
    let xi = ChartPoint::x2(1.0, 0.0);
    let rep = boundary_trace_check(&disk, Complex64::new(0.0, 0.0), &phi, &xi, &approach, &o.sim("c10a"), budget)?;
    for (s, e) in approach.iter().zip(&rep.estimates) {
        // harmonic extension of cos θ is r cos θ, so the exact gap is 1 - r
        rows.push(fk_row("disk", &format!("r={s}"), e, Complex64::new(*s, 0.0), 0.01));
    }
    rows.push(Row::new("disk_trace", "gap to phi(xi) at r=31/32", *rep.gaps.last().unwrap_or(&f64::NAN)).verdict(rep.pass, rep.final_tolerance));

    let d = interval()?;
    let rep1 = boundary_trace_check(
        &d,
        Complex64::new(1.0, 0.0),
        &BoundaryData::constant(1.0),
        &ChartPoint::x1(1.0),
        &approach,
        &o.sim("c10b"),
        budget,
    )?;
    for (s, e) in approach.iter().zip(&rep1.estimates) {
        rows.push(
            Row::new("interval", format!("u={s}"), e.mean.re)
                .reference(s.cosh() / 1f64.cosh())
                .sampled(e.n_paths, e.dt, mc(e)),
        );
    }
    rows.push(
        Row::new("interval_trace", "monotone approach to 1", *rep1.gaps.last().unwrap_or(&f64::NAN))
            .verdict(rep1.pass && rep1.monotone, rep1.final_tolerance),
    );
    Ok((
        rows,
        format!(
            "disk gaps {}; interval monotone {}",
            rep.gaps.iter().map(|g| format!("{g:.4}")).collect::<Vec<_>>().join(" "),
            rep1.monotone
        ),
    ))
}

fn c11(o: &AcceptOptions) -> Outcome {
    let d = interval()?;
    let r = markov_restart_check(
        &d,
        &ChartPoint::x1(0.0),
        Complex64::new(1.0, 0.0),
        &BoundaryData::constant(1.0),
        0.01,
        &o.sim("c11"),
        o.paths(100_000),
    )?;
    let rows = vec![
        Row::new("restart", "two-stage vs e^(lambda t) h", r.two_stage.re)
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
            .note(format!("gap {:.3e}", r.gap)),
        Row::new("early_exit", "P(tau < 0.01)", r.early_exit).verdict(r.early_exit <= 1e-4, 1e-4),
    ];
    Ok((rows, format!("gap {:.2e} <= {:.2e}; P(tau<t) {}", r.gap, r.tolerance, r.early_exit)))
}

fn c12(o: &AcceptOptions) -> Outcome {
    let d = interval()?;
    let e1 = ManifoldModel::euclidean(1)?;
    let lambda = Complex64::new(-2.6, 0.0);
    let x = ChartPoint::x1(0.0);
    let mut rows = Vec::new();
    let mut series = Vec::new();
    for t_max in [10.0, 20.0, 40.0] {
        // common random numbers: the horizons see the same paths
        let cfg = o.sim("c12").with_max_time(t_max);
        let a = estimate_abs_moment(&d, &x, lambda, &cfg, PathBudget::new(o.paths(100_000)))?;
        let exact = a
            .truncated_expectation
            .ok_or_else(|| Error::InvalidArgument("no truncated expectation for the interval".into()))?;
        series.push(exact);
        rows.push(
            Row::new("truncated", format!("T_max={t_max} series"), exact)
                .note(a.oracle_error.clone().unwrap_or_default()),
        );
        rows.push(
            Row::new("mc", format!("T_max={t_max} sample mean"), a.estimate.mean.re)
                .reference(exact)
                .sampled(a.estimate.n_paths, a.estimate.dt, mc(&a.estimate))
                .note(format!("mean tau {:.4}", a.estimate.mean_tau)),
        );
    }
    let ratios: Vec<f64> = series.windows(2).map(|w| w[1] / w[0]).collect();
    for (i, r) in ratios.iter().enumerate() {
        rows.push(
            Row::new("growth", format!("doubling {}", i + 1), *r)
                .reference(2.0)
                .passed(*r >= 2.0),
        );
    }
    let crossing = solve_radial_bvp(&e1, 1.0, lambda, Complex64::new(1.0, 0.0));
    let raised = matches!(crossing, Err(Error::EigenvalueCrossing { .. }));
    rows.push(
        Row::new("crossing", "oracle reports an eigenvalue crossing", if raised { 1.0 } else { 0.0 })
            .passed(raised)
            .note(match &crossing {
                Err(e) => e.to_string(),
                Ok(_) => "solved".into(),
            }),
    );
    Ok((
        rows,
        format!(
            "ratios {}; crossing raised {raised}",
            ratios.iter().map(|r| format!("{r:.2}")).collect::<Vec<_>>().join(", ")
        ),
    ))
}

fn c13() -> Outcome {
    let h2 = ManifoldModel::hyperbolic_disk();
    let limit = h2.lambda1();
    let radii = [2.0, 4.0, 8.0];
    let values = radii
        .iter()
        .map(|&r| principal_eigenvalue(&h2, r))
        .collect::<rfk_core::Result<Vec<_>>>()?;
    let mut rows: Vec<Row> = radii
        .iter()
        .zip(&values)
        .map(|(r, v)| Row::new("eigenvalue", format!("R={r}"), *v).reference(limit))
        .collect();
    // the bottom of the spectrum of -Δ on B_R, -λ1(B_R), decreases to 1/4
    let decreasing = values.windows(2).all(|w| -w[1] < -w[0]);
    let above = values.iter().all(|v| -v >= -limit);
    let gap = (values[2] - limit).abs();
    rows.push(Row::new("monotone", "-lambda1(B_R) decreasing in R", if decreasing { 1.0 } else { 0.0 }).passed(decreasing));
    rows.push(Row::new("mckean", "-lambda1(B_R) >= 1/4", if above { 1.0 } else { 0.0 }).passed(above));
    rows.push(Row::new("limit", "|lambda1(B_8) + 1/4|", gap).verdict(gap <= 0.02, 0.02));
    Ok((
        rows,
        format!(
            "lambda1 {}; gap at R=8 {gap:.4} (needs <= 0.02)",
            values.iter().map(|v| format!("{v:.5}")).collect::<Vec<_>>().join(", ")
        ),
    ))
}
