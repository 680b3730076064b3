//! Flat `key = value` experiment files with dotted section keys.
//!
//! ```text
//! # interval, λ = 1
//! experiment = estimate
//! model = euclidean1
//! domain.kind = interval
//! domain.radius = 1
//! lambda.re = 1
//! sim.dt = 1e-4
//! ```
//!
//! Blank lines and `#` comments are ignored. Keys are unique. The canonical
//! form lists `key = value` pairs sorted by key, one per line; its FNV-1a
//! hash identifies the run in every output row.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rfk_core::exitmc::{BiasControl, BoundaryData, Domain};
use rfk_core::oracle::FourierMode;
use rfk_core::pathsim::{fnv1a64, Scheme, SimConfig};
use rfk_core::{ChartPoint, Complex64, ManifoldModel};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigError {
    /// 1-based line of the offending entry, when it came from a file.
    pub line: Option<usize>,
    pub message: String,
}

impl ConfigError {
    pub fn new(message: impl Into<String>) -> Self {
        Self {
            line: None,
            message: message.into(),
        }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(l) => write!(f, "config line {l}: {}", self.message),
            None => write!(f, "config: {}", self.message),
        }
    }
}

impl std::error::Error for ConfigError {}

impl From<rfk_core::Error> for ConfigError {
    fn from(e: rfk_core::Error) -> Self {
        Self::new(e.to_string())
    }
}

/// Raw key-value entries.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Config {
    entries: BTreeMap<String, String>,
}

fn valid_key(key: &str) -> bool {
    !key.is_empty()
        && key.split('.').all(|part| {
            !part.is_empty() && part.chars().all(|c| c.is_ascii_alphanumeric() || c == '_')
        })
}

impl Config {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut entries = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let at = |message: String| ConfigError {
                line: Some(i + 1),
                message,
            };
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| at(format!("expected `key = value`, found `{line}`")))?;
            let (key, value) = (key.trim(), value.trim());
            if !valid_key(key) {
                return Err(at(format!("invalid key `{key}`")));
            }
            if value.is_empty() {
                return Err(at(format!("`{key}` has no value")));
            }
            if entries.insert(key.to_string(), value.to_string()).is_some() {
                return Err(at(format!("duplicate key `{key}`")));
            }
        }
        Ok(Self { entries })
    }

    pub fn set(&mut self, key: &str, value: impl Into<String>) {
        self.entries.insert(key.to_string(), value.into());
    }

    pub fn raw(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    pub fn canonical(&self) -> String {
        self.entries.iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }

    pub fn hash(&self) -> u64 {
        fnv1a64(self.canonical().as_bytes())
    }

    pub fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>, ConfigError>
    where
        T::Err: fmt::Display,
    {
        self.raw(key)
            .map(|v| {
                v.parse::<T>()
                    .map_err(|e| ConfigError::new(format!("`{key} = {v}`: {e}")))
            })
            .transpose()
    }

    pub fn get_or<T: FromStr>(&self, key: &str, default: T) -> Result<T, ConfigError>
    where
        T::Err: fmt::Display,
    {
        Ok(self.get(key)?.unwrap_or(default))
    }

    pub fn require<T: FromStr>(&self, key: &str) -> Result<T, ConfigError>
    where
        T::Err: fmt::Display,
    {
        self.get(key)?
            .ok_or_else(|| ConfigError::new(format!("missing required key `{key}`")))
    }

    /// Comma-separated reals.
    pub fn list(&self, key: &str) -> Result<Option<Vec<f64>>, ConfigError> {
        self.raw(key)
            .map(|v| {
                v.split(',')
                    .map(|s| {
                        s.trim()
                            .parse::<f64>()
                            .map_err(|e| ConfigError::new(format!("`{key}`: `{s}`: {e}")))
                    })
                    .collect()
            })
            .transpose()
    }

    pub fn list_or(&self, key: &str, default: &[f64]) -> Result<Vec<f64>, ConfigError> {
        Ok(self.list(key)?.unwrap_or_else(|| default.to_vec()))
    }
}

/// Experiment kinds, one per command.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Experiment {
    Estimate,
    Field,
    ExitDist,
    KernelCheck,
    DirichletCheck,
    Calibrate,
    Restart,
    Boundary,
    EigenScan,
    Accept,
}

impl Experiment {
    pub const ALL: [Experiment; 10] = [
        Experiment::Estimate,
        Experiment::Field,
        Experiment::ExitDist,
        Experiment::KernelCheck,
        Experiment::DirichletCheck,
        Experiment::Calibrate,
        Experiment::Restart,
        Experiment::Boundary,
        Experiment::EigenScan,
        Experiment::Accept,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::Estimate => "estimate",
            Experiment::Field => "field",
            Experiment::ExitDist => "exitdist",
            Experiment::KernelCheck => "kernelcheck",
            Experiment::DirichletCheck => "dirichletcheck",
            Experiment::Calibrate => "calibrate",
            Experiment::Restart => "restart",
            Experiment::Boundary => "boundary",
            Experiment::EigenScan => "eigenscan",
            Experiment::Accept => "accept",
        }
    }
}

impl FromStr for Experiment {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "verify-kernels" => Ok(Experiment::KernelCheck),
            _ => Experiment::ALL
                .into_iter()
                .find(|e| e.name() == s)
                .ok_or_else(|| format!("unknown experiment `{s}`")),
        }
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

const KNOWN_SECTIONS: [&str; 12] = [
    "experiment",
    "model",
    "domain",
    "lambda",
    "phi",
    "sim",
    "mc",
    "point",
    "grid",
    "output",
    "check",
    "accept",
];

/// Typed view of a config file. Command-specific keys (`check.*`,
/// `accept.*`) stay in `raw` and are read by the commands themselves.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub model: ManifoldModel,
    pub domain: Option<Domain>,
    pub lambda: Complex64,
    pub phi: BoundaryData,
    pub sim: SimConfig,
    pub n_paths: u64,
    pub bias: BiasControl,
    pub point: Option<ChartPoint>,
    pub grid_nodes: usize,
    pub output: Option<String>,
    pub raw: Config,
}

fn point_from(values: &[f64], what: &str) -> Result<ChartPoint, ConfigError> {
    ChartPoint::new(values).map_err(|e| ConfigError::new(format!("{what}: {e}")))
}

impl ExperimentConfig {
    /// Builds the typed view; `experiment` may be supplied by the command
    /// line instead of the file.
    pub fn from_config(raw: Config, experiment: Option<Experiment>) -> Result<Self, ConfigError> {
        for key in raw.keys() {
            let section = key.split('.').next().unwrap_or_default();
            if !KNOWN_SECTIONS.contains(&section) {
                return Err(ConfigError::new(format!("unknown key `{key}`")));
            }
        }
        let experiment = match (raw.get::<Experiment>("experiment")?, experiment) {
            (Some(a), Some(b)) if a != b => {
                return Err(ConfigError::new(format!(
                    "file declares experiment `{a}` but `{b}` was requested"
                )))
            }
            (Some(a), _) => a,
            (None, Some(b)) => b,
            (None, None) => return Err(ConfigError::new("no experiment given")),
        };
        let model = ManifoldModel::from_name(&raw.get_or("model", "euclidean1".to_string())?)?;
        let domain = Self::domain(&raw, &model)?;
        let lambda = Complex64::new(raw.get_or("lambda.re", 0.0)?, raw.get_or("lambda.im", 0.0)?);
        let phi = Self::phi(&raw)?;
        let mut sim = SimConfig::new(raw.get_or("sim.dt", 1e-4)?, raw.get_or("sim.seed", 0u64)?)
            .with_scheme(raw.get_or("sim.scheme", Scheme::EulerMaruyama)?)
            .with_max_time(raw.get_or("sim.max_time", 40.0)?);
        sim.refine_iters = raw.get_or("sim.refine_iters", 30u32)?;
        sim.validate()?;
        let n_paths = raw.get_or("mc.paths", 100_000u64)?;
        if n_paths == 0 {
            return Err(ConfigError::new("mc.paths must be at least 1"));
        }
        let bias = raw.get_or("mc.bias", BiasControl::Extrapolate)?;
        let point = raw.list("point")?.map(|p| point_from(&p, "point")).transpose()?;
        let grid_nodes = raw.get_or("grid.nodes", 21usize)?;
        let output = raw.get("output")?;
        Ok(Self {
            experiment,
            model,
            domain,
            lambda,
            phi,
            sim,
            n_paths,
            bias,
            point,
            grid_nodes,
            output,
            raw,
        })
    }

    fn domain(raw: &Config, model: &ManifoldModel) -> Result<Option<Domain>, ConfigError> {
        let Some(kind) = raw.get::<String>("domain.kind")? else {
            return Ok(None);
        };
        let radius: f64 = raw.require("domain.radius")?;
        let center = match raw.list("domain.center")? {
            Some(c) => point_from(&c, "domain.center")?,
            None => rfk_core::pathsim::base_point(model),
        };
        let domain = match kind.as_str() {
            "interval" => {
                if model.dim() != 1 {
                    return Err(ConfigError::new("an interval needs a one-dimensional model"));
                }
                Domain::interval(radius)?
            }
            "ball" => Domain::geodesic_ball(model, &center, radius)?,
            "disk" => Domain::chart_disk(model, &center, radius)?,
            "annulus" => Domain::chart_annulus(model, &center, raw.require("domain.inner")?, radius)?,
            other => return Err(ConfigError::new(format!("unknown domain kind `{other}`"))),
        };
        Ok(Some(domain))
    }

    fn phi(raw: &Config) -> Result<BoundaryData, ConfigError> {
        let kind = raw.get_or("phi", "constant".to_string())?;
        Ok(match kind.as_str() {
            "constant" => BoundaryData::Constant(Complex64::new(
                raw.get_or("phi.value", 1.0)?,
                raw.get_or("phi.value_im", 0.0)?,
            )),
            "cos" => BoundaryData::Fourier(cos_modes(raw.get_or("phi.order", 1i32)?)),
            "bump" => BoundaryData::Bump {
                center: raw.get_or("phi.center", 0.0)?,
                half_width: raw.require("phi.half_width")?,
                height: Complex64::new(raw.get_or("phi.height", 1.0)?, 0.0),
            },
            other => return Err(ConfigError::new(format!("unknown boundary data `{other}`"))),
        })
    }

    pub fn require_domain(&self) -> Result<&Domain, ConfigError> {
        self.domain
            .as_ref()
            .ok_or_else(|| ConfigError::new(format!("`{}` needs domain.kind", self.experiment)))
    }

    /// `point`, or the domain center.
    pub fn point_or_center(&self) -> Result<ChartPoint, ConfigError> {
        match (self.point, &self.domain) {
            (Some(p), _) => Ok(p),
            (None, Some(d)) => Ok(d.chart_center()),
            (None, None) => Ok(rfk_core::pathsim::base_point(&self.model)),
        }
    }

    pub fn hash(&self) -> u64 {
        self.raw.hash()
    }
}

/// `cos(kθ)` as a pair of exponential modes.
pub fn cos_modes(k: i32) -> Vec<FourierMode> {
    match BoundaryData::cos(k) {
        BoundaryData::Fourier(m) => m,
        _ => unreachable!("cos builds a Fourier series"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn canonical_form_is_sorted_and_stable() {
        let a = Config::parse("sim.dt = 1e-4\n# comment\nmodel=euclidean1\n\nexperiment = estimate\n").unwrap();
        let b = Config::parse(&a.canonical()).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.canonical(), "experiment = estimate\nmodel = euclidean1\nsim.dt = 1e-4\n");
        assert_eq!(a.hash(), b.hash());
    }

    #[test]
    fn malformed_lines_are_rejected_with_line_numbers() {
        let e = Config::parse("model = euclidean1\nnot a pair\n").unwrap_err();
        assert_eq!(e.line, Some(2));
        assert!(Config::parse("a = 1\na = 2\n").is_err());
        assert!(Config::parse("bad key = 1\n").is_err());
        assert!(Config::parse("a =\n").is_err());
    }

    #[test]
    fn typed_view() {
        let raw = Config::parse(
            "experiment = estimate\nmodel = euclidean1\ndomain.kind = interval\ndomain.radius = 1\n\
             lambda.re = 1\nlambda.im = 0.5\nmc.paths = 10\nsim.dt = 1e-3\n",
        )
        .unwrap();
        let c = ExperimentConfig::from_config(raw, None).unwrap();
        assert_eq!(c.experiment, Experiment::Estimate);
        assert_eq!(c.lambda, Complex64::new(1.0, 0.5));
        assert_eq!(c.n_paths, 10);
        assert_eq!(c.point_or_center().unwrap().coords(), &[0.0]);
    }

    #[test]
    fn unknown_keys_and_bad_values_fail() {
        let bad = |text: &str| ExperimentConfig::from_config(Config::parse(text).unwrap(), Some(Experiment::Estimate));
        assert!(bad("colour = red\n").is_err());
        assert!(bad("sim.dt = fast\n").is_err());
        assert!(bad("model = sphere\n").is_err());
        assert!(bad("domain.kind = interval\ndomain.radius = 1\nmodel = euclidean2\n").is_err());
        assert!(bad("experiment = field\n").is_err());
    }
}
