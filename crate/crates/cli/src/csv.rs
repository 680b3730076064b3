//! Result tables and their CSV form.
//!
//! Line 1 is the format tag, line 2 the column names; floats are written with
//! 17 significant digits so baselines round-trip exactly. Every row carries
//! the run identity (`config_hash`, `master_seed`, `n`, `dt`) and the Monte
//! Carlo columns `se_re`, `se_im`, `horizon_mass`, left empty on
//! deterministic rows.

use std::fmt::Write as _;
use std::io;
use std::path::Path;

pub const FORMAT_TAG: &str = "# riemann-fk v1";

pub const COLUMNS: [&str; 16] = [
    "experiment",
    "check",
    "label",
    "config_hash",
    "master_seed",
    "n",
    "dt",
    "value_re",
    "value_im",
    "reference",
    "se_re",
    "se_im",
    "horizon_mass",
    "tolerance",
    "pass",
    "note",
];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McColumns {
    pub se_re: f64,
    pub se_im: f64,
    pub horizon_mass: f64,
}

/// One output row.
#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub check: String,
    pub label: String,
    pub n: Option<u64>,
    pub dt: Option<f64>,
    pub value_re: f64,
    pub value_im: Option<f64>,
    pub reference: Option<f64>,
    pub mc: Option<McColumns>,
    pub tolerance: Option<f64>,
    pub pass: Option<bool>,
    pub note: String,
}

impl Row {
    pub fn new(check: impl Into<String>, label: impl Into<String>, value: f64) -> Self {
        Self {
            check: check.into(),
            label: label.into(),
            n: None,
            dt: None,
            value_re: value,
            value_im: None,
            reference: None,
            mc: None,
            tolerance: None,
            pass: None,
            note: String::new(),
        }
    }

    pub fn imag(mut self, v: f64) -> Self {
        self.value_im = Some(v);
        self
    }

    pub fn reference(mut self, r: f64) -> Self {
        self.reference = Some(r);
        self
    }

    pub fn sampled(mut self, n: u64, dt: f64, mc: McColumns) -> Self {
        self.n = Some(n);
        self.dt = Some(dt);
        self.mc = Some(mc);
        self
    }

    pub fn count(mut self, n: u64) -> Self {
        self.n = Some(n);
        self
    }

    pub fn step(mut self, dt: f64) -> Self {
        self.dt = Some(dt);
        self
    }

    pub fn verdict(mut self, pass: bool, tolerance: f64) -> Self {
        self.pass = Some(pass);
        self.tolerance = Some(tolerance);
        self
    }

    pub fn passed(mut self, pass: bool) -> Self {
        self.pass = Some(pass);
        self
    }

    pub fn note(mut self, note: impl Into<String>) -> Self {
        self.note = note.into();
        self
    }
}

/// Rows of one run, sharing its identity columns.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub experiment: String,
    pub config_hash: u64,
    pub master_seed: u64,
    pub rows: Vec<Row>,
}

pub fn float(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        // `inf`, `-inf`, `NaN`
        format!("{v}")
    }
}

fn opt_float(v: Option<f64>) -> String {
    v.map(float).unwrap_or_default()
}

/// Notes are free text; commas and quotes are escaped RFC 4180 style.
fn text(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

impl Table {
    pub fn new(experiment: impl Into<String>, config_hash: u64, master_seed: u64) -> Self {
        Self {
            experiment: experiment.into(),
            config_hash,
            master_seed,
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Row) {
        self.rows.push(row);
    }

    /// Rows with a verdict all pass.
    pub fn all_pass(&self) -> bool {
        self.rows.iter().all(|r| r.pass != Some(false))
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        out.push_str(FORMAT_TAG);
        out.push('\n');
        out.push_str(&COLUMNS.join(","));
        out.push('\n');
        for r in &self.rows {
            let mc = r.mc;
            let fields = [
                text(&self.experiment),
                text(&r.check),
                text(&r.label),
                format!("{:016x}", self.config_hash),
                self.master_seed.to_string(),
                r.n.map(|n| n.to_string()).unwrap_or_default(),
                opt_float(r.dt),
                float(r.value_re),
                opt_float(r.value_im),
                opt_float(r.reference),
                opt_float(mc.map(|m| m.se_re)),
                opt_float(mc.map(|m| m.se_im)),
                opt_float(mc.map(|m| m.horizon_mass)),
                opt_float(r.tolerance),
                r.pass.map(|p| if p { "PASS" } else { "FAIL" }).unwrap_or_default().to_string(),
                text(&r.note),
            ];
            let _ = writeln!(out, "{}", fields.join(","));
        }
        out
    }

    /// Writes atomically: a failed run leaves no partial file.
    pub fn write(&self, path: &Path) -> io::Result<()> {
        let tmp = path.with_extension("csv.partial");
        std::fs::write(&tmp, self.render())?;
        std::fs::rename(&tmp, path)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_contract() {
        let mut t = Table::new("estimate", 0xabc, 7);
        t.push(
            Row::new("fk", "x=0", 0.1)
                .sampled(10, 1e-4, McColumns { se_re: 0.5, se_im: 0.0, horizon_mass: 0.0 })
                .note("a, \"b\""),
        );
        let s = t.render();
        let mut lines = s.lines();
        assert_eq!(lines.next(), Some(FORMAT_TAG));
        assert_eq!(lines.next().unwrap().split(',').count(), COLUMNS.len());
        let row = lines.next().unwrap();
        assert!(row.starts_with("estimate,fk,x=0,0000000000000abc,7,10,1.0000000000000000e-4,1.0000000000000001e-1,"));
        assert!(row.ends_with(",\"a, \"\"b\"\"\""));
    }

    #[test]
    fn floats_round_trip() {
        for v in [0.1, 1.0 / 3.0, 6.412_570_9e-300, -2.5e17] {
            assert_eq!(float(v).parse::<f64>().unwrap(), v);
        }
    }
}
