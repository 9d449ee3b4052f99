//! Run reports: comparison rows, phase-diagram cells and their file forms.
//!
//! Data files carry no timestamps so identical inputs give identical bytes;
//! wall time goes to a separate `.meta.json` file.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::ser::SerializeMap;
use serde::{Serialize, Serializer};

use super::config::Format;
use crate::bounds::serialize_f64_or_inf;
use crate::criteria::Verdict;
use crate::error::Result;

fn serialize_extra<S: Serializer>(map: &BTreeMap<String, f64>, s: S) -> std::result::Result<S::Ok, S::Error> {
    struct Num(f64);
    impl Serialize for Num {
        fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
            serialize_f64_or_inf(&self.0, s)
        }
    }
    let mut m = s.serialize_map(Some(map.len()))?;
    for (k, v) in map {
        m.serialize_entry(k, &Num(*v))?;
    }
    m.end()
}

/// One comparison of a computed quantity with its bound.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Row {
    pub t: f64,
    pub mode: Option<usize>,
    pub quantity: String,
    pub value: f64,
    #[serde(serialize_with = "serialize_f64_or_inf")]
    pub bound: f64,
    pub satisfied: bool,
    pub slack: f64,
    #[serde(serialize_with = "serialize_extra")]
    pub extra: BTreeMap<String, f64>,
}

impl Row {
    /// `satisfied` is `value ≤ bound + slack`.
    pub fn new(t: f64, mode: Option<usize>, quantity: &str, value: f64, bound: f64, slack: f64) -> Self {
        Self {
            t,
            mode,
            quantity: quantity.into(),
            value,
            bound,
            satisfied: value <= bound + slack,
            slack,
            extra: BTreeMap::new(),
        }
    }

    pub fn with(mut self, key: &str, value: f64) -> Self {
        self.extra.insert(key.into(), value);
        self
    }

    /// Recomputes `satisfied` from the stored numbers.
    pub fn recheck(&self) -> bool {
        self.value <= self.bound + self.slack
    }
}

/// One `(d, α, β)` cell of the heat-equation phase diagram.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PhaseCell {
    pub d: usize,
    pub alpha: f64,
    pub beta: f64,
    pub alpha_m: f64,
    /// `2/α - β - d/α`; positive when the closed-form threshold holds.
    pub margin: f64,
    pub threshold_met: bool,
    pub state_space: Verdict,
    pub s2: Verdict,
    pub s_alpha: Verdict,
    pub fitted_exponent: Option<f64>,
    pub conclusive: bool,
    /// Agreement of the conclusive numeric verdicts with the threshold.
    pub agrees: Option<bool>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunReport {
    pub experiment: String,
    pub config_sha256: String,
    pub version: String,
    pub master_seed: u64,
    pub notes: Vec<String>,
    pub rows: Vec<Row>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub phase: Vec<PhaseCell>,
    #[serde(skip)]
    pub wall_time_s: f64,
}

fn fmt_num(v: f64) -> String {
    if v.is_finite() {
        format!("{v}")
    } else if v.is_nan() {
        "nan".into()
    } else if v > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

fn fmt_verdict(v: Verdict) -> &'static str {
    match v {
        Verdict::Finite => "finite",
        Verdict::Divergent => "divergent",
        Verdict::Inconclusive => "inconclusive",
    }
}

impl RunReport {
    pub fn new(experiment: &str, config_sha256: String, master_seed: u64) -> Self {
        Self {
            experiment: experiment.into(),
            config_sha256,
            version: env!("CARGO_PKG_VERSION").into(),
            master_seed,
            notes: Vec::new(),
            rows: Vec::new(),
            phase: Vec::new(),
            wall_time_s: 0.0,
        }
    }

    /// Rows whose quantity exceeds the bound by more than the slack.
    pub fn violations(&self) -> Vec<&Row> {
        self.rows.iter().filter(|r| !r.satisfied).collect()
    }

    pub fn disagreements(&self) -> Vec<&PhaseCell> {
        self.phase.iter().filter(|c| c.agrees == Some(false)).collect()
    }

    fn header(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# experiment: {}", self.experiment);
        let _ = writeln!(out, "# config_sha256: {}", self.config_sha256);
        let _ = writeln!(out, "# version: {}", self.version);
        let _ = writeln!(out, "# master_seed: {}", self.master_seed);
        for n in &self.notes {
            let _ = writeln!(out, "# note: {n}");
        }
        out
    }

    /// Rows as CSV with a `#` metadata header; extra keys become trailing columns.
    pub fn to_csv(&self) -> String {
        let mut out = self.header();
        if !self.phase.is_empty() {
            out.push_str("d,alpha,beta,alpha_m,margin,threshold_met,state_space,s2,s_alpha,fitted_exponent,conclusive,agrees\n");
            for c in &self.phase {
                let _ = writeln!(
                    out,
                    "{},{},{},{},{},{},{},{},{},{},{},{}",
                    c.d,
                    fmt_num(c.alpha),
                    fmt_num(c.beta),
                    fmt_num(c.alpha_m),
                    fmt_num(c.margin),
                    c.threshold_met,
                    fmt_verdict(c.state_space),
                    fmt_verdict(c.s2),
                    fmt_verdict(c.s_alpha),
                    c.fitted_exponent.map_or(String::new(), fmt_num),
                    c.conclusive,
                    c.agrees.map_or(String::new(), |a| a.to_string()),
                );
            }
            return out;
        }
        let mut keys: Vec<&String> = self.rows.iter().flat_map(|r| r.extra.keys()).collect();
        keys.sort();
        keys.dedup();
        out.push_str("t,mode,quantity,value,bound,satisfied,slack");
        for k in &keys {
            out.push(',');
            out.push_str(k);
        }
        out.push('\n');
        for r in &self.rows {
            let _ = write!(
                out,
                "{},{},{},{},{},{},{}",
                fmt_num(r.t),
                r.mode.map_or(String::new(), |m| m.to_string()),
                r.quantity,
                fmt_num(r.value),
                fmt_num(r.bound),
                r.satisfied,
                fmt_num(r.slack)
            );
            for k in &keys {
                out.push(',');
                if let Some(v) = r.extra.get(*k) {
                    out.push_str(&fmt_num(*v));
                }
            }
            out.push('\n');
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// Writes `<experiment>.{csv,json}` and `<experiment>.meta.json` into `dir`.
    pub fn write(&self, dir: &Path, format: Format) -> Result<Vec<PathBuf>> {
        std::fs::create_dir_all(dir)?;
        let (ext, body) = match format {
            Format::Csv => ("csv", self.to_csv()),
            Format::Json => ("json", self.to_json()),
        };
        let data = dir.join(format!("{}.{ext}", self.experiment));
        std::fs::write(&data, body)?;
        let stamp = std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        let meta = serde_json::json!({
            "experiment": self.experiment,
            "config_sha256": self.config_sha256,
            "version": self.version,
            "master_seed": self.master_seed,
            "wall_time_s": self.wall_time_s,
            "finished_unix": stamp,
        });
        let meta_path = dir.join(format!("{}.meta.json", self.experiment));
        std::fs::write(&meta_path, serde_json::to_string_pretty(&meta)?)?;
        Ok(vec![data, meta_path])
    }
}
