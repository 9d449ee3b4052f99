//! Scenario configuration: a single JSON document per run.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::defaults;
use crate::error::{Error, Result};
use crate::spectrum::SpectrumSpec;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    /// Absolute numerical slack granted when comparing a quantity to its bound.
    #[serde(default = "default_slack")]
    pub slack: f64,
    /// Admissible extrapolated tail share for series criteria.
    #[serde(default = "default_criterion_tol")]
    pub criterion_tol: f64,
}

fn default_slack() -> f64 {
    1e-6
}

fn default_criterion_tol() -> f64 {
    defaults::CRITERION_TAIL_TOL
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            slack: default_slack(),
            criterion_tol: default_criterion_tol(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default = "default_dir")]
    pub dir: PathBuf,
    #[serde(default)]
    pub format: Format,
}

fn default_dir() -> PathBuf {
    PathBuf::from("out")
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            dir: default_dir(),
            format: Format::Csv,
        }
    }
}

/// Heat-equation parameter grid for the phase diagram.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepGrid {
    pub d: Vec<usize>,
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default = "default_name")]
    pub name: String,
    pub spectrum: SpectrumSpec,
    #[serde(default)]
    pub t_grid: Vec<f64>,
    /// Sparse initial coefficients keyed by 1-based mode index.
    #[serde(default)]
    pub x0: BTreeMap<String, f64>,
    #[serde(default)]
    pub y0: BTreeMap<String, f64>,
    #[serde(default = "default_alpha_m")]
    pub alpha_m: f64,
    #[serde(default = "default_truncation")]
    pub truncation_n: usize,
    #[serde(default = "default_replicates")]
    pub mc_replicates: usize,
    #[serde(default)]
    pub master_seed: u64,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub output: OutputConfig,
    #[serde(default)]
    pub sweep: Option<SweepGrid>,
    /// Modes enumerated by series criteria.
    #[serde(default = "default_n_max")]
    pub n_max: usize,
    /// Modes scanned for sup-type constants.
    #[serde(default = "default_k_max")]
    pub k_max: usize,
    /// Modes whose one-dimensional laws are resolved on a density grid.
    #[serde(default = "default_exact_modes")]
    pub exact_modes: usize,
}

fn default_name() -> String {
    "scenario".into()
}
fn default_alpha_m() -> f64 {
    0.5
}
fn default_truncation() -> usize {
    64
}
fn default_replicates() -> usize {
    10_000
}
fn default_n_max() -> usize {
    defaults::CRITERION_N_MAX
}
fn default_k_max() -> usize {
    defaults::BOUND_K_MAX
}
fn default_exact_modes() -> usize {
    8
}

fn parse_key(key: &str, field: &str) -> Result<usize> {
    match key.trim().parse::<usize>() {
        Ok(k) if k >= 1 => Ok(k),
        _ => Err(Error::Config(format!(
            "{field}: key {key:?} is not a 1-based mode index"
        ))),
    }
}

impl ScenarioConfig {
    /// Minimal configuration around a spectrum, with every other field at its default.
    pub fn new(spectrum: SpectrumSpec) -> Self {
        Self {
            name: default_name(),
            spectrum,
            t_grid: Vec::new(),
            x0: BTreeMap::new(),
            y0: BTreeMap::new(),
            alpha_m: default_alpha_m(),
            truncation_n: default_truncation(),
            mc_replicates: default_replicates(),
            master_seed: 0,
            tolerances: Tolerances::default(),
            output: OutputConfig::default(),
            sweep: None,
            n_max: default_n_max(),
            k_max: default_k_max(),
            exact_modes: default_exact_modes(),
        }
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json_str(&text)
    }

    /// Modes actually carried: the truncation, cut to the spectrum length.
    pub fn modes_in_use(&self) -> usize {
        self.spectrum.len().map_or(self.truncation_n, |n| n.min(self.truncation_n))
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Config(msg));
        for (i, w) in self.t_grid.windows(2).enumerate() {
            if !(w[1] > w[0]) {
                return fail(format!("t_grid: entry {} ({}) does not exceed the previous one", i + 1, w[1]));
            }
        }
        if let Some(t) = self.t_grid.iter().find(|t| !(**t > 0.0 && t.is_finite())) {
            return fail(format!("t_grid: {t} is not a positive finite time"));
        }
        if !(self.alpha_m > 0.0 && self.alpha_m <= 1.0) {
            return fail(format!("alpha_m: {} is outside (0, 1]", self.alpha_m));
        }
        if self.truncation_n == 0 {
            return fail("truncation_n: must be positive".into());
        }
        if self.n_max < 10 || self.k_max == 0 {
            return fail("n_max must be at least 10 and k_max positive".into());
        }
        if !(self.tolerances.slack > 0.0) {
            return fail(format!("tolerances.slack: {} is not positive", self.tolerances.slack));
        }
        if !(self.tolerances.criterion_tol > 0.0) {
            return fail(format!(
                "tolerances.criterion_tol: {} is not positive",
                self.tolerances.criterion_tol
            ));
        }
        let limit = self.modes_in_use();
        for (field, map) in [("x0", &self.x0), ("y0", &self.y0)] {
            for (key, value) in map {
                let k = parse_key(key, field)?;
                if k > limit {
                    return fail(format!("{field}: mode {k} lies beyond the truncation ({limit} modes)"));
                }
                if !value.is_finite() {
                    return fail(format!("{field}: coefficient of mode {k} is not finite"));
                }
            }
        }
        if let Some(s) = &self.sweep {
            if s.d.is_empty() || s.alpha.is_empty() || s.beta.is_empty() {
                return fail("sweep: d, alpha and beta lists must be non-empty".into());
            }
            if let Some(a) = s.alpha.iter().find(|a| !(**a > 0.0 && **a < 2.0)) {
                return fail(format!("sweep.alpha: {a} is outside (0, 2)"));
            }
            if s.d.contains(&0) {
                return fail("sweep.d: dimensions must be positive".into());
            }
        }
        Ok(())
    }

    fn dense(map: &BTreeMap<String, f64>, field: &str) -> Result<Vec<f64>> {
        let mut out = Vec::new();
        for (key, value) in map {
            let k = parse_key(key, field)?;
            if out.len() < k {
                out.resize(k, 0.0);
            }
            out[k - 1] = *value;
        }
        Ok(out)
    }

    /// `x0` as a dense vector in enumeration order.
    pub fn x0_vec(&self) -> Result<Vec<f64>> {
        Self::dense(&self.x0, "x0")
    }

    pub fn y0_vec(&self) -> Result<Vec<f64>> {
        Self::dense(&self.y0, "y0")
    }

    /// SHA-256 of the canonical JSON form of the effective configuration.
    /// The output section is left out: where results go does not change them.
    pub fn sha256(&self) -> String {
        let mut inputs = self.clone();
        inputs.output = OutputConfig::default();
        let canonical = serde_json::to_vec(&inputs).expect("configuration serializes");
        Sha256::digest(&canonical).iter().map(|b| format!("{b:02x}")).collect()
    }
}
