//! Configuration files (JSON or TOML, chosen by extension).
//!
//! ```toml
//! [system]
//! s = 3
//! gamma_db = 5.0
//! sigma2_dbm = -70.0
//!
//! [experiments.my-sweep]
//! problem = "power-min"
//! sweep = "gamma_db"
//! values = [0.0, 5.0, 10.0]
//! trials = 20
//! ```
//!
//! Every `SystemConfig` field is accepted under its own name in SI units;
//! `*_db` / `*_dbm` variants are converted.

use std::collections::BTreeMap;
use std::path::Path;

use serde::Deserialize;

use super::experiment::{ExperimentSpec, Problem, Scheme, SweepParam};
use crate::reflection::{CircuitParams, FrequencyPlan, SweepSpec};
use crate::scenario::{db_to_linear, dbm_to_watts, SystemConfig};
use crate::{Error, Result};

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemSection {
    pub s: Option<usize>,
    pub k: Option<usize>,
    pub nt: Option<usize>,
    pub m: Option<usize>,
    pub sigma2: Option<f64>,
    pub sigma2_dbm: Option<f64>,
    pub gamma: Option<f64>,
    pub gamma_db: Option<f64>,
    pub power: Option<f64>,
    pub power_db: Option<f64>,
    pub l: Option<f64>,
    pub d: Option<f64>,
    pub c0: Option<f64>,
    pub c0_db: Option<f64>,
    pub d0: Option<f64>,
    pub alpha_bi: Option<f64>,
    pub alpha_iu: Option<f64>,
    pub alpha_bu: Option<f64>,
    pub seed: Option<u64>,
    pub frequencies: Option<FrequencyPlan>,
    pub circuit: Option<CircuitParams>,
    pub sweep: Option<SweepSpec>,
    pub redraw_users: Option<bool>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSection {
    pub problem: Problem,
    #[serde(default)]
    pub sweep: SweepParam,
    #[serde(default)]
    pub values: Vec<f64>,
    pub trials: Option<usize>,
    pub schemes: Option<Vec<Scheme>>,
    /// Serve the whole surface from this BS in the no-selection baseline
    /// instead of trying every BS.
    pub no_selection_bs: Option<usize>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    #[serde(default)]
    pub system: SystemSection,
    #[serde(default)]
    pub experiments: BTreeMap<String, ExperimentSection>,
}

fn pick(linear: Option<f64>, log: Option<f64>, conv: fn(f64) -> f64, name: &str) -> Result<Option<f64>> {
    match (linear, log) {
        (Some(_), Some(_)) => Err(Error::Config(format!("both `{name}` and its dB form given"))),
        (Some(x), None) => Ok(Some(x)),
        (None, Some(x)) => Ok(Some(conv(x))),
        (None, None) => Ok(None),
    }
}

impl SystemSection {
    /// Overlays the given fields on `base`.
    pub fn apply(&self, base: &SystemConfig) -> Result<SystemConfig> {
        let mut c = base.clone();
        macro_rules! set {
            ($($f:ident),*) => { $( if let Some(v) = self.$f.clone() { c.$f = v; } )* };
        }
        set!(s, k, nt, m, l, d, d0, alpha_bi, alpha_iu, alpha_bu, seed, frequencies, circuit, sweep, redraw_users);
        if let Some(v) = pick(self.sigma2, self.sigma2_dbm, dbm_to_watts, "sigma2")? {
            c.sigma2 = v;
        }
        if let Some(v) = pick(self.gamma, self.gamma_db, db_to_linear, "gamma")? {
            c.gamma = v;
        }
        if let Some(v) = pick(self.power, self.power_db, db_to_linear, "power")? {
            c.power = v;
        }
        if let Some(v) = pick(self.c0, self.c0_db, db_to_linear, "c0")? {
            c.c0 = v;
        }
        c.validate()?;
        Ok(c)
    }
}

impl ExperimentSection {
    pub fn to_spec(&self, name: &str) -> ExperimentSpec {
        let mut spec = ExperimentSpec::new(name, self.problem, self.sweep, self.values.clone());
        if let Some(t) = self.trials {
            spec.trials = t;
        }
        if let Some(s) = &self.schemes {
            spec.schemes = s.clone();
        }
        spec.no_selection_bs = self.no_selection_bs;
        spec
    }
}

/// Parses a JSON (`.json`) or TOML (anything else) configuration file.
pub fn parse_config(text: &str, path: &Path) -> Result<ConfigFile> {
    let is_json = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"));
    let parse_err = |msg: String| Error::Parse { path: path.to_path_buf(), msg };
    if is_json {
        serde_json::from_str(text).map_err(|e| parse_err(e.to_string()))
    } else {
        toml::from_str(text).map_err(|e| parse_err(e.to_string()))
    }
}

pub fn load_config(path: &Path) -> Result<ConfigFile> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io { path: path.to_path_buf(), source: e })?;
    parse_config(&text, path)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn toml_and_json_agree() {
        let toml_text = r#"
            [system]
            s = 2
            gamma_db = 10.0
            sigma2_dbm = -70.0
            frequencies = [2.605e9, 2.345e9]

            [experiments.quick]
            problem = "sum-rate"
            sweep = "power_db"
            values = [-5.0]
            trials = 2
            schemes = ["proposed", "no_irs"]
        "#;
        let json_text = r#"{
            "system": {"s": 2, "gamma_db": 10.0, "sigma2_dbm": -70.0, "frequencies": [2.605e9, 2.345e9]},
            "experiments": {"quick": {"problem": "sum-rate", "sweep": "power_db", "values": [-5.0],
                                       "trials": 2, "schemes": ["proposed", "no_irs"]}}
        }"#;
        let a = parse_config(toml_text, Path::new("a.toml")).unwrap();
        let b = parse_config(json_text, Path::new("a.json")).unwrap();
        let ca = a.system.apply(&SystemConfig::default()).unwrap();
        let cb = b.system.apply(&SystemConfig::default()).unwrap();
        assert_eq!(ca, cb);
        assert_eq!(ca.s, 2);
        assert!((ca.gamma - 10.0).abs() < 1e-12);
        assert!((ca.sigma2 - 1e-10).abs() < 1e-22);
        let spec = a.experiments["quick"].to_spec("quick");
        assert_eq!(spec.trials, 2);
        assert_eq!(spec.schemes, vec![Scheme::Proposed, Scheme::NoIrs]);
    }

    #[test]
    fn rejects_conflicts_and_bad_values() {
        let p = Path::new("x.toml");
        let both = parse_config("[system]\ngamma = 2.0\ngamma_db = 3.0\n", p).unwrap();
        assert!(both.system.apply(&SystemConfig::default()).is_err());
        let bad = parse_config("[system]\nm = 0\n", p).unwrap();
        assert!(bad.system.apply(&SystemConfig::default()).is_err());
        assert!(parse_config("[system]\nunknown_key = 1\n", p).is_err());
        assert!(parse_config("[system]\nfrequencies = [1.0e9, 2.0e9]\n", p).is_err());
    }
}
