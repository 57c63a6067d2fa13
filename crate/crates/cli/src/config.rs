//! Experiment configuration.
//!
//! A config file is a list of `key = value` lines where every value is a JSON
//! literal (`50`, `0.1`, `"paper-literal"`, `[10, 50, 100]`). Blank lines and
//! `#` comments are ignored. A file whose content is a single JSON object is
//! accepted too, and so is any output file written by this tool: its first
//! line embeds the resolved config.

use std::fmt;
use std::str::FromStr;

use molcomm::capacity::{DEFAULT_BINS, DEFAULT_LEVELS, DEFAULT_MAX_ITER, DEFAULT_TOLERANCE};
use molcomm::{BacteriumParams, DiffusionChannelParams, LinkParams, NodeParams, VarianceMode};
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::error::CliError;

/// Marker that precedes the embedded config in an output header.
pub const HEADER_MARKER: &str = " config: ";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

impl FromStr for Format {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            other => Err(format!("expected `csv` or `json`, got `{other}`")),
        }
    }
}

impl fmt::Display for Format {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Format::Csv => "csv",
            Format::Json => "json",
        })
    }
}

/// Every tunable of a run. Node keys without a prefix apply to both nodes;
/// `tx_` and `rx_` keys override one node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub receptors: u32,
    pub gain: f64,
    pub dissociation: f64,
    pub gain_noise_rel_var: f64,
    pub bacteria: u32,
    pub production: f64,
    pub diffusion: f64,
    pub distance: f64,

    #[serde(skip_serializing_if = "Option::is_none")]
    pub tx_receptors: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tx_gain: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tx_dissociation: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tx_gain_noise_rel_var: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tx_bacteria: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tx_production: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rx_receptors: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rx_gain: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rx_dissociation: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rx_gain_noise_rel_var: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rx_bacteria: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rx_production: Option<f64>,

    pub mode: VarianceMode,

    pub seed: u64,
    pub trials: u64,
    pub antithetic: bool,
    pub p0_grid: Vec<f64>,

    pub p0: f64,

    pub p_max_grid: Vec<f64>,
    /// Bacteria counts swept by `capacity-sweep` and `feasibility`; empty
    /// means `[bacteria]`.
    pub bacteria_list: Vec<u32>,
    pub levels: usize,
    pub bins: usize,
    pub tol: f64,
    pub max_iter: usize,

    pub m_list: Vec<usize>,
    pub target_error: f64,
    /// Upper end of the feasibility search; `null` uses the largest
    /// admissible level, capped at 0.999.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p_max_cap: Option<f64>,

    pub format: Format,
    /// Output file; standard output when unset. Not embedded in output
    /// headers, since it does not affect the bytes written.
    #[serde(skip_serializing)]
    pub out: Option<String>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            receptors: 50,
            gain: 1.0,
            dissociation: 1.0,
            gain_noise_rel_var: 0.1,
            bacteria: 100,
            production: 0.0025,
            diffusion: 1.0,
            distance: 0.1,
            tx_receptors: None,
            tx_gain: None,
            tx_dissociation: None,
            tx_gain_noise_rel_var: None,
            tx_bacteria: None,
            tx_production: None,
            rx_receptors: None,
            rx_gain: None,
            rx_dissociation: None,
            rx_gain_noise_rel_var: None,
            rx_bacteria: None,
            rx_production: None,
            mode: VarianceMode::Consistent,
            seed: 1,
            trials: 100_000,
            antithetic: false,
            p0_grid: vec![0.1, 0.3, 0.5, 0.7, 0.9],
            p0: 0.5,
            p_max_grid: (1..=19).map(|k| f64::from(k) / 20.0).chain([0.999]).collect(),
            bacteria_list: Vec::new(),
            levels: DEFAULT_LEVELS,
            bins: DEFAULT_BINS,
            tol: DEFAULT_TOLERANCE,
            max_iter: DEFAULT_MAX_ITER,
            m_list: vec![2, 4, 8, 16, 32],
            target_error: 1e-6,
            p_max_cap: None,
            format: Format::Csv,
            out: None,
        }
    }
}

fn config_error(line: Option<usize>, key: Option<&str>, reason: impl Into<String>) -> CliError {
    CliError::Config {
        line,
        key: key.map(str::to_owned),
        reason: reason.into(),
    }
}

/// Extracts the JSON object embedded in an output header line.
fn embedded_config(first_line: &str) -> Option<&str> {
    let rest = first_line.strip_prefix('#')?;
    let at = rest.find(HEADER_MARKER)?;
    Some(rest[at + HEADER_MARKER.len()..].trim())
}

/// Parses config text into `(line, key, value)` entries.
fn entries(text: &str) -> Result<Vec<(Option<usize>, String, Value)>, CliError> {
    let first = text.lines().next().unwrap_or("");
    let json = embedded_config(first).or_else(|| text.trim_start().starts_with('{').then_some(text));
    if let Some(json) = json {
        let mut object: Map<String, Value> =
            serde_json::from_str(json).map_err(|e| config_error(Some(1), None, format!("malformed JSON: {e}")))?;
        // a JSON output document carries its config under "config"
        if object.get("tool").and_then(Value::as_str) == Some("molcomm") {
            match object.remove("config") {
                Some(Value::Object(inner)) => object = inner,
                _ => return Err(config_error(None, Some("config"), "output document has no config object")),
            }
        }
        return Ok(object.into_iter().map(|(k, v)| (None, k, v)).collect());
    }

    let mut out = Vec::new();
    let mut seen = std::collections::HashMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.trim();
        if content.is_empty() || content.starts_with('#') {
            continue;
        }
        let (key, value) = content
            .split_once('=')
            .ok_or_else(|| config_error(Some(line), None, "expected `key = value`"))?;
        let key = key.trim();
        if key.is_empty() {
            return Err(config_error(Some(line), None, "missing key"));
        }
        if let Some(prev) = seen.insert(key.to_owned(), line) {
            return Err(config_error(Some(line), Some(key), format!("duplicate key, first set on line {prev}")));
        }
        let value: Value = serde_json::from_str(value.trim())
            .map_err(|e| config_error(Some(line), Some(key), format!("value is not valid JSON: {e}")))?;
        out.push((Some(line), key.to_owned(), value));
    }
    Ok(out)
}

fn known_keys() -> Vec<String> {
    let Value::Object(all) = serde_json::to_value(ExperimentConfig::default()).expect("config serializes") else {
        unreachable!("config serializes to an object");
    };
    let mut keys: Vec<String> = all.into_iter().map(|(k, _)| k).collect();
    for prefix in ["tx_", "rx_"] {
        for k in ["receptors", "gain", "dissociation", "gain_noise_rel_var", "bacteria", "production"] {
            keys.push(format!("{prefix}{k}"));
        }
    }
    keys.push("p_max_cap".into());
    keys.push("out".into());
    keys
}

impl ExperimentConfig {
    /// Parses config text, checking every key and value individually so
    /// errors point at the offending line.
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let known = known_keys();
        let mut object = Map::new();
        for (line, key, value) in entries(text)? {
            if !known.contains(&key) {
                return Err(config_error(line, Some(&key), "unknown key"));
            }
            let single = Value::Object(Map::from_iter([(key.clone(), value.clone())]));
            serde_json::from_value::<ExperimentConfig>(single)
                .map_err(|e| config_error(line, Some(&key), e.to_string()))?;
            object.insert(key, value);
        }
        let config: ExperimentConfig =
            serde_json::from_value(Value::Object(object)).map_err(|e| config_error(None, None, e.to_string()))?;
        Ok(config)
    }

    /// Fills derived defaults and checks every invariant, so the result
    /// describes the run exactly.
    pub fn resolve(mut self) -> Result<Self, CliError> {
        if self.bacteria_list.is_empty() {
            self.bacteria_list = vec![self.bacteria];
        }
        self.link()?;
        let check = |ok: bool, key: &str, reason: &str| {
            if ok {
                Ok(())
            } else {
                Err(config_error(None, Some(key), reason))
            }
        };
        check(self.trials >= 2, "trials", "need at least 2")?;
        check(!self.antithetic || self.trials % 2 == 0, "trials", "antithetic runs need an even count")?;
        check(self.levels >= 2, "levels", "need at least 2")?;
        check(self.bins >= 2, "bins", "need at least 2")?;
        check(self.tol > 0.0, "tol", "must be positive")?;
        check(self.max_iter >= 1, "max_iter", "must be at least 1")?;
        check(self.m_list.iter().all(|&m| m >= 2), "m_list", "symbol counts must be at least 2")?;
        check(self.target_error > 0.0 && self.target_error < 1.0, "target_error", "must lie in (0, 1)")?;
        check(
            self.p_max_cap.is_none_or(|c| c > 0.0 && c < 1.0),
            "p_max_cap",
            "must lie in (0, 1)",
        )?;
        let probability = |p: &f64| (0.0..1.0).contains(p);
        check(self.p0_grid.iter().all(probability), "p0_grid", "levels must lie in [0, 1)")?;
        check(probability(&self.p0), "p0", "must lie in [0, 1)")?;
        check(
            self.p_max_grid.iter().all(|p| *p > 0.0 && *p < 1.0),
            "p_max_grid",
            "values must lie in (0, 1)",
        )?;
        check(self.bacteria_list.iter().all(|&n| n >= 1), "bacteria_list", "counts must be positive")?;
        Ok(self)
    }

    fn node(&self, tx: bool) -> Result<NodeParams, CliError> {
        let pick = |over_tx: Option<f64>, over_rx: Option<f64>, base: f64| if tx { over_tx } else { over_rx }.unwrap_or(base);
        let pick_u = |over_tx: Option<u32>, over_rx: Option<u32>, base: u32| if tx { over_tx } else { over_rx }.unwrap_or(base);
        let bacterium = BacteriumParams::new(
            pick_u(self.tx_receptors, self.rx_receptors, self.receptors),
            pick(self.tx_gain, self.rx_gain, self.gain),
            pick(self.tx_dissociation, self.rx_dissociation, self.dissociation),
            pick(self.tx_gain_noise_rel_var, self.rx_gain_noise_rel_var, self.gain_noise_rel_var),
        )?;
        Ok(NodeParams::new(
            pick_u(self.tx_bacteria, self.rx_bacteria, self.bacteria),
            bacterium,
            pick(self.tx_production, self.rx_production, self.production),
        )?)
    }

    pub fn link(&self) -> Result<LinkParams, CliError> {
        let channel = DiffusionChannelParams::new(self.diffusion, self.distance)?;
        Ok(LinkParams::new(self.node(true)?, channel, self.node(false)?).with_mode(self.mode))
    }

    /// The link with both nodes set to `bacteria` bacteria.
    pub fn link_with_bacteria(&self, bacteria: u32) -> Result<LinkParams, CliError> {
        Ok(self.link()?.with_bacteria(bacteria)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("config serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flat_lines_with_comments() {
        let c = ExperimentConfig::parse("# fig\nbacteria = 10\n\nmode = \"paper-literal\"\np_max_grid = [0.5, 0.9]\n")
            .unwrap();
        assert_eq!(c.bacteria, 10);
        assert_eq!(c.mode, VarianceMode::PaperLiteral);
        assert_eq!(c.p_max_grid, vec![0.5, 0.9]);
        assert_eq!(c.receptors, 50);
    }

    #[test]
    fn errors_name_the_line_and_key() {
        let e = ExperimentConfig::parse("bacteria = 10\nrecptors = 5\n").unwrap_err();
        assert_eq!(e.to_string(), "config error at line 2, key `recptors`: unknown key");
        let e = ExperimentConfig::parse("gain = \"high\"\n").unwrap_err();
        assert!(e.to_string().starts_with("config error at line 1, key `gain`:"), "{e}");
        let e = ExperimentConfig::parse("gain 3\n").unwrap_err();
        assert!(e.to_string().contains("line 1"));
        let e = ExperimentConfig::parse("gain = 1\ngain = 2\n").unwrap_err();
        assert!(e.to_string().contains("duplicate"));
        let e = ExperimentConfig::parse("bacteria = -3\n").unwrap_err();
        assert!(e.to_string().contains("key `bacteria`"));
    }

    #[test]
    fn resolve_rechecks_model_invariants() {
        let c = ExperimentConfig::parse("gain_noise_rel_var = 0.5\n").unwrap();
        assert!(c.resolve().is_err());
        let c = ExperimentConfig::parse("trials = 1\n").unwrap();
        assert!(c.resolve().is_err());
        let c = ExperimentConfig::parse("bacteria = 7\n").unwrap().resolve().unwrap();
        assert_eq!(c.bacteria_list, vec![7]);
    }

    #[test]
    fn node_overrides() {
        let c = ExperimentConfig::parse("tx_bacteria = 20\nrx_gain = 2.0\n").unwrap();
        let l = c.link().unwrap();
        assert_eq!(l.transmitter().bacteria(), 20);
        assert_eq!(l.receiver().bacteria(), 100);
        assert_eq!(l.receiver().bacterium().gain(), 2.0);
        assert_eq!(l.transmitter().bacterium().gain(), 1.0);
    }

    #[test]
    fn json_and_header_forms_round_trip() {
        let c = ExperimentConfig::parse("bacteria = 33\nseed = 9\n").unwrap().resolve().unwrap();
        let json = c.to_json();
        assert_eq!(ExperimentConfig::parse(&json).unwrap(), c);
        let header = format!("# molcomm 0.1.0 moments{HEADER_MARKER}{json}\np0,mean\n1,2\n");
        assert_eq!(ExperimentConfig::parse(&header).unwrap(), c);
        let doc = format!("{{\"tool\":\"molcomm\",\"command\":\"moments\",\"config\":{json},\"rows\":[]}}");
        assert_eq!(ExperimentConfig::parse(&doc).unwrap(), c);
    }
}
