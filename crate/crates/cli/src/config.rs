//! Plain `key = value` configs with a JSON alternative.

use std::f64::consts::PI;

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

/// Parses `key = value` lines (`#` starts a comment) into a JSON object.
/// Keys ending in `_list` hold comma-separated numbers.
pub fn parse_key_values(text: &str) -> Result<Value> {
    let mut map = Map::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .with_context(|| format!("line {}: expected key = value", lineno + 1))?;
        let (key, value) = (key.trim(), value.trim());
        if key.is_empty() {
            bail!("line {}: empty key", lineno + 1);
        }
        let parsed = if key.ends_with("_list") {
            let items = value
                .split(',')
                .map(|v| v.trim())
                .filter(|v| !v.is_empty())
                .map(|v| {
                    v.parse::<f64>()
                        .with_context(|| format!("line {}: '{v}' is not a number", lineno + 1))
                        .map(Value::from)
                })
                .collect::<Result<Vec<_>>>()?;
            Value::Array(items)
        } else {
            scalar_value(value)
        };
        if map.insert(key.to_string(), parsed).is_some() {
            bail!("line {}: duplicate key '{key}'", lineno + 1);
        }
    }
    Ok(Value::Object(map))
}

fn scalar_value(v: &str) -> Value {
    if let Ok(u) = v.parse::<u64>() {
        return Value::from(u);
    }
    if let Ok(f) = v.parse::<f64>() {
        return Value::from(f);
    }
    match v {
        "true" => Value::Bool(true),
        "false" => Value::Bool(false),
        _ => Value::String(v.trim_matches('"').to_string()),
    }
}

/// Reads a config as JSON when it looks like JSON, otherwise as key = value.
pub fn parse_config<T: for<'de> Deserialize<'de>>(text: &str) -> Result<T> {
    let value = if text.trim_start().starts_with('{') {
        serde_json::from_str(text).context("parsing JSON config")?
    } else {
        parse_key_values(text)?
    };
    serde_json::from_value(value).context("invalid config")
}

/// Every parameter of a pipeline run; defaults are written to the manifest.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PipelineConfig {
    pub n: usize,
    #[serde(rename = "L")]
    pub side: f64,
    pub rho: f64,
    /// RNG seed for the net and the seed search.
    pub seed: u64,
    /// `identity`, `random` or `equivariant`.
    pub frames: String,
    /// `euclidean`, `search`, or a path to a seed-metric JSON file.
    pub seed_metric: String,
    pub search_mode: String,
    pub search_degree: u32,
    pub search_budget: usize,
    pub d_list: Vec<f64>,
    pub s_list: Vec<f64>,
    pub resolution: usize,
    pub anchor_refinement: bool,
    pub verify_resolution: Option<usize>,
    /// `forward-mode` or `central-difference`.
    pub plan: String,
    pub step: f64,
    pub richardson: bool,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            n: 3,
            side: 2.0 * PI,
            rho: 0.1,
            seed: 0,
            frames: "identity".into(),
            seed_metric: "euclidean".into(),
            search_mode: "full-tensor".into(),
            search_degree: 1,
            search_budget: 200,
            d_list: (1..=10).map(f64::from).collect(),
            s_list: vec![1e-3, 2e-3, 5e-3, 1e-2, 2e-2, 5e-2, 0.1, 0.2, 0.5, 1.0],
            resolution: 20,
            anchor_refinement: false,
            verify_resolution: None,
            plan: "forward-mode".into(),
            step: 1e-3,
            richardson: true,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn key_values_and_json_agree() {
        let kv = "# demo\nn = 3\nL = 6.283185307179586\nrho = 0.1\nd_list = 1, 2.5\nseed_metric = euclidean\nanchor_refinement = true\n";
        let a: PipelineConfig = parse_config(kv).unwrap();
        let json = r#"{"n": 3, "L": 6.283185307179586, "rho": 0.1, "d_list": [1, 2.5], "seed_metric": "euclidean", "anchor_refinement": true}"#;
        let b: PipelineConfig = parse_config(json).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.d_list, vec![1.0, 2.5]);
        assert_eq!(a.s_list, PipelineConfig::default().s_list);
    }

    #[test]
    fn rejects_unknown_and_malformed() {
        assert!(parse_config::<PipelineConfig>("bogus = 1").is_err());
        assert!(parse_config::<PipelineConfig>("n 3").is_err());
        assert!(parse_config::<PipelineConfig>("s_list = 1, x").is_err());
        assert!(parse_config::<PipelineConfig>("n = 3\nn = 4").is_err());
    }
}
