//! Experiment configuration: a flat JSON file mirroring the command-line flags
//! plus every [`BlossomConfig`] field. Command-line values override the file.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::controller::BlossomConfig;
use crate::error::{Error, Result};

/// Optimizer and stopping rule under test.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Algorithm {
    /// Regret-targeted switching; `stop_param` is the global regret target.
    #[serde(rename = "blossom")]
    Blossom,
    /// Expected improvement, stopped when the probability of improvement at the
    /// next proposal falls below `stop_param`.
    #[serde(rename = "ei-pi")]
    EiWithPiStop,
    /// Entropy search, stopped when the maximized acquisition value falls below
    /// `stop_param`.
    #[serde(rename = "bayes-aqstop")]
    BayesAcqValueStop,
}

impl Algorithm {
    pub const ALL: [Algorithm; 3] = [
        Algorithm::Blossom,
        Algorithm::EiWithPiStop,
        Algorithm::BayesAcqValueStop,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Algorithm::Blossom => "blossom",
            Algorithm::EiWithPiStop => "ei-pi",
            Algorithm::BayesAcqValueStop => "bayes-aqstop",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|a| a.as_str() == s)
            .ok_or_else(|| {
                Error::InvalidArgument(format!(
                    "unknown algorithm `{s}` (expected blossom, ei-pi or bayes-aqstop)"
                ))
            })
    }

    /// Stopping parameter used when none is given.
    pub fn default_stop(self) -> f64 {
        match self {
            Algorithm::Blossom => 1e-2,
            Algorithm::EiWithPiStop => 1e-10,
            Algorithm::BayesAcqValueStop => 1e-8,
        }
    }
}

/// Fully resolved experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub objective: String,
    /// Dimension for objectives without a fixed one (`gp-draw`).
    pub dim: Option<usize>,
    pub algorithm: Algorithm,
    pub stop_param: f64,
    pub seeds: Vec<u64>,
    pub max_iterations: usize,
    pub output_dir: PathBuf,
    /// Optimizer settings; `seed`, `max_iterations` and the stopping fields are
    /// set per run from the experiment.
    pub blossom: BlossomConfig,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.objective.is_empty() {
            return Err(Error::InvalidArgument("objective is required".into()));
        }
        if self.seeds.is_empty() {
            return Err(Error::InvalidArgument(
                "at least one seed is required".into(),
            ));
        }
        let mut sorted = self.seeds.clone();
        sorted.sort_unstable();
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidArgument("seeds must be distinct".into()));
        }
        if !(self.stop_param.is_finite() && self.stop_param >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "stop parameter must be finite and non-negative, got {}",
                self.stop_param
            )));
        }
        if self.max_iterations == 0 {
            return Err(Error::InvalidArgument(
                "max_iterations must be positive".into(),
            ));
        }
        if self.dim == Some(0) {
            return Err(Error::InvalidArgument("dim must be positive".into()));
        }
        Ok(())
    }

    /// Optimizer configuration for one seed.
    pub fn run_config(&self, seed: u64) -> BlossomConfig {
        let mut cfg = self.blossom.clone();
        cfg.seed = seed;
        cfg.max_iterations = self.max_iterations;
        if self.algorithm == Algorithm::Blossom {
            cfg.target_global_regret = self.stop_param;
        }
        cfg
    }
}

/// Harness-level settings as given on the command line or in a file; unset
/// fields fall back to the next source.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Settings {
    pub objective: Option<String>,
    pub algorithm: Option<Algorithm>,
    pub stop: Option<f64>,
    pub seeds: Option<Vec<u64>>,
    pub max_iter: Option<usize>,
    pub out: Option<PathBuf>,
    pub dim: Option<usize>,
}

impl Settings {
    /// Fields set in `self` win over `other`.
    pub fn or(self, other: Settings) -> Settings {
        Settings {
            objective: self.objective.or(other.objective),
            algorithm: self.algorithm.or(other.algorithm),
            stop: self.stop.or(other.stop),
            seeds: self.seeds.or(other.seeds),
            max_iter: self.max_iter.or(other.max_iter),
            out: self.out.or(other.out),
            dim: self.dim.or(other.dim),
        }
    }
}

const HARNESS_KEYS: [&str; 7] = [
    "objective",
    "algorithm",
    "stop",
    "seeds",
    "max_iter",
    "out",
    "dim",
];

/// Parses a comma-separated seed list such as `0,1,2`.
pub fn parse_seeds(s: &str) -> Result<Vec<u64>> {
    s.split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(|t| {
            t.parse()
                .map_err(|_| Error::InvalidArgument(format!("invalid seed `{t}`")))
        })
        .collect()
}

/// Splits a JSON config object into harness settings and optimizer settings.
/// Unknown keys are rejected.
pub fn parse_config(text: &str) -> Result<(Settings, BlossomConfig)> {
    let value: Value = serde_json::from_str(text)?;
    let Value::Object(mut map) = value else {
        return Err(Error::Parse("config must be a JSON object".into()));
    };
    let known: Vec<String> = match serde_json::to_value(BlossomConfig::default())? {
        Value::Object(m) => m.keys().cloned().collect(),
        _ => unreachable!("BlossomConfig serializes to an object"),
    };
    if let Some(k) = map
        .keys()
        .find(|k| !HARNESS_KEYS.contains(&k.as_str()) && !known.contains(k))
    {
        return Err(Error::Parse(format!("unknown config key `{k}`")));
    }
    let mut harness = Map::new();
    for key in HARNESS_KEYS {
        if let Some(v) = map.remove(key) {
            harness.insert(key.to_string(), v);
        }
    }
    let settings = Settings {
        objective: take(&harness, "objective", |v| v.as_str().map(str::to_string))?,
        algorithm: match harness.get("algorithm") {
            None => None,
            Some(v) => Some(Algorithm::parse(
                v.as_str().ok_or_else(|| bad("algorithm"))?,
            )?),
        },
        stop: take(&harness, "stop", Value::as_f64)?,
        seeds: match harness.get("seeds") {
            None => None,
            Some(Value::String(s)) => Some(parse_seeds(s)?),
            Some(Value::Array(a)) => Some(
                a.iter()
                    .map(|v| v.as_u64().ok_or_else(|| bad("seeds")))
                    .collect::<Result<_>>()?,
            ),
            Some(_) => return Err(bad("seeds")),
        },
        max_iter: take(&harness, "max_iter", |v| v.as_u64().map(|n| n as usize))?,
        out: take(&harness, "out", |v| v.as_str().map(PathBuf::from))?,
        dim: take(&harness, "dim", |v| v.as_u64().map(|n| n as usize))?,
    };
    let blossom: BlossomConfig = serde_json::from_value(Value::Object(map))?;
    Ok((settings, blossom))
}

pub fn load_config(path: &Path) -> Result<(Settings, BlossomConfig)> {
    let text =
        std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    parse_config(&text)
}

/// Combines command-line settings with an optional config file.
pub fn resolve(cli: Settings, file: Option<(Settings, BlossomConfig)>) -> Result<ExperimentConfig> {
    let (settings, blossom) = match file {
        Some((s, b)) => (cli.or(s), b),
        None => (cli, BlossomConfig::default()),
    };
    let algorithm = settings.algorithm.unwrap_or(Algorithm::Blossom);
    let cfg = ExperimentConfig {
        objective: settings
            .objective
            .ok_or_else(|| Error::InvalidArgument("objective is required".into()))?,
        dim: settings.dim,
        algorithm,
        stop_param: settings.stop.unwrap_or_else(|| match algorithm {
            Algorithm::Blossom => blossom.target_global_regret,
            a => a.default_stop(),
        }),
        seeds: settings.seeds.unwrap_or_else(|| vec![0]),
        max_iterations: settings.max_iter.unwrap_or(blossom.max_iterations),
        output_dir: settings
            .out
            .ok_or_else(|| Error::InvalidArgument("output directory is required".into()))?,
        blossom,
    };
    cfg.validate()?;
    Ok(cfg)
}

fn bad(key: &str) -> Error {
    Error::Parse(format!("invalid value for `{key}`"))
}

fn take<T>(
    map: &Map<String, Value>,
    key: &str,
    f: impl Fn(&Value) -> Option<T>,
) -> Result<Option<T>> {
    map.get(key)
        .map(|v| f(v).ok_or_else(|| bad(key)))
        .transpose()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cli_overrides_file() {
        let file =
            parse_config(r#"{"objective": "branin", "stop": 0.1, "seeds": [1, 2], "n_u": 7}"#)
                .unwrap();
        let cli = Settings {
            stop: Some(0.5),
            out: Some("out".into()),
            ..Settings::default()
        };
        let cfg = resolve(cli, Some(file)).unwrap();
        assert_eq!(cfg.objective, "branin");
        assert_eq!(cfg.stop_param, 0.5);
        assert_eq!(cfg.seeds, vec![1, 2]);
        assert_eq!(cfg.blossom.n_u, 7);
    }

    #[test]
    fn rejects_unknown_keys_and_duplicate_seeds() {
        assert!(parse_config(r#"{"objectiv": "branin"}"#).is_err());
        let cli = Settings {
            objective: Some("branin".into()),
            seeds: Some(vec![1, 1]),
            out: Some("out".into()),
            ..Settings::default()
        };
        assert!(resolve(cli, None).is_err());
    }

    #[test]
    fn seed_lists_parse() {
        assert_eq!(parse_seeds("0, 1,2").unwrap(), vec![0, 1, 2]);
        assert!(parse_seeds("0,x").is_err());
    }

    #[test]
    fn baseline_default_stops() {
        let cli = Settings {
            objective: Some("branin".into()),
            algorithm: Some(Algorithm::EiWithPiStop),
            out: Some("out".into()),
            ..Settings::default()
        };
        assert_eq!(resolve(cli, None).unwrap().stop_param, 1e-10);
    }
}
