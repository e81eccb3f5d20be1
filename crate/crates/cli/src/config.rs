use std::path::{Path, PathBuf};
use std::str::FromStr;

use sabayes::model::{EffectKind, Likelihood, Prior};
use sabayes::Error;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::args::{Format, GlobalArgs};
use crate::CliError;

/// Environment variable holding the default seed.
pub const SEED_ENV: &str = "SABAYES_SEED";

/// Contents of a `--config` file. Command-specific values sit in `params`
/// under their flag names, e.g. `{"params": {"y": 3.4, "level": 0.95}}`.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub command: Option<String>,
    pub model: ModelSpec,
    pub rule: Option<Value>,
    pub loss: Option<Value>,
    pub seed: Option<u64>,
    pub output: Option<PathBuf>,
    pub format: Option<Format>,
    pub workers: Option<usize>,
    pub params: Map<String, Value>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSpec {
    pub prior: Option<Prior>,
    pub likelihood: Option<Likelihood>,
    pub kind: Option<EffectKind>,
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, Error> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

/// A model component from a flag value: inline JSON, a `.json` file, or the
/// compact text form.
pub fn parse_component<T>(text: &str) -> Result<T, Error>
where
    T: DeserializeOwned + FromStr<Err = Error>,
{
    let t = text.trim();
    if t.starts_with('{') || t.starts_with('"') {
        return serde_json::from_str(t).map_err(|e| Error::Config(format!("'{t}': {e}")));
    }
    if t.ends_with(".json") {
        return read_json(Path::new(t));
    }
    t.parse()
}

/// A config entry that is either a compact string or a JSON object.
fn component_from_value<T>(v: &Value) -> Result<T, Error>
where
    T: DeserializeOwned + FromStr<Err = Error>,
{
    match v {
        Value::String(s) => parse_component(s),
        other => serde_json::from_value(other.clone()).map_err(|e| Error::Config(e.to_string())),
    }
}

/// Resolution state of one run: merges flags, the config file and defaults,
/// and records every resolved value for the output header.
pub struct Ctx {
    pub command: &'static str,
    cfg: RunConfig,
    pub seed: u64,
    pub format: Option<Format>,
    pub output: Option<PathBuf>,
    resolved: Map<String, Value>,
}

impl Ctx {
    pub fn new(command: &'static str, global: &GlobalArgs) -> Result<Self, CliError> {
        let cfg: RunConfig = match &global.config {
            Some(p) => read_json(p)?,
            None => RunConfig::default(),
        };
        if let Some(c) = &cfg.command {
            if c != command {
                return Err(CliError::Usage(format!("config file is for '{c}', not '{command}'")));
            }
        }
        let env_seed = match std::env::var(SEED_ENV) {
            Ok(s) => Some(
                s.trim()
                    .parse::<u64>()
                    .map_err(|_| CliError::Usage(format!("{SEED_ENV} must be an unsigned 64-bit integer, got '{s}'")))?,
            ),
            Err(_) => None,
        };
        let seed = global.seed.or(cfg.seed).or(env_seed).unwrap_or(0);
        Ok(Ctx {
            command,
            format: global.format.or(cfg.format),
            output: global.output.clone().or_else(|| cfg.output.clone()),
            cfg,
            seed,
            resolved: Map::new(),
        })
    }

    /// Worker count: flag, then config.
    pub fn workers(&self, flag: Option<usize>) -> Option<usize> {
        flag.or(self.cfg.workers)
    }

    pub fn resolved(&self) -> &Map<String, Value> {
        &self.resolved
    }

    pub fn forget(&mut self, key: &str) {
        self.resolved.remove(key);
    }

    pub fn record<T: Serialize>(&mut self, key: &str, value: &T) {
        let v = serde_json::to_value(value).unwrap_or(Value::Null);
        self.resolved.insert(key.to_string(), v);
    }

    /// Flag, then `params[key]`, then the default.
    pub fn opt<T>(&mut self, key: &str, flag: Option<T>, default: Option<T>) -> Result<Option<T>, CliError>
    where
        T: Serialize + DeserializeOwned,
    {
        let v = match flag {
            Some(v) => Some(v),
            None => match self.cfg.params.get(key) {
                Some(v) => Some(
                    serde_json::from_value(v.clone())
                        .map_err(|e| CliError::Usage(format!("config params.{key}: {e}")))?,
                ),
                None => default,
            },
        };
        if let Some(v) = &v {
            self.record(key, v);
        }
        Ok(v)
    }

    pub fn get<T>(&mut self, key: &str, flag: Option<T>, default: T) -> Result<T, CliError>
    where
        T: Serialize + DeserializeOwned,
    {
        Ok(self.opt(key, flag, Some(default))?.expect("default supplied"))
    }

    pub fn require<T>(&mut self, key: &str, flag: Option<T>) -> Result<T, CliError>
    where
        T: Serialize + DeserializeOwned,
    {
        self.opt(key, flag, None)?
            .ok_or_else(|| CliError::Usage(format!("missing --{}", key.replace('_', "-"))))
    }

    pub fn flag(&mut self, key: &str, flag: bool) -> Result<bool, CliError> {
        let v = flag || self.opt::<bool>(key, None, Some(false))?.unwrap_or(false);
        self.record(key, &v);
        Ok(v)
    }

    /// A model component such as a rule or loss: flag, then the top-level
    /// config entry `key`, then `params[key]`, then the default.
    pub fn component<T>(&mut self, key: &str, flag: Option<&str>, default: Option<T>) -> Result<Option<T>, CliError>
    where
        T: Serialize + DeserializeOwned + FromStr<Err = Error>,
    {
        let top = match key {
            "rule" => self.cfg.rule.clone(),
            "loss" => self.cfg.loss.clone(),
            _ => None,
        };
        let v = match (flag, top.or_else(|| self.cfg.params.get(key).cloned())) {
            (Some(f), _) => Some(parse_component(f)?),
            (None, Some(v)) => Some(component_from_value(&v)?),
            (None, None) => default,
        };
        if let Some(v) = &v {
            self.record(key, v);
        }
        Ok(v)
    }

    /// Prior, likelihood and effect kind: flags, then `--model`, then the
    /// config's `model` block, then the defaults.
    pub fn model(
        &mut self,
        model_file: Option<&Path>,
        prior: Option<&str>,
        sigma: Option<f64>,
        kind: Option<&str>,
        default_prior: Option<Prior>,
    ) -> Result<(Prior, Likelihood, EffectKind), CliError> {
        let file: ModelSpec = match model_file {
            Some(p) => read_json(p)?,
            None => ModelSpec::default(),
        };
        let prior = match prior {
            Some(p) => parse_component(p)?,
            None => file
                .prior
                .or_else(|| self.cfg.model.prior.clone())
                .or(default_prior)
                .ok_or_else(|| CliError::Usage("missing --prior".into()))?,
        };
        let lik = match sigma {
            Some(s) => Likelihood::NormalLocation { sigma: s },
            None => file.likelihood.or_else(|| self.cfg.model.likelihood.clone()).unwrap_or_default(),
        };
        let kind = match kind {
            Some(k) => parse_component(k)?,
            None => file.kind.or_else(|| self.cfg.model.kind.clone()).unwrap_or_default(),
        };
        prior.validate()?;
        lik.validate()?;
        kind.validate()?;
        self.record("prior", &prior);
        self.record("likelihood", &lik);
        self.record("kind", &kind);
        Ok((prior, lik, kind))
    }

    /// Likelihood alone, for commands without a prior.
    pub fn likelihood(&mut self, sigma: Option<f64>) -> Result<Likelihood, CliError> {
        let lik = match sigma {
            Some(s) => Likelihood::NormalLocation { sigma: s },
            None => self.cfg.model.likelihood.clone().unwrap_or_default(),
        };
        lik.validate()?;
        self.record("likelihood", &lik);
        Ok(lik)
    }

    /// A JSON document given by path, either as a flag or as `params[key]`.
    pub fn json_file<T: DeserializeOwned + Serialize>(&mut self, key: &str, flag: Option<&Path>) -> Result<Option<T>, CliError> {
        let v: Option<T> = match flag {
            Some(p) => Some(read_json(p)?),
            None => match self.cfg.params.get(key) {
                Some(Value::String(p)) => Some(read_json(Path::new(p))?),
                Some(v) => Some(serde_json::from_value(v.clone()).map_err(|e| CliError::Usage(format!("config params.{key}: {e}")))?),
                None => None,
            },
        };
        if let Some(v) = &v {
            self.record(key, v);
        }
        Ok(v)
    }
}
