use std::fs;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde_json::{Map, Value};

use crate::{Cli, CliError};

/// A fully specified experiment invocation.
#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub experiment: String,
    pub config_path: Option<PathBuf>,
    /// `(dotted key, raw value)` pairs applied in order.
    pub overrides: Vec<(String, String)>,
    pub seed: Option<u64>,
    pub out: PathBuf,
}

impl RunConfig {
    pub fn new(experiment: &str, out: impl Into<PathBuf>) -> Self {
        Self { experiment: experiment.into(), config_path: None, overrides: Vec::new(), seed: None, out: out.into() }
    }

    pub fn with_override(mut self, key: &str, value: &str) -> Self {
        self.overrides.push((key.into(), value.into()));
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = Some(seed);
        self
    }

    pub fn from_cli(cli: &Cli) -> Result<Self, CliError> {
        let overrides = cli
            .overrides
            .iter()
            .map(|s| match s.split_once('=') {
                Some((k, v)) if !k.trim().is_empty() => Ok((k.trim().to_string(), v.trim().to_string())),
                _ => Err(CliError::Usage(format!("--set expects KEY=VALUE, got '{s}'"))),
            })
            .collect::<Result<_, _>>()?;
        Ok(Self {
            experiment: cli.experiment.clone(),
            config_path: cli.config.clone(),
            overrides,
            seed: cli.seed,
            out: cli.out.clone(),
        })
    }

    /// The config file merged with overrides and seed, as a JSON tree.
    pub fn resolved_config(&self) -> Result<Value, CliError> {
        let mut root = match &self.config_path {
            Some(path) => read_config_file(path)?,
            None => Value::Object(Map::new()),
        };
        for (key, raw) in &self.overrides {
            set_path(&mut root, key, parse_scalar(raw))?;
        }
        if let Some(seed) = self.seed {
            set_path(&mut root, "seed", Value::from(seed))?;
        }
        Ok(root)
    }
}

fn read_config_file(path: &Path) -> Result<Value, CliError> {
    let text =
        fs::read_to_string(path).map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
    let parsed = if path.extension().is_some_and(|e| e == "json") {
        serde_json::from_str(&text).map_err(|e| e.to_string())
    } else {
        toml::from_str::<toml::Table>(&text)
            .map_err(|e| e.to_string())
            .and_then(|t| serde_json::to_value(t).map_err(|e| e.to_string()))
    };
    let value = parsed.map_err(|e| CliError::Usage(format!("invalid config {}: {e}", path.display())))?;
    if !value.is_object() {
        return Err(CliError::Usage(format!("config {} must be a table", path.display())));
    }
    Ok(value)
}

/// Interprets an override value as a TOML literal, falling back to a bare string.
fn parse_scalar(raw: &str) -> Value {
    if let Ok(v) = raw.parse::<u64>() {
        return Value::from(v);
    }
    match toml::from_str::<toml::Table>(&format!("v = {raw}")) {
        Ok(mut t) => t.remove("v").and_then(|v| serde_json::to_value(v).ok()).unwrap_or(Value::from(raw)),
        Err(_) => Value::from(raw),
    }
}

fn set_path(root: &mut Value, key: &str, value: Value) -> Result<(), CliError> {
    let mut node = root;
    let parts: Vec<&str> = key.split('.').collect();
    for (i, part) in parts.iter().enumerate() {
        let map = node
            .as_object_mut()
            .ok_or_else(|| CliError::Usage(format!("cannot set '{key}': '{}' is not a table", parts[..i].join("."))))?;
        if i + 1 == parts.len() {
            map.insert(part.to_string(), value);
            return Ok(());
        }
        node = map.entry(part.to_string()).or_insert_with(|| Value::Object(Map::new()));
    }
    unreachable!("split yields at least one part")
}

/// Deserialises an experiment config; missing keys take their defaults.
pub fn typed<C: DeserializeOwned>(value: Value) -> Result<C, CliError> {
    serde_json::from_value(value).map_err(|e| CliError::Usage(format!("invalid config: {e}")))
}
