//! Scenario config files.
//!
//! A config is a TOML document holding any subset of the [`Scenario`] keys.
//! Missing keys come from a preset (`preset = "scenario1"` unless set), and
//! `[schedule]` may name a schedule preset of its own:
//!
//! ```toml
//! preset = "scenario2"
//! scheme = "weighted-spl"
//! seed = 7
//!
//! [distance_map]
//! offset = 5.0
//!
//! [schedule]
//! preset = "desk"
//! log_every = 25
//! ```
//!
//! Any key can also be set from the environment as `SEMLINK_<KEY>`, with
//! nested keys joined by `_`: `SEMLINK_TX_POWER_DBM=23`,
//! `SEMLINK_DISTANCE_MAP_OFFSET=5`, `SEMLINK_SCHEDULE_LOG_EVERY=10`.
//! Environment values take precedence over the file.

use std::path::Path;

use serde::Serialize;
use toml::{Table, Value};

use crate::autoencoder::Scenario;
use crate::error::{Error, Result};
use crate::trainer::TrainSchedule;

pub const ENV_PREFIX: &str = "SEMLINK_";
pub const DEFAULT_PRESET: &str = "scenario1";

/// Tables whose keys can be addressed from the environment.
const NESTED: [&str; 2] = ["distance_map", "schedule"];

/// Reads and validates the config at `path`, applying `SEMLINK_*`
/// overrides from the process environment.
pub fn parse_config(path: &Path) -> Result<Scenario> {
    parse_config_with_env(path, std::env::vars())
}

pub fn parse_config_with_env(
    path: &Path,
    env: impl IntoIterator<Item = (String, String)>,
) -> Result<Scenario> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
    resolve(None, Some(&text), env).map_err(|e| match e {
        Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
        other => other,
    })
}

/// Builds a scenario from an optional preset name, optional config text and
/// environment overrides, in increasing order of precedence. A preset passed
/// here replaces any `preset` key in the text.
pub fn resolve(
    preset: Option<&str>,
    text: Option<&str>,
    env: impl IntoIterator<Item = (String, String)>,
) -> Result<Scenario> {
    let mut user = match text {
        Some(t) => t
            .parse::<Table>()
            .map_err(|e| Error::Config(format!("malformed config: {e}")))?,
        None => Table::new(),
    };
    for (key, value) in env_overrides(env)? {
        insert_path(&mut user, &key, value)?;
    }

    let file_preset = match user.remove("preset") {
        Some(Value::String(s)) => Some(s),
        Some(other) => {
            return Err(Error::InvalidConfig {
                key: "preset".into(),
                reason: format!("preset must be a string, got {other}"),
            })
        }
        None => None,
    };
    let name = preset.map(str::to_owned).or(file_preset);
    let base = Scenario::preset(name.as_deref().unwrap_or(DEFAULT_PRESET))?;
    let mut merged = to_table(&base);

    if let Some(Value::Table(schedule)) = user.get_mut("schedule") {
        match schedule.remove("preset") {
            Some(Value::String(s)) => {
                let table = to_table(&TrainSchedule::preset(&s)?);
                merged.insert("schedule".into(), Value::Table(table));
            }
            Some(other) => {
                return Err(Error::InvalidConfig {
                    key: "schedule.preset".into(),
                    reason: format!("schedule.preset must be a string, got {other}"),
                })
            }
            None => {}
        }
    }
    merge(&mut merged, user);

    let scenario: Scenario = merged
        .try_into()
        .map_err(|e| Error::Config(e.to_string().trim_end().to_owned()))?;
    scenario.validate()?;
    Ok(scenario)
}

/// The fully resolved config, in the same format the parser accepts.
pub fn effective_config(scenario: &Scenario) -> String {
    toml::to_string(scenario).expect("scenario serializes")
}

fn to_table<T: Serialize>(value: &T) -> Table {
    match Value::try_from(value) {
        Ok(Value::Table(t)) => t,
        other => unreachable!("not a table: {other:?}"),
    }
}

fn merge(into: &mut Table, from: Table) {
    for (k, v) in from {
        match (into.get_mut(&k), v) {
            (Some(Value::Table(a)), Value::Table(b)) => merge(a, b),
            (_, v) => {
                into.insert(k, v);
            }
        }
    }
}

fn insert_path(table: &mut Table, path: &[String], value: Value) -> Result<()> {
    match path {
        [key] => {
            table.insert(key.clone(), value);
            Ok(())
        }
        [head, rest @ ..] => {
            let entry = table
                .entry(head.clone())
                .or_insert_with(|| Value::Table(Table::new()));
            match entry {
                Value::Table(t) => insert_path(t, rest, value),
                _ => Err(Error::InvalidConfig {
                    key: head.clone(),
                    reason: format!("{head} must be a table"),
                }),
            }
        }
        [] => Ok(()),
    }
}

/// `SEMLINK_DISTANCE_MAP_OFFSET=5` becomes `(["distance_map", "offset"], 5)`.
fn env_overrides(
    env: impl IntoIterator<Item = (String, String)>,
) -> Result<Vec<(Vec<String>, Value)>> {
    let mut out: Vec<_> = env
        .into_iter()
        .filter_map(|(k, v)| k.strip_prefix(ENV_PREFIX).map(|k| (k.to_ascii_lowercase(), v)))
        .collect();
    // Apply in a fixed order whatever the iteration order of the environment.
    out.sort();
    Ok(out
        .into_iter()
        .map(|(key, raw)| (env_key_path(&key), env_value(&raw)))
        .collect())
}

fn env_key_path(key: &str) -> Vec<String> {
    match key {
        "m" => return vec!["M".into()],
        "n" => return vec!["n".into()],
        _ => {}
    }
    for table in NESTED {
        if let Some(rest) = key.strip_prefix(table).and_then(|r| r.strip_prefix('_')) {
            return vec![table.into(), rest.into()];
        }
    }
    vec![key.into()]
}

/// Parses `raw` as a TOML value, falling back to a plain string.
fn env_value(raw: &str) -> Value {
    format!("v = {raw}")
        .parse::<Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| Value::String(raw.to_owned()))
}
