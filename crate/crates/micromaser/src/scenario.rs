//! Scenarios: a base configuration plus optional named series, each series
//! being a set of key overrides. The shipped presets are scenarios.

use std::path::Path;

use toml::{Table, Value};

use crate::config::{apply_overrides, parse_table, read_table, set_path, ConfigError, RunConfig};

pub const PRESETS: [(&str, &str); 4] = [
    ("fig2a", include_str!("../presets/fig2a.toml")),
    ("fig2b", include_str!("../presets/fig2b.toml")),
    ("fig3a", include_str!("../presets/fig3a.toml")),
    ("fig3b", include_str!("../presets/fig3b.toml")),
];

#[derive(Debug, Clone)]
pub struct Series {
    pub label: String,
    pub set: Table,
}

#[derive(Debug, Clone)]
pub struct Scenario {
    pub name: String,
    pub description: String,
    pub base: Table,
    pub series: Vec<Series>,
}

/// One fully resolved run.
#[derive(Debug, Clone)]
pub struct Job {
    pub label: Option<String>,
    pub config: RunConfig,
}

impl Scenario {
    pub fn from_table(name: &str, mut table: Table) -> Result<Self, ConfigError> {
        let description = match table.remove("description") {
            Some(Value::String(s)) => s,
            None => String::new(),
            Some(_) => return Err(ConfigError::field("description", "must be a string")),
        };
        let series = match table.remove("series") {
            None => Vec::new(),
            Some(Value::Array(items)) => items
                .into_iter()
                .enumerate()
                .map(|(i, item)| parse_series(i, item))
                .collect::<Result<_, _>>()?,
            Some(_) => return Err(ConfigError::field("series", "must be an array of tables")),
        };
        Ok(Scenario {
            name: name.to_string(),
            description,
            base: table,
            series,
        })
    }

    pub fn preset(name: &str) -> Result<Self, ConfigError> {
        let (_, text) = PRESETS
            .iter()
            .find(|(n, _)| *n == name)
            .ok_or_else(|| ConfigError::field("preset", format!("unknown preset `{name}` (see `preset list`)")))?;
        Self::from_table(name, parse_table(text)?)
    }

    pub fn from_file(path: &Path) -> Result<Self, ConfigError> {
        let name = path.file_stem().and_then(|s| s.to_str()).unwrap_or("run");
        Self::from_table(name, read_table(path)?)
    }

    /// Base table with `overrides` applied (series ignored).
    pub fn base_config<S: AsRef<str>>(&self, overrides: &[S]) -> Result<RunConfig, ConfigError> {
        let mut t = self.base.clone();
        apply_overrides(&mut t, overrides)?;
        RunConfig::from_table(t)
    }

    /// One job per series (or a single unlabeled job), with user overrides
    /// applied after the series' own.
    pub fn jobs<S: AsRef<str>>(&self, overrides: &[S]) -> Result<Vec<Job>, ConfigError> {
        if self.series.is_empty() {
            return Ok(vec![Job {
                label: None,
                config: self.base_config(overrides)?,
            }]);
        }
        self.series
            .iter()
            .map(|s| {
                let mut t = self.base.clone();
                for (k, v) in &s.set {
                    set_path(&mut t, k, v.clone())?;
                }
                apply_overrides(&mut t, overrides)?;
                let config = RunConfig::from_table(t).map_err(|e| match e {
                    ConfigError::Field { field, message } => ConfigError::Field {
                        field: format!("series {}: {field}", s.label),
                        message,
                    },
                    other => other,
                })?;
                Ok(Job {
                    label: Some(s.label.clone()),
                    config,
                })
            })
            .collect()
    }
}

fn parse_series(i: usize, item: Value) -> Result<Series, ConfigError> {
    let field = format!("series[{i}]");
    let Value::Table(mut t) = item else {
        return Err(ConfigError::field(field, "must be a table"));
    };
    let label = match t.remove("label") {
        Some(Value::String(s)) if !s.is_empty() => s,
        _ => return Err(ConfigError::field(field, "needs a nonempty string `label`")),
    };
    let set = match t.remove("set") {
        Some(Value::Table(s)) => s,
        None => Table::new(),
        Some(_) => return Err(ConfigError::field(format!("{field}.set"), "must be a table")),
    };
    if let Some(k) = t.keys().next() {
        return Err(ConfigError::field(format!("{field}.{k}"), "unknown key"));
    }
    Ok(Series { label, set })
}
