//! Parameter sweeps over up to two axes. An axis is `key=v1,v2,...`; several
//! keys joined by `+` move together (`interaction.g1+interaction.g2=0.05,0.09`).

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use rayon::prelude::*;
use serde::Serialize;
use toml::Value;

use crate::config::{get_path, parse_value, set_path, ConfigError, RunConfig};
use crate::output::{num, write_json};
use crate::run::{solve, RunError};
use crate::scenario::Scenario;

pub const MAX_AXES: usize = 2;

#[derive(Debug, Clone, PartialEq)]
pub struct Axis {
    pub keys: Vec<String>,
    pub values: Vec<Value>,
}

impl Axis {
    pub fn parse(spec: &str) -> Result<Self, ConfigError> {
        let (keys, values) = spec
            .split_once('=')
            .ok_or_else(|| ConfigError::field(spec, "axis must look like key=v1,v2"))?;
        let keys: Vec<String> = keys.split('+').map(|k| k.trim().to_string()).collect();
        if keys.iter().any(String::is_empty) {
            return Err(ConfigError::field(spec, "empty axis key"));
        }
        let values: Vec<Value> = values.split(',').filter(|v| !v.trim().is_empty()).map(parse_value).collect();
        if values.is_empty() {
            return Err(ConfigError::field(spec, "axis has no values"));
        }
        Ok(Axis { keys, values })
    }

    pub fn name(&self) -> String {
        self.keys.join("+")
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub point: Vec<String>,
    pub peak_log_neg: f64,
    pub t_peak: f64,
    pub steady_residual: f64,
    pub final_log_neg: f64,
    pub converged: bool,
}

fn render(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

/// Cartesian grid of configurations (a single point for no axes).
pub fn grid_points<S: AsRef<str>>(
    scenario: &Scenario,
    overrides: &[S],
    axes: &[Axis],
) -> Result<Vec<(Vec<String>, RunConfig)>, ConfigError> {
    if axes.len() > MAX_AXES {
        return Err(ConfigError::field("axis", format!("at most {MAX_AXES} axes")));
    }
    let base = scenario.base_config(overrides)?.to_table();
    for a in axes {
        for k in &a.keys {
            match get_path(&base, k) {
                Some(Value::Float(_) | Value::Integer(_) | Value::String(_) | Value::Boolean(_)) => {}
                Some(_) => return Err(ConfigError::field(k, "axis must be a scalar field")),
                None if k == "atom.chi" || k == "solver.max_step" => {}
                None => return Err(ConfigError::field(k, "no such configuration field")),
            }
        }
    }
    let mut points: Vec<(Vec<String>, toml::Table)> = vec![(Vec::new(), base)];
    for a in axes {
        let mut next = Vec::with_capacity(points.len() * a.values.len());
        for (label, table) in &points {
            for v in &a.values {
                let mut t = table.clone();
                for k in &a.keys {
                    set_path(&mut t, k, v.clone())?;
                }
                let mut l = label.clone();
                l.push(render(v));
                next.push((l, t));
            }
        }
        points = next;
    }
    points
        .into_iter()
        .map(|(l, t)| {
            let c = RunConfig::from_table(t).map_err(|e| match e {
                ConfigError::Field { field, message } => ConfigError::Field {
                    field: format!("point [{}]: {field}", l.join(", ")),
                    message,
                },
                other => other,
            })?;
            Ok((l, c))
        })
        .collect()
}

pub fn summarize(point: Vec<String>, config: &RunConfig) -> Result<SweepRow, RunError> {
    let (traj, residual) = solve(config)?;
    let (t_peak, peak) = traj.peak_log_neg();
    Ok(SweepRow {
        point,
        peak_log_neg: peak,
        t_peak,
        steady_residual: residual,
        final_log_neg: traj.observables.last().map_or(0.0, |o| o.log_neg),
        converged: traj.converged,
    })
}

pub fn run_sweep(points: &[(Vec<String>, RunConfig)]) -> Result<Vec<SweepRow>, RunError> {
    points.par_iter().map(|(l, c)| summarize(l.clone(), c)).collect()
}

#[derive(Debug, Serialize)]
struct SweepManifest<'a> {
    tool: &'static str,
    version: &'static str,
    scenario: &'a str,
    axes: Vec<String>,
    base: RunConfig,
    rows: &'a [SweepRow],
}

/// Writes `<name>_sweep.csv` and `<name>_sweep.json`; returns the CSV path.
pub fn write_sweep(dir: &Path, scenario: &str, base: &RunConfig, axes: &[Axis], rows: &[SweepRow]) -> Result<PathBuf> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let path = dir.join(format!("{}_sweep.csv", base.output.name));
    let mut w = csv::Writer::from_path(&path)?;
    let mut header: Vec<String> = axes.iter().map(Axis::name).collect();
    header.extend(["peak_log_neg", "t_peak", "steady_residual", "final_log_neg", "converged"].map(String::from));
    w.write_record(&header)?;
    for r in rows {
        let mut rec = r.point.clone();
        rec.extend([num(r.peak_log_neg), num(r.t_peak), num(r.steady_residual), num(r.final_log_neg)]);
        rec.push(r.converged.to_string());
        w.write_record(&rec)?;
    }
    w.flush()?;
    write_json(
        &dir.join(format!("{}_sweep.json", base.output.name)),
        &SweepManifest {
            tool: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            scenario,
            axes: axes.iter().map(Axis::name).collect(),
            base: base.clone(),
            rows,
        },
    )?;
    Ok(path)
}
