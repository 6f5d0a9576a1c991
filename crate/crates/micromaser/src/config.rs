//! Run configuration: a TOML document with every physical quantity in units
//! of ω₀, declared by the mandatory top-level `units = "omega0"` key.

use std::path::Path;

use micromaser_core::atom_field::{AtomPreparation, InteractionParams};
use micromaser_core::evolve::{SolverConfig, TimeGrid};
use micromaser_core::hilbert::{fock_state, DensityMatrix, FockCutoff, Tolerances};
use micromaser_core::master_eq::{GeneratorSpec, Variant};
use serde::{Deserialize, Serialize};
use toml::{Table, Value};

pub const UNITS: &str = "omega0";

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("parse error: {0}")]
    Parse(String),
    #[error("{field}: {message}")]
    Field { field: String, message: String },
}

impl ConfigError {
    pub fn field(field: impl Into<String>, message: impl ToString) -> Self {
        ConfigError::Field {
            field: field.into(),
            message: message.to_string(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct FieldSection {
    pub n_max: usize,
    /// Fock occupations `[m, n]` of the initial product state.
    pub initial: [usize; 2],
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct AtomSection {
    pub p_e1: f64,
    pub p_e2: f64,
    pub p_g: f64,
    /// Defaults to the maximal coherence `√(p_e1 p_e2)`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub chi: Option<f64>,
    pub xi: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct InteractionSection {
    pub g1: f64,
    pub g2: f64,
    pub r: f64,
    pub tau: f64,
    pub kappa1: f64,
    pub kappa2: f64,
    /// The unit itself in Hz; informational.
    pub omega0: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    #[serde(default)]
    pub t_start: f64,
    pub t_end: f64,
    pub n_samples: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct SolverSection {
    pub rel_tol: f64,
    pub abs_tol: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_step: Option<f64>,
    pub validation_cadence: usize,
    pub max_steps: usize,
}

impl Default for SolverSection {
    fn default() -> Self {
        let d = SolverConfig::default();
        SolverSection {
            rel_tol: d.rel_tol,
            abs_tol: d.abs_tol,
            max_step: d.max_step,
            validation_cadence: d.validation_cadence,
            max_steps: d.max_steps,
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq, Eq, Default, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum VariantName {
    #[default]
    Exact,
    SecondOrder,
}

impl From<VariantName> for Variant {
    fn from(v: VariantName) -> Self {
        match v {
            VariantName::Exact => Variant::ExactMap,
            VariantName::SecondOrder => Variant::SecondOrder,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    pub dir: String,
    pub name: String,
    /// Re-run at `n_max + 4` and compare the peak negativity.
    pub cutoff_check: bool,
    pub cutoff_tolerance: f64,
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection {
            dir: "out".into(),
            name: "run".into(),
            cutoff_check: true,
            cutoff_tolerance: 1e-4,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct MonteCarloSection {
    /// Zero disables the ensemble run.
    pub n_traj: usize,
    pub seed: u64,
    /// Samples of the ensemble grid (same time span as `grid`).
    pub n_samples: usize,
}

impl Default for MonteCarloSection {
    fn default() -> Self {
        MonteCarloSection {
            n_traj: 0,
            seed: 0,
            n_samples: 61,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub units: String,
    #[serde(default)]
    pub variant: VariantName,
    pub field: FieldSection,
    pub atom: AtomSection,
    pub interaction: InteractionSection,
    pub grid: GridSection,
    #[serde(default)]
    pub solver: SolverSection,
    #[serde(default)]
    pub output: OutputSection,
    #[serde(default)]
    pub monte_carlo: MonteCarloSection,
}

/// A configuration turned into core types.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub spec: GeneratorSpec,
    pub rho0: DensityMatrix,
    pub grid: TimeGrid,
    pub solver: SolverConfig,
}

impl RunConfig {
    pub fn from_table(table: Table) -> Result<Self, ConfigError> {
        let cfg: RunConfig = Value::Table(table).try_into().map_err(|e: toml::de::Error| ConfigError::Parse(e.message().to_string()))?;
        cfg.resolve()?;
        Ok(cfg)
    }

    pub fn to_table(&self) -> Table {
        match Value::try_from(self).expect("config serializes") {
            Value::Table(t) => t,
            _ => unreachable!(),
        }
    }

    pub fn cutoff(&self) -> Result<FockCutoff, ConfigError> {
        FockCutoff::new(self.field.n_max).map_err(|e| ConfigError::field("field.n_max", e))
    }

    pub fn atom(&self) -> Result<AtomPreparation, ConfigError> {
        let a = &self.atom;
        for (name, v) in [("atom.p_e1", a.p_e1), ("atom.p_e2", a.p_e2), ("atom.p_g", a.p_g), ("atom.xi", a.xi)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(ConfigError::field(name, format!("{v} is outside [0, 1]")));
            }
        }
        if let Some(chi) = a.chi {
            if !(chi.abs() <= (a.p_e1 * a.p_e2).sqrt()) {
                return Err(ConfigError::field("atom.chi", format!("|{chi}| exceeds sqrt(p_e1 p_e2)")));
            }
        }
        let r = match a.chi {
            Some(chi) => AtomPreparation::new(a.p_e1, a.p_e2, a.p_g, chi, a.xi),
            None => AtomPreparation::with_max_coherence(a.p_e1, a.p_e2, a.p_g, a.xi),
        };
        r.map_err(|e| ConfigError::field("atom", e))
    }

    pub fn params(&self) -> Result<InteractionParams, ConfigError> {
        let i = &self.interaction;
        let p = InteractionParams {
            g1: i.g1,
            g2: i.g2,
            r: i.r,
            tau: i.tau,
            kappa1: i.kappa1,
            kappa2: i.kappa2,
            omega0: i.omega0,
        };
        for (name, v) in [
            ("interaction.g1", i.g1),
            ("interaction.g2", i.g2),
            ("interaction.r", i.r),
            ("interaction.kappa1", i.kappa1),
            ("interaction.kappa2", i.kappa2),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(ConfigError::field(name, format!("{v} must be finite and nonnegative")));
            }
        }
        for (name, v) in [("interaction.tau", i.tau), ("interaction.omega0", i.omega0)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(ConfigError::field(name, format!("{v} must be finite and positive")));
            }
        }
        p.validate().map_err(|e| ConfigError::field("interaction", e))?;
        Ok(p)
    }

    pub fn solver_config(&self) -> Result<SolverConfig, ConfigError> {
        let s = &self.solver;
        let cfg = SolverConfig {
            rel_tol: s.rel_tol,
            abs_tol: s.abs_tol,
            max_step: s.max_step,
            validation_cadence: s.validation_cadence,
            retain_states: false,
            tolerances: Tolerances::default(),
            max_steps: s.max_steps,
        };
        cfg.validate().map_err(|e| ConfigError::field("solver", e))?;
        Ok(cfg)
    }

    pub fn time_grid(&self) -> Result<TimeGrid, ConfigError> {
        TimeGrid::new(self.grid.t_start, self.grid.t_end, self.grid.n_samples).map_err(|e| ConfigError::field("grid", e))
    }

    /// Coarser grid for the ensemble run.
    pub fn mc_grid(&self) -> Result<TimeGrid, ConfigError> {
        TimeGrid::new(self.grid.t_start, self.grid.t_end, self.monte_carlo.n_samples)
            .map_err(|e| ConfigError::field("monte_carlo.n_samples", e))
    }

    pub fn resolve(&self) -> Result<Resolved, ConfigError> {
        if self.units != UNITS {
            return Err(ConfigError::field(
                "units",
                format!("expected \"{UNITS}\" (all rates and times in units of ω₀), found \"{}\"", self.units),
            ));
        }
        let cutoff = self.cutoff()?;
        let [m, n] = self.field.initial;
        let rho0 = fock_state(m, n, cutoff).map_err(|e| ConfigError::field("field.initial", e))?;
        if self.monte_carlo.n_traj == 1 {
            return Err(ConfigError::field("monte_carlo.n_traj", "need at least two trajectories"));
        }
        if self.monte_carlo.n_traj > 0 {
            self.mc_grid()?;
        }
        if !(self.output.cutoff_tolerance > 0.0) {
            return Err(ConfigError::field("output.cutoff_tolerance", "must be positive"));
        }
        Ok(Resolved {
            spec: GeneratorSpec {
                variant: self.variant.into(),
                params: self.params()?,
                atom: self.atom()?,
                cutoff,
            },
            rho0,
            grid: self.time_grid()?,
            solver: self.solver_config()?,
        })
    }

    /// Same run with a different cutoff.
    pub fn with_cutoff(&self, n_max: usize) -> Self {
        let mut c = self.clone();
        c.field.n_max = n_max;
        c
    }
}

pub fn parse_table(text: &str) -> Result<Table, ConfigError> {
    text.parse::<Table>().map_err(|e| ConfigError::Parse(e.to_string()))
}

pub fn read_table(path: &Path) -> Result<Table, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_table(&text)
}

/// Interprets an override value as a TOML literal, falling back to a bare
/// string (`--set output.name=foo`).
pub fn parse_value(raw: &str) -> Value {
    let raw = raw.trim();
    match format!("v = {raw}").parse::<Table>() {
        Ok(mut t) => t.remove("v").expect("key present"),
        Err(_) => Value::String(raw.to_string()),
    }
}

/// Sets the dotted `key` in `table`, creating intermediate tables.
pub fn set_path(table: &mut Table, key: &str, value: Value) -> Result<(), ConfigError> {
    let parts: Vec<&str> = key.split('.').map(str::trim).collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(ConfigError::field(key, "malformed key"));
    }
    let (last, parents) = parts.split_last().expect("nonempty");
    let mut cur = table;
    for p in parents {
        let entry = cur.entry(p.to_string()).or_insert_with(|| Value::Table(Table::new()));
        cur = match entry {
            Value::Table(t) => t,
            _ => return Err(ConfigError::field(key, format!("`{p}` is not a table"))),
        };
    }
    cur.insert(last.to_string(), value);
    Ok(())
}

/// Reads the dotted `key`, if present.
pub fn get_path<'a>(table: &'a Table, key: &str) -> Option<&'a Value> {
    let mut parts = key.split('.');
    let mut cur = table.get(parts.next()?)?;
    for p in parts {
        cur = cur.as_table()?.get(p)?;
    }
    Some(cur)
}

/// Applies `key=value` overrides in order.
pub fn apply_overrides<S: AsRef<str>>(table: &mut Table, overrides: &[S]) -> Result<(), ConfigError> {
    for o in overrides {
        let o = o.as_ref();
        let (k, v) = o
            .split_once('=')
            .ok_or_else(|| ConfigError::field(o, "override must look like key=value"))?;
        set_path(table, k.trim(), parse_value(v))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = r#"
units = "omega0"
[field]
n_max = 4
initial = [1, 0]
[atom]
p_e1 = 0.625
p_e2 = 0.3125
p_g = 0.0625
xi = 0.8
[interaction]
g1 = 0.09
g2 = 0.05
r = 0.1
tau = 1.0
kappa1 = 1e-6
kappa2 = 2e-6
omega0 = 1e10
[grid]
t_end = 10.0
n_samples = 11
"#;

    fn load(extra: &[&str]) -> Result<RunConfig, ConfigError> {
        let mut t = parse_table(SAMPLE)?;
        apply_overrides(&mut t, extra)?;
        RunConfig::from_table(t)
    }

    #[test]
    fn sample_loads_with_defaults() {
        let c = load(&[]).unwrap();
        assert_eq!(c.variant, VariantName::Exact);
        assert_eq!(c.solver, SolverSection::default());
        assert!(c.output.cutoff_check);
        let r = c.resolve().unwrap();
        let chi = r.spec.atom.chi;
        assert!((chi - (0.625f64 * 0.3125).sqrt()).abs() < 1e-15);
        assert_eq!(r.rho0.dim(), 25);
    }

    #[test]
    fn units_are_mandatory_and_checked() {
        let mut t = parse_table(SAMPLE).unwrap();
        t.remove("units");
        assert!(matches!(RunConfig::from_table(t), Err(ConfigError::Parse(_))));
        let err = load(&["units=\"Hz\""]).unwrap_err();
        assert!(matches!(err, ConfigError::Field { ref field, .. } if field == "units"));
    }

    #[test]
    fn invalid_fields_are_named() {
        let cases: [(&str, &str); 8] = [
            ("atom.p_g=0.5", "atom"),
            ("atom.xi=1.5", "atom.xi"),
            ("atom.chi=0.9", "atom.chi"),
            ("interaction.tau=0", "interaction.tau"),
            ("field.initial=[5, 0]", "field.initial"),
            ("field.n_max=0", "field.n_max"),
            ("grid.n_samples=1", "grid"),
            ("interaction.r=-1", "interaction.r"),
        ];
        for (o, f) in cases {
            match load(&[o]) {
                Err(ConfigError::Field { field, .. }) => assert_eq!(field, f, "{o}"),
                other => panic!("{o}: {other:?}"),
            }
        }
        assert!(matches!(load(&["atom.bogus=1"]), Err(ConfigError::Parse(_))));
    }

    #[test]
    fn overrides_parse_literals() {
        let c = load(&["atom.xi=0.7", "variant=second-order", "output.name=abc", "solver.max_step=0.5"]).unwrap();
        assert_eq!(c.atom.xi, 0.7);
        assert_eq!(c.variant, VariantName::SecondOrder);
        assert_eq!(c.output.name, "abc");
        assert_eq!(c.solver.max_step, Some(0.5));
        assert!(load(&["novalue"]).is_err());
    }

    #[test]
    fn round_trip_through_table() {
        let c = load(&["atom.chi=0.1"]).unwrap();
        assert_eq!(RunConfig::from_table(c.to_table()).unwrap(), c);
    }
}
