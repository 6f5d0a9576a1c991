use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use micromaser::config::{ConfigError, VariantName};
use micromaser::output::write_outputs;
use micromaser::run::{run_jobs, RunError};
use micromaser::scenario::{Scenario, PRESETS};
use micromaser::sweep::{grid_points, run_sweep, write_sweep, Axis};
use micromaser::validate::{run_suite, Fault, Level};

const EXIT_CONFIG: u8 = 1;
const EXIT_VALIDATION: u8 = 2;
const EXIT_NOT_CONVERGED: u8 = 3;

#[derive(Parser)]
#[command(name = "micromaser", version, about = "Two-mode micromaser entanglement dynamics")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate the master equation (and optionally a Monte Carlo ensemble).
    Simulate(RunArgs),
    /// Summaries over a grid of up to two parameter axes.
    Sweep {
        #[command(flatten)]
        run: RunArgs,
        /// `key=v1,v2,...`; join keys with `+` to move them together.
        #[arg(long = "axis")]
        axes: Vec<String>,
    },
    /// Run the invariant suites.
    Validate {
        #[arg(value_enum, default_value = "fast")]
        level: Level,
        /// Inject a known defect; the suite must then fail.
        #[arg(long, value_enum, hide = true)]
        inject: Option<Fault>,
        /// Also write the report as JSON into this directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Scenario presets.
    Preset {
        #[command(subcommand)]
        action: PresetAction,
    },
}

#[derive(Subcommand)]
enum PresetAction {
    /// List the available presets.
    List,
}

#[derive(Args)]
struct RunArgs {
    /// Configuration file (TOML).
    #[arg(long, conflicts_with = "preset", required_unless_present = "preset")]
    config: Option<PathBuf>,
    /// Named preset instead of a file.
    #[arg(long)]
    preset: Option<String>,
    /// `key=value` override, applied after the file and series values.
    #[arg(long = "set")]
    set: Vec<String>,
    /// Output directory (overrides `output.dir`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Monte Carlo master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Monte Carlo trajectory count (0 disables the ensemble).
    #[arg(long)]
    traj: Option<usize>,
    /// Fock cutoff n_max.
    #[arg(long)]
    cutoff: Option<usize>,
    #[arg(long, value_enum)]
    variant: Option<VariantName>,
}

impl RunArgs {
    fn scenario(&self) -> Result<Scenario, ConfigError> {
        match (&self.config, &self.preset) {
            (Some(p), _) => Scenario::from_file(p),
            (None, Some(name)) => Scenario::preset(name),
            (None, None) => Err(ConfigError::field("config", "give --config or --preset")),
        }
    }

    fn overrides(&self) -> Vec<String> {
        let mut o = self.set.clone();
        if let Some(s) = self.seed {
            o.push(format!("monte_carlo.seed={s}"));
        }
        if let Some(n) = self.traj {
            o.push(format!("monte_carlo.n_traj={n}"));
        }
        if let Some(n) = self.cutoff {
            o.push(format!("field.n_max={n}"));
        }
        if let Some(v) = self.variant {
            let name = match v {
                VariantName::Exact => "exact",
                VariantName::SecondOrder => "second-order",
            };
            o.push(format!("variant=\"{name}\""));
        }
        o
    }
}

fn config_failure(e: &ConfigError) -> ExitCode {
    eprintln!("configuration error: {e}");
    ExitCode::from(EXIT_CONFIG)
}

fn run_failure(e: &RunError) -> ExitCode {
    eprintln!("error: {e}");
    ExitCode::from(e.exit_code() as u8)
}

fn simulate(args: &RunArgs) -> ExitCode {
    let scenario = match args.scenario() {
        Ok(s) => s,
        Err(e) => return config_failure(&e),
    };
    let jobs = match scenario.jobs(&args.overrides()) {
        Ok(j) => j,
        Err(e) => return config_failure(&e),
    };
    let mut outcomes = Vec::with_capacity(jobs.len());
    for r in run_jobs(&jobs) {
        match r {
            Ok(o) => outcomes.push(o),
            Err(e) => return run_failure(&e),
        }
    }
    let dir = args.out.clone().unwrap_or_else(|| PathBuf::from(&jobs[0].config.output.dir));
    match write_outputs(&dir, &scenario.name, &outcomes) {
        Ok(path) => println!("wrote {}", path.display()),
        Err(e) => {
            eprintln!("error: {e:#}");
            return ExitCode::from(EXIT_CONFIG);
        }
    }
    let mut converged = true;
    for o in &outcomes {
        let (t, peak) = o.trajectory.peak_log_neg();
        let label = o.label.as_deref().unwrap_or("run");
        println!(
            "{label}: peak E_N {peak:.6e} at t = {t}, final E_N {:.3e}, max leakage {:.3e}{}",
            o.final_log_neg(),
            o.trajectory.max_leakage(),
            match &o.cutoff_check {
                Some(c) => format!(", peak at n_max {} differs by {:.3e}", c.n_max_ref, c.difference),
                None => String::new(),
            }
        );
        if !o.converged() {
            converged = false;
            eprintln!("{label}: not converged (leakage or cutoff disagreement)");
        }
    }
    if converged {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(EXIT_NOT_CONVERGED)
    }
}

fn sweep(args: &RunArgs, axes: &[String]) -> ExitCode {
    let scenario = match args.scenario() {
        Ok(s) => s,
        Err(e) => return config_failure(&e),
    };
    let overrides = args.overrides();
    let parsed = match axes.iter().map(|a| Axis::parse(a)).collect::<Result<Vec<_>, _>>() {
        Ok(a) => a,
        Err(e) => return config_failure(&e),
    };
    let (points, base) = match grid_points(&scenario, &overrides, &parsed).and_then(|p| Ok((p, scenario.base_config(&overrides)?))) {
        Ok(x) => x,
        Err(e) => return config_failure(&e),
    };
    let rows = match run_sweep(&points) {
        Ok(r) => r,
        Err(e) => return run_failure(&e),
    };
    let dir = args.out.clone().unwrap_or_else(|| PathBuf::from(&base.output.dir));
    match write_sweep(&dir, &scenario.name, &base, &parsed, &rows) {
        Ok(p) => println!("wrote {}", p.display()),
        Err(e) => {
            eprintln!("error: {e:#}");
            return ExitCode::from(EXIT_CONFIG);
        }
    }
    for r in &rows {
        println!("[{}] peak E_N {:.6e} at t = {}", r.point.join(", "), r.peak_log_neg, r.t_peak);
    }
    if rows.iter().all(|r| r.converged) {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(EXIT_NOT_CONVERGED)
    }
}

fn validate(level: Level, inject: Option<Fault>, out: Option<PathBuf>) -> ExitCode {
    let checks = run_suite(level, inject);
    for c in &checks {
        println!("{} {:<16} {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
    }
    if let Some(dir) = out {
        let written = std::fs::create_dir_all(&dir)
            .map_err(anyhow::Error::from)
            .and_then(|_| micromaser::output::write_json(&dir.join("validate.json"), &checks));
        if let Err(e) = written {
            eprintln!("error: {e:#}");
            return ExitCode::from(EXIT_CONFIG);
        }
    }
    if checks.iter().all(|c| c.passed) {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(EXIT_VALIDATION)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Simulate(args) => simulate(&args),
        Command::Sweep { run, axes } => sweep(&run, &axes),
        Command::Validate { level, inject, out } => validate(level, inject, out),
        Command::Preset { action: PresetAction::List } => {
            for (name, _) in PRESETS {
                match Scenario::preset(name) {
                    Ok(s) => {
                        let labels: Vec<_> = s.series.iter().map(|x| x.label.as_str()).collect();
                        println!("{name:<6} {} [series: {}]", s.description, labels.join(", "));
                    }
                    Err(e) => return config_failure(&e),
                }
            }
            ExitCode::SUCCESS
        }
    }
}
