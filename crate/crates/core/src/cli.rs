//! Command-line front end. Flags override the matching keys of the preset or
//! of the `--config` file; `--config` also accepts a previous output, whose
//! embedded config is then re-run.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use num_complex::Complex64;

use crate::ensemble::{InitialState, Method};
use crate::error::{Error, Result};
use crate::experiments::{run_experiment, version, ExperimentConfig, ExperimentKind, ExperimentOutput, OutputFormat, Preset};
use crate::model::UnravelingScheme;

pub const EXIT_OK: i32 = 0;
pub const EXIT_OTHER: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_FAILURE_BUDGET: i32 = 3;
pub const EXIT_TRUNCATION: i32 = 4;

/// Process exit status for an error.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_) | Error::Usage(_) | Error::InvalidParams(_) | Error::Json(_) => EXIT_CONFIG,
        Error::FailureBudget { .. } | Error::Validity(_) => EXIT_FAILURE_BUDGET,
        Error::Truncation { .. } => EXIT_TRUNCATION,
        _ => EXIT_OTHER,
    }
}

#[derive(Debug, Parser)]
#[command(name = "gtraj", version = version(), about = "Quantum trajectory experiments on the driven dissipative Kerr cavity")]
pub struct Cli {
    /// More log output (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Seed-matched single trajectories of several solvers.
    SingleTraj(RunArgs),
    /// Stationary photon number and g² over a drive sweep.
    Bistability(RunArgs),
    /// Kerr phase diffusion of a coherent state with variance decomposition.
    PhaseDiffusion(RunArgs),
    /// Phase diffusion with ten samples and the sample-ratio criterion.
    LowSample(RunArgs),
    /// Wigner-function snapshots along one trajectory.
    Wigner(RunArgs),
    /// Master-equation steady state over a drive sweep.
    Oracle(RunArgs),
}

impl Command {
    pub fn kind(&self) -> ExperimentKind {
        match self {
            Self::SingleTraj(_) => ExperimentKind::SingleTraj,
            Self::Bistability(_) => ExperimentKind::Bistability,
            Self::PhaseDiffusion(_) => ExperimentKind::PhaseDiffusion,
            Self::LowSample(_) => ExperimentKind::LowSample,
            Self::Wigner(_) => ExperimentKind::Wigner,
            Self::Oracle(_) => ExperimentKind::Oracle,
        }
    }

    pub fn args(&self) -> &RunArgs {
        match self {
            Self::SingleTraj(a)
            | Self::Bistability(a)
            | Self::PhaseDiffusion(a)
            | Self::LowSample(a)
            | Self::Wigner(a)
            | Self::Oracle(a) => a,
        }
    }
}

fn parse_alpha(s: &str) -> std::result::Result<Complex64, String> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    let num = |t: &str| t.parse::<f64>().map_err(|e| format!("`{t}`: {e}"));
    match parts.as_slice() {
        [re] => Ok(Complex64::new(num(re)?, 0.0)),
        [re, im] => Ok(Complex64::new(num(re)?, num(im)?)),
        _ => Err("expected RE or RE,IM".into()),
    }
}

#[derive(Debug, Clone, Default, clap::Args)]
pub struct RunArgs {
    /// JSON config, or a previous output to re-run.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Defaults to start from when no config is given.
    #[arg(long, default_value = "paper")]
    pub preset: String,
    /// Solvers: exact, xp, ntheta, twa (comma separated).
    #[arg(long, value_delimiter = ',')]
    pub method: Vec<Method>,
    /// Unravelings: pc, het, homx (comma separated).
    #[arg(long, value_delimiter = ',')]
    pub scheme: Vec<UnravelingScheme>,
    #[arg(long)]
    pub n_traj: Option<usize>,
    #[arg(long)]
    pub n_traj_twa: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Sets every integration step at once.
    #[arg(long)]
    pub dt: Option<f64>,
    #[arg(long)]
    pub dt_pc: Option<f64>,
    #[arg(long)]
    pub dt_diffusive: Option<f64>,
    #[arg(long)]
    pub dt_twa: Option<f64>,
    #[arg(long)]
    pub n_levels: Option<usize>,
    #[arg(long)]
    pub oracle_levels: Option<usize>,
    #[arg(long)]
    pub tail_threshold: Option<f64>,
    #[arg(long)]
    pub failure_budget: Option<f64>,
    #[arg(long)]
    pub t_max: Option<f64>,
    #[arg(long)]
    pub n_times: Option<usize>,
    #[arg(long, allow_hyphen_values = true)]
    pub delta: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub u: Option<f64>,
    /// Drive amplitude.
    #[arg(long, allow_hyphen_values = true)]
    pub f: Option<f64>,
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long)]
    pub pump_off: Option<f64>,
    /// Coherent initial amplitude `RE` or `RE,IM`.
    #[arg(long, value_parser = parse_alpha, allow_hyphen_values = true, conflicts_with = "vacuum")]
    pub alpha: Option<Complex64>,
    /// Start from the vacuum.
    #[arg(long)]
    pub vacuum: bool,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub f_values: Vec<f64>,
    #[arg(long, value_delimiter = ',')]
    pub snapshot_times: Vec<f64>,
    #[arg(long)]
    pub wigner_half_width: Option<f64>,
    #[arg(long)]
    pub wigner_points: Option<usize>,
    /// Trajectory index of single-trajectory experiments.
    #[arg(long)]
    pub trajectory: Option<u64>,
    /// Master-equation reference on or off.
    #[arg(long)]
    pub reference: Option<bool>,
    /// Output file; standard output when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// csv or json.
    #[arg(long)]
    pub format: Option<String>,
    /// Worker threads; results do not depend on it.
    #[arg(long)]
    pub workers: Option<usize>,
    /// Print the effective config as JSON and exit.
    #[arg(long)]
    pub print_config: bool,
}

fn load_config(path: &Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    let trimmed = text.trim_start();
    let is_output = trimmed.starts_with('#') || serde_json::from_str::<serde_json::Value>(&text).is_ok_and(|v| v.get("meta").is_some());
    if is_output {
        return Ok(ExperimentOutput::parse(&text)?.meta.config);
    }
    ExperimentConfig::from_json(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

/// Effective config of a subcommand: config file or preset, then flags.
pub fn build_config(kind: ExperimentKind, a: &RunArgs) -> Result<ExperimentConfig> {
    let mut c = match &a.config {
        Some(path) => {
            let c = load_config(path)?;
            if c.kind != kind {
                return Err(Error::Config(format!("{} holds a {} config, not {kind}", path.display(), c.kind)));
            }
            c
        }
        None => ExperimentConfig::preset(kind, a.preset.parse::<Preset>()?),
    };
    if !a.method.is_empty() {
        c.methods = a.method.clone();
    }
    if !a.scheme.is_empty() {
        c.schemes = a.scheme.clone();
    }
    macro_rules! set {
        ($($flag:ident => $($field:ident).+),* $(,)?) => {
            $(if let Some(v) = a.$flag { c.$($field).+ = v; })*
        };
    }
    set!(
        n_traj => n_traj,
        seed => seed,
        t_max => t_max,
        n_times => n_times,
        delta => delta,
        u => u,
        f => f,
        gamma => gamma,
        trajectory => trajectory,
        reference => reference,
        wigner_points => wigner_points,
        tail_threshold => solver.tail_threshold,
        failure_budget => solver.failure_budget,
    );
    if let Some(dt) = a.dt {
        c.solver.dt_pc = dt;
        c.solver.dt_diffusive = dt;
        c.solver.dt_twa = dt;
    }
    set!(dt_pc => solver.dt_pc, dt_diffusive => solver.dt_diffusive, dt_twa => solver.dt_twa);
    if a.n_traj_twa.is_some() {
        c.n_traj_twa = a.n_traj_twa;
    }
    if a.n_levels.is_some() {
        c.solver.n_levels = a.n_levels;
    }
    if a.oracle_levels.is_some() {
        c.oracle_levels = a.oracle_levels;
    }
    if a.pump_off.is_some() {
        c.pump_off = a.pump_off;
    }
    if a.wigner_half_width.is_some() {
        c.wigner_half_width = a.wigner_half_width;
    }
    if a.workers.is_some() {
        c.solver.workers = a.workers;
    }
    if let Some(alpha) = a.alpha {
        c.initial = InitialState::Coherent { alpha };
    }
    if a.vacuum {
        c.initial = InitialState::Vacuum;
    }
    if !a.f_values.is_empty() {
        c.f_values = a.f_values.clone();
    }
    if !a.snapshot_times.is_empty() {
        c.snapshot_times = a.snapshot_times.clone();
    }
    if let Some(f) = &a.format {
        c.format = f.parse::<OutputFormat>()?;
    }
    c.validate()?;
    Ok(c)
}

fn execute(cli: &Cli) -> Result<()> {
    let a = cli.command.args();
    let cfg = build_config(cli.command.kind(), a)?;
    if a.print_config {
        println!("{}", serde_json::to_string_pretty(&cfg)?);
        return Ok(());
    }
    let out = run_experiment(&cfg)?;
    let text = out.render(cfg.format)?;
    match &a.out {
        Some(path) => std::fs::write(path, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

/// Parses `args` (program name first), runs, and returns the exit status.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).try_init();
    match execute(&cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn args(line: &str) -> Cli {
        Cli::try_parse_from(line.split_whitespace()).unwrap()
    }

    #[test]
    fn flags_override_the_preset() {
        let cli = args("gtraj phase-diffusion --preset desk --method exact,twa --scheme het --n-traj 7 --seed 9 --dt 2e-3 --alpha 3,-1 --n-levels 50 --t-max 0.2 --workers 2 --format json");
        let c = build_config(cli.command.kind(), cli.command.args()).unwrap();
        assert_eq!(c.methods, vec![Method::Exact, Method::Twa]);
        assert_eq!(c.schemes, vec![UnravelingScheme::Heterodyne]);
        assert_eq!((c.n_traj, c.seed), (7, 9));
        assert_eq!((c.solver.dt_pc, c.solver.dt_diffusive, c.solver.dt_twa), (2e-3, 2e-3, 2e-3));
        assert_eq!(c.initial.alpha(), Complex64::new(3.0, -1.0));
        assert_eq!(c.solver.n_levels, Some(50));
        assert_eq!(c.solver.workers, Some(2));
        assert_eq!(c.t_max, 0.2);
        assert_eq!(c.format, OutputFormat::Json);
    }

    #[test]
    fn negative_values_parse() {
        let cli = args("gtraj oracle --delta -1.5 --f-values -1,2");
        let c = build_config(cli.command.kind(), cli.command.args()).unwrap();
        assert_eq!(c.delta, -1.5);
        assert_eq!(c.f_values, vec![-1.0, 2.0]);
    }

    #[test]
    fn exit_codes() {
        assert_eq!(exit_code(&Error::Config("x".into())), EXIT_CONFIG);
        assert_eq!(
            exit_code(&Error::FailureBudget {
                failed: 2,
                total: 10,
                budget: 1.0,
                first: "x".into()
            }),
            EXIT_FAILURE_BUDGET
        );
        assert_eq!(
            exit_code(&Error::Truncation {
                tail: 1.0,
                threshold: 1e-8,
                n_levels: 10
            }),
            EXIT_TRUNCATION
        );
        assert_eq!(run(["gtraj", "oracle", "--method", "bogus"]), EXIT_CONFIG);
        assert_eq!(run(["gtraj", "nonsense"]), EXIT_CONFIG);
        assert_eq!(run(["gtraj", "oracle", "--n-times", "0", "--preset", "huge"]), EXIT_CONFIG);
    }

    #[test]
    fn config_kind_must_match_subcommand() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.json");
        std::fs::write(&path, r#"{"kind": "oracle", "f_values": [1.0]}"#).unwrap();
        let a = RunArgs {
            config: Some(path),
            preset: "paper".into(),
            ..RunArgs::default()
        };
        assert!(build_config(ExperimentKind::Oracle, &a).is_ok());
        let err = build_config(ExperimentKind::Wigner, &a).unwrap_err();
        assert!(err.to_string().contains("not wigner"), "{err}");
    }
}
