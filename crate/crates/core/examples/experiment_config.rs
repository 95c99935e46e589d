//! Running an experiment from a configuration and reading its output back:
//! the embedded configuration reproduces the data.

use gtraj::experiments::{run_experiment, ExperimentConfig, ExperimentKind, ExperimentOutput, OutputFormat, Preset};

fn main() -> gtraj::Result<()> {
    let mut cfg = ExperimentConfig::preset(ExperimentKind::Oracle, Preset::Desk);
    cfg.f_values = vec![1.9, 2.2, 2.5];
    let out = run_experiment(&cfg)?;
    let csv = out.render(OutputFormat::Csv)?;
    println!("{csv}");

    let back = ExperimentOutput::parse(&csv)?;
    let again = run_experiment(&back.meta.config)?;
    assert_eq!(again.render(OutputFormat::Csv)?, csv);
    println!("re-run from the embedded config: identical");
    Ok(())
}
