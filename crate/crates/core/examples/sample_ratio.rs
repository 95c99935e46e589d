//! How many point samples a trajectory is worth: the variance split of an
//! exact photon-counting ensemble and the resulting sample ratio.

use gtraj::ensemble::{run_ensemble, sample_ratio_criterion, EnsembleSpec, EnsembleStats, InitialState, Method, SolverSettings, TimeGrid};
use gtraj::{KerrParams, UnravelingScheme};
use num_complex::Complex64;

fn main() -> gtraj::Result<()> {
    let spec = EnsembleSpec {
        method: Method::Exact,
        scheme: UnravelingScheme::PhotonCounting,
        params: KerrParams::new(100.0, 1.0, 0.0),
        pump_off: None,
        initial: InitialState::Coherent { alpha: Complex64::new(5.0, 0.0) },
        grid: TimeGrid::uniform(0.0, 0.3, 7)?,
        n_traj: 300,
        master_seed: 5,
        settings: SolverSettings::default(),
    };
    let stats = EnsembleStats::from_run(&run_ensemble(&spec)?)?;
    println!("{:>5} {:>10} {:>10} {:>8}", "t", "var_intra", "var_inter", "ratio");
    for p in &stats.x {
        let r = sample_ratio_criterion(p);
        let shown = if r.infinite { "inf".to_owned() } else { format!("{:.2}", r.value) };
        println!("{:>5.2} {:>10.4} {:>10.4} {shown:>8}", p.t, p.var_intra, p.var_inter);
    }
    Ok(())
}
