//! One photon-counting trajectory of the bistable cavity, exact and
//! XP-Gaussian, driven by the same jump thresholds.

use gtraj::ensemble::{run_trajectory, EnsembleSpec, InitialState, Method, SolverSettings, TimeGrid};
use gtraj::{KerrParams, UnravelingScheme};

fn main() -> gtraj::Result<()> {
    let mut spec = EnsembleSpec {
        method: Method::Exact,
        scheme: UnravelingScheme::PhotonCounting,
        params: KerrParams::new(1.0, 0.05, 2.235),
        pump_off: None,
        initial: InitialState::Vacuum,
        grid: TimeGrid::uniform(0.0, 20.0, 41)?,
        n_traj: 1,
        master_seed: 1,
        settings: SolverSettings {
            n_levels: Some(60),
            ..SolverSettings::default()
        },
    };
    let exact = run_trajectory(&spec, 0)?;
    spec.method = Method::Xp;
    let xp = run_trajectory(&spec, 0)?;

    println!("{:>6} {:>10} {:>10}", "t", "exact <n>", "xp <n>");
    for ((t, a), b) in spec.grid.sample_times.iter().zip(&exact.samples).zip(&xp.samples) {
        println!("{t:>6.1} {:>10.4} {:>10.4}", a.mean_n, b.mean_n);
    }
    println!("clicks: exact {}, xp {}", exact.jumps.len(), xp.jumps.len());
    Ok(())
}
