//! Three unravelings of the same master equation: the ensemble averages agree
//! with the density-matrix evolution, the individual records do not.

use gtraj::ensemble::{run_ensemble, EnsembleSpec, EnsembleStats, InitialState, Method, Observable, SolverSettings, TimeGrid};
use gtraj::fock::{DensityMatrix, FockState, Liouvillian};
use gtraj::{KerrParams, UnravelingScheme};

fn main() -> gtraj::Result<()> {
    let params = KerrParams::new(1.0, 0.05, 2.235);
    let t = 3.0;
    let rho = Liouvillian::new(params, 60)?.evolve(&DensityMatrix::from_pure(&FockState::vacuum(60)), t, 1e-3);
    println!("master equation: <n> = {:.4}", rho.moments().mean_n);

    for scheme in [UnravelingScheme::PhotonCounting, UnravelingScheme::Heterodyne, UnravelingScheme::HomodyneX] {
        let spec = EnsembleSpec {
            method: Method::Exact,
            scheme,
            params,
            pump_off: None,
            initial: InitialState::Vacuum,
            grid: TimeGrid::final_only(0.0, t)?,
            n_traj: 200,
            master_seed: 7,
            settings: SolverSettings {
                n_levels: Some(60),
                ..SolverSettings::default()
            },
        };
        let stats = EnsembleStats::from_run(&run_ensemble(&spec)?)?;
        let n = stats.estimate(Observable::N, 0);
        let s = stats.n[0];
        println!(
            "{scheme:>16}: <n> = {:.3} ± {:.3}   var_intra = {:.2}, var_inter = {:.2}",
            n.value, n.std_error, s.var_intra, s.var_inter
        );
    }
    Ok(())
}
