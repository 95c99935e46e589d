//! Kerr phase diffusion of a coherent state under heterodyne detection:
//! total quadrature variance from each trajectory method.

use gtraj::ensemble::{run_ensemble, EnsembleSpec, EnsembleStats, InitialState, Method, SolverSettings, TimeGrid};
use gtraj::{KerrParams, UnravelingScheme};
use num_complex::Complex64;

fn main() -> gtraj::Result<()> {
    let grid = TimeGrid::uniform(0.0, 0.3, 7)?;
    let mut columns = Vec::new();
    for method in [Method::Exact, Method::Xp, Method::Ntheta, Method::Twa] {
        let spec = EnsembleSpec {
            method,
            scheme: UnravelingScheme::Heterodyne,
            params: KerrParams::new(100.0, 1.0, 0.0),
            pump_off: None,
            initial: InitialState::Coherent { alpha: Complex64::new(5.0, 0.0) },
            grid: grid.clone(),
            n_traj: 200,
            master_seed: 3,
            settings: SolverSettings::default(),
        };
        let stats = EnsembleStats::from_run(&run_ensemble(&spec)?)?;
        columns.push((method, stats));
    }
    print!("{:>5}", "t");
    for (m, _) in &columns {
        print!(" {:>8}", m.name());
    }
    println!("   (Var_total X)");
    for (i, t) in grid.sample_times.iter().enumerate() {
        print!("{t:>5.2}");
        for (_, s) in &columns {
            print!(" {:>8.3}", s.x[i].var_total);
        }
        println!();
    }
    Ok(())
}
