//! Wigner function of a phase-diffused state, exact and from the two
//! Gaussian ansätze, printed as coarse ASCII maps.

use gtraj::fock::{FockState, KerrFock};
use gtraj::ntheta::{ntheta_free_evolution_exact, wigner_from_ntheta, NThetaState};
use gtraj::unravel::JumpModel;
use gtraj::wigner::{wigner_from_fock, PhaseSpaceGrid, WignerMap};
use gtraj::xp::{wigner_from_xp, XpConfig, XpSolver, XpState};
use gtraj::KerrParams;
use num_complex::Complex64;

fn show(name: &str, w: &WignerMap) {
    println!("{name}: mass {:.3}, peak {:.3}", w.mass, w.peak());
    let shades = [' ', '.', ':', '+', '#'];
    for j in (0..w.grid.np).rev().step_by(2) {
        let row: String = (0..w.grid.nx)
            .map(|i| {
                let v = (w.at(i, j) / w.peak()).clamp(0.0, 0.999);
                shades[(v * shades.len() as f64) as usize]
            })
            .collect();
        println!("  {row}");
    }
}

fn main() -> gtraj::Result<()> {
    // Δ = U(n − 1/2) cancels the mean Kerr rotation; the blob only shears
    let p = KerrParams::new(15.5, 1.0, 0.0);
    let alpha = Complex64::new(4.0, 0.0);
    let t = 0.08;
    let grid = PhaseSpaceGrid::centered(3.5, 0.0, 2.5, 41);

    let fock = KerrFock::new(p, 60)?.evolve(&FockState::coherent(alpha, 60), t)?;
    show("exact (no-click)", &wigner_from_fock(&fock, &grid)?);
    let xp = XpSolver::new(p, XpConfig::default())?.evolve(&XpState::coherent(alpha), t)?;
    show("XP-Gaussian", &wigner_from_xp(&xp, &grid)?);
    let nt = ntheta_free_evolution_exact(&NThetaState::from_alpha(alpha), &p, t)?;
    show("NΘ-Gaussian", &wigner_from_ntheta(&nt, &grid)?);
    Ok(())
}
