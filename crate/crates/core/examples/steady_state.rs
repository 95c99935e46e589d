//! Steady state of the Kerr cavity across the bistable region, from the
//! Liouvillian null space.

use gtraj::fock::lindblad_steady_state;
use gtraj::KerrParams;

fn main() -> gtraj::Result<()> {
    println!("{:>6} {:>10} {:>8} {:>10}", "F", "<n>", "g2", "residual");
    for k in 0..=8 {
        let f = 1.8 + 0.1 * k as f64;
        let ss = lindblad_steady_state(&KerrParams::new(1.0, 0.05, f), 80)?;
        println!("{f:>6.2} {:>10.4} {:>8.4} {:>10.2e}", ss.moments.mean_n, ss.moments.g2.unwrap_or(f64::NAN), ss.residual);
    }
    Ok(())
}
