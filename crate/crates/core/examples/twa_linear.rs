//! Truncated Wigner sampling of the linear cavity against its closed form:
//! a coherent state relaxing to `α_ss = iF / (iΔ − γ/2)`.

use gtraj::twa::{twa_advance, twa_initial_sample, twa_observables};
use gtraj::{KerrParams, RngStream};
use num_complex::Complex64;

fn main() -> gtraj::Result<()> {
    let p = KerrParams::new(1.0, 0.0, 1.0);
    let a0 = Complex64::new(1.0, 0.5);
    let lambda = Complex64::new(-0.5, p.delta);
    let a_ss = Complex64::new(0.0, 1.0) * p.f / lambda;
    let mut samples: Vec<_> = (0..20_000u64)
        .map(|k| twa_initial_sample(a0, &mut RngStream::for_trajectory(1, k)))
        .collect();
    let mut rng = RngStream::new(2);
    let mut now = 0.0;
    for t in [0.5, 1.0, 2.0, 4.0] {
        for s in samples.iter_mut() {
            *s = twa_advance(*s, &p, 1e-2, now, t, &mut rng)?;
        }
        now = t;
        let m = twa_observables(&samples)?;
        let exact = a_ss + (a0 - a_ss) * (lambda * t).exp();
        println!(
            "t = {t}: <a> = {:.3} (exact {:.3}), <n> = {:.3} (exact {:.3}), Var X = {:.3}",
            m.mean_a,
            exact,
            m.mean_n,
            exact.norm_sqr(),
            m.var_x
        );
    }
    Ok(())
}
