//! Truncated Wigner sampling of the Kerr cavity.
//!
//! Each sample follows
//! `dα = [−iF + (iΔ − γ/2)α − iU(|α|² − 1)α] dt + √(γ/2) dξ`
//! with `E[|dξ|²] = dt`, `E[dξ²] = 0`: the single-mode Wigner Fokker–Planck
//! equation with third-order derivatives dropped. Moments come out symmetrically
//! ordered and are converted to normal order in [`twa_observables`].

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{KerrParams, RngStream};
use crate::moments::DensityMatrixMoments;

/// One point in the Wigner plane. Not a physical state on its own.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TwaSample {
    pub alpha: Complex64,
}

/// Draws from the Wigner function of the coherent state `|α₀⟩`:
/// `α₀ + (η₁ + iη₂)/2`.
pub fn twa_initial_sample(alpha0: Complex64, rng: &mut RngStream) -> TwaSample {
    let eta = Complex64::new(rng.standard_normal(), rng.standard_normal());
    TwaSample { alpha: alpha0 + 0.5 * eta }
}

/// `(e^{z} − 1)/z`
fn phi1(z: Complex64) -> Complex64 {
    if z.norm() < 1e-5 {
        1.0 + z / 2.0 + z * z / 6.0
    } else {
        (z.exp() - 1.0) / z
    }
}

/// `(1 − e^{−x})/x`
fn decay_weight(x: f64) -> f64 {
    if x < 1e-8 {
        1.0 - 0.5 * x
    } else {
        -(-x).exp_m1() / x
    }
}

/// Step with a given noise increment `dξ`. The rotation-decay rate
/// `λ = iΔ − γ/2 − iU(|α|² − 1)` is frozen at the step start and integrated
/// exactly, and `dξ` is rescaled to the variance the decay accumulates over
/// the step, so the linear cavity is reproduced without time-step error.
pub fn twa_step_with(s: &TwaSample, p: &KerrParams, dt: f64, dxi: Complex64) -> TwaSample {
    let a = s.alpha;
    let lambda = Complex64::new(-0.5 * p.gamma, p.delta - p.u * (a.norm_sqr() - 1.0));
    let z = lambda * dt;
    let drive = Complex64::new(0.0, -1.0) * p.f;
    TwaSample {
        alpha: z.exp() * a + dt * phi1(z) * drive + (0.5 * p.gamma * decay_weight(p.gamma * dt)).sqrt() * dxi,
    }
}

/// One stochastic step.
pub fn twa_step(s: &TwaSample, p: &KerrParams, dt: f64, rng: &mut RngStream) -> TwaSample {
    let sd = (0.5 * dt).sqrt();
    let dxi = Complex64::new(sd * rng.standard_normal(), sd * rng.standard_normal());
    twa_step_with(s, p, dt, dxi)
}

/// Advances a sample from `t_from` to `t_to` in equal steps no larger than `dt`.
pub fn twa_advance(s: TwaSample, p: &KerrParams, dt: f64, t_from: f64, t_to: f64, rng: &mut RngStream) -> Result<TwaSample> {
    if t_to <= t_from {
        return Ok(s);
    }
    let n = crate::unravel::substeps(t_to - t_from, dt);
    let h = (t_to - t_from) / n as f64;
    let mut s = s;
    for _ in 0..n {
        s = twa_step(&s, p, h, rng);
    }
    if !(s.alpha.re.is_finite() && s.alpha.im.is_finite()) {
        return Err(Error::Instability(format!("TWA sample diverged to {}", s.alpha)));
    }
    Ok(s)
}

/// Normally ordered moments of a sample cloud.
///
/// `⟨a†a⟩ = ⟨|α|²⟩_W − 1/2`, `⟨a†a†aa⟩ = ⟨|α|⁴⟩_W − 2⟨|α|²⟩_W + 1/2`; the
/// quadrature (co)variances are symmetric already and taken directly with
/// population normalization.
pub fn twa_observables(samples: &[TwaSample]) -> Result<DensityMatrixMoments> {
    if samples.is_empty() {
        return Err(Error::Usage("no TWA samples".into()));
    }
    let inv = 1.0 / samples.len() as f64;
    let mut a = Complex64::new(0.0, 0.0);
    let mut aa = Complex64::new(0.0, 0.0);
    let (mut r2, mut r4) = (0.0, 0.0);
    for s in samples {
        let z = s.alpha;
        let n2 = z.norm_sqr();
        a += z;
        aa += z * z;
        r2 += n2;
        r4 += n2 * n2;
    }
    let (a, aa, r2, r4) = (a * inv, aa * inv, r2 * inv, r4 * inv);
    let mean_n = r2 - 0.5;
    let fact2 = r4 - 2.0 * r2 + 0.5;
    // ⟨aa⟩ is symmetric-ordered as is, so `from_raw` applies unchanged
    Ok(DensityMatrixMoments::from_raw(mean_n, fact2 + mean_n, fact2, a, aa))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn cloud(alpha0: Complex64, n: usize, seed: u64) -> Vec<TwaSample> {
        let mut rng = RngStream::new(seed);
        (0..n).map(|_| twa_initial_sample(alpha0, &mut rng)).collect()
    }

    #[test]
    fn vacuum_cloud_width() {
        let s = cloud(Complex64::new(0.0, 0.0), 1_000_000, 1);
        let m = twa_observables(&s).unwrap();
        assert!(m.mean_a.norm() < 5e-3);
        assert!((m.var_x / 0.25 - 1.0).abs() < 0.01, "{}", m.var_x);
        assert!((m.var_p / 0.25 - 1.0).abs() < 0.01);
        assert!(m.mean_n.abs() < 5e-3);
    }

    #[test]
    fn symmetric_ordering_offset() {
        let s = cloud(Complex64::new(10.0, 0.0), 400_000, 2);
        let r2: f64 = s.iter().map(|x| x.alpha.norm_sqr()).sum::<f64>() / s.len() as f64;
        // SE of |α|² is about √(100 / 4 · 2 / N)
        assert!((r2 - 100.5).abs() < 0.05, "{r2}");
        let m = twa_observables(&s).unwrap();
        assert!((m.g2.unwrap() - 1.0).abs() < 2e-3);
    }

    #[test]
    fn ordering_identities_on_exact_moments() {
        // unit ring plus as many points at the centre: E|δα|² = E|δα|⁴ = 1/2 and
        // ⟨δx²⟩ = 1/4, the coherent-state Wigner moments that enter
        let alpha0 = Complex64::new(1.3, -0.4);
        let pts: Vec<TwaSample> = (0..16)
            .map(|k| {
                let r = if k < 8 { 1.0 } else { 0.0 };
                let phi = std::f64::consts::FRAC_PI_4 * k as f64;
                TwaSample { alpha: alpha0 + Complex64::from_polar(r, phi) }
            })
            .collect();
        let m = twa_observables(&pts).unwrap();
        assert_relative_eq!(m.mean_n, alpha0.norm_sqr(), epsilon = 1e-12);
        assert_relative_eq!(m.g2.unwrap(), 1.0, epsilon = 1e-12);
        assert_relative_eq!(m.var_x, 0.25, epsilon = 1e-12);
    }

    #[test]
    fn two_seeds_same_distribution() {
        let mut a: Vec<f64> = cloud(Complex64::new(0.5, 0.0), 20_000, 3).iter().map(|s| s.alpha.re).collect();
        let mut b: Vec<f64> = cloud(Complex64::new(0.5, 0.0), 20_000, 4).iter().map(|s| s.alpha.re).collect();
        assert_ne!(a[0], b[0]);
        a.sort_by(f64::total_cmp);
        b.sort_by(f64::total_cmp);
        // two-sample Kolmogorov–Smirnov statistic
        let (mut i, mut j, mut d) = (0, 0, 0.0f64);
        while i < a.len() && j < b.len() {
            if a[i] <= b[j] {
                i += 1;
            } else {
                j += 1;
            }
            d = d.max((i as f64 / a.len() as f64 - j as f64 / b.len() as f64).abs());
        }
        // 1% critical value 1.63 √(2/N)
        assert!(d < 1.63 * (2.0 / 20_000.0f64).sqrt(), "{d}");
    }

    #[test]
    fn noiseless_linear_drift_is_exact() {
        let p = KerrParams::new(1.7, 0.0, 0.0);
        let a0 = Complex64::new(2.0, 1.0);
        let mut s = TwaSample { alpha: a0 };
        for _ in 0..1000 {
            s = twa_step_with(&s, &p, 1e-3, Complex64::new(0.0, 0.0));
        }
        let exact = a0 * (Complex64::new(-0.5, 1.7) * 1.0).exp();
        assert!((s.alpha - exact).norm() < 1e-12);
    }

    #[test]
    fn driven_linear_fixed_point() {
        let p = KerrParams::new(1.0, 0.0, 2.0);
        let fixed = Complex64::new(0.0, 1.0) * p.f / Complex64::new(-0.5, 1.0);
        let s = twa_step_with(&TwaSample { alpha: fixed }, &p, 0.1, Complex64::new(0.0, 0.0));
        assert!((s.alpha - fixed).norm() < 1e-12);
    }

    #[test]
    fn linear_decay_of_photon_number() {
        let p = KerrParams::new(0.0, 0.0, 0.0);
        let a0 = Complex64::new(3.0, 0.0);
        let mut rng = RngStream::new(5);
        let n = 20_000;
        let samples: Vec<TwaSample> = (0..n)
            .map(|_| {
                let s = twa_initial_sample(a0, &mut rng);
                twa_advance(s, &p, 1e-2, 0.0, 1.0, &mut rng).unwrap()
            })
            .collect();
        let m = twa_observables(&samples).unwrap();
        let exact = 9.0 * (-1.0f64).exp();
        assert!((m.mean_n / exact - 1.0).abs() < 0.02, "{} vs {exact}", m.mean_n);
        assert!((m.var_x - 0.25).abs() < 0.01, "{}", m.var_x);
    }

    #[test]
    fn coarse_steps_keep_the_vacuum_variance() {
        let p = KerrParams::new(0.0, 0.0, 0.0);
        let mut rng = RngStream::new(9);
        let n = 40_000;
        let samples: Vec<TwaSample> = (0..n)
            .map(|_| {
                let s = twa_initial_sample(Complex64::new(0.0, 0.0), &mut rng);
                twa_advance(s, &p, 0.5, 0.0, 5.0, &mut rng).unwrap()
            })
            .collect();
        let m = twa_observables(&samples).unwrap();
        // unweighted noise would settle at 0.25 · dt / (1 − e^{−dt}) ≈ 0.318
        let se = 0.25 * (2.0 / n as f64).sqrt();
        assert!((m.var_x - 0.25).abs() < 4.0 * se, "{}", m.var_x);
        assert!((m.var_p - 0.25).abs() < 4.0 * se, "{}", m.var_p);
    }

    #[test]
    fn empty_cloud_is_rejected() {
        assert!(twa_observables(&[]).is_err());
    }
}
