//! Expanded correlators of a state Gaussian in density and phase.
//!
//! Phase fluctuations are resummed to all orders through the common factor
//! `e^{-i⟨θ⟩ - ⟨δθδθ⟩/2}`; density fluctuations are kept to second order.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::NThetaState;
use crate::error::{Error, Result};

const I: Complex64 = Complex64::new(0.0, 1.0);

/// `c1 = ⟨√n e^{-iθ}⟩`, `c2 = ⟨δn √n e^{-iθ}⟩`, `c3 = ⟨n^{-1/2} e^{-iθ}⟩`,
/// `c4 = ⟨n^{-1/2} δθ e^{-iθ}⟩`, `c5 = ⟨n^{-3/2} e^{-iθ}⟩`, `c6 = ⟨√n δθ e^{-iθ}⟩`,
/// `c7 = ⟨δn n^{-1/2} e^{-iθ}⟩`, `d1 = ⟨√n δθ δθ e^{-iθ}⟩`,
/// `d2 = ⟨√n δn δθ e^{-iθ}⟩`, `d3 = ⟨√n δn δn e^{-iθ}⟩`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorrelatorSet {
    pub c1: Complex64,
    pub c2: Complex64,
    pub c3: Complex64,
    pub c4: Complex64,
    pub c5: Complex64,
    pub c6: Complex64,
    pub c7: Complex64,
    pub d1: Complex64,
    pub d2: Complex64,
    pub d3: Complex64,
}

pub fn correlators(s: &NThetaState) -> Result<CorrelatorSet> {
    let n = s.n;
    if !(n > 0.0) || !n.is_finite() {
        return Err(Error::Domain(format!("correlators need n > 0, got {n}")));
    }
    let (vn, vt, cv) = (s.var_n, s.var_theta, s.cov);
    let e = Complex64::from_polar((-0.5 * vt).exp(), -s.theta);
    let sq = n.sqrt();
    let h = 1.0 / (2.0 * n);
    let h2 = 1.0 / (8.0 * n * n);
    // ⟨δn δθ⟩ unsymmetrized
    let q = cv + 0.5 * I;
    let q2 = q * q;

    let c1 = sq * e * (1.0 + h * Complex64::new(0.5, -cv) - vn * h2);
    let c2 = sq * e * (Complex64::new(0.5, -cv) + h * (vn + 0.25 - 0.5 * I * cv - cv * cv) + 3.0 * h2 * (-0.5 * vn + I * cv * vn));
    let c3 = e / sq * (1.0 + h * Complex64::new(-0.5, cv) + 3.0 * vn * h2);
    let c4 = e / sq * (-I * vt - h * q * (1.0 - vt) - 3.0 * I * h2 * (2.0 * q2 + vn * vt));
    let c5 = e / (sq * n) * (1.0 + h * Complex64::new(-1.5, 3.0 * cv) + 15.0 * vn * h2);
    let c6 = sq * e * (-I * vt + h * q * (1.0 - vt) + I * h2 * (2.0 * q2 + vn * vt));
    let c7 = sq * e * (h * Complex64::new(1.0, -2.0 * cv) - 4.0 * vn * h2);
    let d1 = sq * e * ((1.0 - vt) * vt - I * h * (3.0 * vt - vt * vt) * q - h2 * (vn * vt + 2.0 * q2));
    let d2 = sq * e * (q * (1.0 - vt) - I * h * (vn * vt + q2 * (2.0 - vt)) - 3.0 * h2 * vn * q);
    let d3 = sq * e * (vn - q2 - I * h * (3.0 * vn * q - 6.0 * q2 * q) - 3.0 * vn * h2);
    Ok(CorrelatorSet { c1, c2, c3, c4, c5, c6, c7, d1, d2, d3 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn state(n: f64, var_n: f64, theta: f64, var_theta: f64, cov: f64) -> NThetaState {
        NThetaState { n, var_n, theta, var_theta, cov, log_norm: 0.0 }
    }

    #[test]
    fn zero_fluctuation_limit() {
        let c = correlators(&state(4.0, 0.0, 0.0, 0.0, 0.0)).unwrap();
        assert_relative_eq!(c.c1.re, 2.0 * (1.0 + 1.0 / 16.0), epsilon = 1e-15);
        assert_eq!(c.c1.im, 0.0);
        // c3 n and c1 agree up to O(1/n)
        assert!((c.c3 * 4.0 - c.c1).norm() < 2.0 / 4.0);
        assert_relative_eq!(c.c5.re, (1.0 - 3.0 / 16.0) / 8.0, epsilon = 1e-15);
        assert_relative_eq!(c.c7.re, 0.25, epsilon = 1e-15);
    }

    #[test]
    fn global_phase_factor() {
        let a = correlators(&state(50.0, 20.0, 0.0, 0.3, 0.1)).unwrap();
        let b = correlators(&state(50.0, 20.0, 1.1, 0.3, 0.1)).unwrap();
        let rot = Complex64::from_polar(1.0, -1.1);
        for (x, y) in [(a.c1, b.c1), (a.c4, b.c4), (a.d2, b.d2), (a.d3, b.d3)] {
            assert!((x * rot - y).norm() < 1e-12);
        }
    }

    #[test]
    fn series_consistency() {
        // n c3 and c1 share their leading term; the mismatch shrinks as 1/n
        // (with ⟨δnδn⟩ = n they coincide exactly)
        let mut last = f64::INFINITY;
        for n in [25.0, 100.0, 400.0] {
            let c = correlators(&state(n, 0.5 * n, 0.4, 1.0 / (2.0 * n), 0.0)).unwrap();
            let rel = (c.c3 * n - c.c1).norm() / c.c1.norm();
            assert!(rel < 0.6 / n && rel < last);
            last = rel;
        }
    }

    #[test]
    fn nonpositive_density_is_rejected() {
        assert!(correlators(&state(0.0, 1.0, 0.0, 1.0, 0.0)).is_err());
    }
}
