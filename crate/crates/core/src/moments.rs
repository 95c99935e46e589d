use num_complex::Complex64;
use serde::{Deserialize, Serialize};

/// Single-mode moments extracted from a state (or a phase-space sample).
///
/// Quadratures follow `X = (a + a†)/2`, `P = (a − a†)/2i`, so the vacuum has
/// `var_x = var_p = 1/4`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DensityMatrixMoments {
    /// ⟨a†a⟩
    pub mean_n: f64,
    /// ⟨(a†a)²⟩ − ⟨a†a⟩²
    pub var_n: f64,
    /// ⟨a†a†aa⟩
    pub fact2: f64,
    /// `fact2 / mean_n²`; absent for an empty mode.
    pub g2: Option<f64>,
    pub mean_a: Complex64,
    pub var_x: f64,
    pub var_p: f64,
    /// Symmetrized covariance ⟨{δX, δP}⟩/2.
    pub cov_xp: f64,
}

/// Below this photon number g² is reported as absent.
pub(crate) const G2_EMPTY: f64 = 1e-14;

impl DensityMatrixMoments {
    /// Builds the moment set from normally ordered raw moments
    /// `⟨a†a⟩`, `⟨(a†a)²⟩`, `⟨a†a†aa⟩`, `⟨a⟩`, `⟨aa⟩`.
    pub fn from_raw(mean_n: f64, n_sq: f64, fact2: f64, mean_a: Complex64, mean_aa: Complex64) -> Self {
        let x = mean_a.re;
        let p = mean_a.im;
        let var_x = (2.0 * mean_aa.re + 2.0 * mean_n + 1.0) / 4.0 - x * x;
        let var_p = (-2.0 * mean_aa.re + 2.0 * mean_n + 1.0) / 4.0 - p * p;
        let cov_xp = mean_aa.im / 2.0 - x * p;
        Self {
            mean_n,
            var_n: n_sq - mean_n * mean_n,
            fact2,
            g2: g2_of(fact2, mean_n),
            mean_a,
            var_x,
            var_p,
            cov_xp,
        }
    }

    pub fn mean_x(&self) -> f64 {
        self.mean_a.re
    }

    pub fn mean_p(&self) -> f64 {
        self.mean_a.im
    }
}

pub(crate) fn g2_of(fact2: f64, mean_n: f64) -> Option<f64> {
    (mean_n > G2_EMPTY).then(|| fact2 / (mean_n * mean_n))
}
