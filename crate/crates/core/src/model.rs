//! Physical parameters, unraveling selection and the random streams shared by
//! every solver.
//!
//! All rates and times are in units of the total loss rate, so `gamma` is 1 for
//! every configuration built through [`KerrParams::new`].

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Driven-dissipative Kerr cavity,
/// `H = -Δ a†a + U/2 a†a†aa + F a† + F* a`, loss rate `γ = γ_X + γ_P`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KerrParams {
    pub delta: f64,
    pub u: f64,
    pub f: Complex64,
    pub gamma: f64,
    pub gamma_x: f64,
    pub gamma_p: f64,
}

impl KerrParams {
    /// Parameters in units of γ with the heterodyne (equal) measurement split.
    pub fn new(delta: f64, u: f64, f: impl Into<Complex64>) -> Self {
        Self {
            delta,
            u,
            f: f.into(),
            gamma: 1.0,
            gamma_x: 0.5,
            gamma_p: 0.5,
        }
    }

    /// Same cavity, measurement split matching `scheme`.
    ///
    /// Photon counting does not use the split; it keeps the heterodyne one.
    pub fn for_scheme(mut self, scheme: UnravelingScheme) -> Self {
        match scheme {
            UnravelingScheme::HomodyneX => {
                self.gamma_x = self.gamma;
                self.gamma_p = 0.0;
            }
            UnravelingScheme::Heterodyne | UnravelingScheme::PhotonCounting => {
                self.gamma_x = 0.5 * self.gamma;
                self.gamma_p = 0.5 * self.gamma;
            }
        }
        self
    }

    pub fn with_drive(mut self, f: impl Into<Complex64>) -> Self {
        self.f = f.into();
        self
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [self.delta, self.u, self.f.re, self.f.im, self.gamma]
            .iter()
            .all(|v| v.is_finite());
        if !finite {
            return Err(Error::InvalidParams("non-finite parameter".into()));
        }
        if !(self.gamma > 0.0) {
            return Err(Error::InvalidParams(format!("gamma must be > 0, got {}", self.gamma)));
        }
        if self.gamma_x < 0.0 || self.gamma_p < 0.0 {
            return Err(Error::InvalidParams("measurement rates must be nonnegative".into()));
        }
        if self.gamma_x + self.gamma_p != self.gamma {
            return Err(Error::InvalidParams(format!(
                "gamma_x + gamma_p = {} differs from gamma = {}",
                self.gamma_x + self.gamma_p,
                self.gamma
            )));
        }
        Ok(())
    }

    pub fn is_heterodyne(&self) -> bool {
        self.gamma_x == 0.5 * self.gamma && self.gamma_p == 0.5 * self.gamma
    }

    pub fn is_homodyne_x(&self) -> bool {
        self.gamma_x == self.gamma && self.gamma_p == 0.0
    }
}

/// Measurement protocol on the cavity output.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum UnravelingScheme {
    PhotonCounting,
    Heterodyne,
    HomodyneX,
}

impl UnravelingScheme {
    pub fn short_name(self) -> &'static str {
        match self {
            Self::PhotonCounting => "pc",
            Self::Heterodyne => "het",
            Self::HomodyneX => "homx",
        }
    }

    pub fn is_diffusive(self) -> bool {
        !matches!(self, Self::PhotonCounting)
    }
}

impl fmt::Display for UnravelingScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.short_name())
    }
}

impl FromStr for UnravelingScheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "pc" | "photon-counting" => Ok(Self::PhotonCounting),
            "het" | "heterodyne" => Ok(Self::Heterodyne),
            "homx" | "hom" | "homodyne-x" | "homodyne" => Ok(Self::HomodyneX),
            other => Err(Error::Config(format!("unknown scheme `{other}`"))),
        }
    }
}

/// One Itô increment `dZ` of the measurement noise over a step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseIncrement {
    pub dz: Complex64,
}

impl NoiseIncrement {
    pub const ZERO: Self = Self { dz: Complex64::new(0.0, 0.0) };
}

/// Seeded, portable pseudo-random stream owned by a single trajectory.
///
/// Backed by ChaCha12, whose output is specified bit-for-bit independently of
/// the platform.
#[derive(Debug, Clone)]
pub struct RngStream {
    rng: ChaCha12Rng,
}

impl RngStream {
    pub fn new(seed: u64) -> Self {
        Self {
            rng: ChaCha12Rng::seed_from_u64(seed),
        }
    }

    /// Stream for trajectory `index` of an ensemble seeded with `master_seed`.
    pub fn for_trajectory(master_seed: u64, index: u64) -> Self {
        Self::new(derive_trajectory_seed(master_seed, index))
    }

    /// Uniform draw on `(0, 1]`.
    pub fn uniform(&mut self) -> f64 {
        1.0 - self.rng.random::<f64>()
    }

    pub fn standard_normal(&mut self) -> f64 {
        self.rng.sample(StandardNormal)
    }
}

/// Draws the Wiener increment of one diffusive step.
///
/// Heterodyne: `dZ = (dW_X + i dW_P)/√2`; homodyne-X: `dZ = dW_X`.
pub fn sample_noise(rng: &mut RngStream, dt: f64, scheme: UnravelingScheme) -> Result<NoiseIncrement> {
    if !(dt > 0.0) {
        return Err(Error::Usage(format!("dt must be > 0, got {dt}")));
    }
    let sd = dt.sqrt();
    match scheme {
        UnravelingScheme::PhotonCounting => Err(Error::Usage(
            "photon counting consumes jump thresholds, not Wiener noise".into(),
        )),
        UnravelingScheme::Heterodyne => {
            let dwx = sd * rng.standard_normal();
            let dwp = sd * rng.standard_normal();
            Ok(NoiseIncrement {
                dz: Complex64::new(dwx, dwp) * std::f64::consts::FRAC_1_SQRT_2,
            })
        }
        UnravelingScheme::HomodyneX => Ok(NoiseIncrement {
            dz: Complex64::new(sd * rng.standard_normal(), 0.0),
        }),
    }
}

fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Per-trajectory seed. For a fixed master seed this is a bijection of the
/// index, so distinct trajectories never share a stream.
pub fn derive_trajectory_seed(master_seed: u64, trajectory_index: u64) -> u64 {
    let base = mix64(master_seed ^ 0x6a09_e667_f3bc_c908);
    mix64(base.wrapping_add(trajectory_index.wrapping_mul(0x9e37_79b9_7f4a_7c15)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    #[test]
    fn params_validation() {
        let p = KerrParams::new(1.0, 0.05, 2.235);
        p.validate().unwrap();
        assert!(p.is_heterodyne());
        let h = p.for_scheme(UnravelingScheme::HomodyneX);
        h.validate().unwrap();
        assert!(h.is_homodyne_x());
        let mut bad = p;
        bad.gamma_x = 0.7;
        assert!(bad.validate().is_err());
        bad = p;
        bad.gamma = -1.0;
        assert!(bad.validate().is_err());
    }

    #[test]
    fn photon_counting_noise_is_a_usage_error() {
        let mut rng = RngStream::new(1);
        assert!(matches!(
            sample_noise(&mut rng, 1e-3, UnravelingScheme::PhotonCounting),
            Err(Error::Usage(_))
        ));
        assert!(sample_noise(&mut rng, 0.0, UnravelingScheme::Heterodyne).is_err());
    }

    #[test]
    fn heterodyne_moments() {
        let mut rng = RngStream::new(11);
        let dt = 1e-3;
        let n = 1_000_000;
        let mut mean = Complex64::new(0.0, 0.0);
        let mut abs2 = 0.0;
        let mut sq = Complex64::new(0.0, 0.0);
        for _ in 0..n {
            let dz = sample_noise(&mut rng, dt, UnravelingScheme::Heterodyne).unwrap().dz;
            mean += dz;
            abs2 += dz.norm_sqr();
            sq += dz * dz;
        }
        let nf = n as f64;
        mean /= nf;
        abs2 /= nf;
        sq /= nf;
        assert!((abs2 - dt).abs() / dt < 0.01, "E|dz|^2 = {abs2}");
        // sd of the sample mean of each component is sqrt(dt/2/n) ~ 2.2e-5
        assert!(mean.norm() < 1.5e-4, "mean {mean}");
        // E[dz^2] = 0; each component of dz^2 has sd ~ dt/sqrt(2n)
        let bound = 3e-3 * (dt * dt).sqrt();
        assert!(sq.norm() < bound, "E[dz^2] = {sq}, bound {bound}");
    }

    #[test]
    fn homodyne_noise_is_real() {
        let mut rng = RngStream::new(3);
        let mut m2 = 0.0;
        let n = 200_000;
        for _ in 0..n {
            let dz = sample_noise(&mut rng, 1e-3, UnravelingScheme::HomodyneX).unwrap().dz;
            assert_eq!(dz.im, 0.0);
            m2 += dz.re * dz.re;
        }
        assert!((m2 / n as f64 - 1e-3).abs() < 2e-5);
    }

    #[test]
    fn seeds_are_deterministic_and_distinct() {
        assert_eq!(derive_trajectory_seed(7, 0), derive_trajectory_seed(7, 0));
        assert_ne!(derive_trajectory_seed(7, 0), derive_trajectory_seed(7, 1));
        let set: HashSet<u64> = (0..10_000).map(|k| derive_trajectory_seed(7, k)).collect();
        assert_eq!(set.len(), 10_000);
    }

    #[test]
    fn streams_reproduce() {
        let mut a = RngStream::for_trajectory(5, 9);
        let mut b = RngStream::for_trajectory(5, 9);
        for _ in 0..100 {
            assert_eq!(a.standard_normal().to_bits(), b.standard_normal().to_bits());
            let u = a.uniform();
            assert!(u > 0.0 && u <= 1.0);
            assert_eq!(u.to_bits(), b.uniform().to_bits());
        }
    }
}
