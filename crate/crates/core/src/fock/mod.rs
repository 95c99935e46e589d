//! Numerically exact single-mode trajectories in a truncated number basis.
//!
//! The diagonal part of the no-click generator, `-i E_k - γk/2` with
//! `E_k = -Δk + U k(k-1)/2`, is integrated exactly; the drive is handled by a
//! classic RK4 in that interaction picture (Lawson RK4) for photon counting
//! and by an exponential Euler–Maruyama step for the diffusive unravelings.

mod banded;
pub mod liouvillian;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::model::{KerrParams, NoiseIncrement};
use crate::moments::DensityMatrixMoments;
use crate::unravel::{DiffusiveModel, JumpModel, JumpThreshold, PcStep};

pub use liouvillian::{lindblad_steady_state, DensityMatrix, Liouvillian, SteadyState};

/// Default bound on the occupation of the highest retained level.
pub const DEFAULT_TAIL_THRESHOLD: f64 = 1e-8;

const I: Complex64 = Complex64::new(0.0, 1.0);
const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Truncation heuristic `4 n_max + 40`; always confirmed by the tail check.
pub fn default_n_levels(n_max: f64) -> usize {
    (4.0 * n_max.max(0.0)).ceil() as usize + 40
}

/// Pure state over `|0⟩..|N-1⟩`, stored normalized, with the squared norm of
/// the unnormalized trajectory state kept as `log_norm`.
#[derive(Debug, Clone, PartialEq)]
pub struct FockState {
    amps: Vec<Complex64>,
    log_norm: f64,
}

impl FockState {
    pub fn vacuum(n_levels: usize) -> Self {
        Self::number(0, n_levels)
    }

    pub fn number(k: usize, n_levels: usize) -> Self {
        assert!(k < n_levels, "level {k} outside a {n_levels}-level basis");
        let mut amps = vec![ZERO; n_levels];
        amps[k] = Complex64::new(1.0, 0.0);
        Self { amps, log_norm: 0.0 }
    }

    /// Coherent state `|α⟩` restricted to the basis and renormalized.
    pub fn coherent(alpha: Complex64, n_levels: usize) -> Self {
        let mut amps = Vec::with_capacity(n_levels);
        let mut c = Complex64::new((-0.5 * alpha.norm_sqr()).exp(), 0.0);
        for k in 0..n_levels {
            amps.push(c);
            c *= alpha / ((k + 1) as f64).sqrt();
        }
        let mut s = Self { amps, log_norm: 0.0 };
        s.renormalize();
        s.log_norm = 0.0;
        s
    }

    pub fn from_amplitudes(amps: Vec<Complex64>) -> Result<Self> {
        if amps.is_empty() {
            return Err(Error::Domain("empty amplitude vector".into()));
        }
        let mut s = Self { amps, log_norm: 0.0 };
        let n2 = s.renormalize();
        if !(n2 > 0.0) || !n2.is_finite() {
            return Err(Error::Domain("amplitude vector has zero or non-finite norm".into()));
        }
        s.log_norm = 0.0;
        Ok(s)
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn n_levels(&self) -> usize {
        self.amps.len()
    }

    pub fn log_norm(&self) -> f64 {
        self.log_norm
    }

    /// Occupation of the highest retained level.
    pub fn tail_mass(&self) -> f64 {
        self.amps.last().map_or(0.0, |a| a.norm_sqr())
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    /// Rescales to unit norm, adds `ln ‖ψ‖²` to `log_norm`, returns `‖ψ‖²`.
    fn renormalize(&mut self) -> f64 {
        let n2 = self.norm_sqr();
        if n2 > 0.0 {
            let inv = 1.0 / n2.sqrt();
            for a in &mut self.amps {
                *a *= inv;
            }
            self.log_norm += n2.ln();
        }
        n2
    }

    /// Displaced squeezed vacuum `D(α) S(ξ)|0⟩` with `S(ξ) = exp((ξ* a² − ξ a†²)/2)`,
    /// so that `⟨δδ⟩ = −e^{iφ} sinh r cosh r` and `⟨δ†δ⟩ = sinh² r` for `ξ = r e^{iφ}`.
    pub fn displaced_squeezed(alpha: Complex64, xi: Complex64, n_levels: usize) -> Self {
        let (r, phi) = xi.to_polar();
        let mut amps = vec![ZERO; n_levels];
        let ratio = -Complex64::from_polar(r.tanh(), phi);
        // c_{2m} ∝ ratio^m √((2m)!) / (2^m m!)
        let mut c = Complex64::new(1.0 / r.cosh().sqrt(), 0.0);
        let mut k = 0;
        while k < n_levels {
            amps[k] = c;
            let m = (k / 2) as f64;
            c *= ratio * (((2.0 * m + 1.0) * (2.0 * m + 2.0)).sqrt() / (2.0 * (m + 1.0)));
            k += 2;
        }
        let mut s = Self { amps, log_norm: 0.0 };
        s.displace(alpha);
        s.renormalize();
        s.log_norm = 0.0;
        s
    }

    /// Applies `D(α) = exp(α a† − α* a)` by scaling and squaring of a Taylor series.
    fn displace(&mut self, alpha: Complex64) {
        let n = self.amps.len();
        if alpha == ZERO || n < 2 {
            return;
        }
        let reach = alpha.norm() * (n as f64).sqrt();
        let pieces = (reach / 0.25).ceil().max(1.0) as usize;
        let a = alpha / pieces as f64;
        let apply = |v: &[Complex64]| -> Vec<Complex64> {
            (0..n)
                .map(|k| {
                    let mut acc = ZERO;
                    if k > 0 {
                        acc += a * (k as f64).sqrt() * v[k - 1];
                    }
                    if k + 1 < n {
                        acc -= a.conj() * ((k + 1) as f64).sqrt() * v[k + 1];
                    }
                    acc
                })
                .collect()
        };
        for _ in 0..pieces {
            let mut term = self.amps.clone();
            let mut sum = self.amps.clone();
            for order in 1..30 {
                term = apply(&term).into_iter().map(|t| t / order as f64).collect();
                let size: f64 = term.iter().map(|t| t.norm_sqr()).sum();
                for (s, t) in sum.iter_mut().zip(&term) {
                    *s += t;
                }
                if size < 1e-34 {
                    break;
                }
            }
            self.amps = sum;
        }
    }

    /// `⟨a⟩` of the normalized state.
    pub fn mean_a(&self) -> Complex64 {
        self.amps
            .windows(2)
            .enumerate()
            .map(|(k, w)| w[0].conj() * w[1] * ((k + 1) as f64).sqrt())
            .sum()
    }
}

/// Moments of a normalized Fock-space state by direct summation.
pub fn fock_expectations(state: &FockState) -> DensityMatrixMoments {
    let a = state.amplitudes();
    let (mut n1, mut n2, mut f2) = (0.0, 0.0, 0.0);
    for (k, c) in a.iter().enumerate() {
        let w = c.norm_sqr();
        let kf = k as f64;
        n1 += kf * w;
        n2 += kf * kf * w;
        f2 += kf * (kf - 1.0) * w;
    }
    let mean_aa: Complex64 = a
        .windows(3)
        .enumerate()
        .map(|(k, w)| w[0].conj() * w[2] * (((k + 1) * (k + 2)) as f64).sqrt())
        .sum();
    DensityMatrixMoments::from_raw(n1, n2, f2, state.mean_a(), mean_aa)
}

/// Output of [`KerrFock::no_click_rates`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoClickRates {
    pub d_a: Complex64,
    pub d_aa: Complex64,
    pub d_n: f64,
    pub d_n2: f64,
    pub d_log_norm: f64,
}

/// Precomputed Kerr-cavity generator on a truncated basis.
#[derive(Debug, Clone)]
pub struct KerrFock {
    params: KerrParams,
    n_levels: usize,
    tail_threshold: f64,
    sqrt_k: Vec<f64>,
    /// diagonal no-click generator `-i E_k - γ k / 2`
    diag: Vec<Complex64>,
    /// cached `exp(diag h)` and `exp(diag h/2)` for the last nominal step
    cache: Option<(f64, Vec<Complex64>, Vec<Complex64>)>,
}

impl KerrFock {
    pub fn new(params: KerrParams, n_levels: usize) -> Result<Self> {
        params.validate()?;
        if n_levels < 2 {
            return Err(Error::InvalidParams("need at least two Fock levels".into()));
        }
        let sqrt_k = (0..=n_levels).map(|k| (k as f64).sqrt()).collect();
        let diag = (0..n_levels)
            .map(|k| {
                let kf = k as f64;
                let e = -params.delta * kf + 0.5 * params.u * kf * (kf - 1.0);
                Complex64::new(-0.5 * params.gamma * kf, -e)
            })
            .collect();
        Ok(Self {
            params,
            n_levels,
            tail_threshold: DEFAULT_TAIL_THRESHOLD,
            sqrt_k,
            diag,
            cache: None,
        })
    }

    pub fn with_tail_threshold(mut self, threshold: f64) -> Self {
        self.tail_threshold = threshold;
        self
    }

    /// Caches the propagator factors for a nominal step; other step sizes are
    /// still accepted and computed on the fly.
    pub fn with_step(mut self, dt: f64) -> Self {
        self.cache = Some((dt, self.exp_diag(dt), self.exp_diag(0.5 * dt)));
        self
    }

    pub fn params(&self) -> &KerrParams {
        &self.params
    }

    pub fn n_levels(&self) -> usize {
        self.n_levels
    }

    fn exp_diag(&self, h: f64) -> Vec<Complex64> {
        self.diag.iter().map(|d| (d * h).exp()).collect()
    }

    fn factors(&self, h: f64) -> (std::borrow::Cow<'_, [Complex64]>, std::borrow::Cow<'_, [Complex64]>) {
        use std::borrow::Cow;
        match &self.cache {
            Some((dt, full, half)) if *dt == h => (Cow::Borrowed(full), Cow::Borrowed(half)),
            _ => (Cow::Owned(self.exp_diag(h)), Cow::Owned(self.exp_diag(0.5 * h))),
        }
    }

    /// `out = -i (F a† + F* a) psi`
    fn drive(&self, psi: &[Complex64], out: &mut [Complex64]) {
        let f = self.params.f;
        let fc = f.conj();
        let n = self.n_levels;
        for k in 0..n {
            let mut acc = ZERO;
            if k > 0 {
                acc += f * self.sqrt_k[k] * psi[k - 1];
            }
            if k + 1 < n {
                acc += fc * self.sqrt_k[k + 1] * psi[k + 1];
            }
            out[k] = -I * acc;
        }
    }

    fn check_tail(&self, s: &FockState) -> Result<()> {
        let tail = s.tail_mass();
        if !(tail <= self.tail_threshold) {
            return Err(Error::Truncation {
                tail,
                threshold: self.tail_threshold,
                n_levels: self.n_levels,
            });
        }
        Ok(())
    }

    /// No-click propagation over `h` with Lawson RK4.
    fn lawson_rk4(&self, psi: &[Complex64], h: f64) -> Vec<Complex64> {
        let n = self.n_levels;
        let (full, half) = self.factors(h);
        let mut scratch = vec![ZERO; 5 * n];
        let (k1, rest) = scratch.split_at_mut(n);
        let (k2, rest) = rest.split_at_mut(n);
        let (k3, rest) = rest.split_at_mut(n);
        let (k4, tmp) = rest.split_at_mut(n);

        self.drive(psi, k1);
        for k in 0..n {
            tmp[k] = half[k] * (psi[k] + 0.5 * h * k1[k]);
        }
        self.drive(tmp, k2);
        for k in 0..n {
            tmp[k] = half[k] * psi[k] + 0.5 * h * k2[k];
        }
        self.drive(tmp, k3);
        for k in 0..n {
            tmp[k] = full[k] * psi[k] + h * half[k] * k3[k];
        }
        self.drive(tmp, k4);
        (0..n)
            .map(|k| {
                full[k] * psi[k] + h / 6.0 * (full[k] * k1[k] + 2.0 * half[k] * (k2[k] + k3[k]) + k4[k])
            })
            .collect()
    }

    /// Instantaneous rates of the normalized no-click expectation values
    /// `d⟨a⟩/dt`, `d⟨aa⟩/dt`, `d⟨a†a⟩/dt`, `d⟨(a†a)²⟩/dt` and `d ln‖ψ̃‖²/dt`.
    pub fn no_click_rates(&self, s: &FockState) -> NoClickRates {
        let n = self.n_levels;
        let psi = &s.amps;
        let mut dpsi = vec![ZERO; n];
        self.drive(psi, &mut dpsi);
        for k in 0..n {
            dpsi[k] += self.diag[k] * psi[k];
        }
        // d⟨ψ|O|ψ⟩ = ⟨ψ'|Oψ⟩ + ⟨ψ|Oψ'⟩ for the unnormalized state at unit norm
        let lower = |v: &[Complex64], w: &[Complex64], j: usize| -> Complex64 {
            (0..n.saturating_sub(j))
                .map(|k| {
                    let f: f64 = (1..=j).map(|q| self.sqrt_k[k + q]).product();
                    v[k].conj() * w[k + j] * f
                })
                .sum()
        };
        let diag_moment = |v: &[Complex64], w: &[Complex64], pow: i32| -> f64 {
            (0..n).map(|k| ((k as f64).powi(pow) * v[k].conj() * w[k]).re).sum()
        };
        let norm_rate = 2.0 * psi.iter().zip(&dpsi).map(|(p, d)| (p.conj() * d).re).sum::<f64>();
        let a = lower(psi, psi, 1);
        let aa = lower(psi, psi, 2);
        let n1 = diag_moment(psi, psi, 1);
        let n2 = diag_moment(psi, psi, 2);
        NoClickRates {
            d_a: lower(&dpsi, psi, 1) + lower(psi, &dpsi, 1) - a * norm_rate,
            d_aa: lower(&dpsi, psi, 2) + lower(psi, &dpsi, 2) - aa * norm_rate,
            d_n: 2.0 * diag_moment(psi, &dpsi, 1) - n1 * norm_rate,
            d_n2: 2.0 * diag_moment(psi, &dpsi, 2) - n2 * norm_rate,
            d_log_norm: norm_rate,
        }
    }

    /// Click update `ψ → aψ/‖aψ‖`.
    pub fn apply_jump(&self, s: &FockState) -> Result<FockState> {
        let n = s.n_levels();
        let mut amps = vec![ZERO; n];
        for k in 0..n - 1 {
            amps[k] = self.sqrt_k[k + 1] * s.amps[k + 1];
        }
        let mut out = FockState { amps, log_norm: 0.0 };
        let n2 = out.renormalize();
        if !(n2 > 0.0) {
            return Err(Error::NoJump("a|ψ⟩ vanishes".into()));
        }
        out.log_norm = 0.0;
        Ok(out)
    }
}

impl JumpModel for KerrFock {
    type State = FockState;

    fn log_norm(&self, s: &FockState) -> f64 {
        s.log_norm
    }

    fn evolve(&self, s: &FockState, h: f64) -> Result<FockState> {
        let mut out = FockState {
            amps: self.lawson_rk4(&s.amps, h),
            log_norm: s.log_norm,
        };
        let n2 = out.renormalize();
        if !(n2 > 0.0) || !n2.is_finite() {
            return Err(Error::Instability(format!("state norm became {n2}")));
        }
        if n2 > 1.0 + 1e-10 {
            return Err(Error::Instability(format!(
                "squared norm grew by {:.3e} over a no-click step of {h}",
                n2 - 1.0
            )));
        }
        self.check_tail(&out)?;
        Ok(out)
    }

    fn jump(&self, s: &FockState) -> Result<FockState> {
        let out = self.apply_jump(s)?;
        self.check_tail(&out)?;
        Ok(out)
    }
}

impl DiffusiveModel for KerrFock {
    type State = FockState;

    /// `d|ψ̃⟩ = (-iH - γ a†a/2) dt |ψ⟩ + a dY |ψ⟩`, diagonal part exact, then
    /// renormalized. `dY = 2(γ_x Re⟨a⟩ − iγ_p Im⟨a⟩) dt + √γ dZ*` is the
    /// measurement record; heterodyne gives `γ⟨a†⟩ dt + √γ dZ*`.
    fn step(&self, s: &FockState, dt: f64, noise: NoiseIncrement) -> Result<FockState> {
        let n = self.n_levels;
        let (full, _) = self.factors(dt);
        let g = self.params.gamma;
        let psi = &s.amps;
        let sq = &self.sqrt_k;
        let mean_a: Complex64 = (1..n).map(|k| psi[k - 1].conj() * psi[k] * sq[k]).sum();
        let (gx, gp) = (self.params.gamma_x, self.params.gamma_p);
        let coupling = 2.0 * dt * Complex64::new(gx * mean_a.re, -gp * mean_a.im) + g.sqrt() * noise.dz.conj();
        // −i dt (F a† + F* a) folded into the same pass
        let f = -I * dt * self.params.f;
        let fc = -I * dt * self.params.f.conj();
        let mut amps = Vec::with_capacity(n);
        for k in 0..n {
            let mut v = psi[k];
            if k > 0 {
                v += f * sq[k] * psi[k - 1];
            }
            if k + 1 < n {
                v += (fc + coupling) * sq[k + 1] * psi[k + 1];
            }
            amps.push(full[k] * v);
        }
        let mut out = FockState {
            amps,
            log_norm: s.log_norm,
        };
        let n2 = out.renormalize();
        if !(n2 > 0.0) || !n2.is_finite() {
            return Err(Error::Instability(format!("state norm became {n2}")));
        }
        self.check_tail(&out)?;
        Ok(out)
    }
}

/// One photon-counting step of width `dt` against threshold `R`.
///
/// On a click the returned state is already jumped; the caller draws a fresh
/// threshold and continues from `dt - jump_at`.
pub fn pc_trajectory_step(model: &KerrFock, state: &FockState, dt: f64, jump_threshold: f64) -> Result<PcStep<FockState>> {
    if !(jump_threshold > 0.0 && jump_threshold <= 1.0) {
        return Err(Error::Usage(format!("jump threshold {jump_threshold} outside (0, 1]")));
    }
    crate::unravel::pc_step(model, state, dt, JumpThreshold::from_r(jump_threshold))
}

/// One diffusive (heterodyne or homodyne-X) step.
pub fn diffusive_trajectory_step(model: &KerrFock, state: &FockState, dt: f64, noise: NoiseIncrement) -> Result<FockState> {
    DiffusiveModel::step(model, state, dt, noise)
}
