//! Trajectories Gaussian in photon number and phase (`a = e^{iθ} √n`,
//! `[n, θ] = i`), valid at high density and localized phase.

mod correlators;

pub use correlators::{correlators, CorrelatorSet};

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::FockState;
use crate::model::{KerrParams, NoiseIncrement};
use crate::moments::DensityMatrixMoments;
use crate::unravel::{DiffusiveModel, JumpModel};
use crate::wigner::{PhaseSpaceGrid, WignerMap};
use crate::xp::XpState;

/// `⟨n⟩`, `⟨δnδn⟩`, `⟨θ⟩` (unwrapped), `⟨δθδθ⟩`, `⟨δnδθ⟩_sym` and `ln⟨1⟩`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NThetaState {
    pub n: f64,
    pub var_n: f64,
    pub theta: f64,
    pub var_theta: f64,
    pub cov: f64,
    pub log_norm: f64,
}

impl NThetaState {
    /// Number-phase moments of `|√n e^{iθ}⟩` to leading order.
    pub fn coherent_like(n: f64, theta: f64) -> Self {
        Self {
            n,
            var_n: n,
            theta,
            var_theta: 1.0 / (4.0 * n),
            cov: 0.0,
            log_norm: 0.0,
        }
    }

    pub fn from_alpha(alpha: Complex64) -> Self {
        Self::coherent_like(alpha.norm_sqr(), alpha.arg())
    }

    /// `⟨δnδn⟩⟨δθδθ⟩ − ⟨δnδθ⟩²_sym − 1/4`, zero for a pure state.
    pub fn heisenberg_residual(&self) -> f64 {
        self.var_n * self.var_theta - self.cov * self.cov - 0.25
    }

    fn axpy(&self, h: f64, d: &NThetaDrift) -> Self {
        Self {
            n: self.n + h * d.d_n,
            var_n: self.var_n + h * d.d_var_n,
            theta: self.theta + h * d.d_theta,
            var_theta: self.var_theta + h * d.d_var_theta,
            cov: self.cov + h * d.d_cov,
            log_norm: self.log_norm + h * d.d_log_norm,
        }
    }

    fn is_finite(&self) -> bool {
        [self.n, self.var_n, self.theta, self.var_theta, self.cov, self.log_norm]
            .iter()
            .all(|v| v.is_finite())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NThetaDrift {
    pub d_n: f64,
    pub d_var_n: f64,
    pub d_theta: f64,
    pub d_var_theta: f64,
    pub d_cov: f64,
    pub d_log_norm: f64,
}

impl NThetaDrift {
    fn combine(k: [&NThetaDrift; 4]) -> NThetaDrift {
        let w = |f: fn(&NThetaDrift) -> f64| (f(k[0]) + 2.0 * f(k[1]) + 2.0 * f(k[2]) + f(k[3])) / 6.0;
        NThetaDrift {
            d_n: w(|d| d.d_n),
            d_var_n: w(|d| d.d_var_n),
            d_theta: w(|d| d.d_theta),
            d_var_theta: w(|d| d.d_var_theta),
            d_cov: w(|d| d.d_cov),
            d_log_norm: w(|d| d.d_log_norm),
        }
    }
}

/// `⟨1/n⟩ ≈ 1/n + ⟨δnδn⟩/n³`.
pub fn inverse_density(s: &NThetaState) -> f64 {
    1.0 / s.n + s.var_n / s.n.powi(3)
}

/// Photon-counting no-click drift.
pub fn ntheta_pc_drift(s: &NThetaState, p: &KerrParams) -> Result<NThetaDrift> {
    let c = correlators(s)?;
    let (f, g, u) = (p.f, p.gamma, p.u);
    Ok(NThetaDrift {
        d_n: -g * s.var_n + 2.0 * (f * c.c1).im,
        d_var_n: 4.0 * (f * c.c2).im - 2.0 * (f * c.c1).im,
        d_theta: p.delta + 0.5 * u - u * s.n - g * s.cov - (f * c.c3).re,
        d_var_theta: -2.0 * u * s.cov - 2.0 * (f * c.c4).re + 0.5 * (f * c.c5).im,
        d_cov: -u * s.var_n + 2.0 * (f * c.c6).im - (f * c.c7).re,
        d_log_norm: -g * s.n,
    })
}

/// Click update with the expanded inverse-density rule for `⟨δθδθ⟩`.
pub fn ntheta_pc_jump(s: &NThetaState) -> Result<NThetaState> {
    let n = s.n;
    if !(n > 0.0) {
        return Err(Error::NoJump(format!("density {n} cannot emit")));
    }
    let x = s.var_n / (n * n);
    let out = NThetaState {
        n: n - 1.0 + s.var_n / n,
        var_n: s.var_n * (1.0 - x),
        theta: s.theta + s.cov / n,
        var_theta: s.var_theta + (0.25 - s.cov * s.cov) / (n * n) + s.var_n / (4.0 * n.powi(4)),
        cov: s.cov * (1.0 - x),
        log_norm: 0.0,
    };
    if !(out.n > 0.0) {
        return Err(Error::Validity(format!("density {:.3e} after a click", out.n)));
    }
    Ok(out)
}

/// Exact no-click flow at `F = 0`.
pub fn ntheta_free_evolution_exact(s0: &NThetaState, p: &KerrParams, t: f64) -> Result<NThetaState> {
    if p.f != Complex64::new(0.0, 0.0) {
        return Err(Error::Usage("closed-form evolution requires F = 0".into()));
    }
    let (g, u) = (p.gamma, p.u);
    let vn = s0.var_n;
    Ok(NThetaState {
        n: s0.n - g * vn * t,
        var_n: vn,
        theta: s0.theta + (p.delta + u * (0.5 - s0.n) - g * s0.cov) * t + u * g * vn * t * t,
        var_theta: s0.var_theta - 2.0 * u * s0.cov * t + u * u * vn * t * t,
        cov: s0.cov - u * vn * t,
        log_norm: s0.log_norm - g * s0.n * t + 0.5 * g * g * vn * t * t,
    })
}

/// Time until `ln⟨1⟩` falls to `ln_target` under the `F = 0` flow, for
/// `ln_target ≤ 0` measured from the current norm. `None` when the norm turns
/// around first (the density would have to become negative).
///
/// Written as `−2 ln R / (γ n (1 + √(1 + 2 ⟨δnδn⟩ ln R / n²)))`, which equals
/// `(n/⟨δnδn⟩)(1 − √(…))/γ` and stays accurate as `⟨δnδn⟩ → 0`.
pub fn jump_time_after(n: f64, var_n: f64, gamma: f64, ln_target: f64) -> Result<Option<f64>> {
    if !(n > 0.0) {
        return Err(Error::Domain(format!("jump time needs n > 0, got {n}")));
    }
    if ln_target >= 0.0 {
        return Ok(Some(0.0));
    }
    let disc = 1.0 + 2.0 * var_n * ln_target / (n * n);
    if disc < 0.0 {
        return Ok(None);
    }
    Ok(Some(-2.0 * ln_target / (gamma * n * (1.0 + disc.sqrt()))))
}

/// Waiting time to the next click for a fresh threshold `r ∈ (0, 1)`.
pub fn next_jump_time(s: &NThetaState, p: &KerrParams, r: f64) -> Result<Option<f64>> {
    if !(r > 0.0 && r < 1.0) {
        return Err(Error::Usage(format!("jump threshold {r} outside (0, 1)")));
    }
    jump_time_after(s.n, s.var_n, p.gamma, r.ln() - s.log_norm)
}

/// Deterministic part of the heterodyne equations, Itô corrections included.
pub fn ntheta_heterodyne_drift(s: &NThetaState, p: &KerrParams) -> Result<NThetaDrift> {
    let c = correlators(s)?;
    let (f, g, u) = (p.f, p.gamma, p.u);
    let c21 = c.c2 - c.c1;
    Ok(NThetaDrift {
        d_n: 2.0 * (f * c.c1).im - g * s.n,
        d_var_n: 4.0 * (f * c.c2).im - 2.0 * (f * c.c1).im - 2.0 * g * s.var_n + g * s.n - 2.0 * g * c21.norm_sqr(),
        d_theta: p.delta + 0.5 * u - u * s.n - (f * c.c3).re,
        d_var_theta: -2.0 * u * s.cov - 2.0 * (f * c.c4).re + 0.5 * (f * c.c5).im + 0.25 * g * inverse_density(s) - 2.0 * g * c.c6.norm_sqr(),
        d_cov: -u * s.var_n + 2.0 * (f * c.c6).im - (f * c.c7).re - g * s.cov - 2.0 * g * (c21 * c.c6.conj()).re,
        d_log_norm: 0.0,
    })
}

/// One heterodyne step: RK4 over the deterministic part, then the Itô noise
/// terms with coefficients from the step start.
pub fn ntheta_heterodyne_step(s: &NThetaState, p: &KerrParams, dt: f64, noise: NoiseIncrement) -> Result<NThetaState> {
    let c = correlators(s)?;
    let mut out = rk4(s, dt, |x| ntheta_heterodyne_drift(x, p))?;
    let k = 2.0 * p.gamma.sqrt();
    let dz = noise.dz;
    let q = Complex64::new(s.cov, 0.5);
    out.n += k * ((c.c2 - c.c1) * dz).re;
    out.var_n += k * ((c.d3 - 2.0 * c.c2 + c.c1 * (1.0 - s.var_n)) * dz).re;
    out.theta += k * (c.c6 * dz).re;
    out.var_theta += k * ((c.d1 - s.var_theta * c.c1) * dz).re;
    out.cov += k * ((-c.c6 - q * c.c1 + c.d2) * dz).re;
    out.log_norm = 0.0;
    Ok(out)
}

fn rk4(s: &NThetaState, h: f64, f: impl Fn(&NThetaState) -> Result<NThetaDrift>) -> Result<NThetaState> {
    let k1 = f(s)?;
    let k2 = f(&s.axpy(0.5 * h, &k1))?;
    let k3 = f(&s.axpy(0.5 * h, &k2))?;
    let k4 = f(&s.axpy(h, &k3))?;
    Ok(s.axpy(h, &NThetaDrift::combine([&k1, &k2, &k3, &k4])))
}

/// `(1/4 + ⟨δnδθ⟩²_sym) / ⟨δnδn⟩`.
pub fn var_theta_from_purity(var_n: f64, cov: f64) -> Result<f64> {
    if !(var_n > 0.0) {
        return Err(Error::Domain(format!("purity relation needs var_n > 0, got {var_n}")));
    }
    Ok((0.25 + cov * cov) / var_n)
}

/// `⟨a†a†⟩ = ⟨g(n) e^{-2iθ}⟩` with `g(n) = √(n(n−1))`, expanded like the
/// other correlators: `e^{-2i⟨θ⟩-2⟨δθδθ⟩}[g + g′(1 − 2i⟨δnδθ⟩) + g″⟨δnδn⟩/2]`.
pub fn ntheta_mean_adag2(s: &NThetaState) -> Result<Complex64> {
    let n = s.n;
    if !(n > 1.0) {
        return Err(Error::Domain(format!("⟨a†a†⟩ expansion needs n > 1, got {n}")));
    }
    let g = (n * (n - 1.0)).sqrt();
    let g1 = (2.0 * n - 1.0) / (2.0 * g);
    let g2 = -1.0 / (4.0 * g.powi(3));
    let e = Complex64::from_polar((-2.0 * s.var_theta).exp(), -2.0 * s.theta);
    Ok(e * (g + g1 * Complex64::new(1.0, -2.0 * s.cov) + 0.5 * g2 * s.var_n))
}

/// Moments with `⟨a⟩ = c1*`, `⟨a†a†aa⟩ = n² + ⟨δnδn⟩ − n`.
pub fn ntheta_quadratures(s: &NThetaState) -> Result<DensityMatrixMoments> {
    let c = correlators(s)?;
    let aa = ntheta_mean_adag2(s)?.conj();
    let n2 = s.n * s.n + s.var_n;
    Ok(DensityMatrixMoments::from_raw(s.n, n2, n2 - s.n, c.c1.conj(), aa))
}

/// XP-Gaussian state sharing the first and second moments.
pub fn ntheta_to_xp(s: &NThetaState) -> Result<XpState> {
    let m = ntheta_quadratures(s)?;
    let aa = ntheta_mean_adag2(s)?.conj();
    Ok(XpState {
        alpha: m.mean_a,
        dd: aa - m.mean_a * m.mean_a,
        nd: m.mean_n - m.mean_a.norm_sqr(),
        log_norm: 0.0,
    })
}

/// Pure state `ψ_k ∝ exp(−A (k − n)² + i θ k)` with `Re A = 1/(4⟨δnδn⟩)`,
/// `Im A = −⟨δnδθ⟩/(2⟨δnδn⟩)`; `⟨δθδθ⟩` is implied by purity.
pub fn ntheta_to_fock(s: &NThetaState, n_levels: usize) -> Result<FockState> {
    if !(s.var_n > 0.0) {
        return Err(Error::Domain("Fock embedding needs var_n > 0".into()));
    }
    let a = Complex64::new(1.0 / (4.0 * s.var_n), -s.cov / (2.0 * s.var_n));
    let amps = (0..n_levels)
        .map(|k| {
            let d = k as f64 - s.n;
            (-a * d * d + Complex64::new(0.0, s.theta * k as f64)).exp()
        })
        .collect();
    FockState::from_amplitudes(amps)
}

/// Approximate Wigner function: the bivariate normal in `(n, θ)` pushed
/// through `x = √n cos θ`, `p = √n sin θ` (`dn dθ = 2 dx dp`), summed over
/// phase windings. A visual surrogate, not an exact quasi-probability.
pub fn wigner_from_ntheta(s: &NThetaState, grid: &PhaseSpaceGrid) -> Result<WignerMap> {
    grid.validate()?;
    let det = s.var_n * s.var_theta - s.cov * s.cov;
    if !(s.n > 0.0) || !(det > 0.0) {
        return Err(Error::Domain(format!("n = {}, covariance determinant {det:.3e}", s.n)));
    }
    let norm = 1.0 / (2.0 * PI * det.sqrt());
    let windings = (5.0 * s.var_theta.sqrt() / (2.0 * PI)).ceil() as i64 + 1;
    let centre = s.theta.rem_euclid(2.0 * PI);
    let mut values = Vec::with_capacity(grid.nx * grid.np);
    for j in 0..grid.np {
        let p = grid.p(j);
        for i in 0..grid.nx {
            let x = grid.x(i);
            let dn = x * x + p * p - s.n;
            let base = p.atan2(x).rem_euclid(2.0 * PI) - centre;
            let mut w = 0.0;
            for k in -windings..=windings {
                let dt = base + 2.0 * PI * k as f64;
                let qf = (s.var_theta * dn * dn - 2.0 * s.cov * dn * dt + s.var_n * dt * dt) / det;
                w += norm * (-0.5 * qf).exp();
            }
            values.push(2.0 * w);
        }
    }
    let mut map = WignerMap::from_values(*grid, values);
    if map.mass < 0.99 {
        map.push_warning(format!("captured mass {:.4} below 0.99", map.mass));
    }
    Ok(map)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NThetaConfig {
    /// Abort below this density.
    pub n_min: f64,
    /// Recompute `⟨δθδθ⟩` from the purity relation instead of evolving it.
    pub var_theta_from_purity: bool,
    /// Allowed undershoot of `⟨δnδn⟩⟨δθδθ⟩ − ⟨δnδθ⟩² = 1/4`; the default
    /// aborts once the product itself reaches zero.
    pub heisenberg_tol: f64,
    /// Use the exact flow and jump times when `F = 0`.
    pub closed_form: bool,
}

impl Default for NThetaConfig {
    fn default() -> Self {
        Self {
            n_min: 1.0,
            var_theta_from_purity: false,
            heisenberg_tol: 0.25,
            closed_form: true,
        }
    }
}

#[derive(Debug, Clone)]
pub struct NThetaSolver {
    params: KerrParams,
    config: NThetaConfig,
}

impl NThetaSolver {
    pub fn new(params: KerrParams, config: NThetaConfig) -> Result<Self> {
        params.validate()?;
        Ok(Self { params, config })
    }

    pub fn params(&self) -> &KerrParams {
        &self.params
    }

    fn undriven(&self) -> bool {
        self.config.closed_form && self.params.f == Complex64::new(0.0, 0.0)
    }

    fn finish(&self, mut s: NThetaState) -> Result<NThetaState> {
        if !s.is_finite() {
            return Err(Error::Instability(format!("non-finite NΘ state {s:?}")));
        }
        if s.n < self.config.n_min {
            return Err(Error::Validity(format!("density {:.4} below n_min = {}", s.n, self.config.n_min)));
        }
        if self.config.var_theta_from_purity {
            s.var_theta = var_theta_from_purity(s.var_n, s.cov)?;
        }
        if s.var_n < 0.0 || s.var_theta < 0.0 {
            return Err(Error::Validity(format!("negative variance in {s:?}")));
        }
        if s.heisenberg_residual() < -self.config.heisenberg_tol {
            return Err(Error::Validity(format!(
                "Heisenberg bound violated by {:.3e}",
                -s.heisenberg_residual()
            )));
        }
        Ok(s)
    }
}

impl JumpModel for NThetaSolver {
    type State = NThetaState;

    fn log_norm(&self, s: &NThetaState) -> f64 {
        s.log_norm
    }

    fn evolve(&self, s: &NThetaState, h: f64) -> Result<NThetaState> {
        let next = if self.undriven() {
            ntheta_free_evolution_exact(s, &self.params, h)?
        } else {
            rk4(s, h, |x| ntheta_pc_drift(x, &self.params))?
        };
        self.finish(next)
    }

    fn jump(&self, s: &NThetaState) -> Result<NThetaState> {
        self.finish(ntheta_pc_jump(s)?)
    }

    fn closed_form_jump_time(&self, s: &NThetaState, ln_r: f64) -> Option<Option<f64>> {
        if !self.undriven() {
            return None;
        }
        jump_time_after(s.n, s.var_n, self.params.gamma, ln_r - s.log_norm).ok()
    }
}

impl DiffusiveModel for NThetaSolver {
    type State = NThetaState;

    fn step(&self, s: &NThetaState, dt: f64, noise: NoiseIncrement) -> Result<NThetaState> {
        self.finish(ntheta_heterodyne_step(s, &self.params, dt, noise)?)
    }
}
