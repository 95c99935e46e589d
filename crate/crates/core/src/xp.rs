//! Gaussian trajectories in the quadrature (XP) representation.
//!
//! The state is the mean field `α = ⟨a⟩` and the connected moments
//! `dd = ⟨δδ⟩`, `nd = ⟨δ†δ⟩` with `δ = a − α`. Higher moments are closed by
//! Wick's theorem.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{KerrParams, NoiseIncrement};
use crate::moments::DensityMatrixMoments;
use crate::unravel::{DiffusiveModel, JumpModel};
use crate::wigner::{gaussian_wigner, PhaseSpaceGrid, WignerMap};

const I: Complex64 = Complex64::new(0.0, 1.0);

/// Slack allowed in `nd ≥ 0` and `nd(nd + 1) ≥ |dd|²`.
pub const PHYSICALITY_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct XpState {
    pub alpha: Complex64,
    pub dd: Complex64,
    pub nd: f64,
    pub log_norm: f64,
}

impl XpState {
    pub fn vacuum() -> Self {
        Self::coherent(Complex64::new(0.0, 0.0))
    }

    pub fn coherent(alpha: Complex64) -> Self {
        Self {
            alpha,
            dd: Complex64::new(0.0, 0.0),
            nd: 0.0,
            log_norm: 0.0,
        }
    }

    /// Pure state with the given anomalous moment; `nd` from the purity relation.
    pub fn pure(alpha: Complex64, dd: Complex64) -> Self {
        Self {
            alpha,
            dd,
            nd: nd_from_purity(dd),
            log_norm: 0.0,
        }
    }

    /// Moments of `D(α) S(ξ)|0⟩`, `ξ = r e^{iφ}`.
    pub fn displaced_squeezed(alpha: Complex64, xi: Complex64) -> Self {
        let (r, phi) = xi.to_polar();
        Self {
            alpha,
            dd: -Complex64::from_polar(r.sinh() * r.cosh(), phi),
            nd: r.sinh().powi(2),
            log_norm: 0.0,
        }
    }

    /// `nd + nd² − |dd|²`, zero for a pure state.
    pub fn purity_residual(&self) -> f64 {
        self.nd + self.nd * self.nd - self.dd.norm_sqr()
    }

    /// `tr ρ² = (1 + 4 (nd + nd² − |dd|²))^{-1/2}`.
    pub fn purity(&self) -> f64 {
        (1.0 + 4.0 * self.purity_residual()).powf(-0.5)
    }

    pub fn mean_n(&self) -> f64 {
        self.alpha.norm_sqr() + self.nd
    }

    pub fn check_physical(&self) -> Result<()> {
        let finite = self.alpha.re.is_finite() && self.alpha.im.is_finite() && self.dd.re.is_finite() && self.dd.im.is_finite() && self.nd.is_finite();
        if !finite {
            return Err(Error::Instability(format!("non-finite XP state {self:?}")));
        }
        if self.nd < -PHYSICALITY_TOL || self.purity_residual() < -PHYSICALITY_TOL {
            return Err(Error::Validity(format!(
                "unphysical XP moments: nd = {:.3e}, nd + nd² − |dd|² = {:.3e}",
                self.nd,
                self.purity_residual()
            )));
        }
        Ok(())
    }

    fn axpy(&self, h: f64, d: &XpDrift) -> Self {
        Self {
            alpha: self.alpha + h * d.d_alpha,
            dd: self.dd + h * d.d_dd,
            nd: self.nd + h * d.d_nd,
            log_norm: self.log_norm + h * d.d_log_norm,
        }
    }
}

/// Time derivatives of the four state components.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct XpDrift {
    pub d_alpha: Complex64,
    pub d_dd: Complex64,
    pub d_nd: f64,
    pub d_log_norm: f64,
}

impl XpDrift {
    fn combine(k: [&XpDrift; 4]) -> XpDrift {
        let w = |f: fn(&XpDrift) -> Complex64| (f(k[0]) + 2.0 * f(k[1]) + 2.0 * f(k[2]) + f(k[3])) / 6.0;
        let r = |f: fn(&XpDrift) -> f64| (f(k[0]) + 2.0 * f(k[1]) + 2.0 * f(k[2]) + f(k[3])) / 6.0;
        XpDrift {
            d_alpha: w(|d| d.d_alpha),
            d_dd: w(|d| d.d_dd),
            d_nd: r(|d| d.d_nd),
            d_log_norm: r(|d| d.d_log_norm),
        }
    }
}

/// Nonnegative root of `nd + nd² = |dd|²`.
pub fn nd_from_purity(dd: Complex64) -> f64 {
    let q = dd.norm_sqr();
    // 2q / (1 + √(1 + 4q)) avoids cancellation at small |dd|
    2.0 * q / (1.0 + (1.0 + 4.0 * q).sqrt())
}

/// Photon-counting no-click drift, including `d ln⟨1⟩/dt = −γ(|α|² + nd)`.
pub fn xp_pc_drift(s: &XpState, p: &KerrParams) -> XpDrift {
    let mut d = xp_heterodyne_drift(s, p);
    d.d_alpha -= p.gamma * (s.alpha * s.nd + s.alpha.conj() * s.dd);
    d.d_log_norm = -p.gamma * (s.alpha.norm_sqr() + s.nd);
    d
}

/// Deterministic part of the heterodyne equations. The mean field lacks the
/// `−γ(α nd + α* dd)` back-action of the no-click evolution; `dd` and `nd`
/// follow the photon-counting drift.
pub fn xp_heterodyne_drift(s: &XpState, p: &KerrParams) -> XpDrift {
    let (a, dd, nd) = (s.alpha, s.dd, s.nd);
    let g = p.gamma;
    let (delta, u) = (p.delta, p.u);
    let a2 = a * a;
    let n_a = a.norm_sqr();

    let d_alpha = Complex64::new(-0.5 * g, delta) * a - I * u * (n_a * a + 2.0 * a * nd + a.conj() * dd) - I * p.f;
    let d_dd = Complex64::new(-g, 2.0 * delta) * dd - I * u * (a2 * (1.0 + 2.0 * nd) + dd * (1.0 + 4.0 * n_a + 6.0 * nd)) - 2.0 * g * nd * dd;
    let d_nd = 2.0 * u * (a2 * dd.conj()).im - g * (nd + nd * nd + dd.norm_sqr());
    XpDrift {
        d_alpha,
        d_dd,
        d_nd,
        d_log_norm: 0.0,
    }
}

/// Click update `⟨O⟩ → ⟨a†Oa⟩ / ⟨a†a⟩` closed by Wick's theorem. The caller
/// resets the threshold; the log-norm is reset here.
pub fn xp_pc_jump(s: &XpState) -> Result<XpState> {
    let (a, dd, nd) = (s.alpha, s.dd, s.nd);
    let n_a = a.norm_sqr();
    let rate = n_a + nd;
    if !(rate > 0.0) {
        return Err(Error::NoJump(format!("click rate |α|² + nd = {rate:.3e}")));
    }
    let den = n_a * n_a + 2.0 * n_a * nd + nd * nd;
    let a2 = a * a;
    let alpha = (n_a * a + 2.0 * a * nd + a.conj() * dd) / rate;
    let new_dd = (n_a * n_a * dd + 2.0 * n_a * nd * dd - a2 * nd * nd + 3.0 * nd * nd * dd - a.conj().powi(2) * dd * dd) / den;
    let new_nd = (n_a * n_a * nd - 2.0 * (a2 * dd.conj() * nd).re + nd * dd.norm_sqr() + 2.0 * n_a * nd * nd + 2.0 * nd.powi(3)) / den;
    Ok(XpState {
        alpha,
        dd: new_dd,
        nd: new_nd,
        log_norm: 0.0,
    })
}

/// One heterodyne step: RK4 over the deterministic part, then the Itô noise
/// `√γ (nd dZ + dd dZ*)` on the mean field with coefficients from the step start.
pub fn xp_heterodyne_step(s: &XpState, p: &KerrParams, dt: f64, noise: NoiseIncrement) -> XpState {
    let mut out = rk4(s, dt, |x| xp_heterodyne_drift(x, p));
    out.alpha += p.gamma.sqrt() * (s.nd * noise.dz + s.dd * noise.dz.conj());
    out.log_norm = 0.0;
    out
}

fn rk4(s: &XpState, h: f64, f: impl Fn(&XpState) -> XpDrift) -> XpState {
    let k1 = f(s);
    let k2 = f(&s.axpy(0.5 * h, &k1));
    let k3 = f(&s.axpy(0.5 * h, &k2));
    let k4 = f(&s.axpy(h, &k3));
    s.axpy(h, &XpDrift::combine([&k1, &k2, &k3, &k4]))
}

/// Wick-closed moments. `⟨a†a†aa⟩ = |α|⁴ + 4|α|²nd + α*²dd + α²dd* + |dd|² + 2nd²`.
pub fn xp_observables(s: &XpState) -> DensityMatrixMoments {
    let (a, dd, nd) = (s.alpha, s.dd, s.nd);
    let n_a = a.norm_sqr();
    let fact2 = n_a * n_a + 4.0 * n_a * nd + 2.0 * (a.conj().powi(2) * dd).re + dd.norm_sqr() + 2.0 * nd * nd;
    let mean_n = n_a + nd;
    DensityMatrixMoments::from_raw(mean_n, fact2 + mean_n, fact2, a, a * a + dd)
}

pub fn wigner_from_xp(s: &XpState, grid: &PhaseSpaceGrid) -> Result<WignerMap> {
    let m = xp_observables(s);
    gaussian_wigner((s.alpha.re, s.alpha.im), m.var_x, m.var_p, m.cov_xp, grid)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct XpConfig {
    /// Evolve `nd` by its own equation instead of the purity relation.
    pub explicit_nd: bool,
}

impl Default for XpConfig {
    fn default() -> Self {
        Self { explicit_nd: false }
    }
}

/// XP-Gaussian trajectory solver for photon counting and heterodyne detection.
#[derive(Debug, Clone)]
pub struct XpSolver {
    params: KerrParams,
    config: XpConfig,
}

impl XpSolver {
    pub fn new(params: KerrParams, config: XpConfig) -> Result<Self> {
        params.validate()?;
        Ok(Self { params, config })
    }

    pub fn params(&self) -> &KerrParams {
        &self.params
    }

    fn finish(&self, mut s: XpState) -> Result<XpState> {
        if !self.config.explicit_nd {
            s.nd = nd_from_purity(s.dd);
        }
        s.check_physical()?;
        Ok(s)
    }
}

impl JumpModel for XpSolver {
    type State = XpState;

    fn log_norm(&self, s: &XpState) -> f64 {
        s.log_norm
    }

    fn evolve(&self, s: &XpState, h: f64) -> Result<XpState> {
        self.finish(rk4(s, h, |x| xp_pc_drift(x, &self.params)))
    }

    fn jump(&self, s: &XpState) -> Result<XpState> {
        self.finish(xp_pc_jump(s)?)
    }
}

impl DiffusiveModel for XpSolver {
    type State = XpState;

    fn step(&self, s: &XpState, dt: f64, noise: NoiseIncrement) -> Result<XpState> {
        self.finish(xp_heterodyne_step(s, &self.params, dt, noise))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::{fock_expectations, FockState, KerrFock};
    use crate::model::{sample_noise, RngStream, UnravelingScheme};
    use crate::wigner::wigner_from_fock;
    use approx::assert_relative_eq;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn bistable() -> KerrParams {
        KerrParams::new(1.0, 0.05, 2.235)
    }

    #[test]
    fn vacuum_is_a_fixed_point() {
        let d = xp_pc_drift(&XpState::vacuum(), &KerrParams::new(1.0, 0.05, 0.0));
        assert_eq!(d.d_alpha, c(0.0, 0.0));
        assert_eq!(d.d_dd, c(0.0, 0.0));
        assert_eq!(d.d_nd, 0.0);
        assert_eq!(d.d_log_norm, 0.0);
    }

    #[test]
    fn linear_cavity_relaxes_to_the_classical_amplitude() {
        let p = KerrParams::new(1.0, 0.0, 0.8);
        let solver = XpSolver::new(p, XpConfig { explicit_nd: true }).unwrap();
        let mut s = XpState::displaced_squeezed(c(0.3, 0.1), c(0.4, 0.2));
        for _ in 0..60_000 {
            s = solver.evolve(&s, 1e-3).unwrap();
        }
        let target = I * p.f / c(-0.5, 1.0);
        assert!((s.alpha - target).norm() < 1e-9);
        assert!(s.dd.norm() < 1e-9 && s.nd.abs() < 1e-9);
    }

    #[test]
    fn nd_from_purity_roots() {
        assert_eq!(nd_from_purity(c(0.0, 0.0)), 0.0);
        assert_relative_eq!(nd_from_purity(c(1.0, 1.0)), 1.0, epsilon = 1e-15);
        let q: f64 = 0.09;
        let root = (-1.0 + (1.0 + 4.0 * q).sqrt()) / 2.0;
        let nd = nd_from_purity(c(0.3, 0.0));
        assert_relative_eq!(nd, root, epsilon = 1e-15);
        assert_relative_eq!(nd + nd * nd, q, epsilon = 1e-15);
    }

    /// Rates of the exact no-click evolution of the same Gaussian state built
    /// in Fock space. Wick's theorem is exact for it, so only truncation remains.
    #[test]
    fn drift_matches_fock_embedding() {
        let p = bistable();
        let model = KerrFock::new(p, 80).unwrap();
        for (alpha, xi) in [(c(1.0, 0.5), c(0.15, -0.1)), (c(-0.7, 1.3), c(0.3, 0.4)), (c(2.0, 0.0), c(0.0, 0.5))] {
            let s = XpState::displaced_squeezed(alpha, xi);
            let fock = FockState::displaced_squeezed(alpha, xi, 80);
            let r = model.no_click_rates(&fock);
            let d = xp_pc_drift(&s, &p);
            assert!((d.d_alpha - r.d_a).norm() < 1e-9, "{} vs {}", d.d_alpha, r.d_a);
            assert!((d.d_dd - (r.d_aa - 2.0 * alpha * r.d_a)).norm() < 1e-9);
            assert!((d.d_nd - (r.d_n - 2.0 * (alpha.conj() * r.d_a).re)).abs() < 1e-9);
            assert_relative_eq!(d.d_log_norm, r.d_log_norm, epsilon = 1e-9);
        }
    }

    #[test]
    fn jump_matches_fock_embedding() {
        let model = KerrFock::new(bistable(), 90).unwrap();
        for (alpha, xi) in [(c(1.0, 0.5), c(0.15, -0.1)), (c(0.2, -0.3), c(0.5, 0.3)), (c(3.0, 1.0), c(-0.2, 0.0))] {
            let s = XpState::displaced_squeezed(alpha, xi);
            let jumped = xp_pc_jump(&s).unwrap();
            let m = fock_expectations(&model.apply_jump(&FockState::displaced_squeezed(alpha, xi, 90)).unwrap());
            assert!((jumped.alpha - m.mean_a).norm() < 1e-9);
            assert_relative_eq!(jumped.nd, m.mean_n - m.mean_a.norm_sqr(), epsilon = 1e-9);
            let dd_exact = c(2.0 * (m.var_x - m.var_p), 4.0 * m.cov_xp) / 2.0;
            assert!((jumped.dd - dd_exact).norm() < 1e-9);
        }
    }

    #[test]
    fn coherent_jump_is_invisible_and_thermal_doubles() {
        let s = XpState::coherent(c(1.5, -2.0));
        let j = xp_pc_jump(&s).unwrap();
        assert!((j.alpha - s.alpha).norm() < 1e-15);
        assert_eq!(j.nd, 0.0);
        let thermal = XpState { nd: 0.7, ..XpState::vacuum() };
        assert_relative_eq!(xp_pc_jump(&thermal).unwrap().nd, 1.4, epsilon = 1e-15);
        assert!(matches!(xp_pc_jump(&XpState::vacuum()), Err(Error::NoJump(_))));
    }

    #[test]
    fn jump_purity_loss_shrinks_with_amplitude() {
        let dd = Complex64::from_polar(1.0, 0.7);
        let res: Vec<f64> = [4.0, 8.0, 16.0, 32.0]
            .iter()
            .map(|&a| xp_pc_jump(&XpState::pure(c(a, 0.0), dd)).unwrap().purity_residual().abs())
            .collect();
        assert!(res.windows(2).all(|w| w[1] < w[0] / 16.0), "{res:?}");
    }

    #[test]
    fn observables_match_fock_embedding() {
        for (alpha, xi) in [(c(1.0, 0.5), c(0.15, -0.1)), (c(-0.7, 1.3), c(0.3, 0.4)), (c(0.0, 0.0), c(0.6, -0.2))] {
            let m = xp_observables(&XpState::displaced_squeezed(alpha, xi));
            let e = fock_expectations(&FockState::displaced_squeezed(alpha, xi, 90));
            for (x, y) in [(m.mean_n, e.mean_n), (m.fact2, e.fact2), (m.var_n, e.var_n), (m.var_x, e.var_x), (m.var_p, e.var_p), (m.cov_xp, e.cov_xp)] {
                assert!((x - y).abs() <= 1e-6 * y.abs().max(1.0), "{x} vs {y}");
            }
            assert!((m.mean_a - e.mean_a).norm() < 1e-9);
        }
        let v = xp_observables(&XpState::vacuum());
        assert_eq!((v.var_x, v.var_p), (0.25, 0.25));
        assert!(v.g2.is_none());
        assert_relative_eq!(xp_observables(&XpState::coherent(c(2.0, 1.0))).g2.unwrap(), 1.0, epsilon = 1e-14);
    }

    #[test]
    fn heterodyne_keeps_vacuum_and_coherent_states_deterministic() {
        let mut rng = RngStream::new(5);
        let p = KerrParams::new(0.7, 0.0, 0.0);
        let mut s = XpState::vacuum();
        let mut c0 = XpState::coherent(c(1.0, 1.0));
        for _ in 0..1000 {
            let noise = sample_noise(&mut rng, 1e-3, UnravelingScheme::Heterodyne).unwrap();
            s = xp_heterodyne_step(&s, &p, 1e-3, noise);
            c0 = xp_heterodyne_step(&c0, &p, 1e-3, noise);
        }
        assert_eq!(s, XpState::vacuum());
        let exact = c(1.0, 1.0) * (c(-0.5, 0.7) * 1.0).exp();
        assert!((c0.alpha - exact).norm() < 1e-10);
    }

    #[test]
    fn heterodyne_preserves_purity_relation() {
        let p = bistable();
        let solver = XpSolver::new(p, XpConfig { explicit_nd: true }).unwrap();
        let mut rng = RngStream::new(11);
        let mut s = XpState::pure(c(0.5, 0.0), c(0.3, -0.2));
        for _ in 0..10_000 {
            let noise = sample_noise(&mut rng, 1e-3, UnravelingScheme::Heterodyne).unwrap();
            s = solver.step(&s, 1e-3, noise).unwrap();
        }
        assert!(s.purity_residual().abs() < 1e-6, "{}", s.purity_residual());
    }

    #[test]
    fn wigner_matches_fock() {
        let (alpha, xi) = (c(0.8, -0.3), c(0.3, 0.2));
        let grid = PhaseSpaceGrid::centered(0.8, -0.3, 3.0, 61);
        let g = wigner_from_xp(&XpState::displaced_squeezed(alpha, xi), &grid).unwrap();
        let f = wigner_from_fock(&FockState::displaced_squeezed(alpha, xi, 60), &grid).unwrap();
        assert!(g.max_abs_diff(&f) < 1e-5);
        assert!((g.mass - 1.0).abs() < 1e-3);
        let v = wigner_from_xp(&XpState::vacuum(), &grid).unwrap();
        let fv = wigner_from_fock(&FockState::vacuum(5), &grid).unwrap();
        assert!(v.max_abs_diff(&fv) < 1e-6);
    }
}
