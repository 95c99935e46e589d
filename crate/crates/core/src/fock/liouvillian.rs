//! Lindblad generator on a truncated number basis: steady-state solve and
//! explicit master-equation time integration.
//!
//! `ρ̇ = -i[H, ρ] + γ/2 (2aρa† - a†aρ - ρa†a)`, vectorized row-major as
//! `ρ[m N + k]`. The generator couples `(m,k)` only to `(m±1,k)`, `(m,k±1)`
//! and `(m+1,k+1)`, so it is banded with half-widths `N` and `N + 1`.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;

use super::banded::BandedMatrix;
use super::FockState;
use crate::error::{Error, Result};
use crate::model::KerrParams;
use crate::moments::DensityMatrixMoments;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const I: Complex64 = Complex64::new(0.0, 1.0);

/// Row-major density matrix over `|0⟩..|N-1⟩`.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    n: usize,
    data: Vec<Complex64>,
}

impl DensityMatrix {
    pub fn from_pure(state: &FockState) -> Self {
        let a = state.amplitudes();
        let n = a.len();
        let mut data = Vec::with_capacity(n * n);
        for m in 0..n {
            for k in 0..n {
                data.push(a[m] * a[k].conj());
            }
        }
        Self { n, data }
    }

    pub fn n_levels(&self) -> usize {
        self.n
    }

    pub fn get(&self, m: usize, k: usize) -> Complex64 {
        self.data[m * self.n + k]
    }

    pub fn trace(&self) -> f64 {
        (0..self.n).map(|k| self.get(k, k).re).sum()
    }

    pub fn populations(&self) -> Vec<f64> {
        (0..self.n).map(|k| self.get(k, k).re).collect()
    }

    pub fn moments(&self) -> DensityMatrixMoments {
        let n = self.n;
        let tr = self.trace();
        let (mut n1, mut n2, mut f2) = (0.0, 0.0, 0.0);
        for k in 0..n {
            let w = self.get(k, k).re / tr;
            let kf = k as f64;
            n1 += kf * w;
            n2 += kf * kf * w;
            f2 += kf * (kf - 1.0) * w;
        }
        // ⟨a⟩ = Σ √(k+1) ρ_{k+1,k}, ⟨aa⟩ = Σ √((k+1)(k+2)) ρ_{k+2,k}
        let mut a1 = ZERO;
        let mut a2 = ZERO;
        for k in 0..n {
            if k + 1 < n {
                a1 += self.get(k + 1, k) * ((k + 1) as f64).sqrt();
            }
            if k + 2 < n {
                a2 += self.get(k + 2, k) * (((k + 1) * (k + 2)) as f64).sqrt();
            }
        }
        DensityMatrixMoments::from_raw(n1, n2, f2, a1 / tr, a2 / tr)
    }

    /// `tr ρ²` (for a normalized ρ).
    pub fn purity(&self) -> f64 {
        self.data.iter().map(|c| c.norm_sqr()).sum::<f64>() / self.trace().powi(2)
    }

    /// Eigenvalues of the Hermitian part, ascending.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let n = self.n;
        let m = DMatrix::from_fn(n, n, |i, j| 0.5 * (self.get(i, j) + self.get(j, i).conj()));
        let mut ev: Vec<f64> = SymmetricEigen::new(m).eigenvalues.iter().copied().collect();
        ev.sort_by(|a, b| a.total_cmp(b));
        ev
    }
}

/// Kerr-cavity Lindblad generator.
#[derive(Debug, Clone)]
pub struct Liouvillian {
    params: KerrParams,
    n: usize,
    energies: Vec<f64>,
    sqrt_k: Vec<f64>,
}

impl Liouvillian {
    pub fn new(params: KerrParams, n_levels: usize) -> Result<Self> {
        params.validate()?;
        if n_levels < 2 {
            return Err(Error::InvalidParams("need at least two Fock levels".into()));
        }
        let energies = (0..n_levels)
            .map(|k| {
                let kf = k as f64;
                -params.delta * kf + 0.5 * params.u * kf * (kf - 1.0)
            })
            .collect();
        let sqrt_k = (0..=n_levels).map(|k| (k as f64).sqrt()).collect();
        Ok(Self {
            params,
            n: n_levels,
            energies,
            sqrt_k,
        })
    }

    pub fn n_levels(&self) -> usize {
        self.n
    }

    /// Diagonal coefficient of element `(m, k)`.
    fn diag(&self, m: usize, k: usize) -> Complex64 {
        Complex64::new(
            -0.5 * self.params.gamma * (m + k) as f64,
            -(self.energies[m] - self.energies[k]),
        )
    }

    /// Off-diagonal couplings of equation `(m, k)` as `(row, col, coef)`
    /// triples in vectorized indices.
    fn couplings(&self, m: usize, k: usize, mut visit: impl FnMut(usize, Complex64)) {
        let n = self.n;
        let f = self.params.f;
        let fc = f.conj();
        let s = &self.sqrt_k;
        let idx = |a: usize, b: usize| a * n + b;
        if m > 0 {
            visit(idx(m - 1, k), -I * f * s[m]);
        }
        if m + 1 < n {
            visit(idx(m + 1, k), -I * fc * s[m + 1]);
        }
        if k + 1 < n {
            visit(idx(m, k + 1), I * f * s[k + 1]);
        }
        if k > 0 {
            visit(idx(m, k - 1), I * fc * s[k]);
        }
        if m + 1 < n && k + 1 < n {
            visit(idx(m + 1, k + 1), Complex64::new(self.params.gamma * s[m + 1] * s[k + 1], 0.0));
        }
    }

    /// `out = L ρ` without the diagonal part when `with_diag` is false.
    fn apply_into(&self, rho: &[Complex64], out: &mut [Complex64], with_diag: bool) {
        let n = self.n;
        for m in 0..n {
            for k in 0..n {
                let i = m * n + k;
                let mut acc = if with_diag { self.diag(m, k) * rho[i] } else { ZERO };
                self.couplings(m, k, |j, c| acc += c * rho[j]);
                out[i] = acc;
            }
        }
    }

    pub fn apply(&self, rho: &DensityMatrix) -> DensityMatrix {
        let mut out = vec![ZERO; self.n * self.n];
        self.apply_into(&rho.data, &mut out, true);
        DensityMatrix { n: self.n, data: out }
    }

    /// Solves `L ρ = 0`, `tr ρ = 1` by banded elimination with the population
    /// of one level pinned (its redundant equation is replaced by the pin).
    fn solve_pinned(&self, pin: usize) -> Result<Vec<Complex64>> {
        let n = self.n;
        let dim = n * n;
        let mut a = BandedMatrix::zeros(dim, n, n + 1);
        for m in 0..n {
            for k in 0..n {
                let i = m * n + k;
                a.set(i, i, self.diag(m, k));
                self.couplings(m, k, |j, c| a.add(i, j, c));
            }
        }
        let pin_idx = pin * n + pin;
        a.clear_row(pin_idx);
        a.set(pin_idx, pin_idx, Complex64::new(1.0, 0.0));
        let mut b = vec![ZERO; dim];
        b[pin_idx] = Complex64::new(1.0, 0.0);
        a.solve(&mut b)
            .map_err(|row| Error::SteadyState(format!("singular generator at unknown {row}")))?;
        Ok(b)
    }

    /// Steady state of the master equation with residual, positivity and
    /// truncation checks.
    pub fn steady_state(&self) -> Result<SteadyState> {
        let n = self.n;
        let mut x = self.solve_pinned(0)?;
        // re-pin on the most occupied level when the vacuum is nearly empty
        let pops: Vec<f64> = (0..n).map(|k| x[k * n + k].re).collect();
        let (kmax, pmax) = pops
            .iter()
            .enumerate()
            .fold((0, f64::MIN), |acc, (k, &p)| if p > acc.1 { (k, p) } else { acc });
        if !(pops[0] > 1e-6 * pmax) {
            x = self.solve_pinned(kmax)?;
        }
        let tr: f64 = (0..n).map(|k| x[k * n + k].re).sum();
        if !(tr.is_finite() && tr > 0.0) {
            return Err(Error::SteadyState(format!("non-physical trace {tr}")));
        }
        // Hermitize and normalize
        let mut data = vec![ZERO; n * n];
        for m in 0..n {
            for k in 0..n {
                data[m * n + k] = 0.5 * (x[m * n + k] + x[k * n + m].conj()) / tr;
            }
        }
        let rho = DensityMatrix { n, data };

        let lr = self.apply(&rho);
        let scale = (0..n)
            .flat_map(|m| (0..n).map(move |k| (m, k)))
            .map(|(m, k)| self.diag(m, k).norm())
            .fold(1.0f64, f64::max);
        let residual = lr.data.iter().map(|c| c.norm()).fold(0.0, f64::max) / scale;
        if !(residual < 1e-9) {
            return Err(Error::SteadyState(format!(
                "null-space residual {residual:.3e} (non-converged or non-unique steady state)"
            )));
        }
        let eigen = rho.eigenvalues();
        let min_eigenvalue = eigen[0];
        if min_eigenvalue < -1e-10 {
            return Err(Error::SteadyState(format!("negative eigenvalue {min_eigenvalue:.3e}")));
        }
        let tail = rho.get(n - 1, n - 1).re;
        Ok(SteadyState {
            moments: rho.moments(),
            rho,
            residual,
            min_eigenvalue,
            tail,
        })
    }

    /// Explicit Lawson-RK4 integration of the master equation over `t`.
    pub fn evolve(&self, rho: &DensityMatrix, t: f64, dt: f64) -> DensityMatrix {
        let n = self.n;
        let dim = n * n;
        let steps = crate::unravel::substeps(t, dt);
        let h = t / steps as f64;
        let diag: Vec<Complex64> = (0..n)
            .flat_map(|m| (0..n).map(move |k| (m, k)))
            .map(|(m, k)| self.diag(m, k))
            .collect();
        let full: Vec<Complex64> = diag.iter().map(|d| (d * h).exp()).collect();
        let half: Vec<Complex64> = diag.iter().map(|d| (d * 0.5 * h).exp()).collect();
        let mut y = rho.data.clone();
        let (mut k1, mut k2, mut k3, mut k4, mut tmp) =
            (vec![ZERO; dim], vec![ZERO; dim], vec![ZERO; dim], vec![ZERO; dim], vec![ZERO; dim]);
        if t <= 0.0 {
            return rho.clone();
        }
        for _ in 0..steps {
            self.apply_into(&y, &mut k1, false);
            for i in 0..dim {
                tmp[i] = half[i] * (y[i] + 0.5 * h * k1[i]);
            }
            self.apply_into(&tmp, &mut k2, false);
            for i in 0..dim {
                tmp[i] = half[i] * y[i] + 0.5 * h * k2[i];
            }
            self.apply_into(&tmp, &mut k3, false);
            for i in 0..dim {
                tmp[i] = full[i] * y[i] + h * half[i] * k3[i];
            }
            self.apply_into(&tmp, &mut k4, false);
            for i in 0..dim {
                y[i] = full[i] * y[i] + h / 6.0 * (full[i] * k1[i] + 2.0 * half[i] * (k2[i] + k3[i]) + k4[i]);
            }
        }
        DensityMatrix { n, data: y }
    }
}

/// Result of [`Liouvillian::steady_state`].
#[derive(Debug, Clone)]
pub struct SteadyState {
    pub rho: DensityMatrix,
    pub moments: DensityMatrixMoments,
    /// max |Lρ| relative to the largest diagonal rate
    pub residual: f64,
    pub min_eigenvalue: f64,
    /// population of the highest level
    pub tail: f64,
}

/// Steady-state moments of the driven-dissipative Kerr cavity; the ground
/// truth for every stationary comparison.
pub fn lindblad_steady_state(params: &KerrParams, n_levels: usize) -> Result<SteadyState> {
    let ss = Liouvillian::new(*params, n_levels)?.steady_state()?;
    if ss.tail > super::DEFAULT_TAIL_THRESHOLD {
        return Err(Error::Truncation {
            tail: ss.tail,
            threshold: super::DEFAULT_TAIL_THRESHOLD,
            n_levels,
        });
    }
    Ok(ss)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn linear_cavity_is_coherent() {
        let p = KerrParams::new(0.0, 0.0, 1.0);
        let ss = lindblad_steady_state(&p, 30).unwrap();
        assert_relative_eq!(ss.moments.mean_n, 4.0, epsilon = 1e-9);
        assert_relative_eq!(ss.moments.g2.unwrap(), 1.0, epsilon = 1e-9);
        // α = iF / (-γ/2) = -2i
        assert!((ss.moments.mean_a - Complex64::new(0.0, -2.0)).norm() < 1e-9);
        assert_relative_eq!(ss.rho.purity(), 1.0, epsilon = 1e-9);
    }

    #[test]
    fn undriven_cavity_empties() {
        let p = KerrParams::new(1.0, 0.3, 0.0);
        let ss = lindblad_steady_state(&p, 10).unwrap();
        assert!(ss.moments.mean_n.abs() < 1e-14);
        assert!(ss.moments.g2.is_none());
    }

    #[test]
    fn detuned_linear_cavity() {
        let p = KerrParams::new(1.3, 0.0, Complex64::new(0.7, 0.4));
        let ss = lindblad_steady_state(&p, 25).unwrap();
        let alpha = Complex64::new(0.0, 1.0) * p.f / Complex64::new(-0.5, 1.3);
        assert!((ss.moments.mean_a - alpha).norm() < 1e-9);
        assert_relative_eq!(ss.moments.mean_n, alpha.norm_sqr(), epsilon = 1e-9);
    }

    #[test]
    fn bistable_point_is_stationary_under_time_evolution() {
        let p = KerrParams::new(1.0, 0.05, 2.235);
        let l = Liouvillian::new(p, 40).unwrap();
        let ss = l.steady_state().unwrap();
        let later = l.evolve(&ss.rho, 0.5, 1e-3);
        assert_relative_eq!(later.moments().mean_n, ss.moments.mean_n, epsilon = 1e-6);
        assert_relative_eq!(later.trace(), 1.0, epsilon = 1e-7);
    }

    #[test]
    fn time_evolution_matches_linear_closed_form() {
        // U = 0, F = 0: coherent amplitude decays as exp((iΔ - γ/2) t)
        let p = KerrParams::new(2.0, 0.0, 0.0);
        let l = Liouvillian::new(p, 30).unwrap();
        let alpha0 = Complex64::new(2.0, 1.0);
        let rho0 = DensityMatrix::from_pure(&FockState::coherent(alpha0, 30));
        let rho = l.evolve(&rho0, 1.0, 1e-3);
        let expect = alpha0 * (Complex64::new(-0.5, 2.0)).exp();
        assert!((rho.moments().mean_a - expect).norm() < 1e-9);
    }
}
