//! Wigner functions on rectangular phase-space grids, normalized so that
//! `∫ W dx dp = 1` with `x = Re α`, `p = Im α` (vacuum: `(2/π) e^{-2|α|²}`).

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::{fock_expectations, FockState};

/// Uniform grid including both end points on each axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseSpaceGrid {
    pub x_min: f64,
    pub x_max: f64,
    pub nx: usize,
    pub p_min: f64,
    pub p_max: f64,
    pub np: usize,
}

impl PhaseSpaceGrid {
    pub fn square(half_width: f64, n: usize) -> Self {
        Self::centered(0.0, 0.0, half_width, n)
    }

    pub fn centered(x0: f64, p0: f64, half_width: f64, n: usize) -> Self {
        Self {
            x_min: x0 - half_width,
            x_max: x0 + half_width,
            nx: n,
            p_min: p0 - half_width,
            p_max: p0 + half_width,
            np: n,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.nx < 2 || self.np < 2 || !(self.x_max > self.x_min) || !(self.p_max > self.p_min) {
            return Err(Error::Usage(format!("degenerate phase-space grid {self:?}")));
        }
        Ok(())
    }

    pub fn dx(&self) -> f64 {
        (self.x_max - self.x_min) / (self.nx - 1) as f64
    }

    pub fn dp(&self) -> f64 {
        (self.p_max - self.p_min) / (self.np - 1) as f64
    }

    pub fn x(&self, i: usize) -> f64 {
        self.x_min + i as f64 * self.dx()
    }

    pub fn p(&self, j: usize) -> f64 {
        self.p_min + j as f64 * self.dp()
    }

    fn contains(&self, x: f64, p: f64) -> bool {
        x >= self.x_min && x <= self.x_max && p >= self.p_min && p <= self.p_max
    }
}

/// Sampled Wigner function, row-major with `p` as the slow index:
/// `values[j * nx + i] = W(x_i, p_j)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WignerMap {
    pub grid: PhaseSpaceGrid,
    pub values: Vec<f64>,
    /// Captured mass `Σ W dx dp`.
    pub mass: f64,
    pub warnings: Vec<String>,
}

impl WignerMap {
    pub fn from_values(grid: PhaseSpaceGrid, values: Vec<f64>) -> Self {
        let mass = values.iter().sum::<f64>() * grid.dx() * grid.dp();
        Self {
            grid,
            values,
            mass,
            warnings: Vec::new(),
        }
    }

    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[j * self.grid.nx + i]
    }

    pub fn max_abs_diff(&self, other: &WignerMap) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    pub fn peak(&self) -> f64 {
        self.values.iter().copied().fold(f64::MIN, f64::max)
    }

    /// Recorded in `warnings`; callers decide how loudly to report it.
    pub fn push_warning(&mut self, msg: String) {
        log::debug!("{msg}");
        self.warnings.push(msg);
    }
}

/// Mass below which a map is flagged as not covering the state.
const MIN_CAPTURED_MASS: f64 = 0.99;

fn coverage_check(map: &mut WignerMap, mean: (f64, f64), sd: (f64, f64), min_mass: f64) {
    let g = map.grid;
    let inside = g.contains(mean.0 - 5.0 * sd.0, mean.1 - 5.0 * sd.1) && g.contains(mean.0 + 5.0 * sd.0, mean.1 + 5.0 * sd.1);
    if !inside {
        map.push_warning(format!(
            "grid does not cover mean ± 5σ of the quadratures; captured mass {:.4}",
            map.mass
        ));
    }
    let coarse = g.dx() > sd.0.min(sd.1) || g.dp() > sd.0.min(sd.1);
    if coarse {
        map.push_warning(format!("grid spacing exceeds the quadrature width; captured mass {:.4}", map.mass));
    }
    if (map.mass - 1.0).abs() > 1.0 - min_mass {
        map.push_warning(format!("captured mass {:.4} deviates from 1", map.mass));
    }
}

/// Wigner function of a pure Fock-space state from the displaced parity
/// `W(α) = (2/π) Σ_k (−1)^k |⟨k|D(−α)|ψ⟩|²`. The `k` range at each point grows
/// until the displaced state's norm is captured.
pub fn wigner_from_fock(state: &FockState, grid: &PhaseSpaceGrid) -> Result<WignerMap> {
    grid.validate()?;
    let amps = state.amplitudes();
    let support = amps.iter().rposition(|c| c.norm_sqr() > 1e-30).map_or(1, |k| k + 1);
    let psi = &amps[..support];
    let m = fock_expectations(state);
    let ctx = ParityContext::new(psi, m.mean_n, m.mean_a);
    let values: Vec<f64> = (0..grid.np)
        .into_par_iter()
        .flat_map_iter(|j| {
            let ctx = &ctx;
            (0..grid.nx).map(move |i| ctx.eval(-Complex64::new(grid.x(i), grid.p(j))))
        })
        .collect::<Result<_>>()?;
    let mut map = WignerMap::from_values(*grid, values);
    coverage_check(&mut map, (m.mean_a.re, m.mean_a.im), (m.var_x.sqrt(), m.var_p.sqrt()), MIN_CAPTURED_MASS);
    Ok(map)
}

/// Largest Fock cutoff tried for the displaced state before giving up.
const MAX_PARITY_LEVELS: usize = 1 << 16;

struct ParityContext<'a> {
    psi: &'a [Complex64],
    norm: f64,
    mean_n: f64,
    mean_a: Complex64,
}

impl<'a> ParityContext<'a> {
    fn new(psi: &'a [Complex64], mean_n: f64, mean_a: Complex64) -> Self {
        let norm = psi.iter().map(|c| c.norm_sqr()).sum();
        Self { psi, norm, mean_n, mean_a }
    }

    fn eval(&self, beta: Complex64) -> Result<f64> {
        // ⟨n⟩ of D(β)ψ
        let n_disp = (self.mean_n + 2.0 * (beta.conj() * self.mean_a).re + beta.norm_sqr()).max(0.0);
        let mut k_max = self.psi.len().max((n_disp + 12.0 * (n_disp + 1.0).sqrt() + 30.0).ceil() as usize);
        loop {
            let (w, captured) = displaced_parity(self.psi, beta, k_max);
            if self.norm - captured <= 1e-12 * self.norm {
                return Ok(w / self.norm);
            }
            k_max *= 2;
            if k_max > MAX_PARITY_LEVELS {
                return Err(Error::Domain(format!("displaced state at β = {beta} exceeds {MAX_PARITY_LEVELS} levels")));
            }
        }
    }
}

/// Returns `(2/π) Σ_k (−1)^k |c_k|²` and `Σ_k |c_k|²` for `c = D(β) ψ` over
/// `k < k_max`. Along the diagonal `k − j = m` the matrix elements are
/// `(β/|β|)^m f_j^{(m)}(|β|²)` with the normalized Laguerre functions
/// `f_j^{(m)}(x) = √(j!/(j+m)!) x^{m/2} e^{−x/2} L_j^{(m)}(x)`, each bounded by one;
/// above it `D_{k,j} = (−β*/|β|)^m f_k^{(m)}` with `m = j − k`.
fn displaced_parity(psi: &[Complex64], beta: Complex64, k_max: usize) -> (f64, f64) {
    let n = psi.len();
    let x = beta.norm_sqr();
    let mut c = vec![Complex64::new(0.0, 0.0); k_max];
    if x == 0.0 {
        c[..n].copy_from_slice(psi);
    } else {
        let sq: Vec<f64> = (0..=k_max + 1).map(|k| (k as f64).sqrt()).collect();
        let unit = beta / x.sqrt();
        let ln_x = x.ln();
        let mut ln_fact = 0.0;
        let mut down = Complex64::new(1.0, 0.0);
        let mut up = Complex64::new(1.0, 0.0);
        for m in 0..k_max {
            if m > 0 {
                ln_fact += (m as f64).ln();
            }
            let lower = n.min(k_max - m);
            let upper = if m > 0 { n.saturating_sub(m) } else { 0 };
            let mut prev = 0.0;
            let mut cur = (0.5 * m as f64 * ln_x - 0.5 * x - 0.5 * ln_fact).exp();
            for j in 0..lower.max(upper) {
                if j < lower {
                    c[j + m] += down * cur * psi[j];
                }
                if j < upper {
                    c[j] += up * cur * psi[j + m];
                }
                let next = ((2 * j + m + 1) as f64 - x) * cur - sq[j] * sq[j + m] * prev;
                prev = cur;
                cur = next / (sq[j + 1] * sq[j + m + 1]);
            }
            down *= unit;
            up *= -unit.conj();
        }
    }
    let mut w = 0.0;
    let mut captured = 0.0;
    for (k, v) in c.iter().enumerate() {
        let p = v.norm_sqr();
        captured += p;
        w += if k % 2 == 0 { p } else { -p };
    }
    (2.0 / PI * w, captured)
}

/// Bivariate normal Wigner function with quadrature means and covariance
/// `[[var_x, cov_xp], [cov_xp, var_p]]`.
pub fn gaussian_wigner(mean: (f64, f64), var_x: f64, var_p: f64, cov_xp: f64, grid: &PhaseSpaceGrid) -> Result<WignerMap> {
    grid.validate()?;
    let det = var_x * var_p - cov_xp * cov_xp;
    if !(det > 0.0) || !det.is_finite() || !(var_x > 0.0) {
        return Err(Error::Domain(format!("singular quadrature covariance (det = {det:.3e})")));
    }
    let norm = 1.0 / (2.0 * PI * det.sqrt());
    let mut values = Vec::with_capacity(grid.nx * grid.np);
    for j in 0..grid.np {
        let dp = grid.p(j) - mean.1;
        for i in 0..grid.nx {
            let dx = grid.x(i) - mean.0;
            let q = (var_p * dx * dx - 2.0 * cov_xp * dx * dp + var_x * dp * dp) / det;
            values.push(norm * (-0.5 * q).exp());
        }
    }
    let mut map = WignerMap::from_values(*grid, values);
    coverage_check(&mut map, mean, (var_x.sqrt(), var_p.sqrt()), MIN_CAPTURED_MASS);
    Ok(map)
}
