//! Batch trajectory execution on a fixed time grid and the ensemble statistics
//! built from it: mean, intra-/inter-trajectory variance split, standard error
//! and the sample-ratio criterion against point-sample methods.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::{default_n_levels, fock_expectations, FockState, KerrFock, DEFAULT_TAIL_THRESHOLD};
use crate::model::{KerrParams, RngStream, UnravelingScheme};
use crate::moments::{g2_of, DensityMatrixMoments};
use crate::ntheta::{ntheta_quadratures, NThetaConfig, NThetaSolver, NThetaState};
use crate::twa::{twa_advance, twa_initial_sample, TwaSample};
use crate::unravel::{advance_diffusive, advance_pc, DiffusiveModel, JumpModel, JumpThreshold};
use crate::xp::{xp_observables, XpConfig, XpSolver, XpState};

/// Largest Fock basis the exact solver accepts.
pub const MAX_FOCK_LEVELS: usize = 1024;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Exact,
    Xp,
    Ntheta,
    Twa,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Self::Exact => "exact",
            Self::Xp => "xp",
            Self::Ntheta => "ntheta",
            Self::Twa => "twa",
        }
    }

    /// Whether a record carries quantum (intra-trajectory) variances.
    pub fn has_intra(self) -> bool {
        !matches!(self, Self::Twa)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "exact" | "fock" => Ok(Self::Exact),
            "xp" => Ok(Self::Xp),
            "ntheta" | "nθ" => Ok(Self::Ntheta),
            "twa" => Ok(Self::Twa),
            other => Err(Error::Config(format!("unknown method `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum InitialState {
    Vacuum,
    Coherent { alpha: Complex64 },
}

impl InitialState {
    pub fn alpha(&self) -> Complex64 {
        match self {
            Self::Vacuum => Complex64::new(0.0, 0.0),
            Self::Coherent { alpha } => *alpha,
        }
    }
}

/// Observation instants inside `[t0, t1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    pub t0: f64,
    pub t1: f64,
    pub sample_times: Vec<f64>,
}

impl TimeGrid {
    /// `n` equally spaced instants including both ends.
    pub fn uniform(t0: f64, t1: f64, n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::Config("a uniform time grid needs at least two points".into()));
        }
        let sample_times = (0..n).map(|i| t0 + (t1 - t0) * i as f64 / (n - 1) as f64).collect();
        let g = Self { t0, t1, sample_times };
        g.validate()?;
        Ok(g)
    }

    /// Only the final instant.
    pub fn final_only(t0: f64, t1: f64) -> Result<Self> {
        let g = Self { t0, t1, sample_times: vec![t1] };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        let ts = &self.sample_times;
        if ts.is_empty() || !self.t0.is_finite() || !self.t1.is_finite() {
            return Err(Error::Config("time grid has no sample times".into()));
        }
        if !ts.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::Config("sample times must be strictly ascending".into()));
        }
        if ts[0] < self.t0 || ts[ts.len() - 1] > self.t1 {
            return Err(Error::Config(format!(
                "sample times [{}, {}] leave [{}, {}]",
                ts[0],
                ts[ts.len() - 1],
                self.t0,
                self.t1
            )));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.sample_times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sample_times.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverSettings {
    /// Step of deterministic (photon-counting) segments.
    pub dt_pc: f64,
    /// Step of diffusive segments.
    pub dt_diffusive: f64,
    pub dt_twa: f64,
    /// Fock truncation; `None` picks [`default_n_levels`] of the largest
    /// expected density.
    pub n_levels: Option<usize>,
    pub tail_threshold: f64,
    pub xp: XpConfig,
    pub ntheta: NThetaConfig,
    /// Largest tolerated fraction of failed trajectories.
    pub failure_budget: f64,
    /// Worker threads; `None` uses the global pool.
    pub workers: Option<usize>,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self {
            dt_pc: 1e-3,
            dt_diffusive: 1e-4,
            dt_twa: 1e-3,
            n_levels: None,
            tail_threshold: DEFAULT_TAIL_THRESHOLD,
            xp: XpConfig::default(),
            ntheta: NThetaConfig::default(),
            failure_budget: 0.01,
            workers: None,
        }
    }
}

/// Everything that defines an ensemble run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSpec {
    pub method: Method,
    pub scheme: UnravelingScheme,
    pub params: KerrParams,
    /// Drive switched to zero from this time on.
    #[serde(default)]
    pub pump_off: Option<f64>,
    pub initial: InitialState,
    pub grid: TimeGrid,
    pub n_traj: usize,
    pub master_seed: u64,
    #[serde(default)]
    pub settings: SolverSettings,
}

impl EnsembleSpec {
    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        self.grid.validate()?;
        if self.n_traj == 0 {
            return Err(Error::Config("n_traj must be positive".into()));
        }
        let s = &self.settings;
        for (name, dt) in [("dt_pc", s.dt_pc), ("dt_diffusive", s.dt_diffusive), ("dt_twa", s.dt_twa)] {
            if !(dt > 0.0 && dt.is_finite()) {
                return Err(Error::Config(format!("{name} must be positive, got {dt}")));
            }
        }
        if !(0.0..=1.0).contains(&s.failure_budget) {
            return Err(Error::Config(format!("failure_budget {} outside [0, 1]", s.failure_budget)));
        }
        match (self.method, self.scheme) {
            (Method::Xp | Method::Ntheta, UnravelingScheme::HomodyneX) => {
                return Err(Error::Config(format!(
                    "{} has no homodyne-X equations; use pc or het",
                    self.method
                )))
            }
            (Method::Ntheta, _) if matches!(self.initial, InitialState::Vacuum) => {
                return Err(Error::Config("ntheta needs a dense initial state, not the vacuum".into()))
            }
            (Method::Exact, _) => {
                let n = self.n_levels();
                if n > MAX_FOCK_LEVELS {
                    return Err(Error::Config(format!(
                        "exact solver would need {n} Fock levels (limit {MAX_FOCK_LEVELS}); reduce |α₀| or F"
                    )));
                }
            }
            _ => {}
        }
        Ok(())
    }

    /// Fock truncation used by the exact solver.
    pub fn n_levels(&self) -> usize {
        self.settings.n_levels.unwrap_or_else(|| {
            // no branch of the driven cavity holds more than 4|F|²/γ² photons
            let p = &self.params;
            let driven = 4.0 * p.f.norm_sqr() / (p.gamma * p.gamma);
            default_n_levels(self.initial.alpha().norm_sqr().max(driven))
        })
    }

    fn params_for_scheme(&self) -> KerrParams {
        self.params.for_scheme(self.scheme)
    }
}

/// One trajectory sampled on the grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    pub index: u64,
    pub seed: u64,
    pub method: Method,
    pub scheme: UnravelingScheme,
    /// One entry per grid time. For TWA the "state" is a point, so its
    /// variances are zero and `fact2` is the normal-ordered estimator
    /// `|α|⁴ − 2|α|² + 1/2`.
    pub samples: Vec<DensityMatrixMoments>,
    /// Absolute click times (photon counting only).
    pub jumps: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryFailure {
    pub index: u64,
    pub seed: u64,
    pub message: String,
    pub truncation: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleRun {
    pub spec: EnsembleSpec,
    /// Successful trajectories in index order.
    pub records: Vec<TrajectoryRecord>,
    pub failures: Vec<TrajectoryFailure>,
}

/// Borrowed trajectory state handed to observers.
#[derive(Debug, Clone, Copy)]
pub enum StateRef<'a> {
    Fock(&'a FockState),
    Xp(&'a XpState),
    Ntheta(&'a NThetaState),
    Twa(&'a TwaSample),
}

impl StateRef<'_> {
    pub fn moments(&self) -> Result<DensityMatrixMoments> {
        match self {
            Self::Fock(s) => Ok(fock_expectations(s)),
            Self::Xp(s) => Ok(xp_observables(s)),
            Self::Ntheta(s) => ntheta_quadratures(s),
            Self::Twa(s) => Ok(twa_point_moments(s)),
        }
    }
}

/// Moments carried by a single Wigner sample.
pub fn twa_point_moments(s: &TwaSample) -> DensityMatrixMoments {
    let r2 = s.alpha.norm_sqr();
    let fact2 = r2 * r2 - 2.0 * r2 + 0.5;
    let mean_n = r2 - 0.5;
    DensityMatrixMoments {
        mean_n,
        var_n: 0.0,
        fact2,
        g2: g2_of(fact2, mean_n),
        mean_a: s.alpha,
        var_x: 0.0,
        var_p: 0.0,
        cov_xp: 0.0,
    }
}

/// Model before and after the pump switch-off.
struct Pumped<M> {
    on: M,
    off: Option<(f64, M)>,
}

impl<M> Pumped<M> {
    fn build(spec: &EnsembleSpec, make: impl Fn(KerrParams) -> Result<M>) -> Result<Self> {
        let p = spec.params_for_scheme();
        let off = match spec.pump_off {
            Some(t) => Some((t, make(p.with_drive(0.0))?)),
            None => None,
        };
        Ok(Self { on: make(p)?, off })
    }

    /// Splits `[from, to]` at the switch-off.
    fn segments(&self, from: f64, to: f64) -> Vec<(f64, f64, &M)> {
        match &self.off {
            Some((t_off, off)) if *t_off <= from => vec![(from, to, off)],
            Some((t_off, off)) if *t_off < to => vec![(from, *t_off, &self.on), (*t_off, to, off)],
            _ => vec![(from, to, &self.on)],
        }
    }
}

struct Driver<'a> {
    spec: &'a EnsembleSpec,
    rng: RngStream,
    threshold: Option<JumpThreshold>,
    jumps: Vec<f64>,
}

impl Driver<'_> {
    fn run<M, S>(&mut self, model: &Pumped<M>, mut s: S, dt: f64, observe: &mut dyn FnMut(usize, &S) -> Result<()>) -> Result<()>
    where
        M: JumpModel<State = S> + DiffusiveModel<State = S>,
        S: Clone,
    {
        let scheme = self.spec.scheme;
        if scheme == UnravelingScheme::PhotonCounting {
            self.threshold = Some(JumpThreshold::draw(&mut self.rng));
        }
        let mut t = self.spec.grid.t0;
        for (i, &ts) in self.spec.grid.sample_times.iter().enumerate() {
            for (from, to, m) in model.segments(t, ts) {
                s = match self.threshold.as_mut() {
                    Some(thr) => advance_pc(m, s, dt, from, to, thr, &mut self.rng, &mut self.jumps)?,
                    None => advance_diffusive(m, s, scheme, dt, from, to, &mut self.rng)?,
                };
            }
            t = ts;
            observe(i, &s)?;
        }
        Ok(())
    }
}

/// Runs trajectory `index` of the ensemble, handing the state at every grid
/// time to `observe`. Returns the click times.
pub fn simulate_trajectory(spec: &EnsembleSpec, index: u64, observe: &mut dyn FnMut(usize, StateRef<'_>) -> Result<()>) -> Result<Vec<f64>> {
    let seed = crate::model::derive_trajectory_seed(spec.master_seed, index);
    let mut d = Driver {
        spec,
        rng: RngStream::new(seed),
        threshold: None,
        jumps: Vec::new(),
    };
    let alpha0 = spec.initial.alpha();
    let st = &spec.settings;
    let dt = if spec.scheme.is_diffusive() { st.dt_diffusive } else { st.dt_pc };
    match spec.method {
        Method::Exact => {
            let n = spec.n_levels();
            let model = Pumped::build(spec, |p| Ok(KerrFock::new(p, n)?.with_tail_threshold(st.tail_threshold).with_step(dt)))?;
            let s0 = match spec.initial {
                InitialState::Vacuum => FockState::vacuum(n),
                InitialState::Coherent { alpha } => FockState::coherent(alpha, n),
            };
            d.run(&model, s0, dt, &mut |i, s| observe(i, StateRef::Fock(s)))?;
        }
        Method::Xp => {
            let model = Pumped::build(spec, |p| XpSolver::new(p, st.xp))?;
            d.run(&model, XpState::coherent(alpha0), dt, &mut |i, s| observe(i, StateRef::Xp(s)))?;
        }
        Method::Ntheta => {
            let model = Pumped::build(spec, |p| NThetaSolver::new(p, st.ntheta))?;
            d.run(&model, NThetaState::from_alpha(alpha0), dt, &mut |i, s| observe(i, StateRef::Ntheta(s)))?;
        }
        Method::Twa => {
            let model = Pumped::build(spec, |p| Ok(p))?;
            let mut s = twa_initial_sample(alpha0, &mut d.rng);
            let mut t = spec.grid.t0;
            for (i, &ts) in spec.grid.sample_times.iter().enumerate() {
                for (from, to, p) in model.segments(t, ts) {
                    s = twa_advance(s, p, st.dt_twa, from, to, &mut d.rng)?;
                }
                t = ts;
                observe(i, StateRef::Twa(&s))?;
            }
        }
    }
    Ok(d.jumps)
}

/// Single trajectory reduced to its moments on the grid.
pub fn run_trajectory(spec: &EnsembleSpec, index: u64) -> Result<TrajectoryRecord> {
    let mut samples = Vec::with_capacity(spec.grid.len());
    let jumps = simulate_trajectory(spec, index, &mut |_, s| {
        samples.push(s.moments()?);
        Ok(())
    })?;
    Ok(TrajectoryRecord {
        index,
        seed: crate::model::derive_trajectory_seed(spec.master_seed, index),
        method: spec.method,
        scheme: spec.scheme,
        samples,
        jumps,
    })
}

/// Runs `n_traj` independent trajectories. Trajectory `k` draws all its
/// randomness from `derive_trajectory_seed(master_seed, k)`, so the result does
/// not depend on the worker count.
///
/// Fails on any truncation error, and when more than `failure_budget` of the
/// trajectories abort; smaller numbers of failures are reported in the run.
pub fn run_ensemble(spec: &EnsembleSpec) -> Result<EnsembleRun> {
    spec.validate()?;
    let work = || -> Vec<std::result::Result<TrajectoryRecord, TrajectoryFailure>> {
        (0..spec.n_traj as u64)
            .into_par_iter()
            .map(|k| {
                run_trajectory(spec, k).map_err(|e| TrajectoryFailure {
                    index: k,
                    seed: crate::model::derive_trajectory_seed(spec.master_seed, k),
                    truncation: matches!(e, Error::Truncation { .. }),
                    message: e.to_string(),
                })
            })
            .collect()
    };
    let results = match spec.settings.workers {
        Some(w) => rayon::ThreadPoolBuilder::new()
            .num_threads(w.max(1))
            .build()
            .map_err(|e| Error::Config(format!("worker pool: {e}")))?
            .install(work),
        None => work(),
    };
    let mut records = Vec::with_capacity(results.len());
    let mut failures = Vec::new();
    for r in results {
        match r {
            Ok(rec) => records.push(rec),
            Err(f) => failures.push(f),
        }
    }
    if let Some(f) = failures.iter().find(|f| f.truncation) {
        log::error!("trajectory {} hit the Fock truncation: {}", f.index, f.message);
        // rerun it to surface the structured error
        return Err(run_trajectory(spec, f.index).expect_err("truncation failure is deterministic"));
    }
    let allowed = (spec.settings.failure_budget * spec.n_traj as f64).floor() as usize;
    if failures.len() > allowed {
        return Err(Error::FailureBudget {
            failed: failures.len(),
            total: spec.n_traj,
            budget: 100.0 * spec.settings.failure_budget,
            first: failures[0].message.clone(),
        });
    }
    if !failures.is_empty() {
        log::warn!("{} of {} trajectories failed: {}", failures.len(), spec.n_traj, failures[0].message);
    }
    Ok(EnsembleRun {
        spec: spec.clone(),
        records,
        failures,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Observable {
    X,
    P,
    N,
}

impl Observable {
    /// Per-trajectory mean and quantum variance.
    fn split(self, m: &DensityMatrixMoments) -> (f64, f64) {
        match self {
            Self::X => (m.mean_a.re, m.var_x),
            Self::P => (m.mean_a.im, m.var_p),
            Self::N => (m.mean_n, m.var_n),
        }
    }
}

/// Ensemble statistics of one observable at one time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StatPoint {
    pub t: f64,
    pub mean: f64,
    pub var_total: f64,
    /// `(1/N) Σ_k Var_k(O)`
    pub var_intra: f64,
    /// `(1/N) Σ_k ⟨O⟩_k² − ((1/N) Σ_k ⟨O⟩_k)²`
    pub var_inter: f64,
    /// `√(var_inter / N)`
    pub std_error: f64,
}

fn check_records(records: &[TrajectoryRecord], grid: &TimeGrid) -> Result<()> {
    if records.len() < 2 {
        return Err(Error::Usage(format!("need at least two trajectories, got {}", records.len())));
    }
    if let Some(r) = records.iter().find(|r| r.samples.len() != grid.len()) {
        return Err(Error::Usage(format!(
            "trajectory {} has {} samples on a {}-point grid",
            r.index,
            r.samples.len(),
            grid.len()
        )));
    }
    Ok(())
}

/// Splits the ensemble variance of `obs` into its intra- and inter-trajectory
/// parts with population (1/N) normalization. The total is accumulated from
/// the raw second moment independently of the two parts.
pub fn variance_decomposition(records: &[TrajectoryRecord], grid: &TimeGrid, obs: Observable) -> Result<Vec<StatPoint>> {
    check_records(records, grid)?;
    let inv = 1.0 / records.len() as f64;
    Ok(grid
        .sample_times
        .iter()
        .enumerate()
        .map(|(i, &t)| {
            // shift by the first trajectory to limit cancellation
            let (shift, _) = obs.split(&records[0].samples[i]);
            let (mut m1, mut m2, mut intra) = (0.0, 0.0, 0.0);
            for r in records {
                let (m, v) = obs.split(&r.samples[i]);
                let d = m - shift;
                m1 += d;
                m2 += d * d;
                intra += v;
            }
            let (m1, m2, intra) = (m1 * inv, m2 * inv, intra * inv);
            let inter = (m2 - m1 * m1).max(0.0);
            let total = intra + m2 - m1 * m1;
            StatPoint {
                t,
                mean: shift + m1,
                var_total: total,
                var_intra: intra,
                var_inter: inter,
                std_error: (inter * inv).sqrt(),
            }
        })
        .collect())
}

/// An ensemble estimate with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub std_error: f64,
}

impl Estimate {
    /// Whether two estimates agree within `k` combined standard errors.
    pub fn agrees_with(&self, other: &Estimate, k: f64) -> bool {
        (self.value - other.value).abs() <= k * self.std_error.hypot(other.std_error)
    }

    /// Whether the estimate agrees with an exact value within `k` standard errors.
    pub fn agrees_with_exact(&self, exact: f64, k: f64) -> bool {
        (self.value - exact).abs() <= k * self.std_error
    }
}

/// `g² = ⟨a†a†aa⟩ / ⟨a†a⟩²` of the ensemble at each grid time, with a
/// first-order (delta-method) standard error.
pub fn ensemble_g2(records: &[TrajectoryRecord], grid: &TimeGrid) -> Result<Vec<Option<Estimate>>> {
    check_records(records, grid)?;
    let inv = 1.0 / records.len() as f64;
    Ok((0..grid.len())
        .map(|i| {
            let (mut f, mut n) = (0.0, 0.0);
            for r in records {
                f += r.samples[i].fact2;
                n += r.samples[i].mean_n;
            }
            let (f, n) = (f * inv, n * inv);
            let g2 = g2_of(f, n)?;
            let (mut vf, mut vn, mut c) = (0.0, 0.0, 0.0);
            for r in records {
                let df = r.samples[i].fact2 - f;
                let dn = r.samples[i].mean_n - n;
                vf += df * df;
                vn += dn * dn;
                c += df * dn;
            }
            let (vf, vn, c) = (vf * inv, vn * inv, c * inv);
            // gradient of f/n² is (1/n², −2f/n³)
            let var = vf / n.powi(4) + 4.0 * f * f * vn / n.powi(6) - 4.0 * f * c / n.powi(5);
            Some(Estimate {
                value: g2,
                std_error: (var.max(0.0) * inv).sqrt(),
            })
        })
        .collect())
}

/// Ensemble summary on the grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleStats {
    pub times: Vec<f64>,
    pub n_traj: usize,
    pub n_failed: usize,
    pub x: Vec<StatPoint>,
    pub p: Vec<StatPoint>,
    pub n: Vec<StatPoint>,
    pub g2: Vec<Option<Estimate>>,
    /// Total symmetrized X–P covariance.
    pub cov_xp: Vec<f64>,
}

impl EnsembleStats {
    pub fn from_run(run: &EnsembleRun) -> Result<Self> {
        let grid = &run.spec.grid;
        let recs = &run.records;
        let x = variance_decomposition(recs, grid, Observable::X)?;
        let p = variance_decomposition(recs, grid, Observable::P)?;
        let inv = 1.0 / recs.len() as f64;
        let cov_xp = (0..grid.len())
            .map(|i| {
                let (mx, mp) = (x[i].mean, p[i].mean);
                recs.iter()
                    .map(|r| {
                        let m = &r.samples[i];
                        m.cov_xp + (m.mean_a.re - mx) * (m.mean_a.im - mp)
                    })
                    .sum::<f64>()
                    * inv
            })
            .collect();
        Ok(Self {
            times: grid.sample_times.clone(),
            n_traj: recs.len(),
            n_failed: run.failures.len(),
            x,
            p,
            n: variance_decomposition(recs, grid, Observable::N)?,
            g2: ensemble_g2(recs, grid)?,
            cov_xp,
        })
    }

    pub fn series(&self, obs: Observable) -> &[StatPoint] {
        match obs {
            Observable::X => &self.x,
            Observable::P => &self.p,
            Observable::N => &self.n,
        }
    }

    /// Ensemble mean of `obs` at grid index `i` with its standard error.
    pub fn estimate(&self, obs: Observable, i: usize) -> Estimate {
        let s = self.series(obs)[i];
        Estimate {
            value: s.mean,
            std_error: s.std_error,
        }
    }
}

/// `N_TWA / N_traj = 1 + Var₁/Var₂` for equal precision of the ensemble mean.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SampleRatio {
    pub value: f64,
    /// Set when the inter-trajectory variance vanishes and the ratio diverges.
    pub infinite: bool,
}

pub fn sample_ratio_criterion(point: &StatPoint) -> SampleRatio {
    let scale = point.var_intra.abs() + point.mean * point.mean;
    if point.var_inter <= f64::EPSILON * scale || point.var_inter == 0.0 {
        return SampleRatio {
            value: f64::INFINITY,
            infinite: true,
        };
    }
    SampleRatio {
        value: 1.0 + point.var_intra / point.var_inter,
        infinite: false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn rec(index: u64, samples: Vec<DensityMatrixMoments>) -> TrajectoryRecord {
        TrajectoryRecord {
            index,
            seed: index,
            method: Method::Exact,
            scheme: UnravelingScheme::Heterodyne,
            samples,
            jumps: vec![],
        }
    }

    fn moment(x: f64, var_x: f64) -> DensityMatrixMoments {
        DensityMatrixMoments {
            mean_n: x * x,
            var_n: 0.0,
            fact2: 0.0,
            g2: None,
            mean_a: Complex64::new(x, 0.0),
            var_x,
            var_p: 0.25,
            cov_xp: 0.0,
        }
    }

    fn spec(method: Method, scheme: UnravelingScheme) -> EnsembleSpec {
        EnsembleSpec {
            method,
            scheme,
            params: KerrParams::new(1.0, 0.05, 1.0),
            pump_off: None,
            initial: InitialState::Coherent {
                alpha: Complex64::new(2.0, 0.0),
            },
            grid: TimeGrid::uniform(0.0, 0.5, 6).unwrap(),
            n_traj: 8,
            master_seed: 42,
            settings: SolverSettings {
                n_levels: Some(40),
                ..SolverSettings::default()
            },
        }
    }

    #[test]
    fn decomposition_of_hand_values() {
        let grid = TimeGrid::final_only(0.0, 1.0).unwrap();
        let recs = vec![rec(0, vec![moment(1.0, 0.5)]), rec(1, vec![moment(3.0, 1.5)])];
        let s = variance_decomposition(&recs, &grid, Observable::X).unwrap()[0];
        assert_relative_eq!(s.mean, 2.0);
        assert_relative_eq!(s.var_intra, 1.0);
        assert_relative_eq!(s.var_inter, 1.0);
        assert_relative_eq!(s.var_total, 2.0);
        assert_relative_eq!(s.std_error, 0.5f64.sqrt());
        let r = sample_ratio_criterion(&s);
        assert!(!r.infinite);
        assert_relative_eq!(r.value, 2.0);
    }

    #[test]
    fn identical_trajectories_have_no_inter_variance() {
        let grid = TimeGrid::final_only(0.0, 1.0).unwrap();
        let recs: Vec<_> = (0..5).map(|k| rec(k, vec![moment(0.7, 0.25)])).collect();
        let s = variance_decomposition(&recs, &grid, Observable::X).unwrap()[0];
        assert_eq!(s.var_inter, 0.0);
        assert!(sample_ratio_criterion(&s).infinite);
        // point samples carry no intra variance
        let pts: Vec<_> = (0..5).map(|k| rec(k, vec![moment(k as f64, 0.0)])).collect();
        let s = variance_decomposition(&pts, &grid, Observable::X).unwrap()[0];
        assert_eq!(s.var_intra, 0.0);
        assert_relative_eq!(s.var_total, s.var_inter);
        assert_relative_eq!(sample_ratio_criterion(&s).value, 1.0);
    }

    #[test]
    fn mismatched_grids_are_rejected() {
        let grid = TimeGrid::uniform(0.0, 1.0, 2).unwrap();
        let recs = vec![rec(0, vec![moment(1.0, 0.5)]), rec(1, vec![moment(3.0, 1.5)])];
        assert!(variance_decomposition(&recs, &grid, Observable::X).is_err());
        assert!(variance_decomposition(&recs[..1], &TimeGrid::final_only(0.0, 1.0).unwrap(), Observable::X).is_err());
    }

    #[test]
    fn grid_validation() {
        assert!(TimeGrid { t0: 0.0, t1: 1.0, sample_times: vec![0.5, 0.5] }.validate().is_err());
        assert!(TimeGrid { t0: 0.0, t1: 1.0, sample_times: vec![0.5, 1.5] }.validate().is_err());
        assert!(TimeGrid::uniform(0.0, 1.0, 1).is_err());
    }

    #[test]
    fn pairing_rules() {
        assert!(spec(Method::Xp, UnravelingScheme::HomodyneX).validate().is_err());
        assert!(spec(Method::Ntheta, UnravelingScheme::HomodyneX).validate().is_err());
        let mut s = spec(Method::Ntheta, UnravelingScheme::Heterodyne);
        s.initial = InitialState::Vacuum;
        assert!(s.validate().is_err());
        let mut s = spec(Method::Exact, UnravelingScheme::PhotonCounting);
        s.settings.n_levels = None;
        s.initial = InitialState::Coherent {
            alpha: Complex64::new(30.0, 0.0),
        };
        assert!(matches!(s.validate(), Err(Error::Config(_))));
        spec(Method::Twa, UnravelingScheme::HomodyneX).validate().unwrap();
    }

    #[test]
    fn runs_are_reproducible_and_worker_independent() {
        for (m, sc) in [
            (Method::Exact, UnravelingScheme::PhotonCounting),
            (Method::Exact, UnravelingScheme::HomodyneX),
            (Method::Xp, UnravelingScheme::Heterodyne),
            (Method::Twa, UnravelingScheme::PhotonCounting),
        ] {
            let mut s = spec(m, sc);
            s.settings.workers = Some(1);
            let serial = run_ensemble(&s).unwrap();
            s.settings.workers = Some(3);
            let parallel = run_ensemble(&s).unwrap();
            assert_eq!(serial.records, parallel.records, "{m} {sc}");
            assert_eq!(serial.records.len(), 8);
        }
    }

    #[test]
    fn seed_matched_thresholds() {
        // exact and XP photon counting from a coherent state click identically
        // while the state stays coherent (U = F = 0)
        let mut s = spec(Method::Exact, UnravelingScheme::PhotonCounting);
        s.params = KerrParams::new(0.0, 0.0, 0.0);
        s.grid = TimeGrid::uniform(0.0, 1.0, 3).unwrap();
        let exact = run_trajectory(&s, 3).unwrap();
        s.method = Method::Xp;
        let xp = run_trajectory(&s, 3).unwrap();
        assert!(!exact.jumps.is_empty());
        assert_eq!(exact.jumps.len(), xp.jumps.len());
        for (a, b) in exact.jumps.iter().zip(&xp.jumps) {
            assert!((a - b).abs() < 1e-5, "{a} vs {b}");
        }
    }

    #[test]
    fn pump_switch_off_empties_the_cavity() {
        let mut s = spec(Method::Xp, UnravelingScheme::PhotonCounting);
        s.initial = InitialState::Vacuum;
        s.params = KerrParams::new(0.0, 0.0, 1.0);
        s.pump_off = Some(20.0);
        s.grid = TimeGrid {
            t0: 0.0,
            t1: 45.0,
            sample_times: vec![20.0, 45.0],
        };
        let r = run_trajectory(&s, 0).unwrap();
        // driven to 4(1 − e^{−10})² photons, then free decay e^{−25}
        assert!((r.samples[0].mean_n - 4.0).abs() < 1e-3, "{}", r.samples[0].mean_n);
        assert!(r.samples[1].mean_n < 1e-9);
    }

    #[test]
    fn g2_estimate_of_poissonian_ensemble() {
        let s = spec(Method::Exact, UnravelingScheme::Heterodyne);
        let run = run_ensemble(&s).unwrap();
        let stats = EnsembleStats::from_run(&run).unwrap();
        let g0 = stats.g2[0].unwrap();
        assert_relative_eq!(g0.value, 1.0, epsilon = 1e-9);
        assert!(g0.std_error < 1e-9);
        for (i, x) in stats.x.iter().enumerate() {
            assert_relative_eq!(x.var_total, x.var_intra + x.var_inter, max_relative = 1e-10);
            if i == 0 {
                assert!(sample_ratio_criterion(x).infinite);
            }
        }
    }
}
