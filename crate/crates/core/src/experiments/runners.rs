use crate::ensemble::{
    run_ensemble, sample_ratio_criterion, simulate_trajectory, EnsembleSpec, EnsembleStats, InitialState, Method, StateRef, TimeGrid,
    MAX_FOCK_LEVELS,
};
use crate::error::{Error, Result};
use crate::fock::{default_n_levels, lindblad_steady_state, DensityMatrix, FockState, Liouvillian};
use crate::model::UnravelingScheme;
use crate::ntheta::wigner_from_ntheta;
use crate::wigner::{wigner_from_fock, PhaseSpaceGrid, WignerMap};
use crate::xp::wigner_from_xp;

use super::config::{ExperimentConfig, ExperimentKind};
use super::output::{ExperimentOutput, Table};

/// Runs the experiment described by `cfg`.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    cfg.validate()?;
    let mut out = ExperimentOutput::new(cfg);
    match cfg.kind {
        ExperimentKind::SingleTraj => single_traj(cfg, &mut out)?,
        ExperimentKind::Bistability => bistability(cfg, &mut out)?,
        ExperimentKind::PhaseDiffusion | ExperimentKind::LowSample => phase_diffusion(cfg, &mut out)?,
        ExperimentKind::Wigner => wigner(cfg, &mut out)?,
        ExperimentKind::Oracle => oracle(cfg, &mut out)?,
    }
    Ok(out)
}

/// A solver and the unraveling it runs under.
#[derive(Debug, Clone)]
struct Combo {
    method: Method,
    scheme: UnravelingScheme,
    label: String,
}

fn combos(cfg: &ExperimentConfig, out: &mut ExperimentOutput) -> Result<Vec<Combo>> {
    let mut v: Vec<Combo> = Vec::new();
    for &method in &cfg.methods {
        let schemes = match method {
            // the sampled equation does not depend on a detection scheme
            Method::Twa => vec![cfg.schemes.first().copied().unwrap_or(UnravelingScheme::PhotonCounting)],
            _ => cfg.schemes.clone(),
        };
        for scheme in schemes {
            if matches!(method, Method::Xp | Method::Ntheta) && scheme == UnravelingScheme::HomodyneX {
                out.note(format!("skipping {method} with homodyne-X: no equations for that unraveling"));
                continue;
            }
            let label = match method {
                Method::Twa => "twa".to_owned(),
                _ => format!("{method}-{}", scheme.short_name()),
            };
            if !v.iter().any(|c| c.label == label) {
                v.push(Combo { method, scheme, label });
            }
        }
    }
    if v.is_empty() {
        return Err(Error::Config("no runnable method/scheme pair".into()));
    }
    Ok(v)
}

fn ensemble_spec(cfg: &ExperimentConfig, c: &Combo, f: f64, grid: TimeGrid, n_traj: usize) -> EnsembleSpec {
    EnsembleSpec {
        method: c.method,
        scheme: c.scheme,
        params: cfg.params_with(f),
        pump_off: cfg.pump_off,
        initial: cfg.initial,
        grid,
        n_traj,
        master_seed: cfg.seed,
        settings: cfg.solver,
    }
}

fn cols(names: &[&str]) -> Vec<String> {
    names.iter().map(|s| s.to_string()).collect()
}

fn single_traj(cfg: &ExperimentConfig, out: &mut ExperimentOutput) -> Result<()> {
    let grid = TimeGrid::uniform(0.0, cfg.t_max, cfg.n_times)?;
    let scheme = cfg.schemes[0];
    let mut columns = vec!["t".to_owned()];
    let mut series = Vec::new();
    for &method in &cfg.methods {
        let c = Combo {
            method,
            scheme,
            label: method.name().into(),
        };
        let spec = ensemble_spec(cfg, &c, cfg.f, grid.clone(), 1);
        spec.validate()?;
        let mut n = Vec::with_capacity(grid.len());
        let jumps = simulate_trajectory(&spec, cfg.trajectory, &mut |_, s| {
            n.push(s.moments()?.mean_n);
            Ok(())
        })?;
        log::info!("{method}: {} clicks", jumps.len());
        columns.push(format!("n_{method}"));
        columns.push(format!("jumps_{method}"));
        series.push((method, n, jumps));
    }
    let mut t = Table::new("trajectories", columns);
    for (i, &ti) in grid.sample_times.iter().enumerate() {
        let prev = if i == 0 { f64::NEG_INFINITY } else { grid.sample_times[i - 1] };
        let mut row = vec![ti];
        for (_, n, jumps) in &series {
            row.push(n[i]);
            row.push(jumps.iter().filter(|&&tj| tj > prev && tj <= ti).count() as f64);
        }
        t.push(row);
    }
    out.tables.push(t);
    if scheme == UnravelingScheme::PhotonCounting {
        for (method, _, jumps) in series {
            let mut t = Table::new(format!("clicks-{method}"), cols(&["t"]));
            for tj in jumps {
                t.push(vec![tj]);
            }
            out.tables.push(t);
        }
    }
    Ok(())
}

fn oracle_levels(cfg: &ExperimentConfig, f: f64) -> usize {
    cfg.oracle_levels.unwrap_or_else(|| {
        let driven = 4.0 * f * f / (cfg.gamma * cfg.gamma);
        default_n_levels(driven.max(cfg.initial.alpha().norm_sqr()))
    })
}

fn bistability(cfg: &ExperimentConfig, out: &mut ExperimentOutput) -> Result<()> {
    let grid = TimeGrid::final_only(0.0, cfg.t_max)?;
    let combos = combos(cfg, out)?;
    let mut columns = cols(&["f", "oracle_n", "oracle_g2"]);
    for c in &combos {
        for q in ["n", "n_se", "g2", "g2_se", "failed"] {
            columns.push(format!("{q}_{}", c.label));
        }
    }
    let mut t = Table::new("sweep", columns);
    for &f in &cfg.f_values {
        let ss = lindblad_steady_state(&cfg.params_with(f), oracle_levels(cfg, f))?;
        let mut row = vec![f, ss.moments.mean_n, ss.moments.g2.unwrap_or(f64::NAN)];
        for c in &combos {
            let run = run_ensemble(&ensemble_spec(cfg, c, f, grid.clone(), cfg.n_traj_for(c.method)))?;
            let stats = EnsembleStats::from_run(&run)?;
            let n = stats.n[0];
            let (g2, g2_se) = stats.g2[0].map_or((f64::NAN, f64::NAN), |e| (e.value, e.std_error));
            log::info!("F = {f}: {} ⟨n⟩ = {:.4} ± {:.4} (oracle {:.4})", c.label, n.mean, n.std_error, ss.moments.mean_n);
            row.extend([n.mean, n.std_error, g2, g2_se, stats.n_failed as f64]);
        }
        t.push(row);
    }
    out.tables.push(t);
    Ok(())
}

/// Master-equation moments on the grid, integrated from the initial state.
fn master_equation(cfg: &ExperimentConfig, grid: &TimeGrid) -> Result<Table> {
    let n = cfg.oracle_levels.or(cfg.solver.n_levels).unwrap_or_else(|| oracle_levels(cfg, cfg.f));
    if n > MAX_FOCK_LEVELS {
        return Err(Error::Config(format!("master-equation reference would need {n} levels (limit {MAX_FOCK_LEVELS})")));
    }
    let on = Liouvillian::new(cfg.params(), n)?;
    let off = Liouvillian::new(cfg.params_with(0.0), n)?;
    // keep the RK4 part of the step inside its stability region
    let rate = cfg.gamma * n as f64 + 4.0 * cfg.f.abs() * (n as f64).sqrt();
    let dt = (1.0 / rate).min(1e-3);
    let psi = match cfg.initial {
        InitialState::Vacuum => FockState::vacuum(n),
        InitialState::Coherent { alpha } => FockState::coherent(alpha, n),
    };
    let mut rho = DensityMatrix::from_pure(&psi);
    let mut t = Table::new("master-equation", cols(&["t", "mean_x", "var_x", "mean_p", "var_p", "cov_xp", "mean_n", "g2"]));
    let mut now = grid.t0;
    for &ts in &grid.sample_times {
        let switch = cfg.pump_off.filter(|&t_off| t_off > now && t_off < ts);
        if let Some(t_off) = switch {
            rho = on.evolve(&rho, t_off - now, dt);
            now = t_off;
        }
        let l = if cfg.pump_off.is_some_and(|t_off| t_off <= now) { &off } else { &on };
        rho = l.evolve(&rho, ts - now, dt);
        now = ts;
        let tail = rho.get(n - 1, n - 1).re;
        if tail > cfg.solver.tail_threshold {
            return Err(Error::Truncation {
                tail,
                threshold: cfg.solver.tail_threshold,
                n_levels: n,
            });
        }
        let m = rho.moments();
        t.push(vec![ts, m.mean_x(), m.var_x, m.mean_p(), m.var_p, m.cov_xp, m.mean_n, m.g2.unwrap_or(f64::NAN)]);
    }
    Ok(t)
}

fn phase_diffusion(cfg: &ExperimentConfig, out: &mut ExperimentOutput) -> Result<()> {
    let grid = TimeGrid::uniform(0.0, cfg.t_max, cfg.n_times)?;
    let combos = combos(cfg, out)?;
    let reference = if cfg.reference { Some(master_equation(cfg, &grid)?) } else { None };
    let columns = cols(&[
        "t",
        "mean_x",
        "var_total_x",
        "var_intra_x",
        "var_inter_x",
        "se_x",
        "mean_p",
        "var_total_p",
        "var_intra_p",
        "var_inter_p",
        "se_p",
        "cov_xp",
        "mean_n",
        "se_n",
        "ratio_x",
        "ratio_x_infinite",
    ]);
    let mut rms = Table::new("rms-deviation", combos.iter().map(|c| format!("rms_x_{}", c.label)).collect());
    let mut rms_row = Vec::new();
    for c in &combos {
        let n_traj = cfg.n_traj_for(c.method);
        let run = run_ensemble(&ensemble_spec(cfg, c, cfg.f, grid.clone(), n_traj))?;
        if !run.failures.is_empty() {
            out.note(format!("{}: {} of {n_traj} trajectories failed: {}", c.label, run.failures.len(), run.failures[0].message));
        }
        let s = EnsembleStats::from_run(&run)?;
        let mut t = Table::new(c.label.clone(), columns.clone());
        for i in 0..grid.len() {
            let (x, p, n) = (s.x[i], s.p[i], s.n[i]);
            let ratio = sample_ratio_criterion(&x);
            t.push(vec![
                x.t,
                x.mean,
                x.var_total,
                x.var_intra,
                x.var_inter,
                x.std_error,
                p.mean,
                p.var_total,
                p.var_intra,
                p.var_inter,
                p.std_error,
                s.cov_xp[i],
                n.mean,
                n.std_error,
                ratio.value,
                if ratio.infinite { 1.0 } else { 0.0 },
            ]);
        }
        if let Some(r) = &reference {
            let want = r.column("mean_x").expect("reference has mean_x");
            let ms = s.x.iter().zip(&want).map(|(x, w)| (x.mean - w).powi(2)).sum::<f64>() / want.len() as f64;
            rms_row.push(ms.sqrt());
        }
        log::info!("{}: {} trajectories done", c.label, s.n_traj);
        out.tables.push(t);
    }
    if let Some(r) = reference {
        out.tables.push(r);
        if cfg.kind == ExperimentKind::LowSample {
            rms.push(rms_row);
            out.tables.push(rms);
        }
    }
    Ok(())
}

/// Circular standard deviation `√(−2 ln R)` of the polar angle under `W`.
fn angular_spread(map: &WignerMap) -> f64 {
    let g = map.grid;
    let (mut c, mut s, mut tot) = (0.0, 0.0, 0.0);
    for j in 0..g.np {
        for i in 0..g.nx {
            let (x, p) = (g.x(i), g.p(j));
            let r = x.hypot(p);
            if r == 0.0 {
                continue;
            }
            let w = map.at(i, j);
            c += w * x / r;
            s += w * p / r;
            tot += w;
        }
    }
    let r = c.hypot(s) / tot;
    if r > 0.0 && r <= 1.0 {
        (-2.0 * r.ln()).sqrt()
    } else {
        f64::NAN
    }
}

fn wigner(cfg: &ExperimentConfig, out: &mut ExperimentOutput) -> Result<()> {
    let ts = cfg.snapshot_times.clone();
    let grid = TimeGrid {
        t0: 0.0,
        t1: ts[ts.len() - 1],
        sample_times: ts.clone(),
    };
    let hw = cfg.wigner_half_width.unwrap_or(cfg.initial.alpha().norm() + 3.0);
    let plane = PhaseSpaceGrid::square(hw, cfg.wigner_points);
    for c in combos(cfg, out)? {
        if c.method == Method::Twa {
            out.note("skipping twa: a point sample has no Wigner function of its own".into());
            continue;
        }
        let spec = ensemble_spec(cfg, &c, cfg.f, grid.clone(), 1);
        spec.validate()?;
        let mut snaps: Vec<(WignerMap, f64)> = Vec::new();
        simulate_trajectory(&spec, cfg.trajectory, &mut |_, s| {
            let map = match s {
                StateRef::Fock(f) => wigner_from_fock(f, &plane)?,
                StateRef::Xp(x) => wigner_from_xp(x, &plane)?,
                StateRef::Ntheta(n) => wigner_from_ntheta(n, &plane)?,
                StateRef::Twa(_) => unreachable!("twa is skipped"),
            };
            snaps.push((map, s.moments()?.mean_n));
            Ok(())
        })?;
        let mut values = Table::new(c.label.clone(), cols(&["t", "x", "p", "w"]));
        let mut summary = Table::new(format!("{}-summary", c.label), cols(&["t", "mass", "peak", "mean_n", "angular_spread"]));
        for (k, (map, mean_n)) in snaps.iter().enumerate() {
            let t = ts[k];
            for w in &map.warnings {
                out.note(format!("{} at t = {t}: {w}", c.label));
            }
            for j in 0..plane.np {
                for i in 0..plane.nx {
                    values.push(vec![t, plane.x(i), plane.p(j), map.at(i, j)]);
                }
            }
            summary.push(vec![t, map.mass, map.peak(), *mean_n, angular_spread(map)]);
        }
        out.tables.push(values);
        out.tables.push(summary);
    }
    Ok(())
}

fn oracle(cfg: &ExperimentConfig, out: &mut ExperimentOutput) -> Result<()> {
    let mut t = Table::new(
        "steady-state",
        cols(&[
            "f",
            "n_levels",
            "mean_n",
            "g2",
            "var_n",
            "mean_x",
            "mean_p",
            "var_x",
            "var_p",
            "cov_xp",
            "residual",
            "tail",
            "min_eigenvalue",
        ]),
    );
    for &f in &cfg.f_values {
        let levels = oracle_levels(cfg, f);
        let ss = lindblad_steady_state(&cfg.params_with(f), levels)?;
        let m = ss.moments;
        log::info!("F = {f}: ⟨n⟩ = {:.6}, {levels} levels", m.mean_n);
        t.push(vec![
            f,
            levels as f64,
            m.mean_n,
            m.g2.unwrap_or(f64::NAN),
            m.var_n,
            m.mean_x(),
            m.mean_p(),
            m.var_x,
            m.var_p,
            m.cov_xp,
            ss.residual,
            ss.tail,
            ss.min_eigenvalue,
        ]);
    }
    out.tables.push(t);
    Ok(())
}
