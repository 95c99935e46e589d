//! Shared time-stepping machinery for the two unraveling families.
//!
//! Photon counting propagates the unnormalized state until its squared norm
//! decays to a uniform threshold `R`, brackets the crossing, and
//! applies the jump. Diffusive unravelings take fixed Euler-type steps driven
//! by Wiener increments.

use crate::error::Result;
use crate::model::{sample_noise, NoiseIncrement, RngStream, UnravelingScheme};

/// Width (in units of the step) of the final jump-time bracket.
pub const JUMP_TIME_RTOL: f64 = 1e-6;

/// A solver whose no-click evolution and click update are known.
pub trait JumpModel {
    type State: Clone;

    /// Accumulated `ln ‖ψ̃‖²` since the last jump.
    fn log_norm(&self, s: &Self::State) -> f64;

    /// Deterministic no-click evolution over `h` (one integrator step, or the
    /// exact flow when [`JumpModel::closed_form_jump_time`] is available).
    fn evolve(&self, s: &Self::State, h: f64) -> Result<Self::State>;

    /// Click update; resets the log-norm to zero.
    fn jump(&self, s: &Self::State) -> Result<Self::State>;

    /// Time until `log_norm` reaches `ln_r` under an exactly solvable flow.
    ///
    /// `None`: no closed form, step numerically. `Some(None)`: the threshold is
    /// never reached.
    fn closed_form_jump_time(&self, _s: &Self::State, _ln_r: f64) -> Option<Option<f64>> {
        None
    }
}

/// A solver driven by one Wiener increment per step.
pub trait DiffusiveModel {
    type State: Clone;

    fn step(&self, s: &Self::State, dt: f64, noise: NoiseIncrement) -> Result<Self::State>;
}

/// The current jump target `ln R` of a photon-counting trajectory.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JumpThreshold {
    pub ln_r: f64,
}

impl JumpThreshold {
    pub fn draw(rng: &mut RngStream) -> Self {
        Self { ln_r: rng.uniform().ln() }
    }

    pub fn from_r(r: f64) -> Self {
        Self { ln_r: r.ln() }
    }
}

/// Outcome of one photon-counting step.
#[derive(Debug, Clone)]
pub struct PcStep<S> {
    pub state: S,
    /// Offset of the click inside the step, if one fired.
    pub jump_at: Option<f64>,
}

/// Advances by at most `h`: either the full step without a click, or up to the
/// located click followed by the jump. The caller must draw a new threshold
/// after a click and continue from `h - jump_at`.
pub fn pc_step<M: JumpModel>(model: &M, s: &M::State, h: f64, threshold: JumpThreshold) -> Result<PcStep<M::State>> {
    if let Some(closed) = model.closed_form_jump_time(s, threshold.ln_r) {
        return match closed {
            Some(tj) if tj <= h => {
                let at = tj.max(0.0);
                let moved = model.evolve(s, at)?;
                Ok(PcStep {
                    state: model.jump(&moved)?,
                    jump_at: Some(at),
                })
            }
            _ => Ok(PcStep {
                state: model.evolve(s, h)?,
                jump_at: None,
            }),
        };
    }

    let full = model.evolve(s, h)?;
    let l_full = model.log_norm(&full);
    if l_full > threshold.ln_r {
        return Ok(PcStep { state: full, jump_at: None });
    }
    // Illinois search on g(t) = ln‖ψ̃(t)‖² − ln R, keeping the bracket
    // [lo, hi] with g(lo) > 0 ≥ g(hi) until it is narrower than JUMP_TIME_RTOL h
    let (mut lo, mut hi) = (0.0, h);
    let (mut g_lo, mut g_hi) = (model.log_norm(s) - threshold.ln_r, l_full - threshold.ln_r);
    let mut at_hi = full;
    let mut side = 0i8;
    let tol = JUMP_TIME_RTOL * h;
    while hi - lo > tol {
        let mut t = if g_lo > g_hi { lo + (hi - lo) * g_lo / (g_lo - g_hi) } else { 0.5 * (lo + hi) };
        // keep the probe strictly inside and make narrow brackets collapse
        t = t.clamp(lo + 0.25 * tol, hi - 0.25 * tol);
        let trial = model.evolve(s, t)?;
        let g = model.log_norm(&trial) - threshold.ln_r;
        if g > 0.0 {
            lo = t;
            g_lo = g;
            if side == 1 {
                g_hi *= 0.5;
            }
            side = 1;
        } else {
            hi = t;
            g_hi = g;
            at_hi = trial;
            if side == -1 {
                g_lo *= 0.5;
            }
            side = -1;
        }
    }
    Ok(PcStep {
        state: model.jump(&at_hi)?,
        jump_at: Some(hi),
    })
}

/// Number of equal sub-steps of size at most `dt` covering `span`.
pub fn substeps(span: f64, dt: f64) -> usize {
    ((span / dt) * (1.0 - 1e-12)).ceil().max(1.0) as usize
}

/// Photon-counting propagation from `t_from` to `t_to`, recording absolute
/// click times.
pub fn advance_pc<M: JumpModel>(
    model: &M,
    mut s: M::State,
    dt: f64,
    t_from: f64,
    t_to: f64,
    threshold: &mut JumpThreshold,
    rng: &mut RngStream,
    jumps: &mut Vec<f64>,
) -> Result<M::State> {
    if t_to <= t_from {
        return Ok(s);
    }
    let closed = model.closed_form_jump_time(&s, threshold.ln_r).is_some();
    let n = if closed { 1 } else { substeps(t_to - t_from, dt) };
    let h = (t_to - t_from) / n as f64;
    for i in 0..n {
        let mut t = t_from + i as f64 * h;
        let t_end = if i + 1 == n { t_to } else { t_from + (i + 1) as f64 * h };
        loop {
            let remaining = t_end - t;
            if remaining <= 0.0 {
                break;
            }
            let step = pc_step(model, &s, remaining, *threshold)?;
            s = step.state;
            match step.jump_at {
                None => break,
                Some(at) => {
                    t += at;
                    jumps.push(t);
                    *threshold = JumpThreshold::draw(rng);
                }
            }
        }
    }
    Ok(s)
}

/// Diffusive propagation from `t_from` to `t_to` with steps no larger than `dt`.
pub fn advance_diffusive<M: DiffusiveModel>(
    model: &M,
    mut s: M::State,
    scheme: UnravelingScheme,
    dt: f64,
    t_from: f64,
    t_to: f64,
    rng: &mut RngStream,
) -> Result<M::State> {
    if t_to <= t_from {
        return Ok(s);
    }
    let n = substeps(t_to - t_from, dt);
    let h = (t_to - t_from) / n as f64;
    for _ in 0..n {
        let noise = sample_noise(rng, h, scheme)?;
        s = model.step(&s, h, noise)?;
    }
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::Error;

    /// Norm decays as exp(-rate t); a click doubles the counter.
    struct Decay {
        rate: f64,
    }

    #[derive(Clone)]
    struct DecayState {
        log_norm: f64,
        clicks: u32,
    }

    impl JumpModel for Decay {
        type State = DecayState;

        fn log_norm(&self, s: &DecayState) -> f64 {
            s.log_norm
        }

        fn evolve(&self, s: &DecayState, h: f64) -> Result<DecayState> {
            Ok(DecayState {
                log_norm: s.log_norm - self.rate * h,
                clicks: s.clicks,
            })
        }

        fn jump(&self, s: &DecayState) -> Result<DecayState> {
            if self.rate == 0.0 {
                return Err(Error::NoJump("dark".into()));
            }
            Ok(DecayState {
                log_norm: 0.0,
                clicks: s.clicks + 1,
            })
        }
    }

    #[test]
    fn jump_search_locates_the_crossing() {
        let model = Decay { rate: 2.0 };
        let s = DecayState { log_norm: 0.0, clicks: 0 };
        let thr = JumpThreshold::from_r(0.5);
        let step = pc_step(&model, &s, 1.0, thr).unwrap();
        let exact = 0.5f64.ln().abs() / 2.0;
        let at = step.jump_at.unwrap();
        assert!(at >= exact && at - exact <= JUMP_TIME_RTOL * 1.0 + 1e-15);
        assert_eq!(step.state.clicks, 1);
    }

    #[test]
    fn poisson_click_statistics() {
        let model = Decay { rate: 3.0 };
        let mut rng = RngStream::new(4);
        let mut thr = JumpThreshold::draw(&mut rng);
        let mut jumps = Vec::new();
        let s = DecayState { log_norm: 0.0, clicks: 0 };
        let t_end = 2000.0;
        let s = advance_pc(&model, s, 1e-2, 0.0, t_end, &mut thr, &mut rng, &mut jumps).unwrap();
        let expected = 3.0 * t_end;
        let got = jumps.len() as f64;
        assert!((got - expected).abs() < 4.0 * expected.sqrt(), "{got} vs {expected}");
        assert_eq!(s.clicks as usize, jumps.len());
        assert!(jumps.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn substep_count() {
        assert_eq!(substeps(1.0, 0.1), 10);
        assert_eq!(substeps(0.3, 0.1), 3);
        assert_eq!(substeps(0.05, 0.1), 1);
        assert_eq!(substeps(1.05, 0.1), 11);
    }
}
