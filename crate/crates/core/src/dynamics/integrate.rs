//! Method-of-steps integration of the delay system.
//!
//! The distributed delay is carried as the auxiliary state
//! `Y(t) = ∫_{t-τ}^{t} I(u) du` with `Y' = I(t) - I(t-τ)`, which leaves a
//! single discrete lag. Steps are Dormand–Prince 5(4); lagged values come
//! from the continuous extension of earlier steps (or the history).

use serde::{Deserialize, Serialize};

use super::dense::{integral_over, locate, DenseHistory, DenseSegment, DIM};
use crate::error::{Error, Result};
use crate::model::{rhs_unchecked, History, ModelParams, State};

const C: [f64; 7] = [0.0, 0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0];
const A21: f64 = 0.2;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

/// Tolerance beyond which the state is considered to have left the simplex.
pub const ESCAPE_TOL: f64 = 1e-6;
/// Number of propagated history kinks that steps are forced to land on.
const TRACKED_KINKS: usize = 6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntegratorOptions {
    pub rtol: f64,
    pub atol: f64,
    /// Fixed step size instead of error control.
    pub fixed_step: Option<f64>,
    /// Steps ending before this time are not stored in the trajectory.
    pub record_from: f64,
    pub h_max: f64,
    pub max_steps: usize,
}

impl Default for IntegratorOptions {
    fn default() -> Self {
        Self {
            rtol: 1e-9,
            atol: 1e-12,
            fixed_step: None,
            record_from: 0.0,
            h_max: 0.5,
            max_steps: 50_000_000,
        }
    }
}

impl IntegratorOptions {
    pub fn with_tol(mut self, rtol: f64, atol: f64) -> Self {
        self.rtol = rtol;
        self.atol = atol;
        self
    }

    pub fn recording_from(mut self, t: f64) -> Self {
        self.record_from = t;
        self
    }

    pub fn fixed(mut self, h: f64) -> Self {
        self.fixed_step = Some(h);
        self
    }
}

/// Recorded part of a solution: step endpoints plus their continuous
/// extensions.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub params: ModelParams,
    /// Step endpoints from the first recorded step onward.
    pub times: Vec<f64>,
    /// `(S, I, Y)` at `times`.
    pub states: Vec<[f64; DIM]>,
    pub segments: Vec<DenseSegment>,
    pub accepted_steps: usize,
    pub rejected_steps: usize,
}

impl Trajectory {
    pub fn t_start(&self) -> f64 {
        self.times.first().copied().unwrap_or(0.0)
    }

    pub fn t_end(&self) -> f64 {
        self.times.last().copied().unwrap_or(0.0)
    }

    pub fn final_state(&self) -> [f64; DIM] {
        *self
            .states
            .last()
            .expect("trajectory has at least one point")
    }

    /// Dense-output value at `t` within the recorded span.
    pub fn state_at(&self, t: f64) -> [f64; DIM] {
        if self.segments.is_empty() {
            return self.final_state();
        }
        self.segments[locate(&self.segments, t)].eval(t)
    }

    /// `∫_a^b I(u) du` by exact quadrature of the dense output.
    pub fn integral_i(&self, a: f64, b: f64) -> f64 {
        integral_over(&self.segments, a, b, 1)
    }

    /// Uniform samples `(t, S, I, Y)` every `dt` years over the recorded span.
    pub fn sample(&self, dt: f64) -> Vec<(f64, [f64; DIM])> {
        let (t0, t1) = (self.t_start(), self.t_end());
        let n = ((t1 - t0) / dt).floor() as usize;
        let mut out: Vec<_> = (0..=n)
            .map(|k| {
                let t = t0 + k as f64 * dt;
                (t, self.state_at(t))
            })
            .collect();
        if out.last().map(|(t, _)| *t < t1).unwrap_or(true) {
            out.push((t1, self.final_state()));
        }
        out
    }

    /// The last `span` years as initial data for a new run.
    pub fn tail_history(&self, span: f64) -> Option<History> {
        DenseHistory::from_segments(&self.segments, span).map(History::Dense)
    }
}

struct LagBuffer<'a> {
    history: &'a History,
    segments: Vec<DenseSegment>,
}

impl LagBuffer<'_> {
    #[inline]
    fn state(&self, t: f64) -> State {
        if t <= 0.0 || self.segments.is_empty() {
            return self.history.eval(t.min(0.0));
        }
        let seg = &self.segments[locate(&self.segments, t)];
        State::new(seg.eval_component(t, 0), seg.eval_component(t, 1))
    }

    fn prune(&mut self, before: f64) {
        let k = self.segments.partition_point(|s| s.t1() < before);
        if k > 4096 {
            self.segments.drain(..k);
        }
    }
}

fn derivative(p: &ModelParams, t: f64, y: &[f64; DIM], lag: &LagBuffer<'_>) -> [f64; DIM] {
    let now = State::new(y[0], y[1]);
    let lagged = if p.tau > 0.0 {
        lag.state(t - p.tau)
    } else {
        now
    };
    let (ds, di) = rhs_unchecked(now, lagged, y[2], p);
    [ds, di, y[1] - lagged.i]
}

#[inline]
fn combo(y: &[f64; DIM], h: f64, terms: &[(f64, &[f64; DIM])]) -> [f64; DIM] {
    std::array::from_fn(|c| y[c] + h * terms.iter().map(|(a, k)| a * k[c]).sum::<f64>())
}

/// Kinks of the solution: the history is generally not a solution of this
/// system (a warm start comes from another `τ`), so the derivative jumps at
/// 0 and the jump propagates to `τ, 2τ, ...`.
fn breakpoints(history: &History, tau: f64, t_end: f64) -> Vec<f64> {
    let mut bp = Vec::new();
    if tau > 0.0 {
        bp.extend((1..=TRACKED_KINKS).map(|k| k as f64 * tau));
        if let History::Sampled { times, .. } = history {
            bp.extend(times.iter().map(|t| t + tau).filter(|t| *t > 0.0));
        }
    }
    bp.push(t_end);
    bp.retain(|t| *t > 0.0 && *t <= t_end);
    bp.sort_by(f64::total_cmp);
    bp.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
    bp
}

/// Integrates the delay system from `history` up to `t_end`.
pub fn integrate(
    p: &ModelParams,
    history: &History,
    t_end: f64,
    opts: &IntegratorOptions,
) -> Result<Trajectory> {
    p.validate()?;
    if !(t_end > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "t_end = {t_end} must be positive"
        )));
    }
    if history.start() > -p.tau + 1e-9 * p.tau.max(1.0) {
        return Err(Error::InvalidParameter(format!(
            "history starts at {} but must cover [-{}, 0]",
            history.start(),
            p.tau
        )));
    }
    let s0 = history.eval(0.0);
    if !s0.in_simplex(ESCAPE_TOL) {
        return Err(Error::DomainError { s: s0.s, i: s0.i });
    }

    let mut lag = LagBuffer {
        history,
        segments: Vec::new(),
    };
    let mut y = [s0.s, s0.i, history.exposure(p.tau)];
    let mut t = 0.0;
    let bps = breakpoints(history, p.tau, t_end);
    let mut next_bp = 0;

    let h_cap = if p.tau > 0.0 {
        opts.h_max.min(p.tau)
    } else {
        opts.h_max
    };
    let mut h = opts.fixed_step.unwrap_or(1e-3).min(h_cap);
    let mut traj = Trajectory {
        params: *p,
        times: Vec::new(),
        states: Vec::new(),
        segments: Vec::new(),
        accepted_steps: 0,
        rejected_steps: 0,
    };
    if opts.record_from <= 0.0 {
        traj.times.push(0.0);
        traj.states.push(y);
    }

    let mut k1 = derivative(p, t, &y, &lag);
    let mut last_step_rejected = false;
    while t < t_end {
        if traj.accepted_steps + traj.rejected_steps >= opts.max_steps {
            return Err(Error::ConvergenceFailure {
                what: "delay integration step budget",
                iterations: opts.max_steps,
            });
        }
        while next_bp < bps.len() && bps[next_bp] <= t + 1e-12 * t.abs().max(1.0) {
            next_bp += 1;
        }
        let target = bps.get(next_bp).copied().unwrap_or(t_end);
        let mut hs = h.min(h_cap);
        let mut lands = false;
        if t + hs >= target - 1e-12 * target.abs().max(1.0) {
            hs = target - t;
            lands = true;
        } else if t + 1.5 * hs > target {
            // avoid a sliver step before the breakpoint
            hs = 0.5 * (target - t);
        }
        if hs < 1e-13 * t.abs().max(1.0) {
            return Err(Error::StepSizeUnderflow { t, h: hs });
        }

        let k2 = derivative(p, t + C[1] * hs, &combo(&y, hs, &[(A21, &k1)]), &lag);
        let k3 = derivative(
            p,
            t + C[2] * hs,
            &combo(&y, hs, &[(A31, &k1), (A32, &k2)]),
            &lag,
        );
        let k4 = derivative(
            p,
            t + C[3] * hs,
            &combo(&y, hs, &[(A41, &k1), (A42, &k2), (A43, &k3)]),
            &lag,
        );
        let k5 = derivative(
            p,
            t + C[4] * hs,
            &combo(&y, hs, &[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)]),
            &lag,
        );
        let k6 = derivative(
            p,
            t + hs,
            &combo(
                &y,
                hs,
                &[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)],
            ),
            &lag,
        );
        let y1 = combo(
            &y,
            hs,
            &[(A71, &k1), (A73, &k3), (A74, &k4), (A75, &k5), (A76, &k6)],
        );
        let t1 = if lands { target } else { t + hs };
        let k7 = derivative(p, t1, &y1, &lag);

        let accept = match opts.fixed_step {
            Some(_) => true,
            None => {
                let mut acc = 0.0;
                for c in 0..DIM {
                    let e = hs
                        * (E1 * k1[c]
                            + E3 * k3[c]
                            + E4 * k4[c]
                            + E5 * k5[c]
                            + E6 * k6[c]
                            + E7 * k7[c]);
                    let sk = opts.atol + opts.rtol * y[c].abs().max(y1[c].abs());
                    acc += (e / sk).powi(2);
                }
                let err = (acc / DIM as f64).sqrt();
                let factor = if err == 0.0 {
                    5.0
                } else if err.is_finite() {
                    (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
                } else {
                    0.2
                };
                if err <= 1.0 {
                    let grow = if last_step_rejected {
                        factor.min(1.0)
                    } else {
                        factor
                    };
                    h = if lands { h.max(hs * grow) } else { hs * grow };
                    last_step_rejected = false;
                    true
                } else {
                    h = hs * factor.min(1.0);
                    last_step_rejected = true;
                    traj.rejected_steps += 1;
                    false
                }
            }
        };
        if !accept {
            continue;
        }

        let ydiff: [f64; DIM] = std::array::from_fn(|c| y1[c] - y[c]);
        let bspl: [f64; DIM] = std::array::from_fn(|c| hs * k1[c] - ydiff[c]);
        let seg = DenseSegment {
            t0: t,
            h: t1 - t,
            r: [
                y,
                ydiff,
                bspl,
                std::array::from_fn(|c| ydiff[c] - hs * k7[c] - bspl[c]),
                std::array::from_fn(|c| {
                    hs * (D1 * k1[c]
                        + D3 * k3[c]
                        + D4 * k4[c]
                        + D5 * k5[c]
                        + D6 * k6[c]
                        + D7 * k7[c])
                }),
            ],
        };
        if y1[0] < -ESCAPE_TOL
            || y1[1] < -ESCAPE_TOL
            || y1[0] + y1[1] > 1.0 + ESCAPE_TOL
            || !y1.iter().all(|v| v.is_finite())
        {
            return Err(Error::DomainEscape {
                t: t1,
                s: y1[0],
                i: y1[1],
            });
        }
        lag.segments.push(seg);
        if t1 > opts.record_from {
            if traj.times.is_empty() {
                traj.times.push(t);
                traj.states.push(y);
            }
            traj.segments.push(seg);
            traj.times.push(t1);
            traj.states.push(y1);
        }
        traj.accepted_steps += 1;
        t = t1;
        y = y1;
        k1 = k7;
        if let Some(fixed) = opts.fixed_step {
            h = fixed;
        }
        lag.prune(t - p.tau - 1.0);
    }
    Ok(traj)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::endemic_equilibrium;

    #[test]
    fn equilibrium_history_stays_put() {
        let p = ModelParams::pertussis(3.2, 4.0);
        let eq = endemic_equilibrium(&p).unwrap();
        let h = History::constant(eq.s, eq.i);
        let traj = integrate(&p, &h, 100.0, &IntegratorOptions::default()).unwrap();
        let drift = traj
            .states
            .iter()
            .map(|s| (s[0] - eq.s).abs().max((s[1] - eq.i).abs()))
            .fold(0.0, f64::max);
        assert!(drift < 1e-6, "drift {drift}");
    }

    #[test]
    fn history_must_cover_delay() {
        let p = ModelParams::pertussis(1.0, 4.0);
        let h = History::sampled(vec![-1.0, 0.0], vec![State::new(0.1, 0.001); 2]).unwrap();
        assert!(integrate(&p, &h, 10.0, &IntegratorOptions::default()).is_err());
    }

    #[test]
    fn breakpoints_are_sorted_and_bounded() {
        let h = History::constant(0.1, 0.001);
        let bp = breakpoints(&h, 2.0, 7.0);
        assert_eq!(bp, vec![2.0, 4.0, 6.0, 7.0]);
    }

    #[test]
    fn zero_delay_reduces_to_ode() {
        let p = ModelParams::pertussis(1.0, 0.0);
        let h = History::constant(0.2, 0.01);
        let traj = integrate(&p, &h, 5.0, &IntegratorOptions::default()).unwrap();
        let last = traj.final_state();
        assert!(last[2].abs() < 1e-12);
        // the zero-delay system has S + I -> 1 with S -> 1/R0
        assert!((last[0] - 1.0 / 15.0).abs() < 1e-3);
    }
}
