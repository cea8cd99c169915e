//! Model parameters, the right-hand side of the delay system and its
//! equilibria.
//!
//! The state is the pair of population fractions `(S, I)`; the recovered
//! fraction is `R = 1 - S - I`. Re-entry into `S` at time `t` comes from
//! individuals who reached maximal immunity at `t - tau` and were neither
//! boosted nor died in between, which gives one discrete delay and one
//! distributed delay (the exposure integral of `I` over `[t - tau, t]`).

use serde::{Deserialize, Serialize};

use crate::dynamics::DenseHistory;
use crate::error::{Error, Result};

/// Tolerance used when validating that a state lies in the simplex.
pub const SIMPLEX_TOL: f64 = 1e-9;

/// Epidemiological constants. Rates are per year, `tau` in years.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    /// Transmission rate.
    pub beta: f64,
    /// Recovery rate.
    pub gamma: f64,
    /// Per-capita mortality (equal to the birth rate).
    pub d: f64,
    /// Boosting force.
    pub nu: f64,
    /// Maximal duration of immunity without boosting.
    pub tau: f64,
}

impl ModelParams {
    pub fn new(beta: f64, gamma: f64, d: f64, nu: f64, tau: f64) -> Result<Self> {
        let p = Self {
            beta,
            gamma,
            d,
            nu,
            tau,
        };
        p.validate()?;
        Ok(p)
    }

    /// Pertussis-like parameter set: R0 = 15, 21-day infectious period,
    /// 50-year life expectancy.
    pub fn pertussis(nu: f64, tau: f64) -> Self {
        Self {
            beta: 255.3,
            gamma: 17.0,
            d: 0.02,
            nu,
            tau,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [self.beta, self.gamma, self.d, self.nu, self.tau]
            .iter()
            .all(|v| v.is_finite());
        if !finite {
            return Err(Error::InvalidParameter(
                "all parameters must be finite".into(),
            ));
        }
        if self.beta <= 0.0 || self.gamma <= 0.0 || self.d <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "beta, gamma, d must be positive (got {}, {}, {})",
                self.beta, self.gamma, self.d
            )));
        }
        if self.nu < 0.0 || self.tau < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "nu and tau must be nonnegative (got {}, {})",
                self.nu, self.tau
            )));
        }
        Ok(())
    }

    pub fn with_tau(mut self, tau: f64) -> Self {
        self.tau = tau;
        self
    }

    pub fn with_nu(mut self, nu: f64) -> Self {
        self.nu = nu;
        self
    }

    pub fn with_d(mut self, d: f64) -> Self {
        self.d = d;
        self
    }

    pub fn r0(&self) -> f64 {
        basic_reproduction_number(self)
    }
}

impl Default for ModelParams {
    fn default() -> Self {
        Self::pertussis(0.0, 7.0)
    }
}

/// JSON form of a parameter set. Every key is optional and falls back to the
/// pertussis defaults; `r0` determines `beta` when `beta` is absent.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamsDocument {
    pub beta: Option<f64>,
    pub r0: Option<f64>,
    pub gamma: Option<f64>,
    pub d: Option<f64>,
    pub nu: Option<f64>,
    pub tau: Option<f64>,
}

impl ParamsDocument {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::InvalidParameter(e.to_string()))
    }

    pub fn resolve(&self) -> Result<ModelParams> {
        let base = ModelParams::default();
        let gamma = self.gamma.unwrap_or(base.gamma);
        let d = self.d.unwrap_or(base.d);
        let beta = match (self.beta, self.r0) {
            (Some(beta), _) => beta,
            (None, Some(r0)) => r0 * (gamma + d),
            (None, None) => base.beta,
        };
        ModelParams::new(
            beta,
            gamma,
            d,
            self.nu.unwrap_or(base.nu),
            self.tau.unwrap_or(base.tau),
        )
    }
}

/// `beta / (gamma + d)`.
pub fn basic_reproduction_number(p: &ModelParams) -> f64 {
    p.beta / (p.gamma + p.d)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EquilibriumKind {
    DiseaseFree,
    Endemic,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Equilibrium {
    pub s: f64,
    pub i: f64,
    pub kind: EquilibriumKind,
}

impl Equilibrium {
    pub fn disease_free() -> Self {
        Self {
            s: 1.0,
            i: 0.0,
            kind: EquilibriumKind::DiseaseFree,
        }
    }
}

/// Left-hand side of the scalar condition defining `I*` (with `S* = 1/R0`).
pub fn endemic_condition(p: &ModelParams, i: f64) -> f64 {
    let s = 1.0 / p.r0();
    let inflow = (p.gamma + p.nu * p.beta * (1.0 - s - i)) * i;
    p.d * (1.0 - s) - p.beta * i * s + inflow * (-p.d * p.tau - p.nu * p.beta * p.tau * i).exp()
}

fn endemic_condition_derivative(p: &ModelParams, i: f64) -> f64 {
    let s = 1.0 / p.r0();
    let nb = p.nu * p.beta;
    let inflow = (p.gamma + nb * (1.0 - s - i)) * i;
    let inflow_di = p.gamma + nb * (1.0 - s) - 2.0 * nb * i;
    let e = (-p.d * p.tau - nb * p.tau * i).exp();
    -p.beta * s + e * (inflow_di - nb * p.tau * inflow)
}

const BRACKET_LO: f64 = 1e-14;
const BISECTION_WIDTH: f64 = 1e-12;
const MAX_BISECTIONS: usize = 200;

/// The endemic equilibrium `(1/R0, I*)`. `I*` is bracketed on
/// `(1e-14, 1 - 1/R0]`, bisected to width `1e-12` and polished by Newton.
pub fn endemic_equilibrium(p: &ModelParams) -> Result<Equilibrium> {
    p.validate()?;
    let r0 = p.r0();
    if r0 <= 1.0 {
        return Err(Error::NoEndemicEquilibrium { r0 });
    }
    let s = 1.0 / r0;
    let f = |i: f64| endemic_condition(p, i);

    let mut lo = BRACKET_LO;
    let mut hi = 1.0 - s;
    let f_lo = f(lo);
    let f_hi = f(hi);
    // at τ = 0 the root sits exactly on the upper end
    let scale = p.d + (p.beta * s + p.gamma + p.nu * p.beta) * hi;
    if f_hi.abs() <= 1e-13 * scale {
        return Ok(Equilibrium {
            s,
            i: hi,
            kind: EquilibriumKind::Endemic,
        });
    }
    if f_lo.signum() == f_hi.signum() {
        return Err(Error::ConvergenceFailure {
            what: "endemic equilibrium bracket",
            iterations: 0,
        });
    }

    let mut iterations = 0;
    while hi - lo > BISECTION_WIDTH {
        iterations += 1;
        if iterations > MAX_BISECTIONS {
            return Err(Error::ConvergenceFailure {
                what: "endemic equilibrium bisection",
                iterations,
            });
        }
        let mid = 0.5 * (lo + hi);
        let fm = f(mid);
        if fm == 0.0 {
            lo = mid;
            hi = mid;
            break;
        }
        if fm.signum() == f_lo.signum() {
            lo = mid;
        } else {
            hi = mid;
        }
    }

    let (a, b) = (lo, hi);
    let mut i = 0.5 * (a + b);
    for _ in 0..8 {
        let df = endemic_condition_derivative(p, i);
        if df == 0.0 || !df.is_finite() {
            break;
        }
        let next = i - f(i) / df;
        // Newton must not leave the bisection bracket (widened by rounding).
        if !(next >= a - BISECTION_WIDTH && next <= b + BISECTION_WIDTH) {
            break;
        }
        let converged = (next - i).abs() <= 4.0 * f64::EPSILON * i.abs();
        i = next;
        if converged {
            break;
        }
    }
    Ok(Equilibrium {
        s,
        i: i.min(1.0 - s),
        kind: EquilibriumKind::Endemic,
    })
}

/// Number of sign changes of the endemic condition on a uniform grid of
/// `points` over the bracket. A value other than 1 flags non-uniqueness.
pub fn endemic_root_count(p: &ModelParams, points: usize) -> usize {
    let s = 1.0 / p.r0();
    let hi = 1.0 - s;
    let mut count = 0;
    let mut prev = endemic_condition(p, BRACKET_LO).signum();
    for k in 1..=points {
        let i = BRACKET_LO + (hi - BRACKET_LO) * k as f64 / points as f64;
        let v = endemic_condition(p, i);
        if v == 0.0 {
            continue;
        }
        if v.signum() != prev {
            count += 1;
            prev = v.signum();
        }
    }
    // A root exactly at the upper endpoint (tau = 0) is not a sign change.
    if count == 0 && endemic_condition(p, hi) == 0.0 {
        count = 1;
    }
    count
}

/// Closed form of `I*` without boosting.
pub fn endemic_infected_without_boosting(p: &ModelParams) -> f64 {
    let (b, g, d) = (p.beta, p.gamma, p.d);
    d * (b - g - d) / (b * (g + d - g * (-d * p.tau).exp()))
}

/// Endemic equilibrium of the limiting SIR model (lifelong immunity).
pub fn sir_limit_equilibrium(p: &ModelParams) -> Result<Equilibrium> {
    p.validate()?;
    let r0 = p.r0();
    if r0 <= 1.0 {
        return Err(Error::NoEndemicEquilibrium { r0 });
    }
    Ok(Equilibrium {
        s: 1.0 / r0,
        i: p.d / p.beta * (r0 - 1.0),
        kind: EquilibriumKind::Endemic,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct State {
    pub s: f64,
    pub i: f64,
}

impl State {
    pub fn new(s: f64, i: f64) -> Self {
        Self { s, i }
    }

    pub fn in_simplex(&self, tol: f64) -> bool {
        self.s >= -tol && self.i >= -tol && self.s + self.i <= 1.0 + tol
    }
}

impl From<Equilibrium> for State {
    fn from(e: Equilibrium) -> Self {
        Self { s: e.s, i: e.i }
    }
}

/// Time derivatives `(dS/dt, dI/dt)` without domain checks.
#[inline]
pub(crate) fn rhs_unchecked(now: State, lag: State, exposure: f64, p: &ModelParams) -> (f64, f64) {
    let nb = p.nu * p.beta;
    let reentry =
        lag.i * (p.gamma + nb * (1.0 - lag.s - lag.i)) * (-p.d * p.tau - nb * exposure).exp();
    let infection = p.beta * now.i * now.s;
    (
        p.d * (1.0 - now.s) - infection + reentry,
        infection - (p.gamma + p.d) * now.i,
    )
}

/// Right-hand side of the delay system given the current state, the state
/// `tau` years ago and the exposure integral of `I` over the last `tau` years.
pub fn rhs_delay_system(
    now: State,
    lag: State,
    exposure: f64,
    p: &ModelParams,
) -> Result<(f64, f64)> {
    for st in [now, lag] {
        if !st.in_simplex(SIMPLEX_TOL) {
            return Err(Error::DomainError { s: st.s, i: st.i });
        }
    }
    if exposure < -SIMPLEX_TOL || exposure > p.tau + SIMPLEX_TOL {
        return Err(Error::InvalidParameter(format!(
            "exposure integral {exposure} outside [0, tau]"
        )));
    }
    Ok(rhs_unchecked(now, lag, exposure, p))
}

/// Initial data on `[-tau, 0]`.
#[derive(Debug, Clone)]
pub enum History {
    Constant(State),
    /// Piecewise-linear samples at increasing times covering `[-tau, 0]`.
    Sampled {
        times: Vec<f64>,
        states: Vec<State>,
    },
    /// Dense output of an earlier integration, shifted to end at 0.
    Dense(DenseHistory),
}

impl History {
    pub fn constant(s: f64, i: f64) -> Self {
        History::Constant(State::new(s, i))
    }

    pub fn sampled(times: Vec<f64>, states: Vec<State>) -> Result<Self> {
        if times.len() != states.len() || times.len() < 2 {
            return Err(Error::InvalidParameter(
                "sampled history needs at least two (time, state) pairs".into(),
            ));
        }
        if times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidParameter(
                "history times must increase".into(),
            ));
        }
        if let Some(st) = states.iter().find(|st| !st.in_simplex(SIMPLEX_TOL)) {
            return Err(Error::DomainError { s: st.s, i: st.i });
        }
        Ok(History::Sampled { times, states })
    }

    /// State at `theta <= 0`.
    pub fn eval(&self, theta: f64) -> State {
        match self {
            History::Constant(st) => *st,
            History::Sampled { times, states } => {
                let t = theta.clamp(times[0], times[times.len() - 1]);
                let k = times.partition_point(|&x| x <= t).clamp(1, times.len() - 1);
                let (t0, t1) = (times[k - 1], times[k]);
                let w = (t - t0) / (t1 - t0);
                State::new(
                    states[k - 1].s + w * (states[k].s - states[k - 1].s),
                    states[k - 1].i + w * (states[k].i - states[k - 1].i),
                )
            }
            History::Dense(h) => h.eval(theta),
        }
    }

    /// Earliest time at which the history is defined.
    pub fn start(&self) -> f64 {
        match self {
            History::Constant(_) => f64::NEG_INFINITY,
            History::Sampled { times, .. } => times[0],
            History::Dense(h) => h.start(),
        }
    }

    /// `Y0`, the integral of `I` over `[-tau, 0]`.
    pub fn exposure(&self, tau: f64) -> f64 {
        match self {
            History::Constant(st) => tau * st.i,
            History::Sampled { times, .. } => {
                let lo = -tau;
                let mut total = 0.0;
                for k in 1..times.len() {
                    let (a, b) = (times[k - 1].max(lo), times[k].min(0.0));
                    if b <= a {
                        continue;
                    }
                    total += 0.5 * (b - a) * (self.eval(a).i + self.eval(b).i);
                }
                total
            }
            History::Dense(h) => h.integral_i(-tau, 0.0),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn r0_of_pertussis_set() {
        assert_relative_eq!(ModelParams::pertussis(0.0, 1.0).r0(), 15.0, epsilon = 1e-12);
        let p = ModelParams::new(17.02, 17.0, 0.02, 1.0, 1.0).unwrap();
        assert_relative_eq!(p.r0(), 1.0, epsilon = 1e-15);
        let p = ModelParams::pertussis(0.0, 1.0).with_d(0.013);
        assert_relative_eq!(p.r0(), 255.3 / 17.013, epsilon = 1e-15);
        assert!((p.r0() - 15.006).abs() < 1e-3);
    }

    #[test]
    fn rejects_invalid_parameters() {
        assert!(ModelParams::new(0.0, 17.0, 0.02, 0.0, 1.0).is_err());
        assert!(ModelParams::new(255.3, 17.0, -0.02, 0.0, 1.0).is_err());
        assert!(ModelParams::new(255.3, 17.0, 0.02, -1.0, 1.0).is_err());
        assert!(ModelParams::new(255.3, 17.0, 0.02, 1.0, f64::NAN).is_err());
    }

    #[test]
    fn no_endemic_state_below_threshold() {
        let p = ModelParams::new(10.0, 17.0, 0.02, 1.0, 3.0).unwrap();
        assert!(matches!(
            endemic_equilibrium(&p),
            Err(Error::NoEndemicEquilibrium { .. })
        ));
        assert!(matches!(
            sir_limit_equilibrium(&p),
            Err(Error::NoEndemicEquilibrium { .. })
        ));
    }

    #[test]
    fn closed_form_without_boosting() {
        let p = ModelParams::pertussis(0.0, 7.0);
        let eq = endemic_equilibrium(&p).unwrap();
        assert_eq!(eq.s, 1.0 / p.r0());
        assert_relative_eq!(
            eq.i,
            endemic_infected_without_boosting(&p),
            max_relative = 1e-12
        );
    }

    #[test]
    fn zero_delay_puts_everyone_in_s_or_i() {
        let p = ModelParams::pertussis(2.0, 0.0);
        let eq = endemic_equilibrium(&p).unwrap();
        assert_relative_eq!(eq.i, 1.0 - 1.0 / 15.0, epsilon = 1e-12);
    }

    #[test]
    fn sir_limit_values() {
        let p = ModelParams::pertussis(1.0, 7.0);
        let eq = sir_limit_equilibrium(&p).unwrap();
        assert_relative_eq!(eq.s, 1.0 / 15.0, epsilon = 1e-12);
        assert_relative_eq!(eq.i, 0.02 / 255.3 * 14.0, max_relative = 1e-9);
        // close to threshold the infected fraction vanishes
        let p = ModelParams::new(17.020001, 17.0, 0.02, 1.0, 1.0).unwrap();
        assert!(sir_limit_equilibrium(&p).unwrap().i < 1e-8);
    }

    #[test]
    fn disease_free_state_is_stationary() {
        let p = ModelParams::pertussis(3.2, 5.0);
        let one = State::new(1.0, 0.0);
        let (ds, di) = rhs_delay_system(one, one, 0.0, &p).unwrap();
        assert_eq!((ds, di), (0.0, 0.0));
    }

    #[test]
    fn no_boosting_ignores_exposure() {
        let p = ModelParams::pertussis(0.0, 5.0);
        let now = State::new(0.1, 0.002);
        let lag = State::new(0.07, 0.004);
        let a = rhs_delay_system(now, lag, 0.0, &p).unwrap();
        let b = rhs_delay_system(now, lag, 3.0, &p).unwrap();
        assert_eq!(a, b);
        let expected = 0.02 * 0.9 - 255.3 * 0.002 * 0.1 + 17.0 * (-0.02f64 * 5.0).exp() * 0.004;
        assert_relative_eq!(a.0, expected, epsilon = 1e-15);
    }

    #[test]
    fn outside_simplex_is_rejected() {
        let p = ModelParams::pertussis(1.0, 1.0);
        let bad = State::new(0.8, 0.3);
        let ok = State::new(0.5, 0.1);
        assert!(matches!(
            rhs_delay_system(bad, ok, 0.1, &p),
            Err(Error::DomainError { .. })
        ));
        assert!(rhs_delay_system(State::new(1.0 + 5e-10, 0.0), ok, 0.1, &p).is_ok());
    }

    #[test]
    fn json_with_r0_instead_of_beta() {
        let doc =
            ParamsDocument::from_json(r#"{"r0": 15, "gamma": 17, "d": 0.02, "nu": 2, "tau": 7}"#)
                .unwrap();
        let p = doc.resolve().unwrap();
        assert_relative_eq!(p.beta, 255.3, epsilon = 1e-12);
        assert_eq!(p.nu, 2.0);
        assert!(ParamsDocument::from_json(r#"{"bogus": 1}"#).is_err());
    }

    #[test]
    fn history_exposure() {
        let h = History::constant(0.1, 0.002);
        assert_relative_eq!(h.exposure(4.0), 0.008, epsilon = 1e-15);
        let h = History::sampled(
            vec![-2.0, -1.0, 0.0],
            vec![
                State::new(0.1, 0.0),
                State::new(0.1, 0.002),
                State::new(0.1, 0.0),
            ],
        )
        .unwrap();
        assert_relative_eq!(h.exposure(2.0), 0.002, epsilon = 1e-15);
        assert_relative_eq!(h.eval(-0.5).i, 0.001, epsilon = 1e-15);
    }
}
