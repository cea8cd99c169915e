//! Attractor discovery over sets of initial histories.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::classify::{classify_orbit, OrbitKind, OrbitSummary, DEFAULT_TRANSIENT, DEFAULT_WINDOW};
use super::integrate::{integrate, IntegratorOptions, Trajectory};
use crate::error::{Error, Result};
use crate::model::{endemic_equilibrium, History, ModelParams, State};

/// Relative tolerance for treating two attractors as the same.
pub const DEDUP_TOL: f64 = 0.02;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub transient: f64,
    pub window: f64,
    pub integrator: IntegratorOptions,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            transient: DEFAULT_TRANSIENT,
            window: DEFAULT_WINDOW,
            integrator: IntegratorOptions::default(),
        }
    }
}

/// Integrates from `history` and classifies the window after the transient.
pub fn run_and_classify(
    p: &ModelParams,
    history: &History,
    cfg: &RunConfig,
) -> Result<(OrbitSummary, Trajectory)> {
    let opts = cfg.integrator.recording_from(cfg.transient);
    let traj = integrate(p, history, cfg.transient + cfg.window, &opts)?;
    let summary = classify_orbit(&traj, cfg.transient, cfg.window)?;
    Ok((summary, traj))
}

/// Constant histories on a lattice of the simplex (S0 uniform in (0, 1),
/// I0 log-spaced in [1e-6, 1e-1]) plus small perturbations of the endemic
/// equilibrium.
pub fn default_history_grid(p: &ModelParams, n: usize) -> Vec<History> {
    let n = n.max(2);
    let mut out = Vec::new();
    for a in 0..n {
        let s0 = (a as f64 + 0.5) / n as f64;
        for b in 0..n {
            let i0 = 10f64.powf(-6.0 + 5.0 * b as f64 / (n - 1) as f64);
            if s0 + i0 <= 1.0 {
                out.push(History::constant(s0, i0));
            }
        }
    }
    if let Ok(eq) = endemic_equilibrium(p) {
        for f in [1.001, 0.999, 1.05, 0.95] {
            out.push(History::constant(eq.s, eq.i * f));
        }
    }
    out
}

/// Seeded random constant histories, `I0` log-uniform in `[1e-6, 1e-1]`.
pub fn random_histories(count: usize, seed: u64) -> Vec<History> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let i0 = 10f64.powf(rng.gen_range(-6.0..-1.0));
            let s0 = rng.gen_range(0.0..(1.0 - i0));
            History::Constant(State::new(s0, i0))
        })
        .collect()
}

pub fn same_attractor(a: &OrbitSummary, b: &OrbitSummary) -> bool {
    let close = |x: f64, y: f64| (x - y).abs() <= DEDUP_TOL * x.abs().max(y.abs());
    a.kind == b.kind
        && close(a.i_max, b.i_max)
        && match (a.period, b.period) {
            (Some(x), Some(y)) => close(x, y),
            (None, None) => true,
            _ => false,
        }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Attractor {
    pub summary: OrbitSummary,
    /// Indices into the history grid that reached this attractor.
    pub basin_samples: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct AttractorScan {
    pub attractors: Vec<Attractor>,
    /// Per-history failures `(index, error)`.
    pub failures: Vec<(usize, Error)>,
}

impl AttractorScan {
    pub fn kinds(&self) -> Vec<OrbitKind> {
        self.attractors.iter().map(|a| a.summary.kind).collect()
    }
}

/// Integrates every history, classifies and merges identical attractors.
/// Order follows the first history reaching each attractor.
pub fn bistability_scan(
    p: &ModelParams,
    histories: &[History],
    cfg: &RunConfig,
) -> Result<AttractorScan> {
    if histories.len() < 2 {
        return Err(Error::InvalidParameter(
            "attractor scan needs at least two histories".into(),
        ));
    }
    p.validate()?;
    let results: Vec<Result<OrbitSummary>> = histories
        .par_iter()
        .map(|h| run_and_classify(p, h, cfg).map(|(s, _)| s))
        .collect();
    let mut scan = AttractorScan {
        attractors: Vec::new(),
        failures: Vec::new(),
    };
    for (k, r) in results.into_iter().enumerate() {
        match r {
            Ok(s) => match scan
                .attractors
                .iter_mut()
                .find(|a| same_attractor(&a.summary, &s))
            {
                Some(a) => a.basin_samples.push(k),
                None => scan.attractors.push(Attractor {
                    summary: s,
                    basin_samples: vec![k],
                }),
            },
            Err(e) => scan.failures.push((k, e)),
        }
    }
    Ok(scan)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_stays_in_simplex() {
        let p = ModelParams::pertussis(3.2, 5.6);
        let g = default_history_grid(&p, 5);
        assert!(g.len() > 20);
        assert!(g.iter().all(|h| h.eval(0.0).in_simplex(0.0)));
    }

    #[test]
    fn random_histories_are_reproducible() {
        let a = random_histories(5, 7);
        let b = random_histories(5, 7);
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.eval(0.0), y.eval(0.0));
        }
    }

    #[test]
    fn dedup_uses_kind_period_and_peak() {
        let mut a = OrbitSummary::undetermined((0.0, 1.0));
        a.kind = OrbitKind::Cycle;
        a.i_max = 1e-3;
        a.i_min = 1e-5;
        a.period = Some(2.0);
        let mut b = a.clone();
        b.period = Some(2.03);
        assert!(same_attractor(&a, &b));
        b.period = Some(2.1);
        assert!(!same_attractor(&a, &b));
    }

    #[test]
    fn single_history_is_rejected() {
        let p = ModelParams::pertussis(1.0, 1.0);
        assert!(
            bistability_scan(&p, &[History::constant(0.1, 0.01)], &RunConfig::default()).is_err()
        );
    }
}
