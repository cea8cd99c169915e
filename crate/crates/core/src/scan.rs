//! Brute-force bifurcation diagrams in `τ` with warm starts.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::dynamics::{classify_orbit, integrate, IntegratorOptions, OrbitKind, OrbitSummary};
use crate::error::{Error, Result};
use crate::model::{endemic_equilibrium, History, ModelParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepDirection {
    Up,
    Down,
}

impl fmt::Display for SweepDirection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SweepDirection::Up => "up",
            SweepDirection::Down => "down",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagramRow {
    pub tau: f64,
    pub sweep: SweepDirection,
    pub summary: OrbitSummary,
    /// Set when integration or classification failed for this row.
    pub error: Option<String>,
}

#[derive(Debug, Clone)]
pub struct SweepConfig {
    pub transient: f64,
    pub window: f64,
    pub integrator: IntegratorOptions,
    /// History of the first row; defaults to the endemic equilibrium with
    /// `I` raised by 1%.
    pub initial: Option<History>,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            transient: 300.0,
            window: 60.0,
            integrator: IntegratorOptions::default(),
            initial: None,
        }
    }
}

pub fn tau_grid(tau_lo: f64, tau_hi: f64, steps: usize) -> Vec<f64> {
    let n = steps.max(2) - 1;
    (0..=n)
        .map(|k| {
            if k == n {
                tau_hi
            } else {
                tau_lo + (tau_hi - tau_lo) * k as f64 / n as f64
            }
        })
        .collect()
}

fn perturbed_equilibrium(p: &ModelParams) -> History {
    match endemic_equilibrium(p) {
        Ok(eq) => History::constant(eq.s, eq.i * 1.01),
        Err(_) => History::constant(0.9, 1e-3),
    }
}

/// One warm-started sweep over `steps` evenly spaced delays. Each row starts
/// from the last `τ` years of the previous successful row.
pub fn sweep_diagram(
    p_base: &ModelParams,
    tau_lo: f64,
    tau_hi: f64,
    steps: usize,
    direction: SweepDirection,
    cfg: &SweepConfig,
) -> Result<Vec<DiagramRow>> {
    if steps < 2 {
        return Err(Error::InvalidParameter(
            "a sweep needs at least 2 steps".into(),
        ));
    }
    if !(tau_lo >= 0.0 && tau_hi > tau_lo) {
        return Err(Error::InvalidParameter(format!(
            "bad delay range [{tau_lo}, {tau_hi}]"
        )));
    }
    if !(cfg.window > 0.0 && cfg.transient >= 0.0) {
        return Err(Error::InvalidParameter(
            "transient and window must be positive".into(),
        ));
    }
    p_base.with_tau(tau_lo).validate()?;
    let mut taus = tau_grid(tau_lo, tau_hi, steps);
    if direction == SweepDirection::Down {
        taus.reverse();
    }
    let t_end = cfg.transient + cfg.window;
    let tau_max = tau_hi;
    // keep enough of each run to seed the next one
    let opts = cfg
        .integrator
        .recording_from((t_end - tau_max.max(cfg.window)).max(0.0));
    let mut history = cfg
        .initial
        .clone()
        .unwrap_or_else(|| perturbed_equilibrium(&p_base.with_tau(taus[0])));
    let mut rows = Vec::with_capacity(taus.len());
    for &tau in &taus {
        let p = p_base.with_tau(tau);
        let outcome = integrate(&p, &history, t_end, &opts).and_then(|traj| {
            let summary = classify_orbit(&traj, cfg.transient, cfg.window)?;
            Ok((summary, traj))
        });
        match outcome {
            Ok((summary, traj)) => {
                if let Some(h) = traj.tail_history(tau_max) {
                    history = h;
                }
                rows.push(DiagramRow {
                    tau,
                    sweep: direction,
                    summary,
                    error: None,
                });
            }
            Err(e) => rows.push(DiagramRow {
                tau,
                sweep: direction,
                summary: OrbitSummary::undetermined((cfg.transient, t_end)),
                error: Some(e.to_string()),
            }),
        }
    }
    Ok(rows)
}

/// Up and down sweeps over the same grid, run concurrently.
pub fn sweep_both(
    p_base: &ModelParams,
    tau_lo: f64,
    tau_hi: f64,
    steps: usize,
    cfg: &SweepConfig,
) -> Result<(Vec<DiagramRow>, Vec<DiagramRow>)> {
    let (up, down) = rayon::join(
        || sweep_diagram(p_base, tau_lo, tau_hi, steps, SweepDirection::Up, cfg),
        || sweep_diagram(p_base, tau_lo, tau_hi, steps, SweepDirection::Down, cfg),
    );
    let mut down = down?;
    down.reverse();
    Ok((up?, down))
}

/// `(τ, period)` of the cycle rows.
pub fn period_profile(rows: &[DiagramRow]) -> Vec<(f64, f64)> {
    rows.iter()
        .filter(|r| r.summary.kind == OrbitKind::Cycle)
        .filter_map(|r| r.summary.period.map(|p| (r.tau, p)))
        .collect()
}

/// Delays at which one sweep settles on the equilibrium and the other does
/// not. Rows are matched by `τ`.
pub fn disagreements(a: &[DiagramRow], b: &[DiagramRow]) -> Vec<f64> {
    let mut out: Vec<f64> = a
        .iter()
        .filter_map(|ra| {
            let rb = b.iter().find(|rb| (rb.tau - ra.tau).abs() < 1e-12)?;
            let ea = ra.summary.kind == OrbitKind::Equilibrium;
            let eb = rb.summary.kind == OrbitKind::Equilibrium;
            (ea != eb).then_some(ra.tau)
        })
        .collect();
    out.sort_by(f64::total_cmp);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_hits_both_ends() {
        let g = tau_grid(3.0, 4.8, 19);
        assert_eq!(g.len(), 19);
        assert_eq!(g[0], 3.0);
        assert_eq!(g[18], 4.8);
        assert!((g[1] - 3.1).abs() < 1e-12);
    }

    #[test]
    fn too_few_steps_is_rejected() {
        let p = ModelParams::pertussis(4.8, 3.0);
        assert!(
            sweep_diagram(&p, 3.0, 4.0, 1, SweepDirection::Up, &SweepConfig::default()).is_err()
        );
        assert!(
            sweep_diagram(&p, 4.0, 3.0, 5, SweepDirection::Up, &SweepConfig::default()).is_err()
        );
    }

    #[test]
    fn period_profile_skips_non_cycles() {
        let mk = |tau: f64, kind: OrbitKind, period: Option<f64>| {
            let mut s = OrbitSummary::undetermined((0.0, 1.0));
            s.kind = kind;
            s.period = period;
            DiagramRow {
                tau,
                sweep: SweepDirection::Up,
                summary: s,
                error: None,
            }
        };
        let rows = vec![
            mk(1.0, OrbitKind::Equilibrium, None),
            mk(2.0, OrbitKind::Cycle, Some(2.5)),
            mk(3.0, OrbitKind::Torus, None),
        ];
        assert_eq!(period_profile(&rows), vec![(2.0, 2.5)]);
        let mut other = rows.clone();
        other[1].summary.kind = OrbitKind::Equilibrium;
        assert_eq!(disagreements(&rows, &other), vec![2.0]);
    }

    #[test]
    fn short_stable_sweep_stays_at_equilibrium() {
        let p = ModelParams::pertussis(4.8, 2.0);
        let cfg = SweepConfig {
            transient: 200.0,
            window: 20.0,
            ..Default::default()
        };
        let rows = sweep_diagram(&p, 6.0, 6.5, 2, SweepDirection::Up, &cfg).unwrap();
        assert!(
            rows.iter()
                .all(|r| r.summary.kind == OrbitKind::Equilibrium),
            "{rows:?}"
        );
    }
}
