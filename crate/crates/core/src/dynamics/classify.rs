//! Long-term orbit classification from dense output.

use std::fmt;

use serde::{Deserialize, Serialize};

use super::dense::DenseSegment;
use super::integrate::Trajectory;
use crate::error::{Error, Result};

/// Absolute `I` amplitude below which an orbit counts as an equilibrium.
pub const AMPLITUDE_THRESHOLD: f64 = 1e-7;
/// Peak-return mismatch below which an orbit counts as a cycle.
pub const CYCLE_THRESHOLD: f64 = 1e-3;
/// Peak-return mismatch above which a bounded, trendless orbit counts as a torus.
pub const TORUS_THRESHOLD: f64 = 1e-2;
/// Longest peak lag tried when looking for a repeat.
pub const MAX_PEAK_LAG: usize = 8;
pub const MIN_PEAKS: usize = 10;

pub const DEFAULT_TRANSIENT: f64 = 500.0;
pub const DEFAULT_WINDOW: f64 = 100.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OrbitKind {
    Equilibrium,
    Cycle,
    Torus,
    Undetermined,
}

impl fmt::Display for OrbitKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            OrbitKind::Equilibrium => "equilibrium",
            OrbitKind::Cycle => "cycle",
            OrbitKind::Torus => "torus",
            OrbitKind::Undetermined => "undetermined",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Extremum {
    pub t: f64,
    pub i: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrbitSummary {
    pub kind: OrbitKind,
    pub i_max: f64,
    pub i_min: f64,
    pub period: Option<f64>,
    /// Mismatch between peaks `k` apart for the shortest repeating lag
    /// `k <= 8` (or the smallest over all lags): height differences relative
    /// to the amplitude, spacing differences relative to the mean spacing.
    pub peak_dispersion: f64,
    /// Lag realising `peak_dispersion` (peaks per period for a cycle).
    pub peak_lag: usize,
    pub peaks: Vec<Extremum>,
    pub window: (f64, f64),
}

impl OrbitSummary {
    pub fn amplitude(&self) -> f64 {
        self.i_max - self.i_min
    }

    /// Summary for a row whose integration failed.
    pub fn undetermined(window: (f64, f64)) -> Self {
        Self {
            kind: OrbitKind::Undetermined,
            i_max: f64::NAN,
            i_min: f64::NAN,
            period: None,
            peak_dispersion: f64::NAN,
            peak_lag: 0,
            peaks: Vec::new(),
            window,
        }
    }
}

fn bisect_derivative(seg: &DenseSegment, mut a: f64, mut b: f64) -> f64 {
    let mut fa = seg.derivative_component(a, 1);
    for _ in 0..100 {
        let m = 0.5 * (a + b);
        if m <= a || m >= b {
            break;
        }
        let fm = seg.derivative_component(m, 1);
        if (fm > 0.0) == (fa > 0.0) {
            a = m;
            fa = fm;
        } else {
            b = m;
        }
    }
    0.5 * (a + b)
}

/// Local maxima and minima of `I` on `[a, b]`.
pub fn extrema(segments: &[DenseSegment], a: f64, b: f64) -> (Vec<Extremum>, Vec<Extremum>) {
    const CELLS: usize = 4;
    let mut maxima = Vec::new();
    let mut minima = Vec::new();
    for seg in segments.iter().filter(|s| s.t1() > a && s.t0 < b) {
        let lo = seg.t0.max(a);
        let hi = seg.t1().min(b);
        let dt = (hi - lo) / CELLS as f64;
        let mut x0 = lo;
        let mut d0 = seg.derivative_component(x0, 1);
        for c in 1..=CELLS {
            let x1 = if c == CELLS { hi } else { lo + c as f64 * dt };
            let d1 = seg.derivative_component(x1, 1);
            if d0 > 0.0 && d1 <= 0.0 {
                let t = bisect_derivative(seg, x0, x1);
                maxima.push(Extremum {
                    t,
                    i: seg.eval_component(t, 1),
                });
            } else if d0 < 0.0 && d1 >= 0.0 {
                let t = bisect_derivative(seg, x0, x1);
                minima.push(Extremum {
                    t,
                    i: seg.eval_component(t, 1),
                });
            }
            x0 = x1;
            d0 = d1;
        }
    }
    (maxima, minima)
}

/// Worst relative mismatch of peak heights and of peak spacings between
/// peaks `lag` apart.
fn return_mismatch(peaks: &[Extremum], lag: usize, scale: f64) -> f64 {
    let heights = peaks
        .windows(lag + 1)
        .map(|w| (w[lag].i - w[0].i).abs())
        .fold(0.0, f64::max)
        / scale;
    let spans: Vec<f64> = peaks.windows(lag + 1).map(|w| w[lag].t - w[0].t).collect();
    let mean = spans.iter().sum::<f64>() / spans.len() as f64;
    let timing = spans.iter().map(|s| (s - mean).abs()).fold(0.0, f64::max) / mean;
    heights.max(timing)
}

/// Whether the peak heights drift: the two halves of the sequence must have
/// comparable means and ranges.
fn has_trend(heights: &[f64]) -> bool {
    let half = heights.len() / 2;
    let stats = |h: &[f64]| {
        let lo = h.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = h.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        (h.iter().sum::<f64>() / h.len() as f64, hi - lo)
    };
    let (m1, r1) = stats(&heights[..half]);
    let (m2, r2) = stats(&heights[half..]);
    let range = r1.max(r2);
    (m1 - m2).abs() > 0.25 * range || r1.min(r2) < 0.5 * range
}

/// Classifies the part of `traj` on `[transient, transient + window]`.
pub fn classify_orbit(traj: &Trajectory, transient: f64, window: f64) -> Result<OrbitSummary> {
    let (a, b) = (transient, transient + window);
    if !(window > 0.0) || traj.segments.is_empty() {
        return Err(Error::WindowTooShort {
            window,
            reason: "empty window".into(),
        });
    }
    let slack = 1e-9 * b.abs().max(1.0);
    if traj.t_start() > a + slack || traj.t_end() < b - slack {
        return Err(Error::WindowTooShort {
            window,
            reason: format!(
                "trajectory covers [{}, {}] but the window is [{a}, {b}]",
                traj.t_start(),
                traj.t_end()
            ),
        });
    }
    let b = b.min(traj.t_end());
    let (peaks, troughs) = extrema(&traj.segments, a, b);
    let ends = [traj.state_at(a)[1], traj.state_at(b)[1]];
    let values = || peaks.iter().chain(&troughs).map(|e| e.i).chain(ends);
    let i_max = values().fold(f64::NEG_INFINITY, f64::max);
    let i_min = values().fold(f64::INFINITY, f64::min);
    let mut summary = OrbitSummary {
        kind: OrbitKind::Undetermined,
        i_max,
        i_min,
        period: None,
        peak_dispersion: 0.0,
        peak_lag: 0,
        peaks,
        window: (a, b),
    };
    if i_max - i_min < AMPLITUDE_THRESHOLD {
        summary.kind = OrbitKind::Equilibrium;
        return Ok(summary);
    }
    let n = summary.peaks.len();
    if n < MIN_PEAKS {
        return Err(Error::WindowTooShort {
            window,
            reason: format!("{n} peaks found, need {MIN_PEAKS}"),
        });
    }
    let heights: Vec<f64> = summary.peaks.iter().map(|p| p.i).collect();
    let scale = i_max - i_min;
    let max_lag = MAX_PEAK_LAG.min(n / 2);
    let mismatches: Vec<(usize, f64)> = (1..=max_lag)
        .map(|k| (k, return_mismatch(&summary.peaks, k, scale)))
        .collect();
    // shortest repeating lag, else the best one
    let (lag, mismatch) = mismatches
        .iter()
        .copied()
        .find(|m| m.1 < CYCLE_THRESHOLD)
        .unwrap_or_else(|| {
            mismatches
                .iter()
                .copied()
                .fold((1, f64::INFINITY), |b, c| if c.1 < b.1 { c } else { b })
        });
    summary.peak_dispersion = mismatch;
    summary.peak_lag = lag;
    if mismatch < CYCLE_THRESHOLD {
        // first-to-last peak of the same phase, divided by the number of laps
        let laps = (n - 1) / lag;
        let period = (summary.peaks[laps * lag].t - summary.peaks[0].t) / laps as f64;
        if period > 0.0 {
            summary.kind = OrbitKind::Cycle;
            summary.period = Some(period);
        }
    } else if mismatch > TORUS_THRESHOLD && !has_trend(&heights) {
        summary.kind = OrbitKind::Torus;
    }
    Ok(summary)
}
