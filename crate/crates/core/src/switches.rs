//! Stability switches of the endemic equilibrium as the delay grows.
//!
//! On a feasibility interval of a branch `ω±(τ)` the angle `θ(τ)` solves
//! `e^{-iωτ} = -P(iω)/Q(iω)`, and a pair of roots sits on the imaginary axis
//! exactly where `S_n(τ) = τ - (θ(τ) + 2πn)/ω(τ)` vanishes for some `n`.
//! The crossing direction is `sign(F'_ω) · sign(S_n'(τ))`.

use std::f64::consts::TAU as TWO_PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::characteristic::{
    feasibility_intervals, omega_roots, Boundary, Branch, CharEquation, FeasibleInterval,
    DEFAULT_TAU_MAX_SEARCH,
};
use crate::error::{Error, Result};
use crate::model::{endemic_equilibrium, ModelParams};

const SCAN_STEP: f64 = 1e-3;
const BISECTION_TOL: f64 = 1e-8;
const DIFF_STEP: f64 = 1e-5;
const GUARD_BAND: f64 = 1e-6;
const TANGENCY_TOL: f64 = 1e-10;

fn theta_from(ce: &CharEquation, omega: f64) -> Result<f64> {
    let l = Complex64::new(0.0, omega);
    let q = ce.q(l);
    if q.norm() < 1e-300 {
        return Err(Error::DegenerateQ { omega });
    }
    let r = ce.p(l) / q;
    Ok(r.im.atan2(-r.re).rem_euclid(TWO_PI))
}

/// The angle `θ ∈ [0, 2π)` with `sin θ = Im(P/Q)` and `cos θ = -Re(P/Q)`
/// at `λ = iω`.
pub fn angle_theta(omega: f64, p: &ModelParams) -> Result<f64> {
    theta_from(&CharEquation::new(p)?, omega)
}

/// `(ω, θ)` of one branch at `tau`, or `None` outside its feasibility set.
pub fn branch_point(p: &ModelParams, branch: Branch, tau: f64) -> Result<Option<(f64, f64)>> {
    let pt = p.with_tau(tau);
    let ce = CharEquation::new(&pt)?;
    let roots = omega_roots(&ce.coeffs);
    match branch.pick(&roots) {
        Some(w) if w > 0.0 => Ok(Some((w, theta_from(&ce, w)?))),
        _ => Ok(None),
    }
}

/// `S_n(τ) = τ - (θ(τ) + 2πn)/ω(τ)` on the given branch.
pub fn switch_function(n: u32, branch: Branch, tau: f64, p: &ModelParams) -> Result<f64> {
    match branch_point(p, branch, tau)? {
        Some((w, th)) => Ok(tau - (th + TWO_PI * n as f64) / w),
        None => Err(Error::OutsideFeasibleInterval {
            tau,
            branch: branch.name(),
        }),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Crossing {
    /// Roots move into the right half plane (`δ = +1`).
    Destabilizing,
    /// Roots move into the left half plane (`δ = -1`).
    Stabilizing,
}

impl Crossing {
    pub fn delta(self) -> i32 {
        match self {
            Crossing::Destabilizing => 1,
            Crossing::Stabilizing => -1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SwitchPoint {
    pub tau_star: f64,
    pub omega: f64,
    pub branch: Branch,
    pub n: u32,
    pub crossing: Crossing,
    /// `S_n'(τ*)`.
    pub slope: f64,
}

impl SwitchPoint {
    pub fn delta(&self) -> i32 {
        self.crossing.delta()
    }
}

/// A zero of `S_n` whose derivative vanishes; it is reported but does not
/// enter the pair count.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TangentialZero {
    pub tau: f64,
    pub branch: Branch,
    pub n: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StabilityInterval {
    pub lo: f64,
    /// `f64::INFINITY` for the last interval.
    pub hi: f64,
    pub stable: bool,
    pub unstable_pairs: i32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityProfile {
    pub params: ModelParams,
    pub feasibility: Vec<FeasibleInterval>,
    pub switch_points: Vec<SwitchPoint>,
    pub intervals: Vec<StabilityInterval>,
    pub tangential: Vec<TangentialZero>,
}

impl StabilityProfile {
    fn assemble(
        params: ModelParams,
        feasibility: Vec<FeasibleInterval>,
        mut switch_points: Vec<SwitchPoint>,
        tangential: Vec<TangentialZero>,
    ) -> Self {
        switch_points.sort_by(|a, b| a.tau_star.total_cmp(&b.tau_star));
        let mut intervals = Vec::with_capacity(switch_points.len() + 1);
        let mut pairs = 0;
        let mut lo = 0.0;
        for sp in &switch_points {
            intervals.push(StabilityInterval {
                lo,
                hi: sp.tau_star,
                stable: pairs <= 0,
                unstable_pairs: pairs,
            });
            pairs += sp.delta();
            lo = sp.tau_star;
        }
        intervals.push(StabilityInterval {
            lo,
            hi: f64::INFINITY,
            stable: pairs <= 0,
            unstable_pairs: pairs,
        });
        Self {
            params,
            feasibility,
            switch_points,
            intervals,
            tangential,
        }
    }

    /// Number of root pairs in the right half plane at `tau`.
    pub fn unstable_pairs_at(&self, tau: f64) -> i32 {
        self.intervals
            .iter()
            .find(|iv| tau >= iv.lo && tau < iv.hi)
            .map(|iv| iv.unstable_pairs)
            .unwrap_or(0)
    }

    pub fn is_stable_at(&self, tau: f64) -> bool {
        self.unstable_pairs_at(tau) <= 0
    }

    /// Distance from `tau` to the nearest switch point.
    pub fn distance_to_switch(&self, tau: f64) -> f64 {
        self.switch_points
            .iter()
            .map(|sp| (sp.tau_star - tau).abs())
            .fold(f64::INFINITY, f64::min)
    }

    pub fn unstable_ranges(&self) -> Vec<(f64, f64)> {
        let mut out: Vec<(f64, f64)> = Vec::new();
        for iv in self.intervals.iter().filter(|iv| !iv.stable) {
            match out.last_mut() {
                Some(last) if last.1 == iv.lo => last.1 = iv.hi,
                _ => out.push((iv.lo, iv.hi)),
            }
        }
        out
    }
}

struct GridPoint {
    tau: f64,
    omega: f64,
    theta: f64,
}

/// `(ω, θ)` with `θ` unwrapped to lie within π of `reference`.
fn unwrapped(p: &ModelParams, branch: Branch, tau: f64, reference: f64) -> Result<(f64, f64)> {
    let (w, th) = branch_point(p, branch, tau)?.ok_or(Error::OutsideFeasibleInterval {
        tau,
        branch: branch.name(),
    })?;
    let k = ((reference - th) / TWO_PI).round();
    Ok((w, th + k * TWO_PI))
}

fn s_value(tau: f64, omega: f64, theta: f64, n: i64) -> f64 {
    tau - (theta + TWO_PI * n as f64) / omega
}

enum Found {
    Switch(SwitchPoint),
    Tangential(TangentialZero),
}

fn refine_zero(
    p: &ModelParams,
    branch: Branch,
    a: &GridPoint,
    b: &GridPoint,
    n: i64,
    range: (f64, f64),
) -> Result<Option<Found>> {
    let reference = a.theta;
    let eval = |tau: f64| -> Result<f64> {
        let (w, th) = unwrapped(p, branch, tau, reference)?;
        Ok(s_value(tau, w, th, n))
    };
    let (mut lo, mut hi) = (a.tau, b.tau);
    let mut f_lo = s_value(a.tau, a.omega, a.theta, n);
    while hi - lo > BISECTION_TOL {
        let mid = 0.5 * (lo + hi);
        let fm = eval(mid)?;
        if fm == 0.0 {
            lo = mid;
            hi = mid;
            break;
        }
        if fm.signum() == f_lo.signum() {
            lo = mid;
            f_lo = fm;
        } else {
            hi = mid;
        }
    }
    let tau_star = 0.5 * (lo + hi);
    let (omega, theta) = unwrapped(p, branch, tau_star, reference)?;
    let value = s_value(tau_star, omega, theta, n);
    // A jump of S_n (not a zero) leaves a residual of order 2π/ω.
    if value.abs() > 1e-4 {
        return Ok(None);
    }
    let wraps = (theta / TWO_PI).floor();
    let label = n + wraps as i64;
    if label < 0 {
        return Ok(None);
    }

    let (t_minus, t_plus) = (tau_star - DIFF_STEP, tau_star + DIFF_STEP);
    let slope = if t_minus >= range.0 && t_plus <= range.1 {
        (eval(t_plus)? - eval(t_minus)?) / (2.0 * DIFF_STEP)
    } else if t_plus <= range.1 {
        (eval(t_plus)? - eval(tau_star)?) / DIFF_STEP
    } else {
        (eval(tau_star)? - eval(t_minus)?) / DIFF_STEP
    };
    let n = label as u32;
    if slope.abs() < TANGENCY_TOL {
        return Ok(Some(Found::Tangential(TangentialZero {
            tau: tau_star,
            branch,
            n,
        })));
    }
    let delta = branch.f_prime_sign() * if slope > 0.0 { 1 } else { -1 };
    Ok(Some(Found::Switch(SwitchPoint {
        tau_star,
        omega,
        branch,
        n,
        crossing: if delta > 0 {
            Crossing::Destabilizing
        } else {
            Crossing::Stabilizing
        },
        slope,
    })))
}

fn scan_interval(p: &ModelParams, iv: &FeasibleInterval, tau_limit: f64) -> Result<Vec<Found>> {
    let lo = if iv.lo_boundary == Boundary::Origin {
        iv.lo
    } else {
        iv.lo + GUARD_BAND
    };
    let hi = (iv.hi - GUARD_BAND).min(tau_limit);
    if hi <= lo {
        return Ok(Vec::new());
    }
    let cells = ((hi - lo) / SCAN_STEP).ceil().max(1.0) as usize;
    let taus: Vec<f64> = (0..=cells)
        .map(|k| lo + (hi - lo) * k as f64 / cells as f64)
        .collect();
    let grid: Vec<GridPoint> = taus
        .par_iter()
        .map(|&tau| {
            let (omega, theta) =
                branch_point(p, iv.branch, tau)?.ok_or(Error::OutsideFeasibleInterval {
                    tau,
                    branch: iv.branch.name(),
                })?;
            Ok(GridPoint { tau, omega, theta })
        })
        .collect::<Result<_>>()?;

    let n_max = grid
        .iter()
        .map(|g| ((g.tau * g.omega - g.theta) / TWO_PI).floor() as i64)
        .max()
        .unwrap_or(-1)
        + 1;
    if n_max < 0 {
        return Ok(Vec::new());
    }

    let found: Vec<Vec<Found>> = (1..grid.len())
        .into_par_iter()
        .map(|k| -> Result<Vec<Found>> {
            let a = &grid[k - 1];
            let b = &grid[k];
            let shift = ((a.theta - b.theta) / TWO_PI).round();
            let b_theta = b.theta + shift * TWO_PI;
            let mut local = Vec::new();
            for n in -1..=n_max {
                let sa = s_value(a.tau, a.omega, a.theta, n);
                let sb = s_value(b.tau, b.omega, b_theta, n);
                let crosses = (sa < 0.0 && sb >= 0.0) || (sa > 0.0 && sb <= 0.0);
                if !crosses {
                    continue;
                }
                let b_point = GridPoint {
                    tau: b.tau,
                    omega: b.omega,
                    theta: b_theta,
                };
                if let Some(f) = refine_zero(p, iv.branch, a, &b_point, n, (lo, hi))? {
                    local.push(f);
                }
            }
            Ok(local)
        })
        .collect::<Result<_>>()?;
    Ok(found.into_iter().flatten().collect())
}

/// Locates every zero of every `S_n±` on the given feasibility intervals and
/// assembles the stability verdict over `τ`. `p.tau` is ignored.
pub fn find_switch_points(
    p: &ModelParams,
    intervals: &[FeasibleInterval],
) -> Result<StabilityProfile> {
    find_switch_points_up_to(p, intervals, f64::INFINITY)
}

/// As [`find_switch_points`], restricted to `τ <= tau_limit`.
pub fn find_switch_points_up_to(
    p: &ModelParams,
    intervals: &[FeasibleInterval],
    tau_limit: f64,
) -> Result<StabilityProfile> {
    let mut switch_points = Vec::new();
    let mut tangential = Vec::new();
    for iv in intervals {
        for f in scan_interval(p, iv, tau_limit)? {
            match f {
                Found::Switch(sp) => switch_points.push(sp),
                Found::Tangential(t) => tangential.push(t),
            }
        }
    }
    // Zeros sitting on a cell boundary are found from both neighbouring cells.
    switch_points.sort_by(|a, b| a.tau_star.total_cmp(&b.tau_star));
    switch_points.dedup_by(|b, a| {
        a.branch == b.branch && a.n == b.n && (a.tau_star - b.tau_star).abs() < 10.0 * BISECTION_TOL
    });
    Ok(StabilityProfile::assemble(
        *p,
        intervals.to_vec(),
        switch_points,
        tangential,
    ))
}

/// Feasibility intervals followed by the switch search.
pub fn stability_profile(p: &ModelParams) -> Result<StabilityProfile> {
    endemic_equilibrium(p)?;
    let intervals = feasibility_intervals(p, DEFAULT_TAU_MAX_SEARCH)?;
    find_switch_points(p, &intervals)
}

/// Stability profile for one value of `ν`, or the error that prevented it.
#[derive(Debug, Clone)]
pub struct RegionSlice {
    pub nu: f64,
    pub profile: std::result::Result<StabilityProfile, Error>,
}

#[derive(Debug, Clone)]
pub struct RegionScan {
    pub base: ModelParams,
    pub slices: Vec<RegionSlice>,
}

impl RegionScan {
    /// `Some(true)` if the equilibrium is unstable at `(nu_grid[k], tau)`.
    pub fn is_unstable(&self, k: usize, tau: f64) -> Option<bool> {
        self.slices[k]
            .profile
            .as_ref()
            .ok()
            .map(|pr| !pr.is_stable_at(tau))
    }
}

/// Switch points for every `ν` on the grid; failures are kept per slice.
pub fn stability_region_2d(nu_grid: &[f64], p_base: &ModelParams) -> RegionScan {
    let slices = nu_grid
        .par_iter()
        .map(|&nu| RegionSlice {
            nu,
            profile: stability_profile(&p_base.with_nu(nu)),
        })
        .collect();
    RegionScan {
        base: *p_base,
        slices,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DnuCell {
    pub d: f64,
    pub nu: f64,
    /// `Ok(true)` when the equilibrium is unstable at the fixed delay.
    pub unstable: std::result::Result<bool, Error>,
}

/// Stability verdict in the `(d, ν)` plane at a fixed delay; `β` stays at
/// its base value so that `R0` varies with `d`.
pub fn stability_region_d_nu(
    d_grid: &[f64],
    nu_grid: &[f64],
    tau_fixed: f64,
    p_base: &ModelParams,
) -> Vec<DnuCell> {
    let cells: Vec<(f64, f64)> = d_grid
        .iter()
        .flat_map(|&d| nu_grid.iter().map(move |&nu| (d, nu)))
        .collect();
    cells
        .par_iter()
        .map(|&(d, nu)| {
            let p = p_base.with_d(d).with_nu(nu).with_tau(tau_fixed);
            let verdict = (|| -> Result<bool> {
                p.validate()?;
                endemic_equilibrium(&p)?;
                let intervals = feasibility_intervals(&p, DEFAULT_TAU_MAX_SEARCH)?;
                let profile = find_switch_points_up_to(&p, &intervals, tau_fixed + 0.01)?;
                Ok(!profile.is_stable_at(tau_fixed))
            })();
            DnuCell {
                d,
                nu,
                unstable: verdict,
            }
        })
        .collect()
}

/// Residual of `e^{-iωτ} + P(iω)/Q(iω)`, which vanishes at a switch point.
pub fn switch_residual(p: &ModelParams, sp: &SwitchPoint) -> Result<f64> {
    let ce = CharEquation::new(&p.with_tau(sp.tau_star))?;
    let l = Complex64::new(0.0, sp.omega);
    Ok(((-l * sp.tau_star).exp() + ce.p(l) / ce.q(l)).norm())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn theta_quadrant_anchor() {
        // sin θ = 0, cos θ = 1  ⇒  P/Q = -1  ⇒  θ = 0
        let r = Complex64::new(-1.0, 0.0);
        let th = r.im.atan2(-r.re).rem_euclid(TWO_PI);
        assert_eq!(th, 0.0);
    }

    #[test]
    fn theta_satisfies_both_identities() {
        let p = ModelParams::pertussis(4.8, 2.86);
        let ce = CharEquation::new(&p).unwrap();
        let w = omega_roots(&ce.coeffs).omega_plus.unwrap();
        let th = angle_theta(w, &p).unwrap();
        assert!((0.0..TWO_PI).contains(&th));
        let l = Complex64::new(0.0, w);
        let r = ce.p(l) / ce.q(l);
        assert!((th.sin() - r.im).abs() < 1e-9);
        assert!((th.cos() + r.re).abs() < 1e-9);
        assert!((r.im * r.im + r.re * r.re - 1.0).abs() < 1e-9);
    }

    #[test]
    fn outside_interval_is_an_error() {
        let p = ModelParams::pertussis(4.8, 0.0);
        assert!(matches!(
            switch_function(0, Branch::Minus, 0.5, &p),
            Err(Error::OutsideFeasibleInterval { .. })
        ));
        assert!(switch_function(0, Branch::Plus, 0.5, &p).is_ok());
    }

    #[test]
    fn profile_counts_pairs() {
        let mk = |tau_star: f64, delta: i32| SwitchPoint {
            tau_star,
            omega: 1.0,
            branch: Branch::Plus,
            n: 0,
            crossing: if delta > 0 {
                Crossing::Destabilizing
            } else {
                Crossing::Stabilizing
            },
            slope: delta as f64,
        };
        let pr = StabilityProfile::assemble(
            ModelParams::default(),
            vec![],
            vec![mk(3.0, -1), mk(1.0, 1), mk(2.0, 1), mk(4.0, -1)],
            vec![],
        );
        assert_eq!(pr.intervals.len(), 5);
        assert!(pr.is_stable_at(0.5));
        assert_eq!(pr.unstable_pairs_at(2.5), 2);
        assert!(pr.is_stable_at(10.0));
        assert_eq!(pr.unstable_ranges(), vec![(1.0, 4.0)]);
    }
}
