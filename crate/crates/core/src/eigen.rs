//! Rightmost characteristic roots of the linearization at the endemic
//! equilibrium.
//!
//! The history segment on `[-τ, 0]` is represented by its values at `m + 1`
//! Chebyshev extremal nodes. The first node (`θ = 0`) evolves by the
//! linearized right-hand side, the remaining ones by the spectral
//! differentiation matrix. Eigenvalues of the resulting `2(m+1)` matrix
//! approximate the characteristic roots; Newton on `W(λ)` then refines them.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::characteristic::CharEquation;
use crate::error::{Error, Result};
use crate::model::{endemic_equilibrium, rhs_unchecked, Equilibrium, ModelParams, State};

/// Chebyshev collocation on `[-τ, 0]`.
#[derive(Debug, Clone)]
pub struct SpectralDiscretization {
    pub m: usize,
    pub tau: f64,
    /// `nodes[0] = 0`, `nodes[m] = -τ`.
    pub nodes: Vec<f64>,
    pub diff: DMatrix<f64>,
    /// Clenshaw–Curtis weights, exact for polynomials of degree `m`.
    pub weights: Vec<f64>,
}

/// Clenshaw–Curtis weights on `[-1, 1]` for the nodes `cos(kπ/m)`.
fn clenshaw_curtis(m: usize) -> Vec<f64> {
    let n = m as f64;
    let mut w = vec![0.0; m + 1];
    let mut v = vec![1.0; m.saturating_sub(1)];
    if m.is_multiple_of(2) {
        w[0] = 1.0 / (n * n - 1.0);
        w[m] = w[0];
        for k in 1..m / 2 {
            let kf = k as f64;
            for (j, vj) in v.iter_mut().enumerate() {
                let th = (j + 1) as f64 * PI / n;
                *vj -= 2.0 * (2.0 * kf * th).cos() / (4.0 * kf * kf - 1.0);
            }
        }
        for (j, vj) in v.iter_mut().enumerate() {
            let th = (j + 1) as f64 * PI / n;
            *vj -= (n * th).cos() / (n * n - 1.0);
        }
    } else {
        w[0] = 1.0 / (n * n);
        w[m] = w[0];
        for k in 1..=(m - 1) / 2 {
            let kf = k as f64;
            for (j, vj) in v.iter_mut().enumerate() {
                let th = (j + 1) as f64 * PI / n;
                *vj -= 2.0 * (2.0 * kf * th).cos() / (4.0 * kf * kf - 1.0);
            }
        }
    }
    for (j, vj) in v.iter().enumerate() {
        w[j + 1] = 2.0 * vj / n;
    }
    w
}

pub fn build_discretization(m: usize, tau: f64) -> Result<SpectralDiscretization> {
    if m < 2 {
        return Err(Error::InvalidParameter(format!(
            "collocation degree {m} < 2"
        )));
    }
    if !(tau >= 1e-8) {
        return Err(Error::DegenerateDelay { tau });
    }
    let n = m as f64;
    let x: Vec<f64> = (0..=m).map(|j| (j as f64 * PI / n).cos()).collect();
    let c = |j: usize| if j == 0 || j == m { 2.0 } else { 1.0 };
    let mut diff = DMatrix::zeros(m + 1, m + 1);
    for i in 0..=m {
        let mut row_sum = 0.0;
        for j in 0..=m {
            if i == j {
                continue;
            }
            // x_i - x_j without cancellation
            let dx = 2.0
                * ((i + j) as f64 * PI / (2.0 * n)).sin()
                * ((j as f64 - i as f64) * PI / (2.0 * n)).sin();
            let sign = if (i + j) % 2 == 0 { 1.0 } else { -1.0 };
            let v = c(i) / c(j) * sign / dx;
            diff[(i, j)] = v;
            row_sum += v;
        }
        diff[(i, i)] = -row_sum;
    }
    // θ = τ(x - 1)/2
    diff *= 2.0 / tau;
    let nodes = x.iter().map(|xi| 0.5 * tau * (xi - 1.0)).collect();
    let weights = clenshaw_curtis(m)
        .into_iter()
        .map(|w| 0.5 * tau * w)
        .collect();
    Ok(SpectralDiscretization {
        m,
        tau,
        nodes,
        diff,
        weights,
    })
}

/// Matrix whose spectrum approximates the characteristic roots. Unknowns are
/// ordered `(s_0..s_m, i_0..i_m)`.
pub fn linearized_matrix(
    p: &ModelParams,
    eq: &Equilibrium,
    disc: &SpectralDiscretization,
) -> Result<DMatrix<f64>> {
    if (disc.tau - p.tau).abs() > 1e-12 * p.tau.max(1.0) {
        return Err(Error::InvalidParameter(format!(
            "discretization built for tau = {} but parameters have tau = {}",
            disc.tau, p.tau
        )));
    }
    let m = disc.m;
    let n = m + 1;
    let (s, i) = (eq.s, eq.i);
    let nb = p.nu * p.beta;
    let e = (-p.d * p.tau - nb * p.tau * i).exp();
    let reentry = (p.gamma + nb * (1.0 - s - i)) * i * e;

    let mut a = DMatrix::zeros(2 * n, 2 * n);
    // dS/dt at θ = 0
    a[(0, 0)] += -p.d - p.beta * i;
    a[(0, n)] += -p.beta * s;
    a[(0, m)] += -nb * i * e;
    a[(0, n + m)] += (p.gamma + nb * (1.0 - s - i) - nb * i) * e;
    for (j, w) in disc.weights.iter().enumerate() {
        a[(0, n + j)] += -nb * reentry * w;
    }
    // dI/dt at θ = 0
    a[(n, 0)] = p.beta * i;
    a[(n, n)] = p.beta * s - p.gamma - p.d;
    // collocation rows
    for r in 1..=m {
        for k in 0..=m {
            a[(r, k)] = disc.diff[(r, k)];
            a[(n + r, n + k)] = disc.diff[(r, k)];
        }
    }
    Ok(a)
}

/// Nonlinear collocation system whose linearization is [`linearized_matrix`].
/// `u = (s_0..s_m, i_0..i_m)` holds node values; `du` receives the time
/// derivative.
pub fn collocation_rhs(p: &ModelParams, disc: &SpectralDiscretization, u: &[f64], du: &mut [f64]) {
    let m = disc.m;
    let n = m + 1;
    let (s, i) = u.split_at(n);
    let exposure: f64 = disc.weights.iter().zip(i).map(|(w, v)| w * v).sum();
    let now = State::new(s[0], i[0]);
    let lag = State::new(s[m], i[m]);
    let (ds, di) = rhs_unchecked(now, lag, exposure, p);
    du[0] = ds;
    du[n] = di;
    for r in 1..=m {
        let (mut a, mut b) = (0.0, 0.0);
        for k in 0..=m {
            let d = disc.diff[(r, k)];
            a += d * s[k];
            b += d * i[k];
        }
        du[r] = a;
        du[n + r] = b;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RootSource {
    MatrixEstimate,
    NewtonRefined,
}

impl std::fmt::Display for RootSource {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            RootSource::MatrixEstimate => "matrix-estimate",
            RootSource::NewtonRefined => "newton-refined",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CharRoot {
    pub lambda: Complex64,
    /// `|W(λ)| / max(1, |λ|³)`.
    pub residual: f64,
    pub source: RootSource,
}

pub fn scaled_residual(ce: &CharEquation, lambda: Complex64) -> f64 {
    ce.w(lambda).norm() / lambda.norm().powi(3).max(1.0)
}

/// Eigenvalues of the discretized linearization, sorted by real part
/// (largest first).
pub fn matrix_eigenvalues(p: &ModelParams, m: usize) -> Result<Vec<Complex64>> {
    let eq = endemic_equilibrium(p)?;
    let disc = build_discretization(m, p.tau)?;
    let a = linearized_matrix(p, &eq, &disc)?;
    let mut ev: Vec<Complex64> = a.complex_eigenvalues().iter().copied().collect();
    ev.sort_by(|x, y| y.re.total_cmp(&x.re).then(y.im.total_cmp(&x.im)));
    Ok(ev)
}

const NEWTON_MAX_ITER: usize = 60;
const REFINED_TOL: f64 = 1e-10;
const DUPLICATE_DIST: f64 = 1e-8;

/// Newton iteration on `W(λ)/λ`; the factor `λ` removes the root at the
/// origin that `W` carries for every parameter value.
pub fn newton_refine(ce: &CharEquation, start: Complex64) -> Option<Complex64> {
    let mut l = start;
    let limit = 10.0 * start.norm().max(1.0);
    for _ in 0..NEWTON_MAX_ITER {
        if l.norm() < 1e-300 {
            return None;
        }
        let w = ce.w(l);
        let g = w / l;
        let dg = (ce.w_prime(l) - g) / l;
        if dg.norm() == 0.0 || !dg.is_finite() {
            return None;
        }
        let step = g / dg;
        l -= step;
        if !l.is_finite() || (l - start).norm() > limit {
            return None;
        }
        if step.norm() <= 1e-14 * l.norm().max(1.0) {
            break;
        }
    }
    (scaled_residual(ce, l) < REFINED_TOL).then_some(l)
}

/// The `k` rightmost characteristic roots at `p`, estimated with collocation
/// degree `m` and refined by Newton.
pub fn rightmost_roots(p: &ModelParams, k: usize, m: usize) -> Result<Vec<CharRoot>> {
    let ce = CharEquation::new(p)?;
    let estimates = matrix_eigenvalues(p, m)?;
    let mut roots: Vec<CharRoot> = Vec::new();
    for est in estimates.iter().take(2 * k + 4) {
        let root = match newton_refine(&ce, *est) {
            Some(l) => CharRoot {
                lambda: l,
                residual: scaled_residual(&ce, l),
                source: RootSource::NewtonRefined,
            },
            None => CharRoot {
                lambda: *est,
                residual: scaled_residual(&ce, *est),
                source: RootSource::MatrixEstimate,
            },
        };
        if roots
            .iter()
            .any(|r| (r.lambda - root.lambda).norm() < DUPLICATE_DIST * root.lambda.norm().max(1.0))
        {
            continue;
        }
        roots.push(root);
    }
    roots.sort_by(|x, y| {
        y.lambda
            .re
            .total_cmp(&x.lambda.re)
            .then(y.lambda.im.total_cmp(&x.lambda.im))
    });
    roots.truncate(k);
    Ok(roots)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRow {
    pub m: usize,
    /// Delay at which the tracked discrete eigenvalue crosses the axis.
    pub tau_star: Option<f64>,
    pub error: f64,
}

/// Real part of the discrete eigenvalue closest to `i omega`.
fn tracked_real_part(p: &ModelParams, m: usize, omega: f64) -> Result<f64> {
    let target = Complex64::new(0.0, omega);
    let ev = matrix_eigenvalues(p, m)?;
    ev.iter()
        .filter(|l| l.im > 0.0)
        .min_by(|a, b| (*a - target).norm().total_cmp(&(*b - target).norm()))
        .map(|l| l.re)
        .ok_or(Error::ConvergenceFailure {
            what: "eigenvalue tracking",
            iterations: 0,
        })
}

/// Delay at which the degree-`m` discretization places the crossing near a
/// known switch `(tau_ref, omega_ref)`; regula falsi (Illinois) on the real
/// part of the tracked eigenvalue.
pub fn discrete_hopf_location(
    p: &ModelParams,
    m: usize,
    tau_ref: f64,
    omega_ref: f64,
) -> Result<Option<f64>> {
    let re = |tau: f64| tracked_real_part(&p.with_tau(tau), m, omega_ref);
    let mut half = 0.02 * tau_ref.clamp(0.5, 10.0);
    let (mut a, mut b, mut fa, mut fb);
    loop {
        a = (tau_ref - half).max(1e-6);
        b = tau_ref + half;
        fa = re(a)?;
        fb = re(b)?;
        if fa.signum() != fb.signum() {
            break;
        }
        half *= 2.0;
        if half > 0.25 * tau_ref.max(1.0) {
            return Ok(None);
        }
    }
    let mut side = 0;
    for _ in 0..100 {
        let c = (a * fb - b * fa) / (fb - fa);
        let fc = re(c)?;
        if fc == 0.0 || (b - a).abs() < 1e-12 * tau_ref.max(1.0) {
            return Ok(Some(c));
        }
        if fc.signum() == fb.signum() {
            b = c;
            fb = fc;
            if side == 1 {
                fa *= 0.5;
            }
            side = 1;
        } else {
            a = c;
            fa = fc;
            if side == -1 {
                fb *= 0.5;
            }
            side = -1;
        }
        if (b - a).abs() < 1e-11 * tau_ref.max(1.0) {
            return Ok(Some(0.5 * (a + b)));
        }
    }
    Ok(Some(0.5 * (a + b)))
}

/// Hopf-location error of the collocation approximation as a function of
/// the degree, measured against an analytically located switch point.
pub fn hopf_convergence_study(
    p: &ModelParams,
    m_list: &[usize],
    tau_ref: f64,
    omega_ref: f64,
) -> Result<Vec<ConvergenceRow>> {
    use rayon::prelude::*;
    m_list
        .par_iter()
        .map(|&m| {
            let tau_star = discrete_hopf_location(p, m, tau_ref, omega_ref)?;
            Ok(ConvergenceRow {
                m,
                tau_star,
                error: tau_star
                    .map(|t| (t - tau_ref).abs())
                    .unwrap_or(f64::INFINITY),
            })
        })
        .collect()
}
