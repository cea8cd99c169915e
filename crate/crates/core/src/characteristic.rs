//! Characteristic equation of the linearization at the endemic equilibrium.
//!
//! The characteristic function is `W(λ) = P(λ) + Q(λ) e^{-λτ}` where the
//! polynomial coefficients themselves depend on `τ` through `I*(τ)`.
//! Purely imaginary roots `λ = iω` require `ω` to be a positive root of
//! `F(ω) = |P(iω)|² - |Q(iω)|² = ω²(ω⁴ + a1 ω² + a0)`.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{endemic_equilibrium, ModelParams};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CharCoeffs {
    pub i_star: f64,
    pub mu: f64,
    pub sigma: f64,
    pub a0: f64,
    pub a1: f64,
    /// `a1² - 4 a0`.
    pub discriminant: f64,
    /// Sum of the absolute values of the terms making up `a0`.
    pub a0_scale: f64,
    /// Sum of the absolute values of the terms making up the discriminant.
    pub discriminant_scale: f64,
}

pub fn char_coeffs(p: &ModelParams) -> Result<CharCoeffs> {
    let eq = endemic_equilibrium(p)?;
    Ok(coeffs_at(p, eq.i))
}

/// Coefficients for a given `I*` (no equilibrium solve).
pub(crate) fn coeffs_at(p: &ModelParams, i_star: f64) -> CharCoeffs {
    let (b, g, d, nu, tau) = (p.beta, p.gamma, p.d, p.nu, p.tau);
    let bi = b * i_star;
    let mu = bi * (-tau * (d + nu * bi)).exp();
    let sigma = g + nu * b * (1.0 - 1.0 / p.r0() - i_star);
    let a1_terms = [d * d, bi * bi, -2.0 * g * bi, -nu * nu * mu * mu];
    let a0_terms = [
        (bi * (g + d)).powi(2),
        -2.0 * nu * bi * (d + bi) * mu * sigma,
        -(sigma - nu * bi).powi(2) * mu * mu,
        -2.0 * nu * nu * mu * mu * bi * sigma,
    ];
    let a1: f64 = a1_terms.iter().sum();
    let a0: f64 = a0_terms.iter().sum();
    let a0_scale: f64 = a0_terms.iter().map(|t| t.abs()).sum();
    let a1_scale: f64 = a1_terms.iter().map(|t| t.abs()).sum();
    CharCoeffs {
        i_star,
        mu,
        sigma,
        a0,
        a1,
        discriminant: a1 * a1 - 4.0 * a0,
        a0_scale,
        discriminant_scale: a1_scale * a1_scale + 4.0 * a0_scale,
    }
}

impl CharCoeffs {
    /// `F(ω) = ω²(ω⁴ + a1 ω² + a0)`.
    pub fn f(&self, omega: f64) -> f64 {
        let w2 = omega * omega;
        w2 * (w2 * w2 + self.a1 * w2 + self.a0)
    }

    /// `∂F/∂ω`.
    pub fn f_prime(&self, omega: f64) -> f64 {
        let w2 = omega * omega;
        omega * (6.0 * w2 * w2 + 4.0 * self.a1 * w2 + 2.0 * self.a0)
    }
}

/// `P`, `Q` and `W` with their coefficients frozen at one parameter point.
#[derive(Debug, Clone, Copy)]
pub struct CharEquation {
    pub params: ModelParams,
    pub coeffs: CharCoeffs,
}

impl CharEquation {
    pub fn new(p: &ModelParams) -> Result<Self> {
        Ok(Self {
            params: *p,
            coeffs: char_coeffs(p)?,
        })
    }

    pub fn p(&self, lambda: Complex64) -> Complex64 {
        let pr = &self.params;
        let bi = pr.beta * self.coeffs.i_star;
        let c0 = pr.nu * bi * self.coeffs.mu * self.coeffs.sigma;
        ((lambda + (pr.d + bi)) * lambda + pr.beta * (pr.gamma + pr.d) * self.coeffs.i_star)
            * lambda
            + c0
    }

    pub fn q(&self, lambda: Complex64) -> Complex64 {
        let pr = &self.params;
        let bi = pr.beta * self.coeffs.i_star;
        let c = &self.coeffs;
        (lambda * lambda * pr.nu - lambda * (c.sigma - pr.nu * bi) - pr.nu * bi * c.sigma) * c.mu
    }

    pub fn p_prime(&self, lambda: Complex64) -> Complex64 {
        let pr = &self.params;
        let bi = pr.beta * self.coeffs.i_star;
        lambda * lambda * 3.0
            + lambda * (2.0 * (pr.d + bi))
            + pr.beta * (pr.gamma + pr.d) * self.coeffs.i_star
    }

    pub fn q_prime(&self, lambda: Complex64) -> Complex64 {
        let pr = &self.params;
        let bi = pr.beta * self.coeffs.i_star;
        let c = &self.coeffs;
        (lambda * (2.0 * pr.nu) - (c.sigma - pr.nu * bi)) * c.mu
    }

    pub fn w(&self, lambda: Complex64) -> Complex64 {
        self.p(lambda) + self.q(lambda) * (-lambda * self.params.tau).exp()
    }

    /// `W'(λ) = P' + (Q' - τQ) e^{-λτ}`.
    pub fn w_prime(&self, lambda: Complex64) -> Complex64 {
        let tau = self.params.tau;
        self.p_prime(lambda) + (self.q_prime(lambda) - self.q(lambda) * tau) * (-lambda * tau).exp()
    }
}

/// `(P(λ), Q(λ), W(λ))` at the parameter point `p`.
pub fn char_functions(
    lambda: Complex64,
    p: &ModelParams,
) -> Result<(Complex64, Complex64, Complex64)> {
    let ce = CharEquation::new(p)?;
    let (pv, qv) = (ce.p(lambda), ce.q(lambda));
    Ok((pv, qv, pv + qv * (-lambda * p.tau).exp()))
}

/// Partition of the `(a0, a1)` plane by the number of positive roots of `F`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Region {
    /// No positive root.
    I,
    /// Only `ω+`.
    II,
    /// Both `ω+ > ω-`.
    III,
}

impl std::fmt::Display for Region {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Region::I => "I",
            Region::II => "II",
            Region::III => "III",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OmegaRoots {
    pub omega_plus: Option<f64>,
    pub omega_minus: Option<f64>,
    pub region: Region,
    /// Double root (`D = 0`): the colliding value is reported on both branches.
    pub degenerate: bool,
}

pub fn omega_roots(c: &CharCoeffs) -> OmegaRoots {
    let none = OmegaRoots {
        omega_plus: None,
        omega_minus: None,
        region: Region::I,
        degenerate: false,
    };
    let (a0, a1, disc) = (c.a0, c.a1, c.discriminant);
    if a0 < 0.0 {
        let z = 0.5 * (-a1 + disc.sqrt());
        return OmegaRoots {
            omega_plus: Some(z.sqrt()),
            region: Region::II,
            ..none
        };
    }
    if a1 >= 0.0 || disc < 0.0 {
        return none;
    }
    if a0 == 0.0 {
        return OmegaRoots {
            omega_plus: Some((-a1).sqrt()),
            region: Region::II,
            ..none
        };
    }
    if disc == 0.0 {
        let w = (-0.5 * a1).sqrt();
        return OmegaRoots {
            omega_plus: Some(w),
            omega_minus: Some(w),
            region: Region::III,
            degenerate: true,
        };
    }
    let sq = disc.sqrt();
    // (-a1 - sq)/2 cancels badly when a0 is tiny; use the product of roots.
    let z_plus = 0.5 * (-a1 + sq);
    let z_minus = a0 / z_plus;
    OmegaRoots {
        omega_plus: Some(z_plus.sqrt()),
        omega_minus: Some(z_minus.sqrt()),
        region: Region::III,
        degenerate: false,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Branch {
    Plus,
    Minus,
}

impl Branch {
    pub fn pick(self, roots: &OmegaRoots) -> Option<f64> {
        match self {
            Branch::Plus => roots.omega_plus,
            Branch::Minus => roots.omega_minus,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Branch::Plus => "plus",
            Branch::Minus => "minus",
        }
    }

    /// Sign of `∂F/∂ω` on this branch.
    pub fn f_prime_sign(self) -> i32 {
        match self {
            Branch::Plus => 1,
            Branch::Minus => -1,
        }
    }
}

impl std::fmt::Display for Branch {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// What determines an end of a feasibility interval.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Boundary {
    /// `τ = 0`; the interval is closed there.
    Origin,
    /// `a0 = 0`: the branch frequency tends to zero (or `ω-` appears).
    FrequencyVanishes,
    /// `D = 0`: `ω+` and `ω-` collide.
    Collision,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeasibleInterval {
    pub branch: Branch,
    pub lo: f64,
    pub hi: f64,
    pub lo_boundary: Boundary,
    pub hi_boundary: Boundary,
}

impl FeasibleInterval {
    pub fn contains(&self, tau: f64) -> bool {
        tau >= self.lo && tau <= self.hi
    }
}

/// One row of a coefficient scan, in the CSV column order.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoeffRow {
    pub tau: f64,
    pub coeffs: CharCoeffs,
    pub roots: OmegaRoots,
}

pub fn scan_coefficients(p: &ModelParams, taus: &[f64]) -> Result<Vec<CoeffRow>> {
    taus.par_iter()
        .map(|&tau| {
            let coeffs = char_coeffs(&p.with_tau(tau))?;
            Ok(CoeffRow {
                tau,
                coeffs,
                roots: omega_roots(&coeffs),
            })
        })
        .collect()
}

pub const DEFAULT_TAU_MAX_SEARCH: f64 = 200.0;
const UNIFORM_STEP: f64 = 0.01;

/// Geometric steps from 1e-4 up to the uniform step, then uniform.
fn scan_grid(tau_max: f64) -> Vec<f64> {
    let mut grid = vec![0.0];
    let mut t = 1e-4;
    while t < UNIFORM_STEP {
        grid.push(t);
        t *= 2.0;
    }
    let mut k = 1;
    loop {
        let t = k as f64 * UNIFORM_STEP;
        if t >= tau_max {
            break;
        }
        grid.push(t);
        k += 1;
    }
    grid.push(tau_max);
    grid
}

fn membership(c: &CharCoeffs) -> (bool, bool) {
    let r = omega_roots(c);
    (
        r.omega_plus.is_some(),
        r.omega_minus.is_some() && !r.degenerate,
    )
}

#[derive(Clone, Copy)]
enum BoundaryFn {
    A0,
    Disc,
}

impl BoundaryFn {
    fn eval(self, c: &CharCoeffs) -> f64 {
        match self {
            BoundaryFn::A0 => c.a0,
            BoundaryFn::Disc => c.discriminant,
        }
    }
}

/// Bisection on `a0(τ)` or `D(τ)` down to rounding.
fn refine_boundary(p: &ModelParams, which: BoundaryFn, mut lo: f64, mut hi: f64) -> Result<f64> {
    let val = |t: f64| -> Result<f64> { Ok(which.eval(&char_coeffs(&p.with_tau(t))?)) };
    let f_lo = val(lo)?;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let fm = val(mid)?;
        if fm == 0.0 {
            return Ok(mid);
        }
        if fm.signum() == f_lo.signum() {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    // Report the side with the smaller residual.
    let (r_lo, r_hi) = (val(lo)?.abs(), val(hi)?.abs());
    Ok(if r_lo <= r_hi { lo } else { hi })
}

struct Transition {
    tau: f64,
    boundary: Boundary,
    before: (bool, bool),
    after: (bool, bool),
}

fn locate_transitions(
    p: &ModelParams,
    t0: f64,
    c0: &CharCoeffs,
    t1: f64,
    c1: &CharCoeffs,
    depth: usize,
    out: &mut Vec<Transition>,
) -> Result<()> {
    let (m0, m1) = (membership(c0), membership(c1));
    if m0 == m1 {
        return Ok(());
    }
    let a0_flip = c0.a0.signum() != c1.a0.signum();
    let d_flip = c0.discriminant.signum() != c1.discriminant.signum();
    if a0_flip && d_flip && depth < 30 {
        let mid = 0.5 * (t0 + t1);
        let cm = char_coeffs(&p.with_tau(mid))?;
        locate_transitions(p, t0, c0, mid, &cm, depth + 1, out)?;
        return locate_transitions(p, mid, &cm, t1, c1, depth + 1, out);
    }
    let (which, boundary) = if a0_flip {
        (BoundaryFn::A0, Boundary::FrequencyVanishes)
    } else {
        (BoundaryFn::Disc, Boundary::Collision)
    };
    let tau = refine_boundary(p, which, t0, t1)?;
    out.push(Transition {
        tau,
        boundary,
        before: m0,
        after: m1,
    });
    Ok(())
}

/// Maximal τ-intervals on which `ω+` (`J+`) and `ω-` (`J-`) exist.
pub fn feasibility_intervals(
    p: &ModelParams,
    tau_max_search: f64,
) -> Result<Vec<FeasibleInterval>> {
    p.validate()?;
    if !(tau_max_search > 0.0) {
        return Err(Error::InvalidParameter(
            "tau_max_search must be positive".into(),
        ));
    }
    let grid = scan_grid(tau_max_search);
    let coeffs: Vec<CharCoeffs> = grid
        .par_iter()
        .map(|&t| char_coeffs(&p.with_tau(t)))
        .collect::<Result<_>>()?;

    let last = coeffs.last().map(membership).unwrap_or((false, false));
    if last.0 || last.1 {
        return Err(Error::SearchRangeExceeded {
            tau_max: tau_max_search,
        });
    }

    let mut transitions = Vec::new();
    for k in 1..grid.len() {
        locate_transitions(
            p,
            grid[k - 1],
            &coeffs[k - 1],
            grid[k],
            &coeffs[k],
            0,
            &mut transitions,
        )?;
    }

    let mut out = Vec::new();
    for (idx, branch) in [(0usize, Branch::Plus), (1usize, Branch::Minus)] {
        let pick = |m: (bool, bool)| if idx == 0 { m.0 } else { m.1 };
        let mut open: Option<(f64, Boundary)> = if pick(membership(&coeffs[0])) {
            Some((0.0, Boundary::Origin))
        } else {
            None
        };
        for tr in &transitions {
            match (pick(tr.before), pick(tr.after), open) {
                (false, true, None) => open = Some((tr.tau, tr.boundary)),
                (true, false, Some((lo, lo_boundary))) => {
                    out.push(FeasibleInterval {
                        branch,
                        lo,
                        hi: tr.tau,
                        lo_boundary,
                        hi_boundary: tr.boundary,
                    });
                    open = None;
                }
                _ => {}
            }
        }
    }
    out.sort_by(|a, b| a.lo.total_cmp(&b.lo).then(a.branch.cmp(&b.branch)));
    Ok(out)
}

/// Scaled residual of the condition defining a boundary point.
pub fn boundary_residual(p: &ModelParams, tau: f64, boundary: Boundary) -> Result<f64> {
    let c = char_coeffs(&p.with_tau(tau))?;
    Ok(match boundary {
        Boundary::Origin => tau.abs(),
        Boundary::FrequencyVanishes => c.a0.abs() / c.a0_scale,
        Boundary::Collision => c.discriminant.abs() / c.discriminant_scale,
    })
}

/// Limits of `a0`, `a1` and `D` as `τ → ∞`.
pub fn sir_limit_coefficients(p: &ModelParams) -> (f64, f64, f64) {
    let (b, g, d) = (p.beta, p.gamma, p.d);
    let gd = g + d;
    let a0 = d * d * (gd - b).powi(2);
    let a1 = d / (gd * gd) * (d * b * b + 2.0 * gd * gd * (gd - b));
    // a1² − 4a0 of the two limits above; the prefactor carries (γ+d)⁴
    let disc = d.powi(3) * b * b / gd.powi(4) * (d * b * b + 4.0 * gd * gd * (gd - b));
    (a0, a1, disc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn coeffs(nu: f64, tau: f64) -> CharCoeffs {
        char_coeffs(&ModelParams::pertussis(nu, tau)).unwrap()
    }

    #[test]
    fn no_boosting_a0_factorizes() {
        for tau in [0.5, 3.0, 20.0, 90.0] {
            let p = ModelParams::pertussis(0.0, tau);
            let c = coeffs(0.0, tau);
            let bi = p.beta * c.i_star;
            let e = (-tau * p.d).exp();
            let expected = bi * bi * (p.gamma + p.d - p.gamma * e) * (p.gamma + p.d + p.gamma * e);
            assert_relative_eq!(c.a0, expected, max_relative = 1e-12);
            assert!(c.a0 > 0.0);
            assert_ne!(omega_roots(&c).region, Region::II);
        }
    }

    #[test]
    fn large_delay_limits() {
        for nu in [0.0, 1.0, 4.8] {
            let p = ModelParams::pertussis(nu, 2000.0);
            let c = char_coeffs(&p).unwrap();
            let (a0, a1, disc) = sir_limit_coefficients(&p);
            assert_relative_eq!(c.a0, a0, max_relative = 1e-6);
            assert_relative_eq!(c.a1, a1, max_relative = 1e-6);
            assert_relative_eq!(c.discriminant, disc, max_relative = 1e-5);
            assert_relative_eq!(disc, a1 * a1 - 4.0 * a0, max_relative = 1e-9);
        }
        let p = ModelParams::pertussis(0.0, 1.0);
        let (a0, _, _) = sir_limit_coefficients(&p);
        assert_relative_eq!(
            a0,
            0.02f64.powi(2) * (17.02f64 - 255.3).powi(2),
            max_relative = 1e-14
        );
    }

    #[test]
    fn positive_coefficients_have_no_roots() {
        let c = CharCoeffs {
            i_star: 0.0,
            mu: 0.0,
            sigma: 0.0,
            a0: 2.0,
            a1: 3.0,
            discriminant: 1.0,
            a0_scale: 2.0,
            discriminant_scale: 17.0,
        };
        let r = omega_roots(&c);
        assert_eq!(r.region, Region::I);
        assert!(r.omega_plus.is_none() && r.omega_minus.is_none());
    }

    #[test]
    fn roots_and_regions_by_quadrant() {
        let mk = |a0: f64, a1: f64| CharCoeffs {
            i_star: 0.0,
            mu: 0.0,
            sigma: 0.0,
            a0,
            a1,
            discriminant: a1 * a1 - 4.0 * a0,
            a0_scale: 1.0,
            discriminant_scale: 1.0,
        };
        // ω² ∈ {1, 4}: z² - 5z + 4
        let r = omega_roots(&mk(4.0, -5.0));
        assert_eq!(r.region, Region::III);
        assert_relative_eq!(r.omega_plus.unwrap(), 2.0, epsilon = 1e-15);
        assert_relative_eq!(r.omega_minus.unwrap(), 1.0, epsilon = 1e-15);
        let r = omega_roots(&mk(-4.0, 3.0));
        assert_eq!(r.region, Region::II);
        assert_relative_eq!(r.omega_plus.unwrap(), 1.0, epsilon = 1e-15);
        let r = omega_roots(&mk(0.0, -9.0));
        assert_eq!(r.region, Region::II);
        assert_relative_eq!(r.omega_plus.unwrap(), 3.0, epsilon = 1e-15);
        let r = omega_roots(&mk(4.0, -4.0));
        assert!(r.degenerate);
        assert_eq!(r.omega_plus, r.omega_minus);
        assert_eq!(omega_roots(&mk(4.0, -3.0)).region, Region::I);
    }

    #[test]
    fn f_is_difference_of_squared_moduli() {
        for (nu, tau) in [(4.8, 2.0), (3.2, 4.0), (0.0, 30.0), (1.0, 0.3)] {
            let ce = CharEquation::new(&ModelParams::pertussis(nu, tau)).unwrap();
            for k in 1..40 {
                let w = 0.1 * k as f64;
                let l = Complex64::new(0.0, w);
                let lhs = ce.p(l).norm_sqr() - ce.q(l).norm_sqr();
                let scale = ce.p(l).norm_sqr() + ce.q(l).norm_sqr();
                assert!(
                    (lhs - ce.coeffs.f(w)).abs() <= 1e-9 * scale,
                    "nu={nu} tau={tau} w={w}"
                );
            }
        }
    }

    #[test]
    fn w_prime_matches_finite_difference() {
        let ce = CharEquation::new(&ModelParams::pertussis(3.2, 4.0)).unwrap();
        let l = Complex64::new(-0.3, 2.1);
        let h = 1e-6;
        let fd = (ce.w(l + h) - ce.w(l - h)) / (2.0 * h);
        assert!((fd - ce.w_prime(l)).norm() < 1e-6 * ce.w_prime(l).norm());
    }

    #[test]
    fn grid_is_increasing() {
        let g = scan_grid(200.0);
        assert!(g.windows(2).all(|w| w[1] > w[0]));
        assert_eq!(g[0], 0.0);
        assert_eq!(*g.last().unwrap(), 200.0);
    }

    #[test]
    fn too_short_search_range_is_reported() {
        let p = ModelParams::pertussis(0.0, 1.0);
        assert!(matches!(
            feasibility_intervals(&p, 50.0),
            Err(Error::SearchRangeExceeded { .. })
        ));
    }
}
