//! Method-of-lines reference for the delay integrator: the history segment
//! is replaced by its values at Chebyshev nodes and the resulting ODE is
//! marched with classical RK4.

use wanewave::dynamics::{integrate, IntegratorOptions};
use wanewave::eigen::{build_discretization, collocation_rhs, SpectralDiscretization};
use wanewave::{History, ModelParams};

fn rk4(
    p: &ModelParams,
    disc: &SpectralDiscretization,
    u0: &[f64],
    t_end: f64,
    h: f64,
    mut visit: impl FnMut(f64, &[f64]),
) {
    let n = u0.len();
    let steps = (t_end / h).round() as usize;
    let h = t_end / steps as f64;
    let mut u = u0.to_vec();
    let f = |x: &[f64]| {
        let mut d = vec![0.0; n];
        collocation_rhs(p, disc, x, &mut d);
        d
    };
    let axpy = |a: &[f64], s: f64, b: &[f64]| -> Vec<f64> {
        a.iter().zip(b).map(|(x, y)| x + s * y).collect()
    };
    visit(0.0, &u);
    for k in 0..steps {
        let k1 = f(&u);
        let k2 = f(&axpy(&u, 0.5 * h, &k1));
        let k3 = f(&axpy(&u, 0.5 * h, &k2));
        let k4 = f(&axpy(&u, h, &k3));
        for j in 0..n {
            u[j] += h / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]);
        }
        visit((k + 1) as f64 * h, &u);
    }
}

pub fn max_deviation(nu: f64, tau: f64, s0: f64, i0: f64, t_end: f64, m: usize) -> f64 {
    let p = ModelParams::pertussis(nu, tau);
    let disc = build_discretization(m, tau).unwrap();
    let traj = integrate(
        &p,
        &History::constant(s0, i0),
        t_end,
        &IntegratorOptions::default().with_tol(1e-11, 1e-14),
    )
    .unwrap();
    let mut u0 = vec![s0; m + 1];
    u0.extend(std::iter::repeat_n(i0, m + 1));
    // explicit stability limit of the differentiation block scales like m²/τ
    let h = (0.5 * tau / (m * m) as f64).min(1e-2);
    let mut worst: f64 = 0.0;
    rk4(&p, &disc, &u0, t_end, h, |t, u| {
        let i_dde = traj.state_at(t)[1];
        worst = worst.max((u[m + 1] - i_dde).abs());
    });
    worst
}
