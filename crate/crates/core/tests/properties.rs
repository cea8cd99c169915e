use num_complex::Complex64;
use proptest::prelude::*;

use wanewave::characteristic::{char_coeffs, omega_roots, Branch, CharEquation, Region};
use wanewave::dynamics::{integrate, IntegratorOptions};
use wanewave::eigen::matrix_eigenvalues;
use wanewave::model::{endemic_equilibrium, rhs_delay_system};
use wanewave::switches::{stability_profile, switch_function};
use wanewave::{History, ModelParams, State};

fn params() -> impl Strategy<Value = ModelParams> {
    (
        2.0f64..30.0,
        5.0f64..40.0,
        0.005f64..0.05,
        0.0f64..6.0,
        0.05f64..40.0,
    )
        .prop_map(|(r0, gamma, d, nu, tau)| ModelParams {
            beta: r0 * (gamma + d),
            gamma,
            d,
            nu,
            tau,
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn endemic_equilibrium_is_stationary(p in params()) {
        let eq = endemic_equilibrium(&p).unwrap();
        let st = State::new(eq.s, eq.i);
        let (ds, di) = rhs_delay_system(st, st, p.tau * eq.i, &p).unwrap();
        prop_assert!(ds.abs() < 1e-10 && di.abs() < 1e-10, "({ds:e}, {di:e})");
        prop_assert!(eq.s > 0.0 && eq.i > 0.0 && eq.s + eq.i < 1.0);
    }

    #[test]
    fn frequencies_are_roots_of_f(p in params()) {
        let c = char_coeffs(&p).unwrap();
        let roots = omega_roots(&c);
        for (w, sign) in [(roots.omega_plus, 1.0), (roots.omega_minus, -1.0)] {
            let Some(w) = w else { continue };
            let w2 = w * w;
            let scale = w2 * (w2 * w2 + c.a1.abs() * w2 + c.a0.abs());
            prop_assert!(c.f(w).abs() < 1e-9 * scale, "F({w}) = {}", c.f(w));
            if !roots.degenerate {
                prop_assert!(sign * c.f_prime(w) > 0.0, "F' has the wrong sign at {w}");
            }
        }
        match roots.region {
            Region::I => prop_assert!(roots.omega_plus.is_none() && roots.omega_minus.is_none()),
            Region::II => prop_assert!(roots.omega_plus.is_some() && roots.omega_minus.is_none()),
            Region::III => prop_assert!(roots.omega_plus >= roots.omega_minus && roots.omega_minus.is_some()),
        }
    }

    #[test]
    fn switch_functions_decrease_with_index(p in params(), n in 0u32..20) {
        for branch in [Branch::Plus, Branch::Minus] {
            if let (Ok(a), Ok(b)) = (switch_function(n, branch, p.tau, &p), switch_function(n + 1, branch, p.tau, &p)) {
                prop_assert!(b < a, "S_{} = {b} not below S_{n} = {a}", n + 1);
            }
        }
    }

    #[test]
    fn characteristic_function_is_real(p in params(), re in -2.0f64..2.0, im in 0.0f64..40.0) {
        let ce = CharEquation::new(&p).unwrap();
        let l = Complex64::new(re, im);
        let (w, wc) = (ce.w(l), ce.w(l.conj()));
        prop_assert!((w.conj() - wc).norm() <= 1e-12 * w.norm().max(1.0));
    }

    #[test]
    fn trajectories_stay_in_simplex_and_track_exposure(
        nu in 0.0f64..5.0,
        tau in 0.5f64..8.0,
        s0 in 0.01f64..0.9,
        i0 in 1e-5f64..0.05,
    ) {
        let p = ModelParams::pertussis(nu, tau);
        let traj = integrate(&p, &History::constant(s0, i0), 30.0, &IntegratorOptions::default()).unwrap();
        for (t, y) in traj.times.iter().zip(&traj.states) {
            prop_assert!(y[0] >= -1e-9 && y[1] >= -1e-9 && y[0] + y[1] <= 1.0 + 1e-9, "left the simplex at {t}: {y:?}");
            if *t >= tau {
                let direct = traj.integral_i(t - tau, *t);
                prop_assert!((y[2] - direct).abs() < 1e-6, "Y({t}) = {} vs {direct}", y[2]);
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn spectrum_is_closed_under_conjugation(nu in 0.0f64..5.0, tau in 0.2f64..15.0) {
        let ev = matrix_eigenvalues(&ModelParams::pertussis(nu, tau), 20).unwrap();
        for l in ev.iter().filter(|l| l.im.abs() > 1e-8) {
            let partner = ev.iter().map(|m| (m - l.conj()).norm()).fold(f64::INFINITY, f64::min);
            prop_assert!(partner < 1e-8 * l.norm().max(1.0), "{l} has no conjugate");
        }
    }

    #[test]
    fn switch_counts_are_even(nu in 0.3f64..6.0) {
        let prof = stability_profile(&ModelParams::pertussis(nu, 1.0)).unwrap();
        prop_assert_eq!(prof.switch_points.len() % 2, 0);
        prop_assert!(prof.intervals.iter().all(|iv| iv.unstable_pairs >= 0));
        prop_assert_eq!(prof.intervals.last().unwrap().unstable_pairs, 0);
    }
}
