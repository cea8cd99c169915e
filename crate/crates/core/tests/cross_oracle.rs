mod common;

use common::max_deviation;

#[test]
fn delay_integrator_matches_collocation_reference() {
    let dev = max_deviation(3.2, 4.0, 0.0675, 0.00125, 50.0, 30);
    assert!(dev < 1e-4, "max |I_dde - I_ref| = {dev:e}");
}

#[test]
fn agreement_near_a_cycle() {
    let dev = max_deviation(4.8, 4.0, 0.07, 0.002, 30.0, 30);
    assert!(dev < 1e-4, "max |I_dde - I_ref| = {dev:e}");
}
