//! Nonlinear delay dynamics: integration, orbit classification and
//! attractor scans.

mod attractors;
mod classify;
mod dense;
mod integrate;

pub use attractors::{
    bistability_scan, default_history_grid, random_histories, run_and_classify, same_attractor,
    Attractor, AttractorScan, RunConfig, DEDUP_TOL,
};
pub use classify::{
    classify_orbit, extrema, Extremum, OrbitKind, OrbitSummary, AMPLITUDE_THRESHOLD,
    CYCLE_THRESHOLD, DEFAULT_TRANSIENT, DEFAULT_WINDOW, MAX_PEAK_LAG, MIN_PEAKS, TORUS_THRESHOLD,
};
pub use dense::{DenseHistory, DenseSegment, DIM};
pub use integrate::{integrate, IntegratorOptions, Trajectory, ESCAPE_TOL};
