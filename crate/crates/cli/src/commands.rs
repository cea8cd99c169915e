//! One function per subcommand. Each returns the tables it produced and,
//! when asked for, an SVG figure.

use std::path::PathBuf;

use wanewave::dynamics::{
    bistability_scan, default_history_grid, integrate, random_histories, run_and_classify,
    IntegratorOptions, OrbitKind, RunConfig,
};
use wanewave::eigen::{hopf_convergence_study, rightmost_roots};
use wanewave::model::{endemic_equilibrium, endemic_infected_without_boosting, endemic_root_count};
use wanewave::scan::{sweep_both, sweep_diagram, DiagramRow, SweepConfig, SweepDirection};
use wanewave::switches::{
    stability_profile, stability_region_2d, stability_region_d_nu, StabilityProfile,
};
use wanewave::{Error, History, ModelParams, Result};

use crate::output::{num, opt, Table};
use crate::svg::{Mark, Plot, Series};

pub struct Report {
    pub tables: Vec<Table>,
    /// Table written to stdout when no output directory is given.
    pub primary: usize,
    pub figure: Option<(PathBuf, Plot)>,
}

impl Report {
    fn single(table: Table) -> Self {
        Self {
            tables: vec![table],
            primary: 0,
            figure: None,
        }
    }
}

const SWITCH_COLUMNS: &[&str] = &["nu", "tau_star", "omega", "branch", "n", "delta"];
const INTERVAL_COLUMNS: &[&str] = &["nu", "tau_lo", "tau_hi", "verdict", "pair_count"];

fn push_profile(prof: &StabilityProfile, switches: &mut Table, intervals: &mut Table) {
    let nu = prof.params.nu;
    for sp in &prof.switch_points {
        switches.push(vec![
            num(nu),
            num(sp.tau_star),
            num(sp.omega),
            sp.branch.name().into(),
            sp.n.to_string(),
            sp.delta().to_string(),
        ]);
    }
    for iv in &prof.intervals {
        intervals.push(vec![
            num(nu),
            num(iv.lo),
            num(iv.hi),
            if iv.stable { "stable" } else { "unstable" }.into(),
            iv.unstable_pairs.to_string(),
        ]);
    }
    for tz in &prof.tangential {
        switches.comment(format!(
            "tangential zero of S_{} ({}) at tau = {}",
            tz.n, tz.branch, tz.tau
        ));
    }
}

pub fn equilibrium(p: &ModelParams) -> Result<Report> {
    let eq = endemic_equilibrium(p)?;
    let mut t = Table::new(
        "equilibrium",
        &[
            "beta",
            "gamma",
            "d",
            "nu",
            "tau",
            "r0",
            "s",
            "i",
            "r",
            "i_closed_form",
        ],
    );
    let roots = endemic_root_count(p, 2000);
    if roots > 1 {
        t.comment(format!(
            "warning: the endemic condition changes sign {roots} times"
        ));
    }
    let closed = (p.nu == 0.0).then(|| endemic_infected_without_boosting(p));
    t.push(vec![
        num(p.beta),
        num(p.gamma),
        num(p.d),
        num(p.nu),
        num(p.tau),
        num(p.r0()),
        num(eq.s),
        num(eq.i),
        num(1.0 - eq.s - eq.i),
        opt(closed),
    ]);
    Ok(Report::single(t))
}

pub fn switches(p: &ModelParams, intervals_first: bool) -> Result<Report> {
    let prof = stability_profile(p)?;
    let mut sw = Table::new("switches", SWITCH_COLUMNS);
    let mut iv = Table::new("intervals", INTERVAL_COLUMNS);
    push_profile(&prof, &mut sw, &mut iv);
    Ok(Report {
        tables: vec![sw, iv],
        primary: intervals_first as usize,
        figure: None,
    })
}

pub fn grid(lo: f64, hi: f64, steps: usize) -> Result<Vec<f64>> {
    if steps == 0 || !(lo <= hi) || !lo.is_finite() || !hi.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "bad grid [{lo}, {hi}] with {steps} steps"
        )));
    }
    if steps == 1 {
        return Ok(vec![lo]);
    }
    Ok((0..steps)
        .map(|k| lo + (hi - lo) * k as f64 / (steps - 1) as f64)
        .collect())
}

pub fn region(p: &ModelParams, nus: &[f64], intervals_first: bool) -> Result<Report> {
    p.validate()?;
    let scan = stability_region_2d(nus, p);
    let mut sw = Table::new("region", SWITCH_COLUMNS);
    let mut iv = Table::new("region_intervals", INTERVAL_COLUMNS);
    for slice in &scan.slices {
        match &slice.profile {
            Ok(prof) => push_profile(prof, &mut sw, &mut iv),
            Err(e) => {
                sw.comment(format!("nu = {}: {e}", slice.nu));
                iv.comment(format!("nu = {}: {e}", slice.nu));
            }
        }
    }
    Ok(Report {
        tables: vec![sw, iv],
        primary: intervals_first as usize,
        figure: None,
    })
}

pub fn region_d_nu(p: &ModelParams, ds: &[f64], nus: &[f64]) -> Result<Report> {
    if !(p.tau > 0.0) {
        return Err(Error::InvalidParameter(
            "region-dnu needs a positive --tau".into(),
        ));
    }
    let cells = stability_region_d_nu(ds, nus, p.tau, p);
    let mut t = Table::new("region_dnu", &["d", "nu", "tau", "r0", "verdict"]);
    for c in cells {
        let verdict = match &c.unstable {
            Ok(true) => "unstable".to_string(),
            Ok(false) => "stable".to_string(),
            Err(e) => {
                t.comment(format!("d = {}, nu = {}: {e}", c.d, c.nu));
                "error".to_string()
            }
        };
        t.push(vec![
            num(c.d),
            num(c.nu),
            num(p.tau),
            num(p.with_d(c.d).r0()),
            verdict,
        ]);
    }
    Ok(Report::single(t))
}

pub fn eigs(p: &ModelParams, m: usize, count: usize) -> Result<Report> {
    let roots = rightmost_roots(p, count, m)?;
    let mut t = Table::new("eigs", &["re", "im", "residual", "source"]);
    for r in roots {
        t.push(vec![
            num(r.lambda.re),
            num(r.lambda.im),
            num(r.residual),
            r.source.to_string(),
        ]);
    }
    Ok(Report::single(t))
}

pub fn hopf_converge(p: &ModelParams, ms: &[usize], switch: Option<usize>) -> Result<Report> {
    let prof = stability_profile(p)?;
    let n = prof.switch_points.len();
    let idx = switch.unwrap_or(n.saturating_sub(1));
    let sp = prof.switch_points.get(idx).ok_or_else(|| {
        Error::InvalidParameter(format!(
            "switch index {idx} out of range ({n} switch points)"
        ))
    })?;
    let rows = hopf_convergence_study(p, ms, sp.tau_star, sp.omega)?;
    let mut t = Table::new("hopf_converge", &["m", "tau_star", "error"]);
    t.comment(format!(
        "reference switch {idx}: tau = {}, omega = {}",
        sp.tau_star, sp.omega
    ));
    for r in rows {
        t.push(vec![r.m.to_string(), opt(r.tau_star), num(r.error)]);
    }
    Ok(Report::single(t))
}

pub struct SimulateOptions {
    pub s0: Option<f64>,
    pub i0: Option<f64>,
    pub tmax: f64,
    pub dt: f64,
    pub rtol: f64,
    pub atol: f64,
    pub svg: Option<PathBuf>,
}

pub fn simulate(p: &ModelParams, o: &SimulateOptions) -> Result<Report> {
    if !(o.dt > 0.0) || !(o.tmax > 0.0) {
        return Err(Error::InvalidParameter(
            "--tmax and --dt must be positive".into(),
        ));
    }
    let (s0, i0) = match (o.s0, o.i0) {
        (Some(s), Some(i)) => (s, i),
        (s, i) => {
            let eq = endemic_equilibrium(p)?;
            (s.unwrap_or(eq.s), i.unwrap_or(eq.i * 1.01))
        }
    };
    let opts = IntegratorOptions::default().with_tol(o.rtol, o.atol);
    let traj = integrate(p, &History::constant(s0, i0), o.tmax, &opts)?;
    let samples = traj.sample(o.dt);
    let mut t = Table::new("simulate", &["t", "S", "I", "Y"]);
    t.comment(format!("history: S = {s0}, I = {i0} on [-tau, 0]"));
    for (time, y) in &samples {
        t.push(vec![num(*time), num(y[0]), num(y[1]), num(y[2])]);
    }
    let figure = o.svg.clone().map(|path| {
        (
            path,
            Plot {
                title: format!("nu = {}, tau = {}", p.nu, p.tau),
                x_label: "S".into(),
                y_label: "I".into(),
                series: vec![Series {
                    label: format!("orbit on [0, {}]", o.tmax),
                    points: samples.iter().map(|(_, y)| (y[0], y[1])).collect(),
                    mark: Mark::Line,
                }],
            },
        )
    });
    Ok(Report {
        tables: vec![t],
        primary: 0,
        figure,
    })
}

pub struct AttractorOptions {
    pub grid: usize,
    pub random: usize,
    pub seed: u64,
    pub run: RunConfig,
    pub svg: Option<PathBuf>,
}

pub fn attractors(p: &ModelParams, o: &AttractorOptions) -> Result<Report> {
    let mut histories = default_history_grid(p, o.grid);
    histories.extend(random_histories(o.random, o.seed));
    let scan = bistability_scan(p, &histories, &o.run)?;
    let mut t = Table::new(
        "attractors",
        &[
            "index",
            "kind",
            "i_min",
            "i_max",
            "period",
            "peak_dispersion",
            "peak_lag",
            "basin_size",
            "s0",
            "i0",
        ],
    );
    t.comment(format!("{} histories", histories.len()));
    for (k, e) in &scan.failures {
        t.comment(format!("history {k}: {e}"));
    }
    let mut series = Vec::new();
    for (idx, a) in scan.attractors.iter().enumerate() {
        let s = &a.summary;
        let first = a.basin_samples[0];
        let h0 = histories[first].eval(0.0);
        t.push(vec![
            idx.to_string(),
            s.kind.to_string(),
            num(s.i_min),
            num(s.i_max),
            opt(s.period),
            num(s.peak_dispersion),
            s.peak_lag.to_string(),
            a.basin_samples.len().to_string(),
            num(h0.s),
            num(h0.i),
        ]);
        if o.svg.is_some() {
            let (_, traj) = run_and_classify(p, &histories[first], &o.run)?;
            let dt = (o.run.window / 4000.0).max(1e-3);
            series.push(Series {
                label: format!(
                    "{idx}: {}{}",
                    s.kind,
                    s.period
                        .map(|t| format!(", period {t:.3}"))
                        .unwrap_or_default()
                ),
                points: traj
                    .sample(dt)
                    .into_iter()
                    .filter(|(time, _)| *time >= o.run.transient)
                    .map(|(_, y)| (y[0], y[1]))
                    .collect(),
                mark: if s.kind == OrbitKind::Equilibrium {
                    Mark::Dots
                } else {
                    Mark::Line
                },
            });
        }
    }
    let figure = o.svg.clone().map(|path| {
        (
            path,
            Plot {
                title: format!("attractors at nu = {}, tau = {}", p.nu, p.tau),
                x_label: "S".into(),
                y_label: "I".into(),
                series,
            },
        )
    });
    Ok(Report {
        tables: vec![t],
        primary: 0,
        figure,
    })
}

pub struct DiagramOptions {
    pub tau_min: f64,
    pub tau_max: f64,
    pub steps: usize,
    pub both: bool,
    pub sweep: SweepConfig,
    pub svg: Option<PathBuf>,
}

pub fn diagram(p: &ModelParams, o: &DiagramOptions) -> Result<Report> {
    let rows: Vec<DiagramRow> = if o.both {
        let (up, down) = sweep_both(p, o.tau_min, o.tau_max, o.steps, &o.sweep)?;
        up.into_iter().chain(down).collect()
    } else {
        sweep_diagram(
            p,
            o.tau_min,
            o.tau_max,
            o.steps,
            SweepDirection::Up,
            &o.sweep,
        )?
    };
    let mut t = Table::new(
        "diagram",
        &["tau", "sweep", "kind", "i_min", "i_max", "period"],
    );
    for r in &rows {
        if let Some(e) = &r.error {
            t.comment(format!("{} tau = {}: {e}", r.sweep, r.tau));
        }
        t.push(vec![
            num(r.tau),
            r.sweep.to_string(),
            r.summary.kind.to_string(),
            num(r.summary.i_min),
            num(r.summary.i_max),
            opt(r.summary.period),
        ]);
    }
    let figure = match &o.svg {
        Some(path) => Some((path.clone(), diagram_plot(p, o, &rows)?)),
        None => None,
    };
    Ok(Report {
        tables: vec![t],
        primary: 0,
        figure,
    })
}

/// Endemic equilibrium against `τ` with the `I` envelope of every cycle row.
fn diagram_plot(p: &ModelParams, o: &DiagramOptions, rows: &[DiagramRow]) -> Result<Plot> {
    let taus = grid(o.tau_min, o.tau_max, 200)?;
    let mut eq_line = Vec::new();
    for tau in taus {
        eq_line.push((tau, endemic_equilibrium(&p.with_tau(tau))?.i));
    }
    let mut series = vec![Series {
        label: "endemic equilibrium".into(),
        points: eq_line,
        mark: Mark::Line,
    }];
    for dir in [SweepDirection::Up, SweepDirection::Down] {
        let pts: Vec<(f64, f64)> = rows
            .iter()
            .filter(|r| {
                r.sweep == dir && matches!(r.summary.kind, OrbitKind::Cycle | OrbitKind::Torus)
            })
            .flat_map(|r| [(r.tau, r.summary.i_min), (r.tau, r.summary.i_max)])
            .collect();
        if !pts.is_empty() {
            series.push(Series {
                label: format!("oscillation envelope ({dir} sweep)"),
                points: pts,
                mark: Mark::Dots,
            });
        }
    }
    Ok(Plot {
        title: format!("nu = {}", p.nu),
        x_label: "tau (years)".into(),
        y_label: "I".into(),
        series,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grids_include_both_ends() {
        assert_eq!(grid(1.0, 2.0, 3).unwrap(), vec![1.0, 1.5, 2.0]);
        assert_eq!(grid(1.0, 1.0, 1).unwrap(), vec![1.0]);
        assert!(grid(2.0, 1.0, 3).is_err());
        assert!(grid(0.0, 1.0, 0).is_err());
    }

    #[test]
    fn switches_report_puts_intervals_second() {
        let r = switches(&ModelParams::pertussis(4.8, 1.0), false).unwrap();
        assert_eq!(r.tables[0].len(), 4);
        assert_eq!(r.tables[1].len(), 5);
        assert_eq!(r.primary, 0);
    }

    #[test]
    fn closed_form_only_without_boosting() {
        let r = equilibrium(&ModelParams::pertussis(1.0, 7.0)).unwrap();
        assert!(r.tables[0].render().trim_end().ends_with(','));
    }
}
