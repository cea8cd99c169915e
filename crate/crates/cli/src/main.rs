//! Command-line front end. Every subcommand writes CSV with `#` header
//! comments to stdout, or one file per table under `--out`. Column orders
//! are listed in FORMATS.md at the workspace root.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod output;
mod svg;

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use wanewave::dynamics::{IntegratorOptions, RunConfig, DEFAULT_TRANSIENT, DEFAULT_WINDOW};
use wanewave::model::ParamsDocument;
use wanewave::scan::SweepConfig;
use wanewave::{Error, ModelParams};

use commands::{AttractorOptions, DiagramOptions, Report, SimulateOptions};

#[derive(Debug, Parser)]
#[command(
    name = "wanewave",
    version,
    about = "Stability switches, eigenvalues and long-term dynamics of an SIRS model with waning and boosting of immunity",
    arg_required_else_help = true
)]
struct Cli {
    #[command(flatten)]
    params: ParamArgs,

    /// Worker threads for parallel scans [default: available cores]
    #[arg(long, global = true, env = "WANEWAVE_JOBS")]
    jobs: Option<usize>,

    /// Seed for randomized history sets
    #[arg(long, global = true, default_value_t = 1)]
    seed: u64,

    /// Directory receiving one CSV per table instead of stdout
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

/// Model parameters. Flags override values from `--params`; anything left
/// unset falls back to the pertussis defaults.
#[derive(Debug, Args)]
struct ParamArgs {
    /// JSON file with any of beta, r0, gamma, d, nu, tau
    #[arg(long, global = true, value_name = "FILE")]
    params: Option<PathBuf>,
    #[arg(long, global = true)]
    beta: Option<f64>,
    /// Sets beta = r0 (gamma + d) unless --beta is also given
    #[arg(long, global = true)]
    r0: Option<f64>,
    #[arg(long, global = true)]
    gamma: Option<f64>,
    #[arg(long, global = true)]
    d: Option<f64>,
    /// Boosting force
    #[arg(long, global = true)]
    nu: Option<f64>,
    /// Maximal duration of immunity (years)
    #[arg(long, global = true)]
    tau: Option<f64>,
}

#[derive(Debug, Clone, Subcommand, Serialize)]
#[serde(rename_all = "kebab-case")]
enum Command {
    /// Endemic equilibrium at (nu, tau)
    Equilibrium,
    /// Stability switches along tau for one nu
    Switches {
        /// Print the stability intervals instead of the switch points
        #[arg(long)]
        intervals: bool,
    },
    /// Switch points over a grid of nu
    Region {
        #[arg(long, default_value_t = 0.5)]
        nu_min: f64,
        #[arg(long, default_value_t = 5.0)]
        nu_max: f64,
        #[arg(long, default_value_t = 20)]
        nu_steps: usize,
        #[arg(long)]
        intervals: bool,
    },
    /// Stability verdicts over a (d, nu) grid at fixed tau
    RegionDnu {
        #[arg(long, default_value_t = 0.005)]
        d_min: f64,
        #[arg(long, default_value_t = 0.05)]
        d_max: f64,
        #[arg(long, default_value_t = 20)]
        d_steps: usize,
        #[arg(long, default_value_t = 0.0)]
        nu_min: f64,
        #[arg(long, default_value_t = 5.0)]
        nu_max: f64,
        #[arg(long, default_value_t = 20)]
        nu_steps: usize,
    },
    /// Rightmost characteristic roots from the pseudospectral matrix
    Eigs {
        /// Collocation degree
        #[arg(long, default_value_t = 40)]
        m: usize,
        #[arg(long, default_value_t = 10)]
        count: usize,
    },
    /// Hopf-location error against collocation degree
    HopfConverge {
        #[arg(long, value_delimiter = ',', default_value = "5,10,15,20,25,31")]
        m_list: Vec<usize>,
        /// Index of the reference switch point [default: the last one]
        #[arg(long)]
        switch: Option<usize>,
    },
    /// Integrate from a constant history
    Simulate {
        /// Initial S [default: S* of the endemic equilibrium]
        #[arg(long)]
        s0: Option<f64>,
        /// Initial I [default: 1.01 I*]
        #[arg(long)]
        i0: Option<f64>,
        #[arg(long, default_value_t = 100.0)]
        tmax: f64,
        /// Sampling interval of the output
        #[arg(long, default_value_t = 0.05)]
        dt: f64,
        #[arg(long, default_value_t = 1e-9)]
        rtol: f64,
        #[arg(long, default_value_t = 1e-12)]
        atol: f64,
        /// Phase-plane figure
        #[arg(long, value_name = "FILE")]
        svg: Option<PathBuf>,
    },
    /// Distinct attractors reached from a set of histories
    Attractors {
        /// Lattice size of the constant-history grid
        #[arg(long, default_value_t = 6)]
        grid: usize,
        /// Additional seeded random histories
        #[arg(long, default_value_t = 24)]
        random: usize,
        #[arg(long, default_value_t = DEFAULT_TRANSIENT)]
        transient: f64,
        #[arg(long, default_value_t = DEFAULT_WINDOW)]
        window: f64,
        #[arg(long, value_name = "FILE")]
        svg: Option<PathBuf>,
    },
    /// Warm-started bifurcation sweep over tau
    Diagram {
        #[arg(long)]
        tau_min: f64,
        #[arg(long)]
        tau_max: f64,
        #[arg(long, default_value_t = 31)]
        steps: usize,
        /// Run both sweep directions
        #[arg(long)]
        both: bool,
        #[arg(long, default_value_t = 300.0)]
        transient: f64,
        #[arg(long, default_value_t = 60.0)]
        window: f64,
        #[arg(long, value_name = "FILE")]
        svg: Option<PathBuf>,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Equilibrium => "equilibrium",
            Command::Switches { .. } => "switches",
            Command::Region { .. } => "region",
            Command::RegionDnu { .. } => "region-dnu",
            Command::Eigs { .. } => "eigs",
            Command::HopfConverge { .. } => "hopf-converge",
            Command::Simulate { .. } => "simulate",
            Command::Attractors { .. } => "attractors",
            Command::Diagram { .. } => "diagram",
        }
    }
}

enum Failure {
    /// Bad flags, parameters or files: exit 2.
    Input(String),
    /// The computation itself failed: exit 1.
    Numerical(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidParameter(_)
            | Error::NoEndemicEquilibrium { .. }
            | Error::DomainError { .. }
            | Error::DegenerateDelay { .. }
            | Error::OutsideFeasibleInterval { .. }
            | Error::WindowTooShort { .. } => Failure::Input(e.to_string()),
            _ => Failure::Numerical(e.to_string()),
        }
    }
}

fn resolve_params(args: &ParamArgs) -> Result<ModelParams, Failure> {
    let mut doc = match &args.params {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Failure::Input(format!("cannot read {}: {e}", path.display())))?;
            ParamsDocument::from_json(&text)?
        }
        None => ParamsDocument::default(),
    };
    if args.r0.is_some() {
        doc.r0 = args.r0;
        doc.beta = None;
    }
    for (slot, flag) in [
        (&mut doc.beta, args.beta),
        (&mut doc.gamma, args.gamma),
        (&mut doc.d, args.d),
        (&mut doc.nu, args.nu),
        (&mut doc.tau, args.tau),
    ] {
        if flag.is_some() {
            *slot = flag;
        }
    }
    Ok(doc.resolve()?)
}

#[derive(Serialize)]
struct Echo<'a> {
    command: &'a Command,
    params: &'a ModelParams,
    seed: u64,
}

fn run_command(cli: &Cli, p: &ModelParams) -> Result<Report, Error> {
    let report = match cli.command.clone() {
        Command::Equilibrium => commands::equilibrium(p)?,
        Command::Switches { intervals } => commands::switches(p, intervals)?,
        Command::Region {
            nu_min,
            nu_max,
            nu_steps,
            intervals,
        } => commands::region(p, &commands::grid(nu_min, nu_max, nu_steps)?, intervals)?,
        Command::RegionDnu {
            d_min,
            d_max,
            d_steps,
            nu_min,
            nu_max,
            nu_steps,
        } => commands::region_d_nu(
            p,
            &commands::grid(d_min, d_max, d_steps)?,
            &commands::grid(nu_min, nu_max, nu_steps)?,
        )?,
        Command::Eigs { m, count } => commands::eigs(p, m, count)?,
        Command::HopfConverge { m_list, switch } => commands::hopf_converge(p, &m_list, switch)?,
        Command::Simulate {
            s0,
            i0,
            tmax,
            dt,
            rtol,
            atol,
            svg,
        } => commands::simulate(
            p,
            &SimulateOptions {
                s0,
                i0,
                tmax,
                dt,
                rtol,
                atol,
                svg,
            },
        )?,
        Command::Attractors {
            grid,
            random,
            transient,
            window,
            svg,
        } => commands::attractors(
            p,
            &AttractorOptions {
                grid,
                random,
                seed: cli.seed,
                run: RunConfig {
                    transient,
                    window,
                    integrator: IntegratorOptions::default(),
                },
                svg,
            },
        )?,
        Command::Diagram {
            tau_min,
            tau_max,
            steps,
            both,
            transient,
            window,
            svg,
        } => commands::diagram(
            p,
            &DiagramOptions {
                tau_min,
                tau_max,
                steps,
                both,
                sweep: SweepConfig {
                    transient,
                    window,
                    ..Default::default()
                },
                svg,
            },
        )?,
    };
    Ok(report)
}

fn run(cli: Cli) -> Result<(), Failure> {
    if let Some(jobs) = cli.jobs {
        if jobs == 0 {
            return Err(Failure::Input("--jobs must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .map_err(|e| Failure::Numerical(e.to_string()))?;
    }
    let p = resolve_params(&cli.params)?;
    let mut report = run_command(&cli, &p)?;

    let echo = serde_json::to_string(&Echo {
        command: &cli.command,
        params: &p,
        seed: cli.seed,
    })
    .map_err(|e| Failure::Numerical(e.to_string()))?;
    for t in &mut report.tables {
        t.prepend_comments([
            format!("wanewave {}: {} table", cli.command.name(), t.name),
            format!("config: {echo}"),
        ]);
    }

    let io_err = |e: std::io::Error| Failure::Numerical(format!("write failed: {e}"));
    match &cli.out {
        Some(dir) => {
            std::fs::create_dir_all(dir)
                .map_err(|e| Failure::Input(format!("cannot create {}: {e}", dir.display())))?;
            for t in &report.tables {
                t.save(dir).map_err(io_err)?;
            }
        }
        None => {
            let stdout = std::io::stdout();
            let mut lock = stdout.lock();
            report.tables[report.primary]
                .write_to(&mut lock)
                .map_err(io_err)?;
            lock.flush().map_err(io_err)?;
        }
    }
    if let Some((path, plot)) = &report.figure {
        std::fs::write(path, plot.render()).map_err(io_err)?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Input(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Numerical(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}
