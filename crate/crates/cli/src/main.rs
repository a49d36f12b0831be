//! `clocksense`: run canned spin-1 clock-transition experiments from a config
//! file.
//!
//! Exit codes: 0 success, 1 I/O failure, 2 configuration error, 3 physics
//! guard violated, 4 numerical failure.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod config;
mod output;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use clocksense_core::ensemble::CoherenceFit;
use clocksense_core::experiments::{
    ac_sensing_trace, ac_spectrum, dephasing_scheme, experiment_names, sensing_f_max, SensingSpec,
};
use clocksense_core::noise::OuParams;
use clocksense_core::propagator::HamiltonianSource;
use clocksense_core::{Error, ErrorKind, TWO_PI};

use config::{Experiment, RunConfig, Threads};

#[derive(Parser)]
#[command(name = "clocksense", version, about = "Spin-1 clock-transition dephasing and AC-sensing simulations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a config file.
    Run {
        config: PathBuf,
        /// Output directory (overrides `output_dir` in the config).
        #[arg(long, short)]
        output_dir: Option<PathBuf>,
        /// Worker threads, a positive integer or `auto`. Falls back to the
        /// config's `n_threads`, then `CLOCKSENSE_THREADS`.
        #[arg(long)]
        threads: Option<String>,
    },
    /// Check a config and print the resolved scenario without running it.
    Validate { config: PathBuf },
    /// List the available experiments.
    ListExperiments,
}

enum Failure {
    Config(String),
    Sim(Error),
    Io(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Sim(e)
    }
}

impl From<config::ConfigError> for Failure {
    fn from(e: config::ConfigError) -> Self {
        Failure::Config(e.to_string())
    }
}

impl Failure {
    fn report(&self, path: &Path) -> ExitCode {
        match self {
            Failure::Config(m) => {
                eprintln!("error: {}: {m}", path.display());
                ExitCode::from(2)
            }
            Failure::Io(m) => {
                eprintln!("error: {m}");
                ExitCode::from(1)
            }
            Failure::Sim(e) => {
                match e.guard_name() {
                    Some(g) => eprintln!("error [guard {g}]: {e}"),
                    None => eprintln!("error: {e}"),
                }
                ExitCode::from(match e.kind() {
                    ErrorKind::Config => 2,
                    ErrorKind::Guard => 3,
                    ErrorKind::Numerical => 4,
                })
            }
        }
    }
}

fn io_err(path: &Path) -> impl Fn(std::io::Error) -> Failure + '_ {
    move |e| Failure::Io(format!("{}: {e}", path.display()))
}

fn parse_threads(s: &str) -> Option<Threads> {
    match s.trim() {
        "auto" => Some(Threads::Auto),
        t => t.parse().ok().filter(|&n| n > 0).map(Threads::Fixed),
    }
}

/// Flag, then config, then `CLOCKSENSE_THREADS`, then all cores.
fn resolve_threads(flag: Option<&str>, cfg: Option<Threads>) -> Result<Threads, Failure> {
    if let Some(f) = flag {
        return parse_threads(f).ok_or_else(|| Failure::Config(format!("--threads: '{f}' is not 'auto' or a positive integer")));
    }
    if let Some(t) = cfg {
        return Ok(t);
    }
    match std::env::var("CLOCKSENSE_THREADS") {
        Ok(v) => parse_threads(&v)
            .ok_or_else(|| Failure::Config(format!("CLOCKSENSE_THREADS: '{v}' is not 'auto' or a positive integer"))),
        Err(_) => Ok(Threads::Auto),
    }
}

/// Derived quantities and guard checks shared by `validate` and `run`.
struct Plan {
    notes: Vec<String>,
    warnings: Vec<String>,
}

fn noise_notes(notes: &mut Vec<String>, t2_star: f64, tau: f64, cal: clocksense_core::noise::DephasingCalibration) -> Result<(), Error> {
    if t2_star.is_finite() {
        let p = OuParams::from_dephasing(t2_star, tau, cal)?;
        notes.push(format!(
            "c = {:.6} (rad/us)^2/us ({}), stationary std {:.6} rad/us",
            p.diffusion,
            config::calibration_name(cal),
            p.stationary_std()
        ));
    } else {
        notes.push("system noise off (T2_star = inf)".into());
    }
    Ok(())
}

fn amplitude_note(notes: &mut Vec<String>, omega1: f64, delta: f64, tau_omega: f64) -> Result<(), Error> {
    if delta > 0.0 && omega1 > 0.0 {
        let p = OuParams::amplitude(omega1, delta, tau_omega)?;
        notes.push(format!("c_Omega = {:.6e} (rad/us)^2/us", p.diffusion));
    }
    Ok(())
}

fn sensing_plan(s: &SensingSpec, t_end: f64, sample_interval: f64, notes: &mut Vec<String>, warnings: &mut Vec<String>) -> Result<(), Error> {
    let drive = s.resonant_drive()?;
    notes.push(format!(
        "resonant drive: Omega1 = {} rad/us ({:.4} MHz), Omega2 = {} rad/us ({:.4} MHz)",
        drive.omega1,
        drive.omega1 / TWO_PI,
        drive.omega2,
        drive.omega2 / TWO_PI
    ));
    noise_notes(notes, s.t2_star, s.tau, s.calibration)?;
    amplitude_note(notes, drive.omega1, s.delta_omega, s.tau_omega)?;
    if s.t2_star.is_finite() {
        notes.push(format!(
            "sensitivity ratio g sqrt(T2_star) / Ex = {:.4e} us^(1/2), to be divided by sqrt(T2)",
            s.g * s.t2_star.sqrt() / s.ex
        ));
    }
    warnings.extend(s.full_source(&drive)?.warnings());
    let grid = s.integration_to(t_end, sample_interval).resolve(sensing_f_max(s)?)?;
    notes.push(format!("{} model, dt = {:.6e} us, {} steps", s.model.name(), grid.dt, grid.n_steps));
    Ok(())
}

fn plan(exp: &Experiment) -> Result<Plan, Error> {
    let mut notes = Vec::new();
    let mut warnings = Vec::new();
    match exp {
        Experiment::Dephasing { spec, schemes } => {
            noise_notes(&mut notes, spec.t2_star, spec.tau, spec.calibration)?;
            amplitude_note(&mut notes, spec.omega1, spec.delta_omega, spec.tau_omega)?;
            for &scheme in schemes {
                let h = spec.hamiltonian(scheme)?;
                warnings.extend(h.warnings().into_iter().map(|w| format!("{}: {w}", scheme.name())));
                let k = clocksense_core::hamiltonians::DriveScheme::ALL.iter().position(|&s| s == scheme).unwrap();
                let grid = spec.integration(scheme).resolve(h.max_frequency())?;
                notes.push(format!(
                    "{}: dt = {:.6e} us, {} steps to {} us",
                    scheme.name(),
                    grid.dt,
                    grid.n_steps,
                    spec.t_end[k]
                ));
            }
        }
        Experiment::Trace(s) => sensing_plan(s, s.t_end, s.sample_interval, &mut notes, &mut warnings)?,
        Experiment::Spectrum { spec, .. } => {
            sensing_plan(&spec.sensing, spec.t_probe, spec.t_probe, &mut notes, &mut warnings)?;
            notes.push(format!(
                "sweep {} over [{}, {}] rad/us, {} points, predicted {} rad/us",
                spec.variable.name(),
                spec.grid[0],
                spec.grid[spec.grid.len() - 1],
                spec.grid.len(),
                spec.predicted()?
            ));
        }
    }
    Ok(Plan { notes, warnings })
}

fn load(path: &Path) -> Result<RunConfig, Failure> {
    let cfg = RunConfig::load(path)?;
    for (line, key) in &cfg.unused {
        eprintln!("warning: line {line}: '{key}' is not used by {}", cfg.experiment.name());
    }
    Ok(cfg)
}

fn validate(path: &Path) -> Result<(), Failure> {
    let cfg = load(path)?;
    let plan = plan(&cfg.experiment)?;
    for l in output::scenario_lines(&cfg.experiment) {
        println!("{l}");
    }
    for n in &plan.notes {
        println!("# {n}");
    }
    for w in &plan.warnings {
        eprintln!("warning: {w}");
    }
    println!("OK");
    Ok(())
}

fn fit_note(name: &str, fit: &CoherenceFit) -> String {
    let mut s = if fit.lower_bound {
        format!("T2[{name}] > {} us (lower bound, {})", fit.t2, fit.method.tag())
    } else {
        format!("T2[{name}] = {:.4} us ({}, envelope {:?})", fit.t2, fit.method.tag(), fit.envelope)
    };
    if let Some(p) = fit.stretch_exponent {
        s.push_str(&format!(", stretch exponent {p:.3}"));
    }
    s
}

fn run(path: &Path, output_dir: Option<PathBuf>, threads: Option<String>) -> Result<(), Failure> {
    let cfg = load(path)?;
    let threads = resolve_threads(threads.as_deref(), cfg.threads)?;
    let plan = plan(&cfg.experiment)?;
    for w in &plan.warnings {
        eprintln!("warning: {w}");
    }
    let n_threads = match threads {
        Threads::Fixed(n) => n,
        Threads::Auto => std::thread::available_parallelism().map_or(1, |n| n.get()),
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(n_threads)
        .build()
        .map_err(|e| Failure::Io(format!("thread pool: {e}")))?;
    let dir = output_dir.unwrap_or(cfg.output_dir.clone());
    std::fs::create_dir_all(&dir).map_err(io_err(&dir))?;

    let mut notes = vec![format!("clocksense {}", env!("CARGO_PKG_VERSION"))];
    notes.extend(plan.notes);
    let (seed, trials) = match &cfg.experiment {
        Experiment::Dephasing { spec, .. } => (spec.base_seed, spec.n_trials),
        Experiment::Trace(s) => (s.base_seed, s.n_trials),
        Experiment::Spectrum { spec, .. } => (spec.sensing.base_seed, spec.sensing.n_trials),
    };
    notes.push(format!("base_seed {seed}, {trials} trials, {n_threads} threads (results do not depend on the thread count)"));

    pool.install(|| -> Result<(), Failure> {
        match &cfg.experiment {
            Experiment::Dephasing { spec, schemes } => {
                for &scheme in schemes {
                    let r = dephasing_scheme(spec, scheme)?;
                    let file = dir.join(format!("dephasing_{}.csv", scheme.name()));
                    output::write_ensemble_csv(&file, &r.result).map_err(io_err(&file))?;
                    notes.push(fit_note(scheme.name(), &r.fit));
                    if let Some((mean, peak)) = r.leakage {
                        notes.push(format!("{}: P(-1) mean {mean:.3e}, peak {peak:.3e}", scheme.name()));
                        if !r.leakage_ok() {
                            eprintln!("warning: {}: leakage to |-1> above limit (mean {mean:.3e})", scheme.name());
                        }
                    }
                }
            }
            Experiment::Trace(s) => {
                let r = ac_sensing_trace(s)?;
                let file = dir.join("trace.csv");
                output::write_ensemble_csv(&file, &r.result).map_err(io_err(&file))?;
                notes.push(format!(
                    "signal amplitude {:.4e}, max stderr {:.4e}, ratio {:.2}",
                    r.amplitude,
                    r.max_stderr,
                    r.snr()
                ));
            }
            Experiment::Spectrum { spec, .. } => {
                let r = ac_spectrum(spec)?;
                let file = dir.join("spectrum.csv");
                output::write_spectrum_csv(&file, &r).map_err(io_err(&file))?;
                let res = &r.resonance;
                notes.push(format!(
                    "{} at {} rad/us (predicted {} rad/us), depth {:.4}, FWHM {}, confirmed {}",
                    if res.dip { "dip" } else { "peak" },
                    res.extremum,
                    r.predicted,
                    res.depth,
                    res.fwhm.map_or("n/a".to_string(), |w| format!("{w:.4} rad/us")),
                    r.resonance_confirmed()
                ));
            }
        }
        Ok(())
    })?;

    for n in &notes[1..] {
        println!("{n}");
    }
    let file = dir.join("summary.txt");
    output::write_summary(&file, &output::scenario_lines(&cfg.experiment), &notes).map_err(io_err(&file))?;
    println!("wrote {}", dir.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::ListExperiments => {
            for name in experiment_names() {
                println!("{name}");
            }
            ExitCode::SUCCESS
        }
        Command::Validate { config } => match validate(&config) {
            Ok(()) => ExitCode::SUCCESS,
            Err(f) => f.report(&config),
        },
        Command::Run {
            config,
            output_dir,
            threads,
        } => match run(&config, output_dir, threads) {
            Ok(()) => ExitCode::SUCCESS,
            Err(f) => f.report(&config),
        },
    }
}
