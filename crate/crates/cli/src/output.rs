//! CSV traces and the re-runnable `summary.txt`.
//!
//! Floats are written with Rust's shortest round-trip formatting, so a summary
//! read back as a config reproduces the run bit for bit.

use std::fmt::Write as _;
use std::io::{self, Write};
use std::path::Path;

use clocksense_core::ensemble::EnsembleResult;
use clocksense_core::experiments::{Spectrum, SpectrumSpec, SweepVariable};
use clocksense_core::hamiltonians::DriveScheme;
use clocksense_core::TWO_PI;

use crate::config::{calibration_name, initial_name, Experiment};

fn write_file(path: &Path, text: &str) -> io::Result<()> {
    let mut f = io::BufWriter::new(std::fs::File::create(path)?);
    f.write_all(text.as_bytes())?;
    f.flush()
}

/// `time_us`, one column per observable, then `stderr_<name>` columns.
pub fn ensemble_csv(result: &EnsembleResult) -> String {
    let mut s = String::from("time_us");
    for n in &result.names {
        write!(s, ",{n}").unwrap();
    }
    for n in &result.names {
        write!(s, ",stderr_{n}").unwrap();
    }
    s.push('\n');
    for (k, t) in result.times.iter().enumerate() {
        write!(s, "{t}").unwrap();
        for col in result.mean.iter().chain(&result.stderr) {
            write!(s, ",{}", col[k]).unwrap();
        }
        s.push('\n');
    }
    s
}

pub fn write_ensemble_csv(path: &Path, result: &EnsembleResult) -> io::Result<()> {
    write_file(path, &ensemble_csv(result))
}

/// Swept value in MHz (`value/2π`) with `P(|0⟩)` and its standard error.
pub fn spectrum_csv(spectrum: &Spectrum) -> String {
    let col = match spectrum.variable {
        SweepVariable::Omega1 => "omega1_mhz",
        SweepVariable::OmegaAc => "omega_ac_mhz",
    };
    let mut s = format!("{col},P0_p,stderr_P0_p\n");
    for r in &spectrum.rows {
        writeln!(s, "{},{},{}", r.value / TWO_PI, r.p0, r.stderr).unwrap();
    }
    s
}

pub fn write_spectrum_csv(path: &Path, spectrum: &Spectrum) -> io::Result<()> {
    write_file(path, &spectrum_csv(spectrum))
}

/// Config lines that reproduce `exp`, frequencies in rad/us and times in us.
pub fn scenario_lines(exp: &Experiment) -> Vec<String> {
    let mut v = vec![format!("experiment = {}", exp.name())];
    let freq = |k: &str, x: f64| format!("{k} = {x} rad/us");
    let time = |k: &str, x: f64| format!("{k} = {x} us");
    match exp {
        Experiment::Dephasing { spec, schemes } => {
            v.push(freq("D", spec.d));
            v.push(freq("Ex", spec.ex));
            v.push(freq("omega1", spec.omega1));
            v.push(freq("omega2", spec.omega2));
            v.push(time("T2_star", spec.t2_star));
            v.push(time("tau", spec.tau));
            v.push(format!("calibration = {}", calibration_name(spec.calibration)));
            v.push(format!("delta_omega = {}", spec.delta_omega));
            v.push(time("tau_omega", spec.tau_omega));
            v.push(format!("amplitude_initial = {}", initial_name(spec.amplitude_initial)));
            v.push(format!("frame = {}", spec.frame.name()));
            v.push(format!("stepper = {}", spec.stepper.name()));
            v.push(format!("fit = {}", spec.fit.tag()));
            v.push(format!("n_trials = {}", spec.n_trials));
            v.push(format!("base_seed = {}", spec.base_seed));
            if let Some(dt) = spec.dt {
                v.push(time("dt", dt));
            }
            for (k, s) in DriveScheme::ALL.iter().enumerate() {
                v.push(time(&format!("t_end.{}", s.name()), spec.t_end[k]));
                v.push(time(&format!("sample_interval.{}", s.name()), spec.sample_interval[k]));
                v.push(format!("guard.{} = {}", s.name(), spec.guard[k]));
            }
            let names: Vec<_> = schemes.iter().map(|s| s.name()).collect();
            v.push(format!("schemes = {}", names.join(", ")));
        }
        Experiment::Trace(s) | Experiment::Spectrum { spec: SpectrumSpec { sensing: s, .. }, .. } => {
            v.push(freq("D", s.d));
            v.push(freq("Ex", s.ex));
            v.push(freq("omega_ac", s.omega_ac));
            v.push(freq("g", s.g));
            v.push(format!("ratio = {}", s.ratio));
            v.push(time("T2_star", s.t2_star));
            v.push(time("tau", s.tau));
            v.push(format!("calibration = {}", calibration_name(s.calibration)));
            v.push(format!("delta_omega = {}", s.delta_omega));
            v.push(time("tau_omega", s.tau_omega));
            v.push(format!("amplitude_initial = {}", initial_name(s.amplitude_initial)));
            v.push(format!("model = {}", s.model.name()));
            v.push(format!("initial_state = {}", s.initial.name()));
            v.push(format!("stepper = {}", s.stepper.name()));
            v.push(format!("n_trials = {}", s.n_trials));
            v.push(format!("base_seed = {}", s.base_seed));
            v.push(time("t_end", s.t_end));
            v.push(time("sample_interval", s.sample_interval));
            v.push(format!("guard = {}", s.guard));
            if let Some(dt) = s.dt {
                v.push(time("dt", dt));
            }
            if let Experiment::Spectrum {
                spec: sp,
                center,
                half_width,
            } = exp
            {
                v.push(time("t_probe", sp.t_probe));
                v.push(format!("sweep = {}", sp.variable.name()));
                v.push(freq("sweep_center", *center));
                v.push(freq("sweep_half_width", *half_width));
                v.push(format!("sweep_points = {}", sp.grid.len()));
            }
        }
    }
    v
}

pub fn write_summary(path: &Path, scenario: &[String], comments: &[String]) -> io::Result<()> {
    let mut s = String::new();
    for c in comments {
        writeln!(s, "# {c}").unwrap();
    }
    for l in scenario {
        writeln!(s, "{l}").unwrap();
    }
    write_file(path, &s)
}
