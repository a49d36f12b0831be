//! Canned protocols: four-scheme dephasing comparison, AC-field sensing traces
//! and detected spectra.

use rayon::prelude::*;

use crate::effective::{resonant_omega1, BasisTag, EffectiveKind, EffectiveSpec};
use crate::ensemble::{fit_coherence, run_ensemble_stream, CoherenceFit, EnsembleResult, FitMethod};
use crate::error::{Error, Result};
use crate::hamiltonians::{
    DriveParams, DriveScheme, Frame, HamiltonianSpec, SignalParams, StaticParams, DEFAULT_D,
    DEFAULT_MAX_OMEGA2_RATIO,
};
use crate::noise::{ChannelSpec, DephasingCalibration, InitialCondition, NoiseConfig, OuParams};
use crate::propagator::{evolve, HamiltonianSource, IntegrationConfig, Observable, Stepper, DEFAULT_GUARD};
use crate::spinops::{c, projector, QubitState, SpinState};
use crate::{mhz, TWO_PI};

/// Relative tolerance on `2Eₓ − 2Ω₁ − 2Ω₂ = ω_ac` for sensing traces.
pub const RESONANCE_TOL: f64 = 1e-9;
/// Monitor threshold on the time-averaged `|−1⟩` population.
pub const LEAKAGE_LIMIT: f64 = 0.1;

pub fn experiment_names() -> [&'static str; 3] {
    ["dephasing_comparison", "ac_sensing_trace", "ac_spectrum"]
}

fn noise_config(
    t2_star: f64,
    tau: f64,
    calibration: DephasingCalibration,
    amplitude: Option<(f64, f64, f64, InitialCondition)>,
) -> Result<NoiseConfig> {
    // an infinite T₂* switches the system channel off
    let system = if t2_star.is_infinite() && t2_star > 0.0 {
        None
    } else {
        Some(ChannelSpec {
            params: OuParams::from_dephasing(t2_star, tau, calibration)?,
            initial: InitialCondition::Stationary,
        })
    };
    let amplitude = match amplitude {
        Some((omega1, rel, tau_omega, initial)) if rel > 0.0 => Some(ChannelSpec {
            params: OuParams::amplitude(omega1, rel, tau_omega)?,
            initial,
        }),
        _ => None,
    };
    Ok(NoiseConfig {
        system,
        amplitude,
        magnetic: None,
    })
}

/// Basis in which a scheme's coherence is read out.
pub fn scheme_tag(scheme: DriveScheme) -> BasisTag {
    match scheme {
        DriveScheme::None => BasisTag::Clock,
        DriveScheme::Linear => BasisTag::Linear,
        DriveScheme::Orthogonal => BasisTag::Orthogonal,
        DriveScheme::PhaseModulated => BasisTag::PhaseMod,
    }
}

fn scheme_index(scheme: DriveScheme) -> usize {
    DriveScheme::ALL.iter().position(|&s| s == scheme).expect("listed")
}

/// Four-scheme dephasing comparison. Defaults:
/// `Ω₁ = 2π·10`, `Ω₂ = 2π·1`, `Eₓ = 2π·24`, `T₂* = 3 μs`, `τ = 20 μs`,
/// `δ_Ω = 0.01`, `τ_Ω = 500 μs`.
#[derive(Debug, Clone, PartialEq)]
pub struct DephasingSpec {
    pub d: f64,
    pub ex: f64,
    pub omega1: f64,
    pub omega2: f64,
    pub t2_star: f64,
    pub tau: f64,
    pub calibration: DephasingCalibration,
    /// Relative amplitude error; the amplitude channel is off when zero.
    pub delta_omega: f64,
    pub tau_omega: f64,
    pub amplitude_initial: InitialCondition,
    pub frame: Frame,
    pub n_trials: usize,
    pub base_seed: u64,
    /// Trace length per scheme, in [`DriveScheme::ALL`] order.
    pub t_end: [f64; 4],
    pub sample_interval: [f64; 4],
    /// Step guard per scheme. The phase-modulated default is doubled so that
    /// the step-halving deviation stays below the convergence tolerance over
    /// its longer trace.
    pub guard: [f64; 4],
    /// Fixed step (μs) for every scheme; checked against the guard.
    pub dt: Option<f64>,
    pub stepper: Stepper,
    pub fit: FitMethod,
}

impl Default for DephasingSpec {
    fn default() -> Self {
        DephasingSpec {
            d: DEFAULT_D,
            ex: mhz(24.0),
            omega1: mhz(10.0),
            omega2: mhz(1.0),
            t2_star: 3.0,
            tau: 20.0,
            calibration: DephasingCalibration::default(),
            delta_omega: 0.01,
            tau_omega: 500.0,
            amplitude_initial: InitialCondition::Zero,
            frame: Frame::RotRwa,
            n_trials: 500,
            base_seed: 1,
            t_end: [10.0, 10.0, 40.0, 120.0],
            sample_interval: [0.01, 0.005, 0.005, 0.02],
            guard: [DEFAULT_GUARD, DEFAULT_GUARD, DEFAULT_GUARD, 2.0 * DEFAULT_GUARD],
            dt: None,
            stepper: Stepper::default(),
            fit: FitMethod::default(),
        }
    }
}

impl DephasingSpec {
    pub fn static_params(&self) -> Result<StaticParams> {
        StaticParams::new(self.d, self.ex, 0.0)
    }

    pub fn drive(&self, scheme: DriveScheme) -> Result<DriveParams> {
        let p = self.static_params()?;
        Ok(match scheme {
            DriveScheme::None => DriveParams::none(&p),
            DriveScheme::Linear => DriveParams::linear(self.omega1, &p),
            DriveScheme::Orthogonal => DriveParams::orthogonal(self.omega1, &p),
            DriveScheme::PhaseModulated => DriveParams::phase_modulated(self.omega1, self.omega2, &p),
        })
    }

    pub fn noise(&self, scheme: DriveScheme) -> Result<NoiseConfig> {
        let amplitude = (scheme != DriveScheme::None)
            .then_some((self.omega1, self.delta_omega, self.tau_omega, self.amplitude_initial));
        noise_config(self.t2_star, self.tau, self.calibration, amplitude)
    }

    pub fn hamiltonian(&self, scheme: DriveScheme) -> Result<HamiltonianSpec> {
        let h = HamiltonianSpec::new(self.static_params()?, self.drive(scheme)?, self.frame)
            .with_noise(self.noise(scheme)?);
        h.validate()?;
        Ok(h)
    }

    pub fn integration(&self, scheme: DriveScheme) -> IntegrationConfig {
        let k = scheme_index(scheme);
        let cfg = IntegrationConfig::new(self.t_end[k])
            .sampled_every(self.sample_interval[k])
            .with_guard(self.guard[k])
            .with_stepper(self.stepper);
        match self.dt {
            Some(dt) => cfg.with_dt(dt),
            None => cfg,
        }
    }

    /// `2⟨σ_x^i⟩` in the scheme's basis, plus the `|−1⟩` population for the
    /// schemes whose two-level reduction leaves it out.
    pub fn observables(&self, scheme: DriveScheme) -> Result<Vec<Observable<3>>> {
        let tag = scheme_tag(scheme);
        let mut obs = vec![Observable::new(format!("2sx_{}", tag.letter()), tag.sigma_x3() * c(2.0))?];
        if matches!(scheme, DriveScheme::Orthogonal | DriveScheme::PhaseModulated) {
            obs.push(Observable::new("P_m1", projector(&SpinState::minus1()))?);
        }
        Ok(obs)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SchemeRun {
    pub scheme: DriveScheme,
    pub tag: BasisTag,
    pub result: EnsembleResult,
    pub fit: CoherenceFit,
    /// Time-averaged and peak `|−1⟩` population, where monitored.
    pub leakage: Option<(f64, f64)>,
}

impl SchemeRun {
    pub fn leakage_ok(&self) -> bool {
        self.leakage.is_none_or(|(mean, _)| mean < LEAKAGE_LIMIT)
    }
}

/// Runs one scheme of the comparison; trial seeds use the stream
/// `[scheme index]`.
pub fn dephasing_scheme(spec: &DephasingSpec, scheme: DriveScheme) -> Result<SchemeRun> {
    let h = spec.hamiltonian(scheme)?;
    let tag = scheme_tag(scheme);
    let obs = spec.observables(scheme)?;
    let result = run_ensemble_stream(
        &tag.initial_superposition(),
        &h,
        &obs,
        &spec.integration(scheme),
        spec.n_trials,
        spec.base_seed,
        &[scheme_index(scheme) as u64],
    )?;
    let fit = fit_coherence(&result, 0, spec.fit)?;
    let leakage = result.observable("P_m1").map(|k| {
        let p = &result.mean[k];
        (p.iter().sum::<f64>() / p.len() as f64, p.iter().fold(0.0f64, |m, &v| m.max(v)))
    });
    Ok(SchemeRun {
        scheme,
        tag,
        result,
        fit,
        leakage,
    })
}

/// All four schemes in [`DriveScheme::ALL`] order.
pub fn dephasing_comparison(spec: &DephasingSpec) -> Result<Vec<SchemeRun>> {
    DriveScheme::ALL.iter().map(|&s| dephasing_scheme(spec, s)).collect()
}

/// Sensing Hamiltonian used for traces and spectra.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SensingModel {
    /// Two-level model in the second rotating frame.
    #[default]
    Effective,
    /// Three-level phase-modulated drive in the rotating frame, read out in
    /// the second rotating frame.
    Full3,
}

impl SensingModel {
    pub fn name(self) -> &'static str {
        match self {
            SensingModel::Effective => "effective",
            SensingModel::Full3 => "full3",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        [SensingModel::Effective, SensingModel::Full3].into_iter().find(|m| m.name() == s)
    }
}

/// Initial state of a sensing run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SensingInitial {
    #[default]
    Ket0,
    /// `(|+1⟩ + |0⟩)/√2`.
    Superposition,
}

impl SensingInitial {
    pub fn name(self) -> &'static str {
        match self {
            SensingInitial::Ket0 => "ket0",
            SensingInitial::Superposition => "superposition_scheme_basis",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        [SensingInitial::Ket0, SensingInitial::Superposition].into_iter().find(|m| m.name() == s)
    }
}

/// AC-field sensing scenario. Defaults:
/// `Eₓ = 2π·110`, `ω_ac = 2π·5`, `g = 2π·0.1`, ratio 10, `T₂* = 0.1 μs`,
/// `δ_Ω = 0.005`.
#[derive(Debug, Clone, PartialEq)]
pub struct SensingSpec {
    pub d: f64,
    pub ex: f64,
    pub omega_ac: f64,
    pub g: f64,
    /// `Ω₁/Ω₂`.
    pub ratio: f64,
    pub t2_star: f64,
    pub tau: f64,
    pub calibration: DephasingCalibration,
    pub delta_omega: f64,
    pub tau_omega: f64,
    pub amplitude_initial: InitialCondition,
    pub model: SensingModel,
    pub initial: SensingInitial,
    pub n_trials: usize,
    pub base_seed: u64,
    pub t_end: f64,
    pub sample_interval: f64,
    pub guard: f64,
    pub dt: Option<f64>,
    pub stepper: Stepper,
}

impl Default for SensingSpec {
    fn default() -> Self {
        SensingSpec {
            d: DEFAULT_D,
            ex: mhz(110.0),
            omega_ac: mhz(5.0),
            g: mhz(0.1),
            ratio: 10.0,
            t2_star: 0.1,
            tau: 20.0,
            calibration: DephasingCalibration::default(),
            delta_omega: 0.005,
            tau_omega: 500.0,
            amplitude_initial: InitialCondition::Zero,
            model: SensingModel::default(),
            initial: SensingInitial::default(),
            n_trials: 100,
            base_seed: 1,
            t_end: 100.0,
            sample_interval: 0.25,
            guard: DEFAULT_GUARD,
            dt: None,
            stepper: Stepper::default(),
        }
    }
}

/// Drive strengths of one sensing run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SensingDrive {
    pub omega1: f64,
    pub omega2: f64,
    pub omega_ac: f64,
}

impl SensingDrive {
    /// `(2Eₓ − 2Ω₁ − 2Ω₂ − ω_ac)/ω_ac`.
    pub fn resonance_mismatch(&self, ex: f64) -> f64 {
        (2.0 * ex - 2.0 * self.omega1 - 2.0 * self.omega2 - self.omega_ac) / self.omega_ac
    }
}

impl SensingSpec {
    /// Sensing panel at `Eₓ = 2π·ex_mhz` and `ω_ac = 2π·f_ac_mhz`, with
    /// `T₂* = 0.1 μs` (or `0.3 μs` when `Eₓ` is below `2π·50`).
    pub fn panel(ex_mhz: f64, f_ac_mhz: f64) -> Self {
        SensingSpec {
            ex: mhz(ex_mhz),
            omega_ac: mhz(f_ac_mhz),
            t2_star: if ex_mhz < 50.0 { 0.3 } else { 0.1 },
            ..Default::default()
        }
    }

    /// Resonant drive for the configured `(Eₓ, ω_ac, ratio)`.
    pub fn resonant_drive(&self) -> Result<SensingDrive> {
        let (omega1, omega2) = resonant_omega1(self.ex, self.omega_ac, self.ratio)?;
        if omega2 > DEFAULT_MAX_OMEGA2_RATIO * omega1 {
            return Err(Error::Guard {
                guard: "omega2_ratio",
                detail: format!(
                    "Omega1/Omega2 = {} is below {}; phase modulation needs Omega2 << Omega1",
                    self.ratio,
                    1.0 / DEFAULT_MAX_OMEGA2_RATIO
                ),
            });
        }
        let drive = SensingDrive {
            omega1,
            omega2,
            omega_ac: self.omega_ac,
        };
        let mismatch = drive.resonance_mismatch(self.ex);
        if mismatch.abs() > RESONANCE_TOL {
            return Err(Error::Guard {
                guard: "resonance",
                detail: format!("2Ex - 2Omega1 - 2Omega2 - omega_ac = {mismatch:e} (relative)"),
            });
        }
        Ok(drive)
    }

    pub fn noise(&self, omega1: f64) -> Result<NoiseConfig> {
        noise_config(
            self.t2_star,
            self.tau,
            self.calibration,
            Some((omega1, self.delta_omega, self.tau_omega, self.amplitude_initial)),
        )
    }

    pub fn integration(&self) -> IntegrationConfig {
        self.integration_to(self.t_end, self.sample_interval)
    }

    pub fn integration_to(&self, t_end: f64, sample_interval: f64) -> IntegrationConfig {
        let cfg = IntegrationConfig::new(t_end)
            .sampled_every(sample_interval)
            .with_guard(self.guard)
            .with_stepper(self.stepper);
        match self.dt {
            Some(dt) => cfg.with_dt(dt),
            None => cfg,
        }
    }

    fn signal(&self, drive: &SensingDrive) -> Result<SignalParams> {
        SignalParams::new(self.g, drive.omega_ac)
    }

    pub fn effective_source(&self, drive: &SensingDrive) -> Result<EffectiveSpec> {
        EffectiveSpec::new(
            EffectiveKind::Sensing {
                ex: self.ex,
                omega1: drive.omega1,
                omega2: drive.omega2,
                signal: self.signal(drive)?,
            },
            self.noise(drive.omega1)?,
        )
    }

    pub fn full_source(&self, drive: &SensingDrive) -> Result<HamiltonianSpec> {
        let p = StaticParams::new(self.d, self.ex, 0.0)?;
        let h = HamiltonianSpec::new(p, DriveParams::phase_modulated(drive.omega1, drive.omega2, &p), Frame::RotRwa)
            .with_signal(self.signal(drive)?)
            .with_noise(self.noise(drive.omega1)?);
        h.validate()?;
        Ok(h)
    }

    /// Ensemble at an arbitrary drive; `stream` prefixes the trial index in
    /// the seed path.
    pub fn run_at(&self, drive: &SensingDrive, cfg: &IntegrationConfig, stream: &[u64]) -> Result<EnsembleResult> {
        match self.model {
            SensingModel::Effective => {
                let src = self.effective_source(drive)?;
                let initial: QubitState = match self.initial {
                    SensingInitial::Ket0 => SpinState::basis(1),
                    SensingInitial::Superposition => SpinState::even_superposition(&SpinState::basis(0), &SpinState::basis(1))?,
                };
                let obs = [Observable::new("P0_p", projector(&SpinState::<2>::basis(1)))?];
                run_ensemble_stream(&initial, &src, &obs, cfg, self.n_trials, self.base_seed, stream)
            }
            SensingModel::Full3 => {
                let src = self.full_source(drive)?;
                let initial = match self.initial {
                    SensingInitial::Ket0 => SpinState::zero(),
                    SensingInitial::Superposition => BasisTag::PhaseMod.initial_superposition(),
                };
                let g = BasisTag::PhaseMod.sigma_x3() * c(2.0 * drive.omega1);
                let obs = [
                    Observable::new("P0_p", projector(&SpinState::zero()))?.in_frame(&g)?,
                    Observable::new("P_m1", projector(&SpinState::minus1()))?,
                ];
                run_ensemble_stream(&initial, &src, &obs, cfg, self.n_trials, self.base_seed, stream)
            }
        }
    }
}

/// A sensing trace with its signal summary.
#[derive(Debug, Clone, PartialEq)]
pub struct SensingRun {
    pub drive: SensingDrive,
    pub result: EnsembleResult,
    /// Half the peak-to-peak excursion of `P(|0⟩)`.
    pub amplitude: f64,
    /// Largest standard error along the trace.
    pub max_stderr: f64,
}

impl SensingRun {
    fn new(drive: SensingDrive, result: EnsembleResult) -> Self {
        let p = &result.mean[0];
        let (lo, hi) = p.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &v| (l.min(v), h.max(v)));
        let max_stderr = result.stderr[0].iter().fold(0.0f64, |m, &v| m.max(v));
        SensingRun {
            drive,
            result,
            amplitude: 0.5 * (hi - lo),
            max_stderr,
        }
    }

    /// Signal excursion in units of the largest standard error.
    pub fn snr(&self) -> f64 {
        if self.max_stderr > 0.0 {
            self.amplitude / self.max_stderr
        } else {
            f64::INFINITY
        }
    }
}

/// `P(|0⟩)(t)` at the resonant drive.
pub fn ac_sensing_trace(spec: &SensingSpec) -> Result<SensingRun> {
    let drive = spec.resonant_drive()?;
    let result = spec.run_at(&drive, &spec.integration(), &[])?;
    Ok(SensingRun::new(drive, result))
}

/// Swept quantity of a spectrum.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SweepVariable {
    /// `Ω₁` with `Ω₂ = Ω₁/ratio` locked.
    #[default]
    Omega1,
    /// `ω_ac` at the drive resonant with the configured `ω_ac`.
    OmegaAc,
}

impl SweepVariable {
    pub fn name(self) -> &'static str {
        match self {
            SweepVariable::Omega1 => "omega1",
            SweepVariable::OmegaAc => "omega_ac",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        [SweepVariable::Omega1, SweepVariable::OmegaAc].into_iter().find(|m| m.name() == s)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumSpec {
    pub sensing: SensingSpec,
    pub t_probe: f64,
    pub variable: SweepVariable,
    /// Swept values (rad/μs).
    pub grid: Vec<f64>,
}

impl SpectrumSpec {
    /// `points` values evenly spaced over `center ± half_width`.
    pub fn linear_grid(center: f64, half_width: f64, points: usize) -> Vec<f64> {
        if points < 2 {
            return vec![center];
        }
        (0..points)
            .map(|k| center - half_width + 2.0 * half_width * k as f64 / (points - 1) as f64)
            .collect()
    }

    /// Value of the sweep variable at the configured resonance.
    pub fn predicted(&self) -> Result<f64> {
        let drive = self.sensing.resonant_drive()?;
        Ok(match self.variable {
            SweepVariable::Omega1 => drive.omega1,
            SweepVariable::OmegaAc => drive.omega_ac,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectrumRow {
    pub value: f64,
    pub p0: f64,
    pub stderr: f64,
}

/// Location and width of the spectral feature.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResonanceFit {
    pub extremum: f64,
    /// True for a dip in `P(|0⟩)`.
    pub dip: bool,
    pub depth: f64,
    pub baseline: f64,
    /// Full width at half depth; `None` when neither half-depth crossing lies
    /// on the grid.
    pub fwhm: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    pub variable: SweepVariable,
    pub t_probe: f64,
    pub rows: Vec<SpectrumRow>,
    pub predicted: f64,
    pub resonance: ResonanceFit,
}

impl Spectrum {
    /// `|extremum − predicted| < FWHM`.
    pub fn resonance_confirmed(&self) -> bool {
        self.resonance.fwhm.is_some_and(|w| (self.resonance.extremum - self.predicted).abs() < w)
    }
}

/// `P(|0⟩)` at `t_probe` across the sweep; point `k` uses seed stream `[k]`.
pub fn ac_spectrum(spec: &SpectrumSpec) -> Result<Spectrum> {
    if !(spec.t_probe > 0.0) {
        return Err(Error::param("t_probe", format!("must be > 0, got {}", spec.t_probe)));
    }
    if spec.grid.len() < 3 {
        return Err(Error::param("sweep", "need at least 3 sweep points"));
    }
    let base = spec.sensing.resonant_drive()?;
    let cfg = spec.sensing.integration_to(spec.t_probe, spec.t_probe);
    let rows = spec
        .grid
        .par_iter()
        .enumerate()
        .map(|(k, &value)| {
            let drive = match spec.variable {
                SweepVariable::Omega1 => SensingDrive {
                    omega1: value,
                    omega2: value / spec.sensing.ratio,
                    omega_ac: base.omega_ac,
                },
                SweepVariable::OmegaAc => SensingDrive {
                    omega_ac: value,
                    ..base
                },
            };
            let r = spec.sensing.run_at(&drive, &cfg, &[k as u64])?;
            let last = r.times.len() - 1;
            Ok(SpectrumRow {
                value,
                p0: r.mean[0][last],
                stderr: r.stderr[0][last],
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let resonance = analyze_resonance(&rows);
    Ok(Spectrum {
        variable: spec.variable,
        t_probe: spec.t_probe,
        rows,
        predicted: spec.predicted()?,
        resonance,
    })
}

/// Locates the extremum (parabolic refinement) and its half-depth width.
/// The baseline is the mean of the two outermost points on each side.
pub fn analyze_resonance(rows: &[SpectrumRow]) -> ResonanceFit {
    let n = rows.len();
    let edge = 2.min(n / 2).max(1);
    let baseline = (rows[..edge].iter().chain(&rows[n - edge..]).map(|r| r.p0).sum::<f64>()) / (2 * edge) as f64;
    let (kmin, kmax) = (0..n).fold((0, 0), |(lo, hi), k| {
        (
            if rows[k].p0 < rows[lo].p0 { k } else { lo },
            if rows[k].p0 > rows[hi].p0 { k } else { hi },
        )
    });
    let dip = baseline - rows[kmin].p0 >= rows[kmax].p0 - baseline;
    let k = if dip { kmin } else { kmax };
    let extremum = if k > 0 && k < n - 1 {
        let (x0, x1, x2) = (rows[k - 1].value, rows[k].value, rows[k + 1].value);
        let (y0, y1, y2) = (rows[k - 1].p0, rows[k].p0, rows[k + 1].p0);
        let denom = (x0 - x1) * (x0 - x2) * (x1 - x2);
        let a = (x2 * (y1 - y0) + x1 * (y0 - y2) + x0 * (y2 - y1)) / denom;
        let b = (x2 * x2 * (y0 - y1) + x1 * x1 * (y2 - y0) + x0 * x0 * (y1 - y2)) / denom;
        if a != 0.0 {
            (-b / (2.0 * a)).clamp(x0, x2)
        } else {
            x1
        }
    } else {
        rows[k].value
    };
    let depth = (rows[k].p0 - baseline).abs();
    let half = 0.5 * (rows[k].p0 + baseline);
    let beyond = |r: &SpectrumRow| if dip { r.p0 > half } else { r.p0 < half };
    let cross = |i: usize, j: usize| {
        let f = (half - rows[i].p0) / (rows[j].p0 - rows[i].p0);
        rows[i].value + f * (rows[j].value - rows[i].value)
    };
    let left = (1..=k).rev().find(|&i| beyond(&rows[i - 1])).map(|i| cross(i, i - 1));
    let right = (k..n - 1).find(|&i| beyond(&rows[i + 1])).map(|i| cross(i, i + 1));
    let center = rows[k].value;
    let fwhm = match (left, right) {
        (Some(l), Some(r)) => Some(r - l),
        (Some(l), None) => Some(2.0 * (center - l)),
        (None, Some(r)) => Some(2.0 * (r - center)),
        (None, None) => None,
    };
    ResonanceFit {
        extremum,
        dip,
        depth,
        baseline,
        fwhm,
    }
}

/// Angular rate `π/t_min` of a trace `P = cos²(Ω_R t/2)`, from its first
/// minimum (parabolic refinement). `None` when the minimum is at an end.
pub fn population_rate(times: &[f64], p: &[f64]) -> Option<f64> {
    let n = p.len();
    let k = (0..n).min_by(|&a, &b| p[a].total_cmp(&p[b]))?;
    if k == 0 || k + 1 >= n {
        return None;
    }
    let (y0, y1, y2) = (p[k - 1], p[k], p[k + 1]);
    let h = times[k] - times[k - 1];
    let curv = y0 - 2.0 * y1 + y2;
    let shift = if curv > 0.0 { 0.5 * h * (y0 - y2) / curv } else { 0.0 };
    Some(std::f64::consts::PI / (times[k] + shift))
}

/// Signal Rabi rates at exact resonance with noise off.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RabiCheck {
    /// `g/8`.
    pub predicted: f64,
    /// Two-level model of the second rotating frame.
    pub effective: f64,
    /// Three-level model at its own resonance.
    pub full: f64,
    /// Dressed gap of the three-level model at `g = 0` minus `2Ω₂`.
    pub gap_shift: f64,
}

impl RabiCheck {
    pub fn full_vs_effective(&self) -> f64 {
        (self.full - self.effective).abs() / self.effective
    }
}

fn silent(spec: &SensingSpec) -> SensingSpec {
    SensingSpec {
        t2_star: f64::INFINITY,
        delta_omega: 0.0,
        n_trials: 1,
        ..spec.clone()
    }
}

/// Dressed-qubit gap of the three-level model (`g = 0`, noise off): slope of
/// the precession phase of `⟨σ_x^p⟩ + i⟨σ_y^p⟩` in the second frame.
pub fn full_dressed_gap(spec: &SensingSpec, drive: &SensingDrive, t_end: f64) -> Result<f64> {
    let p = StaticParams::new(spec.d, spec.ex, 0.0)?;
    let src = HamiltonianSpec::new(p, DriveParams::phase_modulated(drive.omega1, drive.omega2, &p), Frame::RotRwa);
    src.validate()?;
    let g = BasisTag::PhaseMod.sigma_x3() * c(2.0 * drive.omega1);
    let obs = [
        Observable::new("sx", BasisTag::PhaseMod.sigma_x3())?.in_frame(&g)?,
        Observable::new("sy", BasisTag::PhaseMod.sigma_y3())?.in_frame(&g)?,
    ];
    let period = TWO_PI / (2.0 * drive.omega2);
    let cfg = IntegrationConfig::new(t_end)
        .sampled_every(period / 16.0)
        .with_guard(spec.guard)
        .with_stepper(spec.stepper);
    let r = evolve(
        &BasisTag::PhaseMod.initial_superposition(),
        &src,
        crate::noise::LiveNoise::silent(),
        &cfg,
        &obs,
    )?;
    let mut phase = 0.0;
    let mut prev = r.values[1][0].atan2(r.values[0][0]);
    let mut unwrapped = Vec::with_capacity(r.times.len());
    for k in 0..r.times.len() {
        let a = r.values[1][k].atan2(r.values[0][k]);
        let mut d = a - prev;
        d -= TWO_PI * (d / TWO_PI).round();
        phase += d;
        prev = a;
        unwrapped.push(phase);
    }
    // least-squares slope
    let n = r.times.len() as f64;
    let mt = r.times.iter().sum::<f64>() / n;
    let mp = unwrapped.iter().sum::<f64>() / n;
    let num: f64 = r.times.iter().zip(&unwrapped).map(|(t, p)| (t - mt) * (p - mp)).sum();
    let den: f64 = r.times.iter().map(|t| (t - mt).powi(2)).sum();
    Ok((num / den).abs())
}

/// Measures the signal Rabi rate of both sensing models. The three-level
/// run is retuned to its own resonance by shifting `ω_ac` by the measured
/// dressed-gap shift.
pub fn rabi_rate_check(spec: &SensingSpec) -> Result<RabiCheck> {
    let drive = spec.resonant_drive()?;
    let quiet = silent(spec);
    let predicted = spec.g / 8.0;
    let t_end = 2.0 * std::f64::consts::PI / predicted;
    let cfg = IntegrationConfig::new(t_end)
        .sampled_every(0.05)
        .with_guard(spec.guard)
        .with_stepper(spec.stepper);
    let eff = SensingSpec {
        model: SensingModel::Effective,
        initial: SensingInitial::Ket0,
        ..quiet.clone()
    };
    let r = eff.run_at(&drive, &cfg, &[])?;
    let effective = population_rate(&r.times, &r.mean[0]).ok_or_else(|| Error::Fit("no signal minimum".into()))?;

    let gap = full_dressed_gap(spec, &drive, 2.0)?;
    let gap_shift = gap - 2.0 * drive.omega2;
    let tuned = SensingDrive {
        omega_ac: drive.omega_ac - gap_shift,
        ..drive
    };
    let full_spec = SensingSpec {
        model: SensingModel::Full3,
        initial: SensingInitial::Ket0,
        ..quiet
    };
    let r = full_spec.run_at(&tuned, &cfg, &[])?;
    let full = population_rate(&r.times, &r.mean[0]).ok_or_else(|| Error::Fit("no signal minimum".into()))?;
    Ok(RabiCheck {
        predicted,
        effective,
        full,
        gap_shift,
    })
}

/// Fastest angular frequency of a sensing run (for run-time estimates).
pub fn sensing_f_max(spec: &SensingSpec) -> Result<f64> {
    let drive = spec.resonant_drive()?;
    Ok(match spec.model {
        SensingModel::Effective => spec.effective_source(&drive)?.max_frequency(),
        SensingModel::Full3 => spec.full_source(&drive)?.max_frequency(),
    })
}
