//! Hamiltonian builders: lab frame, the rotating frame of
//! `H₀′ = D·Sz² + Eₓ(Sx² − Sy²)` with and without the rotating-wave
//! approximation, the four microwave control schemes and the AC signal term.
//!
//! Builders are pure functions of time and frozen noise values. Noise is
//! advanced by the integrator.

use std::f64::consts::{FRAC_1_SQRT_2, SQRT_2};

use nalgebra::SVector;

use crate::error::{Error, Result};
use crate::noise::{NoiseConfig, NoiseSample};
use crate::propagator::HamiltonianSource;
use crate::spinops::{c, spin_operator, ComplexMatrix3, Op, SpinOp, SpinState, C64, I, ONE, ZERO};
use crate::TWO_PI;

/// Default axial zero-field splitting, `2π·2870` rad/μs. Only matters for
/// lab-frame and `rot_exact` runs.
pub const DEFAULT_D: f64 = TWO_PI * 2870.0;

/// Default upper bound on `Ω₂/Ω₁` for phase-modulated driving.
pub const DEFAULT_MAX_OMEGA2_RATIO: f64 = 0.2;

/// Scale separation below which validity warnings are emitted.
pub const VALIDITY_FACTOR: f64 = 20.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StaticParams {
    pub d: f64,
    pub ex: f64,
    pub gamma_bz: f64,
}

impl StaticParams {
    pub fn new(d: f64, ex: f64, gamma_bz: f64) -> Result<Self> {
        if !(ex > 0.0) || !ex.is_finite() {
            return Err(Error::param("Ex", format!("transverse splitting must be > 0, got {ex}")));
        }
        if !d.is_finite() || !gamma_bz.is_finite() {
            return Err(Error::param("D", "D and gamma_Bz must be finite"));
        }
        Ok(StaticParams { d, ex, gamma_bz })
    }

    /// Zero field, default `D`.
    pub fn clock(ex: f64) -> Result<Self> {
        Self::new(DEFAULT_D, ex, 0.0)
    }

    pub fn warnings(&self) -> Vec<String> {
        let mut w = Vec::new();
        if self.ex < 10.0 * self.gamma_bz.abs() {
            w.push(format!(
                "clock regime weak: Ex = {:.4} rad/us < 10 |gamma_Bz| = {:.4} rad/us",
                self.ex,
                10.0 * self.gamma_bz.abs()
            ));
        }
        w
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DriveScheme {
    None,
    Linear,
    Orthogonal,
    PhaseModulated,
}

impl DriveScheme {
    pub const ALL: [DriveScheme; 4] = [
        DriveScheme::None,
        DriveScheme::Linear,
        DriveScheme::Orthogonal,
        DriveScheme::PhaseModulated,
    ];

    pub fn name(self) -> &'static str {
        match self {
            DriveScheme::None => "none",
            DriveScheme::Linear => "linear",
            DriveScheme::Orthogonal => "orthogonal",
            DriveScheme::PhaseModulated => "phase_modulated",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|d| d.name() == s)
    }
}

/// Microwave drive. `omega1` is the Rabi frequency `Ω` (or `Ω₁`), `omega2`
/// the phase-modulation strength `Ω₂`, and `mw_freq1`/`mw_freq2` the carrier
/// frequencies along x and y.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DriveParams {
    pub scheme: DriveScheme,
    pub omega1: f64,
    pub omega2: f64,
    pub mw_freq1: f64,
    pub mw_freq2: f64,
}

impl DriveParams {
    fn resonant(scheme: DriveScheme, omega1: f64, omega2: f64, p: &StaticParams) -> Self {
        DriveParams {
            scheme,
            omega1,
            omega2,
            mw_freq1: p.d + p.ex,
            mw_freq2: p.d - p.ex,
        }
    }

    pub fn none(p: &StaticParams) -> Self {
        Self::resonant(DriveScheme::None, 0.0, 0.0, p)
    }

    pub fn linear(omega: f64, p: &StaticParams) -> Self {
        Self::resonant(DriveScheme::Linear, omega, 0.0, p)
    }

    pub fn orthogonal(omega: f64, p: &StaticParams) -> Self {
        Self::resonant(DriveScheme::Orthogonal, omega, 0.0, p)
    }

    pub fn phase_modulated(omega1: f64, omega2: f64, p: &StaticParams) -> Self {
        Self::resonant(DriveScheme::PhaseModulated, omega1, omega2, p)
    }

    /// Checks drive invariants. `max_ratio` bounds `Ω₂/Ω₁`.
    pub fn validate(&self, max_ratio: f64) -> Result<()> {
        let finite = [self.omega1, self.omega2, self.mw_freq1, self.mw_freq2]
            .iter()
            .all(|v| v.is_finite());
        if !finite {
            return Err(Error::param("drive", "drive parameters must be finite"));
        }
        match self.scheme {
            DriveScheme::None => {}
            _ if !(self.omega1 > 0.0) => {
                return Err(Error::param("omega1", format!("Rabi frequency must be > 0, got {}", self.omega1)));
            }
            _ => {}
        }
        if self.scheme != DriveScheme::PhaseModulated && self.omega2 != 0.0 {
            return Err(Error::param(
                "omega2",
                format!("phase modulation strength only applies to phase_modulated, scheme is {}", self.scheme.name()),
            ));
        }
        if self.scheme == DriveScheme::PhaseModulated {
            if !(self.omega2 >= 0.0) {
                return Err(Error::param("omega2", format!("must be >= 0, got {}", self.omega2)));
            }
            if self.omega2 > max_ratio * self.omega1 {
                return Err(Error::Guard {
                    guard: "omega2_ratio",
                    detail: format!(
                        "Omega2/Omega1 = {:.4} exceeds {:.4}; phase modulation needs Omega2 << Omega1",
                        self.omega2 / self.omega1,
                        max_ratio
                    ),
                });
            }
        }
        Ok(())
    }

    /// Drive amplitudes `(A_x, A_y)` of `A_x cos(ω₁t+φ)Sx + A_y sin(ω₂t+φ)Sy`
    /// for a noisy Rabi frequency.
    fn lab_amplitudes(&self, delta_omega1: f64) -> (f64, f64) {
        let omega = self.omega1 + delta_omega1;
        match self.scheme {
            DriveScheme::None => (0.0, 0.0),
            DriveScheme::Linear => (2.0 * omega, 0.0),
            DriveScheme::Orthogonal | DriveScheme::PhaseModulated => (SQRT_2 * omega, SQRT_2 * omega),
        }
    }

    fn phase_at(&self, t: f64) -> f64 {
        match self.scheme {
            DriveScheme::PhaseModulated => phase(t, self.omega1, self.omega2),
            _ => 0.0,
        }
    }
}

/// AC field `g·cos(ω_ac t)·Sz`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SignalParams {
    pub g: f64,
    pub omega_ac: f64,
}

impl SignalParams {
    pub fn new(g: f64, omega_ac: f64) -> Result<Self> {
        if !(g >= 0.0) || !g.is_finite() {
            return Err(Error::param("g", format!("signal strength must be >= 0, got {g}")));
        }
        if !(omega_ac >= 0.0) || !omega_ac.is_finite() {
            return Err(Error::param("omega_ac", format!("must be >= 0, got {omega_ac}")));
        }
        Ok(SignalParams { g, omega_ac })
    }

    /// Sensing validity needs `4Eₓ ≫ g` and `2ω_ac ≫ g`.
    pub fn warnings(&self, ex: f64) -> Vec<String> {
        let mut w = Vec::new();
        if self.g > 0.0 && 4.0 * ex < VALIDITY_FACTOR * self.g {
            w.push(format!("4 Ex / g = {:.1} below {VALIDITY_FACTOR}", 4.0 * ex / self.g));
        }
        if self.g > 0.0 && 2.0 * self.omega_ac < VALIDITY_FACTOR * self.g {
            w.push(format!("2 omega_ac / g = {:.1} below {VALIDITY_FACTOR}", 2.0 * self.omega_ac / self.g));
        }
        w
    }
}

/// `φ(t) = 2(Ω₂/Ω₁)·sin(2Ω₁t)`.
#[inline]
pub fn phase(t: f64, omega1: f64, omega2: f64) -> f64 {
    if omega2 == 0.0 {
        return 0.0;
    }
    2.0 * (omega2 / omega1) * (2.0 * omega1 * t).sin()
}

/// `D·Sz² + (Eₓ+δE)(Sx²−Sy²) + (γB_z+δ_Bz)·Sz`.
pub fn h_lab(p: &StaticParams, delta_e: f64, delta_bz: f64) -> ComplexMatrix3 {
    let e = p.ex + delta_e;
    let b = p.gamma_bz + delta_bz;
    Op::<3>::new(
        c(p.d + b), ZERO, c(e), //
        ZERO, ZERO, ZERO, //
        c(e), ZERO, c(p.d - b),
    )
}

/// Frame generator `H₀′ = D·Sz² + Eₓ(Sx²−Sy²)`.
pub fn h0_prime(p: &StaticParams) -> ComplexMatrix3 {
    h_lab(&StaticParams { gamma_bz: 0.0, ..*p }, 0.0, 0.0)
}

/// Closed-form eigen-system of [`h_lab`].
#[derive(Debug, Clone, Copy)]
pub struct AnalyticEigensystem {
    /// `(ω₊₁, ω₀, ω₋₁)`.
    pub values: [f64; 3],
    /// `(|ψ₊⟩, |ψ₀⟩, |ψ₋⟩)`.
    pub vectors: [SpinState; 3],
    pub theta: f64,
    /// Set when `Eₓ+δE` and the Zeeman term both vanish; the ±1 pair is then
    /// degenerate and `theta` is arbitrary (0).
    pub degenerate: bool,
}

/// `ω±1 = D ± √((Eₓ+δE)² + (γB_z+δ_Bz)²)`, `ω₀ = 0`, with
/// `|ψ₊⟩ = cos(θ/2)|+1⟩ + sin(θ/2)|−1⟩`, `|ψ₋⟩ = −sin(θ/2)|+1⟩ + cos(θ/2)|−1⟩`
/// and `cos θ = (γB_z+δ_Bz)/√(...)`.
pub fn analytic_eigensystem(p: &StaticParams, delta_e: f64, delta_bz: f64) -> AnalyticEigensystem {
    let e = p.ex + delta_e;
    let b = p.gamma_bz + delta_bz;
    let r = e.hypot(b);
    let degenerate = r == 0.0;
    let theta = if degenerate { 0.0 } else { e.atan2(b) };
    let (s, co) = (0.5 * theta).sin_cos();
    let plus = SpinState(SVector::<C64, 3>::new(c(co), ZERO, c(s)));
    let minus = SpinState(SVector::<C64, 3>::new(c(-s), ZERO, c(co)));
    AnalyticEigensystem {
        values: [p.d + r, 0.0, p.d - r],
        vectors: [plus, SpinState::zero(), minus],
        theta,
        degenerate,
    }
}

/// Eigenbasis of `H₀′`: columns `|μ+⟩ = (|+1⟩+|−1⟩)/√2`, `|0⟩`,
/// `|ν⟩ = (|+1⟩−|−1⟩)/√2` with energies `D+Eₓ`, `0`, `D−Eₓ`.
fn clock_basis() -> ComplexMatrix3 {
    let h = c(FRAC_1_SQRT_2);
    Op::<3>::new(
        h, ZERO, h, //
        ZERO, ONE, ZERO, //
        h, ZERO, -h,
    )
}

/// `Sz` in the interaction picture of `H₀′`:
/// `cos(2Eₓt)·Sz − i·sin(2Eₓt)(|+1⟩⟨−1| − |−1⟩⟨+1|)`.
fn sz_interaction(ex: f64, t: f64) -> ComplexMatrix3 {
    let (s, co) = (2.0 * ex * t).sin_cos();
    Op::<3>::new(
        c(co), ZERO, -I * s, //
        ZERO, ZERO, ZERO, //
        I * s, ZERO, c(-co),
    )
}

/// Lab-frame drive operator at time `t`.
fn drive_lab(d: &DriveParams, delta_omega1: f64, t: f64) -> ComplexMatrix3 {
    if d.scheme == DriveScheme::None {
        return Op::<3>::zeros();
    }
    let (ax, ay) = d.lab_amplitudes(delta_omega1);
    let phi = d.phase_at(t);
    let mut h = spin_operator(SpinOp::Sx) * c(ax * (d.mw_freq1 * t + phi).cos());
    if ay != 0.0 {
        h += spin_operator(SpinOp::Sy) * c(ay * (d.mw_freq2 * t + phi).sin());
    }
    h
}

/// Full lab-frame Hamiltonian including drive and signal.
pub fn h_lab_driven(
    p: &StaticParams,
    d: &DriveParams,
    s: Option<&SignalParams>,
    noise: &NoiseSample,
    t: f64,
) -> ComplexMatrix3 {
    let mut h = h_lab(p, noise.delta_e, noise.delta_bz) + drive_lab(d, noise.delta_omega1, t);
    if let Some(s) = s {
        h += spin_operator(SpinOp::Sz) * c(s.g * (s.omega_ac * t).cos());
    }
    h
}

/// Interaction-picture Hamiltonian in the frame of `H₀′` at time `t`.
///
/// With `rwa` the counter-rotating drive terms are dropped. The drive then
/// couples `|0⟩` to `|μ+⟩` with `(A_x/2)·e^{−i(Δ₁t+φ)}` and to `|ν⟩` with
/// `(A_y/2)·e^{−i(Δ₂t+φ)}`, where `Δ₁ = ω₁−(D+Eₓ)` and `Δ₂ = ω₂−(D−Eₓ)`. At
/// resonance this gives `Ω/√2` couplings for linear driving and a single
/// `Ω·e^{−iφ}` coupling on `(|+1⟩,|0⟩)` for the orthogonal schemes. The
/// `δE` term `δE(|+1⟩⟨−1| + h.c.)` commutes with `H₀′` and is always exact.
///
/// The signal is kept exact (`g·cos(ω_ac t)·S_z^I(t)`) for `None` and
/// `Linear`. For the orthogonal schemes with `rwa` it is replaced by the
/// two-level form `g·cos(2Eₓt)cos(ω_ac t)·σ_z^p`, embedded as
/// `(1/2)(|+1⟩⟨+1| − |0⟩⟨0|)`.
///
/// Without `rwa` the exact `e^{iH₀′t}(H_full − H₀′)e^{−iH₀′t}` is returned.
pub fn h_rotating(
    p: &StaticParams,
    d: &DriveParams,
    s: Option<&SignalParams>,
    noise: &NoiseSample,
    t: f64,
    rwa: bool,
) -> ComplexMatrix3 {
    if !rwa {
        return rotate_exact(p, &(h_lab_driven(p, d, s, noise, t) - h0_prime(p)), t);
    }
    let mut h = Op::<3>::zeros();
    h[(0, 2)] = c(noise.delta_e);
    h[(2, 0)] = c(noise.delta_e);

    let zeeman = p.gamma_bz + noise.delta_bz;
    let orthogonal = matches!(d.scheme, DriveScheme::Orthogonal | DriveScheme::PhaseModulated);
    let signal_exact = s.filter(|_| !orthogonal);
    let mut sz_coeff = zeeman;
    if let Some(s) = signal_exact {
        sz_coeff += s.g * (s.omega_ac * t).cos();
    }
    if sz_coeff != 0.0 {
        h += sz_interaction(p.ex, t) * c(sz_coeff);
    }
    if let (Some(s), true) = (s, orthogonal) {
        let f = 0.5 * s.g * (2.0 * p.ex * t).cos() * (s.omega_ac * t).cos();
        h[(0, 0)] += c(f);
        h[(1, 1)] -= c(f);
    }

    if d.scheme != DriveScheme::None {
        let (ax, ay) = d.lab_amplitudes(noise.delta_omega1);
        let phi = d.phase_at(t);
        let a1 = (d.mw_freq1 - (p.d + p.ex)) * t + phi;
        let a2 = (d.mw_freq2 - (p.d - p.ex)) * t + phi;
        // |μ+⟩⟨0| and |ν⟩⟨0| amplitudes
        let mu = C64::from_polar(0.5 * ax, -a1);
        let nu = C64::from_polar(0.5 * ay, -a2);
        let up = (mu + nu) * FRAC_1_SQRT_2;
        let down = (mu - nu) * FRAC_1_SQRT_2;
        h[(0, 1)] += up;
        h[(1, 0)] += up.conj();
        h[(2, 1)] += down;
        h[(1, 2)] += down.conj();
    }
    h
}

/// `e^{iH₀′t}·v·e^{−iH₀′t}` using the closed-form eigenbasis of `H₀′`.
pub fn rotate_exact(p: &StaticParams, v: &ComplexMatrix3, t: f64) -> ComplexMatrix3 {
    let b = clock_basis();
    let energies = [p.d + p.ex, 0.0, p.d - p.ex];
    let mut vc = b.adjoint() * v * b;
    for a in 0..3 {
        for k in 0..3 {
            if a != k {
                vc[(a, k)] *= C64::from_polar(1.0, (energies[a] - energies[k]) * t);
            }
        }
    }
    b * vc * b.adjoint()
}

/// Frame in which the 3-level dynamics are integrated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Frame {
    Lab,
    RotRwa,
    RotExact,
}

impl Frame {
    pub fn name(self) -> &'static str {
        match self {
            Frame::Lab => "lab",
            Frame::RotRwa => "rot_rwa",
            Frame::RotExact => "rot_exact",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        [Frame::Lab, Frame::RotRwa, Frame::RotExact]
            .into_iter()
            .find(|f| f.name() == s)
    }
}

/// Declarative 3-level scenario.
///
/// Observables are always reported in the rotating frame of `H₀′`; lab-frame
/// runs rotate the state before measuring.
#[derive(Debug, Clone, PartialEq)]
pub struct HamiltonianSpec {
    pub static_params: StaticParams,
    pub drive: DriveParams,
    pub signal: Option<SignalParams>,
    pub frame: Frame,
    pub noise: NoiseConfig,
    pub max_omega2_ratio: f64,
}

impl HamiltonianSpec {
    pub fn new(static_params: StaticParams, drive: DriveParams, frame: Frame) -> Self {
        HamiltonianSpec {
            static_params,
            drive,
            signal: None,
            frame,
            noise: NoiseConfig::none(),
            max_omega2_ratio: DEFAULT_MAX_OMEGA2_RATIO,
        }
    }

    pub fn with_signal(mut self, signal: SignalParams) -> Self {
        self.signal = Some(signal);
        self
    }

    pub fn with_noise(mut self, noise: NoiseConfig) -> Self {
        self.noise = noise;
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.drive.validate(self.max_omega2_ratio)?;
        if let Some(s) = &self.signal {
            if s.omega_ac >= 2.0 * self.static_params.ex {
                return Err(Error::AboveBand {
                    omega_ac: s.omega_ac,
                    two_ex: 2.0 * self.static_params.ex,
                });
            }
        }
        Ok(())
    }

    pub fn warnings(&self) -> Vec<String> {
        let mut w = self.static_params.warnings();
        if let Some(s) = &self.signal {
            w.extend(s.warnings(self.static_params.ex));
        }
        let d = &self.drive;
        if self.frame == Frame::RotRwa && d.scheme != DriveScheme::None {
            let slowest = d.mw_freq1.abs().min(if d.scheme == DriveScheme::Linear {
                f64::INFINITY
            } else {
                d.mw_freq2.abs()
            });
            if d.omega1 * VALIDITY_FACTOR > 2.0 * slowest {
                w.push(format!(
                    "RWA weak: Omega1 = {:.3} rad/us vs 2 omega = {:.3} rad/us",
                    d.omega1,
                    2.0 * slowest
                ));
            }
        }
        w
    }

    /// Upper bound on the fastest angular frequency (rad/μs) in the
    /// integrated Hamiltonian.
    pub fn f_max(&self) -> f64 {
        let p = &self.static_params;
        let d = &self.drive;
        let noise = 3.0 * self.noise.max_std();
        let spread = 2.0 * (d.omega1 + d.omega2) + noise + p.gamma_bz.abs() + self.signal.map_or(0.0, |s| s.g);
        match self.frame {
            Frame::Lab | Frame::RotExact => {
                2.0 * (p.d.abs() + p.ex) + spread + self.signal.map_or(0.0, |s| s.omega_ac)
            }
            Frame::RotRwa => {
                let mut f = spread;
                if d.scheme == DriveScheme::PhaseModulated {
                    f += 2.0 * d.omega1;
                }
                if d.scheme != DriveScheme::None {
                    let det1 = (d.mw_freq1 - (p.d + p.ex)).abs();
                    let det2 = (d.mw_freq2 - (p.d - p.ex)).abs();
                    f += det1.max(det2);
                }
                let zeeman_rotates = p.gamma_bz != 0.0 || self.noise.magnetic.is_some();
                let mut fast: f64 = if zeeman_rotates { 2.0 * p.ex } else { 0.0 };
                if let Some(s) = &self.signal {
                    fast = fast.max(2.0 * p.ex + s.omega_ac);
                }
                f + fast
            }
        }
    }
}

impl HamiltonianSource<3> for HamiltonianSpec {
    #[inline]
    fn hamiltonian(&self, t: f64, noise: &NoiseSample) -> Op<3> {
        let (p, d, s) = (&self.static_params, &self.drive, self.signal.as_ref());
        match self.frame {
            Frame::Lab => h_lab_driven(p, d, s, noise, t),
            Frame::RotRwa => h_rotating(p, d, s, noise, t, true),
            Frame::RotExact => h_rotating(p, d, s, noise, t, false),
        }
    }

    fn max_frequency(&self) -> f64 {
        self.f_max()
    }

    fn noise_config(&self) -> &NoiseConfig {
        &self.noise
    }

    fn measurement_frame(&self) -> Option<Op<3>> {
        match self.frame {
            Frame::Lab => Some(h0_prime(&self.static_params)),
            _ => None,
        }
    }
}
