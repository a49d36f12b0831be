//! Ornstein–Uhlenbeck noise channels with the exact discrete update
//!
//! ```text
//! x(t+Δt) = x(t)·e^{−Δt/τ} + n·√((cτ/2)(1 − e^{−2Δt/τ}))
//! ```
//!
//! where `n` is a unit Gaussian, `τ` the correlation time and `c` the
//! diffusion constant. The update is exact for any `Δt`; the stationary
//! standard deviation is `√(cτ/2)`.
//!
//! Randomness: every process owns a `ChaCha8Rng` seeded from a 64-bit seed.
//! Unit Gaussians come from `rand_distr::StandardNormal` (ziggurat method).
//! Per-trajectory seeds are derived with [`derive_seed`], a SplitMix64 chain
//! over `(base_seed, index, ...)`; the derivation is part of the
//! reproducibility contract and must not change.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

/// SplitMix64 finalizer.
#[inline]
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives a child seed from a base seed and an index path.
///
/// `h₀ = splitmix64(base)`, `hₖ₊₁ = splitmix64(hₖ ^ splitmix64(pathₖ))`.
pub fn derive_seed(base: u64, path: &[u64]) -> u64 {
    path.iter()
        .fold(splitmix64(base), |h, &i| splitmix64(h ^ splitmix64(i)))
}

/// How the first value of a process is chosen.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InitialCondition {
    /// Draw from the stationary law `N(0, cτ/2)`.
    Stationary,
    /// Start at exactly zero and diffuse.
    Zero,
    /// Start at a fixed value.
    Value(f64),
}

/// Correlation time (μs) and diffusion constant ((rad/μs)²/μs).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OuParams {
    pub tau: f64,
    pub diffusion: f64,
}

/// How a target dephasing time is turned into a diffusion constant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DephasingCalibration {
    /// `c = 4/(T₂*²τ)`, stationary σ = √2/T₂*.
    #[default]
    DiffusionFormula,
    /// `c = 1/(T₂*²τ)`: chosen so that the clock coherence `2⟨σx⟩`, whose
    /// splitting moves by `2δE`, decays as `exp(−(t/T₂*)²)`.
    ClockGap,
}

impl OuParams {
    pub fn new(tau: f64, diffusion: f64) -> Result<Self> {
        if !(tau > 0.0) || !tau.is_finite() {
            return Err(Error::param("tau", format!("correlation time must be > 0, got {tau}")));
        }
        if !(diffusion >= 0.0) || !diffusion.is_finite() {
            return Err(Error::param(
                "diffusion",
                format!("diffusion constant must be >= 0, got {diffusion}"),
            ));
        }
        Ok(OuParams { tau, diffusion })
    }

    /// System-noise channel for a target pure dephasing time.
    pub fn from_dephasing(t2_star: f64, tau: f64, calibration: DephasingCalibration) -> Result<Self> {
        if !(t2_star > 0.0) {
            return Err(Error::param("t2_star", format!("must be > 0, got {t2_star}")));
        }
        if !(tau > 0.0) {
            return Err(Error::param("tau", format!("must be > 0, got {tau}")));
        }
        let numerator = match calibration {
            DephasingCalibration::DiffusionFormula => 4.0,
            DephasingCalibration::ClockGap => 1.0,
        };
        // t2_star = ∞ gives c = 0
        Self::new(tau, numerator / (t2_star * t2_star * tau))
    }

    /// Drive-amplitude channel: `c_Ω = 2(δ_Ω·Ω₁)²/τ_Ω`, stationary σ = δ_Ω·Ω₁.
    pub fn amplitude(omega1: f64, delta_rel: f64, tau_omega: f64) -> Result<Self> {
        if !(omega1 > 0.0) {
            return Err(Error::param("omega1", format!("must be > 0, got {omega1}")));
        }
        if !(delta_rel >= 0.0) {
            return Err(Error::param("delta_omega", format!("must be >= 0, got {delta_rel}")));
        }
        if !(tau_omega > 0.0) {
            return Err(Error::param("tau_omega", format!("must be > 0, got {tau_omega}")));
        }
        let sigma = delta_rel * omega1;
        Self::new(tau_omega, 2.0 * sigma * sigma / tau_omega)
    }

    pub fn stationary_variance(&self) -> f64 {
        0.5 * self.diffusion * self.tau
    }

    pub fn stationary_std(&self) -> f64 {
        self.stationary_variance().sqrt()
    }
}

/// Stateful OU generator. Single owner; never shared between trajectories.
#[derive(Debug, Clone)]
pub struct OuProcess {
    params: OuParams,
    current: f64,
    seed: u64,
    rng: ChaCha8Rng,
    // (dt, e^{−dt/τ}, √((cτ/2)(1 − e^{−2dt/τ})))
    cached: (f64, f64, f64),
}

impl OuProcess {
    pub fn new(params: OuParams, initial: InitialCondition, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let current = match initial {
            InitialCondition::Stationary => {
                let n: f64 = rng.sample(StandardNormal);
                n * params.stationary_std()
            }
            InitialCondition::Zero => 0.0,
            InitialCondition::Value(v) => v,
        };
        OuProcess {
            params,
            current,
            seed,
            rng,
            cached: (f64::NAN, 0.0, 0.0),
        }
    }

    /// System noise δE for a target dephasing time, started from the
    /// stationary law.
    pub fn from_dephasing(t2_star: f64, tau: f64, seed: u64) -> Result<Self> {
        let params = OuParams::from_dephasing(t2_star, tau, DephasingCalibration::DiffusionFormula)?;
        Ok(Self::new(params, InitialCondition::Stationary, seed))
    }

    /// Drive-amplitude noise δΩ₁.
    pub fn amplitude_channel(
        omega1: f64,
        delta_rel: f64,
        tau_omega: f64,
        initial: InitialCondition,
        seed: u64,
    ) -> Result<Self> {
        Ok(Self::new(OuParams::amplitude(omega1, delta_rel, tau_omega)?, initial, seed))
    }

    pub fn params(&self) -> OuParams {
        self.params
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn value(&self) -> f64 {
        self.current
    }

    /// Advances by `dt` with the exact update and returns the new value.
    pub fn step(&mut self, dt: f64) -> Result<f64> {
        if !(dt > 0.0) {
            return Err(Error::param("dt", format!("OU step must be > 0, got {dt}")));
        }
        if self.cached.0 != dt {
            let decay = (-dt / self.params.tau).exp();
            let kick = (self.params.stationary_variance() * (1.0 - decay * decay)).sqrt();
            self.cached = (dt, decay, kick);
        }
        let (_, decay, kick) = self.cached;
        let n: f64 = self.rng.sample(StandardNormal);
        self.current = self.current * decay + n * kick;
        Ok(self.current)
    }
}

/// Noise channels understood by the Hamiltonian builders.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Channel {
    /// Strain / electric-field noise δE.
    System = 0,
    /// Relative drive-amplitude noise δΩ₁.
    Amplitude = 1,
    /// Magnetic noise δ_Bz.
    Magnetic = 2,
}

/// Frozen noise values used for one integration step (rad/μs).
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct NoiseSample {
    pub delta_e: f64,
    pub delta_omega1: f64,
    pub delta_bz: f64,
}

/// Source of piecewise-constant noise values on the integrator grid.
pub trait NoiseSource {
    fn sample(&self) -> NoiseSample;
    fn advance(&mut self, dt: f64) -> Result<()>;
}

/// Parameters and initial condition for one channel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelSpec {
    pub params: OuParams,
    pub initial: InitialCondition,
}

/// Which channels are active in a scenario.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct NoiseConfig {
    pub system: Option<ChannelSpec>,
    pub amplitude: Option<ChannelSpec>,
    pub magnetic: Option<ChannelSpec>,
}

impl NoiseConfig {
    pub fn none() -> Self {
        Self::default()
    }

    pub fn is_silent(&self) -> bool {
        let quiet = |c: &Option<ChannelSpec>| match c {
            None => true,
            Some(spec) => {
                spec.params.diffusion == 0.0
                    && matches!(spec.initial, InitialCondition::Zero | InitialCondition::Stationary)
            }
        };
        quiet(&self.system) && quiet(&self.amplitude) && quiet(&self.magnetic)
    }

    /// Largest stationary standard deviation of any channel (rad/μs).
    pub fn max_std(&self) -> f64 {
        [self.system, self.amplitude, self.magnetic]
            .iter()
            .flatten()
            .map(|c| c.params.stationary_std())
            .fold(0.0, f64::max)
    }

    /// Independent generators for one trajectory. Channel `k` is seeded with
    /// `derive_seed(trajectory_seed, &[k])`.
    pub fn spawn(&self, trajectory_seed: u64) -> LiveNoise {
        let make = |spec: &Option<ChannelSpec>, ch: Channel| {
            spec.map(|s| OuProcess::new(s.params, s.initial, derive_seed(trajectory_seed, &[ch as u64])))
        };
        LiveNoise {
            system: make(&self.system, Channel::System),
            amplitude: make(&self.amplitude, Channel::Amplitude),
            magnetic: make(&self.magnetic, Channel::Magnetic),
        }
    }
}

/// OU processes advanced alongside the integrator.
#[derive(Debug, Clone)]
pub struct LiveNoise {
    pub system: Option<OuProcess>,
    pub amplitude: Option<OuProcess>,
    pub magnetic: Option<OuProcess>,
}

impl LiveNoise {
    pub fn silent() -> Self {
        LiveNoise {
            system: None,
            amplitude: None,
            magnetic: None,
        }
    }
}

impl NoiseSource for LiveNoise {
    #[inline]
    fn sample(&self) -> NoiseSample {
        NoiseSample {
            delta_e: self.system.as_ref().map_or(0.0, OuProcess::value),
            delta_omega1: self.amplitude.as_ref().map_or(0.0, OuProcess::value),
            delta_bz: self.magnetic.as_ref().map_or(0.0, OuProcess::value),
        }
    }

    #[inline]
    fn advance(&mut self, dt: f64) -> Result<()> {
        for p in [&mut self.system, &mut self.amplitude, &mut self.magnetic]
            .into_iter()
            .flatten()
        {
            p.step(dt)?;
        }
        Ok(())
    }
}

/// Pre-recorded noise path, replayed with a stride (or with each sample held
/// for several steps) so that runs on different grids see the same
/// realization.
#[derive(Debug, Clone)]
pub struct RecordedNoise {
    samples: std::sync::Arc<Vec<NoiseSample>>,
    stride: usize,
    hold: usize,
    held_for: usize,
    index: usize,
}

impl RecordedNoise {
    /// Records `n_steps + 1` samples spaced by `dt`.
    pub fn record(mut source: impl NoiseSource, dt: f64, n_steps: usize) -> Result<Self> {
        let mut samples = Vec::with_capacity(n_steps + 1);
        samples.push(source.sample());
        for _ in 0..n_steps {
            source.advance(dt)?;
            samples.push(source.sample());
        }
        Ok(RecordedNoise {
            samples: std::sync::Arc::new(samples),
            stride: 1,
            hold: 1,
            held_for: 0,
            index: 0,
        })
    }

    /// Replays the same path, skipping `stride − 1` samples per step.
    pub fn decimated(&self, stride: usize) -> Self {
        RecordedNoise {
            samples: self.samples.clone(),
            stride: stride.max(1),
            hold: 1,
            held_for: 0,
            index: 0,
        }
    }

    /// Replays the same path with every sample held for `hold` steps.
    pub fn held(&self, hold: usize) -> Self {
        RecordedNoise {
            samples: self.samples.clone(),
            stride: 1,
            hold: hold.max(1),
            held_for: 0,
            index: 0,
        }
    }

    pub fn samples(&self) -> &[NoiseSample] {
        &self.samples
    }
}

impl NoiseSource for RecordedNoise {
    fn sample(&self) -> NoiseSample {
        self.samples[self.index.min(self.samples.len() - 1)]
    }

    fn advance(&mut self, _dt: f64) -> Result<()> {
        self.held_for += 1;
        if self.held_for == self.hold {
            self.held_for = 0;
            self.index += self.stride;
        }
        Ok(())
    }
}
