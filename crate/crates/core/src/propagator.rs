//! Piecewise-constant exponential time stepping of a pure state under a
//! time-dependent, noise-modulated Hamiltonian.
//!
//! Each step freezes the noise, builds a Hermitian step generator, applies
//! `exp(−i·H·dt)` and advances the noise. Two generators are available:
//!
//! * [`Stepper::Magnus4`] (default): fourth-order Magnus with two
//!   Gauss–Legendre nodes `c₁,₂ = 1/2 ∓ √3/6`,
//!   `H = (H₁+H₂)/2 − i(√3·dt/12)[H₂, H₁]`.
//! * [`Stepper::Midpoint`]: `H(t + dt/2)`, second order.
//!
//! The state is never renormalized; norm drift above [`NORM_DRIFT_TOL`] is an
//! error.

use crate::error::{Error, Result};
use crate::noise::{NoiseConfig, NoiseSample, NoiseSource, RecordedNoise};
use crate::spinops::{c, ensure_hermitian, Dim, Eigen, HermitianOps, Op, SpinState, C64};
use crate::TWO_PI;

pub const DEFAULT_GUARD: f64 = 20.0;
pub const NORM_DRIFT_TOL: f64 = 1e-6;
pub const CONVERGENCE_TOL: f64 = 1e-4;

/// Time-dependent Hamiltonian with frozen-noise inputs.
pub trait HamiltonianSource<const N: usize>: Sync {
    fn hamiltonian(&self, t: f64, noise: &NoiseSample) -> Op<N>;

    /// Upper bound on the fastest angular frequency in the Hamiltonian
    /// (rad/μs). Sets the automatic step size.
    fn max_frequency(&self) -> f64;

    fn noise_config(&self) -> &NoiseConfig;

    /// Generator `G` of the frame in which observables are reported:
    /// states are measured as `e^{iGt}ψ`.
    fn measurement_frame(&self) -> Option<Op<N>> {
        None
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Stepper {
    #[default]
    Magnus4,
    Midpoint,
}

impl Stepper {
    pub fn name(self) -> &'static str {
        match self {
            Stepper::Magnus4 => "magnus4",
            Stepper::Midpoint => "midpoint",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "magnus4" => Some(Stepper::Magnus4),
            "midpoint" => Some(Stepper::Midpoint),
            _ => None,
        }
    }
}

/// Integration settings.
///
/// The step guard requires at least `guard` steps per period of the fastest
/// angular frequency: `dt·f_max/(2π) ≤ 1/guard`. When `dt` is `None` the
/// largest step meeting the guard (and `max_dt`) is chosen, shrunk so that
/// `sample_interval` is a whole number of steps.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegrationConfig {
    pub dt: Option<f64>,
    pub t_end: f64,
    /// Spacing of recorded samples (μs); `None` records every step.
    pub sample_interval: Option<f64>,
    pub guard: f64,
    pub max_dt: Option<f64>,
    pub stepper: Stepper,
}

impl IntegrationConfig {
    pub fn new(t_end: f64) -> Self {
        IntegrationConfig {
            dt: None,
            t_end,
            sample_interval: None,
            guard: DEFAULT_GUARD,
            max_dt: None,
            stepper: Stepper::default(),
        }
    }

    pub fn sampled_every(mut self, interval: f64) -> Self {
        self.sample_interval = Some(interval);
        self
    }

    pub fn with_dt(mut self, dt: f64) -> Self {
        self.dt = Some(dt);
        self
    }

    pub fn with_stepper(mut self, stepper: Stepper) -> Self {
        self.stepper = stepper;
        self
    }

    pub fn with_guard(mut self, guard: f64) -> Self {
        self.guard = guard;
        self
    }

    /// Resolves step size, step count and sampling stride for a scenario
    /// whose fastest angular frequency is `f_max`.
    pub fn resolve(&self, f_max: f64) -> Result<TimeGrid> {
        if !(self.t_end > 0.0) || !self.t_end.is_finite() {
            return Err(Error::param("t_end", format!("must be > 0, got {}", self.t_end)));
        }
        if !(self.guard > 0.0) {
            return Err(Error::param("guard", format!("must be > 0, got {}", self.guard)));
        }
        if let Some(s) = self.sample_interval {
            if !(s > 0.0) {
                return Err(Error::param("sample_interval", format!("must be > 0, got {s}")));
            }
        }
        let limit = if f_max > 0.0 {
            TWO_PI / (self.guard * f_max)
        } else {
            f64::INFINITY
        };
        match self.dt {
            Some(dt) => {
                if !(dt > 0.0) {
                    return Err(Error::param("dt", format!("must be > 0, got {dt}")));
                }
                if dt > limit * (1.0 + 1e-12) {
                    return Err(Error::StepGuard { dt, f_max, limit });
                }
                let stride = self
                    .sample_interval
                    .map_or(1, |s| ((s / dt).round() as usize).max(1));
                let n_steps = ((self.t_end / dt).round() as usize).max(1);
                Ok(TimeGrid { dt, n_steps, stride })
            }
            None => {
                let cap = self.max_dt.map_or(limit, |m| m.min(limit));
                match self.sample_interval {
                    Some(s) => {
                        let stride = if cap.is_finite() { (s / cap).ceil().max(1.0) as usize } else { 1 };
                        let dt = s / stride as f64;
                        let n_samples = ((self.t_end / s).round() as usize).max(1);
                        Ok(TimeGrid {
                            dt,
                            n_steps: n_samples * stride,
                            stride,
                        })
                    }
                    None => {
                        let n_steps = if cap.is_finite() {
                            (self.t_end / cap).ceil().max(1.0) as usize
                        } else {
                            1
                        };
                        Ok(TimeGrid {
                            dt: self.t_end / n_steps as f64,
                            n_steps,
                            stride: 1,
                        })
                    }
                }
            }
        }
    }
}

/// Resolved integration grid: `n_steps` steps of `dt`, recording every
/// `stride` steps (and at `t = 0`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    pub dt: f64,
    pub n_steps: usize,
    pub stride: usize,
}

impl TimeGrid {
    pub fn sample_times(&self) -> Vec<f64> {
        (0..=self.n_steps)
            .step_by(self.stride)
            .map(|k| k as f64 * self.dt)
            .collect()
    }

    pub fn n_samples(&self) -> usize {
        self.n_steps / self.stride + 1
    }
}

/// Hermitian observable, optionally measured in a further rotating frame
/// `e^{iGt}ψ`.
#[derive(Debug, Clone)]
pub struct Observable<const N: usize> {
    pub name: String,
    pub op: Op<N>,
    frame: Option<Eigen<N>>,
}

impl<const N: usize> Observable<N>
where
    Dim<N>: HermitianOps<N>,
{
    pub fn new(name: impl Into<String>, op: Op<N>) -> Result<Self> {
        ensure_hermitian(&op)?;
        Ok(Observable {
            name: name.into(),
            op,
            frame: None,
        })
    }

    /// Measures in the interaction picture of `generator`.
    pub fn in_frame(mut self, generator: &Op<N>) -> Result<Self> {
        self.frame = Some(crate::spinops::eigen_hermitian(generator)?);
        Ok(self)
    }

    #[inline]
    fn measure(&self, psi: &nalgebra::SVector<C64, N>, t: f64) -> f64 {
        match &self.frame {
            None => crate::spinops::expectation_unchecked(psi, &self.op),
            Some(f) => crate::spinops::expectation_unchecked(&f.propagate(psi, -t), &self.op),
        }
    }
}

/// One noise realization: sample times and `values[observable][sample]`.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryResult {
    pub times: Vec<f64>,
    pub names: Vec<String>,
    pub values: Vec<Vec<f64>>,
    pub max_norm_drift: f64,
    pub final_state_norm: f64,
}

#[inline]
fn step_generator<const N: usize, S>(source: &S, stepper: Stepper, t0: f64, dt: f64, noise: &NoiseSample) -> Op<N>
where
    S: HamiltonianSource<N> + ?Sized,
{
    match stepper {
        Stepper::Midpoint => source.hamiltonian(t0 + 0.5 * dt, noise),
        Stepper::Magnus4 => {
            const C1: f64 = 0.5 - 0.288_675_134_594_812_9; // √3/6
            const C2: f64 = 0.5 + 0.288_675_134_594_812_9;
            const W: f64 = 0.144_337_567_297_406_43; // √3/12
            let h1 = source.hamiltonian(t0 + C1 * dt, noise);
            let h2 = source.hamiltonian(t0 + C2 * dt, noise);
            let comm = h2 * h1 - h1 * h2;
            let mut h = (h1 + h2) * c(0.5) - comm * C64::new(0.0, W * dt);
            // symmetrize away roundoff
            h = (h + h.adjoint()) * c(0.5);
            h
        }
    }
}

/// Integrates one trajectory.
pub fn evolve<const N: usize, S, R>(
    initial: &SpinState<N>,
    source: &S,
    mut noise: R,
    cfg: &IntegrationConfig,
    observables: &[Observable<N>],
) -> Result<TrajectoryResult>
where
    S: HamiltonianSource<N> + ?Sized,
    R: NoiseSource,
    Dim<N>: HermitianOps<N>,
{
    let grid = cfg.resolve(source.max_frequency())?;
    evolve_on_grid(initial, source, &mut noise, &grid, cfg.stepper, observables)
}

pub(crate) fn evolve_on_grid<const N: usize, S, R>(
    initial: &SpinState<N>,
    source: &S,
    noise: &mut R,
    grid: &TimeGrid,
    stepper: Stepper,
    observables: &[Observable<N>],
) -> Result<TrajectoryResult>
where
    S: HamiltonianSource<N> + ?Sized,
    R: NoiseSource,
    Dim<N>: HermitianOps<N>,
{
    let n_samples = grid.n_samples();
    let mut times = Vec::with_capacity(n_samples);
    let mut values: Vec<Vec<f64>> = observables.iter().map(|_| Vec::with_capacity(n_samples)).collect();
    let frame = match source.measurement_frame() {
        Some(g) => Some(crate::spinops::eigen_hermitian(&g)?),
        None => None,
    };

    let mut psi = *initial.amplitudes();
    let mut max_drift: f64 = 0.0;
    let dt = grid.dt;

    let mut record = |psi: &nalgebra::SVector<C64, N>, t: f64, times: &mut Vec<f64>, values: &mut Vec<Vec<f64>>| -> Result<()> {
        let drift = (psi.norm() - 1.0).abs();
        max_drift = max_drift.max(drift);
        if drift > NORM_DRIFT_TOL {
            return Err(Error::NormDrift { drift, t });
        }
        let measured = match &frame {
            Some(f) => f.propagate(psi, -t),
            None => *psi,
        };
        times.push(t);
        for (obs, v) in observables.iter().zip(values.iter_mut()) {
            v.push(obs.measure(&measured, t));
        }
        Ok(())
    };

    record(&psi, 0.0, &mut times, &mut values)?;
    for k in 0..grid.n_steps {
        let t0 = k as f64 * dt;
        let sample = noise.sample();
        let h = step_generator(source, stepper, t0, dt, &sample);
        let eig: Eigen<N> = <Dim<N> as HermitianOps<N>>::eigen_hermitian(&h);
        psi = eig.propagate(&psi, dt);
        noise.advance(dt)?;
        if (k + 1) % grid.stride == 0 {
            record(&psi, (k + 1) as f64 * dt, &mut times, &mut values)?;
        }
    }
    let final_norm = psi.norm();
    Ok(TrajectoryResult {
        times,
        names: observables.iter().map(|o| o.name.clone()).collect(),
        values,
        max_norm_drift: max_drift.max((final_norm - 1.0).abs()),
        final_state_norm: final_norm,
    })
}

/// Result of a step-halving comparison.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvergenceReport {
    pub dt: f64,
    pub max_deviation: f64,
    pub passed: bool,
}

/// Runs at `dt` and `dt/2` on one noise realization, piecewise constant on
/// the coarse grid in both runs, and reports the largest observable
/// difference at the shared sample times. Holding the path fixed isolates the
/// stepping error from the resolution of the noise process itself (see
/// [`noise_resolution_check`]).
pub fn convergence_check<const N: usize, S>(
    initial: &SpinState<N>,
    source: &S,
    cfg: &IntegrationConfig,
    observables: &[Observable<N>],
    seed: u64,
) -> Result<ConvergenceReport>
where
    S: HamiltonianSource<N> + ?Sized,
    Dim<N>: HermitianOps<N>,
{
    let coarse = cfg.resolve(source.max_frequency())?;
    let path = RecordedNoise::record(source.noise_config().spawn(seed), coarse.dt, coarse.n_steps)?;
    compare_halved(initial, source, cfg.stepper, observables, &coarse, path.clone(), path.held(2))
}

/// Like [`convergence_check`], but the fine run sees the noise sampled on
/// the fine grid (and the coarse run every other fine sample), so the
/// difference includes the change in noise resolution.
pub fn noise_resolution_check<const N: usize, S>(
    initial: &SpinState<N>,
    source: &S,
    cfg: &IntegrationConfig,
    observables: &[Observable<N>],
    seed: u64,
) -> Result<ConvergenceReport>
where
    S: HamiltonianSource<N> + ?Sized,
    Dim<N>: HermitianOps<N>,
{
    let coarse = cfg.resolve(source.max_frequency())?;
    let path = RecordedNoise::record(source.noise_config().spawn(seed), 0.5 * coarse.dt, 2 * coarse.n_steps)?;
    compare_halved(initial, source, cfg.stepper, observables, &coarse, path.decimated(2), path.decimated(1))
}

fn compare_halved<const N: usize, S>(
    initial: &SpinState<N>,
    source: &S,
    stepper: Stepper,
    observables: &[Observable<N>],
    coarse: &TimeGrid,
    mut coarse_noise: RecordedNoise,
    mut fine_noise: RecordedNoise,
) -> Result<ConvergenceReport>
where
    S: HamiltonianSource<N> + ?Sized,
    Dim<N>: HermitianOps<N>,
{
    let fine = TimeGrid {
        dt: 0.5 * coarse.dt,
        n_steps: 2 * coarse.n_steps,
        stride: 2 * coarse.stride,
    };
    let a = evolve_on_grid(initial, source, &mut coarse_noise, coarse, stepper, observables)?;
    let b = evolve_on_grid(initial, source, &mut fine_noise, &fine, stepper, observables)?;
    let max_deviation = max_abs_difference(&a, &b);
    Ok(ConvergenceReport {
        dt: coarse.dt,
        max_deviation,
        passed: max_deviation < CONVERGENCE_TOL,
    })
}

/// Largest `|a − b|` over observables and shared samples.
pub fn max_abs_difference(a: &TrajectoryResult, b: &TrajectoryResult) -> f64 {
    a.values
        .iter()
        .zip(&b.values)
        .flat_map(|(x, y)| x.iter().zip(y).map(|(p, q)| (p - q).abs()))
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hamiltonians::{DriveParams, Frame, HamiltonianSpec, StaticParams};
    use crate::mhz;
    use crate::noise::LiveNoise;
    use crate::spinops::{projector, ZERO};
    use approx::assert_relative_eq;

    struct Constant<const N: usize>(Op<N>, NoiseConfig);

    impl<const N: usize> HamiltonianSource<N> for Constant<N> {
        fn hamiltonian(&self, _t: f64, _n: &NoiseSample) -> Op<N> {
            self.0
        }
        fn max_frequency(&self) -> f64 {
            self.0.norm()
        }
        fn noise_config(&self) -> &NoiseConfig {
            &self.1
        }
    }

    fn populations() -> Vec<Observable<3>> {
        vec![
            Observable::new("P+1", projector(&SpinState::plus1())).unwrap(),
            Observable::new("P0", projector(&SpinState::zero())).unwrap(),
            Observable::new("P-1", projector(&SpinState::minus1())).unwrap(),
        ]
    }

    #[test]
    fn zero_hamiltonian_keeps_state() {
        let src = Constant(Op::<3>::zeros(), NoiseConfig::none());
        let psi = SpinState::even_superposition(&SpinState::plus1(), &SpinState::zero()).unwrap();
        let cfg = IntegrationConfig::new(5.0).with_dt(0.1);
        let r = evolve(&psi, &src, LiveNoise::silent(), &cfg, &populations()).unwrap();
        assert_eq!(r.times.len(), 51);
        for k in 0..r.times.len() {
            assert_relative_eq!(r.values[0][k], 0.5, epsilon = 1e-15);
            assert_relative_eq!(r.values[2][k], 0.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn orthogonal_rabi_oscillation() {
        let p = StaticParams::clock(mhz(24.0)).unwrap();
        let om = mhz(10.0);
        let spec = HamiltonianSpec::new(p, DriveParams::orthogonal(om, &p), Frame::RotRwa);
        let cfg = IntegrationConfig::new(1.0).sampled_every(0.01);
        let r = evolve(&SpinState::zero(), &spec, LiveNoise::silent(), &cfg, &populations()).unwrap();
        for (k, &t) in r.times.iter().enumerate() {
            assert_relative_eq!(r.values[0][k], (om * t).sin().powi(2), epsilon = 1e-9);
        }
    }

    #[test]
    fn step_guard_rejects_coarse_dt() {
        let p = StaticParams::clock(mhz(24.0)).unwrap();
        let spec = HamiltonianSpec::new(p, DriveParams::orthogonal(mhz(10.0), &p), Frame::Lab);
        let cfg = IntegrationConfig::new(1.0).with_dt(0.01);
        let err = evolve(&SpinState::zero(), &spec, LiveNoise::silent(), &cfg, &populations()).unwrap_err();
        assert_eq!(err.guard_name(), Some("step"));
        match err {
            Error::StepGuard { f_max, .. } => assert_relative_eq!(f_max, spec.f_max()),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn grid_resolution() {
        let cfg = IntegrationConfig::new(10.0).sampled_every(0.5);
        let g = cfg.resolve(100.0).unwrap();
        assert!(g.dt * 100.0 / TWO_PI <= 1.0 / DEFAULT_GUARD + 1e-15);
        assert_relative_eq!(g.dt * g.stride as f64, 0.5, max_relative = 1e-14);
        assert_eq!(g.n_samples(), 21);
        assert_relative_eq!(*g.sample_times().last().unwrap(), 10.0, max_relative = 1e-12);
        assert!(IntegrationConfig::new(-1.0).resolve(1.0).is_err());
        assert!(IntegrationConfig::new(1.0).with_dt(0.0).resolve(1.0).is_err());
    }

    #[test]
    fn non_hermitian_observable_rejected() {
        let mut op = Op::<3>::zeros();
        op[(0, 1)] = c(1.0);
        assert!(Observable::new("bad", op).is_err());
        let mut ok = Op::<3>::zeros();
        ok[(0, 1)] = c(1.0);
        ok[(1, 0)] = c(1.0);
        assert!(Observable::new("ok", ok).is_ok());
        let _ = ZERO;
    }

    #[test]
    fn deterministic_trajectories() {
        let p = StaticParams::clock(mhz(24.0)).unwrap();
        let noise = NoiseConfig {
            system: Some(crate::noise::ChannelSpec {
                params: crate::noise::OuParams::from_dephasing(3.0, 20.0, Default::default()).unwrap(),
                initial: crate::noise::InitialCondition::Stationary,
            }),
            ..Default::default()
        };
        let spec = HamiltonianSpec::new(p, DriveParams::linear(mhz(10.0), &p), Frame::RotRwa).with_noise(noise);
        let cfg = IntegrationConfig::new(2.0).sampled_every(0.05);
        let a = evolve(&SpinState::zero(), &spec, noise.spawn(11), &cfg, &populations()).unwrap();
        let b = evolve(&SpinState::zero(), &spec, noise.spawn(11), &cfg, &populations()).unwrap();
        assert_eq!(a, b);
        assert!(a.max_norm_drift < 1e-12);
    }
}
