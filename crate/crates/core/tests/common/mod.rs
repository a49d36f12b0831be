//! Helpers shared by the integration tests and the acceptance target.
#![allow(dead_code)]

use clocksense_core::effective::{BasisTag, EffectiveKind, EffectiveSpec};
use clocksense_core::experiments::{scheme_tag, DephasingSpec};
use clocksense_core::hamiltonians::{h0_prime, DriveScheme};
use clocksense_core::noise::RecordedNoise;
use clocksense_core::propagator::{evolve, HamiltonianSource, IntegrationConfig, Observable, TrajectoryResult};
use clocksense_core::spinops::{sigma_x, QubitState, SpinState};
use clocksense_core::{Result, TWO_PI};
use num_complex::Complex64;

/// A full three-level trajectory and its two-level counterpart driven by the
/// same recorded noise path.
pub struct OraclePair {
    pub full: TrajectoryResult,
    pub effective: TrajectoryResult,
}

impl OraclePair {
    pub fn rms(&self) -> f64 {
        let a = &self.full.values[0];
        let b = &self.effective.values[0];
        (a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>() / a.len() as f64).sqrt()
    }
}

fn effective_kind(spec: &DephasingSpec, scheme: DriveScheme) -> EffectiveKind {
    match scheme {
        DriveScheme::None => EffectiveKind::Clock { ex: spec.ex },
        DriveScheme::Linear => EffectiveKind::Linear { omega: spec.omega1 },
        DriveScheme::Orthogonal => EffectiveKind::Orthogonal { omega: spec.omega1 },
        DriveScheme::PhaseModulated => EffectiveKind::PhaseMod {
            omega1: spec.omega1,
            omega2: spec.omega2,
        },
    }
}

/// Single-trajectory comparison of the rotating-frame three-level model with
/// the two-level model of the same scheme, observable `2σ_x` in the scheme
/// basis. The clock scheme is compared in the lab frame and the
/// phase-modulated scheme in the second rotating frame.
pub fn oracle_pair(spec: &DephasingSpec, scheme: DriveScheme, t_end: f64, seed: u64) -> Result<OraclePair> {
    let full = spec.hamiltonian(scheme)?;
    let eff = EffectiveSpec::new(effective_kind(spec, scheme), spec.noise(scheme)?)?;
    let tag = scheme_tag(scheme);
    let f_max = full.max_frequency().max(eff.max_frequency());
    let dt = TWO_PI / (spec.integration(scheme).guard * f_max);
    let cfg = IntegrationConfig::new(t_end).with_dt(dt).sampled_every(4.0 * dt);
    let grid = cfg.resolve(f_max)?;
    let path = RecordedNoise::record(spec.noise(scheme)?.spawn(seed), dt, grid.n_steps)?;

    let sx3 = tag.sigma_x3() * Complex64::new(2.0, 0.0);
    let obs3 = match scheme {
        DriveScheme::None => Observable::new("2sx", sx3)?.in_frame(&(-h0_prime(&full.static_params)))?,
        DriveScheme::PhaseModulated => {
            let g = BasisTag::PhaseMod.sigma_x3() * Complex64::new(2.0 * spec.omega1, 0.0);
            Observable::new("2sx", sx3)?.in_frame(&g)?
        }
        _ => Observable::new("2sx", sx3)?,
    };
    let obs2 = Observable::new("2sx", sigma_x() * Complex64::new(2.0, 0.0))?;
    let plus: QubitState = SpinState::even_superposition(&SpinState::basis(0), &SpinState::basis(1))?;
    Ok(OraclePair {
        full: evolve(&tag.initial_superposition(), &full, path.clone(), &cfg, &[obs3])?,
        effective: evolve(&plus, &eff, path, &cfg, &[obs2])?,
    })
}
