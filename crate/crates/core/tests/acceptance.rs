//! Acceptance report: one PASS/FAIL line per criterion, followed by the
//! numbers behind it. Exits non-zero when any criterion fails.

mod common;

use std::process::ExitCode;
use std::time::Instant;

use clocksense_core::effective::{gap_linear, gap_orthogonal, linear_eigenvectors};
use clocksense_core::ensemble::{envelope, EnvelopeMethod};
use clocksense_core::experiments::{
    ac_sensing_trace, ac_spectrum, dephasing_scheme, rabi_rate_check, scheme_tag, DephasingSpec, SchemeRun,
    SensingModel, SensingSpec, SpectrumSpec, SweepVariable,
};
use clocksense_core::hamiltonians::{h_rotating, DriveParams, DriveScheme, StaticParams};
use clocksense_core::noise::{DephasingCalibration, InitialCondition, NoiseSample, OuParams, OuProcess};
use clocksense_core::propagator::{
    convergence_check, evolve, noise_resolution_check, ConvergenceReport, HamiltonianSource, IntegrationConfig,
    Observable,
};
use clocksense_core::spinops::{eigen_hermitian, projector, unitarity_error, SpinState};
use clocksense_core::{mhz, TWO_PI};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const DEPHASING_TRIALS: usize = 500;
const SENSING_TRIALS: usize = 100;
const SEEDS: [u64; 3] = [1, 2, 3];

struct Report {
    failed: Vec<u32>,
}

impl Report {
    fn line(&mut self, n: u32, pass: bool, summary: String) {
        println!("criterion {n}: {} | {summary}", if pass { "PASS" } else { "FAIL" });
        if !pass {
            self.failed.push(n);
        }
    }
}

fn info(s: String) {
    println!("    {s}");
}

fn dephasing_spec(seed: u64) -> DephasingSpec {
    DephasingSpec {
        n_trials: DEPHASING_TRIALS,
        base_seed: seed,
        ..Default::default()
    }
}

fn run(spec: &DephasingSpec, scheme: DriveScheme) -> SchemeRun {
    let start = Instant::now();
    let r = dephasing_scheme(spec, scheme).expect("dephasing run");
    info(format!(
        "seed {} scheme {:<15} T2 = {:7.3} us{} (p = {}, {:.1} s)",
        spec.base_seed,
        scheme.name(),
        r.fit.t2,
        if r.fit.lower_bound { " lower bound" } else { "" },
        r.fit.stretch_exponent.map_or("-".into(), |p| format!("{p:.2}")),
        start.elapsed().as_secs_f64()
    ));
    r
}

fn within(x: f64, target: f64, rel: f64) -> bool {
    (x - target).abs() <= rel * target
}

fn main() -> ExitCode {
    let mut report = Report { failed: Vec::new() };
    let t0 = Instant::now();

    println!("dephasing comparison: Ex = 2pi*24, Omega1 = 2pi*10, Omega2 = 2pi*1, T2* = 3 us, tau = 20 us, {DEPHASING_TRIALS} trials");
    let base = dephasing_spec(SEEDS[0]);
    let runs: Vec<SchemeRun> = DriveScheme::ALL.iter().map(|&s| run(&base, s)).collect();
    let (a, b, c, d) = (&runs[0], &runs[1], &runs[2], &runs[3]);

    // 1
    report.line(
        1,
        within(a.fit.t2, 3.0, 0.20) && !a.fit.lower_bound,
        format!("no-drive T2* = {:.3} us, target 3 us +/- 20%", a.fit.t2),
    );
    let cross = DephasingSpec {
        calibration: DephasingCalibration::ClockGap,
        ..dephasing_spec(SEEDS[0])
    };
    let a_cross = dephasing_scheme(&cross, DriveScheme::None).expect("cross-check");
    let b_cross = dephasing_scheme(&cross, DriveScheme::Linear).expect("cross-check");
    info(format!(
        "analytic 1/e time for c = 4/(T2*^2 tau) is T2*/2 = 1.5 us; with c = 1/(T2*^2 tau): T2*(a) = {:.3} us, T2(b) = {:.3} us",
        a_cross.fit.t2, b_cross.fit.t2
    ));

    // 2
    report.line(
        2,
        within(b.fit.t2, 4.0, 0.25) && b.fit.t2 < 2.0 * a.fit.t2,
        format!(
            "linear T2 = {:.3} us, target 4 us +/- 25%; T2(b) < 2 T2*(a) = {:.3}: {}",
            b.fit.t2,
            2.0 * a.fit.t2,
            b.fit.t2 < 2.0 * a.fit.t2
        ),
    );

    // 3
    report.line(
        3,
        within(c.fit.t2, 11.0, 0.30) && !c.fit.lower_bound,
        format!("orthogonal T2 = {:.3} us, target 11 us +/- 30%", c.fit.t2),
    );
    if let Some((mean, peak)) = c.leakage {
        info(format!("orthogonal |-1> population: mean {mean:.2e}, peak {peak:.2e} (monitor limit 0.1)"));
    }

    // 4
    let (env, _) = envelope(&d.result.times, &d.result.mean[0], EnvelopeMethod::Auto);
    let k100 = d.result.sample_at(100.0);
    let e100 = env[k100];
    report.line(
        4,
        d.fit.lower_bound && e100 > (-1.0f64).exp(),
        format!(
            "phase-modulated envelope at t = {:.1} us is {:.3} (1/e = 0.368); lower-bound flag {} at {:.0} us",
            d.result.times[k100], e100, d.fit.lower_bound, d.fit.t2
        ),
    );
    if let Some((mean, peak)) = d.leakage {
        info(format!("phase-modulated |-1> population: mean {mean:.2e}, peak {peak:.2e}"));
    }

    // 5
    let start = Instant::now();
    let sensing = SensingSpec {
        n_trials: SENSING_TRIALS,
        ..Default::default()
    };
    let center = sensing.resonant_drive().expect("resonant drive").omega1;
    let spectrum = ac_spectrum(&SpectrumSpec {
        sensing: sensing.clone(),
        t_probe: 40.0,
        variable: SweepVariable::Omega1,
        grid: SpectrumSpec::linear_grid(center, 0.15, 25),
    })
    .expect("spectrum");
    let res = spectrum.resonance;
    report.line(
        5,
        spectrum.resonance_confirmed(),
        format!(
            "extremum Omega1/2pi = {:.5} MHz, predicted {:.5} MHz, offset {:.2e} rad/us, FWHM {} rad/us",
            res.extremum / TWO_PI,
            spectrum.predicted / TWO_PI,
            (res.extremum - spectrum.predicted).abs(),
            res.fwhm.map_or("n/a".into(), |w| format!("{w:.3e}"))
        ),
    );
    info(format!(
        "{} of depth {:.3} below baseline {:.3}; {} points x {SENSING_TRIALS} trials, t = 40 us ({:.1} s)",
        if res.dip { "dip" } else { "peak" },
        res.depth,
        res.baseline,
        spectrum.rows.len(),
        start.elapsed().as_secs_f64()
    ));

    // 6
    let start = Instant::now();
    let mut band_ok = true;
    let mut parts = Vec::new();
    for (ex, f_ac) in [(110.0, 0.5), (110.0, 5.0), (110.0, 50.0), (110.0, 100.0), (24.0, 0.5), (24.0, 5.0), (24.0, 24.0)] {
        let spec = SensingSpec {
            n_trials: SENSING_TRIALS,
            t_end: 60.0,
            ..SensingSpec::panel(ex, f_ac)
        };
        let r = ac_sensing_trace(&spec).expect("sensing trace");
        band_ok &= r.amplitude > 5.0 * r.max_stderr;
        parts.push(format!("{ex}/{f_ac}: {:.1}", r.snr()));
    }
    report.line(
        6,
        band_ok,
        format!("amplitude / max stderr (Ex/omega_ac in MHz): {}", parts.join(", ")),
    );
    info(format!("{SENSING_TRIALS} trials, 60 us each ({:.1} s)", start.elapsed().as_secs_f64()));

    // 7
    let mut sub = Vec::new();
    sub.push(("unitarity/norm", norm_invariants()));
    sub.push(("gap formulas", gap_formulas()));
    sub.push(("insensitivity slopes", insensitivity()));
    sub.push(("OU variance", ou_variance()));
    sub.push(("effective vs full", oracle_agreement()));
    sub.push(("self-convergence", self_convergence()));
    let ok7 = sub.iter().all(|s| s.1);
    report.line(
        7,
        ok7,
        sub.iter()
            .map(|(n, p)| format!("{n} {}", if *p { "ok" } else { "FAILED" }))
            .collect::<Vec<_>>()
            .join(", "),
    );
    match rabi_rate_check(&SensingSpec::default()) {
        Ok(r) => info(format!(
            "signal Rabi rate: g/8 = {:.5}, two-level {:.5}, three-level {:.5} rad/us (dressed-gap shift {:+.4} rad/us)",
            r.predicted, r.effective, r.full, r.gap_shift
        )),
        Err(e) => info(format!("signal Rabi rate check failed: {e}")),
    }

    // 8
    let mut order_ok = true;
    let mut parts = Vec::new();
    for &seed in &SEEDS {
        let (tb, tc, td) = if seed == SEEDS[0] {
            (b.fit.t2, c.fit.t2, d.fit.t2)
        } else {
            let spec = dephasing_spec(seed);
            (
                run(&spec, DriveScheme::Linear).fit.t2,
                run(&spec, DriveScheme::Orthogonal).fit.t2,
                run(&spec, DriveScheme::PhaseModulated).fit.t2,
            )
        };
        let ok = td > tc && tc > tb;
        order_ok &= ok;
        parts.push(format!("seed {seed}: {td:.1} > {tc:.2} > {tb:.2} {ok}"));
    }
    report.line(8, order_ok, format!("T2(d) > T2(c) > T2(b): {}", parts.join("; ")));

    println!("total {:.0} s", t0.elapsed().as_secs_f64());
    if report.failed.is_empty() {
        println!("all criteria PASS");
        ExitCode::SUCCESS
    } else {
        println!("failing criteria: {:?}", report.failed);
        ExitCode::FAILURE
    }
}

fn norm_invariants() -> bool {
    let spec = dephasing_spec(11);
    let mut worst: f64 = 0.0;
    for scheme in DriveScheme::ALL {
        let h = spec.hamiltonian(scheme).unwrap();
        let tag = scheme_tag(scheme);
        let cfg = IntegrationConfig::new(20.0).sampled_every(0.5).with_guard(spec.integration(scheme).guard);
        let r = evolve(&tag.initial_superposition(), &h, spec.noise(scheme).unwrap().spawn(5), &cfg, &spec.observables(scheme).unwrap())
            .unwrap();
        worst = worst.max(r.max_norm_drift);
        let u = eigen_hermitian(&h.hamiltonian(1.234, &NoiseSample::default())).unwrap().propagator(0.01);
        worst = worst.max(unitarity_error(&u));
    }
    let sensing = SensingSpec::default();
    let drive = sensing.resonant_drive().unwrap();
    let src = sensing.effective_source(&drive).unwrap();
    let obs = [Observable::new("P0", projector(&SpinState::<2>::basis(1))).unwrap()];
    let r = evolve(&SpinState::<2>::basis(1), &src, src.noise.spawn(5), &IntegrationConfig::new(20.0).sampled_every(1.0), &obs).unwrap();
    worst = worst.max(r.max_norm_drift);
    info(format!("7(i) largest norm drift / unitarity error {worst:.2e} (limit 1e-9)"));
    worst < 1e-9
}

fn gap_formulas() -> bool {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let p = StaticParams::clock(mhz(24.0)).unwrap();
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let omega = rng.random_range(mhz(1.0)..mhz(50.0));
        let de = rng.random_range(-0.3..0.3) * omega;
        let noise = NoiseSample {
            delta_e: de,
            ..Default::default()
        };
        // linear: levels identified by overlap with the undisturbed eigenvectors
        let h = h_rotating(&p, &DriveParams::linear(omega, &p), None, &noise, 0.0, true);
        let eig = eigen_hermitian(&h).unwrap();
        let refs = linear_eigenvectors(omega, 0.0);
        let level = |r: &SpinState| {
            (0..3)
                .max_by(|&i, &j| {
                    let oi = eig.vectors.column(i).dotc(r.amplitudes()).norm();
                    let oj = eig.vectors.column(j).dotc(r.amplitudes()).norm();
                    oi.total_cmp(&oj)
                })
                .unwrap()
        };
        let numeric = eig.values[level(&refs[2])] - eig.values[level(&refs[0])];
        worst = worst.max((numeric - gap_linear(omega, de)).abs());

        let h = h_rotating(&p, &DriveParams::orthogonal(omega, &p), None, &noise, 0.0, true);
        let eig = eigen_hermitian(&h).unwrap();
        let hi = eig.values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lo = eig.values.iter().cloned().fold(f64::INFINITY, f64::min);
        worst = worst.max(((hi - lo) - gap_orthogonal(omega, de)).abs());
    }
    info(format!("7(ii) 1000 draws, largest |formula - diagonalization| = {worst:.2e} rad/us (limit 1e-10)"));
    worst < 1e-10
}

fn insensitivity() -> bool {
    let omega = mhz(10.0);
    let h = 1e-4;
    let d_orth = (gap_orthogonal(omega, h) - gap_orthogonal(omega, -h)) / (2.0 * h);
    let d_lin = (gap_linear(omega, h) - gap_linear(omega, -h)) / (2.0 * h);
    info(format!("7(iii) d gap_o / d dE = {d_orth:.2e}, d gap_l / d dE = {d_lin:.9}"));
    d_orth.abs() < 1e-6 && ((d_lin + 1.5) / 1.5).abs() < 1e-6
}

fn ou_variance() -> bool {
    let params = OuParams::from_dephasing(3.0, 20.0, DephasingCalibration::default()).unwrap();
    let mut p = OuProcess::new(params, InitialCondition::Stationary, 99);
    let n = 100_000;
    // steps of 10 τ give effectively independent samples
    let xs: Vec<f64> = (0..n).map(|_| p.step(200.0).unwrap()).collect();
    let m = xs.iter().sum::<f64>() / n as f64;
    let var = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n as f64 - 1.0);
    let expected = params.diffusion * params.tau / 2.0;
    let sigma = expected * (2.0 / (n as f64 - 1.0)).sqrt();
    info(format!(
        "7(iv) sample variance {var:.5} vs c tau/2 = {expected:.5} ({:.2} sigma)",
        (var - expected) / sigma
    ));
    (var - expected).abs() < 3.0 * sigma
}

fn oracle_agreement() -> bool {
    let spec = dephasing_spec(1);
    // ten periods of each effective precession: 2Ex, 2Omega, 2Omega, 2Omega2
    let horizons = [
        (DriveScheme::None, 10.0 * TWO_PI / (2.0 * spec.ex)),
        (DriveScheme::Linear, 10.0 * TWO_PI / (2.0 * spec.omega1)),
        (DriveScheme::Orthogonal, 10.0 * TWO_PI / (2.0 * spec.omega1)),
        (DriveScheme::PhaseModulated, 10.0 * TWO_PI / (2.0 * spec.omega2)),
    ];
    let mut ok = true;
    let mut parts = Vec::new();
    for (scheme, t_end) in horizons {
        let worst = SEEDS
            .iter()
            .map(|&s| common::oracle_pair(&spec, scheme, t_end, s).unwrap().rms())
            .fold(0.0, f64::max);
        ok &= worst < 0.05;
        parts.push(format!("{} {worst:.1e} over {t_end:.2} us", scheme.name()));
    }
    let long = SEEDS
        .iter()
        .map(|&s| common::oracle_pair(&spec, DriveScheme::PhaseModulated, 20.0, s).unwrap().rms())
        .fold(0.0, f64::max);
    info(format!("7(v) RMS of 2<sx> (three seeds, worst): {}", parts.join(", ")));
    info(format!("7(v) phase_modulated over 20 us: {long:.3}"));

    // two-level sensing model against three levels, same noise-free drive
    let sensing = SensingSpec {
        n_trials: 1,
        t_end: 10.0,
        sample_interval: 0.1,
        t2_star: f64::INFINITY,
        delta_omega: 0.0,
        ..Default::default()
    };
    let eff = ac_sensing_trace(&sensing).unwrap();
    let full = ac_sensing_trace(&SensingSpec {
        model: SensingModel::Full3,
        ..sensing
    })
    .unwrap();
    let rms = (eff.result.mean[0]
        .iter()
        .zip(&full.result.mean[0])
        .map(|(a, b)| (a - b).powi(2))
        .sum::<f64>()
        / eff.result.mean[0].len() as f64)
        .sqrt();
    info(format!("7(v) sensing P(|0>) two-level vs three-level over 10 us, noise off: RMS {rms:.2e}"));
    ok
}

fn report_convergence(label: &str, r: &ConvergenceReport) {
    info(format!("7(vi) {label}: dt = {:.3e} us, max |dt - dt/2| = {:.2e}", r.dt, r.max_deviation));
}

fn self_convergence() -> bool {
    let spec = dephasing_spec(1);
    let mut ok = true;
    for scheme in [DriveScheme::Linear, DriveScheme::Orthogonal, DriveScheme::PhaseModulated] {
        let h = spec.hamiltonian(scheme).unwrap();
        let r = convergence_check(
            &scheme_tag(scheme).initial_superposition(),
            &h,
            &spec.integration(scheme),
            &spec.observables(scheme).unwrap(),
            7,
        )
        .unwrap();
        report_convergence(&format!("{} over {} us", scheme.name(), spec.integration(scheme).t_end), &r);
        ok &= r.passed;
    }
    let sensing = SensingSpec::default();
    let drive = sensing.resonant_drive().unwrap();
    let src = sensing.effective_source(&drive).unwrap();
    let obs = [Observable::new("P0", projector(&SpinState::<2>::basis(1))).unwrap()];
    let r = convergence_check(&SpinState::<2>::basis(1), &src, &sensing.integration(), &obs, 7).unwrap();
    report_convergence(&format!("sensing two-level over {} us", sensing.t_end), &r);
    ok &= r.passed;

    let full = sensing.full_source(&drive).unwrap();
    let obs3 = [Observable::new("P0", projector(&SpinState::zero())).unwrap()];
    let cfg = IntegrationConfig::new(20.0).sampled_every(0.25);
    let r = convergence_check(&SpinState::zero(), &full, &cfg, &obs3, 7).unwrap();
    report_convergence("sensing three-level over 20 us", &r);
    ok &= r.passed;

    let scheme = DriveScheme::Linear;
    let r = noise_resolution_check(
        &scheme_tag(scheme).initial_superposition(),
        &spec.hamiltonian(scheme).unwrap(),
        &spec.integration(scheme),
        &spec.observables(scheme).unwrap(),
        7,
    )
    .unwrap();
    info(format!(
        "7(vi) linear with the noise path itself resampled at dt/2 (not gated): {:.2e}",
        r.max_deviation
    ));
    ok
}
