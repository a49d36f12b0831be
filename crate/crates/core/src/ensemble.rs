//! Monte Carlo averaging over noise realizations and coherence-time
//! extraction.
//!
//! Trial `i` draws its noise from `derive_seed(base_seed, [stream.., i])`.
//! Trials are grouped into fixed chunks of [`CHUNK`] consecutive indices;
//! each chunk accumulates mean and sum of squared deviations in index order
//! (Welford), and chunk statistics are merged (Chan et al.) by a pairwise tree
//! over chunk index. The reduction order depends only on `n_trials`, so
//! results are bitwise identical for any thread count.

use rayon::prelude::*;
use rustfft::{num_complex::Complex64, FftPlanner};

use crate::error::{Error, Result};
use crate::noise::derive_seed;
use crate::propagator::{evolve_on_grid, HamiltonianSource, IntegrationConfig, Observable, TrajectoryResult};
use crate::spinops::{Dim, HermitianOps, SpinState};

/// Trials per reduction chunk.
pub const CHUNK: usize = 16;

/// Averaged observables with per-sample standard errors.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleResult {
    pub times: Vec<f64>,
    pub names: Vec<String>,
    pub mean: Vec<Vec<f64>>,
    /// Sample standard deviation (n − 1) over `√n`; zero for a single trial.
    pub stderr: Vec<Vec<f64>>,
    pub n_trials: usize,
    pub base_seed: u64,
    pub dt: f64,
}

impl EnsembleResult {
    pub fn observable(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    /// Index of the sample closest to `t`.
    pub fn sample_at(&self, t: f64) -> usize {
        let k = self.times.partition_point(|&x| x < t);
        if k == 0 {
            0
        } else if k >= self.times.len() {
            self.times.len() - 1
        } else if (self.times[k] - t).abs() < (t - self.times[k - 1]).abs() {
            k
        } else {
            k - 1
        }
    }
}

#[derive(Debug, Clone)]
struct Moments {
    n: f64,
    mean: Vec<Vec<f64>>,
    m2: Vec<Vec<f64>>,
}

impl Moments {
    fn from_first(t: &TrajectoryResult) -> Self {
        Moments {
            n: 1.0,
            mean: t.values.clone(),
            m2: t.values.iter().map(|v| vec![0.0; v.len()]).collect(),
        }
    }

    fn push(&mut self, t: &TrajectoryResult) {
        self.n += 1.0;
        let n = self.n;
        for ((mean, m2), x) in self.mean.iter_mut().zip(&mut self.m2).zip(&t.values) {
            for ((m, s), &x) in mean.iter_mut().zip(m2.iter_mut()).zip(x) {
                let d = x - *m;
                *m += d / n;
                *s += d * (x - *m);
            }
        }
    }

    fn merge(mut a: Moments, b: Moments) -> Moments {
        let n = a.n + b.n;
        let wb = b.n / n;
        let cross = a.n * b.n / n;
        for ((ma, sa), (mb, sb)) in a.mean.iter_mut().zip(&mut a.m2).zip(b.mean.iter().zip(&b.m2)) {
            for k in 0..ma.len() {
                let d = mb[k] - ma[k];
                ma[k] += d * wb;
                sa[k] += sb[k] + d * d * cross;
            }
        }
        a.n = n;
        a
    }
}

fn tree_reduce(mut parts: Vec<Moments>) -> Moments {
    while parts.len() > 1 {
        let mut next = Vec::with_capacity(parts.len().div_ceil(2));
        let mut it = parts.into_iter();
        while let Some(a) = it.next() {
            match it.next() {
                Some(b) => next.push(Moments::merge(a, b)),
                None => next.push(a),
            }
        }
        parts = next;
    }
    parts.pop().expect("at least one chunk")
}

/// Averages `n_trials` independent trajectories; trial `i` is seeded with
/// `derive_seed(base_seed, [i])`.
pub fn run_ensemble<const N: usize, S>(
    initial: &SpinState<N>,
    source: &S,
    observables: &[Observable<N>],
    cfg: &IntegrationConfig,
    n_trials: usize,
    base_seed: u64,
) -> Result<EnsembleResult>
where
    S: HamiltonianSource<N> + ?Sized,
    Dim<N>: HermitianOps<N>,
{
    run_ensemble_stream(initial, source, observables, cfg, n_trials, base_seed, &[])
}

/// As [`run_ensemble`], with trial seeds `derive_seed(base_seed, [stream.., i])`.
pub fn run_ensemble_stream<const N: usize, S>(
    initial: &SpinState<N>,
    source: &S,
    observables: &[Observable<N>],
    cfg: &IntegrationConfig,
    n_trials: usize,
    base_seed: u64,
    stream: &[u64],
) -> Result<EnsembleResult>
where
    S: HamiltonianSource<N> + ?Sized,
    Dim<N>: HermitianOps<N>,
{
    if n_trials == 0 {
        return Err(Error::param("n_trials", "must be >= 1"));
    }
    let grid = cfg.resolve(source.max_frequency())?;
    let noise_cfg = *source.noise_config();
    let run_trial = |i: usize| -> Result<TrajectoryResult> {
        let mut path: Vec<u64> = stream.to_vec();
        path.push(i as u64);
        let mut noise = noise_cfg.spawn(derive_seed(base_seed, &path));
        evolve_on_grid(initial, source, &mut noise, &grid, cfg.stepper, observables).map_err(|e| Error::Trajectory {
            index: i,
            source: Box::new(e),
        })
    };

    let n_chunks = n_trials.div_ceil(CHUNK);
    let chunks: Vec<Moments> = (0..n_chunks)
        .into_par_iter()
        .map(|ci| -> Result<Moments> {
            let start = ci * CHUNK;
            let end = (start + CHUNK).min(n_trials);
            let mut m = Moments::from_first(&run_trial(start)?);
            for i in start + 1..end {
                m.push(&run_trial(i)?);
            }
            Ok(m)
        })
        .collect::<Result<Vec<_>>>()?;
    let total = tree_reduce(chunks);

    let n = total.n;
    let stderr = total
        .m2
        .iter()
        .map(|s| {
            s.iter()
                .map(|&m2| if n > 1.0 { (m2 / (n - 1.0)).max(0.0).sqrt() / n.sqrt() } else { 0.0 })
                .collect()
        })
        .collect();
    Ok(EnsembleResult {
        times: grid.sample_times(),
        names: observables.iter().map(|o| o.name.clone()).collect(),
        mean: total.mean,
        stderr,
        n_trials,
        base_seed,
        dt: grid.dt,
    })
}

/// How a coherence time is extracted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FitMethod {
    /// First crossing of `1/e` by the oscillation envelope.
    #[default]
    Envelope1e,
    /// Least-squares `exp(−(t/T)^p)` fit to the envelope.
    StretchedExp,
}

impl FitMethod {
    pub fn tag(self) -> &'static str {
        match self {
            FitMethod::Envelope1e => "envelope_1e",
            FitMethod::StretchedExp => "stretched_exp_fit",
        }
    }
}

/// Envelope estimator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum EnvelopeMethod {
    /// Analytic-signal magnitude for oscillating traces (at least
    /// [`MIN_CROSSINGS`] zero crossings), `|x|` otherwise.
    #[default]
    Auto,
    Hilbert,
    /// Linear interpolation between local maxima of `|x|`.
    Peaks,
    Abs,
}

pub const MIN_CROSSINGS: usize = 6;
pub const STRETCH_RANGE: (f64, f64) = (0.5, 4.0);

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoherenceFit {
    /// Coherence time (μs). With `lower_bound` set this is the end of the
    /// trace and the true value is larger.
    pub t2: f64,
    pub stretch_exponent: Option<f64>,
    pub fit_residual: Option<f64>,
    pub method: FitMethod,
    pub envelope: EnvelopeMethod,
    pub lower_bound: bool,
}

fn zero_crossings(x: &[f64]) -> usize {
    x.windows(2).filter(|w| (w[0] > 0.0) != (w[1] > 0.0)).count()
}

/// Analytic-signal magnitude `|x + i·H[x]|`.
///
/// The trace is reflected about its first sample before transforming (even
/// reflection for cosine-like starts, odd for sine-like), which removes the
/// slowly decaying edge artifact of a trace switched on at `t = 0`, and the
/// result is zero-padded to avoid wrap-around.
pub fn hilbert_envelope(x: &[f64]) -> Vec<f64> {
    let n = x.len();
    if n == 0 {
        return Vec::new();
    }
    let peak = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let sign = if x[0].abs() >= 0.5 * peak { 1.0 } else { -1.0 };
    let mut ext: Vec<f64> = x[1..].iter().rev().map(|v| sign * v).collect();
    ext.extend_from_slice(x);
    let env = analytic_magnitude(&ext);
    env[n - 1..].to_vec()
}

fn analytic_magnitude(x: &[f64]) -> Vec<f64> {
    let n = x.len();
    let m = (2 * n).next_power_of_two();
    let mut buf: Vec<Complex64> = x.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    buf.resize(m, Complex64::new(0.0, 0.0));
    let mut planner = FftPlanner::new();
    planner.plan_fft_forward(m).process(&mut buf);
    for (k, z) in buf.iter_mut().enumerate() {
        if k == 0 || k == m / 2 {
            continue;
        }
        *z *= if k < m / 2 { 2.0 } else { 0.0 };
    }
    planner.plan_fft_inverse(m).process(&mut buf);
    buf.truncate(n);
    buf.iter().map(|z| z.norm() / m as f64).collect()
}

/// Linear interpolation through local maxima of `|x|` (endpoints included).
pub fn peak_envelope(times: &[f64], x: &[f64]) -> Vec<f64> {
    let a: Vec<f64> = x.iter().map(|v| v.abs()).collect();
    let n = a.len();
    if n < 3 {
        return a;
    }
    let mut peaks = vec![0];
    for k in 1..n - 1 {
        if a[k] >= a[k - 1] && a[k] > a[k + 1] {
            peaks.push(k);
        }
    }
    peaks.push(n - 1);
    let mut env = vec![0.0; n];
    for w in peaks.windows(2) {
        let (i, j) = (w[0], w[1]);
        for k in i..=j {
            let f = if j > i { (times[k] - times[i]) / (times[j] - times[i]) } else { 0.0 };
            env[k] = a[i] + f * (a[j] - a[i]);
        }
    }
    env
}

/// Envelope of a trace and the estimator actually used.
pub fn envelope(times: &[f64], x: &[f64], method: EnvelopeMethod) -> (Vec<f64>, EnvelopeMethod) {
    let method = match method {
        EnvelopeMethod::Auto if zero_crossings(x) >= MIN_CROSSINGS => EnvelopeMethod::Hilbert,
        EnvelopeMethod::Auto => EnvelopeMethod::Abs,
        m => m,
    };
    let env = match method {
        EnvelopeMethod::Hilbert => hilbert_envelope(x),
        EnvelopeMethod::Peaks => peak_envelope(times, x),
        _ => x.iter().map(|v| v.abs()).collect(),
    };
    (env, method)
}

/// `(T, p, rms)` from regressing `ln(−ln e)` on `ln t` over `0.05 < e < 0.95`,
/// up to the first drop below 0.05 (the tail beyond is the noise floor).
fn stretched_fit(times: &[f64], env: &[f64]) -> Option<(f64, f64, f64)> {
    let end = env.iter().position(|&e| e <= 0.05).unwrap_or(env.len());
    let (times, env) = (&times[..end], &env[..end]);
    let pts: Vec<(f64, f64)> = times
        .iter()
        .zip(env)
        .filter(|(&t, &e)| t > 0.0 && e > 0.05 && e < 0.95)
        .map(|(&t, &e)| (t.ln(), (-e.ln()).ln()))
        .collect();
    if pts.len() < 3 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx <= 0.0 {
        return None;
    }
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let p = (sxy / sxx).clamp(STRETCH_RANGE.0, STRETCH_RANGE.1);
    // best ln T for the clamped exponent
    let ln_t = pts.iter().map(|q| q.0 - q.1 / p).sum::<f64>() / n;
    let t2 = ln_t.exp();
    let mut ss = 0.0;
    let mut count = 0.0;
    for (&t, &e) in times.iter().zip(env) {
        if t > 0.0 && e > 0.05 && e < 0.95 {
            ss += (e - (-(t / t2).powf(p)).exp()).powi(2);
            count += 1.0;
        }
    }
    Some((t2, p, (ss / count).sqrt()))
}

/// Coherence time of a single trace.
pub fn fit_trace(times: &[f64], x: &[f64], method: FitMethod, env_method: EnvelopeMethod) -> Result<CoherenceFit> {
    if times.len() != x.len() || times.len() < 3 {
        return Err(Error::Fit(format!("need at least 3 samples, got {}", x.len())));
    }
    let (env, used) = envelope(times, x, env_method);
    let stretched = stretched_fit(times, &env);
    let t_end = *times.last().expect("non-empty");
    let threshold = (-1.0f64).exp();
    match method {
        FitMethod::Envelope1e => {
            let crossing = env.iter().position(|&e| e < threshold);
            let (t2, lower_bound) = match crossing {
                None => (t_end, true),
                Some(0) => (times[0], false),
                Some(k) => {
                    let (e0, e1) = (env[k - 1], env[k]);
                    let f = (e0 - threshold) / (e0 - e1);
                    (times[k - 1] + f * (times[k] - times[k - 1]), false)
                }
            };
            if !(t2 > 0.0) {
                return Err(Error::Fit("envelope starts below 1/e".into()));
            }
            Ok(CoherenceFit {
                t2,
                stretch_exponent: stretched.map(|s| s.1),
                fit_residual: stretched.map(|s| s.2),
                method,
                envelope: used,
                lower_bound,
            })
        }
        FitMethod::StretchedExp => {
            let (t2, p, rms) =
                stretched.ok_or_else(|| Error::Fit("too few envelope points between 0.05 and 0.95".into()))?;
            Ok(CoherenceFit {
                t2,
                stretch_exponent: Some(p),
                fit_residual: Some(rms),
                method,
                envelope: used,
                lower_bound: t2 > t_end,
            })
        }
    }
}

/// Coherence time of one averaged observable.
pub fn fit_coherence(result: &EnsembleResult, observable: usize, method: FitMethod) -> Result<CoherenceFit> {
    let x = result
        .mean
        .get(observable)
        .ok_or_else(|| Error::param("observable", format!("index {observable} out of range")))?;
    fit_trace(&result.times, x, method, EnvelopeMethod::Auto)
}
