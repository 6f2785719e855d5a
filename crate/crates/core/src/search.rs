//! Stochastic gradient ascent on the policy parameters.
//!
//! Each iteration draws a mini-batch of sample paths, averages their
//! trajectory gradients and takes a per-coordinate ADAGRAD step followed by
//! projection onto the parameter box. Batch seeds are a pure function of
//! `(seed, iteration, slot)`, so the seed schedule is the whole RNG state.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::energy::{derive_seed, ScenarioModel};
use crate::error::{Error, Result};
use crate::grad::{sum_vectors, trajectory_gradient, CompensatedSum};
use crate::model::{simulate, StorageParams};
use crate::policy::{Theta, ThetaBox, Variant};

pub const DEFAULT_ETA: f64 = 0.1;
pub const DEFAULT_EPS: f64 = 1e-8;
/// How far outside its box (in box widths) a pre-projection iterate may land.
pub const DIVERGENCE_WIDTHS: f64 = 10.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdagradState {
    pub g_diag: Vec<f64>,
    pub eta: f64,
    pub eps: f64,
}

impl AdagradState {
    pub fn new(dim: usize, eta: f64, eps: f64) -> Self {
        Self { g_diag: vec![0.0; dim], eta, eps }
    }

    /// Accumulates `grad` and returns the ascent step `eta g / sqrt(G + eps)`.
    pub fn step(&mut self, grad: &[f64]) -> Vec<f64> {
        self.g_diag
            .iter_mut()
            .zip(grad)
            .map(|(acc, &g)| {
                *acc += g * g;
                self.eta * g / (*acc + self.eps).sqrt()
            })
            .collect()
    }
}

/// Sample mean reward and averaged gradient over a batch.
pub trait GradientOracle {
    fn dimension(&self) -> usize;
    fn estimate(&self, theta: &[f64], seeds: &[u64]) -> Result<(f64, Vec<f64>)>;
}

/// Gradient oracle backed by the simulator.
#[derive(Debug, Clone, Copy)]
pub struct SimulationOracle<'a> {
    pub variant: Variant,
    pub scenario: &'a ScenarioModel,
    pub params: &'a StorageParams,
}

impl GradientOracle for SimulationOracle<'_> {
    fn dimension(&self) -> usize {
        self.variant.dimension(self.scenario.horizon.h)
    }

    fn estimate(&self, theta: &[f64], seeds: &[u64]) -> Result<(f64, Vec<f64>)> {
        let theta = Theta::from_flat(self.variant, theta)?;
        let mut reward = CompensatedSum::default();
        let mut grads = Vec::with_capacity(seeds.len());
        for &seed in seeds {
            let path = self.scenario.sample(seed);
            let (g, traj) = trajectory_gradient(&theta, &path, self.scenario.horizon, self.params)?;
            reward.add(traj.cumulative_reward);
            grads.push(g.g);
        }
        let n = seeds.len() as f64;
        let g = sum_vectors(self.dimension(), grads.iter().map(Vec::as_slice)).into_iter().map(|v| v / n).collect();
        Ok((reward.value() / n, g))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SearchSettings {
    pub iterations: usize,
    pub batch_size: usize,
    pub eta: f64,
    pub eps: f64,
    pub seed: u64,
    /// Checkpoint callback period in iterations; zero disables it.
    pub checkpoint_every: usize,
}

impl SearchSettings {
    pub fn validate(&self) -> Result<()> {
        if self.iterations < 1 || self.batch_size < 1 {
            return Err(Error::InvalidParameters("search needs at least one iteration and one path per batch".into()));
        }
        if !(self.eta > 0.0 && self.eps > 0.0) {
            return Err(Error::InvalidParameters("stepsize constants must be positive".into()));
        }
        Ok(())
    }

    /// Sample-path seeds of iteration `n`.
    pub fn batch_seeds(&self, n: usize) -> Vec<u64> {
        let base = derive_seed(self.seed, n as u64);
        (0..self.batch_size).map(|b| derive_seed(base, b as u64)).collect()
    }
}

/// One row of the search trace: the iterate, the batch sampled there and
/// the step it produced (empty after the final iterate).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub n: usize,
    pub theta: Vec<f64>,
    pub f_bar: f64,
    pub gradient: Vec<f64>,
    pub grad_norm: f64,
    pub steps: Vec<f64>,
    pub seeds: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchTrace {
    pub iterates: Vec<IterationRecord>,
    pub iterations: usize,
    pub batch_size: usize,
}

impl SearchTrace {
    pub fn seed_schedule(&self) -> Vec<Vec<u64>> {
        self.iterates.iter().map(|r| r.seeds.clone()).collect()
    }
}

/// Everything needed to continue a search where it stopped.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchProgress {
    pub theta: Vec<f64>,
    pub adagrad: AdagradState,
    /// Index of the next iterate to sample.
    pub iteration: usize,
    pub trace: Vec<IterationRecord>,
}

/// Runs `settings.iterations` ascent steps from `theta0`, or from `resume`,
/// returning the final iterate, the trace and the stepsize accumulator.
/// `on_checkpoint` sees the progress every `checkpoint_every` iterations.
pub fn run(
    oracle: &impl GradientOracle,
    theta0: &[f64],
    bounds: &ThetaBox,
    settings: &SearchSettings,
    resume: Option<SearchProgress>,
    mut on_checkpoint: impl FnMut(&SearchProgress) -> Result<()>,
) -> Result<(Vec<f64>, SearchTrace, AdagradState)> {
    settings.validate()?;
    let dim = oracle.dimension();
    let mut progress = match resume {
        Some(p) => {
            if p.theta.len() != dim || p.adagrad.g_diag.len() != dim {
                return Err(Error::InvalidParameters("checkpoint dimension does not match the variant".into()));
            }
            p
        }
        None => {
            if !bounds.contains(theta0) {
                return Err(Error::InvalidParameters(format!("initial parameters {theta0:?} lie outside their box")));
            }
            SearchProgress {
                theta: theta0.to_vec(),
                adagrad: AdagradState::new(dim, settings.eta, settings.eps),
                iteration: 0,
                trace: Vec::with_capacity(settings.iterations + 1),
            }
        }
    };
    while progress.iteration <= settings.iterations {
        let n = progress.iteration;
        let seeds = settings.batch_seeds(n);
        let (f_bar, gradient) = oracle.estimate(&progress.theta, &seeds)?;
        let grad_norm = gradient.iter().map(|g| g * g).sum::<f64>().sqrt();
        let mut steps = Vec::new();
        let theta_n = progress.theta.clone();
        if n < settings.iterations {
            steps = progress.adagrad.step(&gradient);
            let mut next: Vec<f64> = theta_n.iter().zip(&steps).map(|(t, s)| t + s).collect();
            for (i, &v) in next.iter().enumerate() {
                let slack = DIVERGENCE_WIDTHS * bounds.width(i);
                if !v.is_finite() || v < bounds.lower[i] - slack || v > bounds.upper[i] + slack {
                    return Err(Error::DivergenceDetected { iteration: n, component: i, value: v });
                }
            }
            bounds.project(&mut next);
            progress.theta = next;
        }
        progress.trace.push(IterationRecord { n, theta: theta_n, f_bar, gradient, grad_norm, steps, seeds });
        progress.iteration += 1;
        if settings.checkpoint_every > 0 && progress.iteration % settings.checkpoint_every == 0 {
            on_checkpoint(&progress)?;
        }
    }
    let trace = SearchTrace { iterates: progress.trace, iterations: settings.iterations, batch_size: settings.batch_size };
    Ok((progress.theta, trace, progress.adagrad))
}

/// Tunes `theta0` on sample paths drawn from `scenario`.
pub fn tune(
    theta0: &Theta,
    scenario: &ScenarioModel,
    params: &StorageParams,
    settings: &SearchSettings,
) -> Result<(Theta, SearchTrace)> {
    let variant = theta0.variant();
    if variant == Variant::Benchmark {
        return Err(Error::InvalidParameters("Benchmark has no parameters".into()));
    }
    let oracle = SimulationOracle { variant, scenario, params };
    let bounds = variant.param_box(scenario.horizon.h);
    let (theta, trace, _) = run(&oracle, &theta0.flat(), &bounds, settings, None, |_| Ok(()))?;
    Ok((Theta::from_flat(variant, &theta)?, trace))
}

/// Resumable search state plus the run metadata it belongs to.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub variant: Variant,
    pub sigma_f: f64,
    pub config_hash: String,
    pub settings: SearchSettings,
    pub progress: SearchProgress,
}

impl Checkpoint {
    pub fn theta(&self) -> Result<Theta> {
        Theta::from_flat(self.variant, &self.progress.theta)
    }

    pub fn is_complete(&self) -> bool {
        self.progress.iteration > self.settings.iterations
    }

    /// Writes through a temporary file so readers never see a partial checkpoint.
    pub fn save(&self, path: &Path) -> Result<()> {
        let tmp = path.with_extension("json.tmp");
        fs::write(&tmp, serde_json::to_string_pretty(self)?)?;
        fs::rename(&tmp, path)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let cp: Checkpoint = serde_json::from_str(&fs::read_to_string(path)?)?;
        if cp.progress.theta.iter().chain(&cp.progress.adagrad.g_diag).any(|v| !v.is_finite()) {
            return Err(Error::Config(format!("checkpoint {} holds non-finite values", path.display())));
        }
        Ok(cp)
    }
}

/// Paired comparison of a policy against the benchmark.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub n_paths: usize,
    pub mean: f64,
    pub std_error: f64,
    pub benchmark_mean: f64,
    /// `(mean - benchmark_mean) / |benchmark_mean|`.
    pub delta: f64,
    /// Standard error of `delta` from the paired differences.
    pub delta_std_error: f64,
}

/// Sample rewards of `theta` on each seed's path.
pub fn rewards(theta: &Theta, scenario: &ScenarioModel, params: &StorageParams, seeds: &[u64]) -> Result<Vec<f64>> {
    seeds
        .iter()
        .map(|&seed| Ok(simulate(theta, &scenario.sample(seed), scenario.horizon, params)?.cumulative_reward))
        .collect()
}

fn mean_and_error(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().copied().collect::<CompensatedSum>().value() / n;
    let var = v.iter().map(|x| (x - mean).powi(2)).collect::<CompensatedSum>().value() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Pairs two reward vectors drawn on the same seeds.
pub fn compare(policy: &[f64], benchmark: &[f64]) -> Result<Evaluation> {
    if policy.len() != benchmark.len() || policy.len() < 2 {
        return Err(Error::InvalidParameters("paired evaluation needs two equal-length samples of size >= 2".into()));
    }
    let (mean, std_error) = mean_and_error(policy);
    let (benchmark_mean, _) = mean_and_error(benchmark);
    let diffs: Vec<f64> = policy.iter().zip(benchmark).map(|(a, b)| a - b).collect();
    let (diff_mean, diff_error) = mean_and_error(&diffs);
    let scale = benchmark_mean.abs();
    Ok(Evaluation {
        n_paths: policy.len(),
        mean,
        std_error,
        benchmark_mean,
        delta: diff_mean / scale,
        delta_std_error: diff_error / scale,
    })
}

/// Evaluates `theta` and the benchmark on common sample paths.
pub fn evaluate(theta: &Theta, scenario: &ScenarioModel, params: &StorageParams, seeds: &[u64]) -> Result<Evaluation> {
    if seeds.len() < 2 {
        return Err(Error::InvalidParameters("evaluation needs at least two paths".into()));
    }
    let bench = rewards(&Theta::Benchmark, scenario, params, seeds)?;
    let own = if *theta == Theta::Benchmark { bench.clone() } else { rewards(theta, scenario, params, seeds)? };
    compare(&own, &bench)
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Quadratic;

    impl GradientOracle for Quadratic {
        fn dimension(&self) -> usize {
            1
        }

        fn estimate(&self, theta: &[f64], _: &[u64]) -> Result<(f64, Vec<f64>)> {
            Ok((-(theta[0] - 2.0).powi(2), vec![-2.0 * (theta[0] - 2.0)]))
        }
    }

    struct Flat;

    impl GradientOracle for Flat {
        fn dimension(&self) -> usize {
            2
        }

        fn estimate(&self, _: &[f64], _: &[u64]) -> Result<(f64, Vec<f64>)> {
            Ok((1.0, vec![0.0, 0.0]))
        }
    }

    fn settings(iterations: usize) -> SearchSettings {
        SearchSettings { iterations, batch_size: 2, eta: DEFAULT_ETA, eps: DEFAULT_EPS, seed: 11, checkpoint_every: 0 }
    }

    fn wide_box(dim: usize) -> ThetaBox {
        ThetaBox { lower: vec![-10.0; dim], upper: vec![10.0; dim] }
    }

    #[test]
    fn quadratic_iterates_approach_maximum() {
        let (theta, trace, _) = run(&Quadratic, &[0.0], &wide_box(1), &settings(300), None, |_| Ok(())).unwrap();
        assert_eq!(trace.iterates.len(), 301);
        let gaps: Vec<f64> = trace.iterates.iter().map(|r| (r.theta[0] - 2.0).abs()).collect();
        for w in gaps[1..].windows(2) {
            assert!(w[1] <= w[0] + 1e-15);
        }
        assert!((theta[0] - 2.0).abs() < 0.1, "{}", theta[0]);
    }

    #[test]
    fn zero_gradient_is_a_fixed_point() {
        let (theta, trace, _) = run(&Flat, &[0.3, 0.7], &wide_box(2), &settings(20), None, |_| Ok(())).unwrap();
        assert_eq!(theta, vec![0.3, 0.7]);
        assert!(trace.iterates.iter().all(|r| r.theta == vec![0.3, 0.7]));
    }

    #[test]
    fn steps_replay_from_trace() {
        let bounds = ThetaBox { lower: vec![0.0], upper: vec![1.5] };
        let (_, trace, _) = run(&Quadratic, &[0.0], &bounds, &settings(40), None, |_| Ok(())).unwrap();
        let mut acc = 0.0;
        for w in trace.iterates.windows(2) {
            let g = w[0].gradient[0];
            acc += g * g;
            let step = DEFAULT_ETA * g / (acc + DEFAULT_EPS).sqrt();
            assert_eq!(w[0].steps[0], step);
            assert_eq!(w[1].theta[0], (w[0].theta[0] + step).clamp(0.0, 1.5));
            assert!(bounds.contains(&w[1].theta));
        }
    }

    #[test]
    fn resume_is_bit_exact() {
        let mut saved = None;
        let mut s = settings(30);
        s.checkpoint_every = 10;
        let (full, trace, _) = run(&Quadratic, &[0.5], &wide_box(1), &s, None, |p| {
            if p.iteration == 10 {
                saved = Some(p.clone());
            }
            Ok(())
        })
        .unwrap();
        let (resumed, trace2, _) = run(&Quadratic, &[0.5], &wide_box(1), &s, saved, |_| Ok(())).unwrap();
        assert_eq!(full, resumed);
        assert_eq!(trace, trace2);
    }

    struct Runaway;

    impl GradientOracle for Runaway {
        fn dimension(&self) -> usize {
            1
        }

        fn estimate(&self, _: &[f64], _: &[u64]) -> Result<(f64, Vec<f64>)> {
            Ok((0.0, vec![1.0]))
        }
    }

    #[test]
    fn divergence_is_detected() {
        let mut s = settings(3);
        s.eta = 1e3;
        let bounds = ThetaBox { lower: vec![0.0], upper: vec![1.0] };
        let err = run(&Runaway, &[0.5], &bounds, &s, None, |_| Ok(())).unwrap_err();
        assert!(matches!(err, Error::DivergenceDetected { iteration: 0, component: 0, .. }));
    }

    #[test]
    fn batch_seeds_are_distinct_and_stable() {
        let s = settings(5);
        assert_eq!(s.batch_seeds(3), s.batch_seeds(3));
        assert_ne!(s.batch_seeds(3), s.batch_seeds(4));
        let b = s.batch_seeds(0);
        assert_ne!(b[0], b[1]);
    }

    #[test]
    fn paired_comparison() {
        let e = compare(&[110.0, 220.0, 330.0], &[100.0, 200.0, 300.0]).unwrap();
        assert!((e.delta - 0.1).abs() < 1e-12);
        assert!(compare(&[1.0], &[1.0]).is_err());
        let same = compare(&[5.0, 7.0], &[5.0, 7.0]).unwrap();
        assert_eq!(same.delta, 0.0);
        assert_eq!(same.delta_std_error, 0.0);
    }
}
