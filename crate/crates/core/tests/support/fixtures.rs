//! Shared helpers for the integration and acceptance tests.

#![allow(dead_code)]

use std::time::{Duration, Instant};

use cfa::energy::{SamplePath, ScenarioModel};
use cfa::exp::ExperimentConfig;
use cfa::grad::{finite_difference_detailed, relative_gap, trajectory_gradient};
use cfa::model::{Horizon, State, StorageParams};
use cfa::policy::{Theta, Variant};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const FD_STEP: f64 = 1e-4;
pub const FD_REL_TOL: f64 = 1e-3;

pub fn scenario(cfg: &ExperimentConfig, sigma_f: f64) -> ScenarioModel {
    cfg.scenario(sigma_f).unwrap()
}

/// Uniform point inside the middle 90% of the variant's box.
pub fn interior_theta(variant: Variant, h: usize, rng: &mut impl Rng) -> Theta {
    let bx = variant.param_box(h);
    let v: Vec<f64> = (0..bx.lower.len()).map(|i| bx.lower[i] + bx.width(i) * (0.05 + 0.9 * rng.random::<f64>())).collect();
    Theta::from_flat(variant, &v).unwrap()
}

/// A random storage level paired with the path's exogenous values at `t`.
pub fn random_state(path: &SamplePath, t: usize, params: &StorageParams, rng: &mut impl Rng) -> State {
    State::from_path(params.r_max * rng.random::<f64>(), path, t)
}

#[derive(Debug, Default, Clone)]
pub struct FdReport {
    pub components: usize,
    pub within: usize,
    pub flagged: usize,
    pub unflagged_failures: usize,
    pub elapsed: Duration,
    pub worst_unflagged: Option<String>,
}

impl FdReport {
    pub fn share_within(&self) -> f64 {
        self.within as f64 / self.components.max(1) as f64
    }
}

/// Analytic gradient against central differences on `triples` random
/// (variant, sigma_f, seed) draws, cycling through the tunable variants.
pub fn fd_campaign(cfg: &ExperimentConfig, triples: usize, seed: u64) -> FdReport {
    let horizon = Horizon::new(cfg.t, cfg.h).unwrap();
    let params = cfg.storage_params();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let start = Instant::now();
    let mut rep = FdReport::default();
    for k in 0..triples {
        let variant = Variant::TUNABLE[k % 4];
        let sigma_f = [0.0, 20.0, 25.0, 30.0, 35.0][rng.random_range(0..5)];
        let theta = interior_theta(variant, cfg.h, &mut rng);
        let path = scenario(cfg, sigma_f).sample(rng.random());
        let (g, _) = trajectory_gradient(&theta, &path, horizon, &params).unwrap();
        let fd = finite_difference_detailed(&theta, &path, horizon, &params, FD_STEP).unwrap();
        for i in 0..g.g.len() {
            rep.components += 1;
            let ok = relative_gap(g.g[i], fd.estimate.g[i]) <= FD_REL_TOL;
            rep.within += ok as usize;
            if fd.component_basis_change[i] {
                rep.flagged += 1;
            } else if !ok {
                rep.unflagged_failures += 1;
                rep.worst_unflagged.get_or_insert(format!(
                    "{variant} sigma_f={sigma_f} seed={} component {i}: analytic {} vs fd {}",
                    path.seed, g.g[i], fd.estimate.g[i]
                ));
            }
        }
    }
    rep.elapsed = start.elapsed();
    rep
}

/// Kendall's tau-b between `v` and its index, by direct pair counting.
pub fn kendall_tau_b(v: &[f64]) -> f64 {
    let n = v.len();
    let (mut concordant, mut discordant, mut ties) = (0.0, 0.0, 0.0);
    for i in 0..n {
        for j in i + 1..n {
            if v[j] > v[i] {
                concordant += 1.0;
            } else if v[j] < v[i] {
                discordant += 1.0;
            } else {
                ties += 1.0;
            }
        }
    }
    let pairs = (n * (n - 1) / 2) as f64;
    // The index has no ties, so tau-b's denominator is sqrt(pairs * (pairs - ties)).
    let denom = (pairs * (pairs - ties)).sqrt();
    if denom == 0.0 {
        0.0
    } else {
        (concordant - discordant) / denom
    }
}
