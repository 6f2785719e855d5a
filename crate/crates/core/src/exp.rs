//! Experiment harness: configuration, seed splitting, and the CSV and
//! checkpoint files behind each command-line subcommand.
//!
//! Seeds. Everything derives from `master_seed` through [`derive_seed`]:
//! training batches for forecast quality `s` use
//! `derive_seed(derive_seed(master, TRAIN), s.to_bits())` as the search seed,
//! shared by every variant at that `s`; evaluation path `i` uses
//! `derive_seed(derive_seed(master, EVAL), i)` for every cell, so all
//! comparisons run on common random numbers.
//!
//! Every CSV starts with a `# config_hash=..., master_seed=...` comment line.
//! Files are written to a temporary name and renamed into place.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::energy::{derive_seed, fmt_f64, PriceModel, RenewableModel, ScenarioModel};
use crate::error::{Error, Result};
use crate::model::{simulate, Horizon, StorageParams};
use crate::policy::{Theta, Variant};
use crate::search::{self, compare, rewards, Checkpoint, Evaluation, SearchProgress, SearchSettings, SimulationOracle};

const TRAIN_STREAM: u64 = 0x7472_6169_6e;
const EVAL_STREAM: u64 = 0x6576_616c;

/// Flat experiment configuration. Unknown keys are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    #[serde(rename = "T")]
    pub t: usize,
    #[serde(rename = "H")]
    pub h: usize,
    pub r_max: f64,
    pub gamma_c: f64,
    pub gamma_d: f64,
    pub beta_c: f64,
    pub beta_d: f64,
    pub penalty: f64,
    pub r0: f64,
    pub p_min: f64,
    pub p_max: f64,
    pub mu_p: f64,
    pub sigma_p: f64,
    pub g_min: f64,
    pub g_max: f64,
    pub renewable_level: f64,
    pub renewable_amplitude: f64,
    pub rho_cross: f64,
    pub sigma_e: f64,
    pub lead_exponent: f64,
    pub sigma_f_grid: Vec<f64>,
    pub variants: Vec<Variant>,
    pub iterations: usize,
    pub batch_size: usize,
    pub n_eval_paths: usize,
    pub eta: f64,
    pub eps: f64,
    pub checkpoint_every: usize,
    pub master_seed: u64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            t: 48,
            h: 24,
            r_max: 120.0,
            gamma_c: 30.0,
            gamma_d: 30.0,
            beta_c: 0.9,
            beta_d: 0.9,
            penalty: 700.0,
            r0: 0.0,
            p_min: -10.0,
            p_max: 70.0,
            mu_p: 0.0,
            sigma_p: 5.0,
            g_min: 40.0,
            g_max: 140.0,
            renewable_level: 60.0,
            renewable_amplitude: 40.0,
            rho_cross: 0.9,
            sigma_e: 20.0,
            lead_exponent: 0.0,
            sigma_f_grid: vec![20.0, 25.0, 30.0, 35.0],
            variants: Variant::TUNABLE.to_vec(),
            iterations: 500,
            batch_size: 8,
            n_eval_paths: 500,
            eta: search::DEFAULT_ETA,
            eps: search::DEFAULT_EPS,
            checkpoint_every: 50,
            master_seed: 20_190_601,
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.message().to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        self.storage_params().validate()?;
        self.scenario(0.0)?.validate()?;
        Horizon::new(self.t, self.h)?;
        if self.sigma_f_grid.iter().any(|s| !(s.is_finite() && *s >= 0.0)) {
            return Err(Error::InvalidParameters("sigma_f values must be finite and nonnegative".into()));
        }
        if self.n_eval_paths < 2 {
            return Err(Error::InvalidParameters("n_eval_paths must be at least 2".into()));
        }
        self.settings(0.0).validate()
    }

    /// Hex SHA-256 of the canonical serialized form.
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.to_toml().as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn horizon(&self) -> Horizon {
        Horizon { t: self.t, h: self.h }
    }

    pub fn storage_params(&self) -> StorageParams {
        StorageParams {
            r_max: self.r_max,
            gamma_c: self.gamma_c,
            gamma_d: self.gamma_d,
            beta_c: self.beta_c,
            beta_d: self.beta_d,
            penalty: self.penalty,
            r0: self.r0,
        }
    }

    pub fn scenario(&self, sigma_f: f64) -> Result<ScenarioModel> {
        let horizon = Horizon::new(self.t, self.h)?;
        Ok(ScenarioModel {
            horizon,
            price: PriceModel { p_min: self.p_min, p_max: self.p_max, mu_p: self.mu_p, sigma_p: self.sigma_p, sigma_f },
            renewable: RenewableModel {
                base_profile: RenewableModel::sinusoidal_profile(self.renewable_level, self.renewable_amplitude, self.t),
                rho_cross: self.rho_cross,
                sigma_e: self.sigma_e,
                sigma_f,
                lead_exponent: self.lead_exponent,
            },
            g_min: self.g_min,
            g_max: self.g_max,
        })
    }

    pub fn train_seed(&self, sigma_f: f64) -> u64 {
        derive_seed(derive_seed(self.master_seed, TRAIN_STREAM), sigma_f.to_bits())
    }

    pub fn eval_seeds(&self, n: usize) -> Vec<u64> {
        let base = derive_seed(self.master_seed, EVAL_STREAM);
        (0..n as u64).map(|i| derive_seed(base, i)).collect()
    }

    pub fn settings(&self, sigma_f: f64) -> SearchSettings {
        SearchSettings {
            iterations: self.iterations,
            batch_size: self.batch_size,
            eta: self.eta,
            eps: self.eps,
            seed: self.train_seed(sigma_f),
            checkpoint_every: self.checkpoint_every,
        }
    }

    /// Comment line that opens every emitted CSV.
    pub fn csv_banner(&self) -> String {
        format!("# config_hash={}, master_seed={}\n", self.hash(), self.master_seed)
    }
}

/// Writes `bytes` to `path` through a sibling temporary file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

fn write_csv(path: &Path, cfg: &ExperimentConfig, header: &[String], rows: &[Vec<String>]) -> Result<()> {
    let mut w = csv::Writer::from_writer(cfg.csv_banner().into_bytes());
    w.write_record(header)?;
    for r in rows {
        w.write_record(r)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    write_atomic(path, &bytes)
}

/// File-name tag for a forecast quality, e.g. `sf35` or `sf2.5`.
pub fn sigma_tag(sigma_f: f64) -> String {
    format!("sf{}", fmt_f64(sigma_f).trim_end_matches(".0"))
}

pub fn checkpoint_path(out_dir: &Path, variant: Variant, sigma_f: f64) -> PathBuf {
    out_dir.join(format!("checkpoint_{variant}_{}.json", sigma_tag(sigma_f)))
}

pub fn trace_path(out_dir: &Path, variant: Variant, sigma_f: f64) -> PathBuf {
    out_dir.join(format!("trace_{variant}_{}.csv", sigma_tag(sigma_f)))
}

fn join_theta(v: &[f64]) -> String {
    v.iter().map(|x| fmt_f64(*x)).collect::<Vec<_>>().join(" ")
}

/// Trains one cell, writing its trace CSV and final checkpoint into `out_dir`.
/// A `resume` checkpoint must come from the same config, variant and quality.
pub fn train(
    cfg: &ExperimentConfig,
    variant: Variant,
    sigma_f: f64,
    out_dir: &Path,
    resume: Option<Checkpoint>,
) -> Result<Checkpoint> {
    if variant == Variant::Benchmark {
        return Err(Error::InvalidParameters("Benchmark has no parameters".into()));
    }
    if !(sigma_f.is_finite() && sigma_f >= 0.0) {
        return Err(Error::InvalidParameters(format!("sigma_f must be nonnegative, got {sigma_f}")));
    }
    let scenario = cfg.scenario(sigma_f)?;
    let params = cfg.storage_params();
    let settings = cfg.settings(sigma_f);
    let hash = cfg.hash();
    let progress = match resume {
        Some(cp) => {
            if cp.config_hash != hash || cp.variant != variant || cp.sigma_f != sigma_f || cp.settings != settings {
                return Err(Error::Config("checkpoint was written for a different config, variant or sigma_f".into()));
            }
            Some(cp.progress)
        }
        None => None,
    };
    let cp_path = checkpoint_path(out_dir, variant, sigma_f);
    let snapshot = |p: &SearchProgress| Checkpoint {
        variant,
        sigma_f,
        config_hash: hash.clone(),
        settings,
        progress: p.clone(),
    };
    let oracle = SimulationOracle { variant, scenario: &scenario, params: &params };
    let bounds = variant.param_box(cfg.h);
    fs::create_dir_all(out_dir)?;
    let (theta, trace, adagrad) =
        search::run(&oracle, &variant.identity(cfg.h).flat(), &bounds, &settings, progress, |p| snapshot(p).save(&cp_path))?;
    let dim = theta.len();
    let mut header = vec!["n".to_string()];
    header.extend((0..dim).map(|i| format!("theta_{i}")));
    header.push("f_bar".into());
    header.push("grad_norm".into());
    header.extend((0..dim).map(|i| format!("grad_{i}")));
    let rows: Vec<Vec<String>> = trace
        .iterates
        .iter()
        .map(|r| {
            let mut row = vec![r.n.to_string()];
            row.extend(r.theta.iter().map(|v| fmt_f64(*v)));
            row.push(fmt_f64(r.f_bar));
            row.push(fmt_f64(r.grad_norm));
            row.extend(r.gradient.iter().map(|v| fmt_f64(*v)));
            row
        })
        .collect();
    write_csv(&trace_path(out_dir, variant, sigma_f), cfg, &header, &rows)?;
    let cp = snapshot(&SearchProgress { theta, adagrad, iteration: settings.iterations + 1, trace: trace.iterates });
    cp.save(&cp_path)?;
    Ok(cp)
}

/// One evaluated cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationRow {
    pub variant: Variant,
    pub sigma_f: f64,
    pub theta: Vec<f64>,
    pub evaluation: Evaluation,
}

const EVAL_HEADER: [&str; 9] =
    ["variant", "sigma_f", "n_paths", "mean_reward", "reward_std_error", "benchmark_mean", "delta", "delta_std_error", "theta"];

fn eval_record(r: &EvaluationRow) -> Vec<String> {
    let e = &r.evaluation;
    vec![
        r.variant.to_string(),
        fmt_f64(r.sigma_f),
        e.n_paths.to_string(),
        fmt_f64(e.mean),
        fmt_f64(e.std_error),
        fmt_f64(e.benchmark_mean),
        fmt_f64(e.delta),
        fmt_f64(e.delta_std_error),
        join_theta(&r.theta),
    ]
}

/// Evaluates `theta` against the benchmark on the first `n_paths` evaluation
/// seeds and writes `evaluate_<variant>_<sf>.csv`.
pub fn evaluate(cfg: &ExperimentConfig, theta: &Theta, sigma_f: f64, n_paths: usize, out_dir: &Path) -> Result<EvaluationRow> {
    theta.validate(cfg.h)?;
    let scenario = cfg.scenario(sigma_f)?;
    let e = search::evaluate(theta, &scenario, &cfg.storage_params(), &cfg.eval_seeds(n_paths))?;
    let row = EvaluationRow { variant: theta.variant(), sigma_f, theta: theta.flat(), evaluation: e };
    let path = out_dir.join(format!("evaluate_{}_{}.csv", row.variant, sigma_tag(sigma_f)));
    let header: Vec<String> = EVAL_HEADER.iter().map(|s| s.to_string()).collect();
    write_csv(&path, cfg, &header, &[eval_record(&row)])?;
    Ok(row)
}

/// Loads a checkpoint and checks that it belongs to `cfg`.
pub fn load_checkpoint(cfg: &ExperimentConfig, path: &Path) -> Result<Checkpoint> {
    let cp = Checkpoint::load(path)?;
    if cp.config_hash != cfg.hash() {
        return Err(Error::Config(format!("checkpoint {} was written for a different config", path.display())));
    }
    Ok(cp)
}

/// Outcome of one table cell.
#[derive(Debug, Clone, PartialEq)]
pub enum CellOutcome {
    Done(EvaluationRow),
    Failed { variant: Variant, sigma_f: f64, kind: &'static str, message: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResultsTable {
    pub cells: Vec<CellOutcome>,
    /// Wall-clock seconds per cell, in cell order.
    pub runtimes: Vec<f64>,
}

impl ResultsTable {
    pub fn get(&self, variant: Variant, sigma_f: f64) -> Option<&EvaluationRow> {
        self.cells.iter().find_map(|c| match c {
            CellOutcome::Done(r) if r.variant == variant && r.sigma_f == sigma_f => Some(r),
            _ => None,
        })
    }
}

/// Trains and evaluates every (variant, sigma_f) cell. Writes `table1.csv`
/// (bit-reproducible from the config) and `table1_runtime.csv`. A failed cell
/// gets a `failed:<kind>` status and the rest of the table still runs.
pub fn table1(cfg: &ExperimentConfig, out_dir: &Path) -> Result<ResultsTable> {
    let params = cfg.storage_params();
    let seeds = cfg.eval_seeds(cfg.n_eval_paths);
    let mut cells = Vec::new();
    let mut runtimes = Vec::new();
    for &sigma_f in &cfg.sigma_f_grid {
        let scenario = cfg.scenario(sigma_f)?;
        let bench = rewards(&Theta::Benchmark, &scenario, &params, &seeds)?;
        for &variant in &cfg.variants {
            let start = Instant::now();
            let outcome = (|| -> Result<EvaluationRow> {
                let theta = if variant == Variant::Benchmark {
                    Theta::Benchmark
                } else {
                    train(cfg, variant, sigma_f, out_dir, None)?.theta()?
                };
                let own = if variant == Variant::Benchmark {
                    bench.clone()
                } else {
                    rewards(&theta, &scenario, &params, &seeds)?
                };
                Ok(EvaluationRow { variant, sigma_f, theta: theta.flat(), evaluation: compare(&own, &bench)? })
            })();
            runtimes.push(start.elapsed().as_secs_f64());
            cells.push(match outcome {
                Ok(r) => CellOutcome::Done(r),
                Err(e) => CellOutcome::Failed { variant, sigma_f, kind: e.kind(), message: e.to_string() },
            });
        }
    }
    let mut header: Vec<String> = EVAL_HEADER.iter().map(|s| s.to_string()).collect();
    header.push("status".into());
    let rows: Vec<Vec<String>> = cells
        .iter()
        .map(|c| match c {
            CellOutcome::Done(r) => {
                let mut row = eval_record(r);
                row.push("ok".into());
                row
            }
            CellOutcome::Failed { variant, sigma_f, kind, .. } => {
                let mut row = vec![variant.to_string(), fmt_f64(*sigma_f)];
                row.extend(std::iter::repeat_n(String::new(), EVAL_HEADER.len() - 2));
                row.push(format!("failed:{kind}"));
                row
            }
        })
        .collect();
    write_csv(&out_dir.join("table1.csv"), cfg, &header, &rows)?;
    let timing: Vec<Vec<String>> = cells
        .iter()
        .zip(&runtimes)
        .map(|(c, secs)| {
            let (v, s) = match c {
                CellOutcome::Done(r) => (r.variant, r.sigma_f),
                CellOutcome::Failed { variant, sigma_f, .. } => (*variant, *sigma_f),
            };
            vec![v.to_string(), fmt_f64(s), format!("{secs:.3}")]
        })
        .collect();
    let timing_header = ["variant", "sigma_f", "runtime_seconds"].map(String::from);
    write_csv(&out_dir.join("table1_runtime.csv"), cfg, &timing_header, &timing)?;
    Ok(ResultsTable { cells, runtimes })
}

/// Writes `theta_curves.csv` (multiplier per lookahead offset for every
/// checkpoint found at `sigma_f`) and `trajectories.csv` (storage level and
/// cumulative profit per period on evaluation path 0, benchmark included).
/// Constant, Lookup and Exponential checkpoints are required.
pub fn curves(cfg: &ExperimentConfig, sigma_f: f64, out_dir: &Path) -> Result<Vec<(Variant, Theta)>> {
    let mut tuned = Vec::new();
    for variant in Variant::TUNABLE {
        let path = checkpoint_path(out_dir, variant, sigma_f);
        if path.exists() {
            tuned.push((variant, load_checkpoint(cfg, &path)?.theta()?));
        } else if variant != Variant::Capacity {
            return Err(Error::Config(format!("missing checkpoint {}", path.display())));
        }
    }
    let mut rows = Vec::new();
    for (variant, theta) in tuned.iter().filter(|(v, _)| *v != Variant::Capacity) {
        for tau in 1..=cfg.h {
            rows.push(vec![variant.to_string(), tau.to_string(), fmt_f64(theta.wind_multiplier(tau))]);
        }
    }
    write_csv(&out_dir.join("theta_curves.csv"), cfg, &["variant", "tau", "theta"].map(String::from), &rows)?;

    let scenario = cfg.scenario(sigma_f)?;
    let path = scenario.sample(cfg.eval_seeds(1)[0]);
    let params = cfg.storage_params();
    let mut rows = Vec::new();
    let policies = std::iter::once((Variant::Benchmark, Theta::Benchmark)).chain(tuned.iter().cloned());
    for (variant, theta) in policies {
        let traj = simulate(&theta, &path, cfg.horizon(), &params)?;
        for (t, (r, p)) in traj.storage_series.iter().zip(traj.cumulative_profit()).enumerate() {
            rows.push(vec![variant.to_string(), t.to_string(), fmt_f64(*r), fmt_f64(p)]);
        }
    }
    let header = ["variant", "t", "storage", "cumulative_profit"].map(String::from);
    write_csv(&out_dir.join("trajectories.csv"), cfg, &header, &rows)?;
    Ok(tuned)
}

/// Dumps the sample path for `seed` at `sigma_f` as a CSV bundle in `out_dir`.
pub fn sample(cfg: &ExperimentConfig, sigma_f: f64, seed: u64, out_dir: &Path) -> Result<()> {
    cfg.scenario(sigma_f)?.sample(seed).write_bundle(out_dir)
}

/// Run manifest: config hash, seeds, version and the command that ran.
pub fn write_manifest(cfg: &ExperimentConfig, out_dir: &Path, command: &str) -> Result<()> {
    let manifest = serde_json::json!({
        "command": command,
        "config_hash": cfg.hash(),
        "master_seed": cfg.master_seed,
        "crate_version": env!("CARGO_PKG_VERSION"),
        "eval_seed_rule": "derive_seed(derive_seed(master_seed, EVAL), i)",
        "train_seed_rule": "derive_seed(derive_seed(master_seed, TRAIN), sigma_f bits)",
        "config": cfg,
    });
    write_atomic(&out_dir.join("manifest.json"), serde_json::to_string_pretty(&manifest)?.as_bytes())
}
