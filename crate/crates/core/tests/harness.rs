use std::fs;
use std::path::Path;

use cfa::exp::{self, ExperimentConfig};
use cfa::policy::{Theta, Variant};
use cfa::search::DEFAULT_EPS;

fn tiny() -> ExperimentConfig {
    ExperimentConfig {
        t: 10,
        h: 4,
        iterations: 6,
        batch_size: 2,
        n_eval_paths: 6,
        sigma_f_grid: vec![20.0, 35.0],
        checkpoint_every: 4,
        ..Default::default()
    }
}

/// Rows of a harness CSV after its banner and header.
fn read_rows(path: &Path) -> Vec<Vec<String>> {
    let text = fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    assert!(lines.next().unwrap().starts_with("# config_hash="));
    let body: String = lines.collect::<Vec<_>>().join("\n");
    let mut r = csv::Reader::from_reader(body.as_bytes());
    r.records().map(|rec| rec.unwrap().iter().map(String::from).collect()).collect()
}

#[test]
fn trace_replays_the_adagrad_steps() {
    let cfg = tiny();
    let dir = tempfile::tempdir().unwrap();
    exp::train(&cfg, Variant::Lookup, 35.0, dir.path(), None).unwrap();
    let rows = read_rows(&exp::trace_path(dir.path(), Variant::Lookup, 35.0));
    assert_eq!(rows.len(), cfg.iterations + 1);
    let d = cfg.h;
    let num = |s: &String| s.parse::<f64>().unwrap();
    let mut acc = vec![0.0; d];
    let bounds = Variant::Lookup.param_box(d);
    for w in rows.windows(2) {
        for i in 0..d {
            let theta = num(&w[0][1 + i]);
            let g = num(&w[0][d + 3 + i]);
            acc[i] += g * g;
            let next = (theta + cfg.eta * g / (acc[i] + DEFAULT_EPS).sqrt()).clamp(bounds.lower[i], bounds.upper[i]);
            assert_eq!(num(&w[1][1 + i]), next, "component {i} at n = {}", w[0][0]);
        }
    }
}

#[test]
fn resume_from_a_midway_checkpoint_is_bit_exact() {
    let cfg = tiny();
    let full = tempfile::tempdir().unwrap();
    let done = exp::train(&cfg, Variant::Exponential, 20.0, full.path(), None).unwrap();

    // A shorter run on the same seed visits the same batches.
    let partial = tempfile::tempdir().unwrap();
    let short = ExperimentConfig { iterations: 3, ..cfg.clone() };
    let head = exp::train(&short, Variant::Exponential, 20.0, partial.path(), None).unwrap();
    assert_eq!(head.progress.trace[..3], done.progress.trace[..3]);

    // Cut the finished run back to iteration 4 and let it finish again.
    let mut mid = done.clone();
    mid.progress.trace.truncate(4);
    mid.progress.iteration = 4;
    mid.progress.theta = done.progress.trace[4].theta.clone();
    mid.progress.adagrad.g_diag = vec![0.0; 2];
    for r in &done.progress.trace[..4] {
        for (a, g) in mid.progress.adagrad.g_diag.iter_mut().zip(&r.gradient) {
            *a += g * g;
        }
    }
    let resumed_dir = tempfile::tempdir().unwrap();
    let resumed = exp::train(&cfg, Variant::Exponential, 20.0, resumed_dir.path(), Some(mid)).unwrap();
    assert_eq!(resumed.progress, done.progress);
    let a = fs::read(exp::trace_path(full.path(), Variant::Exponential, 20.0)).unwrap();
    let b = fs::read(exp::trace_path(resumed_dir.path(), Variant::Exponential, 20.0)).unwrap();
    assert_eq!(a, b);
}

#[test]
fn resume_rejects_foreign_checkpoints() {
    let cfg = tiny();
    let dir = tempfile::tempdir().unwrap();
    let cp = exp::train(&cfg, Variant::Constant, 20.0, dir.path(), None).unwrap();
    assert!(exp::train(&cfg, Variant::Constant, 35.0, dir.path(), Some(cp.clone())).is_err());
    let other = ExperimentConfig { penalty: 500.0, ..cfg };
    assert!(exp::train(&other, Variant::Constant, 20.0, dir.path(), Some(cp)).is_err());
}

#[test]
fn table_is_reproducible_from_the_master_seed() {
    let cfg = ExperimentConfig { variants: vec![Variant::Constant, Variant::Capacity], ..tiny() };
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let ta = exp::table1(&cfg, a.path()).unwrap();
    exp::table1(&cfg, b.path()).unwrap();
    assert_eq!(fs::read(a.path().join("table1.csv")).unwrap(), fs::read(b.path().join("table1.csv")).unwrap());
    assert_eq!(ta.cells.len(), 4);
    assert!(ta.runtimes.iter().all(|&s| s > 0.0));
    let rows = read_rows(&a.path().join("table1.csv"));
    assert!(rows.iter().all(|r| r.last().unwrap() == "ok"));

    let reseeded = ExperimentConfig { master_seed: cfg.master_seed + 1, ..cfg };
    let c = tempfile::tempdir().unwrap();
    exp::table1(&reseeded, c.path()).unwrap();
    assert_ne!(fs::read(a.path().join("table1.csv")).unwrap(), fs::read(c.path().join("table1.csv")).unwrap());
}

#[test]
fn benchmark_cell_shows_no_improvement() {
    let cfg = ExperimentConfig { variants: vec![Variant::Benchmark, Variant::Constant], ..tiny() };
    let dir = tempfile::tempdir().unwrap();
    let table = exp::table1(&cfg, dir.path()).unwrap();
    let bench = table.get(Variant::Benchmark, 20.0).unwrap();
    assert_eq!(bench.evaluation.delta, 0.0);
    assert!(table.get(Variant::Constant, 35.0).is_some());
}

#[test]
fn curves_follow_the_parameterizations() {
    let cfg = ExperimentConfig { iterations: 2, ..tiny() };
    let dir = tempfile::tempdir().unwrap();
    for v in [Variant::Constant, Variant::Lookup, Variant::Exponential] {
        exp::train(&cfg, v, 35.0, dir.path(), None).unwrap();
    }
    let tuned = exp::curves(&cfg, 35.0, dir.path()).unwrap();
    let rows = read_rows(&dir.path().join("theta_curves.csv"));
    assert_eq!(rows.len(), 3 * cfg.h);
    for (v, theta) in &tuned {
        let curve: Vec<f64> =
            rows.iter().filter(|r| r[0] == v.name()).map(|r| r[2].parse().unwrap()).collect();
        match theta {
            Theta::Constant(c) => assert!(curve.iter().all(|x| x == c)),
            Theta::Exponential { scale, rate } => {
                for (k, x) in curve.iter().enumerate() {
                    assert_eq!(*x, scale * (rate * (k + 1) as f64).exp());
                }
            }
            Theta::Lookup(values) => assert_eq!(&curve, values),
            _ => unreachable!(),
        }
    }
    let traj = read_rows(&dir.path().join("trajectories.csv"));
    assert_eq!(traj.len(), 4 * (cfg.t + 1));
}

#[test]
fn evaluation_bytes_are_deterministic() {
    let cfg = tiny();
    let dirs: Vec<_> = (0..3).map(|_| tempfile::tempdir().unwrap()).collect();
    let bytes: Vec<Vec<u8>> = dirs
        .iter()
        .map(|d| {
            exp::evaluate(&cfg, &Theta::Lookup(vec![0.8; cfg.h]), 20.0, 6, d.path()).unwrap();
            fs::read(d.path().join("evaluate_lookup_sf20.csv")).unwrap()
        })
        .collect();
    assert_eq!(bytes[0], bytes[1]);
    assert_eq!(bytes[1], bytes[2]);
}

#[test]
fn shipped_config_matches_the_defaults() {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/default.toml");
    assert_eq!(ExperimentConfig::load(&path).unwrap(), ExperimentConfig::default());
}
