#[path = "support/oracle.rs"]
mod oracle;

use cfa::lp::{self, LpProblem, LpStatus, EPS_FEAS, EPS_OBJ};
use oracle::OracleResult;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn check_invariants(p: &LpProblem, s: &lp::LpSolution) {
    let ax = p.a().mul_vec(&s.x);
    for (i, (&lhs, &rhs)) in ax.iter().zip(p.b()).enumerate() {
        assert!(lhs <= rhs + EPS_FEAS, "row {i} violated: {lhs} > {rhs}");
    }
    assert!(s.x.iter().all(|&v| v >= -EPS_FEAS));
    let cx: f64 = p.c().iter().zip(&s.x).map(|(c, x)| c * x).sum();
    assert!((cx - s.objective).abs() <= EPS_OBJ);
    // Strong duality and dual feasibility.
    let by: f64 = p.b().iter().zip(&s.duals).map(|(b, y)| b * y).sum();
    assert!((by - s.objective).abs() <= EPS_OBJ * (1.0 + s.objective.abs()), "{by} vs {}", s.objective);
    assert!(s.duals.iter().all(|&y| y >= -EPS_FEAS));
    // Complementary slackness.
    for i in 0..p.m() {
        assert!((s.duals[i] * (p.b()[i] - ax[i])).abs() <= EPS_OBJ);
    }
    // Basic values are B^-1 b in basis order.
    let xb = s.basis_inverse().mul_vec(p.b());
    for (pos, &j) in s.basis.iter().enumerate() {
        let v = if j < p.n() { s.x[j] } else { p.b()[j - p.n()] - ax[j - p.n()] };
        assert!((v - xb[pos]).abs() <= EPS_OBJ);
    }
    // y = B^-T c_B
    let cb: Vec<f64> = s.basis.iter().map(|&j| p.augmented_cost(j)).collect();
    let y = s.basis_inverse().transpose_mul_vec(&cb);
    for (a, b) in y.iter().zip(&s.duals) {
        assert!((a - b).abs() <= 1e-12);
    }
}

#[test]
fn random_lps_match_vertex_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut counts = [0usize; 3];
    for _ in 0..500 {
        let (c, a, b) = oracle::random_integer_lp(&mut rng);
        let p = LpProblem::from_rows(c.clone(), &a, b.clone()).unwrap();
        let s = lp::solve(&p).unwrap();
        match (oracle::enumerate(&c, &a, &b), s.status) {
            (OracleResult::Optimal { objective, .. }, LpStatus::Optimal) => {
                assert!((objective - s.objective).abs() <= 1e-8, "{objective} vs {}", s.objective);
                check_invariants(&p, &s);
                counts[0] += 1;
            }
            (OracleResult::Infeasible, LpStatus::Infeasible { .. }) => counts[1] += 1,
            (OracleResult::Unbounded, LpStatus::Unbounded { .. }) => counts[2] += 1,
            (o, st) => panic!("oracle {o:?} vs solver {st:?} on c={c:?} a={a:?} b={b:?}"),
        }
    }
    assert!(counts.iter().all(|&k| k > 0), "{counts:?}");
}

#[test]
fn rhs_sensitivity_matches_reperturbation() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let h = 1e-6;
    let mut checked = 0;
    for _ in 0..400 {
        let (c, a, b) = oracle::random_integer_lp(&mut rng);
        let p = LpProblem::from_rows(c, &a, b.clone()).unwrap();
        let s = lp::solve(&p).unwrap();
        if !s.is_optimal() {
            continue;
        }
        for i in 0..p.m() {
            let mut bp = b.clone();
            let mut bm = b.clone();
            bp[i] += h;
            bm[i] -= h;
            let sp = lp::solve(&p.with_rhs(bp).unwrap()).unwrap();
            let sm = lp::solve(&p.with_rhs(bm).unwrap()).unwrap();
            if sp.basis != s.basis || sm.basis != s.basis {
                continue;
            }
            let mut e = vec![0.0; p.m()];
            e[i] = 1.0;
            for j in 0..p.n() {
                let fd = (sp.x[j] - sm.x[j]) / (2.0 * h);
                let an = s.column_sensitivity(j, &e);
                assert!((fd - an).abs() < 1e-6, "col {j} row {i}: fd {fd} analytic {an}");
            }
            checked += 1;
        }
    }
    assert!(checked > 100);
}

#[test]
fn identical_inputs_give_identical_bases() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..100 {
        let (c, a, b) = oracle::random_integer_lp(&mut rng);
        let p = LpProblem::from_rows(c, &a, b).unwrap();
        assert_eq!(lp::solve(&p).unwrap(), lp::solve(&p).unwrap());
    }
}

proptest! {
    #[test]
    fn optimal_solutions_satisfy_duality(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (c, a, b) = oracle::random_integer_lp(&mut rng);
        let p = LpProblem::from_rows(c, &a, b).unwrap();
        let s = lp::solve(&p).unwrap();
        if s.is_optimal() {
            check_invariants(&p, &s);
        }
    }
}
