//! Deterministic lookahead policies and their parameterized variants.
//!
//! Every variant solves the same `(H_t + 1)`-period LP over the six flows
//! per period. Storage inside the lookahead is not a decision column: the
//! planned level at offset `tau` is `R_t + sum_{k < tau} delta_k`, so the
//! storage rows carry those cumulative deltas on the left and `R_t` on the
//! right at every offset. Parameters only touch the right-hand side at
//! offsets `tau >= 1`; offset 0 always sees the true state.

use serde::{Deserialize, Serialize};

use crate::energy::SamplePath;
use crate::error::{Error, Result};
use crate::lp::{self, LpProblem, LpSolution, LpStatus, Matrix, EPS_FEAS};
use crate::model::{
    contribution_coefficients, ConstraintRow, Decision, Flow, Horizon, Policy, State, StorageParams,
};

/// Parameterization family, without values.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    Benchmark,
    Constant,
    Lookup,
    Exponential,
    Capacity,
}

impl Variant {
    pub const TUNABLE: [Variant; 4] = [Variant::Constant, Variant::Lookup, Variant::Exponential, Variant::Capacity];

    pub fn name(self) -> &'static str {
        match self {
            Variant::Benchmark => "benchmark",
            Variant::Constant => "constant",
            Variant::Lookup => "lookup",
            Variant::Exponential => "exponential",
            Variant::Capacity => "capacity",
        }
    }

    /// Number of tunable components for lookahead length `h`.
    pub fn dimension(self, h: usize) -> usize {
        match self {
            Variant::Benchmark => 0,
            Variant::Constant => 1,
            Variant::Lookup => h,
            Variant::Exponential | Variant::Capacity => 2,
        }
    }

    /// Parameter values that reproduce the benchmark.
    pub fn identity(self, h: usize) -> Theta {
        match self {
            Variant::Benchmark => Theta::Benchmark,
            Variant::Constant => Theta::Constant(1.0),
            Variant::Lookup => Theta::Lookup(vec![1.0; h]),
            Variant::Exponential => Theta::Exponential { scale: 1.0, rate: 0.0 },
            Variant::Capacity => Theta::Capacity { upper: 1.0, lower: 0.0 },
        }
    }

    /// Feasible box for the flat parameter vector.
    pub fn param_box(self, h: usize) -> ThetaBox {
        let (lower, upper) = match self {
            Variant::Benchmark => (vec![], vec![]),
            Variant::Constant => (vec![0.0], vec![2.0]),
            Variant::Lookup => (vec![0.0; h], vec![2.0; h]),
            Variant::Exponential => (vec![0.0, -1.0], vec![2.0, 0.1]),
            Variant::Capacity => (vec![0.0, 0.0], vec![1.0, 1.0]),
        };
        ThetaBox { lower, upper }
    }
}

impl std::str::FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "benchmark" => Ok(Variant::Benchmark),
            "constant" => Ok(Variant::Constant),
            "lookup" => Ok(Variant::Lookup),
            "exponential" => Ok(Variant::Exponential),
            "capacity" => Ok(Variant::Capacity),
            other => Err(Error::InvalidParameters(format!("unknown variant {other:?}"))),
        }
    }
}

impl std::fmt::Display for Variant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Componentwise bounds on a flat parameter vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThetaBox {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl ThetaBox {
    pub fn contains(&self, v: &[f64]) -> bool {
        v.len() == self.lower.len() && v.iter().enumerate().all(|(i, &x)| x >= self.lower[i] && x <= self.upper[i])
    }

    pub fn project(&self, v: &mut [f64]) {
        for (i, x) in v.iter_mut().enumerate() {
            *x = x.max(self.lower[i]).min(self.upper[i]);
        }
    }

    pub fn width(&self, i: usize) -> f64 {
        self.upper[i] - self.lower[i]
    }
}

/// Right-hand-side parameterization of the lookahead.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Theta {
    Benchmark,
    /// One multiplier on every future renewable forecast.
    Constant(f64),
    /// One multiplier per lookahead offset `1..=H`.
    Lookup(Vec<f64>),
    /// Multiplier `scale * exp(rate * tau)`.
    Exponential { scale: f64, rate: f64 },
    /// Planned storage kept within `[lower, upper]` fractions of capacity.
    Capacity { upper: f64, lower: f64 },
}

impl Theta {
    pub fn variant(&self) -> Variant {
        match self {
            Theta::Benchmark => Variant::Benchmark,
            Theta::Constant(_) => Variant::Constant,
            Theta::Lookup(_) => Variant::Lookup,
            Theta::Exponential { .. } => Variant::Exponential,
            Theta::Capacity { .. } => Variant::Capacity,
        }
    }

    pub fn flat(&self) -> Vec<f64> {
        match self {
            Theta::Benchmark => vec![],
            Theta::Constant(v) => vec![*v],
            Theta::Lookup(v) => v.clone(),
            Theta::Exponential { scale, rate } => vec![*scale, *rate],
            Theta::Capacity { upper, lower } => vec![*upper, *lower],
        }
    }

    pub fn from_flat(variant: Variant, v: &[f64]) -> Result<Self> {
        let want = |n: usize| {
            if v.len() == n {
                Ok(())
            } else {
                Err(Error::InvalidParameters(format!("{variant} expects {n} parameters, got {}", v.len())))
            }
        };
        if v.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidParameters(format!("{variant} parameters must be finite")));
        }
        Ok(match variant {
            Variant::Benchmark => {
                want(0)?;
                Theta::Benchmark
            }
            Variant::Constant => {
                want(1)?;
                Theta::Constant(v[0])
            }
            Variant::Lookup => Theta::Lookup(v.to_vec()),
            Variant::Exponential => {
                want(2)?;
                Theta::Exponential { scale: v[0], rate: v[1] }
            }
            Variant::Capacity => {
                want(2)?;
                Theta::Capacity { upper: v[0], lower: v[1] }
            }
        })
    }

    pub fn dimension(&self) -> usize {
        match self {
            Theta::Lookup(v) => v.len(),
            other => other.variant().dimension(0),
        }
    }

    /// Checks the parameter count against `h` and the values against the box.
    pub fn validate(&self, h: usize) -> Result<()> {
        let variant = self.variant();
        let flat = self.flat();
        if flat.len() != variant.dimension(h) {
            return Err(Error::InvalidParameters(format!(
                "{variant} expects {} parameters for H={h}, got {}",
                variant.dimension(h),
                flat.len()
            )));
        }
        if !variant.param_box(h).contains(&flat) {
            return Err(Error::InvalidParameters(format!("{variant} parameters {flat:?} lie outside their box")));
        }
        Ok(())
    }

    /// Multiplier on the renewable forecast at offset `tau >= 1`.
    pub fn wind_multiplier(&self, tau: usize) -> f64 {
        match self {
            Theta::Constant(v) => *v,
            Theta::Lookup(v) => v[tau - 1],
            Theta::Exponential { scale, rate } => scale * (rate * tau as f64).exp(),
            Theta::Benchmark | Theta::Capacity { .. } => 1.0,
        }
    }
}

/// Lookahead LP with its row and column bookkeeping and RHS derivatives.
#[derive(Debug, Clone)]
pub struct LookaheadAssembly {
    pub problem: LpProblem,
    pub row_map: Vec<(usize, ConstraintRow)>,
    pub col_map: Vec<(usize, Flow)>,
    /// `db/dtheta`, one column per parameter component.
    pub rhs_jacobian_theta: Matrix,
    /// `db/dR_t`.
    pub rhs_jacobian_state: Vec<f64>,
}

impl LookaheadAssembly {
    /// Number of lookahead offsets, `H_t + 1`.
    pub fn periods(&self) -> usize {
        self.col_map.len() / Flow::ALL.len()
    }
}

fn column(tau: usize, f: Flow) -> usize {
    tau * Flow::ALL.len() + f.index()
}

/// Builds the lookahead LP at period `t` from state `s`.
pub fn assemble(
    theta: &Theta,
    s: &State,
    path: &SamplePath,
    t: usize,
    horizon: Horizon,
    params: &StorageParams,
) -> Result<LookaheadAssembly> {
    if t > horizon.t {
        return Err(Error::Assembly(format!("period {t} is past the horizon T={}", horizon.t)));
    }
    path.check_covers(horizon).map_err(|e| Error::Assembly(e.to_string()))?;
    if let Theta::Lookup(v) = theta {
        if v.len() < horizon.h {
            return Err(Error::Assembly(format!("lookup table has {} entries, H={}", v.len(), horizon.h)));
        }
    }
    let h_t = horizon.lookahead_at(t);
    let periods = h_t + 1;
    let n = periods * Flow::ALL.len();
    let capacity = match theta {
        Theta::Capacity { upper, lower } => Some((*upper, *lower)),
        _ => None,
    };
    let m = 7 * periods + if capacity.is_some() { h_t } else { 0 };
    let k = theta.dimension();

    let mut c = vec![0.0; n];
    let mut col_map = Vec::with_capacity(n);
    for tau in 0..periods {
        let price = if tau == 0 { s.p } else { path.f_p.get(t, t + tau) };
        let coeffs = contribution_coefficients(price, params.penalty, params.beta_d);
        for f in Flow::ALL {
            c[column(tau, f)] = coeffs[f.index()];
            col_map.push((tau, f));
        }
    }

    let mut a = Matrix::zeros(m, n);
    let mut b = vec![0.0; m];
    let mut row_map = Vec::with_capacity(m);
    let mut jac_theta = Matrix::zeros(m, k);
    let mut jac_state = vec![0.0; m];

    // Storage rows: `sign * (rd_tau + rg_tau) - sign * sum_{k<tau} delta_k`
    // for the outflow side, the mirror image for the inflow side.
    let storage_history = |a: &mut Matrix, row: usize, tau: usize, sign: f64| {
        for prev in 0..tau {
            for f in [Flow::StorageDemand, Flow::WindStorage, Flow::GridStorage, Flow::StorageGrid] {
                a.set(row, column(prev, f), sign * f.storage_coefficient(params.beta_c));
            }
        }
    };

    for tau in 0..periods {
        let (d, g, e) = if tau == 0 {
            (s.d, s.g, s.e)
        } else {
            (path.forecast_demand(t, t + tau), path.forecast_grid(t, t + tau), path.f_e.get(t, t + tau))
        };
        let base = 7 * tau;
        let col = |f| column(tau, f);
        for (offset, kind) in ConstraintRow::BASE.into_iter().enumerate() {
            let row = base + offset;
            row_map.push((tau, kind));
            match kind {
                ConstraintRow::Demand => {
                    a.set(row, col(Flow::WindDemand), 1.0);
                    a.set(row, col(Flow::StorageDemand), params.beta_d);
                    a.set(row, col(Flow::GridDemand), 1.0);
                    b[row] = d;
                }
                ConstraintRow::Grid => {
                    a.set(row, col(Flow::GridDemand), 1.0);
                    a.set(row, col(Flow::GridStorage), 1.0);
                    b[row] = g;
                }
                ConstraintRow::StorageOut => {
                    a.set(row, col(Flow::StorageDemand), 1.0);
                    a.set(row, col(Flow::StorageGrid), 1.0);
                    storage_history(&mut a, row, tau, -1.0);
                    b[row] = s.r;
                    jac_state[row] = 1.0;
                }
                ConstraintRow::StorageRoom => {
                    a.set(row, col(Flow::WindStorage), 1.0);
                    a.set(row, col(Flow::GridStorage), 1.0);
                    storage_history(&mut a, row, tau, 1.0);
                    b[row] = match capacity {
                        Some((upper, _)) if tau >= 1 => {
                            jac_theta.set(row, 0, params.r_max);
                            params.r_max * upper - s.r
                        }
                        _ => params.r_max - s.r,
                    };
                    jac_state[row] = -1.0;
                }
                ConstraintRow::Wind => {
                    a.set(row, col(Flow::WindStorage), 1.0);
                    a.set(row, col(Flow::WindDemand), 1.0);
                    b[row] = if tau == 0 { e } else { e * theta.wind_multiplier(tau) };
                    if tau >= 1 {
                        match theta {
                            Theta::Constant(_) => jac_theta.set(row, 0, e),
                            Theta::Lookup(_) => jac_theta.set(row, tau - 1, e),
                            Theta::Exponential { scale, rate } => {
                                let growth = (rate * tau as f64).exp();
                                jac_theta.set(row, 0, e * growth);
                                jac_theta.set(row, 1, e * scale * tau as f64 * growth);
                            }
                            Theta::Benchmark | Theta::Capacity { .. } => {}
                        }
                    }
                }
                ConstraintRow::Charge => {
                    a.set(row, col(Flow::WindStorage), 1.0);
                    a.set(row, col(Flow::GridStorage), 1.0);
                    b[row] = params.gamma_c;
                }
                ConstraintRow::Discharge => {
                    a.set(row, col(Flow::StorageDemand), 1.0);
                    a.set(row, col(Flow::StorageGrid), 1.0);
                    b[row] = params.gamma_d;
                }
                ConstraintRow::StorageFloor => unreachable!(),
            }
        }
    }

    if let Some((_, lower)) = capacity {
        for tau in 1..periods {
            let row = 7 * periods + tau - 1;
            row_map.push((tau, ConstraintRow::StorageFloor));
            a.set(row, column(tau, Flow::StorageDemand), 1.0);
            a.set(row, column(tau, Flow::StorageGrid), 1.0);
            storage_history(&mut a, row, tau, -1.0);
            b[row] = s.r - params.r_max * lower;
            jac_theta.set(row, 1, -params.r_max);
            jac_state[row] = 1.0;
        }
    }

    let problem = LpProblem::new(c, a, b).map_err(|e| Error::Assembly(e.to_string()))?;
    Ok(LookaheadAssembly { problem, row_map, col_map, rhs_jacobian_theta: jac_theta, rhs_jacobian_state: jac_state })
}

/// How the executed decision was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DecisionSource {
    /// First-stage LP flows, used as solved.
    Optimal,
    /// First-stage LP flows scaled back onto the true-state rows.
    Repaired,
    /// Lookahead infeasible; serve demand from the grid and do nothing else.
    FallbackUsed,
}

#[derive(Debug, Clone)]
pub struct DecideOutcome {
    pub decision: Decision,
    pub source: DecisionSource,
    pub solution: LpSolution,
    pub assembly: LookaheadAssembly,
}

/// Solves the lookahead at `t` and returns the executable first-stage decision.
pub fn decide(
    theta: &Theta,
    s: &State,
    path: &SamplePath,
    t: usize,
    horizon: Horizon,
    params: &StorageParams,
) -> Result<DecideOutcome> {
    let assembly = assemble(theta, s, path, t, horizon, params)?;
    let solution = lp::solve(&assembly.problem)?;
    let (decision, source) = match solution.status {
        LpStatus::Optimal => {
            let mut first = [0.0; 6];
            first.copy_from_slice(&solution.x[..6]);
            repair(Decision::from_array(first), s, params)
        }
        LpStatus::Infeasible { .. } => (fallback(s), DecisionSource::FallbackUsed),
        LpStatus::Unbounded { .. } => return Err(Error::UnboundedLookahead { period: t }),
    };
    Ok(DecideOutcome { decision, source, solution, assembly })
}

/// Serve as much demand from the grid as it allows.
pub fn fallback(s: &State) -> Decision {
    Decision { gd: s.d.min(s.g).max(0.0), ..Default::default() }
}

/// Drops round-off negatives, then scales the flows of each violated
/// true-state row down onto its capacity. Rows have nonnegative
/// coefficients, so scaling one row never breaks another.
pub fn repair(x: Decision, s: &State, params: &StorageParams) -> (Decision, DecisionSource) {
    let mut v = x.to_array().map(|f| f.max(0.0));
    let mut repaired = false;
    for row in ConstraintRow::BASE {
        let (lhs, rhs) = Decision::from_array(v).row(row, s, params);
        if lhs > rhs + EPS_FEAS {
            let scale = rhs.max(0.0) / lhs;
            for f in row_flows(row) {
                v[f.index()] *= scale;
            }
            repaired = true;
        }
    }
    (Decision::from_array(v), if repaired { DecisionSource::Repaired } else { DecisionSource::Optimal })
}

fn row_flows(row: ConstraintRow) -> &'static [Flow] {
    match row {
        ConstraintRow::Demand => &[Flow::WindDemand, Flow::StorageDemand, Flow::GridDemand],
        ConstraintRow::Grid => &[Flow::GridDemand, Flow::GridStorage],
        ConstraintRow::StorageOut | ConstraintRow::Discharge | ConstraintRow::StorageFloor => {
            &[Flow::StorageDemand, Flow::StorageGrid]
        }
        ConstraintRow::StorageRoom | ConstraintRow::Charge => &[Flow::WindStorage, Flow::GridStorage],
        ConstraintRow::Wind => &[Flow::WindStorage, Flow::WindDemand],
    }
}

impl Policy for Theta {
    fn act(&self, s: &State, path: &SamplePath, t: usize, horizon: Horizon, params: &StorageParams) -> Result<Decision> {
        Ok(decide(self, s, path, t, horizon, params)?.decision)
    }
}
