//! Sequential decision model for the storage system: state, decision,
//! contribution, transition and the simulator that rolls a policy forward
//! along a sample path.

use serde::{Deserialize, Serialize};

use crate::energy::SamplePath;
use crate::error::{Error, Result};
use crate::lp::EPS_FEAS;

/// Base-model horizon `T` and lookahead horizon `H`, both in periods.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Horizon {
    pub t: usize,
    pub h: usize,
}

impl Horizon {
    pub fn new(t: usize, h: usize) -> Result<Self> {
        if h < 1 {
            return Err(Error::InvalidParameters(format!("lookahead horizon needs H >= 1, got T={t} H={h}")));
        }
        Ok(Self { t, h })
    }

    /// Lookahead length at period `t`, truncated at the end of the base horizon.
    pub fn lookahead_at(&self, t: usize) -> usize {
        self.h.min(self.t.saturating_sub(t))
    }

    /// Number of decision periods, `T + 1`.
    pub fn periods(&self) -> usize {
        self.t + 1
    }
}

/// Physical storage parameters and the shortfall penalty.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StorageParams {
    pub r_max: f64,
    pub gamma_c: f64,
    pub gamma_d: f64,
    pub beta_c: f64,
    pub beta_d: f64,
    pub penalty: f64,
    /// Storage level at `t = 0`.
    pub r0: f64,
}

impl StorageParams {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("r_max", self.r_max),
            ("gamma_c", self.gamma_c),
            ("gamma_d", self.gamma_d),
            ("penalty", self.penalty),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidParameters(format!("{name} must be positive, got {v}")));
            }
        }
        for (name, v) in [("beta_c", self.beta_c), ("beta_d", self.beta_d)] {
            if !(v > 0.0 && v < 1.0) {
                return Err(Error::InvalidParameters(format!("{name} must lie in (0, 1), got {v}")));
            }
        }
        if !(0.0..=self.r_max).contains(&self.r0) {
            return Err(Error::InvalidParameters(format!("r0 = {} outside [0, r_max]", self.r0)));
        }
        Ok(())
    }
}

/// `S_t = (R, E, P, D, G)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct State {
    /// Storage level.
    pub r: f64,
    /// Renewable energy available this period.
    pub e: f64,
    /// Spot price.
    pub p: f64,
    /// Demand.
    pub d: f64,
    /// Energy available from the grid.
    pub g: f64,
}

impl State {
    /// State at period `t` with storage `r` and exogenous values read from `path`.
    pub fn from_path(r: f64, path: &SamplePath, t: usize) -> Self {
        Self { r, e: path.e[t], p: path.p[t], d: path.d[t], g: path.g[t] }
    }
}

/// The six energy flows, in column order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Flow {
    WindDemand,
    GridDemand,
    StorageDemand,
    WindStorage,
    GridStorage,
    StorageGrid,
}

impl Flow {
    pub const ALL: [Flow; 6] = [
        Flow::WindDemand,
        Flow::GridDemand,
        Flow::StorageDemand,
        Flow::WindStorage,
        Flow::GridStorage,
        Flow::StorageGrid,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn label(self) -> &'static str {
        match self {
            Flow::WindDemand => "wd",
            Flow::GridDemand => "gd",
            Flow::StorageDemand => "rd",
            Flow::WindStorage => "wr",
            Flow::GridStorage => "gr",
            Flow::StorageGrid => "rg",
        }
    }

    /// Coefficient of this flow in the storage balance `R' - R`.
    pub fn storage_coefficient(self, beta_c: f64) -> f64 {
        match self {
            Flow::StorageDemand | Flow::StorageGrid => -1.0,
            Flow::WindStorage | Flow::GridStorage => beta_c,
            Flow::WindDemand | Flow::GridDemand => 0.0,
        }
    }
}

/// The seven per-period constraint rows, plus the optional storage floor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ConstraintRow {
    Demand,
    Grid,
    StorageOut,
    StorageRoom,
    Wind,
    Charge,
    Discharge,
    /// Lower storage bound added by the capacity parameterization.
    StorageFloor,
}

impl ConstraintRow {
    pub const BASE: [ConstraintRow; 7] = [
        ConstraintRow::Demand,
        ConstraintRow::Grid,
        ConstraintRow::StorageOut,
        ConstraintRow::StorageRoom,
        ConstraintRow::Wind,
        ConstraintRow::Charge,
        ConstraintRow::Discharge,
    ];
}

/// `x_t = (x_wd, x_gd, x_rd, x_wr, x_gr, x_rg)`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Decision {
    pub wd: f64,
    pub gd: f64,
    pub rd: f64,
    pub wr: f64,
    pub gr: f64,
    pub rg: f64,
}

impl Decision {
    pub fn from_array(v: [f64; 6]) -> Self {
        Self { wd: v[0], gd: v[1], rd: v[2], wr: v[3], gr: v[4], rg: v[5] }
    }

    pub fn to_array(self) -> [f64; 6] {
        [self.wd, self.gd, self.rd, self.wr, self.gr, self.rg]
    }

    pub fn get(&self, f: Flow) -> f64 {
        self.to_array()[f.index()]
    }

    /// Left-hand side of a true-state constraint row and its capacity.
    pub fn row(&self, row: ConstraintRow, s: &State, p: &StorageParams) -> (f64, f64) {
        match row {
            ConstraintRow::Demand => (self.wd + p.beta_d * self.rd + self.gd, s.d),
            ConstraintRow::Grid => (self.gd + self.gr, s.g),
            ConstraintRow::StorageOut => (self.rd + self.rg, s.r),
            ConstraintRow::StorageRoom => (self.wr + self.gr, p.r_max - s.r),
            ConstraintRow::Wind => (self.wr + self.wd, s.e),
            ConstraintRow::Charge => (self.wr + self.gr, p.gamma_c),
            ConstraintRow::Discharge => (self.rd + self.rg, p.gamma_d),
            ConstraintRow::StorageFloor => (self.rd + self.rg, s.r),
        }
    }

    /// First constraint row (or sign bound) violated beyond `tol`.
    pub fn violation(&self, s: &State, p: &StorageParams, tol: f64) -> Option<(ConstraintRow, f64)> {
        for row in ConstraintRow::BASE {
            let (lhs, rhs) = self.row(row, s, p);
            if lhs > rhs + tol {
                return Some((row, lhs - rhs));
            }
        }
        None
    }

    pub fn is_nonnegative(&self, tol: f64) -> bool {
        self.to_array().iter().all(|&v| v >= -tol)
    }

    pub fn check_feasible(&self, s: &State, p: &StorageParams) -> Result<()> {
        if let Some((i, v)) = self.to_array().iter().enumerate().find(|(_, &v)| v < -EPS_FEAS) {
            return Err(Error::InvalidParameters(format!("flow {} is negative ({v})", Flow::ALL[i].label())));
        }
        match self.violation(s, p, EPS_FEAS) {
            Some((row, violation)) => Err(Error::InfeasibleDecision { row, violation }),
            None => Ok(()),
        }
    }
}

/// Profit of decision `x` in state `s`: energy sold to the load and the grid
/// at the spot price, minus grid purchases, minus the unmet-demand penalty.
pub fn contribution(s: &State, x: &Decision, penalty: f64, beta_d: f64) -> f64 {
    let served = x.wd + beta_d * x.rd + x.gd;
    s.p * (x.wd + beta_d * x.rd + x.gd + beta_d * x.rg - x.gr - x.gd) - penalty * (s.d - served)
}

/// Contribution coefficients of the six flows at price `price`; the
/// contribution is `coeffs . x - penalty * D`.
pub fn contribution_coefficients(price: f64, penalty: f64, beta_d: f64) -> [f64; 6] {
    [
        price + penalty,
        penalty,
        beta_d * (price + penalty),
        0.0,
        -price,
        beta_d * price,
    ]
}

/// Change in storage produced by decision `x`.
pub fn storage_delta(x: &Decision, beta_c: f64) -> f64 {
    -x.rd + beta_c * x.wr + beta_c * x.gr - x.rg
}

/// Exogenous information revealed at the start of the next period.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Exogenous {
    pub e: f64,
    pub p: f64,
    pub d: f64,
    pub g: f64,
}

impl Exogenous {
    pub fn from_path(path: &SamplePath, t: usize) -> Self {
        Self { e: path.e[t], p: path.p[t], d: path.d[t], g: path.g[t] }
    }
}

pub fn transition(s: &State, x: &Decision, next: Exogenous, p: &StorageParams) -> Result<State> {
    x.check_feasible(s, p)?;
    let r = s.r + storage_delta(x, p.beta_c);
    debug_assert!(r >= -EPS_FEAS && r <= p.r_max + EPS_FEAS, "storage {r} left [0, {}]", p.r_max);
    // Feasible decisions keep storage in range; only round-off is clamped.
    let r = r.clamp(0.0, p.r_max);
    Ok(State { r, e: next.e, p: next.p, d: next.d, g: next.g })
}

/// Anything that maps a state to a decision along a sample path.
pub trait Policy {
    fn act(&self, s: &State, path: &SamplePath, t: usize, horizon: Horizon, params: &StorageParams) -> Result<Decision>;
}

impl<F> Policy for F
where
    F: Fn(&State, &SamplePath, usize) -> Decision,
{
    fn act(&self, s: &State, path: &SamplePath, t: usize, _: Horizon, _: &StorageParams) -> Result<Decision> {
        Ok(self(s, path, t))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeriodRecord {
    pub state: State,
    pub decision: Decision,
    pub contribution: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryResult {
    /// Sample cumulative reward `F(theta, omega)`.
    pub cumulative_reward: f64,
    pub per_period: Vec<PeriodRecord>,
    /// `R_t` for `t = 0..=T+1`; the last entry is the storage left after the final decision.
    pub storage_series: Vec<f64>,
}

impl TrajectoryResult {
    pub(crate) fn with_capacity(n: usize) -> Self {
        Self { cumulative_reward: 0.0, per_period: Vec::with_capacity(n), storage_series: Vec::with_capacity(n + 1) }
    }

    /// Records period `t` and returns the next state (or the final storage level).
    pub(crate) fn record(
        &mut self,
        s: State,
        x: Decision,
        path: &SamplePath,
        t: usize,
        horizon: Horizon,
        params: &StorageParams,
    ) -> Result<State> {
        let c = contribution(&s, &x, params.penalty, params.beta_d);
        self.cumulative_reward += c;
        self.per_period.push(PeriodRecord { state: s, decision: x, contribution: c });
        self.storage_series.push(s.r);
        let next = if t < horizon.t {
            Exogenous::from_path(path, t + 1)
        } else {
            Exogenous { e: 0.0, p: s.p, d: 0.0, g: 0.0 }
        };
        let s_next = transition(&s, &x, next, params)?;
        if t == horizon.t {
            self.storage_series.push(s_next.r);
        }
        Ok(s_next)
    }

    pub fn cumulative_profit(&self) -> Vec<f64> {
        let mut acc = 0.0;
        self.per_period
            .iter()
            .map(|r| {
                acc += r.contribution;
                acc
            })
            .collect()
    }
}

/// Rolls `policy` over `path` for periods `0..=T`.
pub fn simulate(
    policy: &impl Policy,
    path: &SamplePath,
    horizon: Horizon,
    params: &StorageParams,
) -> Result<TrajectoryResult> {
    path.check_covers(horizon)?;
    let mut out = TrajectoryResult::with_capacity(horizon.periods());
    let mut s = State::from_path(params.r0, path, 0);
    for t in 0..=horizon.t {
        let x = policy.act(&s, path, t, horizon, params)?;
        s = out.record(s, x, path, t, horizon, params)?;
    }
    Ok(out)
}
