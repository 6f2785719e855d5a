//! Sample-path policy gradients through the optimal lookahead basis.
//!
//! For a fixed sample path the executed flows at period `t` are the
//! first-stage basic variables `x_B = B^-1 b(theta, R_t)`. Differentiating
//! along the trajectory gives
//! `dx_t = B^-1 (db/dtheta + db/dR * dR_t/dtheta)` and
//! `dR_{t+1}/dtheta = dR_t/dtheta + (-1, beta_c, beta_c, -1) . dx_t`
//! over the storage flows, and the gradient of the sample reward is the sum
//! of realized-price contribution coefficients applied to `dx_t`.

use serde::{Deserialize, Serialize};

use crate::energy::SamplePath;
use crate::error::Result;
use crate::model::{contribution_coefficients, Decision, Flow, Horizon, State, StorageParams, TrajectoryResult};
use crate::policy::{decide, DecideOutcome, DecisionSource, Theta};

/// Neumaier-compensated running sum.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: f64,
    carry: f64,
}

impl CompensatedSum {
    pub fn add(&mut self, v: f64) {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.carry += (self.sum - t) + v;
        } else {
            self.carry += (v - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.carry
    }
}

impl FromIterator<f64> for CompensatedSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut s = CompensatedSum::default();
        iter.into_iter().for_each(|v| s.add(v));
        s
    }
}

/// Componentwise compensated sum of equal-length vectors.
pub fn sum_vectors<'a>(dim: usize, vs: impl IntoIterator<Item = &'a [f64]>) -> Vec<f64> {
    let mut acc = vec![CompensatedSum::default(); dim];
    for v in vs {
        for (a, &x) in acc.iter_mut().zip(v) {
            a.add(x);
        }
    }
    acc.iter().map(CompensatedSum::value).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradientEstimate {
    pub g: Vec<f64>,
    /// Contribution of each period to `g`.
    pub per_period_terms: Vec<Vec<f64>>,
    /// Periods whose basis is not locally constant in `theta`, or whose
    /// term was obtained by one-sided differencing.
    pub basis_change_flags: Vec<bool>,
}

impl GradientEstimate {
    fn zeros(dim: usize) -> Self {
        Self { g: vec![0.0; dim], per_period_terms: Vec::new(), basis_change_flags: Vec::new() }
    }

    pub fn norm(&self) -> f64 {
        self.g.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

/// `dR_t/dtheta`.
#[derive(Debug, Clone, PartialEq)]
pub struct StateSensitivity {
    pub dr_dtheta: Vec<f64>,
}

impl StateSensitivity {
    pub fn zeros(dim: usize) -> Self {
        Self { dr_dtheta: vec![0.0; dim] }
    }

    /// Chains the storage transition through the first-stage flow sensitivities.
    pub fn advance(&mut self, dx: &[[f64; 6]], beta_c: f64) {
        for (i, d) in self.dr_dtheta.iter_mut().enumerate() {
            for f in [Flow::StorageDemand, Flow::WindStorage, Flow::GridStorage, Flow::StorageGrid] {
                *d += f.storage_coefficient(beta_c) * dx[i][f.index()];
            }
        }
    }
}

/// Step for one-sided differencing of repaired periods.
pub const REPAIR_STEP: f64 = 1e-6;

/// Sensitivity of the executed first-stage flows, one array per component.
fn flow_sensitivity(out: &DecideOutcome, sens: &StateSensitivity) -> Vec<[f64; 6]> {
    let k = sens.dr_dtheta.len();
    let mut dx = vec![[0.0; 6]; k];
    if out.source != DecisionSource::Optimal {
        return dx;
    }
    let asm = &out.assembly;
    let jac = &asm.rhs_jacobian_theta;
    for f in Flow::ALL {
        let Some(p) = out.solution.basic_position(f.index()) else { continue };
        let row = out.solution.basis_inverse_row(p);
        let mut via_state = 0.0;
        let mut via_theta = vec![0.0; k];
        for (r, &br) in row.iter().enumerate() {
            if br == 0.0 {
                continue;
            }
            via_state += br * asm.rhs_jacobian_state[r];
            for (i, v) in via_theta.iter_mut().enumerate() {
                *v += br * jac.get(r, i);
            }
        }
        for i in 0..k {
            dx[i][f.index()] = via_theta[i] + via_state * sens.dr_dtheta[i];
        }
    }
    dx
}

/// One-sided difference of the executed decision at a single period.
fn differenced_flow_sensitivity(
    theta: &Theta,
    s: &State,
    x: &Decision,
    sens: &StateSensitivity,
    path: &SamplePath,
    t: usize,
    horizon: Horizon,
    params: &StorageParams,
) -> Result<Vec<[f64; 6]>> {
    let base = theta.flat();
    let bounds = theta.variant().param_box(base.len());
    let mut dx = Vec::with_capacity(base.len());
    for i in 0..base.len() {
        let step = if base[i] + REPAIR_STEP <= bounds.upper[i] { REPAIR_STEP } else { -REPAIR_STEP };
        let mut shifted = base.clone();
        shifted[i] += step;
        let th = Theta::from_flat(theta.variant(), &shifted)?;
        let s2 = State { r: s.r + step * sens.dr_dtheta[i], ..*s };
        let x2 = decide(&th, &s2, path, t, horizon, params)?.decision.to_array();
        let x1 = x.to_array();
        dx.push(std::array::from_fn(|f| (x2[f] - x1[f]) / step));
    }
    Ok(dx)
}

/// Analytic gradient of the sample reward along `path`, with the trajectory.
pub fn trajectory_gradient(
    theta: &Theta,
    path: &SamplePath,
    horizon: Horizon,
    params: &StorageParams,
) -> Result<(GradientEstimate, TrajectoryResult)> {
    path.check_covers(horizon)?;
    let k = theta.dimension();
    let mut est = GradientEstimate::zeros(k);
    let mut sens = StateSensitivity::zeros(k);
    let mut traj = TrajectoryResult::with_capacity(horizon.periods());
    let mut s = State::from_path(params.r0, path, 0);
    for t in 0..=horizon.t {
        let out = decide(theta, &s, path, t, horizon, params)?;
        let x = out.decision;
        let (dx, one_sided) = match out.source {
            DecisionSource::Repaired => {
                (differenced_flow_sensitivity(theta, &s, &x, &sens, path, t, horizon, params)?, true)
            }
            _ => (flow_sensitivity(&out, &sens), false),
        };
        let coeffs = contribution_coefficients(s.p, params.penalty, params.beta_d);
        let term: Vec<f64> = dx.iter().map(|d| d.iter().zip(&coeffs).map(|(a, c)| a * c).sum()).collect();
        est.per_period_terms.push(term);
        est.basis_change_flags.push(one_sided);
        sens.advance(&dx, params.beta_c);
        s = traj.record(s, x, path, t, horizon, params)?;
    }
    est.g = sum_vectors(k, est.per_period_terms.iter().map(Vec::as_slice));
    Ok((est, traj))
}

/// Executed-decision bases along a simulated trajectory; `None` marks a
/// fallback period.
#[derive(Debug, Clone, PartialEq)]
pub struct BasisTrace {
    pub reward: f64,
    pub bases: Vec<Option<Vec<usize>>>,
}

/// Simulates `theta` along `path`, recording the sorted optimal basis of every lookahead.
pub fn trace_bases(theta: &Theta, path: &SamplePath, horizon: Horizon, params: &StorageParams) -> Result<BasisTrace> {
    path.check_covers(horizon)?;
    let mut traj = TrajectoryResult::with_capacity(horizon.periods());
    let mut bases = Vec::with_capacity(horizon.periods());
    let mut s = State::from_path(params.r0, path, 0);
    for t in 0..=horizon.t {
        let out = decide(theta, &s, path, t, horizon, params)?;
        bases.push(match out.source {
            DecisionSource::FallbackUsed => None,
            _ => {
                let mut b = out.solution.basis.clone();
                b.sort_unstable();
                Some(b)
            }
        });
        s = traj.record(s, out.decision, path, t, horizon, params)?;
    }
    Ok(BasisTrace { reward: traj.cumulative_reward, bases })
}

/// Central finite differences plus the basis comparison they imply.
#[derive(Debug, Clone, PartialEq)]
pub struct FiniteDifference {
    pub estimate: GradientEstimate,
    /// Per component: some period changed basis between `theta` and `theta +- h e_i`.
    pub component_basis_change: Vec<bool>,
}

/// Sample reward `F(theta, omega)`.
pub fn sample_reward(theta: &Theta, path: &SamplePath, horizon: Horizon, params: &StorageParams) -> Result<f64> {
    Ok(crate::model::simulate(theta, path, horizon, params)?.cumulative_reward)
}

/// `(F(theta + h e_i) - F(theta - h e_i)) / 2h` on the common path, with
/// per-period flags for bases that differ from the unperturbed run.
pub fn finite_difference_detailed(
    theta: &Theta,
    path: &SamplePath,
    horizon: Horizon,
    params: &StorageParams,
    h: f64,
) -> Result<FiniteDifference> {
    let base = theta.flat();
    let center = trace_bases(theta, path, horizon, params)?;
    let periods = center.bases.len();
    let mut flags = vec![false; periods];
    let mut component_basis_change = vec![false; base.len()];
    let mut g = Vec::with_capacity(base.len());
    for i in 0..base.len() {
        let mut rewards = [0.0; 2];
        for (slot, sign) in [(0, 1.0), (1, -1.0)] {
            let mut v = base.clone();
            v[i] += sign * h;
            let run = trace_bases(&Theta::from_flat(theta.variant(), &v)?, path, horizon, params)?;
            rewards[slot] = run.reward;
            for t in 0..periods {
                if run.bases[t] != center.bases[t] {
                    flags[t] = true;
                    component_basis_change[i] = true;
                }
            }
        }
        g.push((rewards[0] - rewards[1]) / (2.0 * h));
    }
    Ok(FiniteDifference {
        estimate: GradientEstimate { g, per_period_terms: Vec::new(), basis_change_flags: flags },
        component_basis_change,
    })
}

pub fn finite_difference_gradient(
    theta: &Theta,
    path: &SamplePath,
    horizon: Horizon,
    params: &StorageParams,
    h: f64,
) -> Result<GradientEstimate> {
    Ok(finite_difference_detailed(theta, path, horizon, params, h)?.estimate)
}

/// Marks the periods of `est` whose basis changes within `theta +- h e_i`
/// for some component `i`.
pub fn flag_basis_changes(
    est: &mut GradientEstimate,
    theta: &Theta,
    path: &SamplePath,
    horizon: Horizon,
    params: &StorageParams,
    h: f64,
) -> Result<()> {
    let fd = finite_difference_detailed(theta, path, horizon, params, h)?;
    for (a, b) in est.basis_change_flags.iter_mut().zip(fd.estimate.basis_change_flags) {
        *a |= b;
    }
    Ok(())
}

/// Relative error with the denominator floored at one.
pub fn relative_gap(analytic: f64, reference: f64) -> f64 {
    (analytic - reference).abs() / reference.abs().max(1.0)
}
