//! Offline clairvoyant benchmark x*: the single fixed feasible action
//! minimizing the sampled cost integral. Brute-force grid search serves as
//! low-dimensional ground truth; projected subgradient with a violation
//! penalty covers general dimension.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::problem::{ActionSet, ProblemSpec};

pub const GRID_FEASIBILITY_TOL: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("no feasible grid point; smallest constraint violation found was {min_violation:.6e}")]
    NoFeasiblePoint { min_violation: f64 },
    #[error("grid search supports action dimension <= 3, got {0}")]
    DimensionTooLarge(usize),
    #[error("grid search requires a box action set")]
    UnsupportedActionSet,
    #[error("grid resolution must be at least 2, got {0}")]
    BadResolution(usize),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OracleResult {
    pub xstar: Vec<f64>,
    /// Sampled integral of the sum cost at xstar over the horizon.
    pub objective_integral: f64,
    /// Max over sampled t, agents and components of the constraints at xstar.
    pub worst_violation: f64,
    /// "grid" or "subgradient".
    pub method: String,
    pub resolution: Option<usize>,
    pub iterations: Option<usize>,
    pub sample_step: f64,
    pub penalty_weight: Option<f64>,
}

/// Time grid the benchmark is sampled on: left endpoints k * sample_step.
fn time_samples(horizon: f64, sample_step: f64) -> Vec<f64> {
    assert!(sample_step > 0.0);
    let steps = ((horizon / sample_step).round() as usize).max(1);
    (0..steps).map(|k| k as f64 * sample_step).collect()
}

fn sampled_objective(p: &ProblemSpec, ts: &[f64], h: f64, x: &[f64]) -> f64 {
    ts.iter().map(|&t| h * p.sum_cost(t, x)).sum()
}

fn worst_violation(p: &ProblemSpec, ts: &[f64], x: &[f64]) -> f64 {
    let mut worst = f64::NEG_INFINITY;
    for &t in ts {
        for j in 0..p.agent_count {
            for v in p.eval_constraints(j, t, x) {
                worst = worst.max(v);
            }
        }
    }
    if worst == f64::NEG_INFINITY {
        0.0
    } else {
        worst
    }
}

/// Exhaustive search over a regular box grid. Among feasible points returns
/// the sampled-objective minimizer; ties break toward lexicographically
/// smallest coordinates (= smallest linear index, row-major enumeration).
pub fn grid_oracle(
    p: &ProblemSpec,
    resolution: usize,
    sample_step: f64,
) -> Result<OracleResult, OracleError> {
    let d = p.action_dim;
    if d > 3 {
        return Err(OracleError::DimensionTooLarge(d));
    }
    if resolution < 2 {
        return Err(OracleError::BadResolution(resolution));
    }
    let (lower, upper) = match &p.action_set {
        ActionSet::Box { lower, upper } => (lower.clone(), upper.clone()),
        _ => return Err(OracleError::UnsupportedActionSet),
    };
    let ts = time_samples(p.horizon, sample_step);
    let total = resolution.pow(d as u32);
    let point_of = |idx: usize| -> Vec<f64> {
        let mut rest = idx;
        let mut x = vec![0.0; d];
        for axis in (0..d).rev() {
            let cell = rest % resolution;
            rest /= resolution;
            x[axis] = lower[axis]
                + cell as f64 * (upper[axis] - lower[axis]) / (resolution - 1) as f64;
        }
        x
    };

    // (feasible, objective, index): deterministic index-ordered argmin.
    let best = (0..total)
        .into_par_iter()
        .map(|idx| {
            let x = point_of(idx);
            let viol = worst_violation(p, &ts, &x);
            let obj = sampled_objective(p, &ts, sample_step, &x);
            (viol, obj, idx)
        })
        .reduce(
            || (f64::INFINITY, f64::INFINITY, usize::MAX),
            |a, b| {
                let fa = a.0 <= GRID_FEASIBILITY_TOL;
                let fb = b.0 <= GRID_FEASIBILITY_TOL;
                match (fa, fb) {
                    (true, false) => a,
                    (false, true) => b,
                    (false, false) => {
                        if (a.0, a.2) <= (b.0, b.2) {
                            a
                        } else {
                            b
                        }
                    }
                    (true, true) => {
                        if (a.1, a.2) <= (b.1, b.2) {
                            a
                        } else {
                            b
                        }
                    }
                }
            },
        );
    if best.0 > GRID_FEASIBILITY_TOL {
        return Err(OracleError::NoFeasiblePoint { min_violation: best.0 });
    }
    let xstar = point_of(best.2);
    Ok(OracleResult {
        objective_integral: best.1,
        worst_violation: best.0,
        xstar,
        method: "grid".into(),
        resolution: Some(resolution),
        iterations: None,
        sample_step,
        penalty_weight: None,
    })
}

/// Projected subgradient on sampled objective + penalty * positive
/// violations, steps c/sqrt(k); returns the best feasible iterate, or the
/// least-violating one when none is feasible.
pub fn subgradient_oracle(
    p: &ProblemSpec,
    iterations: usize,
    step_c: f64,
    sample_step: f64,
) -> OracleResult {
    let ts = time_samples(p.horizon, sample_step);
    let d = p.action_dim;
    let mut penalty = 1e3 * p.lipschitz_cost.max(1.0);

    let mut x = p
        .feasible_witness
        .clone()
        .unwrap_or_else(|| match &p.action_set {
            ActionSet::Box { lower, upper } => lower
                .iter()
                .zip(upper)
                .map(|(a, b)| 0.5 * (a + b))
                .collect(),
            ActionSet::Ball { center, .. } => center.clone(),
        });
    p.action_set.project_in_place(&mut x);

    let evaluate = |x: &[f64]| {
        (
            worst_violation(p, &ts, x),
            sampled_objective(p, &ts, sample_step, x),
        )
    };
    let (mut best_viol, mut best_obj) = evaluate(&x);
    let mut best_x = x.clone();

    let mut grad = vec![0.0; d];
    let mut comp = vec![0.0; d];
    let check_every = (iterations / 5).max(1);
    for k in 1..=iterations {
        grad.fill(0.0);
        for &t in &ts {
            for j in 0..p.agent_count {
                p.cost_subgradient_into(j, t, &x, &mut comp);
                for (g, c) in grad.iter_mut().zip(&comp) {
                    *g += sample_step * c;
                }
                let f = p.eval_constraints(j, t, &x);
                for (idx, &v) in f.iter().enumerate() {
                    if v > 0.0 {
                        p.constraint_subgradient_into(j, t, &x, idx, &mut comp);
                        for (g, c) in grad.iter_mut().zip(&comp) {
                            *g += penalty * c;
                        }
                    }
                }
            }
        }
        let eta = step_c / (k as f64).sqrt();
        for (xi, g) in x.iter_mut().zip(&grad) {
            *xi -= eta * g;
        }
        p.action_set.project_in_place(&mut x);

        let (viol, obj) = evaluate(&x);
        let better = if best_viol <= GRID_FEASIBILITY_TOL.max(1e-9) {
            viol <= GRID_FEASIBILITY_TOL.max(1e-9) && obj < best_obj
        } else {
            viol < best_viol || (viol <= GRID_FEASIBILITY_TOL.max(1e-9) && obj < best_obj)
        };
        if better {
            best_viol = viol;
            best_obj = obj;
            best_x.copy_from_slice(&x);
        }
        // Persistent infeasibility: tighten the restoration penalty.
        if k % check_every == 0 && viol > 1e-3 {
            penalty *= 2.0;
        }
    }
    OracleResult {
        xstar: best_x,
        objective_integral: best_obj,
        worst_violation: best_viol,
        method: "subgradient".into(),
        resolution: None,
        iterations: Some(iterations),
        sample_step,
        penalty_weight: Some(penalty),
    }
}
