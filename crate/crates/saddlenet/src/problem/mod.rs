//! Environment definition: time-varying local costs and constraints, the
//! compact action set, and the assumption constants that feed the reported
//! bounds. Scenarios live in [`scenarios`]; feature streams in [`features`].

mod features;
pub mod scenarios;

pub use features::{FeatureSample, FeatureStream, FeatureStreamError};
pub use scenarios::{make_scenario, Scenario, ScenarioError, ScenarioSection};

use std::sync::Arc;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum ActionSetError {
    #[error("box bound crossed at coordinate {0}: lower {1} > upper {2}")]
    CrossedBounds(usize, f64, f64),
    #[error("box bounds have mismatched dimensions ({0} vs {1})")]
    BoundDimMismatch(usize, usize),
    #[error("ball radius must be positive, got {0}")]
    NonPositiveRadius(f64),
}

/// Compact convex action set; projection is the Euclidean-nearest point.
#[derive(Debug, Clone)]
pub enum ActionSet {
    Box { lower: Vec<f64>, upper: Vec<f64> },
    Ball { center: Vec<f64>, radius: f64 },
}

impl ActionSet {
    pub fn symmetric_box(dim: usize, half_width: f64) -> Self {
        ActionSet::Box {
            lower: vec![-half_width; dim],
            upper: vec![half_width; dim],
        }
    }

    pub fn validated_box(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self, ActionSetError> {
        if lower.len() != upper.len() {
            return Err(ActionSetError::BoundDimMismatch(lower.len(), upper.len()));
        }
        for (k, (&lo, &hi)) in lower.iter().zip(&upper).enumerate() {
            if lo > hi {
                return Err(ActionSetError::CrossedBounds(k, lo, hi));
            }
        }
        Ok(ActionSet::Box { lower, upper })
    }

    pub fn ball(center: Vec<f64>, radius: f64) -> Result<Self, ActionSetError> {
        if radius <= 0.0 {
            return Err(ActionSetError::NonPositiveRadius(radius));
        }
        Ok(ActionSet::Ball { center, radius })
    }

    pub fn dim(&self) -> usize {
        match self {
            ActionSet::Box { lower, .. } => lower.len(),
            ActionSet::Ball { center, .. } => center.len(),
        }
    }

    pub fn project_in_place(&self, y: &mut [f64]) {
        match self {
            ActionSet::Box { lower, upper } => {
                for ((v, &lo), &hi) in y.iter_mut().zip(lower).zip(upper) {
                    *v = v.clamp(lo, hi);
                }
            }
            ActionSet::Ball { center, radius } => {
                let dist2: f64 = y
                    .iter()
                    .zip(center)
                    .map(|(v, c)| (v - c) * (v - c))
                    .sum();
                let dist = dist2.sqrt();
                if dist > *radius {
                    let scale = radius / dist;
                    for (v, c) in y.iter_mut().zip(center) {
                        *v = c + (*v - c) * scale;
                    }
                }
            }
        }
    }

    pub fn project(&self, y: &[f64]) -> Vec<f64> {
        let mut out = y.to_vec();
        self.project_in_place(&mut out);
        out
    }

    pub fn contains(&self, y: &[f64], tol: f64) -> bool {
        let p = self.project(y);
        y.iter().zip(&p).all(|(a, b)| (a - b).abs() <= tol)
    }

    /// Largest pairwise distance inside the set; used for conservative
    /// constant estimates.
    pub fn diameter(&self) -> f64 {
        match self {
            ActionSet::Box { lower, upper } => lower
                .iter()
                .zip(upper)
                .map(|(lo, hi)| (hi - lo) * (hi - lo))
                .sum::<f64>()
                .sqrt(),
            ActionSet::Ball { radius, .. } => 2.0 * radius,
        }
    }
}

/// Pure per-agent evaluators. Implementations must be deterministic in
/// (agent, t, x).
pub trait Environment: Send + Sync {
    fn cost(&self, agent: usize, t: f64, x: &[f64]) -> f64;
    fn constraints(&self, agent: usize, t: f64, x: &[f64], out: &mut [f64]);
    fn cost_subgradient(&self, agent: usize, t: f64, x: &[f64], out: &mut [f64]);
    fn constraint_subgradient(&self, agent: usize, t: f64, x: &[f64], k: usize, out: &mut [f64]);
}

#[derive(Clone)]
pub struct ProblemSpec {
    pub action_dim: usize,
    pub agent_count: usize,
    pub constraint_counts: Vec<usize>,
    pub action_set: ActionSet,
    pub gamma: f64,
    pub lipschitz_cost: f64,
    pub lipschitz_constraint: f64,
    pub cost_floor_gap: f64,
    pub feasible_witness: Option<Vec<f64>>,
    pub horizon: f64,
    pub regularizer_weight: Option<f64>,
    env: Arc<dyn Environment>,
}

impl ProblemSpec {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        action_dim: usize,
        agent_count: usize,
        constraint_counts: Vec<usize>,
        action_set: ActionSet,
        gamma: f64,
        lipschitz_cost: f64,
        lipschitz_constraint: f64,
        cost_floor_gap: f64,
        feasible_witness: Option<Vec<f64>>,
        horizon: f64,
        regularizer_weight: Option<f64>,
        env: Arc<dyn Environment>,
    ) -> Self {
        assert!(gamma >= 0.0, "gamma must be nonnegative");
        assert!(lipschitz_cost > 0.0, "L0 must be positive");
        assert!(lipschitz_constraint > 0.0, "Lf must be positive");
        assert!(cost_floor_gap > 0.0, "K must be positive");
        assert_eq!(constraint_counts.len(), agent_count);
        assert_eq!(action_set.dim(), action_dim);
        ProblemSpec {
            action_dim,
            agent_count,
            constraint_counts,
            action_set,
            gamma,
            lipschitz_cost,
            lipschitz_constraint,
            cost_floor_gap,
            feasible_witness,
            horizon,
            regularizer_weight,
            env,
        }
    }

    fn check_time(&self, t: f64) {
        assert!(
            t >= -1e-9 && t <= self.horizon + 1e-9,
            "time {t} outside horizon [0, {}]",
            self.horizon
        );
    }

    pub fn eval_cost(&self, agent: usize, t: f64, x: &[f64]) -> f64 {
        self.check_time(t);
        debug_assert_eq!(x.len(), self.action_dim);
        self.env.cost(agent, t, x)
    }

    /// Sum cost f0(t, x) = sum over agents of the local cost at the same x.
    pub fn sum_cost(&self, t: f64, x: &[f64]) -> f64 {
        (0..self.agent_count).map(|j| self.eval_cost(j, t, x)).sum()
    }

    pub fn eval_constraints_into(&self, agent: usize, t: f64, x: &[f64], out: &mut [f64]) {
        self.check_time(t);
        debug_assert_eq!(out.len(), self.constraint_counts[agent]);
        self.env.constraints(agent, t, x, out);
    }

    pub fn eval_constraints(&self, agent: usize, t: f64, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.constraint_counts[agent]];
        self.eval_constraints_into(agent, t, x, &mut out);
        out
    }

    pub fn cost_subgradient_into(&self, agent: usize, t: f64, x: &[f64], out: &mut [f64]) {
        self.check_time(t);
        self.env.cost_subgradient(agent, t, x, out);
    }

    pub fn cost_subgradient(&self, agent: usize, t: f64, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.action_dim];
        self.cost_subgradient_into(agent, t, x, &mut out);
        out
    }

    pub fn constraint_subgradient_into(
        &self,
        agent: usize,
        t: f64,
        x: &[f64],
        k: usize,
        out: &mut [f64],
    ) {
        self.check_time(t);
        assert!(k < self.constraint_counts[agent], "constraint index out of range");
        self.env.constraint_subgradient(agent, t, x, k, out);
    }

    pub fn constraint_subgradient(&self, agent: usize, t: f64, x: &[f64], k: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.action_dim];
        self.constraint_subgradient_into(agent, t, x, k, &mut out);
        out
    }

    /// Worst constraint value of the feasible witness over a sampled time
    /// grid; `None` when no witness is declared.
    pub fn witness_worst_violation(&self, time_samples: &[f64]) -> Option<f64> {
        let w = self.feasible_witness.as_ref()?;
        let mut worst = f64::NEG_INFINITY;
        for &t in time_samples {
            for i in 0..self.agent_count {
                for v in self.eval_constraints(i, t, w) {
                    worst = worst.max(v);
                }
            }
        }
        Some(worst)
    }
}

/// Numerically stable log(1 + exp(-y * <x, z>)).
pub fn logistic_loss(label: f64, features: &[f64], classifier: &[f64]) -> f64 {
    assert_eq!(
        features.len(),
        classifier.len(),
        "feature/classifier dimension mismatch"
    );
    let margin = label * dot(classifier, features);
    softplus(-margin)
}

/// log(1 + exp(a)) without overflow.
pub fn softplus(a: f64) -> f64 {
    a.max(0.0) + (-a.abs()).exp().ln_1p()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}
