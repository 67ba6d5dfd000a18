//! Regret, fit, saturated fit, disagreement and energy as running integrals
//! over a trajectory, plus the closed-form bound values they are reported
//! against. Quadrature is locked to the engine's left-rectangle rule.

use thiserror::Error;

use crate::dynamics::{full_lagrangian, EngineConfig, SystemState};
use crate::graph::Graph;
use crate::problem::ProblemSpec;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("trajectory log is empty")]
    EmptyLog,
    #[error("saturation threshold must be positive, got {0}")]
    NonPositiveDelta(f64),
    #[error("bound hypothesis violated: initial multipliers are nonzero")]
    BoundHypothesisViolated,
    #[error("inadmissible reference: {0}")]
    InadmissibleReference(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
}

/// Running integrals at one instant; all use left-endpoint rectangles of
/// width h, matching the Euler stepping exactly.
#[derive(Debug, Clone)]
pub struct Cumulative {
    /// fit[i][j][k] = integral of the k-th constraint of agent j along the
    /// trajectory of agent i.
    pub fit: Vec<Vec<Vec<f64>>>,
    /// Same with the integrand floored at -delta.
    pub sat_fit: Vec<Vec<Vec<f64>>>,
    /// cost[i] = integral of the sum cost f0(t, x_i(t)).
    pub cost: Vec<f64>,
    /// Upper-triangle pairwise integral of ||x_i - x_j||.
    pub disagreement: Vec<f64>,
    pub max_multiplier: f64,
}

impl Cumulative {
    fn zeros(problem: &ProblemSpec) -> Self {
        let n = problem.agent_count;
        let fit: Vec<Vec<Vec<f64>>> = (0..n)
            .map(|_| (0..n).map(|j| vec![0.0; problem.constraint_counts[j]]).collect())
            .collect();
        Cumulative {
            sat_fit: fit.clone(),
            fit,
            cost: vec![0.0; n],
            disagreement: vec![0.0; n * (n - 1) / 2],
            max_multiplier: 0.0,
        }
    }
}

pub fn pair_index(i: usize, j: usize, n: usize) -> usize {
    assert!(i != j && i < n && j < n);
    let (a, b) = (i.min(j), i.max(j));
    a * n - a * (a + 1) / 2 + (b - a - 1)
}

/// Single-writer accumulator owned by the run loop.
pub struct Accumulator {
    step: f64,
    delta: f64,
    cum: Cumulative,
    scratch: Vec<f64>,
}

impl Accumulator {
    pub fn new(problem: &ProblemSpec, _graph: &Graph, step: f64, delta: f64) -> Self {
        assert!(delta > 0.0, "saturation delta must be positive");
        let max_m = problem.constraint_counts.iter().copied().max().unwrap_or(0);
        Accumulator {
            step,
            delta,
            cum: Cumulative::zeros(problem),
            scratch: vec![0.0; max_m],
        }
    }

    /// Add one left-endpoint rectangle evaluated at `state`.
    pub fn observe(&mut self, problem: &ProblemSpec, _graph: &Graph, state: &SystemState) {
        let n = problem.agent_count;
        let h = self.step;
        let t = state.t;
        for i in 0..n {
            let x_i = &state.x[i];
            for j in 0..n {
                let m = problem.constraint_counts[j];
                let f = &mut self.scratch[..m];
                problem.eval_constraints_into(j, t, x_i, f);
                for (k, &v) in f.iter().enumerate() {
                    self.cum.fit[i][j][k] += h * v;
                    self.cum.sat_fit[i][j][k] += h * v.max(-self.delta);
                }
                self.cum.cost[i] += h * problem.eval_cost(j, t, x_i);
            }
            for j in i + 1..n {
                let d: f64 = x_i
                    .iter()
                    .zip(&state.x[j])
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum::<f64>()
                    .sqrt();
                self.cum.disagreement[pair_index(i, j, n)] += h * d;
            }
        }
        self.cum.max_multiplier = self.cum.max_multiplier.max(state.max_multiplier());
    }

    pub fn snapshot(&self) -> Cumulative {
        self.cum.clone()
    }
}

#[derive(Debug, Clone)]
pub struct LogSample {
    pub t: f64,
    pub state: SystemState,
    pub cum: Cumulative,
}

#[derive(Debug, Clone)]
pub struct TrajectoryLog {
    pub step: f64,
    pub horizon: f64,
    pub record_every: usize,
    pub epsilon: f64,
    pub delta: f64,
    pub agent_count: usize,
    samples: Vec<LogSample>,
}

impl TrajectoryLog {
    pub fn new(problem: &ProblemSpec, _graph: &Graph, cfg: &EngineConfig) -> Self {
        TrajectoryLog {
            step: cfg.step,
            horizon: cfg.horizon,
            record_every: cfg.record_every.max(1),
            epsilon: cfg.epsilon,
            delta: cfg.saturation_delta,
            agent_count: problem.agent_count,
            samples: Vec::new(),
        }
    }

    pub fn record(&mut self, state: &SystemState, acc: &Accumulator) {
        self.samples.push(LogSample {
            t: state.t,
            state: state.clone(),
            cum: acc.snapshot(),
        });
    }

    pub fn samples(&self) -> &[LogSample] {
        &self.samples
    }

    pub fn initial_state(&self) -> &SystemState {
        &self.samples[0].state
    }

    pub fn final_sample(&self) -> &LogSample {
        self.samples.last().expect("non-empty log")
    }

    /// Latest recorded sample at or before time t.
    pub fn sample_at(&self, t: f64) -> &LogSample {
        let idx = self.samples.partition_point(|s| s.t <= t + 1e-9);
        &self.samples[idx.saturating_sub(1)]
    }

    /// Def.-1 fit: integral of agent j's constraints along agent i's
    /// trajectory, per component.
    pub fn fit(&self, i: usize, j: usize) -> &[f64] {
        &self.final_sample().cum.fit[i][j]
    }

    /// Fit with the integrand floored at -delta. The run's own delta is
    /// returned from the exact accumulators; any other delta is recomputed
    /// from the recorded samples (exact when record_every = 1).
    pub fn saturated_fit(
        &self,
        problem: &ProblemSpec,
        i: usize,
        j: usize,
        delta: f64,
    ) -> Result<Vec<f64>, MetricsError> {
        if delta <= 0.0 {
            return Err(MetricsError::NonPositiveDelta(delta));
        }
        if (delta - self.delta).abs() <= 1e-15 {
            return Ok(self.final_sample().cum.sat_fit[i][j].clone());
        }
        let mut out = vec![0.0; problem.constraint_counts[j]];
        for w in self.samples.windows(2) {
            let width = w[1].t - w[0].t;
            let f = problem.eval_constraints(j, w[0].t, &w[0].state.x[i]);
            for (o, &v) in out.iter_mut().zip(&f) {
                *o += width * v.max(-delta);
            }
        }
        Ok(out)
    }

    /// Variant of the fit subtracting the x* term (always <= the Def.-1 form
    /// when x* is feasible).
    pub fn fit_relative(&self, problem: &ProblemSpec, i: usize, j: usize, xstar: &[f64]) -> Vec<f64> {
        let mut out = self.fit(i, j).to_vec();
        let reference = self.integrate_on_grid(|t| problem.eval_constraints(j, t, xstar));
        for (o, r) in out.iter_mut().zip(&reference) {
            *o -= r;
        }
        out
    }

    /// Sum regret of agent i against the clairvoyant action x*.
    pub fn regret(&self, problem: &ProblemSpec, i: usize, xstar: &[f64]) -> Result<f64, MetricsError> {
        if self.samples.is_empty() {
            return Err(MetricsError::EmptyLog);
        }
        if xstar.len() != problem.action_dim {
            return Err(MetricsError::DimensionMismatch(format!(
                "xstar has dimension {}, expected {}",
                xstar.len(),
                problem.action_dim
            )));
        }
        let reference = self.integrate_on_grid(|t| vec![problem.sum_cost(t, xstar)]);
        Ok(self.final_sample().cum.cost[i] - reference[0])
    }

    /// Running regret at a recorded sample index.
    pub fn regret_at(&self, problem: &ProblemSpec, i: usize, xstar: &[f64], sample_idx: usize) -> f64 {
        let s = &self.samples[sample_idx];
        let steps = (s.t / self.step).round() as usize;
        let mut reference = 0.0;
        for k in 0..steps {
            reference += self.step * problem.sum_cost(k as f64 * self.step, xstar);
        }
        s.cum.cost[i] - reference
    }

    pub fn disagreement(&self, i: usize, j: usize) -> f64 {
        if i == j {
            return 0.0;
        }
        self.final_sample().cum.disagreement[pair_index(i, j, self.agent_count)]
    }

    fn integrate_on_grid<F: Fn(f64) -> Vec<f64>>(&self, f: F) -> Vec<f64> {
        let steps = (self.final_sample().t / self.step).round() as usize;
        let mut acc = f(0.0);
        for v in acc.iter_mut() {
            *v = 0.0;
        }
        for k in 0..steps {
            let vals = f(k as f64 * self.step);
            for (a, v) in acc.iter_mut().zip(&vals) {
                *a += self.step * v;
            }
        }
        acc
    }
}

/// Energy function: half the squared distance of the full primal-dual state
/// to a reference triple.
pub fn energy(
    state: &SystemState,
    ref_x: &[Vec<f64>],
    ref_lambda: &[Vec<f64>],
    ref_mu: &[Vec<f64>],
) -> f64 {
    assert_eq!(state.x.len(), ref_x.len(), "dimension mismatch");
    assert_eq!(state.lambda.len(), ref_lambda.len(), "dimension mismatch");
    assert_eq!(state.mu.len(), ref_mu.len(), "dimension mismatch");
    let sq = |a: &[Vec<f64>], b: &[Vec<f64>]| -> f64 {
        a.iter()
            .flatten()
            .zip(b.iter().flatten())
            .map(|(p, q)| (p - q) * (p - q))
            .sum()
    };
    0.5 * (sq(&state.x, ref_x) + sq(&state.lambda, ref_lambda) + sq(&state.mu, ref_mu))
}

fn stacked_initial_distance_sq(initial: &SystemState, xstar: &[f64]) -> f64 {
    initial
        .x
        .iter()
        .map(|xi| {
            xi.iter()
                .zip(xstar)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
        })
        .sum()
}

/// Closed-form disagreement bound D sqrt((K + gamma) T + (1 + ||x* - x(0)||^2) / (2 eps)),
/// valid under zero initial multipliers.
pub fn disagreement_bound(
    problem: &ProblemSpec,
    graph: &Graph,
    epsilon: f64,
    horizon: f64,
    xstar: &[f64],
    initial: &SystemState,
) -> Result<f64, MetricsError> {
    if !initial.multipliers_zero() {
        return Err(MetricsError::BoundHypothesisViolated);
    }
    let d = graph.diameter() as f64;
    let inner = (problem.cost_floor_gap + problem.gamma) * horizon
        + (1.0 + stacked_initial_distance_sq(initial, xstar)) / (2.0 * epsilon);
    Ok(d * inner.max(0.0).sqrt())
}

/// Regret bound as printed: (1 + ||x* - x(0)||^2)/eps
/// + (N-1) L0 D sqrt((K + gamma) T + (1 + ||x* - x(0)||^2)/(2 eps)).
pub fn regret_bound(
    problem: &ProblemSpec,
    graph: &Graph,
    epsilon: f64,
    horizon: f64,
    xstar: &[f64],
    initial: &SystemState,
) -> Result<f64, MetricsError> {
    let disagreement = disagreement_bound(problem, graph, epsilon, horizon, xstar, initial)?;
    let dist_sq = stacked_initial_distance_sq(initial, xstar);
    Ok((1.0 + dist_sq) / epsilon
        + (problem.agent_count as f64 - 1.0) * problem.lipschitz_cost * disagreement)
}

/// Integral of the Lagrangian difference against admissible references,
/// minus V(0)/eps. Nonpositive in continuous time; carries an O(h T)
/// discretization term here. Exact quadrature needs record_every = 1.
pub fn lemma1_gap(
    log: &TrajectoryLog,
    problem: &ProblemSpec,
    graph: &Graph,
    ref_x: &[Vec<f64>],
    ref_lambda: &[Vec<f64>],
    ref_mu: &[Vec<f64>],
) -> Result<f64, MetricsError> {
    if log.samples().is_empty() {
        return Err(MetricsError::EmptyLog);
    }
    let n = problem.agent_count;
    if ref_x.len() != n || ref_lambda.len() != n || ref_mu.len() != n {
        return Err(MetricsError::InadmissibleReference(
            "reference triple has wrong agent count".into(),
        ));
    }
    for i in 0..n {
        if !problem.action_set.contains(&ref_x[i], 1e-9) {
            return Err(MetricsError::InadmissibleReference(format!(
                "reference action of agent {i} outside the action set"
            )));
        }
        if ref_lambda[i].len() != problem.constraint_counts[i]
            || ref_mu[i].len() != graph.degree(i)
        {
            return Err(MetricsError::InadmissibleReference(format!(
                "reference multiplier dimensions wrong for agent {i}"
            )));
        }
        if ref_lambda[i].iter().chain(&ref_mu[i]).any(|&v| v < 0.0) {
            return Err(MetricsError::InadmissibleReference(format!(
                "negative reference multiplier for agent {i}"
            )));
        }
    }
    let v0 = energy(log.initial_state(), ref_x, ref_lambda, ref_mu);
    let mut integral = 0.0;
    for w in log.samples().windows(2) {
        let s = &w[0];
        let width = w[1].t - s.t;
        let along = full_lagrangian(problem, graph, s.t, &s.state.x, ref_lambda, ref_mu);
        let against = full_lagrangian(problem, graph, s.t, ref_x, &s.state.lambda, &s.state.mu);
        integral += width * (along - against);
    }
    Ok(integral - v0 / log.epsilon)
}

/// Everything the bound report prints.
#[derive(Debug, Clone, serde::Serialize)]
pub struct MetricsReport {
    pub horizon: f64,
    pub epsilon: f64,
    pub diameter: usize,
    pub k_constant: f64,
    pub gamma: f64,
    pub lipschitz_cost: f64,
    pub lipschitz_constraint: f64,
    pub regret: Vec<f64>,
    pub regret_bound: f64,
    pub fit_own: Vec<Vec<f64>>,
    pub sat_fit_own: Vec<Vec<f64>>,
    pub disagreement_pairs: Vec<PairDisagreement>,
    pub disagreement_bound: f64,
    pub max_multiplier: f64,
    pub checkpoints: Vec<CheckpointRow>,
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct PairDisagreement {
    pub i: usize,
    pub j: usize,
    pub value: f64,
}

/// Sublinearity diagnostics at a checkpoint: metric values and their
/// ratios against sqrt(t).
#[derive(Debug, Clone, serde::Serialize)]
pub struct CheckpointRow {
    pub t: f64,
    pub max_disagreement: f64,
    pub disagreement_bound: f64,
    pub max_regret: f64,
    pub regret_bound: f64,
    pub max_positive_fit: f64,
    pub disagreement_sqrt_ratio: f64,
    pub regret_sqrt_ratio: f64,
    pub fit_sqrt_ratio: f64,
}

pub fn compute_report(
    log: &TrajectoryLog,
    problem: &ProblemSpec,
    graph: &Graph,
    xstar: &[f64],
    checkpoint_count: usize,
) -> Result<MetricsReport, MetricsError> {
    let n = problem.agent_count;
    let initial = log.initial_state();
    let epsilon = log.epsilon;
    let horizon = log.final_sample().t;

    let regret: Vec<f64> = (0..n)
        .map(|i| log.regret(problem, i, xstar))
        .collect::<Result<_, _>>()?;
    let fit_own: Vec<Vec<f64>> = (0..n).map(|i| log.fit(i, i).to_vec()).collect();
    let sat_fit_own: Vec<Vec<f64>> = (0..n)
        .map(|i| log.saturated_fit(problem, i, i, log.delta))
        .collect::<Result<_, _>>()?;
    let mut disagreement_pairs = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            disagreement_pairs.push(PairDisagreement {
                i,
                j,
                value: log.disagreement(i, j),
            });
        }
    }

    let dis_bound = disagreement_bound(problem, graph, epsilon, horizon, xstar, initial)
        .unwrap_or(f64::NAN);
    let reg_bound = regret_bound(problem, graph, epsilon, horizon, xstar, initial)
        .unwrap_or(f64::NAN);

    let samples = log.samples();
    let stride = (samples.len().saturating_sub(1) / checkpoint_count.max(1)).max(1);
    let mut checkpoints = Vec::new();
    for idx in (stride..samples.len()).step_by(stride) {
        let s = &samples[idx];
        let t = s.t;
        if t <= 0.0 {
            continue;
        }
        let max_dis = s.cum.disagreement.iter().fold(0.0f64, |m, &v| m.max(v));
        let max_reg = (0..n)
            .map(|i| log.regret_at(problem, i, xstar, idx))
            .fold(f64::NEG_INFINITY, f64::max);
        let max_fit = s
            .cum
            .fit
            .iter()
            .flatten()
            .flatten()
            .fold(0.0f64, |m, &v| m.max(v));
        let db = disagreement_bound(problem, graph, epsilon, t, xstar, initial).unwrap_or(f64::NAN);
        let rb = regret_bound(problem, graph, epsilon, t, xstar, initial).unwrap_or(f64::NAN);
        checkpoints.push(CheckpointRow {
            t,
            max_disagreement: max_dis,
            disagreement_bound: db,
            max_regret: max_reg,
            regret_bound: rb,
            max_positive_fit: max_fit,
            disagreement_sqrt_ratio: max_dis / t.sqrt(),
            regret_sqrt_ratio: max_reg / t.sqrt(),
            fit_sqrt_ratio: max_fit / t.sqrt(),
        });
    }

    Ok(MetricsReport {
        horizon,
        epsilon,
        diameter: graph.diameter(),
        k_constant: problem.cost_floor_gap,
        gamma: problem.gamma,
        lipschitz_cost: problem.lipschitz_cost,
        lipschitz_constraint: problem.lipschitz_constraint,
        regret,
        regret_bound: reg_bound,
        fit_own,
        sat_fit_own,
        disagreement_pairs,
        disagreement_bound: dis_bound,
        max_multiplier: log.final_sample().cum.max_multiplier,
        checkpoints,
    })
}

pub use crate::problem::dot as inner_product;

/// Classification error of a classifier over held-out (label, features)
/// pairs, predictions by the sign of the inner product.
pub fn classification_error(classifier: &[f64], holdout: &[(f64, Vec<f64>)]) -> f64 {
    if holdout.is_empty() {
        return 0.0;
    }
    let wrong = holdout
        .iter()
        .filter(|(label, z)| {
            let pred = if inner_product(classifier, z) >= 0.0 { 1.0 } else { -1.0 };
            pred != *label
        })
        .count();
    wrong as f64 / holdout.len() as f64
}
