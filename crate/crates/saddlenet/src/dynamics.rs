//! Projected primal descent / dual ascent vector fields and the synchronous
//! Euler stepper. All fields for one step are evaluated at the old state;
//! the primal update is projected onto the action set and the multiplier
//! updates onto the positive orthant.

use rayon::prelude::*;
use thiserror::Error;

use crate::graph::Graph;
use crate::metrics::{Accumulator, TrajectoryLog};
use crate::problem::ProblemSpec;

#[derive(Debug, Error)]
pub enum DynamicsError {
    #[error("horizon exceeded: t = {t} + h = {h} past T = {horizon}")]
    HorizonExceeded { t: f64, h: f64, horizon: f64 },
    #[error("non-finite state component at step {step_index} (t = {t})")]
    NonFinite { step_index: usize, t: f64 },
}

/// Full primal-dual state at one instant. `mu[i][k]` is the multiplier agent
/// i owns for the proximity constraint with its k-th neighbor; `mu[i][k]`
/// and the one the neighbor owns for the same edge are distinct variables.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemState {
    pub t: f64,
    pub x: Vec<Vec<f64>>,
    pub lambda: Vec<Vec<f64>>,
    pub mu: Vec<Vec<f64>>,
}

impl SystemState {
    pub fn zeros(problem: &ProblemSpec, graph: &Graph) -> Self {
        let n = problem.agent_count;
        SystemState {
            t: 0.0,
            x: vec![vec![0.0; problem.action_dim]; n],
            lambda: (0..n).map(|i| vec![0.0; problem.constraint_counts[i]]).collect(),
            mu: (0..n).map(|i| vec![0.0; graph.degree(i)]).collect(),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.x.iter().flatten().all(|v| v.is_finite())
            && self.lambda.iter().flatten().all(|v| v.is_finite())
            && self.mu.iter().flatten().all(|v| v.is_finite())
    }

    pub fn max_multiplier(&self) -> f64 {
        self.lambda
            .iter()
            .flatten()
            .chain(self.mu.iter().flatten())
            .fold(0.0f64, |m, &v| m.max(v.abs()))
    }

    pub fn multipliers_zero(&self) -> bool {
        self.lambda.iter().flatten().all(|&v| v == 0.0)
            && self.mu.iter().flatten().all(|&v| v == 0.0)
    }
}

/// Read-only view the per-agent fields are computed against. The engine
/// passes the concrete state; tests pass auditing doubles to check that
/// agent i touches only one-hop information.
pub trait StateView {
    fn time(&self) -> f64;
    fn action(&self, i: usize) -> &[f64];
    fn lambda(&self, i: usize) -> &[f64];
    fn mu(&self, i: usize, slot: usize) -> f64;
}

impl StateView for SystemState {
    fn time(&self) -> f64 {
        self.t
    }
    fn action(&self, i: usize) -> &[f64] {
        &self.x[i]
    }
    fn lambda(&self, i: usize) -> &[f64] {
        &self.lambda[i]
    }
    fn mu(&self, i: usize, slot: usize) -> f64 {
        self.mu[i][slot]
    }
}

#[derive(Debug, Clone)]
pub struct EngineConfig {
    /// Controller gain multiplying every vector field.
    pub epsilon: f64,
    /// Euler step h.
    pub step: f64,
    pub horizon: f64,
    /// Sampling stride for the trajectory log (in steps).
    pub record_every: usize,
    pub initial_state: Option<SystemState>,
    /// Worker threads for the per-agent field evaluations. Results are
    /// bit-identical for any worker count.
    pub workers: usize,
    /// When true (default) the primal field uses the full-Lagrangian partial
    /// with the (mu_ij + mu_ji) coupling; false keeps only the agent's own
    /// mu terms from its local Lagrangian.
    pub full_primal_coupling: bool,
    /// Saturation threshold for the saturated-fit accumulator.
    pub saturation_delta: f64,
}

impl EngineConfig {
    pub fn new(epsilon: f64, step: f64, horizon: f64) -> Self {
        assert!(epsilon > 0.0, "epsilon must be positive");
        assert!(step > 0.0, "step must be positive");
        assert!(horizon >= 0.0, "horizon must be nonnegative");
        EngineConfig {
            epsilon,
            step,
            horizon,
            record_every: 1,
            initial_state: None,
            workers: 1,
            full_primal_coupling: true,
            saturation_delta: 0.001,
        }
    }

    pub fn num_steps(&self) -> usize {
        (self.horizon / self.step).round() as usize
    }
}

/// g_ij(x_i, x_j) = ||x_i - x_j||^2 - gamma.
pub fn proximity_constraint(x_i: &[f64], x_j: &[f64], gamma: f64) -> f64 {
    assert_eq!(x_i.len(), x_j.len(), "dimension mismatch");
    let d2: f64 = x_i.iter().zip(x_j).map(|(a, b)| (a - b) * (a - b)).sum();
    d2 - gamma
}

/// f0i(t, x_i) + lambda_i' f_i(t, x_i) + sum_j mu_ij (||x_i - x_j||^2 - gamma).
pub fn local_lagrangian(
    state: &dyn StateView,
    problem: &ProblemSpec,
    graph: &Graph,
    i: usize,
) -> f64 {
    let t = state.time();
    let x_i = state.action(i);
    let mut value = problem.eval_cost(i, t, x_i);
    let constraints = problem.eval_constraints(i, t, x_i);
    for (l, f) in state.lambda(i).iter().zip(&constraints) {
        value += l * f;
    }
    for (slot, &j) in graph.neighbors(i).iter().enumerate() {
        value += state.mu(i, slot) * proximity_constraint(x_i, state.action(j), problem.gamma);
    }
    value
}

/// The full Lagrangian assembled over all agents; the sum of the local
/// Lagrangians.
pub fn full_lagrangian(
    problem: &ProblemSpec,
    graph: &Graph,
    t: f64,
    x: &[Vec<f64>],
    lambda: &[Vec<f64>],
    mu: &[Vec<f64>],
) -> f64 {
    let mut value = 0.0;
    for i in 0..problem.agent_count {
        value += problem.eval_cost(i, t, &x[i]);
        let constraints = problem.eval_constraints(i, t, &x[i]);
        for (l, f) in lambda[i].iter().zip(&constraints) {
            value += l * f;
        }
        for (slot, &j) in graph.neighbors(i).iter().enumerate() {
            value += mu[i][slot] * proximity_constraint(&x[i], &x[j], problem.gamma);
        }
    }
    value
}

/// -epsilon times the subgradient of the Lagrangian with respect to x_i.
/// With full coupling the consensus term carries 2(mu_ij + mu_ji)(x_i - x_j),
/// since x_i appears in both its own and its neighbors' proximity terms.
pub fn primal_field(
    state: &dyn StateView,
    problem: &ProblemSpec,
    graph: &Graph,
    i: usize,
    epsilon: f64,
    full_coupling: bool,
    out: &mut [f64],
) {
    let t = state.time();
    let x_i = state.action(i);
    problem.cost_subgradient_into(i, t, x_i, out);
    let lambda_i = state.lambda(i);
    let mut grad = vec![0.0; out.len()];
    for (k, &l) in lambda_i.iter().enumerate() {
        if l != 0.0 {
            problem.constraint_subgradient_into(i, t, x_i, k, &mut grad);
            for (o, gk) in out.iter_mut().zip(&grad) {
                *o += l * gk;
            }
        }
    }
    for (slot, &j) in graph.neighbors(i).iter().enumerate() {
        let mut coeff = state.mu(i, slot);
        if full_coupling {
            coeff += state.mu(j, graph.reverse_slot(i, slot));
        }
        if coeff != 0.0 {
            let x_j = state.action(j);
            for ((o, &a), &b) in out.iter_mut().zip(x_i).zip(x_j) {
                *o += 2.0 * coeff * (a - b);
            }
        }
    }
    for o in out.iter_mut() {
        *o *= -epsilon;
    }
}

/// Pre-projection multiplier rates: lambda_dot = eps * f_i(t, x_i),
/// mu_dot_ij = eps * (||x_i - x_j||^2 - gamma).
pub fn dual_fields(
    state: &dyn StateView,
    problem: &ProblemSpec,
    graph: &Graph,
    i: usize,
    epsilon: f64,
    lambda_rate: &mut [f64],
    mu_rates: &mut [f64],
) {
    let t = state.time();
    let x_i = state.action(i);
    problem.eval_constraints_into(i, t, x_i, lambda_rate);
    for r in lambda_rate.iter_mut() {
        *r *= epsilon;
    }
    for (slot, &j) in graph.neighbors(i).iter().enumerate() {
        mu_rates[slot] = epsilon * proximity_constraint(x_i, state.action(j), problem.gamma);
    }
}

struct AgentUpdate {
    x: Vec<f64>,
    lambda: Vec<f64>,
    mu: Vec<f64>,
}

fn agent_step(
    state: &SystemState,
    problem: &ProblemSpec,
    graph: &Graph,
    cfg: &EngineConfig,
    i: usize,
) -> AgentUpdate {
    let h = cfg.step;
    let mut field = vec![0.0; problem.action_dim];
    primal_field(state, problem, graph, i, cfg.epsilon, cfg.full_primal_coupling, &mut field);
    let mut x = state.x[i].clone();
    for (v, f) in x.iter_mut().zip(&field) {
        *v += h * f;
    }
    problem.action_set.project_in_place(&mut x);

    let mut lambda_rate = vec![0.0; problem.constraint_counts[i]];
    let mut mu_rates = vec![0.0; graph.degree(i)];
    dual_fields(state, problem, graph, i, cfg.epsilon, &mut lambda_rate, &mut mu_rates);
    let lambda = state.lambda[i]
        .iter()
        .zip(&lambda_rate)
        .map(|(l, r)| (l + h * r).max(0.0))
        .collect();
    let mu = state.mu[i]
        .iter()
        .zip(&mu_rates)
        .map(|(m, r)| (m + h * r).max(0.0))
        .collect();
    AgentUpdate { x, lambda, mu }
}

/// One synchronous projected Euler step; every field is evaluated at the
/// old state. Deterministic for any worker count.
pub fn step(
    state: &SystemState,
    problem: &ProblemSpec,
    graph: &Graph,
    cfg: &EngineConfig,
) -> Result<SystemState, DynamicsError> {
    if state.t + cfg.step > cfg.horizon + cfg.step / 2.0 {
        return Err(DynamicsError::HorizonExceeded {
            t: state.t,
            h: cfg.step,
            horizon: cfg.horizon,
        });
    }
    let n = problem.agent_count;
    let updates: Vec<AgentUpdate> = if cfg.workers > 1 {
        (0..n)
            .into_par_iter()
            .map(|i| agent_step(state, problem, graph, cfg, i))
            .collect()
    } else {
        (0..n).map(|i| agent_step(state, problem, graph, cfg, i)).collect()
    };
    let mut next = SystemState {
        t: state.t + cfg.step,
        x: Vec::with_capacity(n),
        lambda: Vec::with_capacity(n),
        mu: Vec::with_capacity(n),
    };
    for u in updates {
        next.x.push(u.x);
        next.lambda.push(u.lambda);
        next.mu.push(u.mu);
    }
    Ok(next)
}

/// Iterate over [0, T], feeding every metric accumulator each step with
/// left-endpoint quadrature, and record sampled states.
pub fn run(
    problem: &ProblemSpec,
    graph: &Graph,
    cfg: &EngineConfig,
) -> Result<TrajectoryLog, DynamicsError> {
    assert_eq!(problem.agent_count, graph.node_count());
    let mut state = cfg
        .initial_state
        .clone()
        .unwrap_or_else(|| SystemState::zeros(problem, graph));
    state.t = 0.0;
    let mut acc = Accumulator::new(problem, graph, cfg.step, cfg.saturation_delta);
    let mut log = TrajectoryLog::new(problem, graph, cfg);
    let num_steps = cfg.num_steps();
    let stride = cfg.record_every.max(1);

    let pool = (cfg.workers > 1).then(|| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.workers)
            .build()
            .expect("thread pool")
    });

    for k in 0..num_steps {
        if k % stride == 0 {
            log.record(&state, &acc);
        }
        acc.observe(problem, graph, &state);
        let next = match &pool {
            Some(pool) => pool.install(|| step(&state, problem, graph, cfg))?,
            None => step(&state, problem, graph, cfg)?,
        };
        if !next.is_finite() {
            return Err(DynamicsError::NonFinite { step_index: k, t: next.t });
        }
        state = next;
        // keep t on the exact grid to avoid drift over long horizons
        state.t = (k + 1) as f64 * cfg.step;
    }
    log.record(&state, &acc);
    Ok(log)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::scenarios::{make_scenario, ScenarioSection};
    use approx::assert_relative_eq;
    use std::sync::Arc;

    fn quadratic(agents: usize, horizon: f64) -> (ProblemSpec, Graph) {
        let section = ScenarioSection {
            name: "quadratic_tracking".into(),
            ..Default::default()
        };
        let g = if agents == 1 {
            Graph::build(1, &[]).unwrap()
        } else {
            Graph::cycle(agents).unwrap()
        };
        let sc = make_scenario(&section, agents, horizon, 0.1, 0).unwrap();
        (sc.problem, g)
    }

    struct SingleQuadratic;
    impl crate::problem::Environment for SingleQuadratic {
        fn cost(&self, _a: usize, _t: f64, x: &[f64]) -> f64 {
            0.5 * x.iter().map(|v| v * v).sum::<f64>()
        }
        fn constraints(&self, _a: usize, _t: f64, _x: &[f64], _out: &mut [f64]) {}
        fn cost_subgradient(&self, _a: usize, _t: f64, x: &[f64], out: &mut [f64]) {
            out.copy_from_slice(x);
        }
        fn constraint_subgradient(&self, _a: usize, _t: f64, _x: &[f64], _k: usize, _out: &mut [f64]) {}
    }

    fn single_agent_quadratic(horizon: f64) -> (ProblemSpec, Graph) {
        let p = ProblemSpec::new(
            1,
            1,
            vec![0],
            crate::problem::ActionSet::symmetric_box(1, 10.0),
            1.0,
            10.0,
            1.0,
            1.0,
            Some(vec![0.0]),
            horizon,
            None,
            Arc::new(SingleQuadratic),
        );
        (p, Graph::build(1, &[]).unwrap())
    }

    #[test]
    fn proximity_constraint_hand_values() {
        assert_relative_eq!(proximity_constraint(&[1.0, 2.0], &[1.0, 2.0], 10.0), -10.0);
        assert_relative_eq!(proximity_constraint(&[1.0, 0.0], &[0.0, 0.0], 10.0), -9.0);
        assert_relative_eq!(proximity_constraint(&[4.0, 0.0], &[0.0, 0.0], 10.0), 6.0);
    }

    #[test]
    fn local_lagrangian_reduces_to_cost_with_zero_multipliers() {
        let (p, g) = quadratic(4, 1.0);
        let mut state = SystemState::zeros(&p, &g);
        state.x[0] = vec![0.7, -0.3];
        assert_relative_eq!(
            local_lagrangian(&state, &p, &g, 0),
            p.eval_cost(0, 0.0, &state.x[0])
        );
    }

    #[test]
    fn local_lagrangians_sum_to_full_lagrangian() {
        let (p, g) = quadratic(4, 1.0);
        let mut state = SystemState::zeros(&p, &g);
        // pseudo-random but fixed state
        for i in 0..4 {
            state.x[i] = vec![0.3 * i as f64 - 0.4, 0.1 * i as f64];
            state.lambda[i] = vec![0.2 + 0.1 * i as f64];
            for s in 0..g.degree(i) {
                state.mu[i][s] = 0.05 * (i + s) as f64;
            }
        }
        let sum: f64 = (0..4).map(|i| local_lagrangian(&state, &p, &g, i)).sum();
        let full = full_lagrangian(&p, &g, state.t, &state.x, &state.lambda, &state.mu);
        assert_relative_eq!(sum, full, epsilon = 1e-12);
    }

    #[test]
    fn primal_field_linear_for_quadratic_cost() {
        let (p, g) = single_agent_quadratic(1.0);
        let mut state = SystemState::zeros(&p, &g);
        state.x[0] = vec![1.0];
        let mut f = vec![0.0];
        primal_field(&state, &p, &g, 0, 1.0, true, &mut f);
        assert_relative_eq!(f[0], -1.0);
    }

    #[test]
    fn primal_field_consensus_term_hand_expansion() {
        // two agents joined by an edge, zero cost/constraints
        struct ZeroEnv;
        impl crate::problem::Environment for ZeroEnv {
            fn cost(&self, _a: usize, _t: f64, _x: &[f64]) -> f64 {
                0.0
            }
            fn constraints(&self, _a: usize, _t: f64, _x: &[f64], _out: &mut [f64]) {}
            fn cost_subgradient(&self, _a: usize, _t: f64, _x: &[f64], out: &mut [f64]) {
                out.fill(0.0);
            }
            fn constraint_subgradient(&self, _a: usize, _t: f64, _x: &[f64], _k: usize, _o: &mut [f64]) {}
        }
        let g = Graph::build(2, &[(0, 1)]).unwrap();
        let p = ProblemSpec::new(
            2,
            2,
            vec![0, 0],
            crate::problem::ActionSet::symmetric_box(2, 10.0),
            1.0,
            1.0,
            1.0,
            1.0,
            None,
            1.0,
            None,
            Arc::new(ZeroEnv),
        );
        let mut state = SystemState::zeros(&p, &g);
        state.x[0] = vec![1.0, 0.0];
        state.mu[0][0] = 0.5;
        state.mu[1][0] = 0.5;
        let mut f = vec![0.0; 2];
        primal_field(&state, &p, &g, 0, 1.0, true, &mut f);
        assert_relative_eq!(f[0], -2.0);
        assert_relative_eq!(f[1], 0.0);
    }

    #[test]
    fn dual_field_scaling() {
        let (p, g) = quadratic(2, 1.0);
        let mut state = SystemState::zeros(&p, &g);
        state.x[0] = vec![0.0, 0.0]; // constraint x_0 - 1 = -1
        let mut lr = vec![0.0];
        let mut mr = vec![0.0; g.degree(0)];
        dual_fields(&state, &p, &g, 0, 2.0, &mut lr, &mut mr);
        assert_relative_eq!(lr[0], -2.0);
        // consensus satisfied with slack: g_01 = -gamma = -1, scaled by epsilon
        assert_relative_eq!(mr[0], -2.0);
    }

    #[test]
    fn euler_step_hand_value() {
        let (p, g) = single_agent_quadratic(1.0);
        let mut cfg = EngineConfig::new(1.0, 0.1, 1.0);
        cfg.saturation_delta = 0.001;
        let mut state = SystemState::zeros(&p, &g);
        state.x[0] = vec![1.0];
        let next = step(&state, &p, &g, &cfg).unwrap();
        assert_relative_eq!(next.x[0][0], 0.9);
        assert_relative_eq!(next.t, 0.1);
    }

    #[test]
    fn lambda_stays_at_zero_on_satisfied_constraint() {
        let (p, g) = quadratic(2, 1.0);
        let cfg = EngineConfig::new(1.0, 0.1, 1.0);
        let state = SystemState::zeros(&p, &g); // constraint -1 < 0, lambda 0
        let next = step(&state, &p, &g, &cfg).unwrap();
        assert_eq!(next.lambda[0][0], 0.0);
    }

    #[test]
    fn clamped_coordinates_stay_on_box_boundary() {
        let (p, g) = single_agent_quadratic(1.0);
        let cfg = EngineConfig::new(1.0, 0.1, 1.0);
        let mut state = SystemState::zeros(&p, &g);
        state.x[0] = vec![-10.0]; // at the lower bound with outward field? field = +10 inward here
        let next = step(&state, &p, &g, &cfg).unwrap();
        assert!(next.x[0][0] >= -10.0);

        // outward field: target at origin pulls inward, so force outward via multiplier-free
        // descent from the boundary of the opposite side
        state.x[0] = vec![10.0];
        let next = step(&state, &p, &g, &cfg).unwrap();
        assert!(next.x[0][0] <= 10.0);
    }

    #[test]
    fn horizon_exceeded_is_an_error() {
        let (p, g) = single_agent_quadratic(0.1);
        let cfg = EngineConfig::new(1.0, 0.1, 0.1);
        let state = SystemState::zeros(&p, &g);
        let next = step(&state, &p, &g, &cfg).unwrap();
        assert!(matches!(
            step(&next, &p, &g, &cfg),
            Err(DynamicsError::HorizonExceeded { .. })
        ));
    }

    #[test]
    fn zero_horizon_run_logs_initial_state_only() {
        let (p, g) = quadratic(2, 0.0);
        let cfg = EngineConfig::new(1.0, 0.1, 0.0);
        let log = run(&p, &g, &cfg).unwrap();
        assert_eq!(log.samples().len(), 1);
        let cum = &log.samples()[0].cum;
        assert!(cum.cost.iter().all(|&v| v == 0.0));
        assert!(cum.disagreement.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn multipliers_nonnegative_and_actions_feasible_along_run() {
        let (p, g) = quadratic(4, 5.0);
        let mut cfg = EngineConfig::new(1.0, 0.05, 5.0);
        cfg.record_every = 5;
        let log = run(&p, &g, &cfg).unwrap();
        for s in log.samples() {
            assert!(s.state.lambda.iter().flatten().all(|&v| v >= 0.0));
            assert!(s.state.mu.iter().flatten().all(|&v| v >= 0.0));
            for x in &s.state.x {
                assert!(p.action_set.contains(x, 1e-12));
            }
        }
    }

    #[test]
    fn halving_step_converges_first_order() {
        let section = ScenarioSection {
            name: "quadratic_tracking".into(),
            ..Default::default()
        };
        let g = Graph::cycle(4).unwrap();
        let sc = make_scenario(&section, 4, 2.0, 0.1, 0).unwrap();
        let run_with = |h: f64| {
            let cfg = EngineConfig::new(1.0, h, 2.0);
            run(&sc.problem, &g, &cfg).unwrap()
        };
        let coarse = run_with(0.02);
        let mid = run_with(0.01);
        let fine = run_with(0.005);
        let final_x = |log: &TrajectoryLog| log.samples().last().unwrap().state.x.clone();
        let dist = |a: &Vec<Vec<f64>>, b: &Vec<Vec<f64>>| -> f64 {
            a.iter()
                .flatten()
                .zip(b.iter().flatten())
                .map(|(p, q)| (p - q) * (p - q))
                .sum::<f64>()
                .sqrt()
        };
        let e1 = dist(&final_x(&coarse), &final_x(&fine));
        let e2 = dist(&final_x(&mid), &final_x(&fine));
        // Richardson-style: halving h should roughly halve the error
        assert!(e2 <= 0.75 * e1 + 1e-12, "e1 = {e1}, e2 = {e2}");
    }

    #[test]
    fn workers_do_not_change_results() {
        let (p, g) = quadratic(4, 2.0);
        let mut cfg = EngineConfig::new(1.0, 0.02, 2.0);
        let log1 = run(&p, &g, &cfg).unwrap();
        cfg.workers = 8;
        let log8 = run(&p, &g, &cfg).unwrap();
        let a = &log1.samples().last().unwrap().state;
        let b = &log8.samples().last().unwrap().state;
        assert_eq!(a, b);
    }
}
