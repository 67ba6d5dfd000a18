//! Run configuration: one TOML file describes the graph, the scenario, the
//! engine parameters, the benchmark oracle and the output directory.
//! Unknown keys are rejected; every parameter is validated before any
//! computation starts.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dynamics::{EngineConfig, SystemState};
use crate::graph::{Graph, GraphError};
use crate::problem::scenarios::{make_scenario, Scenario, ScenarioError, ScenarioSection};
use crate::problem::{ActionSet, ProblemSpec};
use crate::seeds;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("config parse error: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid field `{field}`: {reason}")]
    Invalid { field: &'static str, reason: String },
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
}

fn invalid(field: &'static str, reason: impl Into<String>) -> ConfigError {
    ConfigError::Invalid { field, reason: reason.into() }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphSection {
    /// "cycle" | "path" | "complete" | "random_geometric" | "explicit"
    pub generator: String,
    pub nodes: usize,
    /// random_geometric only.
    pub radius: Option<f64>,
    /// explicit only.
    pub edges: Option<Vec<(usize, usize)>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EngineSection {
    pub epsilon: f64,
    pub step: f64,
    pub horizon: f64,
    #[serde(default = "default_record_every")]
    pub record_every: usize,
    /// "zeros" | "random_box"
    #[serde(default = "default_initial_state")]
    pub initial_state: String,
    /// random_box draws from the action box shrunk by this factor around
    /// its center; large initial spreads destabilize the explicit Euler
    /// consensus coupling.
    #[serde(default = "default_initial_scale")]
    pub initial_scale: f64,
    #[serde(default = "default_true")]
    pub full_primal_coupling: bool,
    #[serde(default = "default_workers")]
    pub workers: usize,
}

fn default_record_every() -> usize {
    1
}
fn default_initial_state() -> String {
    "zeros".into()
}
fn default_true() -> bool {
    true
}
fn default_initial_scale() -> f64 {
    1.0
}
fn default_workers() -> usize {
    1
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleSection {
    /// "grid" | "subgradient"
    pub method: String,
    #[serde(default = "default_resolution")]
    pub resolution: usize,
    #[serde(default = "default_iterations")]
    pub iterations: usize,
    #[serde(default = "default_step_c")]
    pub step_c: f64,
    /// Time grid for the sampled benchmark integrals; defaults to the engine
    /// step, coarsened so the oracle sees at most 2000 samples.
    pub sample_step: Option<f64>,
}

fn default_resolution() -> usize {
    201
}
fn default_iterations() -> usize {
    5000
}
fn default_step_c() -> f64 {
    1.0
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    pub directory: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub seed: u64,
    pub graph: GraphSection,
    pub scenario: ScenarioSection,
    pub engine: EngineSection,
    pub oracle: OracleSection,
    pub output: OutputSection,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let cfg: RunConfig = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let g = &self.graph;
        if g.nodes == 0 {
            return Err(invalid("nodes", "graph must have at least one node"));
        }
        match g.generator.as_str() {
            "cycle" | "path" | "complete" => {}
            "random_geometric" => {
                let r = g
                    .radius
                    .ok_or_else(|| invalid("radius", "required for random_geometric"))?;
                if r.is_nan() || r <= 0.0 {
                    return Err(invalid("radius", format!("must be positive, got {r}")));
                }
            }
            "explicit" => {
                if g.edges.is_none() {
                    return Err(invalid("edges", "required for explicit graphs"));
                }
            }
            other => {
                return Err(invalid("generator", format!("unknown generator `{other}`")));
            }
        }
        let e = &self.engine;
        if e.epsilon.is_nan() || e.epsilon <= 0.0 {
            return Err(invalid("epsilon", format!("must be positive, got {}", e.epsilon)));
        }
        if e.step.is_nan() || e.step <= 0.0 {
            return Err(invalid("step", format!("must be positive, got {}", e.step)));
        }
        if e.horizon.is_nan() || e.horizon < 0.0 {
            return Err(invalid("horizon", format!("must be nonnegative, got {}", e.horizon)));
        }
        if e.record_every == 0 {
            return Err(invalid("record_every", "must be at least 1"));
        }
        if e.initial_scale.is_nan() || e.initial_scale <= 0.0 || e.initial_scale > 1.0 {
            return Err(invalid(
                "initial_scale",
                format!("must be in (0, 1], got {}", e.initial_scale),
            ));
        }
        match e.initial_state.as_str() {
            "zeros" | "random_box" => {}
            other => {
                return Err(invalid(
                    "initial_state",
                    format!("expected `zeros` or `random_box`, got `{other}`"),
                ));
            }
        }
        let o = &self.oracle;
        match o.method.as_str() {
            "grid" => {
                if o.resolution < 2 {
                    return Err(invalid("resolution", "must be at least 2"));
                }
            }
            "subgradient" => {
                if o.step_c.is_nan() || o.step_c <= 0.0 {
                    return Err(invalid("step_c", format!("must be positive, got {}", o.step_c)));
                }
            }
            other => {
                return Err(invalid(
                    "method",
                    format!("expected `grid` or `subgradient`, got `{other}`"),
                ));
            }
        }
        if let Some(s) = o.sample_step {
            if s.is_nan() || s <= 0.0 {
                return Err(invalid("sample_step", format!("must be positive, got {s}")));
            }
        }
        if self.output.directory.is_empty() {
            return Err(invalid("directory", "output directory must be nonempty"));
        }
        Ok(())
    }

    pub fn build_graph(&self) -> Result<Graph, ConfigError> {
        let g = &self.graph;
        let graph = match g.generator.as_str() {
            "cycle" => Graph::cycle(g.nodes)?,
            "path" => Graph::path(g.nodes)?,
            "complete" => Graph::complete(g.nodes)?,
            "random_geometric" => Graph::random_geometric(
                g.nodes,
                g.radius.unwrap(),
                seeds::derive(self.seed, "topology"),
            )?,
            "explicit" => Graph::build(g.nodes, g.edges.as_deref().unwrap())?,
            _ => unreachable!("validated"),
        };
        Ok(graph)
    }

    pub fn build_scenario(&self) -> Result<Scenario, ConfigError> {
        Ok(make_scenario(
            &self.scenario,
            self.graph.nodes,
            self.engine.horizon,
            self.engine.step,
            self.seed,
        )?)
    }

    pub fn engine_config(
        &self,
        problem: &ProblemSpec,
        graph: &Graph,
        scenario_delta: f64,
        workers_override: Option<usize>,
    ) -> EngineConfig {
        let e = &self.engine;
        let mut cfg = EngineConfig::new(e.epsilon, e.step, e.horizon);
        cfg.record_every = e.record_every;
        cfg.full_primal_coupling = e.full_primal_coupling;
        cfg.workers = workers_override.unwrap_or(e.workers);
        cfg.saturation_delta = scenario_delta;
        cfg.initial_state = Some(self.initial_state(problem, graph));
        cfg
    }

    /// Multipliers always start at zero; actions start at zero or uniform in
    /// the box, drawn from the "initial" seed substream.
    fn initial_state(&self, problem: &ProblemSpec, graph: &Graph) -> SystemState {
        let mut state = SystemState::zeros(problem, graph);
        if self.engine.initial_state == "random_box" {
            let mut rng = ChaCha8Rng::seed_from_u64(seeds::derive(self.seed, "initial"));
            let scale = self.engine.initial_scale;
            for xi in &mut state.x {
                for (d, v) in xi.iter_mut().enumerate() {
                    let (lo, hi) = match &problem.action_set {
                        ActionSet::Box { lower, upper } => (lower[d], upper[d]),
                        ActionSet::Ball { center, radius } => {
                            (center[d] - radius, center[d] + radius)
                        }
                    };
                    let mid = 0.5 * (lo + hi);
                    let half = 0.5 * (hi - lo) * scale;
                    *v = rng.gen_range(mid - half..mid + half);
                }
                problem.action_set.project_in_place(xi);
            }
        }
        state
    }

    /// Oracle time grid: configured value, or the engine step coarsened to
    /// at most 2000 samples.
    pub fn oracle_sample_step(&self) -> f64 {
        self.oracle.sample_step.unwrap_or_else(|| {
            let steps = self.engine.horizon / self.engine.step;
            if steps > 2000.0 {
                self.engine.horizon / 2000.0
            } else {
                self.engine.step
            }
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn minimal(extra_engine: &str) -> String {
        format!(
            r#"
seed = 7

[graph]
generator = "cycle"
nodes = 4

[scenario]
name = "quadratic_tracking"

[engine]
epsilon = 1.0
step = 0.01
horizon = 1.0
{extra_engine}

[oracle]
method = "grid"

[output]
directory = "out"
"#
        )
    }

    #[test]
    fn minimal_config_parses_and_builds() {
        let cfg = RunConfig::parse(&minimal("")).unwrap();
        let graph = cfg.build_graph().unwrap();
        assert_eq!(graph.node_count(), 4);
        let sc = cfg.build_scenario().unwrap();
        let engine = cfg.engine_config(&sc.problem, &graph, sc.delta, None);
        assert_eq!(engine.num_steps(), 100);
        assert!(engine.initial_state.unwrap().multipliers_zero());
    }

    #[test]
    fn negative_epsilon_names_the_field() {
        let text = minimal("").replace("epsilon = 1.0", "epsilon = -1.0");
        let err = RunConfig::parse(&text).unwrap_err();
        assert!(err.to_string().contains("epsilon"), "got: {err}");
    }

    #[test]
    fn unknown_key_rejected() {
        let text = minimal("typo_key = 3");
        assert!(matches!(RunConfig::parse(&text), Err(ConfigError::Parse(_))));
    }

    #[test]
    fn random_geometric_requires_radius() {
        let text = minimal("").replace("generator = \"cycle\"", "generator = \"random_geometric\"");
        let err = RunConfig::parse(&text).unwrap_err();
        assert!(err.to_string().contains("radius"));
    }

    #[test]
    fn random_box_initial_state_is_deterministic_and_inside() {
        let text = minimal("initial_state = \"random_box\"");
        let cfg = RunConfig::parse(&text).unwrap();
        let graph = cfg.build_graph().unwrap();
        let sc = cfg.build_scenario().unwrap();
        let a = cfg.engine_config(&sc.problem, &graph, sc.delta, None);
        let b = cfg.engine_config(&sc.problem, &graph, sc.delta, None);
        let sa = a.initial_state.unwrap();
        let sb = b.initial_state.unwrap();
        assert_eq!(sa.x, sb.x);
        for xi in &sa.x {
            assert!(sc.problem.action_set.contains(xi, 0.0));
        }
        assert_ne!(sa.x[0], vec![0.0, 0.0]);
    }

    #[test]
    fn oracle_sample_step_coarsens_long_horizons() {
        let mut cfg = RunConfig::parse(&minimal("")).unwrap();
        assert_eq!(cfg.oracle_sample_step(), 0.01);
        cfg.engine.horizon = 1000.0;
        assert_eq!(cfg.oracle_sample_step(), 0.5);
    }
}
