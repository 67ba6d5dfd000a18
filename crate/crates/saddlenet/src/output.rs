//! Run-directory artifacts: `trajectory.csv` (full recorded state),
//! `metrics.csv` (per-sample metric row), `oracle.out` (JSON benchmark),
//! `bounds.txt` (human-readable bound report), `warnings.txt`, and a copy of
//! the config for recomputation. Floats are printed in shortest round-trip
//! form so a parsed trajectory reproduces the original bits.

use std::io::Write;
use std::path::Path;

use thiserror::Error;

use crate::dynamics::{EngineConfig, SystemState};
use crate::graph::Graph;
use crate::metrics::{energy, Accumulator, MetricsReport, TrajectoryLog};
use crate::oracle::OracleResult;
use crate::problem::ProblemSpec;

pub const TRAJECTORY_FILE: &str = "trajectory.csv";
pub const METRICS_FILE: &str = "metrics.csv";
pub const ORACLE_FILE: &str = "oracle.out";
pub const BOUNDS_FILE: &str = "bounds.txt";
pub const WARNINGS_FILE: &str = "warnings.txt";
pub const CONFIG_COPY_FILE: &str = "config.toml";

#[derive(Debug, Error)]
pub enum OutputError {
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("missing run artifact: {0}")]
    MissingFile(String),
    #[error("malformed {file}: {reason}")]
    Malformed { file: String, reason: String },
    #[error("oracle.out parse error: {0}")]
    Json(#[from] serde_json::Error),
}

fn io_err(path: &Path, source: std::io::Error) -> OutputError {
    OutputError::Io { path: path.display().to_string(), source }
}

fn write_file(dir: &Path, name: &str, contents: &str) -> Result<(), OutputError> {
    let path = dir.join(name);
    let mut f = std::fs::File::create(&path).map_err(|e| io_err(&path, e))?;
    f.write_all(contents.as_bytes()).map_err(|e| io_err(&path, e))
}

/// Full recorded state. Columns (fixed order):
/// t, x_{i}_{d} for each agent i and coordinate d,
/// lambda_{i}_{k} for each agent and local constraint,
/// mu_{i}_{s} for each agent and neighbor slot (slot order = sorted
/// neighbor order).
pub fn trajectory_csv(log: &TrajectoryLog) -> String {
    let samples = log.samples();
    let first = &samples[0].state;
    let mut header = String::from("t");
    for (i, xi) in first.x.iter().enumerate() {
        for d in 0..xi.len() {
            header.push_str(&format!(",x_{i}_{d}"));
        }
    }
    for (i, li) in first.lambda.iter().enumerate() {
        for k in 0..li.len() {
            header.push_str(&format!(",lambda_{i}_{k}"));
        }
    }
    for (i, mi) in first.mu.iter().enumerate() {
        for s in 0..mi.len() {
            header.push_str(&format!(",mu_{i}_{s}"));
        }
    }
    let mut out = header;
    out.push('\n');
    for s in samples {
        out.push_str(&format!("{}", s.t));
        for v in s
            .state
            .x
            .iter()
            .flatten()
            .chain(s.state.lambda.iter().flatten())
            .chain(s.state.mu.iter().flatten())
        {
            out.push_str(&format!(",{v}"));
        }
        out.push('\n');
    }
    out
}

/// Reference cost integral at each recorded sample, left rectangles on the
/// recorded grid (exact when record_every = 1).
fn reference_integrals(log: &TrajectoryLog, problem: &ProblemSpec, xstar: &[f64]) -> Vec<f64> {
    let samples = log.samples();
    let mut out = Vec::with_capacity(samples.len());
    let mut acc = 0.0;
    out.push(0.0);
    for w in samples.windows(2) {
        acc += (w[1].t - w[0].t) * problem.sum_cost(w[0].t, xstar);
        out.push(acc);
    }
    out
}

/// One row per recorded sample. Columns (fixed order):
/// t; ||x_i|| per agent; disagreement integrand ||x_i - x_j|| per pair
/// (i < j); running own-fit components fit_{i}_{k}; running regret per
/// agent; energy against (x*, 0, 0); running max multiplier magnitude.
pub fn metrics_csv(log: &TrajectoryLog, problem: &ProblemSpec, xstar: &[f64]) -> String {
    let n = problem.agent_count;
    let mut header = String::from("t");
    for i in 0..n {
        header.push_str(&format!(",xnorm_{i}"));
    }
    for i in 0..n {
        for j in i + 1..n {
            header.push_str(&format!(",dis_{i}_{j}"));
        }
    }
    for i in 0..n {
        for k in 0..problem.constraint_counts[i] {
            header.push_str(&format!(",fit_{i}_{k}"));
        }
    }
    for i in 0..n {
        header.push_str(&format!(",regret_{i}"));
    }
    header.push_str(",energy,max_mult");

    let refs = reference_integrals(log, problem, xstar);
    let ref_x: Vec<Vec<f64>> = vec![xstar.to_vec(); n];
    let zero_lambda: Vec<Vec<f64>> = log.initial_state().lambda.iter().map(|l| vec![0.0; l.len()]).collect();
    let zero_mu: Vec<Vec<f64>> = log.initial_state().mu.iter().map(|m| vec![0.0; m.len()]).collect();

    let mut out = header;
    out.push('\n');
    for (idx, s) in log.samples().iter().enumerate() {
        out.push_str(&format!("{}", s.t));
        for xi in &s.state.x {
            let nx: f64 = xi.iter().map(|v| v * v).sum::<f64>().sqrt();
            out.push_str(&format!(",{nx}"));
        }
        for i in 0..n {
            for j in i + 1..n {
                let d: f64 = s.state.x[i]
                    .iter()
                    .zip(&s.state.x[j])
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum::<f64>()
                    .sqrt();
                out.push_str(&format!(",{d}"));
            }
        }
        for i in 0..n {
            for &v in &s.cum.fit[i][i] {
                out.push_str(&format!(",{v}"));
            }
        }
        for i in 0..n {
            let r = s.cum.cost[i] - refs[idx];
            out.push_str(&format!(",{r}"));
        }
        let e = energy(&s.state, &ref_x, &zero_lambda, &zero_mu);
        out.push_str(&format!(",{e}"));
        out.push_str(&format!(",{}", s.cum.max_multiplier));
        out.push('\n');
    }
    out
}

pub fn bounds_text(
    report: &MetricsReport,
    oracle: &OracleResult,
    classification_errors: Option<&[f64]>,
) -> String {
    let mut s = String::new();
    s.push_str("# Bound report\n");
    s.push_str(&format!(
        "horizon T = {}\nepsilon = {}\ngraph diameter D = {}\n",
        report.horizon, report.epsilon, report.diameter
    ));
    s.push_str(&format!(
        "constants: K = {}, gamma = {}, L0 = {}, Lf = {}\n",
        report.k_constant, report.gamma, report.lipschitz_cost, report.lipschitz_constraint
    ));
    s.push_str(&format!(
        "benchmark x* = {:?} (method = {}, objective integral = {}, worst violation = {:e})\n\n",
        oracle.xstar, oracle.method, oracle.objective_integral, oracle.worst_violation
    ));

    s.push_str("## Regret vs bound\n");
    s.push_str(&format!("regret bound at T: {}\n", report.regret_bound));
    for (i, r) in report.regret.iter().enumerate() {
        s.push_str(&format!("agent {i}: regret = {r}\n"));
    }

    s.push_str("\n## Disagreement vs bound\n");
    s.push_str(&format!("disagreement bound at T: {}\n", report.disagreement_bound));
    for p in &report.disagreement_pairs {
        s.push_str(&format!("pair ({}, {}): integral = {}\n", p.i, p.j, p.value));
    }

    s.push_str("\n## Fit (own constraints)\n");
    for (i, f) in report.fit_own.iter().enumerate() {
        s.push_str(&format!(
            "agent {i}: fit = {:?}, saturated fit = {:?}\n",
            f, report.sat_fit_own[i]
        ));
    }
    s.push_str(&format!("\nmax multiplier magnitude: {}\n", report.max_multiplier));

    s.push_str("\n## Checkpoints (value, bound, value/sqrt(t))\n");
    s.push_str("t, max_disagreement, dis_bound, dis/sqrt(t), max_regret, regret_bound, regret/sqrt(t), max_pos_fit, fit/sqrt(t)\n");
    for c in &report.checkpoints {
        s.push_str(&format!(
            "{}, {}, {}, {}, {}, {}, {}, {}, {}\n",
            c.t,
            c.max_disagreement,
            c.disagreement_bound,
            c.disagreement_sqrt_ratio,
            c.max_regret,
            c.regret_bound,
            c.regret_sqrt_ratio,
            c.max_positive_fit,
            c.fit_sqrt_ratio
        ));
    }

    if let Some(errs) = classification_errors {
        s.push_str("\n## Held-out classification error per agent\n");
        for (i, e) in errs.iter().enumerate() {
            s.push_str(&format!("agent {i}: {e}\n"));
        }
    }
    s
}

#[allow(clippy::too_many_arguments)]
pub fn write_run_artifacts(
    dir: &Path,
    config_text: &str,
    problem: &ProblemSpec,
    log: &TrajectoryLog,
    oracle: &OracleResult,
    report: &MetricsReport,
    classification_errors: Option<&[f64]>,
    warnings: &[String],
) -> Result<(), OutputError> {
    std::fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    write_file(dir, TRAJECTORY_FILE, &trajectory_csv(log))?;
    write_file(dir, METRICS_FILE, &metrics_csv(log, problem, &oracle.xstar))?;
    let json = serde_json::to_string_pretty(oracle).expect("serializable");
    write_file(dir, ORACLE_FILE, &format!("{json}\n"))?;
    write_file(dir, BOUNDS_FILE, &bounds_text(report, oracle, classification_errors))?;
    let mut w = String::new();
    for line in warnings {
        w.push_str(line);
        w.push('\n');
    }
    write_file(dir, WARNINGS_FILE, &w)?;
    write_file(dir, CONFIG_COPY_FILE, config_text)?;
    Ok(())
}

pub fn read_oracle(dir: &Path) -> Result<OracleResult, OutputError> {
    let path = dir.join(ORACLE_FILE);
    if !path.exists() {
        return Err(OutputError::MissingFile(path.display().to_string()));
    }
    let text = std::fs::read_to_string(&path).map_err(|e| io_err(&path, e))?;
    Ok(serde_json::from_str(&text)?)
}

/// Parse trajectory.csv back into recorded states. Shapes are validated
/// against the problem and graph the config rebuilds.
pub fn read_trajectory(
    dir: &Path,
    problem: &ProblemSpec,
    graph: &Graph,
) -> Result<Vec<SystemState>, OutputError> {
    let path = dir.join(TRAJECTORY_FILE);
    if !path.exists() {
        return Err(OutputError::MissingFile(path.display().to_string()));
    }
    let text = std::fs::read_to_string(&path).map_err(|e| io_err(&path, e))?;
    let malformed = |reason: String| OutputError::Malformed {
        file: path.display().to_string(),
        reason,
    };
    let n = problem.agent_count;
    let d = problem.action_dim;
    let expected_cols: usize = 1
        + n * d
        + problem.constraint_counts.iter().sum::<usize>()
        + (0..n).map(|i| graph.degree(i)).sum::<usize>();
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| malformed("empty file".into()))?;
    if header.split(',').count() != expected_cols {
        return Err(malformed(format!(
            "expected {expected_cols} columns, header has {}",
            header.split(',').count()
        )));
    }
    let mut states = Vec::new();
    for (lineno, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let vals: Vec<f64> = line
            .split(',')
            .map(|v| v.parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|e| malformed(format!("row {}: {e}", lineno + 2)))?;
        if vals.len() != expected_cols {
            return Err(malformed(format!(
                "row {}: expected {expected_cols} columns, got {}",
                lineno + 2,
                vals.len()
            )));
        }
        let mut it = vals.into_iter();
        let t = it.next().unwrap();
        let x: Vec<Vec<f64>> = (0..n).map(|_| (0..d).map(|_| it.next().unwrap()).collect()).collect();
        let lambda: Vec<Vec<f64>> = (0..n)
            .map(|i| (0..problem.constraint_counts[i]).map(|_| it.next().unwrap()).collect())
            .collect();
        let mu: Vec<Vec<f64>> = (0..n)
            .map(|i| (0..graph.degree(i)).map(|_| it.next().unwrap()).collect())
            .collect();
        states.push(SystemState { t, x, lambda, mu });
    }
    if states.is_empty() {
        return Err(malformed("no data rows".into()));
    }
    Ok(states)
}

/// Rebuild a trajectory log by replaying recorded states through the metric
/// accumulator — the same operations the run loop performed, so the
/// recomputed integrals are bit-identical when record_every = 1.
pub fn replay_log(
    states: &[SystemState],
    problem: &ProblemSpec,
    graph: &Graph,
    cfg: &EngineConfig,
) -> TrajectoryLog {
    let mut log = TrajectoryLog::new(problem, graph, cfg);
    let mut acc = Accumulator::new(problem, graph, cfg.step, cfg.saturation_delta);
    for (idx, state) in states.iter().enumerate() {
        log.record(state, &acc);
        if idx + 1 < states.len() {
            acc.observe(problem, graph, state);
        }
    }
    log
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::RunConfig;
    use crate::dynamics::run;

    fn small_config(dir: &str) -> String {
        format!(
            r#"
seed = 3

[graph]
generator = "cycle"
nodes = 3

[scenario]
name = "quadratic_tracking"

[engine]
epsilon = 1.0
step = 0.05
horizon = 1.0

[oracle]
method = "grid"
resolution = 41

[output]
directory = "{dir}"
"#
        )
    }

    #[test]
    fn trajectory_round_trips_bit_exactly() {
        let tmp = tempfile::tempdir().unwrap();
        let text = small_config(&tmp.path().display().to_string());
        let cfg = RunConfig::parse(&text).unwrap();
        let graph = cfg.build_graph().unwrap();
        let sc = cfg.build_scenario().unwrap();
        let engine = cfg.engine_config(&sc.problem, &graph, sc.delta, None);
        let log = run(&sc.problem, &graph, &engine).unwrap();

        std::fs::create_dir_all(tmp.path()).unwrap();
        std::fs::write(tmp.path().join(TRAJECTORY_FILE), trajectory_csv(&log)).unwrap();
        let states = read_trajectory(tmp.path(), &sc.problem, &graph).unwrap();
        assert_eq!(states.len(), log.samples().len());
        for (parsed, orig) in states.iter().zip(log.samples()) {
            assert_eq!(parsed.t.to_bits(), orig.t.to_bits());
            assert_eq!(parsed.x, orig.state.x);
            assert_eq!(parsed.lambda, orig.state.lambda);
            assert_eq!(parsed.mu, orig.state.mu);
        }

        // replaying the parsed states reproduces metrics.csv byte for byte
        let replayed = replay_log(&states, &sc.problem, &graph, &engine);
        let xstar = vec![0.1, -0.2];
        assert_eq!(
            metrics_csv(&log, &sc.problem, &xstar),
            metrics_csv(&replayed, &sc.problem, &xstar)
        );
    }

    #[test]
    fn metrics_csv_has_documented_header() {
        let tmp = tempfile::tempdir().unwrap();
        let text = small_config(&tmp.path().display().to_string());
        let cfg = RunConfig::parse(&text).unwrap();
        let graph = cfg.build_graph().unwrap();
        let sc = cfg.build_scenario().unwrap();
        let engine = cfg.engine_config(&sc.problem, &graph, sc.delta, None);
        let log = run(&sc.problem, &graph, &engine).unwrap();
        let csv = metrics_csv(&log, &sc.problem, &[0.0, 0.0]);
        let header = csv.lines().next().unwrap();
        assert_eq!(
            header,
            "t,xnorm_0,xnorm_1,xnorm_2,dis_0_1,dis_0_2,dis_1_2,\
             fit_0_0,fit_1_0,fit_2_0,regret_0,regret_1,regret_2,energy,max_mult"
        );
        // row count: one per recorded sample
        assert_eq!(csv.lines().count() - 1, log.samples().len());
    }

    #[test]
    fn missing_trajectory_is_named() {
        let tmp = tempfile::tempdir().unwrap();
        let text = small_config(&tmp.path().display().to_string());
        let cfg = RunConfig::parse(&text).unwrap();
        let graph = cfg.build_graph().unwrap();
        let sc = cfg.build_scenario().unwrap();
        let err = read_trajectory(tmp.path(), &sc.problem, &graph).unwrap_err();
        assert!(err.to_string().contains("trajectory.csv"), "got: {err}");
    }
}
