use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context, Result};
use clap::{Parser, Subcommand};

use saddlenet::config::RunConfig;
use saddlenet::dynamics::run;
use saddlenet::metrics::{classification_error, compute_report, MetricsReport};
use saddlenet::oracle::{grid_oracle, subgradient_oracle, OracleResult};
use saddlenet::output::{
    bounds_text, metrics_csv, read_oracle, read_trajectory, replay_log, write_run_artifacts,
    BOUNDS_FILE, CONFIG_COPY_FILE, METRICS_FILE, ORACLE_FILE,
};

#[derive(Parser)]
#[command(name = "saddlenet", about = "Distributed online saddle-point dynamics simulator")]
struct Cli {
    /// Worker threads for the per-agent update (default: from the config).
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Suppress progress output.
    #[arg(long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Simulate, benchmark and write all artifacts to the output directory.
    Run { config: PathBuf },
    /// Compute only the clairvoyant benchmark and write oracle.out.
    Oracle { config: PathBuf },
    /// Recompute metrics.csv and bounds.txt from a completed run directory.
    Report { dir: PathBuf },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.cmd {
        Cmd::Run { config } => cmd_run(config, cli.workers, cli.quiet),
        Cmd::Oracle { config } => cmd_oracle(config, cli.quiet),
        Cmd::Report { dir } => cmd_report(dir, cli.quiet),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn compute_oracle(cfg: &RunConfig, problem: &saddlenet::problem::ProblemSpec) -> Result<OracleResult> {
    match cfg.oracle.method.as_str() {
        "grid" => Ok(grid_oracle(problem, cfg.oracle.resolution, cfg.oracle_sample_step())?),
        "subgradient" => Ok(subgradient_oracle(
            problem,
            cfg.oracle.iterations,
            cfg.oracle.step_c,
            cfg.oracle_sample_step(),
        )),
        other => Err(anyhow!("unsupported oracle method `{other}`")),
    }
}

fn collect_warnings(cfg: &RunConfig, problem: &saddlenet::problem::ProblemSpec) -> Vec<String> {
    let mut warnings = Vec::new();
    if cfg.engine.epsilon <= 0.5 {
        warnings.push(format!(
            "epsilon = {} is not above 1/2; the fit guarantee hypothesis is violated",
            cfg.engine.epsilon
        ));
    }
    let ts: Vec<f64> = {
        let steps = ((cfg.engine.horizon / cfg.engine.step).round() as usize).clamp(1, 1000);
        (0..steps).map(|k| k as f64 * cfg.engine.horizon / steps as f64).collect()
    };
    if let Some(v) = problem.witness_worst_violation(&ts) {
        if v >= 0.0 {
            warnings.push(format!(
                "declared feasible witness attains constraint value {v:.3e} >= 0 on the sampled grid"
            ));
        }
    }
    warnings
}

fn cmd_run(config_path: &Path, workers: Option<usize>, quiet: bool) -> Result<()> {
    let text = std::fs::read_to_string(config_path)
        .with_context(|| format!("cannot read config {}", config_path.display()))?;
    let cfg = RunConfig::parse(&text)?;
    let graph = cfg.build_graph()?;
    let scenario = cfg.build_scenario()?;
    let engine = cfg.engine_config(&scenario.problem, &graph, scenario.delta, workers);
    let mut warnings = collect_warnings(&cfg, &scenario.problem);
    if let Some(init) = &engine.initial_state {
        if !init.multipliers_zero() {
            warnings.push("initial multipliers are nonzero; closed-form bounds do not apply".into());
        }
    }

    if !quiet {
        println!(
            "running {}: N = {}, T = {}, h = {}, epsilon = {}",
            cfg.scenario.name, graph.node_count(), engine.horizon, engine.step, engine.epsilon
        );
    }
    let oracle = compute_oracle(&cfg, &scenario.problem)?;
    let log = run(&scenario.problem, &graph, &engine)?;
    let report = compute_report(&log, &scenario.problem, &graph, &oracle.xstar, 10)?;
    let class_errors = scenario.holdout.as_ref().map(|holdout| {
        let final_state = &log.final_sample().state;
        (0..scenario.problem.agent_count)
            .map(|i| classification_error(&final_state.x[i], holdout))
            .collect::<Vec<f64>>()
    });

    let dir = PathBuf::from(&cfg.output.directory);
    write_run_artifacts(
        &dir,
        &text,
        &scenario.problem,
        &log,
        &oracle,
        &report,
        class_errors.as_deref(),
        &warnings,
    )?;
    if !quiet {
        for w in &warnings {
            println!("warning: {w}");
        }
        print_summary(&report, class_errors.as_deref());
        println!("artifacts written to {}", dir.display());
    }
    Ok(())
}

fn cmd_oracle(config_path: &Path, quiet: bool) -> Result<()> {
    let text = std::fs::read_to_string(config_path)
        .with_context(|| format!("cannot read config {}", config_path.display()))?;
    let cfg = RunConfig::parse(&text)?;
    let scenario = cfg.build_scenario()?;
    let oracle = compute_oracle(&cfg, &scenario.problem)?;
    let dir = PathBuf::from(&cfg.output.directory);
    std::fs::create_dir_all(&dir)
        .with_context(|| format!("cannot create output directory {}", dir.display()))?;
    let json = serde_json::to_string_pretty(&oracle)?;
    std::fs::write(dir.join(ORACLE_FILE), format!("{json}\n"))
        .with_context(|| format!("cannot write {}", dir.join(ORACLE_FILE).display()))?;
    if !quiet {
        println!(
            "oracle ({}) x* = {:?}, objective integral = {}, worst violation = {:e}",
            oracle.method, oracle.xstar, oracle.objective_integral, oracle.worst_violation
        );
    }
    Ok(())
}

fn cmd_report(dir: &Path, quiet: bool) -> Result<()> {
    let config_path = dir.join(CONFIG_COPY_FILE);
    if !config_path.exists() {
        return Err(anyhow!("missing run artifact: {}", config_path.display()));
    }
    let text = std::fs::read_to_string(&config_path)
        .with_context(|| format!("cannot read {}", config_path.display()))?;
    let cfg = RunConfig::parse(&text)?;
    let graph = cfg.build_graph()?;
    let scenario = cfg.build_scenario()?;
    let engine = cfg.engine_config(&scenario.problem, &graph, scenario.delta, None);
    let oracle = read_oracle(dir)?;
    let states = read_trajectory(dir, &scenario.problem, &graph)?;
    let log = replay_log(&states, &scenario.problem, &graph, &engine);
    let report = compute_report(&log, &scenario.problem, &graph, &oracle.xstar, 10)?;
    let class_errors = scenario.holdout.as_ref().map(|holdout| {
        let final_state = &log.final_sample().state;
        (0..scenario.problem.agent_count)
            .map(|i| classification_error(&final_state.x[i], holdout))
            .collect::<Vec<f64>>()
    });
    std::fs::write(dir.join(METRICS_FILE), metrics_csv(&log, &scenario.problem, &oracle.xstar))
        .with_context(|| format!("cannot write {}", dir.join(METRICS_FILE).display()))?;
    std::fs::write(
        dir.join(BOUNDS_FILE),
        bounds_text(&report, &oracle, class_errors.as_deref()),
    )
    .with_context(|| format!("cannot write {}", dir.join(BOUNDS_FILE).display()))?;
    if !quiet {
        print_summary(&report, class_errors.as_deref());
        println!("recomputed {} and {} in {}", METRICS_FILE, BOUNDS_FILE, dir.display());
    }
    Ok(())
}

fn print_summary(report: &MetricsReport, class_errors: Option<&[f64]>) {
    let max_regret = report.regret.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let max_dis = report
        .disagreement_pairs
        .iter()
        .map(|p| p.value)
        .fold(0.0f64, f64::max);
    println!(
        "T = {}: max regret = {:.6} (bound {:.6}), max disagreement = {:.6} (bound {:.6})",
        report.horizon, max_regret, report.regret_bound, max_dis, report.disagreement_bound
    );
    if let Some(errs) = class_errors {
        let worst = errs.iter().cloned().fold(0.0f64, f64::max);
        println!("worst held-out classification error = {worst:.4}");
    }
}
