//! Built-in scenario library: analytic verification problems plus the
//! random-walk intersection classification scenario with synthetic or
//! CSV-ingested features.

use std::path::Path;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::seeds;

use super::{
    dot, logistic_loss, ActionSet, Environment, FeatureSample, FeatureStream, FeatureStreamError,
    ProblemSpec,
};

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("unknown scenario `{0}`")]
    UnknownScenario(String),
    #[error("scenario `{scenario}`: field `{field}` is not applicable")]
    FieldNotApplicable { scenario: String, field: &'static str },
    #[error("scenario `{scenario}`: required field `{field}` is missing")]
    MissingField { scenario: String, field: &'static str },
    #[error("scenario field `{field}` invalid: {reason}")]
    InvalidField { field: &'static str, reason: String },
    #[error(transparent)]
    Features(#[from] FeatureStreamError),
}

/// The `[scenario]` section of a run config. A flat union of all scenario
/// parameters; fields that do not belong to the named scenario are rejected.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSection {
    pub name: String,
    pub action_dim: Option<usize>,
    pub gamma: Option<f64>,
    pub box_half_width: Option<f64>,
    // quadratic_tracking
    pub targets: Option<Vec<Vec<f64>>>,
    pub target_radius: Option<f64>,
    pub random_targets: Option<bool>,
    pub oscillation_amplitude: Option<f64>,
    pub oscillation_omega: Option<f64>,
    // linear constraints (quadratic_tracking, linear_feasibility)
    pub constraint_normal: Option<Vec<f64>>,
    pub constraint_bound: Option<f64>,
    pub random_constraints: Option<bool>,
    // classifier scenarios
    pub delta: Option<f64>,
    pub alpha: Option<f64>,
    pub walk_extent: Option<f64>,
    pub sample_interval: Option<f64>,
    /// Number of feature samples per agent; the last one persists to the
    /// horizon. Default: enough to cover the horizon at `sample_interval`.
    pub sample_count: Option<usize>,
    pub sigma_w: Option<f64>,
    pub road_half_width: Option<f64>,
    pub road_shape: Option<String>,
    pub class_shift: Option<f64>,
    pub feature_noise: Option<f64>,
    pub holdout_per_class: Option<usize>,
    pub csv_path: Option<String>,
}

pub struct Scenario {
    pub problem: ProblemSpec,
    pub features: Option<Arc<FeatureStream>>,
    /// Held-out (label, features) pairs for classification-error reporting.
    pub holdout: Option<Vec<(f64, Vec<f64>)>>,
    /// Saturation threshold for the saturated-fit metric.
    pub delta: f64,
}

pub fn make_scenario(
    section: &ScenarioSection,
    agent_count: usize,
    horizon: f64,
    step: f64,
    seed: u64,
) -> Result<Scenario, ScenarioError> {
    match section.name.as_str() {
        "quadratic_tracking" => quadratic_tracking(section, agent_count, horizon, step, seed),
        "linear_feasibility" => linear_feasibility(section, agent_count, horizon, seed),
        "sparse_classifier_synthetic" => {
            sparse_classifier_synthetic(section, agent_count, horizon, seed)
        }
        "sparse_classifier_csv" => sparse_classifier_csv(section, agent_count, horizon),
        other => Err(ScenarioError::UnknownScenario(other.to_string())),
    }
}

fn reject_fields(
    section: &ScenarioSection,
    allowed: &[&'static str],
) -> Result<(), ScenarioError> {
    let present: Vec<(&'static str, bool)> = vec![
        ("action_dim", section.action_dim.is_some()),
        ("gamma", section.gamma.is_some()),
        ("box_half_width", section.box_half_width.is_some()),
        ("targets", section.targets.is_some()),
        ("target_radius", section.target_radius.is_some()),
        ("random_targets", section.random_targets.is_some()),
        ("oscillation_amplitude", section.oscillation_amplitude.is_some()),
        ("oscillation_omega", section.oscillation_omega.is_some()),
        ("constraint_normal", section.constraint_normal.is_some()),
        ("constraint_bound", section.constraint_bound.is_some()),
        ("random_constraints", section.random_constraints.is_some()),
        ("delta", section.delta.is_some()),
        ("alpha", section.alpha.is_some()),
        ("walk_extent", section.walk_extent.is_some()),
        ("sample_interval", section.sample_interval.is_some()),
        ("sample_count", section.sample_count.is_some()),
        ("sigma_w", section.sigma_w.is_some()),
        ("road_half_width", section.road_half_width.is_some()),
        ("road_shape", section.road_shape.is_some()),
        ("class_shift", section.class_shift.is_some()),
        ("feature_noise", section.feature_noise.is_some()),
        ("holdout_per_class", section.holdout_per_class.is_some()),
        ("csv_path", section.csv_path.is_some()),
    ];
    for (field, is_set) in present {
        if is_set && !allowed.contains(&field) {
            return Err(ScenarioError::FieldNotApplicable {
                scenario: section.name.clone(),
                field,
            });
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// quadratic tracking

struct QuadraticEnv {
    targets: Vec<Vec<f64>>,
    amplitude: f64,
    omega: f64,
    normals: Vec<Vec<f64>>,
    bounds: Vec<f64>,
}

impl QuadraticEnv {
    fn reference(&self, agent: usize, t: f64, out: &mut [f64]) {
        out.copy_from_slice(&self.targets[agent]);
        if self.amplitude != 0.0 {
            out[0] += self.amplitude * (self.omega * t).cos();
            if out.len() > 1 {
                out[1] += self.amplitude * (self.omega * t).sin();
            }
        }
    }
}

impl Environment for QuadraticEnv {
    fn cost(&self, agent: usize, t: f64, x: &[f64]) -> f64 {
        let mut r = vec![0.0; x.len()];
        self.reference(agent, t, &mut r);
        0.5 * x.iter().zip(&r).map(|(a, b)| (a - b) * (a - b)).sum::<f64>()
    }

    fn constraints(&self, agent: usize, _t: f64, x: &[f64], out: &mut [f64]) {
        out[0] = dot(&self.normals[agent], x) - self.bounds[agent];
    }

    fn cost_subgradient(&self, agent: usize, t: f64, x: &[f64], out: &mut [f64]) {
        self.reference(agent, t, out);
        for (o, xi) in out.iter_mut().zip(x) {
            *o = xi - *o;
        }
    }

    fn constraint_subgradient(&self, agent: usize, _t: f64, _x: &[f64], _k: usize, out: &mut [f64]) {
        out.copy_from_slice(&self.normals[agent]);
    }
}

fn quadratic_tracking(
    section: &ScenarioSection,
    agent_count: usize,
    horizon: f64,
    _step: f64,
    seed: u64,
) -> Result<Scenario, ScenarioError> {
    reject_fields(
        section,
        &[
            "action_dim",
            "gamma",
            "box_half_width",
            "targets",
            "target_radius",
            "random_targets",
            "oscillation_amplitude",
            "oscillation_omega",
            "constraint_normal",
            "constraint_bound",
            "random_constraints",
            "delta",
        ],
    )?;
    let dim = section.action_dim.unwrap_or(2);
    let half_width = section.box_half_width.unwrap_or(2.0);
    let gamma = section.gamma.unwrap_or(1.0);
    let amplitude = section.oscillation_amplitude.unwrap_or(0.0);
    let omega = section.oscillation_omega.unwrap_or(1.0);
    let radius = section.target_radius.unwrap_or(0.5);

    let targets = if let Some(t) = &section.targets {
        if t.len() != agent_count || t.iter().any(|v| v.len() != dim) {
            return Err(ScenarioError::InvalidField {
                field: "targets",
                reason: format!("need {agent_count} vectors of dimension {dim}"),
            });
        }
        t.clone()
    } else if section.random_targets.unwrap_or(false) {
        let mut rng = ChaCha8Rng::seed_from_u64(seeds::derive(seed, "targets"));
        (0..agent_count)
            .map(|_| (0..dim).map(|_| rng.gen_range(-radius..radius)).collect())
            .collect()
    } else {
        // evenly spaced on a circle of the given radius in the first two coords
        (0..agent_count)
            .map(|i| {
                let angle = 2.0 * std::f64::consts::PI * i as f64 / agent_count as f64;
                let mut c = vec![0.0; dim];
                c[0] = radius * angle.cos();
                if dim > 1 {
                    c[1] = radius * angle.sin();
                }
                c
            })
            .collect()
    };

    let (normals, bounds) = linear_constraints(section, agent_count, dim, seed)?;

    // conservative constants from the box geometry
    let corner_dist = |c: &[f64]| -> f64 {
        c.iter()
            .map(|&ck| {
                let lo = (-half_width - ck).abs();
                let hi = (half_width - ck).abs();
                lo.max(hi).powi(2)
            })
            .sum::<f64>()
            .sqrt()
    };
    let l0 = targets
        .iter()
        .map(|c| corner_dist(c) + amplitude.abs() * std::f64::consts::SQRT_2)
        .fold(0.0f64, f64::max)
        .max(1e-9);
    let lf = normals.iter().map(|a| super::norm(a)).fold(0.0f64, f64::max).max(1e-9);
    let k: f64 = targets
        .iter()
        .map(|c| 0.5 * (corner_dist(c) + amplitude.abs() * std::f64::consts::SQRT_2).powi(2))
        .sum();

    let witness = {
        let origin = vec![0.0; dim];
        if bounds.iter().all(|&b| b > 1e-9) {
            Some(origin)
        } else {
            None
        }
    };

    let problem = ProblemSpec::new(
        dim,
        agent_count,
        vec![1; agent_count],
        ActionSet::symmetric_box(dim, half_width),
        gamma,
        l0,
        lf,
        k.max(1e-9),
        witness,
        horizon,
        None,
        Arc::new(QuadraticEnv {
            targets,
            amplitude,
            omega,
            normals,
            bounds,
        }),
    );
    Ok(Scenario {
        problem,
        features: None,
        holdout: None,
        delta: section.delta.unwrap_or(0.001),
    })
}

fn linear_constraints(
    section: &ScenarioSection,
    agent_count: usize,
    dim: usize,
    seed: u64,
) -> Result<(Vec<Vec<f64>>, Vec<f64>), ScenarioError> {
    if section.random_constraints.unwrap_or(false) {
        let mut rng = ChaCha8Rng::seed_from_u64(seeds::derive(seed, "constraints"));
        let normal = Normal::new(0.0, 1.0).unwrap();
        let mut normals = Vec::with_capacity(agent_count);
        let mut bounds = Vec::with_capacity(agent_count);
        for _ in 0..agent_count {
            let mut a: Vec<f64> = (0..dim).map(|_| normal.sample(&mut rng)).collect();
            let n = super::norm(&a).max(1e-12);
            a.iter_mut().for_each(|v| *v /= n);
            normals.push(a);
            bounds.push(rng.gen_range(0.3..1.0));
        }
        Ok((normals, bounds))
    } else {
        let a = section.constraint_normal.clone().unwrap_or_else(|| {
            let mut v = vec![0.0; dim];
            v[0] = 1.0;
            v
        });
        if a.len() != dim {
            return Err(ScenarioError::InvalidField {
                field: "constraint_normal",
                reason: format!("expected dimension {dim}, got {}", a.len()),
            });
        }
        let b = section.constraint_bound.unwrap_or(1.0);
        Ok((vec![a; agent_count], vec![b; agent_count]))
    }
}

// ---------------------------------------------------------------------------
// linear feasibility

struct LinearFeasibilityEnv {
    normals: Vec<Vec<f64>>,
    bounds: Vec<f64>,
}

impl Environment for LinearFeasibilityEnv {
    fn cost(&self, _agent: usize, _t: f64, _x: &[f64]) -> f64 {
        0.0
    }

    fn constraints(&self, agent: usize, _t: f64, x: &[f64], out: &mut [f64]) {
        out[0] = dot(&self.normals[agent], x) - self.bounds[agent];
    }

    fn cost_subgradient(&self, _agent: usize, _t: f64, _x: &[f64], out: &mut [f64]) {
        out.fill(0.0);
    }

    fn constraint_subgradient(&self, agent: usize, _t: f64, _x: &[f64], _k: usize, out: &mut [f64]) {
        out.copy_from_slice(&self.normals[agent]);
    }
}

fn linear_feasibility(
    section: &ScenarioSection,
    agent_count: usize,
    horizon: f64,
    seed: u64,
) -> Result<Scenario, ScenarioError> {
    reject_fields(
        section,
        &[
            "action_dim",
            "gamma",
            "box_half_width",
            "constraint_normal",
            "constraint_bound",
            "random_constraints",
            "delta",
        ],
    )?;
    let dim = section.action_dim.unwrap_or(2);
    let half_width = section.box_half_width.unwrap_or(2.0);
    let gamma = section.gamma.unwrap_or(1.0);
    let (normals, bounds) = linear_constraints(section, agent_count, dim, seed)?;
    let lf = normals.iter().map(|a| super::norm(a)).fold(0.0f64, f64::max).max(1e-9);
    let witness = bounds.iter().all(|&b| b > 1e-9).then(|| vec![0.0; dim]);
    let problem = ProblemSpec::new(
        dim,
        agent_count,
        vec![1; agent_count],
        ActionSet::symmetric_box(dim, half_width),
        gamma,
        1e-6,
        lf,
        1e-6,
        witness,
        horizon,
        None,
        Arc::new(LinearFeasibilityEnv { normals, bounds }),
    );
    Ok(Scenario {
        problem,
        features: None,
        holdout: None,
        delta: section.delta.unwrap_or(0.001),
    })
}

// ---------------------------------------------------------------------------
// sparse classifier

struct ClassifierEnv {
    stream: Arc<FeatureStream>,
    delta: f64,
    agent_count: usize,
    /// Eq.-28-style variant: when set, the l1 term moves into the cost with
    /// this weight and the tolerance constraint disappears.
    alpha: Option<f64>,
}

fn l1(x: &[f64]) -> f64 {
    x.iter().map(|v| v.abs()).sum()
}

fn l1_subgradient(x: &[f64], scale: f64, out: &mut [f64]) {
    // minimal-norm element: 0 at a zero coordinate
    for (o, &v) in out.iter_mut().zip(x) {
        *o = scale * if v > 0.0 { 1.0 } else if v < 0.0 { -1.0 } else { 0.0 };
    }
}

fn logistic_gradient(label: f64, features: &[f64], x: &[f64], out: &mut [f64]) {
    let margin = label * dot(x, features);
    // d/dm log(1+e^-m) = -sigma(-m)
    let s = 1.0 / (1.0 + margin.exp());
    for (o, &z) in out.iter_mut().zip(features) {
        *o = -label * s * z;
    }
}

impl Environment for ClassifierEnv {
    fn cost(&self, agent: usize, t: f64, x: &[f64]) -> f64 {
        match self.alpha {
            None => l1(x) / self.agent_count as f64,
            Some(alpha) => {
                let s = self.stream.sample(agent, t);
                logistic_loss(s.label, &s.features, x) + alpha * l1(x)
            }
        }
    }

    fn constraints(&self, agent: usize, t: f64, x: &[f64], out: &mut [f64]) {
        if self.alpha.is_none() {
            let s = self.stream.sample(agent, t);
            out[0] = logistic_loss(s.label, &s.features, x) - self.delta;
        }
    }

    fn cost_subgradient(&self, agent: usize, t: f64, x: &[f64], out: &mut [f64]) {
        match self.alpha {
            None => l1_subgradient(x, 1.0 / self.agent_count as f64, out),
            Some(alpha) => {
                let s = self.stream.sample(agent, t);
                logistic_gradient(s.label, &s.features, x, out);
                for (o, &v) in out.iter_mut().zip(x) {
                    *o += alpha * if v > 0.0 { 1.0 } else if v < 0.0 { -1.0 } else { 0.0 };
                }
            }
        }
    }

    fn constraint_subgradient(&self, agent: usize, t: f64, x: &[f64], _k: usize, out: &mut [f64]) {
        let s = self.stream.sample(agent, t);
        logistic_gradient(s.label, &s.features, x, out);
    }
}

enum RoadShape {
    Cross,
    Strip,
}

#[allow(clippy::too_many_arguments)]
fn synthesize_stream(
    agent_count: usize,
    horizon: f64,
    dim: usize,
    walk_extent: f64,
    sample_interval: f64,
    sample_count: Option<usize>,
    sigma_w: f64,
    road_half_width: f64,
    road_shape: RoadShape,
    class_shift: f64,
    feature_noise: f64,
    seed: u64,
) -> FeatureStream {
    let mut walk_rng = ChaCha8Rng::seed_from_u64(seeds::derive(seed, "walks"));
    let mut feat_rng = ChaCha8Rng::seed_from_u64(seeds::derive(seed, "features"));
    let gauss = Normal::new(0.0, 1.0).unwrap();
    let intervals =
        sample_count.unwrap_or_else(|| (horizon / sample_interval).ceil() as usize + 1).max(1);
    let mut per_agent = Vec::with_capacity(agent_count);
    for _ in 0..agent_count {
        let mut px = walk_rng.gen_range(-walk_extent..walk_extent);
        let mut py = walk_rng.gen_range(-walk_extent..walk_extent);
        let mut samples = Vec::with_capacity(intervals);
        for k in 0..intervals {
            let on_road = match road_shape {
                RoadShape::Cross => px.abs() < road_half_width || py.abs() < road_half_width,
                RoadShape::Strip => py.abs() < road_half_width,
            };
            // pavement = -1, grass = +1
            let label = if on_road { -1.0 } else { 1.0 };
            let mut z = vec![0.0; dim];
            for v in z.iter_mut() {
                *v = feature_noise * gauss.sample(&mut feat_rng);
            }
            z[0] += label * class_shift;
            samples.push(FeatureSample {
                t: k as f64 * sample_interval,
                label,
                features: z,
            });
            px += sigma_w * gauss.sample(&mut walk_rng);
            py += sigma_w * gauss.sample(&mut walk_rng);
        }
        per_agent.push(samples);
    }
    FeatureStream::new(dim, per_agent).expect("synthetic stream is well formed by construction")
}

/// Witness along the class-separation direction, sized so every sampled
/// constraint is strictly below zero; `None` when the stream is not
/// separable along that direction or the required scale leaves the box.
fn classifier_witness(
    stream: &FeatureStream,
    direction: &[f64],
    delta: f64,
    action_set: &ActionSet,
) -> Option<Vec<f64>> {
    let mut min_margin = f64::INFINITY;
    for s in stream.all_samples() {
        min_margin = min_margin.min(s.label * dot(direction, &s.features));
    }
    if min_margin.is_nan() || min_margin <= 1e-9 {
        return None;
    }
    // scale so the sampled loss is at most delta/2
    let required = -((0.5 * delta).exp_m1()).ln();
    let scale = required / min_margin;
    let witness: Vec<f64> = direction.iter().map(|&u| scale * u).collect();
    action_set.contains(&witness, 1e-12).then_some(witness)
}

fn class_mean_direction(stream: &FeatureStream) -> Vec<f64> {
    let dim = stream.dim();
    let mut pos = vec![0.0; dim];
    let mut neg = vec![0.0; dim];
    let (mut np, mut nn) = (0usize, 0usize);
    for s in stream.all_samples() {
        if s.label > 0.0 {
            np += 1;
            for (p, &z) in pos.iter_mut().zip(&s.features) {
                *p += z;
            }
        } else {
            nn += 1;
            for (p, &z) in neg.iter_mut().zip(&s.features) {
                *p += z;
            }
        }
    }
    let mut dir = vec![0.0; dim];
    for k in 0..dim {
        let mp = if np > 0 { pos[k] / np as f64 } else { 0.0 };
        let mn = if nn > 0 { neg[k] / nn as f64 } else { 0.0 };
        dir[k] = mp - mn;
    }
    let n = super::norm(&dir);
    if n > 1e-12 {
        dir.iter_mut().for_each(|v| *v /= n);
    }
    dir
}

fn classifier_scenario_from_stream(
    section: &ScenarioSection,
    stream: FeatureStream,
    agent_count: usize,
    horizon: f64,
    holdout: Option<Vec<(f64, Vec<f64>)>>,
) -> Result<Scenario, ScenarioError> {
    let dim = stream.dim();
    let delta = section.delta.unwrap_or(0.001);
    if delta <= 0.0 {
        return Err(ScenarioError::InvalidField {
            field: "delta",
            reason: "must be positive".into(),
        });
    }
    let gamma = section.gamma.unwrap_or(10.0);
    let half_width = section.box_half_width.unwrap_or(10.0);
    let action_set = ActionSet::symmetric_box(dim, half_width);
    let alpha = section.alpha;

    let max_feature_norm = stream
        .all_samples()
        .map(|s| super::norm(&s.features))
        .fold(0.0f64, f64::max);
    let n_agents = agent_count as f64;
    let (l0, constraint_counts, witness) = if let Some(a) = alpha {
        // regularized variant: cost carries both terms, no constraints
        let l0 = max_feature_norm + a * (dim as f64).sqrt();
        (l0.max(1e-9), vec![0; agent_count], Some(vec![0.0; dim]))
    } else {
        let dir = class_mean_direction(&stream);
        let witness = classifier_witness(&stream, &dir, delta, &action_set);
        ((dim as f64).sqrt() / n_agents, vec![1; agent_count], witness)
    };
    let lf = max_feature_norm.max(1e-9);
    // cost is time-invariant, so the witness objective caps f0(t, x*)
    let k = match (&witness, alpha) {
        (Some(w), None) => l1(w).max(1e-9),
        _ => (dim as f64 * half_width * (max_feature_norm + 1.0)).max(1e-9),
    };

    let stream = Arc::new(stream);
    let problem = ProblemSpec::new(
        dim,
        agent_count,
        constraint_counts,
        action_set,
        gamma,
        l0,
        lf,
        k,
        witness,
        horizon,
        alpha,
        Arc::new(ClassifierEnv {
            stream: Arc::clone(&stream),
            delta,
            agent_count,
            alpha,
        }),
    );
    Ok(Scenario {
        problem,
        features: Some(stream),
        holdout,
        delta,
    })
}

fn sparse_classifier_synthetic(
    section: &ScenarioSection,
    agent_count: usize,
    horizon: f64,
    seed: u64,
) -> Result<Scenario, ScenarioError> {
    reject_fields(
        section,
        &[
            "action_dim",
            "gamma",
            "box_half_width",
            "delta",
            "alpha",
            "walk_extent",
            "sample_interval",
            "sample_count",
            "sigma_w",
            "road_half_width",
            "road_shape",
            "class_shift",
            "feature_noise",
            "holdout_per_class",
        ],
    )?;
    let dim = section.action_dim.unwrap_or(16);
    let walk_extent = section.walk_extent.unwrap_or(15.0);
    let sample_interval = section.sample_interval.unwrap_or(1.0);
    let sigma_w = section.sigma_w.unwrap_or(1.0);
    let road_half_width = section.road_half_width.unwrap_or(5.0);
    let road_shape = match section.road_shape.as_deref() {
        None | Some("cross") => RoadShape::Cross,
        Some("strip") => RoadShape::Strip,
        Some(other) => {
            return Err(ScenarioError::InvalidField {
                field: "road_shape",
                reason: format!("expected `cross` or `strip`, got `{other}`"),
            })
        }
    };
    let class_shift = section.class_shift.unwrap_or(2.0);
    let feature_noise = section.feature_noise.unwrap_or(0.1);
    if sample_interval <= 0.0 {
        return Err(ScenarioError::InvalidField {
            field: "sample_interval",
            reason: "must be positive".into(),
        });
    }

    let stream = synthesize_stream(
        agent_count,
        horizon,
        dim,
        walk_extent,
        sample_interval,
        section.sample_count,
        sigma_w,
        road_half_width,
        road_shape,
        class_shift,
        feature_noise,
        seed,
    );

    let holdout_per_class = section.holdout_per_class.unwrap_or(200);
    let mut rng = ChaCha8Rng::seed_from_u64(seeds::derive(seed, "holdout"));
    let gauss = Normal::new(0.0, 1.0).unwrap();
    let mut holdout = Vec::with_capacity(2 * holdout_per_class);
    for &label in &[-1.0, 1.0] {
        for _ in 0..holdout_per_class {
            let mut z: Vec<f64> = (0..dim).map(|_| feature_noise * gauss.sample(&mut rng)).collect();
            z[0] += label * class_shift;
            holdout.push((label, z));
        }
    }

    classifier_scenario_from_stream(section, stream, agent_count, horizon, Some(holdout))
}

fn sparse_classifier_csv(
    section: &ScenarioSection,
    agent_count: usize,
    horizon: f64,
) -> Result<Scenario, ScenarioError> {
    reject_fields(
        section,
        &["gamma", "box_half_width", "delta", "alpha", "csv_path"],
    )?;
    let path = section.csv_path.as_ref().ok_or(ScenarioError::MissingField {
        scenario: section.name.clone(),
        field: "csv_path",
    })?;
    let stream = FeatureStream::from_csv(Path::new(path), agent_count)?;
    stream.check_covers(horizon)?;
    classifier_scenario_from_stream(section, stream, agent_count, horizon, None)
}
