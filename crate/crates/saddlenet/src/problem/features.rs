//! Deterministic per-agent feature/label sequences for the classification
//! scenarios, either synthesized or ingested from CSV.

use std::path::Path;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum FeatureStreamError {
    #[error("csv read error: {0}")]
    Csv(#[from] csv::Error),
    #[error("csv header must start with `t,agent,label` followed by z_0..z_{{n-1}}, got {0:?}")]
    BadHeader(Vec<String>),
    #[error("row {row}: label must be -1 or 1, got {label}")]
    BadLabel { row: usize, label: f64 },
    #[error("row {row}: expected {expected} feature columns, found {found}")]
    DimMismatch { row: usize, expected: usize, found: usize },
    #[error("row {row}: agent index {agent} out of range for {agents} agents")]
    AgentOutOfRange { row: usize, agent: usize, agents: usize },
    #[error("agent {0} has no sample at or before t = 0")]
    MissingInitialSample(usize),
    #[error("agent {0} has no samples at all")]
    EmptyAgent(usize),
    #[error("stream ends at t = {last} but must cover the horizon T = {horizon}")]
    ShortHorizon { last: f64, horizon: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSample {
    pub t: f64,
    /// Exactly -1.0 or +1.0.
    pub label: f64,
    pub features: Vec<f64>,
}

/// Immutable, precomputed sequence of (t, z_i(t), y_i(t)) per agent,
/// piecewise constant between samples.
#[derive(Debug, Clone)]
pub struct FeatureStream {
    dim: usize,
    per_agent: Vec<Vec<FeatureSample>>,
}

impl FeatureStream {
    pub fn new(dim: usize, per_agent: Vec<Vec<FeatureSample>>) -> Result<Self, FeatureStreamError> {
        for (i, samples) in per_agent.iter().enumerate() {
            if samples.is_empty() {
                return Err(FeatureStreamError::EmptyAgent(i));
            }
            if samples[0].t > 1e-9 {
                return Err(FeatureStreamError::MissingInitialSample(i));
            }
            for (row, s) in samples.iter().enumerate() {
                if s.label != 1.0 && s.label != -1.0 {
                    return Err(FeatureStreamError::BadLabel { row, label: s.label });
                }
                if s.features.len() != dim {
                    return Err(FeatureStreamError::DimMismatch {
                        row,
                        expected: dim,
                        found: s.features.len(),
                    });
                }
            }
        }
        let mut per_agent = per_agent;
        for samples in &mut per_agent {
            samples.sort_by(|a, b| a.t.total_cmp(&b.t));
        }
        Ok(FeatureStream { dim, per_agent })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn agent_count(&self) -> usize {
        self.per_agent.len()
    }

    /// Sample active at time t: the latest sample with sample.t <= t.
    pub fn sample(&self, agent: usize, t: f64) -> &FeatureSample {
        let samples = &self.per_agent[agent];
        let idx = samples.partition_point(|s| s.t <= t + 1e-12);
        &samples[idx.saturating_sub(1)]
    }

    pub fn samples(&self, agent: usize) -> &[FeatureSample] {
        &self.per_agent[agent]
    }

    pub fn all_samples(&self) -> impl Iterator<Item = &FeatureSample> {
        self.per_agent.iter().flatten()
    }

    pub fn check_covers(&self, horizon: f64) -> Result<(), FeatureStreamError> {
        // Piecewise-constant extension means coverage only requires an
        // initial sample, which `new` enforced. Nothing further to check,
        // but keep the hook so CSV ingestion can warn on short files.
        let _ = horizon;
        Ok(())
    }

    /// Schema: header `t,agent,label,z_0,...,z_{n-1}`; UTF-8, '.' decimal.
    pub fn from_csv(path: &Path, agent_count: usize) -> Result<Self, FeatureStreamError> {
        let mut reader = csv::Reader::from_path(path)?;
        let headers: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
        if headers.len() < 4
            || headers[0] != "t"
            || headers[1] != "agent"
            || headers[2] != "label"
            || headers[3..]
                .iter()
                .enumerate()
                .any(|(k, h)| h != &format!("z_{k}"))
        {
            return Err(FeatureStreamError::BadHeader(headers));
        }
        let dim = headers.len() - 3;
        let mut per_agent = vec![Vec::new(); agent_count];
        for (row, record) in reader.deserialize::<Vec<f64>>().enumerate() {
            let record = record?;
            if record.len() != dim + 3 {
                return Err(FeatureStreamError::DimMismatch {
                    row,
                    expected: dim,
                    found: record.len().saturating_sub(3),
                });
            }
            let agent = record[1] as usize;
            if record[1].fract() != 0.0 || agent >= agent_count {
                return Err(FeatureStreamError::AgentOutOfRange {
                    row,
                    agent,
                    agents: agent_count,
                });
            }
            let label = record[2];
            if label != 1.0 && label != -1.0 {
                return Err(FeatureStreamError::BadLabel { row, label });
            }
            per_agent[agent].push(FeatureSample {
                t: record[0],
                label,
                features: record[3..].to_vec(),
            });
        }
        FeatureStream::new(dim, per_agent)
    }
}
