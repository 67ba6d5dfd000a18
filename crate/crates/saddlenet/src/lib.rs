//! Simulation engine for distributed online convex optimization over
//! networks: projected saddle-point dynamics with relaxed proximity
//! consensus, plus the regret / fit / disagreement metrics and the
//! closed-form bounds they are certified against.

pub mod config;
pub mod dynamics;
pub mod graph;
pub mod metrics;
pub mod oracle;
pub mod output;
pub mod problem;
pub mod seeds;
