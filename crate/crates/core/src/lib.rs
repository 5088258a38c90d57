//! Deterministic discrete-time simulator for hierarchical microservice
//! autoscaling under capacity disruptions.
//!
//! The engine drives a three-layer control pipeline per tick: decentralized
//! per-service scalers, a cluster capacity manager that detects and
//! quantifies capacity loss, and a resource manager that moves surplus
//! capacity from overprovisioned to underprovisioned services. `Baseline`
//! mode runs the same pipeline without the capacity layer, so its view of
//! the cluster goes stale once a disruption destroys replica slots.

pub mod capacity;
pub mod disruption;
pub mod engine;
pub mod local_scaler;
pub mod metrics;
pub mod model;
pub mod resource;
pub mod workload;

pub use engine::{run, EngineError, RunResult, RunSummary, SimEngine};
pub use model::{
    benchmark_cluster, benchmark_config, validate_config, ConfigError, DisruptionConfig, Mcpu,
    Mode, ScenarioConfig, ServiceSpec, ServiceState,
};
