//! Ramp-and-sustain user curve and conversion of users into per-service
//! demand and measured utilization.

use thiserror::Error;

use crate::model::{Mcpu, ScenarioConfig, ServiceSpec, ServiceState};

/// Utilization cannot be measured against zero replicas.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
#[error("cannot measure utilization of a service with zero replicas")]
pub struct ZeroReplicas;

/// Concurrent users at simulated time `t`: a linear ramp to `peak_users`
/// over `ramp_seconds`, sustained afterwards.
pub fn users_at(t: u64, config: &ScenarioConfig) -> u64 {
    if t >= config.ramp_seconds || config.ramp_seconds == 0 {
        config.peak_users
    } else {
        config.peak_users * t / config.ramp_seconds
    }
}

/// Demand routed to one service: `users * per_user_mcpu * demand_weight`,
/// rounded to the nearest tenth of a milliCPU.
pub fn service_demand(users: u64, spec: &ServiceSpec, config: &ScenarioConfig) -> Mcpu {
    let total_tenths = (users * config.per_user_mcpu.tenths() as u64) as f64;
    Mcpu::from_tenths((total_tenths * spec.demand_weight).round() as i64)
}

/// Measured utilization in tenths of a percent, capped at
/// `100 * res_limit / res_req` (demand beyond the limit is throttled away).
pub fn utilization(
    demand: Mcpu,
    state: &ServiceState,
    spec: &ServiceSpec,
) -> Result<u32, ZeroReplicas> {
    if state.current_replicas == 0 {
        return Err(ZeroReplicas);
    }
    let denom = spec.res_req.tenths() * i64::from(state.current_replicas);
    let raw = (1000 * demand.tenths() + denom / 2) / denom;
    Ok((raw as u32).min(spec.utilization_cap_deci()))
}

/// CPU actually consumed by a service this tick: demand, throttled at
/// `current_replicas * res_limit`. Exact in tenths.
pub fn consumed(demand: Mcpu, state: &ServiceState, spec: &ServiceSpec) -> Mcpu {
    demand.min(spec.res_limit.times(state.current_replicas))
}
