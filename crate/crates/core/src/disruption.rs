//! Capacity-destroying disruption: deletes random replica slots until a
//! target share of the initial capacity is gone.

use rand::Rng;
use thiserror::Error;

use crate::model::{Mcpu, ScenarioConfig, ServiceSpec, ServiceState};

/// The requested wastage cannot be reached while leaving every service at
/// least one slot.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
#[error("target wastage {target} exceeds destroyable capacity {destroyable}")]
pub struct TargetUnreachable {
    pub target: Mcpu,
    pub destroyable: Mcpu,
}

/// Removes one slot at a time from a uniformly random service until the
/// next cheapest removal would overshoot `target_pct` of the initial
/// capacity by more than half its own request. Every service keeps at
/// least one slot. Returns the capacity actually destroyed.
pub fn inject<R: Rng>(
    states: &mut [ServiceState],
    specs: &[ServiceSpec],
    target_pct: f64,
    rng: &mut R,
) -> Result<Mcpu, TargetUnreachable> {
    debug_assert_eq!(states.len(), specs.len());
    let irc: Mcpu = specs.iter().map(|s| s.res_req.times(s.max_replicas)).sum();
    let target = Mcpu::from_tenths(((irc.tenths() as f64) * target_pct / 100.0).round() as i64);
    let destroyable: Mcpu = states
        .iter()
        .zip(specs)
        .map(|(st, sp)| sp.res_req.times(st.slots.saturating_sub(1)))
        .sum();
    if target > destroyable {
        return Err(TargetUnreachable {
            target,
            destroyable,
        });
    }

    let mut wastage = Mcpu::ZERO;
    loop {
        // A removal is eligible while it overshoots the target by at most
        // half of its own request.
        let eligible: Vec<usize> = states
            .iter()
            .zip(specs)
            .enumerate()
            .filter(|(_, (st, sp))| {
                st.slots > 1
                    && 2 * (wastage.tenths() + sp.res_req.tenths())
                        <= 2 * target.tenths() + sp.res_req.tenths()
            })
            .map(|(i, _)| i)
            .collect();
        if eligible.is_empty() {
            break;
        }
        let victim = eligible[rng.gen_range(0..eligible.len())];
        states[victim].slots -= 1;
        wastage += specs[victim].res_req;
    }
    Ok(wastage)
}

/// Tick index at which a configured disruption fires: the first tick whose
/// start time is at or past `time_seconds`.
pub fn scheduled_tick(config: &ScenarioConfig) -> Option<u64> {
    config
        .disruption
        .as_ref()
        .map(|d| d.time_seconds.div_ceil(config.tick_seconds))
}
