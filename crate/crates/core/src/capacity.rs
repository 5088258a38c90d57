//! Cluster capacity manager: detects capacity loss, quantifies its
//! severity, and re-synchronizes per-service budgets with the replica
//! slots that actually survive.

use thiserror::Error;

use crate::model::{DisruptionAssessment, DisruptionStatus, Mcpu, ServiceSpec, ServiceState};

/// Current capacity exceeding the initial capacity; the model has no
/// capacity-addition events.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
#[error("current capacity {crc} exceeds initial capacity {irc}")]
pub struct CapacityInversion {
    pub irc: Mcpu,
    pub crc: Mcpu,
}

/// Initial resource capacity: `sum(res_req * max_replicas)`.
pub fn compute_initial_capacity(specs: &[ServiceSpec]) -> Mcpu {
    specs.iter().map(|s| s.res_req.times(s.max_replicas)).sum()
}

/// Current resource capacity: `sum(res_req * slots)` over aligned states.
pub fn compute_current_capacity(states: &[ServiceState], specs: &[ServiceSpec]) -> Mcpu {
    debug_assert_eq!(states.len(), specs.len());
    states
        .iter()
        .zip(specs)
        .map(|(st, sp)| sp.res_req.times(st.slots))
        .sum()
}

/// Compares current against initial capacity and quantifies the loss.
pub fn assess(irc: Mcpu, crc: Mcpu) -> Result<DisruptionAssessment, CapacityInversion> {
    if crc > irc {
        return Err(CapacityInversion { irc, crc });
    }
    let res_loss = irc - crc;
    let status = if res_loss > Mcpu::ZERO {
        DisruptionStatus::DisruptionIdentified
    } else {
        DisruptionStatus::NoDisruption
    };
    let severity = if irc > Mcpu::ZERO {
        100.0 * res_loss.tenths() as f64 / irc.tenths() as f64
    } else {
        0.0
    };
    Ok(DisruptionAssessment {
        irc,
        crc,
        res_loss,
        status,
        severity,
    })
}

/// Rewrites every service's capacity budget to what its surviving slots can
/// actually host. Called only once a disruption has been identified.
pub fn update_capacities(states: &mut [ServiceState], specs: &[ServiceSpec]) {
    debug_assert_eq!(states.len(), specs.len());
    for (state, spec) in states.iter_mut().zip(specs) {
        state.capacity_mcpu = spec.res_req.times(state.slots);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::benchmark_cluster;

    fn states_with_slots(slots: &[u32], specs: &[ServiceSpec]) -> Vec<ServiceState> {
        slots
            .iter()
            .zip(specs)
            .map(|(&s, spec)| ServiceState {
                current_replicas: s.min(spec.max_replicas).max(1),
                slots: s,
                utilization_deci: 0,
                capacity_mcpu: spec.res_req.times(spec.max_replicas),
            })
            .collect()
    }

    #[test]
    fn initial_capacity_of_benchmark_is_6350() {
        assert_eq!(
            compute_initial_capacity(&benchmark_cluster()),
            Mcpu::from_mcpu(6350.0)
        );
    }

    #[test]
    fn initial_capacity_single_and_pair() {
        let mut one = benchmark_cluster();
        one.truncate(1); // frontend: 100m x 5
        assert_eq!(compute_initial_capacity(&one), Mcpu::from_mcpu(500.0));

        let pair = vec![one[0].clone(), {
            let mut redis = benchmark_cluster().pop().unwrap();
            redis.name = "cache".to_string();
            redis
        }];
        // 100x5 + 70x5
        assert_eq!(compute_initial_capacity(&pair), Mcpu::from_mcpu(850.0));
    }

    #[test]
    fn current_capacity_with_full_slots_equals_initial() {
        let specs = benchmark_cluster();
        let states = states_with_slots(&[5; 11], &specs);
        assert_eq!(
            compute_current_capacity(&states, &specs),
            Mcpu::from_mcpu(6350.0)
        );
    }

    #[test]
    fn current_capacity_single_service() {
        let mut specs = benchmark_cluster();
        specs.truncate(1);
        let states = states_with_slots(&[3], &specs);
        assert_eq!(
            compute_current_capacity(&states, &specs),
            Mcpu::from_mcpu(300.0)
        );
    }

    #[test]
    fn assess_no_loss() {
        let a = assess(Mcpu::from_mcpu(6350.0), Mcpu::from_mcpu(6350.0)).unwrap();
        assert_eq!(a.status, DisruptionStatus::NoDisruption);
        assert_eq!(a.res_loss, Mcpu::ZERO);
        assert_eq!(a.severity, 0.0);
    }

    #[test]
    fn assess_half_loss_is_severity_50() {
        let a = assess(Mcpu::from_mcpu(6350.0), Mcpu::from_mcpu(3175.0)).unwrap();
        assert_eq!(a.status, DisruptionStatus::DisruptionIdentified);
        assert_eq!(a.res_loss, Mcpu::from_mcpu(3175.0));
        assert_eq!(a.severity, 50.0);
    }

    #[test]
    fn assess_quarter_loss_is_severity_25_exact() {
        let a = assess(Mcpu::from_mcpu(6350.0), Mcpu::from_mcpu(4762.5)).unwrap();
        assert_eq!(a.res_loss, Mcpu::from_mcpu(1587.5));
        assert_eq!(a.severity, 25.0);
    }

    #[test]
    fn assess_three_quarter_loss_is_severity_75_exact() {
        let a = assess(Mcpu::from_mcpu(6350.0), Mcpu::from_mcpu(1587.5)).unwrap();
        assert_eq!(a.severity, 75.0);
    }

    #[test]
    fn capacity_inversion_is_rejected() {
        let err = assess(Mcpu::from_mcpu(100.0), Mcpu::from_mcpu(101.0)).unwrap_err();
        assert_eq!(err.crc, Mcpu::from_mcpu(101.0));
    }

    #[test]
    fn update_capacities_follows_slots() {
        let specs = benchmark_cluster();
        let mut states = states_with_slots(&[3; 11], &specs);
        update_capacities(&mut states, &specs);
        for (st, sp) in states.iter().zip(&specs) {
            assert_eq!(st.capacity_mcpu, sp.res_req.times(3));
            assert_eq!(st.ceiling(sp), 3);
        }
        // Budgets now sum to exactly the current capacity.
        let total: Mcpu = states.iter().map(|s| s.capacity_mcpu).sum();
        assert_eq!(total, compute_current_capacity(&states, &specs));
    }

    #[test]
    fn update_capacities_is_idempotent_and_a_fixpoint_without_loss() {
        let specs = benchmark_cluster();
        let mut states = states_with_slots(&[5; 11], &specs);
        let before = states.clone();
        update_capacities(&mut states, &specs);
        assert_eq!(states, before, "full slots must leave budgets unchanged");

        let mut disrupted = states_with_slots(&[2; 11], &specs);
        update_capacities(&mut disrupted, &specs);
        let once = disrupted.clone();
        update_capacities(&mut disrupted, &specs);
        assert_eq!(disrupted, once);
    }

    #[test]
    fn single_slot_floor_keeps_service_alive() {
        let specs = benchmark_cluster();
        let mut states = states_with_slots(&[1; 11], &specs);
        update_capacities(&mut states, &specs);
        for (st, sp) in states.iter().zip(&specs) {
            assert_eq!(st.ceiling(sp), 1);
        }
    }
}
