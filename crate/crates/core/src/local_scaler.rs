//! Per-service manager: desired-replica computation, scaling decision,
//! feasibility check against the effective ceiling, and execution.
//!
//! Each service is evaluated independently; every function here is pure.

use crate::model::{FinalDecision, ScaleDecision, ServiceState};

/// `ceil(cr * rm / rmt)` computed exactly on tenth-of-a-percent integers.
pub fn compute_desired_replicas(cr: u32, rm_deci: u32, rmt_deci: u32) -> u32 {
    debug_assert!(cr >= 1 && rmt_deci > 0);
    let num = u64::from(cr) * u64::from(rm_deci);
    let den = u64::from(rmt_deci);
    num.div_ceil(den) as u32
}

/// Scale up when more replicas are desired, down when fewer are desired and
/// the minimum allows it, otherwise hold.
pub fn decide_scaling(dr: u32, cr: u32, min_replicas: u32) -> ScaleDecision {
    if dr > cr {
        ScaleDecision::ScaleUp
    } else if dr < cr && dr >= min_replicas {
        ScaleDecision::ScaleDown
    } else {
        ScaleDecision::NoScale
    }
}

/// True when the desired count cannot be satisfied within the effective
/// ceiling, which escalates the decision to the capacity layer.
pub fn check_feasibility(dr: u32, effective_max: u32) -> bool {
    dr > effective_max
}

/// Applies a final decision: replicas move to the desired count clamped to
/// `[min_replicas, slots]`. All other state is untouched.
pub fn execute_scale(
    state: &ServiceState,
    min_replicas: u32,
    decision: &FinalDecision,
) -> ServiceState {
    let mut next = state.clone();
    next.current_replicas = decision.res_desired.clamp(min_replicas, state.slots);
    next
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Mcpu;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn desired_replicas_hand_cases() {
        // ceil(2 * 75/50) = 3
        assert_eq!(compute_desired_replicas(2, 750, 500), 3);
        // rm == rmt keeps the count
        assert_eq!(compute_desired_replicas(3, 500, 500), 3);
        // ceil(4 * 10/50) = ceil(0.8) = 1
        assert_eq!(compute_desired_replicas(4, 100, 500), 1);
    }

    #[test]
    fn desired_replicas_matches_exact_rational_ceiling_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..100_000 {
            let cr = rng.gen_range(1u32..=50);
            let rm = rng.gen_range(0u32..=3000);
            let rmt = rng.gen_range(1u32..=1000);
            let got = compute_desired_replicas(cr, rm, rmt);
            // Oracle: exact ceiling of the rational cr*rm/rmt.
            let num = u64::from(cr) * u64::from(rm);
            let den = u64::from(rmt);
            let oracle = (num / den + u64::from(num % den != 0)) as u32;
            assert_eq!(got, oracle, "cr={cr} rm={rm} rmt={rmt}");
        }
    }

    #[test]
    fn desired_replicas_is_scale_invariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for _ in 0..10_000 {
            let cr = rng.gen_range(1u32..=20);
            let rm = rng.gen_range(0u32..=2000);
            let rmt = rng.gen_range(1u32..=1000);
            let k = rng.gen_range(1u32..=7);
            assert_eq!(
                compute_desired_replicas(cr, rm, rmt),
                compute_desired_replicas(cr, rm * k, rmt * k),
            );
        }
    }

    #[test]
    fn decisions_cover_all_branches() {
        assert_eq!(decide_scaling(3, 2, 1), ScaleDecision::ScaleUp);
        assert_eq!(decide_scaling(2, 4, 1), ScaleDecision::ScaleDown);
        assert_eq!(decide_scaling(0, 1, 1), ScaleDecision::NoScale);
    }

    #[test]
    fn equal_counts_never_flap() {
        for cr in 1..20 {
            assert_eq!(decide_scaling(cr, cr, 1), ScaleDecision::NoScale);
        }
    }

    #[test]
    fn feasibility_is_a_strict_comparison() {
        assert!(check_feasibility(6, 5));
        assert!(!check_feasibility(5, 5));
        assert!(!check_feasibility(0, 0));
    }

    fn state(cr: u32, slots: u32) -> ServiceState {
        ServiceState {
            current_replicas: cr,
            slots,
            utilization_deci: 0,
            capacity_mcpu: Mcpu::ZERO,
        }
    }

    fn decision(desired: u32) -> FinalDecision {
        FinalDecision {
            service: "svc".to_string(),
            res_decision: ScaleDecision::ScaleUp,
            res_desired: desired,
            res_max: desired,
        }
    }

    #[test]
    fn execute_lands_within_slots() {
        assert_eq!(
            execute_scale(&state(1, 5), 1, &decision(3)).current_replicas,
            3
        );
        assert_eq!(
            execute_scale(&state(1, 2), 1, &decision(4)).current_replicas,
            2
        );
        assert_eq!(
            execute_scale(&state(3, 5), 1, &decision(0)).current_replicas,
            1
        );
    }

    #[test]
    fn execute_bounds_hold_for_random_inputs() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for _ in 0..10_000 {
            let slots = rng.gen_range(1u32..=10);
            let min = rng.gen_range(1u32..=slots);
            let st = state(rng.gen_range(min..=slots), slots);
            let next = execute_scale(&st, min, &decision(rng.gen_range(0u32..=15)));
            assert!(next.current_replicas >= min && next.current_replicas <= slots);
            assert_eq!(next.slots, st.slots);
            assert_eq!(next.capacity_mcpu, st.capacity_mcpu);
        }
    }
}
