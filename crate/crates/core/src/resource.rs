//! Cluster resource manager: classifies over- and underprovisioned
//! services, greedily moves surplus capacity to the largest shortfalls,
//! and finalizes resource-aware scaling decisions.
//!
//! Transfers are denominated in raw tenths of a milliCPU; replica ceilings
//! are derived by floor division afterwards, so the total budget is
//! conserved exactly.

use std::collections::BTreeMap;

use crate::model::{FinalDecision, Mcpu, ScaleDecision, ScalingReport, ServiceSpec, ServiceState};

/// One entry of the underprovision or overprovision list.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProvisionGap {
    pub service: String,
    pub amount: Mcpu,
}

/// Pool accounting for one redistribution pass.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ExchangeStats {
    pub total_need: Mcpu,
    pub total_surplus: Mcpu,
    pub transferred: Mcpu,
    /// Need left over once every donor ran dry.
    pub unmet: Mcpu,
}

fn sort_gaps(gaps: &mut [ProvisionGap]) {
    gaps.sort_by(|a, b| b.amount.cmp(&a.amount).then(a.service.cmp(&b.service)));
}

/// Splits services into shortfalls (`desired > ceiling`) and surpluses,
/// both in mCPU and sorted descending by amount with name ties ascending.
pub fn classify(
    reports: &[ScalingReport],
    ceilings: &[u32],
    specs: &[ServiceSpec],
) -> (Vec<ProvisionGap>, Vec<ProvisionGap>) {
    debug_assert_eq!(reports.len(), specs.len());
    debug_assert_eq!(reports.len(), ceilings.len());
    let mut underprov = Vec::new();
    let mut overprov = Vec::new();
    for ((report, &ceiling), spec) in reports.iter().zip(ceilings).zip(specs) {
        debug_assert_eq!(report.service, spec.name);
        if report.desired_replicas > ceiling {
            underprov.push(ProvisionGap {
                service: spec.name.clone(),
                amount: spec.res_req.times(report.desired_replicas - ceiling),
            });
        } else {
            overprov.push(ProvisionGap {
                service: spec.name.clone(),
                amount: spec.res_req.times(ceiling - report.desired_replicas),
            });
        }
    }
    sort_gaps(&mut underprov);
    sort_gaps(&mut overprov);
    (underprov, overprov)
}

/// Moves surplus capacity to shortfalls, most-underprovisioned first,
/// drawing from the largest remaining donor each time. A donor's budget
/// never drops below `desired * res_req`; the walk stops when every need
/// is met or every donor is dry.
pub fn redistribute(
    underprov: &[ProvisionGap],
    overprov: &[ProvisionGap],
    capacities: &mut BTreeMap<String, Mcpu>,
    reports: &[ScalingReport],
    specs: &[ServiceSpec],
) -> ExchangeStats {
    let floors: BTreeMap<&str, Mcpu> = reports
        .iter()
        .zip(specs)
        .map(|(r, s)| (s.name.as_str(), s.res_req.times(r.desired_replicas)))
        .collect();

    let mut stats = ExchangeStats {
        total_need: underprov.iter().map(|g| g.amount).sum(),
        total_surplus: overprov.iter().map(|g| g.amount).sum(),
        ..ExchangeStats::default()
    };

    // (remaining surplus, name) per donor, in the classify order.
    let mut donors: Vec<(Mcpu, &str)> = overprov
        .iter()
        .map(|g| (g.amount, g.service.as_str()))
        .collect();

    for receiver in underprov {
        let mut remaining = receiver.amount;
        for donor in donors.iter_mut() {
            if remaining.is_zero() {
                break;
            }
            let donor_capacity = capacities.get(donor.1).copied().unwrap_or(Mcpu::ZERO);
            let floor = floors.get(donor.1).copied().unwrap_or(Mcpu::ZERO);
            let drawable = donor.0.min(donor_capacity.saturating_sub(floor));
            let moved = drawable.min(remaining);
            if moved.is_zero() {
                continue;
            }
            donor.0 -= moved;
            remaining -= moved;
            stats.transferred += moved;
            *capacities.entry(donor.1.to_string()).or_insert(Mcpu::ZERO) -= moved;
            *capacities
                .entry(receiver.service.clone())
                .or_insert(Mcpu::ZERO) += moved;
        }
        stats.unmet += remaining;
    }
    stats
}

/// Resolves the final decision for one service from its post-exchange
/// budget. `old_max` is the effective ceiling before redistribution.
pub fn finalize(
    report: &ScalingReport,
    old_max: u32,
    new_capacity: Mcpu,
    state: &ServiceState,
    spec: &ServiceSpec,
) -> FinalDecision {
    let res_max = new_capacity.whole_replicas(spec.res_req);
    let dr = report.desired_replicas;
    let (res_decision, res_desired) = if res_max >= dr {
        (report.decision, dr)
    } else if res_max >= old_max && res_max > state.current_replicas {
        // The budget covers part of the desire and actually adds replicas.
        (ScaleDecision::ScaleUp, res_max)
    } else {
        // No replicas gained; hold the current count.
        (ScaleDecision::NoScale, state.current_replicas)
    };
    FinalDecision {
        service: report.service.clone(),
        res_decision,
        res_desired,
        res_max,
    }
}
