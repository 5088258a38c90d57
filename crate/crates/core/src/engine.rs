//! Discrete-time engine: workload measurement, per-service managers,
//! capacity assessment, resource exchange, and capacity-bounded execution,
//! in Secure or Baseline mode.
//!
//! Physical model: the cluster owns one fungible pool of surviving CPU
//! capacity. A disruption burns part of the pool (recorded as destroyed
//! replica slots); execution admits replicas against the pool, so capacity
//! freed by one service can host another service's replicas. Per-service
//! `slots` track how many replicas each service could hold right now and
//! always bound `current_replicas`.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::capacity::{assess, update_capacities, CapacityInversion};
use crate::disruption::{inject, scheduled_tick, TargetUnreachable};
use crate::local_scaler::{check_feasibility, compute_desired_replicas, decide_scaling};
use crate::metrics::{
    cpu_overprovision, cpu_overutilization, cpu_underprovision, supply_cpu, EmitError,
    MetricSample, ServiceSample, Sinks,
};
use crate::model::{
    validate_config, ConfigError, DisruptionAssessment, DisruptionStatus, FinalDecision, Mcpu,
    Mode, ScalingReport, ScenarioConfig, ServiceSpec, ServiceState,
};
use crate::resource::{classify, finalize, redistribute, ExchangeStats};
use crate::workload::{service_demand, users_at, utilization};

/// Metrics before this time are excluded from run-level means.
pub const WARMUP_SECONDS: u64 = 60;

#[derive(Debug, Error)]
pub enum EngineError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Emit(#[from] EmitError),
    #[error(transparent)]
    Disruption(#[from] TargetUnreachable),
    #[error(transparent)]
    Capacity(#[from] CapacityInversion),
}

/// Slots destroyed for one service by an injection.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SlotRemoval {
    pub service: String,
    pub removed: u32,
}

/// A fired disruption, as appended to the capacity knowledge base.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InjectionEvent {
    pub event: String,
    pub nominal_target_pct: f64,
    pub actual_wastage_mcpu: Mcpu,
    pub slots_removed: Vec<SlotRemoval>,
}

/// Everything one tick produced.
#[derive(Debug, Clone)]
pub struct TickRecord {
    pub sample: MetricSample,
    pub reports: Vec<ScalingReport>,
    pub assessment: Option<DisruptionAssessment>,
    pub decisions: Vec<FinalDecision>,
    pub exchange: Option<ExchangeStats>,
}

/// Run-level aggregate written to `summary.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub mode: Mode,
    pub seed: u64,
    pub severity_target_pct: Option<f64>,
    pub actual_wastage_mcpu: Option<Mcpu>,
    pub ticks: u64,
    pub warmup_seconds: u64,
    pub mean_supply_cpu: f64,
    pub mean_overutil_pct: f64,
    pub mean_overutil_mcpu: f64,
    pub mean_underprov_mcpu: f64,
    pub mean_overprov_mcpu: f64,
}

/// Output of [`run`]: the summary, every sample, and where files went.
#[derive(Debug, Clone)]
pub struct RunResult {
    pub summary: RunSummary,
    pub samples: Vec<MetricSample>,
    pub injection: Option<InjectionEvent>,
    pub out_dir: Option<PathBuf>,
}

impl RunResult {
    /// Paths of the emitted files, when the run wrote any.
    pub fn paths(&self) -> Vec<PathBuf> {
        match &self.out_dir {
            None => Vec::new(),
            Some(dir) => [
                Sinks::TIMESERIES,
                Sinks::KB_MICROSERVICE,
                Sinks::KB_CAPACITY,
                Sinks::KB_RESOURCE,
                Sinks::SUMMARY,
            ]
            .iter()
            .map(|name| dir.join(name))
            .collect(),
        }
    }
}

pub struct SimEngine {
    config: ScenarioConfig,
    states: Vec<ServiceState>,
    cluster_capacity: Mcpu,
    irc: Mcpu,
    tick_index: u64,
    injection_tick: Option<u64>,
    injection: Option<(u64, InjectionEvent)>,
    rng_disruption: ChaCha8Rng,
    rng_noise: ChaCha8Rng,
}

impl SimEngine {
    /// Builds an engine from a validated config. Services are processed in
    /// name order throughout, so the input order never affects results.
    pub fn new(mut config: ScenarioConfig) -> Result<Self, ConfigError> {
        // Sort before validating so weight normalization sees one canonical
        // order and permuted configs produce bit-identical runs.
        config.services.sort_by(|a, b| a.name.cmp(&b.name));
        let config = validate_config(config)?;
        let irc: Mcpu = config
            .services
            .iter()
            .map(|s| s.res_req.times(s.max_replicas))
            .sum();
        let states: Vec<ServiceState> = config
            .services
            .iter()
            .map(|sp| ServiceState {
                current_replicas: sp.min_replicas,
                slots: sp.min_replicas,
                utilization_deci: 0,
                capacity_mcpu: sp.res_req.times(sp.max_replicas),
            })
            .collect();
        // Independent streams so demand noise never perturbs injection draws.
        let mut rng_disruption = ChaCha8Rng::seed_from_u64(config.seed);
        rng_disruption.set_stream(1);
        let mut rng_noise = ChaCha8Rng::seed_from_u64(config.seed);
        rng_noise.set_stream(2);
        let mut engine = SimEngine {
            injection_tick: scheduled_tick(&config),
            config,
            states,
            cluster_capacity: irc,
            irc,
            tick_index: 0,
            injection: None,
            rng_disruption,
            rng_noise,
        };
        engine.repartition_slots();
        engine.assert_replica_bounds();
        Ok(engine)
    }

    pub fn specs(&self) -> &[ServiceSpec] {
        &self.config.services
    }

    pub fn states(&self) -> &[ServiceState] {
        &self.states
    }

    pub fn cluster_capacity(&self) -> Mcpu {
        self.cluster_capacity
    }

    pub fn total_ticks(&self) -> u64 {
        self.config
            .duration_seconds
            .div_ceil(self.config.tick_seconds)
    }

    fn assert_replica_bounds(&self) {
        for (state, spec) in self.states.iter().zip(&self.config.services) {
            assert!(
                state.current_replicas <= state.slots,
                "{}: replicas {} exceed slots {}",
                spec.name,
                state.current_replicas,
                state.slots
            );
            assert!(
                state.current_replicas >= spec.min_replicas.min(state.slots),
                "{}: replicas {} below minimum {}",
                spec.name,
                state.current_replicas,
                spec.min_replicas
            );
        }
    }

    /// Assigns the pool's free capacity to services as provisionable slots,
    /// one replica per round-robin pass.
    fn repartition_slots(&mut self) {
        let supply: Mcpu = self
            .states
            .iter()
            .zip(&self.config.services)
            .map(|(st, sp)| sp.res_req.times(st.current_replicas))
            .sum();
        let mut free = self.cluster_capacity - supply;
        for state in &mut self.states {
            state.slots = state.current_replicas;
        }
        loop {
            let mut progressed = false;
            for (state, spec) in self.states.iter_mut().zip(&self.config.services) {
                if free >= spec.res_req {
                    state.slots += 1;
                    free -= spec.res_req;
                    progressed = true;
                }
            }
            if !progressed {
                break;
            }
        }
    }

    fn fire_injection(&mut self, t: u64) -> Result<(), TargetUnreachable> {
        let target = self
            .config
            .disruption
            .as_ref()
            .expect("injection fires only when configured")
            .target_wastage_percent;
        let before: Vec<u32> = self.states.iter().map(|s| s.slots).collect();
        let wastage = inject(
            &mut self.states,
            &self.config.services,
            target,
            &mut self.rng_disruption,
        )?;
        self.cluster_capacity -= wastage;
        // Destroyed slots take their replicas with them.
        for state in &mut self.states {
            state.current_replicas = state.current_replicas.min(state.slots);
        }
        let slots_removed = self
            .states
            .iter()
            .zip(&self.config.services)
            .zip(before)
            .filter(|((st, _), before)| st.slots < *before)
            .map(|((st, sp), before)| SlotRemoval {
                service: sp.name.clone(),
                removed: before - st.slots,
            })
            .collect();
        self.injection = Some((
            t,
            InjectionEvent {
                event: "disruption_injection".to_string(),
                nominal_target_pct: target,
                actual_wastage_mcpu: wastage,
                slots_removed,
            },
        ));
        Ok(())
    }

    /// Admits replicas against the capacity pool. Feasible ask sets are
    /// executed verbatim. When the asks over-subscribe the pool, the
    /// scheduler cannot honor placements: every pending replica competes,
    /// and the allocation churns toward pod-count fair share, one replica
    /// per round-robin pass above the per-service minimum, until nothing
    /// more fits.
    fn admit(&mut self, wants: &[u32]) {
        let n = self.states.len();
        let asked: Mcpu = (0..n)
            .map(|i| self.config.services[i].res_req.times(wants[i]))
            .sum();
        if asked <= self.cluster_capacity {
            for (state, &want) in self.states.iter_mut().zip(wants) {
                state.current_replicas = want;
            }
            return;
        }

        let mut admitted: Vec<u32> = (0..n)
            .map(|i| self.config.services[i].min_replicas.min(wants[i]))
            .collect();
        let used: Mcpu = (0..n)
            .map(|i| self.config.services[i].res_req.times(admitted[i]))
            .sum();
        let mut free = self.cluster_capacity - used;
        loop {
            let mut progressed = false;
            for i in 0..n {
                let req = self.config.services[i].res_req;
                if admitted[i] < wants[i] && free >= req {
                    admitted[i] += 1;
                    free -= req;
                    progressed = true;
                }
            }
            if !progressed {
                break;
            }
        }
        for (state, admitted) in self.states.iter_mut().zip(admitted) {
            state.current_replicas = admitted;
        }
    }

    /// Runs one control interval and advances the clock.
    pub fn tick(&mut self) -> Result<TickRecord, EngineError> {
        let t = self.tick_index * self.config.tick_seconds;
        let specs_len = self.config.services.len();

        if Some(self.tick_index) == self.injection_tick && self.injection.is_none() {
            self.fire_injection(t)?;
        }

        // Refresh capacity budgets. A manager's budget is what it believes
        // it may provision this tick: Baseline always re-derives it from
        // the configured ceilings, so destroyed slots go unnoticed; Secure
        // runs the capacity layer, which replaces the belief with what the
        // surviving slots can actually host.
        for (state, spec) in self.states.iter_mut().zip(&self.config.services) {
            state.capacity_mcpu = spec.res_req.times(spec.max_replicas);
        }
        let assessment = if self.config.mode == Mode::Secure {
            let assessment = assess(self.irc, self.cluster_capacity)?;
            if assessment.status == DisruptionStatus::DisruptionIdentified {
                update_capacities(&mut self.states, &self.config.services);
                // Hand the sub-replica partition remainder to the first
                // service so budgets sum to the surviving pool exactly.
                let owned: Mcpu = self.states.iter().map(|s| s.capacity_mcpu).sum();
                self.states[0].capacity_mcpu += self.cluster_capacity - owned;
            }
            Some(assessment)
        } else {
            None
        };

        // Measure: demand and utilization against start-of-tick replicas.
        let users = users_at(t, &self.config);
        let noise = self.config.demand_noise_pct;
        let mut demands = Vec::with_capacity(specs_len);
        for spec in &self.config.services {
            let mut demand = service_demand(users, spec, &self.config);
            if noise > 0.0 {
                let u: f64 = rand::Rng::gen(&mut self.rng_noise);
                let factor = 1.0 + noise / 100.0 * (2.0 * u - 1.0);
                demand = Mcpu::from_tenths((demand.tenths() as f64 * factor).round() as i64);
            }
            demands.push(demand);
        }
        for ((state, spec), demand) in self
            .states
            .iter_mut()
            .zip(&self.config.services)
            .zip(&demands)
        {
            let rm = utilization(*demand, state, spec).expect("replica counts stay positive");
            state.utilization_deci = rm;
        }
        let measured = self.states.clone();

        // Local managers: desire, decide, and flag infeasible desires.
        let effective_ceilings: Vec<u32> = self
            .states
            .iter()
            .zip(&self.config.services)
            .map(|(st, sp)| st.ceiling(sp))
            .collect();
        let reports: Vec<ScalingReport> = (0..specs_len)
            .map(|i| {
                let spec = &self.config.services[i];
                let state = &self.states[i];
                let dr = compute_desired_replicas(
                    state.current_replicas,
                    state.utilization_deci,
                    spec.threshold_deci(),
                );
                ScalingReport {
                    service: spec.name.clone(),
                    desired_replicas: dr,
                    decision: decide_scaling(dr, state.current_replicas, spec.min_replicas),
                    escalate: check_feasibility(dr, effective_ceilings[i]),
                }
            })
            .collect();

        // Resource layer: exchange only when some desire is infeasible.
        let mut exchange = None;
        let decisions: Vec<FinalDecision> = if reports.iter().any(|r| r.escalate) {
            let (under, over) = classify(&reports, &effective_ceilings, &self.config.services);
            let mut capacities: BTreeMap<String, Mcpu> = self
                .config
                .services
                .iter()
                .zip(&self.states)
                .map(|(sp, st)| (sp.name.clone(), st.capacity_mcpu))
                .collect();
            exchange = Some(redistribute(
                &under,
                &over,
                &mut capacities,
                &reports,
                &self.config.services,
            ));
            for (spec, state) in self.config.services.iter().zip(&mut self.states) {
                state.capacity_mcpu = capacities[&spec.name];
            }
            (0..specs_len)
                .map(|i| {
                    finalize(
                        &reports[i],
                        effective_ceilings[i],
                        self.states[i].capacity_mcpu,
                        &self.states[i],
                        &self.config.services[i],
                    )
                })
                .collect()
        } else {
            (0..specs_len)
                .map(|i| FinalDecision {
                    service: reports[i].service.clone(),
                    res_decision: reports[i].decision,
                    res_desired: reports[i].desired_replicas.min(effective_ceilings[i]),
                    res_max: effective_ceilings[i],
                })
                .collect()
        };

        // Execute: admit replicas against surviving capacity.
        let wants: Vec<u32> = decisions
            .iter()
            .zip(&self.config.services)
            .map(|(d, sp)| d.res_desired.max(sp.min_replicas))
            .collect();
        self.admit(&wants);
        self.repartition_slots();
        self.assert_replica_bounds();

        // Metrics: utilization pieces use the measurement snapshot.
        let (overutil_pct, overutil_mcpu) = cpu_overutilization(&measured, &self.config.services);
        let final_ceilings: Vec<u32> = decisions.iter().map(|d| d.res_max).collect();
        let sample = MetricSample {
            t,
            supply_cpu: supply_cpu(&self.states, &self.config.services),
            overutilization_pct: overutil_pct,
            overutilization_mcpu: overutil_mcpu,
            underprovision_mcpu: cpu_underprovision(
                &reports,
                &final_ceilings,
                &self.config.services,
            ),
            overprovision_mcpu: cpu_overprovision(&reports, &final_ceilings, &self.config.services),
            per_service: (0..specs_len)
                .map(|i| ServiceSample {
                    name: self.config.services[i].name.clone(),
                    current_replicas: self.states[i].current_replicas,
                    desired_replicas: reports[i].desired_replicas,
                    utilization_pct: measured[i].utilization_deci as f64 / 10.0,
                    effective_max: final_ceilings[i],
                    slots: self.states[i].slots,
                })
                .collect(),
        };

        self.tick_index += 1;
        Ok(TickRecord {
            sample,
            reports,
            assessment,
            decisions,
            exchange,
        })
    }

    fn take_injection(&mut self) -> Option<(u64, InjectionEvent)> {
        self.injection.take()
    }
}

fn mean<F: Fn(&MetricSample) -> f64>(samples: &[MetricSample], f: F) -> f64 {
    let post_warmup: Vec<f64> = samples
        .iter()
        .filter(|s| s.t >= WARMUP_SECONDS)
        .map(f)
        .collect();
    if post_warmup.is_empty() {
        0.0
    } else {
        post_warmup.iter().sum::<f64>() / post_warmup.len() as f64
    }
}

/// Executes a whole scenario. When `out_dir` is given, the time series,
/// the three knowledge-base streams, and `summary.json` are written there.
pub fn run(config: &ScenarioConfig, out_dir: Option<&Path>) -> Result<RunResult, EngineError> {
    let mut sinks = match out_dir {
        Some(dir) => Some(Sinks::open(dir)?),
        None => None,
    };
    let mut engine = SimEngine::new(config.clone())?;
    let config = engine.config.clone();
    let mut samples = Vec::with_capacity(engine.total_ticks() as usize);
    let mut injection_event = None;

    for _ in 0..engine.total_ticks() {
        let record = engine.tick()?;
        if let Some((t, event)) = engine.take_injection() {
            if let Some(sinks) = sinks.as_mut() {
                sinks.emit_injection(t, &event)?;
            }
            injection_event = Some(event);
        }
        if let Some(sinks) = sinks.as_mut() {
            sinks.emit(
                &record.sample,
                &record.reports,
                record.assessment.as_ref(),
                &record.decisions,
            )?;
        }
        samples.push(record.sample);
    }

    let summary = RunSummary {
        mode: config.mode,
        seed: config.seed,
        severity_target_pct: config.disruption.as_ref().map(|d| d.target_wastage_percent),
        actual_wastage_mcpu: injection_event.as_ref().map(|e| e.actual_wastage_mcpu),
        ticks: samples.len() as u64,
        warmup_seconds: WARMUP_SECONDS,
        mean_supply_cpu: mean(&samples, |s| s.supply_cpu.as_mcpu()),
        mean_overutil_pct: mean(&samples, |s| s.overutilization_pct),
        mean_overutil_mcpu: mean(&samples, |s| s.overutilization_mcpu.as_mcpu()),
        mean_underprov_mcpu: mean(&samples, |s| s.underprovision_mcpu.as_mcpu()),
        mean_overprov_mcpu: mean(&samples, |s| s.overprovision_mcpu.as_mcpu()),
    };
    if let Some(sinks) = sinks {
        sinks.finish(&summary)?;
    }
    Ok(RunResult {
        summary,
        samples,
        injection: injection_event,
        out_dir: out_dir.map(Path::to_path_buf),
    })
}
