//! Core domain types: service specifications, runtime state, scaling
//! decisions, and scenario configuration.
//!
//! All CPU quantities are fixed-point tenths of a milliCPU ([`Mcpu`]) so
//! capacity sums, severities, and redistribution conservation checks are
//! exact. Every type here is a plain value object; there is no interior
//! mutability and everything is `Send + Sync`.

use std::fmt;
use std::iter::Sum;
use std::ops::{Add, AddAssign, Sub, SubAssign};

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

/// Tolerance when checking that demand weights sum to one.
const WEIGHT_SUM_EPSILON: f64 = 1e-6;

/// CPU quantity stored as integer tenths of a milliCPU.
///
/// 6350 mCPU is `Mcpu::from_tenths(63_500)`; 4762.5 mCPU is representable
/// exactly. Serialized as a plain JSON number in milliCPU.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Mcpu(i64);

impl Mcpu {
    pub const ZERO: Mcpu = Mcpu(0);

    pub const fn from_tenths(tenths: i64) -> Self {
        Mcpu(tenths)
    }

    /// Rounds to the nearest tenth of a milliCPU.
    pub fn from_mcpu(value: f64) -> Self {
        Mcpu((value * 10.0).round() as i64)
    }

    pub const fn tenths(self) -> i64 {
        self.0
    }

    pub fn as_mcpu(self) -> f64 {
        self.0 as f64 / 10.0
    }

    pub fn is_zero(self) -> bool {
        self.0 == 0
    }

    /// Multiplies by a replica count.
    pub fn times(self, count: u32) -> Mcpu {
        Mcpu(self.0 * i64::from(count))
    }

    /// How many whole replicas of `per_replica` fit into this budget.
    pub fn whole_replicas(self, per_replica: Mcpu) -> u32 {
        if per_replica.0 <= 0 || self.0 <= 0 {
            return 0;
        }
        u32::try_from(self.0 / per_replica.0).unwrap_or(u32::MAX)
    }

    pub fn saturating_sub(self, rhs: Mcpu) -> Mcpu {
        Mcpu(self.0.saturating_sub(rhs.0).max(0))
    }

    pub fn min(self, rhs: Mcpu) -> Mcpu {
        Mcpu(self.0.min(rhs.0))
    }

    pub fn max(self, rhs: Mcpu) -> Mcpu {
        Mcpu(self.0.max(rhs.0))
    }
}

impl Add for Mcpu {
    type Output = Mcpu;
    fn add(self, rhs: Mcpu) -> Mcpu {
        Mcpu(self.0 + rhs.0)
    }
}

impl Sub for Mcpu {
    type Output = Mcpu;
    fn sub(self, rhs: Mcpu) -> Mcpu {
        Mcpu(self.0 - rhs.0)
    }
}

impl AddAssign for Mcpu {
    fn add_assign(&mut self, rhs: Mcpu) {
        self.0 += rhs.0;
    }
}

impl SubAssign for Mcpu {
    fn sub_assign(&mut self, rhs: Mcpu) {
        self.0 -= rhs.0;
    }
}

impl Sum for Mcpu {
    fn sum<I: Iterator<Item = Mcpu>>(iter: I) -> Mcpu {
        iter.fold(Mcpu::ZERO, |acc, v| acc + v)
    }
}

impl fmt::Display for Mcpu {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:.1}", self.as_mcpu())
    }
}

impl Serialize for Mcpu {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_f64(self.as_mcpu())
    }
}

impl<'de> Deserialize<'de> for Mcpu {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let value = f64::deserialize(deserializer)?;
        Ok(Mcpu::from_mcpu(value))
    }
}

/// Static per-service configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ServiceSpec {
    /// Unique service name within the cluster.
    pub name: String,
    /// CPU request per replica.
    pub res_req: Mcpu,
    /// CPU limit per replica; usage above it is throttled away.
    pub res_limit: Mcpu,
    pub min_replicas: u32,
    pub max_replicas: u32,
    /// Utilization threshold in percent the scaler steers towards.
    pub threshold: f64,
    /// Fraction of per-user demand routed to this service.
    pub demand_weight: f64,
}

impl ServiceSpec {
    /// Threshold in tenths of a percent.
    pub fn threshold_deci(&self) -> u32 {
        (self.threshold * 10.0).round() as u32
    }

    /// Utilization ceiling in tenths of a percent (`100 * limit / request`).
    pub fn utilization_cap_deci(&self) -> u32 {
        let num = 1000 * self.res_limit.tenths();
        let den = self.res_req.tenths();
        ((num + den / 2) / den) as u32
    }
}

/// Dynamic per-service state carried across ticks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ServiceState {
    /// Replicas currently running.
    pub current_replicas: u32,
    /// Replica positions provisionable right now; shrinks on disruption.
    pub slots: u32,
    /// Last measured utilization in tenths of a percent.
    pub utilization_deci: u32,
    /// CPU budget this service currently owns; ceilings derive from it.
    pub capacity_mcpu: Mcpu,
}

impl ServiceState {
    /// Managed replica ceiling implied by the owned capacity budget.
    pub fn ceiling(&self, spec: &ServiceSpec) -> u32 {
        self.capacity_mcpu.whole_replicas(spec.res_req)
    }
}

/// Per-service scaling verdict.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ScaleDecision {
    ScaleUp,
    ScaleDown,
    NoScale,
}

impl fmt::Display for ScaleDecision {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ScaleDecision::ScaleUp => "scale_up",
            ScaleDecision::ScaleDown => "scale_down",
            ScaleDecision::NoScale => "no_scale",
        };
        f.write_str(s)
    }
}

/// One service's per-tick scaling report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingReport {
    pub service: String,
    pub desired_replicas: u32,
    pub decision: ScaleDecision,
    /// True when the desired count exceeds the service's effective ceiling.
    pub escalate: bool,
}

/// Cluster-level disruption verdict.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DisruptionStatus {
    NoDisruption,
    DisruptionIdentified,
}

/// Capacity-loss assessment for one tick.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DisruptionAssessment {
    /// Initial resource capacity.
    pub irc: Mcpu,
    /// Current resource capacity.
    pub crc: Mcpu,
    pub res_loss: Mcpu,
    pub status: DisruptionStatus,
    /// Loss as a percentage of the initial capacity.
    pub severity: f64,
}

/// Resource-aware final decision for one service.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FinalDecision {
    pub service: String,
    pub res_decision: ScaleDecision,
    pub res_desired: u32,
    /// Resource-wise replica ceiling after redistribution.
    pub res_max: u32,
}

/// Scenario execution mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// Full three-layer pipeline with capacity re-synchronization.
    Secure,
    /// Two-layer pipeline; capacity beliefs are never re-synchronized.
    Baseline,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Mode::Secure => f.write_str("secure"),
            Mode::Baseline => f.write_str("baseline"),
        }
    }
}

/// Optional capacity-destroying disruption event.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DisruptionConfig {
    /// Simulated time at which slots are destroyed.
    pub time_seconds: u64,
    /// Fraction of initial capacity to destroy, in percent.
    pub target_wastage_percent: f64,
}

fn default_noise() -> f64 {
    0.0
}

/// Whole-scenario configuration; the JSON config file mirrors this struct.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub services: Vec<ServiceSpec>,
    pub tick_seconds: u64,
    pub duration_seconds: u64,
    pub ramp_seconds: u64,
    pub peak_users: u64,
    /// Total CPU demand generated by one concurrent user.
    pub per_user_mcpu: Mcpu,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub disruption: Option<DisruptionConfig>,
    pub mode: Mode,
    pub seed: u64,
    /// Multiplicative demand noise amplitude in percent; 0 disables it.
    #[serde(default = "default_noise")]
    pub demand_noise_pct: f64,
}

/// Configuration rejection naming the violated field.
#[derive(Debug, Clone, Error, PartialEq)]
#[error("invalid config field `{field}`: {message}")]
pub struct ConfigError {
    pub field: String,
    pub message: String,
}

impl ConfigError {
    fn new(field: &str, message: impl Into<String>) -> Self {
        ConfigError {
            field: field.to_string(),
            message: message.into(),
        }
    }
}

/// Validates every type invariant and normalizes demand weights that sum
/// within `1e-6` of one to exactly one. Returns the config otherwise
/// unchanged.
pub fn validate_config(mut config: ScenarioConfig) -> Result<ScenarioConfig, ConfigError> {
    if config.services.is_empty() {
        return Err(ConfigError::new(
            "services",
            "at least one service is required",
        ));
    }
    if config.tick_seconds == 0 {
        return Err(ConfigError::new("tick_seconds", "must be positive"));
    }
    if config.ramp_seconds > config.duration_seconds {
        return Err(ConfigError::new(
            "ramp_seconds",
            "must not exceed duration_seconds",
        ));
    }
    if !(0.0..=100.0).contains(&config.demand_noise_pct) {
        return Err(ConfigError::new("demand_noise_pct", "must lie in [0, 100]"));
    }
    if let Some(d) = &config.disruption {
        if !(0.0..100.0).contains(&d.target_wastage_percent) {
            return Err(ConfigError::new(
                "disruption.target_wastage_percent",
                "must lie in [0, 100)",
            ));
        }
        if d.time_seconds >= config.duration_seconds {
            return Err(ConfigError::new(
                "disruption.time_seconds",
                "must fall before the end of the run",
            ));
        }
    }

    let mut seen = std::collections::BTreeSet::new();
    for spec in &config.services {
        let field = |suffix: &str| format!("services[{}].{}", spec.name, suffix);
        if spec.name.is_empty() {
            return Err(ConfigError::new("services[].name", "must be non-empty"));
        }
        if !seen.insert(spec.name.clone()) {
            return Err(ConfigError {
                field: field("name"),
                message: "duplicate service name".to_string(),
            });
        }
        if spec.res_req.tenths() <= 0 {
            return Err(ConfigError {
                field: field("res_req"),
                message: "must be positive".to_string(),
            });
        }
        if spec.res_limit < spec.res_req {
            return Err(ConfigError {
                field: field("res_limit"),
                message: "must be at least res_req".to_string(),
            });
        }
        if spec.min_replicas < 1 || spec.min_replicas > spec.max_replicas {
            return Err(ConfigError {
                field: field("min_replicas"),
                message: "requires 1 <= min_replicas <= max_replicas".to_string(),
            });
        }
        if !(spec.threshold > 0.0 && spec.threshold <= 100.0) {
            return Err(ConfigError {
                field: field("threshold"),
                message: "must lie in (0, 100]".to_string(),
            });
        }
        if spec.demand_weight < 0.0 || !spec.demand_weight.is_finite() {
            return Err(ConfigError {
                field: field("demand_weight"),
                message: "must be a finite non-negative number".to_string(),
            });
        }
    }

    let weight_sum: f64 = config.services.iter().map(|s| s.demand_weight).sum();
    // A few ulps of slack so sums sitting exactly on the boundary pass.
    if (weight_sum - 1.0).abs() > WEIGHT_SUM_EPSILON * (1.0 + 1e-6) {
        return Err(ConfigError::new(
            "services[].demand_weight",
            format!("weights sum to {weight_sum}, expected 1"),
        ));
    }
    if weight_sum != 1.0 {
        for spec in &mut config.services {
            spec.demand_weight /= weight_sum;
        }
    }

    Ok(config)
}

/// The 11-service e-commerce benchmark cluster: eight services at
/// 100m/200m, `cartservice` and `adservice` at 200m/300m, `redis` at
/// 70m/125m, all with 1..=5 replicas and a 50% threshold.
pub fn benchmark_cluster() -> Vec<ServiceSpec> {
    let entry = |name: &str, req: i64, limit: i64, weight: f64| ServiceSpec {
        name: name.to_string(),
        res_req: Mcpu::from_tenths(req * 10),
        res_limit: Mcpu::from_tenths(limit * 10),
        min_replicas: 1,
        max_replicas: 5,
        threshold: 50.0,
        demand_weight: weight,
    };
    vec![
        entry("frontend", 100, 200, 0.17),
        entry("cartservice", 200, 300, 0.1),
        entry("checkoutservice", 100, 200, 0.145),
        entry("productcatalogservice", 100, 200, 0.135),
        entry("recommendationservice", 100, 200, 0.125),
        entry("adservice", 200, 300, 0.05),
        entry("currencyservice", 100, 200, 0.0625),
        entry("emailservice", 100, 200, 0.0625),
        entry("paymentservice", 100, 200, 0.0625),
        entry("shippingservice", 100, 200, 0.0625),
        entry("redis", 70, 125, 0.025),
    ]
}

/// Bundled benchmark scenario: 5 replicas max per service, 50% threshold,
/// a 5-minute ramp to 600 users, and 15 minutes of simulated time.
pub fn benchmark_config() -> ScenarioConfig {
    ScenarioConfig {
        services: benchmark_cluster(),
        tick_seconds: 15,
        duration_seconds: 900,
        ramp_seconds: 300,
        peak_users: 600,
        per_user_mcpu: Mcpu::from_mcpu(3.7),
        disruption: None,
        mode: Mode::Secure,
        seed: 42,
        demand_noise_pct: 14.0,
    }
}
