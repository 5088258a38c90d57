//! Per-tick evaluation metrics, their time series, and the knowledge-base
//! sinks (CSV time series plus one JSONL stream per manager layer).

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{
    DisruptionAssessment, FinalDecision, Mcpu, ScalingReport, ServiceSpec, ServiceState,
};

/// Sink failure annotated with the offending path.
#[derive(Debug, Error)]
#[error("metrics sink {path:?}: {source}")]
pub struct EmitError {
    pub path: PathBuf,
    #[source]
    pub source: std::io::Error,
}

/// Per-service detail carried alongside each sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ServiceSample {
    pub name: String,
    pub current_replicas: u32,
    pub desired_replicas: u32,
    /// Measured utilization in percent.
    pub utilization_pct: f64,
    pub effective_max: u32,
    pub slots: u32,
}

/// One tick's metric values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricSample {
    pub t: u64,
    pub supply_cpu: Mcpu,
    /// Mean over services of utilization percentage points above threshold.
    pub overutilization_pct: f64,
    pub overutilization_mcpu: Mcpu,
    pub underprovision_mcpu: Mcpu,
    pub overprovision_mcpu: Mcpu,
    pub per_service: Vec<ServiceSample>,
}

/// CPU allocated to running replicas: `sum(current_replicas * res_req)`.
pub fn supply_cpu(states: &[ServiceState], specs: &[ServiceSpec]) -> Mcpu {
    states
        .iter()
        .zip(specs)
        .map(|(st, sp)| sp.res_req.times(st.current_replicas))
        .sum()
}

/// Usage above threshold, both as mean percentage points over services and
/// as total mCPU. Uses each state's measured utilization and the replica
/// count it was measured against.
pub fn cpu_overutilization(states: &[ServiceState], specs: &[ServiceSpec]) -> (f64, Mcpu) {
    debug_assert_eq!(states.len(), specs.len());
    if states.is_empty() {
        return (0.0, Mcpu::ZERO);
    }
    let mut pct_points = 0.0;
    let mut excess = Mcpu::ZERO;
    for (st, sp) in states.iter().zip(specs) {
        let rm = st.utilization_deci as i64;
        let rmt = sp.threshold_deci() as i64;
        if rm > rmt {
            pct_points += (rm - rmt) as f64 / 10.0;
            let allocated = sp.res_req.times(st.current_replicas).tenths();
            // (RM - RMT)/100 of the allocation, on deci-percent integers.
            excess += Mcpu::from_tenths(((rm - rmt) * allocated + 500) / 1000);
        }
    }
    (pct_points / states.len() as f64, excess)
}

/// Demanded-but-unavailable CPU: `sum(max(0, desired - ceiling) * res_req)`.
pub fn cpu_underprovision(
    reports: &[ScalingReport],
    ceilings: &[u32],
    specs: &[ServiceSpec],
) -> Mcpu {
    reports
        .iter()
        .zip(ceilings)
        .zip(specs)
        .map(|((r, &max), sp)| sp.res_req.times(r.desired_replicas.max(max) - max))
        .sum()
}

/// Allocated-but-unwanted CPU: `sum(max(0, ceiling - desired) * res_req)`.
pub fn cpu_overprovision(
    reports: &[ScalingReport],
    ceilings: &[u32],
    specs: &[ServiceSpec],
) -> Mcpu {
    reports
        .iter()
        .zip(ceilings)
        .zip(specs)
        .map(|((r, &max), sp)| {
            sp.res_req
                .times(max.max(r.desired_replicas) - r.desired_replicas)
        })
        .sum()
}

const CSV_HEADER: &str = "t,supply_cpu,overutil_pct,overutil_mcpu,underprov_mcpu,overprov_mcpu";

#[derive(Serialize)]
struct TimedRecord<'a, T: Serialize> {
    t: u64,
    #[serde(flatten)]
    record: &'a T,
}

/// Open files backing one run's outputs.
pub struct Sinks {
    out_dir: PathBuf,
    timeseries: BufWriter<File>,
    kb_microservice: BufWriter<File>,
    kb_capacity: BufWriter<File>,
    kb_resource: BufWriter<File>,
}

impl Sinks {
    pub const TIMESERIES: &'static str = "timeseries.csv";
    pub const KB_MICROSERVICE: &'static str = "kb_microservice.jsonl";
    pub const KB_CAPACITY: &'static str = "kb_capacity.jsonl";
    pub const KB_RESOURCE: &'static str = "kb_resource.jsonl";
    pub const SUMMARY: &'static str = "summary.json";

    pub fn open(out_dir: &Path) -> Result<Self, EmitError> {
        std::fs::create_dir_all(out_dir).map_err(|source| EmitError {
            path: out_dir.to_path_buf(),
            source,
        })?;
        let create = |name: &str| -> Result<BufWriter<File>, EmitError> {
            let path = out_dir.join(name);
            File::create(&path)
                .map(BufWriter::new)
                .map_err(|source| EmitError { path, source })
        };
        let mut sinks = Sinks {
            out_dir: out_dir.to_path_buf(),
            timeseries: create(Self::TIMESERIES)?,
            kb_microservice: create(Self::KB_MICROSERVICE)?,
            kb_capacity: create(Self::KB_CAPACITY)?,
            kb_resource: create(Self::KB_RESOURCE)?,
        };
        let header = format!("{CSV_HEADER}\n");
        sinks.write_timeseries(&header)?;
        Ok(sinks)
    }

    fn write_timeseries(&mut self, line: &str) -> Result<(), EmitError> {
        let path = self.out_dir.join(Self::TIMESERIES);
        self.timeseries
            .write_all(line.as_bytes())
            .map_err(|source| EmitError { path, source })
    }

    fn write_jsonl<T: Serialize>(
        sink: &mut BufWriter<File>,
        path: PathBuf,
        t: u64,
        record: &T,
    ) -> Result<(), EmitError> {
        let line = serde_json::to_string(&TimedRecord { t, record })
            .expect("knowledge-base records serialize infallibly");
        sink.write_all(line.as_bytes())
            .and_then(|_| sink.write_all(b"\n"))
            .map_err(|source| EmitError { path, source })
    }

    /// Appends one CSV row plus the per-layer knowledge-base lines.
    pub fn emit(
        &mut self,
        sample: &MetricSample,
        reports: &[ScalingReport],
        assessment: Option<&DisruptionAssessment>,
        decisions: &[FinalDecision],
    ) -> Result<(), EmitError> {
        let row = format!(
            "{:.1},{:.1},{:.1},{:.1},{:.1},{:.1}\n",
            sample.t as f64,
            sample.supply_cpu.as_mcpu(),
            sample.overutilization_pct,
            sample.overutilization_mcpu.as_mcpu(),
            sample.underprovision_mcpu.as_mcpu(),
            sample.overprovision_mcpu.as_mcpu(),
        );
        self.write_timeseries(&row)?;

        for report in reports {
            Self::write_jsonl(
                &mut self.kb_microservice,
                self.out_dir.join(Self::KB_MICROSERVICE),
                sample.t,
                report,
            )?;
        }
        if let Some(assessment) = assessment {
            Self::write_jsonl(
                &mut self.kb_capacity,
                self.out_dir.join(Self::KB_CAPACITY),
                sample.t,
                assessment,
            )?;
        }
        for decision in decisions {
            Self::write_jsonl(
                &mut self.kb_resource,
                self.out_dir.join(Self::KB_RESOURCE),
                sample.t,
                decision,
            )?;
        }
        Ok(())
    }

    /// Appends an injection event to the capacity knowledge base.
    pub fn emit_injection<T: Serialize>(&mut self, t: u64, event: &T) -> Result<(), EmitError> {
        Self::write_jsonl(
            &mut self.kb_capacity,
            self.out_dir.join(Self::KB_CAPACITY),
            t,
            event,
        )
    }

    /// Writes the run summary and flushes every sink.
    pub fn finish<T: Serialize>(mut self, summary: &T) -> Result<(), EmitError> {
        let path = self.out_dir.join(Self::SUMMARY);
        let body = serde_json::to_string_pretty(summary).expect("summaries serialize infallibly");
        std::fs::write(&path, body + "\n").map_err(|source| EmitError {
            path: path.clone(),
            source,
        })?;
        let flush = |w: &mut BufWriter<File>, path: PathBuf| -> Result<(), EmitError> {
            w.flush().map_err(|source| EmitError { path, source })
        };
        flush(&mut self.timeseries, self.out_dir.join(Self::TIMESERIES))?;
        flush(
            &mut self.kb_microservice,
            self.out_dir.join(Self::KB_MICROSERVICE),
        )?;
        flush(&mut self.kb_capacity, self.out_dir.join(Self::KB_CAPACITY))?;
        flush(&mut self.kb_resource, self.out_dir.join(Self::KB_RESOURCE))?;
        Ok(())
    }
}
