//! Deterministic microservice simulator with ground truth.
//!
//! A run pushes a Poisson request workload through the service DAG, applies
//! the scenario's faults, and derives metrics, alerts and customer tickets
//! from what happened. Causal fault attribution travels with every call, so
//! the ground truth knows which incident each alert and ticket stems from.

mod bundled;
mod engine;
mod kpi;
mod scenario;
mod sessions;

use std::collections::BTreeMap;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use bundled::{fig2, intensity_probe, rca_scenario, resilience_chain, IntensityProbe};
pub use engine::{CallRecord, RequestRecord};
pub use kpi::{drift_series, kpi_suite, DriftSeries, KpiSeries, KPI_PERIOD};
pub use scenario::{
    AlertMetric, AlertRule, CustomerModel, EdgeSpec, Effects, EntryWeight, FaultSpec, FaultType, Product, Scenario,
    ServiceSpec, Workload, BUSINESS_METRICS, BUSINESS_SERVICE, CLIENT, E2E_P95_LATENCY, E2E_SUCCESS_RATE,
};
pub use sessions::{session_workload, LabeledSessions, FAILURE_TYPES, NORMAL};

use crate::depgraph::percentile_nearest_rank;
use crate::error::{Error, Result};
use crate::telemetry::{store_stream, Alert, LogRecord, MetricSeries, RecordKind, Ticket, TraceSpan};
use engine::{fill_template, mix, Attempt};

pub const GROUND_TRUTH_FILE: &str = "groundtruth.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IncidentTruth {
    pub incident_id: String,
    pub fault: FaultSpec,
    /// Services with at least one call failed or slowed by the fault.
    pub affected_services: Vec<String>,
    pub start_ts: i64,
    pub end_ts: i64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub scenario: String,
    pub seed: u64,
    pub incidents: Vec<IncidentTruth>,
    /// Incident id per ticket id, `None` for unrelated tickets.
    pub tickets: BTreeMap<String, Option<String>>,
    /// Incident id per alert id.
    pub alerts: BTreeMap<String, Option<String>>,
    /// Faulted service when the scenario has exactly one fault.
    pub culprit: Option<String>,
}

impl GroundTruth {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Telemetry {
    pub metrics: Vec<MetricSeries>,
    pub logs: Vec<LogRecord>,
    pub spans: Vec<TraceSpan>,
    pub alerts: Vec<Alert>,
    pub tickets: Vec<Ticket>,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub telemetry: Telemetry,
    pub truth: GroundTruth,
    /// Service ids, indexing `calls` and `requests`.
    pub services: Vec<String>,
    pub calls: Vec<CallRecord>,
    pub requests: Vec<RequestRecord>,
}

impl RunOutput {
    /// Writes the five telemetry files and the ground truth into `dir`,
    /// replacing earlier contents.
    pub fn write(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let t = &self.telemetry;
        store_stream(dir.join(RecordKind::Metrics.file_name()), &t.metrics)?;
        store_stream(dir.join(RecordKind::Logs.file_name()), &t.logs)?;
        store_stream(dir.join(RecordKind::Traces.file_name()), &t.spans)?;
        store_stream(dir.join(RecordKind::Alerts.file_name()), &t.alerts)?;
        store_stream(dir.join(RecordKind::Tickets.file_name()), &t.tickets)?;
        let path = dir.join(GROUND_TRUTH_FILE);
        let mut text = serde_json::to_string_pretty(&self.truth)?;
        text.push('\n');
        std::fs::write(&path, text).map_err(|e| Error::io(&path, e))
    }
}

/// Simulates `scenario` with `seed`. Identical inputs give identical output.
pub fn run_scenario(scenario: &Scenario, seed: u64) -> Result<RunOutput> {
    scenario.validate()?;
    let trace = engine::simulate(scenario, seed);
    let n_int = (scenario.duration_s as usize).div_ceil(scenario.metric_interval_s as usize);
    let interval = scenario.metric_interval_s as i64;
    let bucket = |ts: f64| (((ts.floor() as i64 - scenario.start_ts) / interval) as usize).min(n_int - 1);

    // Per service, per interval attempts.
    let n_svc = scenario.services.len();
    let mut cells: Vec<Vec<Vec<&Attempt>>> = vec![vec![Vec::new(); n_int]; n_svc];
    for a in &trace.attempts {
        cells[a.service][bucket(a.ts)].push(a);
    }

    let mut metrics = Vec::new();
    let mut values: Vec<[Vec<f64>; 3]> = Vec::with_capacity(n_svc);
    for (s, spec) in scenario.services.iter().enumerate() {
        let mut err = Vec::with_capacity(n_int);
        let mut p95 = Vec::with_capacity(n_int);
        let mut rate = Vec::with_capacity(n_int);
        for cell in &cells[s] {
            let n = cell.len();
            let failed = cell.iter().filter(|a| !a.ok).count();
            err.push(if n == 0 { 0.0 } else { failed as f64 / n as f64 });
            let lat: Vec<f64> = cell.iter().map(|a| a.latency_ms).collect();
            p95.push(percentile_nearest_rank(&lat, 0.95));
            rate.push(n as f64 / interval as f64);
        }
        for (name, v) in [("error_rate", &err), ("latency_p95_ms", &p95), ("request_rate", &rate)] {
            metrics.push(MetricSeries::new(
                spec.id.clone(),
                name,
                scenario.start_ts,
                scenario.metric_interval_s,
                v.clone(),
            ));
        }
        values.push([err, p95, rate]);
    }

    let mut req_cells: Vec<Vec<&RequestRecord>> = vec![Vec::new(); n_int];
    for r in &trace.requests {
        req_cells[bucket(r.ts)].push(r);
    }
    for m in &scenario.business_metrics {
        let v: Vec<f64> = req_cells
            .iter()
            .map(|cell| match m.as_str() {
                E2E_SUCCESS_RATE if cell.is_empty() => 1.0,
                E2E_SUCCESS_RATE => cell.iter().filter(|r| r.ok).count() as f64 / cell.len() as f64,
                _ => percentile_nearest_rank(&cell.iter().map(|r| r.latency_ms).collect::<Vec<_>>(), 0.95),
            })
            .collect();
        metrics.push(MetricSeries::new(
            BUSINESS_SERVICE,
            m.clone(),
            scenario.start_ts,
            scenario.metric_interval_s,
            v,
        ));
    }

    let incident_id = |f: usize| format!("I{f}");

    // Alerts, in time order.
    let mut alerts = Vec::new();
    let mut alert_truth = BTreeMap::new();
    for k in 0..n_int {
        let ts = scenario.start_ts + k as i64 * interval;
        for (s, spec) in scenario.services.iter().enumerate() {
            for rule in &spec.alerts {
                let value = match rule.metric {
                    AlertMetric::ErrorRate => values[s][0][k],
                    AlertMetric::LatencyP95Ms => values[s][1][k],
                    AlertMetric::RequestRate => values[s][2][k],
                    AlertMetric::Always => 0.0,
                };
                if rule.metric != AlertMetric::Always && value <= rule.threshold {
                    continue;
                }
                let id = format!("A{}", alerts.len());
                let text = rule
                    .text
                    .replace("{service}", &spec.id)
                    .replace("{value}", &format!("{value:.3}"));
                let cause = if rule.metric == AlertMetric::Always {
                    None
                } else {
                    majority_fault(&cells[s][k]).map(incident_id)
                };
                alert_truth.insert(id.clone(), cause);
                alerts.push(Alert::new(id, ts, spec.id.clone(), rule.severity, text));
            }
        }
    }

    let (tickets, ticket_truth) = make_tickets(scenario, seed, &trace.requests);

    let incidents = scenario
        .faults
        .iter()
        .enumerate()
        .map(|(f, spec)| IncidentTruth {
            incident_id: incident_id(f),
            fault: spec.clone(),
            affected_services: (0..n_svc)
                .filter(|&s| trace.affected[f][s])
                .map(|s| scenario.services[s].id.clone())
                .collect(),
            start_ts: spec.start_ts,
            end_ts: spec.end_ts(),
        })
        .collect();
    let culprit = match scenario.faults.as_slice() {
        [f] => Some(f.target_service.clone()),
        _ => None,
    };

    Ok(RunOutput {
        telemetry: Telemetry {
            metrics,
            logs: trace.logs,
            spans: trace.spans,
            alerts,
            tickets,
        },
        truth: GroundTruth {
            scenario: scenario.name.clone(),
            seed,
            incidents,
            tickets: ticket_truth,
            alerts: alert_truth,
            culprit,
        },
        services: scenario.service_ids(),
        calls: trace.calls,
        requests: trace.requests,
    })
}

fn majority_fault(cell: &[&Attempt]) -> Option<usize> {
    let mut counts: BTreeMap<usize, usize> = BTreeMap::new();
    for a in cell {
        if let Some(f) = a.fault {
            *counts.entry(f).or_default() += 1;
        }
    }
    // Highest count, lowest fault index on ties.
    counts
        .into_iter()
        .max_by(|a, b| a.1.cmp(&b.1).then(b.0.cmp(&a.0)))
        .map(|(f, _)| f)
}

type TicketDraft = (i64, String, String, Option<String>);

fn make_tickets(
    sc: &Scenario,
    seed: u64,
    requests: &[RequestRecord],
) -> (Vec<Ticket>, BTreeMap<String, Option<String>>) {
    let cm = &sc.customers;
    let by_entry = sc.product_by_entry();
    let mut rng = ChaCha8Rng::seed_from_u64(mix(seed, 0x71C));
    let mut drafts: Vec<TicketDraft> = Vec::new();

    let bad: Vec<&RequestRecord> = requests
        .iter()
        .filter(|r| r.fault.is_some() && (!r.ok || r.latency_ms > cm.slow_ms))
        .filter(|r| by_entry.contains_key(sc.services[r.entry].id.as_str()))
        .collect();
    if !bad.is_empty() {
        for _ in 0..cm.incident_tickets {
            let r = bad[rng.random_range(0..bad.len())];
            let f = r.fault.expect("filtered");
            let fault = &sc.faults[f];
            let delay = rng.random_range(0.0..=cm.report_delay_s.max(0.0));
            let ts = ((r.ts + delay).floor() as i64).clamp(fault.start_ts, fault.end_ts() - 1);
            let product = by_entry[sc.services[r.entry].id.as_str()];
            let text = fill_template(
                &product.ticket_templates[rng.random_range(0..product.ticket_templates.len())],
                &mut rng,
            );
            drafts.push((ts, product.name.clone(), text, Some(format!("I{f}"))));
        }
    }

    let with_bg: Vec<_> = cm
        .products
        .iter()
        .filter(|p| !p.background_templates.is_empty())
        .collect();
    for _ in 0..if with_bg.is_empty() { 0 } else { cm.background_tickets } {
        let p = with_bg[rng.random_range(0..with_bg.len())];
        let ts = rng.random_range(sc.start_ts..sc.end_ts());
        let text = fill_template(
            &p.background_templates[rng.random_range(0..p.background_templates.len())],
            &mut rng,
        );
        drafts.push((ts, p.name.clone(), text, None));
    }

    drafts.sort_by_key(|d| d.0);
    let mut tickets = Vec::with_capacity(drafts.len());
    let mut truth = BTreeMap::new();
    for (i, (ts, product, text, incident)) in drafts.into_iter().enumerate() {
        let id = format!("T{i}");
        let customer = format!("C{}", rng.random_range(0..5000));
        truth.insert(id.clone(), incident);
        tickets.push(Ticket::new(id, ts, product, text, customer));
    }
    (tickets, truth)
}
