//! Fault-injection resilience testing on the simulator.
//!
//! A test runs the scenario twice with one seed, once as given and once with
//! an extra fault, and compares the two inside the fault window. Performance
//! degradation is read off the target service as its callers see it (after
//! retries, before fallback); business degradation off the end-to-end
//! success rate and p95 latency. Their ratio is the propagation.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::depgraph::percentile_nearest_rank;
use crate::error::{Error, Result};
use crate::simulator::{run_scenario, FaultSpec, FaultType, RunOutput, Scenario, E2E_P95_LATENCY, E2E_SUCCESS_RATE};

pub const EPSILON: f64 = 1e-6;
pub const DEFAULT_I0: f64 = 0.1;
pub const DEFAULT_ESCALATION: f64 = 2.0;
pub const DEFAULT_MANIFEST: f64 = 0.2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResilienceReport {
    pub fault: FaultSpec,
    pub perf_degradation: f64,
    pub business_degradation: f64,
    pub propagation: f64,
    pub resilience_index: f64,
}

impl ResilienceReport {
    fn new(fault: FaultSpec, perf: f64, business: f64) -> Self {
        let propagation = (business / perf.max(EPSILON)).clamp(0.0, 1.0);
        ResilienceReport {
            fault,
            perf_degradation: perf,
            business_degradation: business,
            propagation,
            resilience_index: 1.0 - propagation,
        }
    }
}

/// Relative worsening of a higher-is-better value.
fn drop_of(base: f64, faulted: f64) -> f64 {
    ((base - faulted) / base.max(EPSILON)).max(0.0)
}

/// Relative worsening of a lower-is-better value.
fn rise_of(base: f64, faulted: f64) -> f64 {
    ((faulted - base) / base.max(EPSILON)).max(0.0)
}

// (success rate, p95 latency) of the observations; a perfect, instant
// channel when there are none.
fn channel(obs: &[(bool, f64)]) -> (f64, f64) {
    if obs.is_empty() {
        return (1.0, 0.0);
    }
    let ok = obs.iter().filter(|o| o.0).count() as f64 / obs.len() as f64;
    let lat: Vec<f64> = obs.iter().map(|o| o.1).collect();
    (ok, percentile_nearest_rank(&lat, 0.95))
}

// Calls into `target` inside the window, as its callers saw them. Entry
// services also count the client requests they served.
fn target_view(run: &RunOutput, target: usize, fault: &FaultSpec) -> (f64, f64) {
    let mut obs: Vec<(bool, f64)> = run
        .calls
        .iter()
        .filter(|c| c.callee == target && fault.active_at(c.ts))
        .map(|c| (c.ok, c.latency_ms))
        .collect();
    obs.extend(
        run.requests
            .iter()
            .filter(|r| r.entry == target && fault.active_at(r.ts))
            .map(|r| (r.ok, r.latency_ms)),
    );
    channel(&obs)
}

fn business_view(run: &RunOutput, fault: &FaultSpec) -> (f64, f64) {
    let obs: Vec<(bool, f64)> = run
        .requests
        .iter()
        .filter(|r| fault.active_at(r.ts))
        .map(|r| (r.ok, r.latency_ms))
        .collect();
    channel(&obs)
}

fn degradations(sc: &Scenario, baseline: &RunOutput, faulted: &RunOutput, fault: &FaultSpec) -> (f64, f64) {
    let target = baseline
        .services
        .iter()
        .position(|s| *s == fault.target_service)
        .expect("validated target");
    let (b_ok, b_lat) = target_view(baseline, target, fault);
    let (f_ok, f_lat) = target_view(faulted, target, fault);
    let perf = drop_of(b_ok, f_ok).max(rise_of(b_lat, f_lat));

    let (b_ok, b_lat) = business_view(baseline, fault);
    let (f_ok, f_lat) = business_view(faulted, fault);
    let business = sc
        .business_metrics
        .iter()
        .map(|m| match m.as_str() {
            E2E_SUCCESS_RATE => drop_of(b_ok, f_ok),
            E2E_P95_LATENCY => rise_of(b_lat, f_lat),
            _ => 0.0,
        })
        .fold(0.0, f64::max);
    (perf, business)
}

fn check(sc: &Scenario, fault: &FaultSpec) -> Result<()> {
    sc.validate()?;
    if sc.service(&fault.target_service).is_none() {
        return Err(Error::UnknownService(fault.target_service.clone()));
    }
    if !(fault.intensity > 0.0 && fault.intensity <= 1.0) {
        return Err(Error::param("intensity", "must lie in (0, 1]"));
    }
    if fault.duration_s == 0 {
        return Err(Error::param("duration_s", "must be positive"));
    }
    if sc.business_metrics.is_empty() {
        return Err(Error::param("business_metrics", "scenario declares no business metric"));
    }
    Ok(())
}

fn with_fault(sc: &Scenario, fault: &FaultSpec) -> Scenario {
    let mut faulted = sc.clone();
    faulted.faults.push(fault.clone());
    faulted
}

/// One paired test: the scenario as given against the same scenario with
/// `fault` added, both simulated with `seed`.
pub fn run_test(sc: &Scenario, fault: &FaultSpec, seed: u64) -> Result<ResilienceReport> {
    check(sc, fault)?;
    let baseline = run_scenario(sc, seed)?;
    let faulted = run_scenario(&with_fault(sc, fault), seed)?;
    let (perf, business) = degradations(sc, &baseline, &faulted, fault);
    Ok(ResilienceReport::new(fault.clone(), perf, business))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CampaignParams {
    /// Starting intensity.
    pub i0: f64,
    /// Escalation factor, greater than 1.
    pub escalation: f64,
    /// Perf degradation at which a fault counts as manifested.
    pub manifest: f64,
    /// Fault window offset from the scenario start; `None` starts a third
    /// of the way in.
    pub start_offset_s: Option<i64>,
    /// Fault window length; `None` lasts a third of the scenario.
    pub duration_s: Option<u32>,
}

impl Default for CampaignParams {
    fn default() -> Self {
        CampaignParams {
            i0: DEFAULT_I0,
            escalation: DEFAULT_ESCALATION,
            manifest: DEFAULT_MANIFEST,
            start_offset_s: None,
            duration_s: None,
        }
    }
}

impl CampaignParams {
    /// Upper bound on runs per (service, fault type) cell.
    pub fn max_runs_per_cell(&self) -> usize {
        ((1.0 / self.i0).ln() / self.escalation.ln() + 1.0).ceil().max(1.0) as usize
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignCell {
    pub service: String,
    pub fault_type: FaultType,
    /// Intensities tried, in order.
    pub intensities: Vec<f64>,
    pub manifested: bool,
    /// At the first manifesting intensity; for a fault that never
    /// manifests, the last run with propagation forced to 0.
    pub report: ResilienceReport,
}

impl CampaignCell {
    pub fn runs(&self) -> usize {
        self.intensities.len()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignReport {
    pub scenario: String,
    pub seed: u64,
    pub params: CampaignParams,
    pub cells: Vec<CampaignCell>,
}

impl CampaignReport {
    pub fn total_runs(&self) -> usize {
        self.cells.iter().map(CampaignCell::runs).sum()
    }

    /// Aligned plain-text table, one row per cell.
    pub fn table(&self) -> String {
        let header = [
            "service",
            "fault",
            "intensity",
            "runs",
            "perf",
            "business",
            "propagation",
            "resilience",
            "status",
        ];
        let rows: Vec<[String; 9]> = self
            .cells
            .iter()
            .map(|c| {
                [
                    c.service.clone(),
                    c.fault_type.to_string(),
                    format!("{:.3}", c.report.fault.intensity),
                    c.runs().to_string(),
                    format!("{:.3}", c.report.perf_degradation),
                    format!("{:.3}", c.report.business_degradation),
                    format!("{:.3}", c.report.propagation),
                    format!("{:.3}", c.report.resilience_index),
                    if c.manifested { "MANIFESTED" } else { "NOT-MANIFESTED" }.to_string(),
                ]
            })
            .collect();
        let mut widths: Vec<usize> = header.iter().map(|h| h.len()).collect();
        for r in &rows {
            for (w, cell) in widths.iter_mut().zip(r) {
                *w = (*w).max(cell.len());
            }
        }
        let mut out = String::new();
        let mut line = |cells: Vec<&str>| {
            let parts: Vec<String> = cells.iter().zip(&widths).map(|(c, w)| format!("{c:<w$}")).collect();
            let _ = writeln!(out, "{}", parts.join("  ").trim_end());
        };
        line(header.to_vec());
        for r in &rows {
            line(r.iter().map(String::as_str).collect());
        }
        out
    }
}

/// Escalates each (service, fault type) from `i0` by `escalation` until the
/// target's perf degradation reaches `manifest` or intensity 1 is tried.
pub fn adaptive_campaign(
    sc: &Scenario,
    services: &[String],
    fault_types: &[FaultType],
    params: &CampaignParams,
    seed: u64,
) -> Result<CampaignReport> {
    if services.is_empty() {
        return Err(Error::param("services", "empty service list"));
    }
    if fault_types.is_empty() {
        return Err(Error::param("faults", "empty fault type list"));
    }
    if !(params.escalation > 1.0) {
        return Err(Error::param("escalation", "must exceed 1"));
    }
    if !(params.manifest > 0.0) {
        return Err(Error::param("manifest", "must be positive"));
    }
    if !(params.i0 > 0.0 && params.i0 <= 1.0) {
        return Err(Error::param("i0", "must lie in (0, 1]"));
    }
    let offset = params.start_offset_s.unwrap_or(sc.duration_s as i64 / 3);
    let duration = params.duration_s.unwrap_or((sc.duration_s / 3).max(1));
    let baseline = run_scenario(sc, seed)?;
    let mut cells = Vec::new();
    for service in services {
        for &fault_type in fault_types {
            let mut fault = FaultSpec {
                target_service: service.clone(),
                fault_type,
                intensity: params.i0,
                start_ts: sc.start_ts + offset,
                duration_s: duration,
            };
            check(sc, &fault)?;
            let mut intensities = Vec::new();
            loop {
                intensities.push(fault.intensity);
                let faulted = run_scenario(&with_fault(sc, &fault), seed)?;
                let (perf, business) = degradations(sc, &baseline, &faulted, &fault);
                let manifested = perf >= params.manifest;
                if manifested || fault.intensity >= 1.0 {
                    let report = if manifested {
                        ResilienceReport::new(fault.clone(), perf, business)
                    } else {
                        ResilienceReport {
                            fault: fault.clone(),
                            perf_degradation: perf,
                            business_degradation: business,
                            propagation: 0.0,
                            resilience_index: 1.0,
                        }
                    };
                    cells.push(CampaignCell {
                        service: service.clone(),
                        fault_type,
                        intensities,
                        manifested,
                        report,
                    });
                    break;
                }
                fault.intensity = (fault.intensity * params.escalation).min(1.0);
            }
        }
    }
    Ok(CampaignReport {
        scenario: sc.name.clone(),
        seed,
        params: *params,
        cells,
    })
}

/// Resilience index per service and fault type, as nested maps.
pub fn resilience_matrix(report: &CampaignReport) -> BTreeMap<String, BTreeMap<String, f64>> {
    let mut m: BTreeMap<String, BTreeMap<String, f64>> = BTreeMap::new();
    for c in &report.cells {
        m.entry(c.service.clone())
            .or_default()
            .insert(c.fault_type.to_string(), c.report.resilience_index);
    }
    m
}
