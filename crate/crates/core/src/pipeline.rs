//! The end-to-end run: simulate a scenario, run every analysis against the
//! recorded ground truth and fold the scores into one versioned report.

use std::collections::BTreeMap;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::benchmark::{
    drift_bench, fallback_bench, intensity_bench, log_bench, rca_bench, sketch_bench, ticket_bench, DriftBench,
    DriftBenchConfig, FallbackBench, FallbackBenchConfig, IntensityBench, IntensityBenchConfig, LogBench,
    LogBenchConfig, RcaBench, RcaBenchConfig, SketchBench, SketchBenchConfig, TicketBench, TicketBenchConfig,
};
use crate::error::{Error, Result};
use crate::logparse::Lexicon;
use crate::resilience::{adaptive_campaign, resilience_matrix, CampaignParams, CampaignReport};
use crate::simulator::{run_scenario, FaultType, RunOutput, Scenario};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct E2eConfig {
    pub sketch: SketchBenchConfig,
    pub drift: DriftBenchConfig,
    pub logs: LogBenchConfig,
    pub tickets: TicketBenchConfig,
    pub intensity: IntensityBenchConfig,
    pub rca: RcaBenchConfig,
    pub fallback: FallbackBenchConfig,
    pub campaign: CampaignParams,
    /// Services the campaign probes; empty means every non-entry service.
    pub campaign_services: Vec<String>,
    /// The campaign runs on the scenario cut to this length, without its
    /// own faults.
    pub campaign_duration_s: u32,
}

impl Default for E2eConfig {
    fn default() -> Self {
        E2eConfig {
            sketch: SketchBenchConfig::default(),
            drift: DriftBenchConfig::default(),
            logs: LogBenchConfig::default(),
            tickets: TicketBenchConfig::default(),
            intensity: IntensityBenchConfig::default(),
            rca: RcaBenchConfig::default(),
            fallback: FallbackBenchConfig::default(),
            campaign: CampaignParams::default(),
            campaign_services: Vec::new(),
            campaign_duration_s: 1800,
        }
    }
}

impl E2eConfig {
    /// Shifts every benchmark's seeds so that runs for different seeds draw
    /// different data.
    pub fn seeded(mut self, seed: u64) -> Self {
        self.sketch.first_seed = seed;
        self.drift.first_seed = seed;
        self.logs.seed = seed;
        self.tickets.first_seed = seed;
        self.tickets.train_seed = seed.wrapping_add(1000);
        self.intensity.first_seed = seed;
        self.rca.first_seed = seed;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationSummary {
    pub requests: usize,
    pub spans: usize,
    pub metric_series: usize,
    pub logs: usize,
    pub alerts: usize,
    pub tickets: usize,
    pub incidents: usize,
}

impl SimulationSummary {
    pub fn of(out: &RunOutput) -> Self {
        let t = &out.telemetry;
        SimulationSummary {
            requests: out.requests.len(),
            spans: t.spans.len(),
            metric_series: t.metrics.len(),
            logs: t.logs.len(),
            alerts: t.alerts.len(),
            tickets: t.tickets.len(),
            incidents: out.truth.incidents.len(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResilienceSection {
    pub fallback: FallbackBench,
    pub campaign: CampaignReport,
    /// Service → fault type → resilience index.
    pub matrix: BTreeMap<String, BTreeMap<String, f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriterionResult {
    pub id: u32,
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct E2eReport {
    pub schema_version: u32,
    pub scenario: String,
    pub seed: u64,
    pub simulation: SimulationSummary,
    pub sketch: SketchBench,
    pub drift: DriftBench,
    pub logs: LogBench,
    pub tickets: TicketBench,
    pub intensity: IntensityBench,
    pub rca: RcaBench,
    pub resilience: ResilienceSection,
    pub criteria: Vec<CriterionResult>,
    pub pass: bool,
    /// Wall-clock seconds per stage, kept out of the serialized report so
    /// that reruns write identical bytes.
    #[serde(skip)]
    pub timings_s: BTreeMap<String, f64>,
}

impl E2eReport {
    pub fn criterion(&self, id: u32) -> Option<&CriterionResult> {
        self.criteria.iter().find(|c| c.id == id)
    }
}

fn timed<T>(timings: &mut BTreeMap<String, f64>, stage: &str, f: impl FnOnce() -> Result<T>) -> Result<T> {
    let t0 = Instant::now();
    let r = f()?;
    timings.insert(stage.to_string(), t0.elapsed().as_secs_f64());
    Ok(r)
}

fn criterion(id: u32, name: &str, pass: bool, detail: String) -> CriterionResult {
    CriterionResult {
        id,
        name: name.to_string(),
        pass,
        detail,
    }
}

/// Runs `sc` at `seed` and every benchmark. The returned run is the one the
/// ticket benchmark scores first.
pub fn run_e2e(sc: &Scenario, seed: u64, cfg: &E2eConfig, lexicon: &Lexicon) -> Result<(RunOutput, E2eReport)> {
    let mut timings = BTreeMap::new();
    let out = timed(&mut timings, "simulate", || run_scenario(sc, seed))?;
    let sketch = timed(&mut timings, "sketch", || sketch_bench(&cfg.sketch))?;
    let drift = timed(&mut timings, "drift", || drift_bench(&cfg.drift))?;
    let logs = timed(&mut timings, "logs", || log_bench(&cfg.logs, lexicon))?;
    let tickets = timed(&mut timings, "tickets", || ticket_bench(sc, &cfg.tickets))?;
    let intensity = timed(&mut timings, "intensity", || intensity_bench(&cfg.intensity))?;
    let rca = timed(&mut timings, "rca", || rca_bench(&cfg.rca))?;
    let fallback = timed(&mut timings, "fallback", || fallback_bench(&cfg.fallback))?;
    let campaign = timed(&mut timings, "campaign", || campaign(sc, seed, cfg))?;
    let matrix = resilience_matrix(&campaign);

    let criteria = vec![
        criterion(
            1,
            "sketch detection",
            sketch.f1 >= 0.8,
            format!("pooled point-adjusted F1 {:.3}", sketch.f1),
        ),
        criterion(
            3,
            "drift recovery",
            drift.max_adaptive_fp < 0.05,
            format!("worst post-adaptation FP rate {:.4}", drift.max_adaptive_fp),
        ),
        criterion(
            5,
            "parser sensitivity",
            logs.joint.f1 >= logs.syntax.f1 && logs.joint.identification_precision >= 0.9,
            format!(
                "F1 joint {:.3} vs syntax {:.3}, identification precision {:.3}",
                logs.joint.f1, logs.syntax.f1, logs.joint.identification_precision
            ),
        ),
        criterion(
            6,
            "ticket aggregation",
            tickets.min_f1 >= 0.87 && tickets.zero_overlap_pair.is_some(),
            format!(
                "cluster F1 min {:.3} mean {:.3}, zero-overlap pair {}",
                tickets.min_f1,
                tickets.mean_f1,
                if tickets.zero_overlap_pair.is_some() {
                    "found"
                } else {
                    "missing"
                }
            ),
        ),
        criterion(
            8,
            "dependency intensity",
            intensity.min_strong >= 0.7 && intensity.max_weak <= 0.3 && intensity.ordering_holds && intensity.monotone,
            format!(
                "strong min {:.3}, weak max {:.3}, ordering {}, monotone {}",
                intensity.min_strong, intensity.max_weak, intensity.ordering_holds, intensity.monotone
            ),
        ),
        criterion(
            9,
            "root-cause localization",
            rca.top1 >= 0.7 && rca.top3 >= 0.9 && rca.contract_holds,
            format!(
                "top1 {:.2}, top3 {:.2}, alarm contract {}",
                rca.top1, rca.top3, rca.contract_holds
            ),
        ),
        criterion(
            10,
            "resilience",
            fallback.all_raised && fallback.invariant_holds && campaign_bound_holds(&campaign, &cfg.campaign),
            format!(
                "fallback raised {} of {}, index invariant {}",
                fallback
                    .comparisons
                    .iter()
                    .filter(|c| c.resilience_with > c.resilience_without)
                    .count(),
                fallback.comparisons.len(),
                fallback.invariant_holds
            ),
        ),
    ];
    let pass = criteria.iter().all(|c| c.pass);
    let report = E2eReport {
        schema_version: SCHEMA_VERSION,
        scenario: sc.name.clone(),
        seed,
        simulation: SimulationSummary::of(&out),
        sketch,
        drift,
        logs,
        tickets,
        intensity,
        rca,
        resilience: ResilienceSection {
            fallback,
            campaign,
            matrix,
        },
        criteria,
        pass,
        timings_s: timings,
    };
    Ok((out, report))
}

fn campaign(sc: &Scenario, seed: u64, cfg: &E2eConfig) -> Result<CampaignReport> {
    let mut quiet = sc.clone();
    quiet.faults.clear();
    quiet.duration_s = cfg.campaign_duration_s.min(sc.duration_s);
    let services = if cfg.campaign_services.is_empty() {
        let entries = sc.entry_services();
        sc.service_ids()
            .into_iter()
            .filter(|s| !entries.contains(s.as_str()))
            .collect()
    } else {
        cfg.campaign_services.clone()
    };
    if services.is_empty() {
        return Err(Error::param("campaign_services", "no service to probe"));
    }
    adaptive_campaign(&quiet, &services, &FaultType::ALL, &cfg.campaign, seed)
}

fn campaign_bound_holds(r: &CampaignReport, p: &CampaignParams) -> bool {
    r.cells.iter().all(|c| c.runs() <= p.max_runs_per_cell())
        && r.cells
            .iter()
            .all(|c| c.report.resilience_index == 1.0 - c.report.propagation)
}
