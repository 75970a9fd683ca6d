//! Simulator-backed evaluation protocols. Each benchmark draws its data from
//! the simulator, runs one analysis stage and scores it against the ground
//! truth the simulator recorded.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::depgraph::{build_status_series, estimate_intensity, IntensityParams};
use crate::error::{Error, Result};
use crate::eval::{pairwise, point_adjusted, Confusion};
use crate::incident::{
    aggregate_tickets, cluster_assignment, parse_alerts, profile_incidents, terms, AffinityMap, BucketGrid, Correlator,
    Event, EventGraph, ProfileParams, ScorerWeights, TicketCluster, TicketLink, TrainReport, DEFAULT_BUCKET_S,
};
use crate::logdetect::{
    identification_precision, learn_signatures, score_detection, sessionize, DetectorModel, Session, SessionMode,
    DEFAULT_EPSILON, DEFAULT_MARGIN,
};
use crate::logparse::{parse_batch, syntax_parsed, KnowledgeDb, Lexicon, DEFAULT_DEPTH, DEFAULT_SIM_THRESHOLD};
use crate::rca::{detect_and_localize, RcaParams};
use crate::resilience::run_test;
use crate::simulator::{
    drift_series, intensity_probe, kpi_suite, rca_scenario, resilience_chain, run_scenario, session_workload,
    FaultSpec, FaultType, GroundTruth, RunOutput, Scenario, NORMAL,
};
use crate::sketch::{detect, detect_adaptive, discover_patterns, sample_labels, AdaptParams, SketchParams};
use crate::telemetry::{Alert, Ticket};

// ---------------------------------------------------------------- sketch

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SketchBenchConfig {
    pub first_seed: u64,
    pub n_seeds: usize,
    pub n_series: usize,
    pub len: usize,
    pub anomaly_fraction: f64,
    pub sketch: SketchParams,
}

impl Default for SketchBenchConfig {
    fn default() -> Self {
        SketchBenchConfig {
            first_seed: 0,
            n_seeds: 5,
            n_series: 10,
            len: 10_000,
            anomaly_fraction: 0.05,
            // A seasonal KPI splits into a couple of dozen phase clusters,
            // so the rarity cutoff must sit well below 1/24.
            sketch: SketchParams {
                window: 12,
                theta: 2.0,
                rare_fraction: 0.001,
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SketchBench {
    /// Point-adjusted F1 pooled over every series of every seed.
    pub f1: f64,
    pub precision: f64,
    pub recall: f64,
    pub per_seed_f1: Vec<f64>,
}

/// Unsupervised discovery and detection on each KPI of the suite.
pub fn sketch_bench(cfg: &SketchBenchConfig) -> Result<SketchBench> {
    let mut pooled = Confusion::default();
    let mut per_seed_f1 = Vec::with_capacity(cfg.n_seeds);
    for seed in cfg.first_seed..cfg.first_seed + cfg.n_seeds as u64 {
        let mut c = Confusion::default();
        for k in kpi_suite(seed, cfg.n_series, cfg.len, cfg.anomaly_fraction) {
            let set = discover_patterns(&k.series, &cfg.sketch, None)?;
            let verdicts = detect(&k.series, &set)?;
            let pred = sample_labels(&verdicts, k.labels.len(), set.w);
            c.merge(point_adjusted(&pred, &k.labels));
        }
        per_seed_f1.push(c.f1());
        pooled.merge(c);
    }
    Ok(SketchBench {
        f1: pooled.f1(),
        precision: pooled.precision(),
        recall: pooled.recall(),
        per_seed_f1,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DriftBenchConfig {
    pub first_seed: u64,
    pub n_seeds: usize,
    pub pre_len: usize,
    pub post_len: usize,
    pub sketch: SketchParams,
    pub adapt: AdaptParams,
}

impl Default for DriftBenchConfig {
    fn default() -> Self {
        DriftBenchConfig {
            first_seed: 0,
            n_seeds: 5,
            pre_len: 2000,
            post_len: 3000,
            sketch: SketchParams::default(),
            adapt: AdaptParams::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriftBench {
    /// Share of windows flagged after `shift + k * w`, with adaptation.
    pub adaptive_fp: Vec<f64>,
    /// The same share for the frozen pattern set.
    pub static_fp: Vec<f64>,
    pub max_adaptive_fp: f64,
}

/// Patterns are discovered before a permanent regime change and the whole
/// series is then detected online.
pub fn drift_bench(cfg: &DriftBenchConfig) -> Result<DriftBench> {
    let mut adaptive_fp = Vec::new();
    let mut static_fp = Vec::new();
    for seed in cfg.first_seed..cfg.first_seed + cfg.n_seeds as u64 {
        let d = drift_series(seed, cfg.pre_len, cfg.post_len);
        let mut pre = d.series.clone();
        pre.values.truncate(d.shift_at);
        let frozen = discover_patterns(&pre, &cfg.sketch, None)?;
        let mut live = frozen.clone();
        let adaptive = detect_adaptive(&d.series, &mut live, &cfg.adapt)?;
        let fixed = detect(&d.series, &frozen)?;
        let from = d.shift_at + cfg.adapt.promote_k * cfg.sketch.window;
        let rate = |v: &[crate::sketch::WindowVerdict]| {
            let after: Vec<_> = v.iter().filter(|x| x.start >= from).collect();
            after.iter().filter(|x| x.anomalous).count() as f64 / after.len().max(1) as f64
        };
        adaptive_fp.push(rate(&adaptive));
        static_fp.push(rate(&fixed));
    }
    let max_adaptive_fp = adaptive_fp.iter().copied().fold(0.0, f64::max);
    Ok(DriftBench {
        adaptive_fp,
        static_fp,
        max_adaptive_fp,
    })
}

// ---------------------------------------------------------------- tickets

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TicketParams {
    pub bucket_s: i64,
    pub profile: ProfileParams,
    pub lambda_s: f64,
    pub link_score: f64,
}

impl Default for TicketParams {
    fn default() -> Self {
        TicketParams {
            bucket_s: DEFAULT_BUCKET_S,
            profile: ProfileParams::default(),
            lambda_s: crate::incident::DEFAULT_LAMBDA_S,
            link_score: crate::incident::DEFAULT_LINK_SCORE,
        }
    }
}

/// Everything ticket aggregation produced for one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregation {
    pub events: Vec<Event>,
    pub graph: EventGraph,
    pub links: Vec<TicketLink>,
    pub clusters: Vec<TicketCluster>,
}

/// Event extraction, incident profiling, ticket linking and aggregation.
pub fn aggregate(
    alerts: &[Alert],
    tickets: &[Ticket],
    affinity: AffinityMap,
    weights: &ScorerWeights,
    p: &TicketParams,
) -> Result<Aggregation> {
    let events = parse_alerts(alerts);
    let graph = profile(&events, p)?;
    let mut corr = correlator(&events, tickets, affinity, p);
    corr.weights = *weights;
    let links = corr.correlate_all(tickets, &events, &graph);
    let clusters = aggregate_tickets(&links, &graph)?;
    Ok(Aggregation {
        events,
        graph,
        links,
        clusters,
    })
}

pub fn aggregate_run(sc: &Scenario, out: &RunOutput, weights: &ScorerWeights, p: &TicketParams) -> Result<Aggregation> {
    aggregate(
        &out.telemetry.alerts,
        &out.telemetry.tickets,
        sc.affinity_map(),
        weights,
        p,
    )
}

fn profile(events: &[Event], p: &TicketParams) -> Result<EventGraph> {
    if events.is_empty() {
        return Ok(EventGraph::default());
    }
    let grid = BucketGrid::covering(events, p.bucket_s)?;
    profile_incidents(events, &grid, &p.profile)
}

fn correlator(events: &[Event], tickets: &[Ticket], affinity: AffinityMap, p: &TicketParams) -> Correlator {
    let mut corr = Correlator::new(events, tickets, affinity);
    corr.lambda_s = p.lambda_s;
    corr.link_score = p.link_score;
    corr
}

/// Incident an event stems from: the most common incident among its
/// alerts, `None` when most alerts have none.
pub fn event_incident(event: &Event, truth: &GroundTruth) -> Option<String> {
    let mut counts: BTreeMap<Option<&str>, usize> = BTreeMap::new();
    for id in &event.alert_ids {
        let inc = truth.alerts.get(id).and_then(|i| i.as_deref());
        *counts.entry(inc).or_default() += 1;
    }
    counts
        .into_iter()
        .max_by(|a, b| a.1.cmp(&b.1).then(b.0.cmp(&a.0)))
        .and_then(|(k, _)| k.map(str::to_string))
}

/// Learns scorer weights from labeled telemetry: a ticket–event pair is
/// positive when both stem from the same incident.
pub fn train_ticket_scorer_on(
    alerts: &[Alert],
    tickets: &[Ticket],
    affinity: AffinityMap,
    truth: &GroundTruth,
    p: &TicketParams,
) -> Result<(ScorerWeights, TrainReport)> {
    let events = parse_alerts(alerts);
    if events.is_empty() {
        return Err(Error::param("alerts", "training data holds no alerts"));
    }
    let graph = profile(&events, p)?;
    let incident: Vec<Option<String>> = events.iter().map(|e| event_incident(e, truth)).collect();
    let mut pairs = Vec::new();
    for ticket in tickets {
        let inc = truth.tickets.get(&ticket.ticket_id).cloned().flatten();
        for (e, e_inc) in events.iter().zip(&incident) {
            if graph.contains(&e.event_id) {
                pairs.push((ticket, e, inc.is_some() && inc == *e_inc));
            }
        }
    }
    let mut corr = correlator(&events, tickets, affinity, p);
    let report = corr.train(&pairs)?;
    Ok((corr.weights, report))
}

/// Trains on a fresh simulated run of `sc`.
pub fn train_ticket_scorer(sc: &Scenario, seed: u64, p: &TicketParams) -> Result<(ScorerWeights, TrainReport)> {
    let out = run_scenario(sc, seed)?;
    train_ticket_scorer_on(
        &out.telemetry.alerts,
        &out.telemetry.tickets,
        sc.affinity_map(),
        &out.truth,
        p,
    )
}

/// Pairwise clustering confusion against the ground truth; tickets with no
/// incident are their own cluster.
pub fn ticket_confusion(out: &RunOutput, clusters: &[TicketCluster]) -> Confusion {
    let assignment = cluster_assignment(clusters);
    let tickets = &out.telemetry.tickets;
    let pred: Vec<Option<usize>> = tickets.iter().map(|t| assignment.get(&t.ticket_id).copied()).collect();
    let truth: Vec<String> = tickets
        .iter()
        .map(|t| match out.truth.tickets.get(&t.ticket_id).cloned().flatten() {
            Some(inc) => inc,
            None => format!("~{}", t.ticket_id),
        })
        .collect();
    pairwise(&pred, &truth)
}

/// Two tickets of one incident, in one cluster, linked to different events
/// and sharing no term.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZeroOverlapPair {
    pub seed: u64,
    pub tickets: [String; 2],
    pub texts: [String; 2],
    pub events: [String; 2],
}

pub fn find_zero_overlap_pair(out: &RunOutput, agg: &Aggregation) -> Option<ZeroOverlapPair> {
    let linked: BTreeMap<&str, &str> = agg
        .links
        .iter()
        .filter(|l| l.linked)
        .filter_map(|l| l.event_id.as_deref().map(|e| (l.ticket_id.as_str(), e)))
        .collect();
    let tickets: BTreeMap<&str, &crate::telemetry::Ticket> = out
        .telemetry
        .tickets
        .iter()
        .map(|t| (t.ticket_id.as_str(), t))
        .collect();
    for c in &agg.clusters {
        for (i, a) in c.ticket_ids.iter().enumerate() {
            for b in &c.ticket_ids[i + 1..] {
                let (Some(ea), Some(eb)) = (linked.get(a.as_str()), linked.get(b.as_str())) else {
                    continue;
                };
                let ia = out.truth.tickets.get(a).cloned().flatten();
                if ea == eb || ia.is_none() || ia != out.truth.tickets.get(b).cloned().flatten() {
                    continue;
                }
                let (ta, tb) = (tickets[a.as_str()], tickets[b.as_str()]);
                let wa: BTreeSet<String> = terms(&ta.text).into_iter().collect();
                let wb: BTreeSet<String> = terms(&tb.text).into_iter().collect();
                if wa.is_disjoint(&wb) {
                    return Some(ZeroOverlapPair {
                        seed: out.truth.seed,
                        tickets: [a.clone(), b.clone()],
                        texts: [ta.text.clone(), tb.text.clone()],
                        events: [ea.to_string(), eb.to_string()],
                    });
                }
            }
        }
    }
    None
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TicketBenchConfig {
    pub first_seed: u64,
    pub n_seeds: usize,
    /// Seed of the run the scorer is trained on.
    pub train_seed: u64,
    pub params: TicketParams,
}

impl Default for TicketBenchConfig {
    fn default() -> Self {
        TicketBenchConfig {
            first_seed: 0,
            n_seeds: 5,
            train_seed: 1000,
            params: TicketParams::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TicketSeedResult {
    pub seed: u64,
    pub n_tickets: usize,
    pub n_clusters: usize,
    pub f1: f64,
    pub precision: f64,
    pub recall: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TicketBench {
    pub weights: ScorerWeights,
    pub train: TrainReport,
    pub per_seed: Vec<TicketSeedResult>,
    pub mean_f1: f64,
    pub min_f1: f64,
    pub zero_overlap_pair: Option<ZeroOverlapPair>,
}

pub fn ticket_bench(sc: &Scenario, cfg: &TicketBenchConfig) -> Result<TicketBench> {
    let (weights, train) = train_ticket_scorer(sc, cfg.train_seed, &cfg.params)?;
    let mut per_seed = Vec::new();
    let mut zero_overlap_pair = None;
    for seed in cfg.first_seed..cfg.first_seed + cfg.n_seeds as u64 {
        let out = run_scenario(sc, seed)?;
        let agg = aggregate_run(sc, &out, &weights, &cfg.params)?;
        let c = ticket_confusion(&out, &agg.clusters);
        if zero_overlap_pair.is_none() {
            zero_overlap_pair = find_zero_overlap_pair(&out, &agg);
        }
        per_seed.push(TicketSeedResult {
            seed,
            n_tickets: out.telemetry.tickets.len(),
            n_clusters: agg.clusters.len(),
            f1: c.f1(),
            precision: c.precision(),
            recall: c.recall(),
        });
    }
    let mean_f1 = per_seed.iter().map(|r| r.f1).sum::<f64>() / per_seed.len().max(1) as f64;
    let min_f1 = per_seed.iter().map(|r| r.f1).fold(f64::INFINITY, f64::min);
    Ok(TicketBench {
        weights,
        train,
        per_seed,
        mean_f1,
        min_f1,
        zero_overlap_pair,
    })
}

// ---------------------------------------------------------------- logs

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LogBenchConfig {
    pub seed: u64,
    pub n_sessions: usize,
    pub failure_fraction: f64,
    /// Labeled failure sessions scored for identification.
    pub n_identify: usize,
    pub epsilon: f64,
    pub margin: f64,
}

impl Default for LogBenchConfig {
    fn default() -> Self {
        LogBenchConfig {
            seed: 0,
            n_sessions: 600,
            failure_fraction: 0.3,
            n_identify: 30,
            epsilon: DEFAULT_EPSILON,
            margin: DEFAULT_MARGIN,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParserScore {
    pub f1: f64,
    pub precision: f64,
    pub recall: f64,
    pub identification_precision: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogBench {
    pub syntax: ParserScore,
    pub joint: ParserScore,
}

/// The same detector and signatures trained on the first half of a labeled
/// session workload and scored on the second, once per parser.
pub fn log_bench(cfg: &LogBenchConfig, lexicon: &Lexicon) -> Result<LogBench> {
    let w = session_workload(cfg.seed, cfg.n_sessions, cfg.failure_fraction);
    let labels = w.label_map();
    let joint = parse_batch(&w.records, lexicon, &mut KnowledgeDb::new());
    let syntax = syntax_parsed(&w.records, DEFAULT_DEPTH, DEFAULT_SIM_THRESHOLD)?;
    let score = |parsed| -> Result<ParserScore> {
        let sessions = sessionize(parsed, SessionMode::BySessionId)?;
        let (train, test) = sessions.split_at(sessions.len() / 2);
        let label = |s: &Session| labels[s.session_id.as_str()];
        let model = DetectorModel::train(train.iter().filter(|s| label(s) == NORMAL), cfg.epsilon)?;
        let truth: Vec<bool> = test.iter().map(|s| label(s) != NORMAL).collect();
        let c = score_detection(&model, test, &truth)?;
        let failures = |set: &[Session], n: usize| -> Vec<(Session, String)> {
            set.iter()
                .filter(|s| label(s) != NORMAL)
                .take(n)
                .map(|s| (s.clone(), label(s).to_string()))
                .collect()
        };
        let signatures = learn_signatures(&failures(train, usize::MAX), cfg.margin)?;
        Ok(ParserScore {
            f1: c.f1(),
            precision: c.precision(),
            recall: c.recall(),
            identification_precision: identification_precision(&signatures, &failures(test, cfg.n_identify)),
        })
    };
    Ok(LogBench {
        syntax: score(&syntax)?,
        joint: score(&joint)?,
    })
}

// ---------------------------------------------------------------- dependencies

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IntensityBenchConfig {
    pub first_seed: u64,
    pub n_seeds: usize,
    /// Cascade probabilities of the probed edge, ascending.
    pub levels: Vec<f64>,
    pub params: IntensityParams,
}

impl Default for IntensityBenchConfig {
    fn default() -> Self {
        IntensityBenchConfig {
            first_seed: 0,
            n_seeds: 50,
            levels: vec![0.0, 0.5, 1.0],
            params: IntensityParams::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntensitySeedResult {
    pub seed: u64,
    /// Probed-edge intensity per level.
    pub strong: Vec<f64>,
    /// No-cascade edge intensity per level.
    pub weak: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntensityBench {
    pub levels: Vec<f64>,
    pub per_seed: Vec<IntensitySeedResult>,
    /// Smallest strong-edge intensity at the top level.
    pub min_strong: f64,
    /// Largest no-cascade intensity anywhere.
    pub max_weak: f64,
    pub ordering_holds: bool,
    pub monotone: bool,
}

pub fn intensity_bench(cfg: &IntensityBenchConfig) -> Result<IntensityBench> {
    if cfg.levels.is_empty() {
        return Err(Error::param("levels", "no cascade levels"));
    }
    let mut per_seed = Vec::new();
    for seed in cfg.first_seed..cfg.first_seed + cfg.n_seeds as u64 {
        let mut r = IntensitySeedResult {
            seed,
            strong: Vec::new(),
            weak: Vec::new(),
        };
        for &level in &cfg.levels {
            let probe = intensity_probe(level);
            let out = run_scenario(&probe.scenario, seed)?;
            let status = build_status_series(&out.telemetry.spans, probe.scenario.metric_interval_s)?;
            let edges = estimate_intensity(&status, &out.telemetry.spans, &cfg.params);
            let get = |(a, b): &(String, String)| {
                edges
                    .iter()
                    .find(|e| &e.caller == a && &e.callee == b)
                    .map_or(0.0, |e| e.intensity)
            };
            r.strong.push(get(&probe.strong));
            r.weak.push(get(&probe.weak));
        }
        per_seed.push(r);
    }
    let top = cfg.levels.len() - 1;
    let min_strong = per_seed.iter().map(|r| r.strong[top]).fold(f64::INFINITY, f64::min);
    let max_weak = per_seed.iter().flat_map(|r| r.weak.iter().copied()).fold(0.0, f64::max);
    let ordering_holds = per_seed.iter().all(|r| r.strong[top] > r.weak[top]);
    let monotone = per_seed.iter().all(|r| r.strong.windows(2).all(|w| w[0] <= w[1]));
    Ok(IntensityBench {
        levels: cfg.levels.clone(),
        per_seed,
        min_strong,
        max_weak,
        ordering_holds,
        monotone,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RcaBenchConfig {
    pub first_seed: u64,
    pub n_seeds: usize,
    pub params: RcaParams,
}

impl Default for RcaBenchConfig {
    fn default() -> Self {
        RcaBenchConfig {
            first_seed: 0,
            n_seeds: 50,
            params: RcaParams::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RcaSeedResult {
    pub seed: u64,
    pub culprit: String,
    pub alarm: bool,
    /// 1-based rank of the culprit, `None` when not ranked.
    pub rank: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RcaBench {
    pub per_seed: Vec<RcaSeedResult>,
    pub top1: f64,
    pub top3: f64,
    pub alarm_rate: f64,
    /// No ranking was ever emitted without an alarm.
    pub contract_holds: bool,
}

pub fn rca_bench(cfg: &RcaBenchConfig) -> Result<RcaBench> {
    let mut per_seed = Vec::new();
    let mut contract_holds = true;
    for seed in cfg.first_seed..cfg.first_seed + cfg.n_seeds as u64 {
        let sc = rca_scenario(seed);
        let out = run_scenario(&sc, seed)?;
        let t = &out.telemetry;
        let r = detect_and_localize(&t.spans, &t.metrics, &t.logs, &cfg.params)?;
        contract_holds &= r.ranking.alarm || r.ranking.ranking.is_empty();
        let culprit = out.truth.culprit.clone().expect("single-fault scenario");
        let rank = r.ranking.ranking.iter().position(|s| *s == culprit).map(|i| i + 1);
        per_seed.push(RcaSeedResult {
            seed,
            culprit,
            alarm: r.ranking.alarm,
            rank,
        });
    }
    let n = per_seed.len().max(1) as f64;
    let within = |k: usize| per_seed.iter().filter(|r| r.rank.is_some_and(|x| x <= k)).count() as f64 / n;
    Ok(RcaBench {
        top1: within(1),
        top3: within(3),
        alarm_rate: per_seed.iter().filter(|r| r.alarm).count() as f64 / n,
        contract_holds,
        per_seed,
    })
}

// ---------------------------------------------------------------- resilience

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FallbackBenchConfig {
    pub seeds: Vec<u64>,
    pub fault_offset_s: i64,
    pub fault_duration_s: u32,
}

impl Default for FallbackBenchConfig {
    fn default() -> Self {
        FallbackBenchConfig {
            seeds: vec![1, 2, 3],
            fault_offset_s: 400,
            fault_duration_s: 400,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FallbackComparison {
    pub service: String,
    pub seed: u64,
    pub resilience_without: f64,
    pub resilience_with: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FallbackBench {
    pub comparisons: Vec<FallbackComparison>,
    /// Fallback strictly raised resilience in every comparison.
    pub all_raised: bool,
    /// `resilience_index == 1 - propagation` held on every report.
    pub invariant_holds: bool,
}

/// CRASH on each non-entry service of the bundled chain, with and without
/// fallbacks, on paired seeds.
pub fn fallback_bench(cfg: &FallbackBenchConfig) -> Result<FallbackBench> {
    let off = resilience_chain(false);
    let on = resilience_chain(true);
    let entries = off.entry_services();
    let mut comparisons = Vec::new();
    let mut invariant_holds = true;
    for svc in off.service_ids().into_iter().filter(|s| !entries.contains(s.as_str())) {
        for &seed in &cfg.seeds {
            let fault = FaultSpec {
                target_service: svc.clone(),
                fault_type: FaultType::Crash,
                intensity: 1.0,
                start_ts: off.start_ts + cfg.fault_offset_s,
                duration_s: cfg.fault_duration_s,
            };
            let a = run_test(&off, &fault, seed)?;
            let b = run_test(&on, &fault, seed)?;
            invariant_holds &= a.resilience_index == 1.0 - a.propagation && b.resilience_index == 1.0 - b.propagation;
            comparisons.push(FallbackComparison {
                service: svc.clone(),
                seed,
                resilience_without: a.resilience_index,
                resilience_with: b.resilience_index,
            });
        }
    }
    let all_raised = comparisons.iter().all(|c| c.resilience_with > c.resilience_without);
    Ok(FallbackBench {
        comparisons,
        all_raised,
        invariant_holds,
    })
}
