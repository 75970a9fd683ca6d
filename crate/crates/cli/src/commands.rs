use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use opsforge::benchmark::{aggregate, train_ticket_scorer_on};
use opsforge::depgraph::{build_status_series, estimate_intensity};
use opsforge::incident::{AffinityMap, ScorerWeights};
use opsforge::logdetect::{
    detect_session, identify_failure, learn_signatures, sessionize, DetectorModel, FailureScore, FailureSignature,
    SessionMode,
};
use opsforge::logparse::{parse_batch, syntax_parsed, KnowledgeDb, Lexicon, ParsedLog};
use opsforge::pipeline::run_e2e;
use opsforge::rca::detect_and_localize;
use opsforge::resilience::{adaptive_campaign, run_test};
use opsforge::simulator::{run_scenario, session_workload, FaultSpec, FaultType, GroundTruth, Scenario, NORMAL};
use opsforge::sketch::{detect, detect_adaptive, discover_patterns, PatternSet, WindowVerdict};
use opsforge::telemetry::{load_stream, store_stream, Alert, LogRecord, MetricSeries, RecordKind, Ticket, TraceSpan};
use serde::{de::DeserializeOwned, Deserialize, Serialize};

use crate::config::{optional_path, required_path, set, RunConfig};
use crate::{
    Cli, Command, DepsCmd, E2eArgs, LogdetectCmd, ParseArgs, RcaCmd, ResilienceCmd, SeriesArgs, SimulateArgs,
    SketchCmd, TicketInputs, TicketsCmd,
};

const DEFAULT_OUT: &str = "opsforge-out";

struct Ctx {
    cfg: RunConfig,
    out: PathBuf,
    seed: u64,
    quiet: bool,
}

impl Ctx {
    fn note(&self, msg: impl AsRef<str>) {
        if !self.quiet {
            eprintln!("{}", msg.as_ref());
        }
    }

    fn out_dir(&self) -> Result<&Path> {
        fs::create_dir_all(&self.out).with_context(|| format!("--out: cannot create {}", self.out.display()))?;
        Ok(&self.out)
    }

    fn write_json<T: Serialize + ?Sized>(&self, name: &str, value: &T) -> Result<PathBuf> {
        let path = self.out_dir()?.join(name);
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
        self.note(format!("wrote {}", path.display()));
        Ok(path)
    }

    fn write_jsonl<T: Serialize>(&self, name: &str, records: &[T]) -> Result<PathBuf> {
        let path = self.out_dir()?.join(name);
        store_stream(&path, records)?;
        self.note(format!("wrote {}", path.display()));
        Ok(path)
    }

    fn scenario(&self, flag: &Option<PathBuf>) -> Result<Scenario> {
        let path = required_path(flag, &self.cfg.scenario, "scenario")?;
        Scenario::load(&path).with_context(|| format!("--scenario: {}", path.display()))
    }
}

pub fn run(cli: Cli) -> Result<()> {
    let cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    let ctx = Ctx {
        out: cli
            .out
            .clone()
            .or_else(|| cfg.out.clone())
            .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT)),
        seed: cli.seed.or(cfg.seed).unwrap_or(0),
        quiet: cli.quiet,
        cfg,
    };
    match cli.command {
        Command::Simulate(a) => simulate(ctx, a),
        Command::Sketch(c) => sketch(ctx, c),
        Command::Parse(a) => parse(ctx, a),
        Command::Logdetect(c) => logdetect(ctx, c),
        Command::Tickets(c) => tickets(ctx, c),
        Command::Deps(c) => deps(ctx, c),
        Command::Rca(c) => rca(ctx, c),
        Command::Resilience(c) => resilience(ctx, c),
        Command::E2e(a) => e2e(ctx, a),
    }
}

fn read_json<T: DeserializeOwned>(path: &Path, flag: &str) -> Result<T> {
    let text = fs::read_to_string(path).with_context(|| format!("--{flag}: reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("--{flag}: invalid JSON in {}", path.display()))
}

fn read_jsonl<T: DeserializeOwned>(path: &Path, flag: &str) -> Result<Vec<T>> {
    let file = File::open(path).with_context(|| format!("--{flag}: opening {}", path.display()))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.with_context(|| format!("--{flag}: reading {}", path.display()))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).with_context(|| format!("--{flag}: line {}", i + 1))?);
    }
    Ok(out)
}

fn load<T: opsforge::telemetry::Record>(path: &Path, flag: &str) -> Result<Vec<T>> {
    load_stream(path).with_context(|| format!("--{flag}: {}", path.display()))
}

// ---------------------------------------------------------------- simulate

fn simulate(ctx: Ctx, a: SimulateArgs) -> Result<()> {
    if let Some(n) = a.sessions {
        if !(0.0..=1.0).contains(&a.failure_fraction) {
            bail!("--failure-fraction: must lie in [0, 1]");
        }
        let w = session_workload(ctx.seed, n, a.failure_fraction);
        ctx.write_jsonl(RecordKind::Logs.file_name(), &w.records)?;
        let labels: BTreeMap<&str, &str> = w.label_map();
        ctx.write_json("labels.json", &labels)?;
        return Ok(());
    }
    let sc = ctx.scenario(&a.scenario)?;
    let out = run_scenario(&sc, ctx.seed)?;
    out.write(ctx.out_dir()?)?;
    ctx.note(format!(
        "simulated {} for {} s: {} spans, {} alerts, {} tickets -> {}",
        sc.name,
        sc.duration_s,
        out.telemetry.spans.len(),
        out.telemetry.alerts.len(),
        out.telemetry.tickets.len(),
        ctx.out.display()
    ));
    Ok(())
}

// ---------------------------------------------------------------- sketch

#[derive(Debug, Serialize, Deserialize)]
struct SeriesPatterns {
    service_id: String,
    metric_name: String,
    patterns: PatternSet,
}

#[derive(Debug, Serialize)]
struct SeriesVerdicts {
    service_id: String,
    metric_name: String,
    anomalous_windows: usize,
    /// Start timestamps of flagged windows.
    anomalous_ts: Vec<i64>,
    verdicts: Vec<WindowVerdict>,
}

impl SeriesVerdicts {
    fn new(s: &MetricSeries, verdicts: Vec<WindowVerdict>) -> Self {
        let anomalous_ts: Vec<i64> = verdicts
            .iter()
            .filter(|v| v.anomalous)
            .map(|v| s.ts_at(v.start))
            .collect();
        SeriesVerdicts {
            service_id: s.service_id.clone(),
            metric_name: s.metric_name.clone(),
            anomalous_windows: anomalous_ts.len(),
            anomalous_ts,
            verdicts,
        }
    }
}

fn selected_series(ctx: &Ctx, a: &SeriesArgs) -> Result<Vec<MetricSeries>> {
    let path = required_path(&a.metrics, &ctx.cfg.inputs.metrics, "metrics")?;
    let all: Vec<MetricSeries> = load(&path, "metrics")?;
    let picked: Vec<MetricSeries> = all
        .into_iter()
        .filter(|s| a.service.as_ref().is_none_or(|x| *x == s.service_id))
        .filter(|s| a.metric.as_ref().is_none_or(|x| *x == s.metric_name))
        .collect();
    if picked.is_empty() {
        bail!("--metrics: no series matches the --service/--metric selection");
    }
    Ok(picked)
}

fn patterns_for<'a>(sets: &'a [SeriesPatterns], s: &MetricSeries) -> Result<&'a SeriesPatterns> {
    sets.iter()
        .find(|p| p.service_id == s.service_id && p.metric_name == s.metric_name)
        .with_context(|| format!("--patterns: nothing trained for {}/{}", s.service_id, s.metric_name))
}

fn sketch(mut ctx: Ctx, cmd: SketchCmd) -> Result<()> {
    match cmd {
        SketchCmd::Train {
            series,
            window,
            theta,
            rare_fraction,
        } => {
            let p = &mut ctx.cfg.sketch;
            set(&mut p.window, window);
            set(&mut p.theta, theta);
            set(&mut p.rare_fraction, rare_fraction);
            let params = *p;
            let mut sets = Vec::new();
            for s in selected_series(&ctx, &series)? {
                let patterns = discover_patterns(&s, &params, None)
                    .with_context(|| format!("series {}/{}", s.service_id, s.metric_name))?;
                ctx.note(format!(
                    "{}/{}: {} patterns",
                    s.service_id,
                    s.metric_name,
                    patterns.patterns.len()
                ));
                sets.push(SeriesPatterns {
                    service_id: s.service_id,
                    metric_name: s.metric_name,
                    patterns,
                });
            }
            ctx.write_json("patterns.json", &sets)?;
        }
        SketchCmd::Detect { series, patterns } => {
            let path = required_path(&patterns, &ctx.cfg.inputs.patterns, "patterns")?;
            let sets: Vec<SeriesPatterns> = read_json(&path, "patterns")?;
            let mut out = Vec::new();
            for s in selected_series(&ctx, &series)? {
                let v = detect(&s, &patterns_for(&sets, &s)?.patterns)?;
                out.push(SeriesVerdicts::new(&s, v));
            }
            ctx.write_json("verdicts.json", &out)?;
        }
        SketchCmd::Adapt {
            series,
            patterns,
            promote_k,
            horizon_s,
        } => {
            set(&mut ctx.cfg.adapt.promote_k, promote_k);
            set(&mut ctx.cfg.adapt.horizon_s, horizon_s);
            let path = required_path(&patterns, &ctx.cfg.inputs.patterns, "patterns")?;
            let mut sets: Vec<SeriesPatterns> = read_json(&path, "patterns")?;
            let mut out = Vec::new();
            for s in selected_series(&ctx, &series)? {
                let i = sets
                    .iter()
                    .position(|p| p.service_id == s.service_id && p.metric_name == s.metric_name)
                    .with_context(|| format!("--patterns: nothing trained for {}/{}", s.service_id, s.metric_name))?;
                let v = detect_adaptive(&s, &mut sets[i].patterns, &ctx.cfg.adapt)?;
                out.push(SeriesVerdicts::new(&s, v));
            }
            ctx.write_json("verdicts.json", &out)?;
            ctx.write_json("patterns.json", &sets)?;
        }
    }
    Ok(())
}

// ---------------------------------------------------------------- logs

fn parse(mut ctx: Ctx, a: ParseArgs) -> Result<()> {
    set(&mut ctx.cfg.parse.depth, a.depth);
    set(&mut ctx.cfg.parse.sim_threshold, a.sim_threshold);
    let path = required_path(&a.logs, &ctx.cfg.inputs.logs, "logs")?;
    let records: Vec<LogRecord> = load(&path, "logs")?;
    let parsed = if a.syntax {
        syntax_parsed(&records, ctx.cfg.parse.depth, ctx.cfg.parse.sim_threshold)?
    } else {
        let lexicon = match optional_path(&a.lexicon, &ctx.cfg.inputs.lexicon, "lexicon")? {
            Some(p) => Lexicon::load(&p)?,
            None => Lexicon::bundled(),
        };
        let mut db = match optional_path(&a.knowledge, &ctx.cfg.inputs.knowledge, "knowledge")? {
            Some(p) => KnowledgeDb::load(&p).with_context(|| format!("--knowledge: {}", p.display()))?,
            None => KnowledgeDb::new(),
        };
        let parsed = parse_batch(&records, &lexicon, &mut db);
        let conflicts = db.take_conflicts();
        if !conflicts.is_empty() {
            ctx.note(format!(
                "{} knowledge conflicts, latest observation kept",
                conflicts.len()
            ));
        }
        db.store(ctx.out_dir()?.join("knowledge.json"))?;
        parsed
    };
    let mut templates: BTreeMap<&str, usize> = BTreeMap::new();
    for p in &parsed {
        *templates.entry(p.conceptualized_template.as_str()).or_default() += 1;
    }
    ctx.note(format!("{} records, {} templates", parsed.len(), templates.len()));
    ctx.write_jsonl("parsed.jsonl", &parsed)?;
    ctx.write_json("templates.json", &templates)?;
    Ok(())
}

#[derive(Debug, Serialize, Deserialize)]
struct LogModel {
    detector: DetectorModel,
    #[serde(default)]
    signatures: Vec<FailureSignature>,
}

fn parsed_sessions(ctx: &Ctx, flag: &Option<PathBuf>) -> Result<Vec<opsforge::logdetect::Session>> {
    let path = required_path(flag, &ctx.cfg.inputs.parsed, "parsed")?;
    let parsed: Vec<ParsedLog> = read_jsonl(&path, "parsed")?;
    Ok(sessionize(&parsed, SessionMode::BySessionId)?)
}

fn logdetect(mut ctx: Ctx, cmd: LogdetectCmd) -> Result<()> {
    match cmd {
        LogdetectCmd::Train {
            parsed,
            labels,
            epsilon,
            margin,
        } => {
            set(&mut ctx.cfg.logdetect.epsilon, epsilon);
            set(&mut ctx.cfg.logdetect.margin, margin);
            let sessions = parsed_sessions(&ctx, &parsed)?;
            let labels: BTreeMap<String, String> = match optional_path(&labels, &ctx.cfg.inputs.labels, "labels")? {
                Some(p) => read_json(&p, "labels")?,
                None => BTreeMap::new(),
            };
            let label = |id: &str| labels.get(id).map_or(NORMAL, String::as_str);
            let detector = DetectorModel::train(
                sessions.iter().filter(|s| label(&s.session_id) == NORMAL),
                ctx.cfg.logdetect.epsilon,
            )?;
            let failures: Vec<_> = sessions
                .iter()
                .filter(|s| label(&s.session_id) != NORMAL)
                .map(|s| (s.clone(), label(&s.session_id).to_string()))
                .collect();
            let signatures = if failures.is_empty() {
                Vec::new()
            } else {
                learn_signatures(&failures, ctx.cfg.logdetect.margin)?
            };
            ctx.note(format!(
                "trained on {} normal sessions, {} failure signatures",
                sessions.len() - failures.len(),
                signatures.len()
            ));
            ctx.write_json("model.json", &LogModel { detector, signatures })?;
        }
        LogdetectCmd::Detect { parsed, model } => {
            let sessions = parsed_sessions(&ctx, &parsed)?;
            let m: LogModel = read_json(&required_path(&model, &ctx.cfg.inputs.model, "model")?, "model")?;
            let detections = sessions
                .iter()
                .map(|s| detect_session(s, &m.detector))
                .collect::<Result<Vec<_>, _>>()?;
            ctx.note(format!(
                "{} of {} sessions anomalous",
                detections.iter().filter(|d| d.anomalous).count(),
                detections.len()
            ));
            ctx.write_json("detections.json", &detections)?;
        }
        LogdetectCmd::Identify { parsed, model } => {
            let sessions = parsed_sessions(&ctx, &parsed)?;
            let m: LogModel = read_json(&required_path(&model, &ctx.cfg.inputs.model, "model")?, "model")?;
            if m.signatures.is_empty() {
                bail!("--model: holds no failure signatures; train with --labels");
            }
            let scores: BTreeMap<&str, Vec<FailureScore>> = sessions
                .iter()
                .map(|s| (s.session_id.as_str(), identify_failure(s, &m.signatures)))
                .collect();
            ctx.write_json("identification.json", &scores)?;
        }
    }
    Ok(())
}

// ---------------------------------------------------------------- tickets

fn ticket_inputs(ctx: &mut Ctx, a: &TicketInputs) -> Result<(Vec<Alert>, Vec<Ticket>, AffinityMap)> {
    set(&mut ctx.cfg.tickets.bucket_s, a.bucket_s);
    let alerts = load(&required_path(&a.alerts, &ctx.cfg.inputs.alerts, "alerts")?, "alerts")?;
    let tickets = load(
        &required_path(&a.tickets, &ctx.cfg.inputs.tickets, "tickets")?,
        "tickets",
    )?;
    let affinity = if let Some(p) = optional_path(&a.scenario, &None, "scenario")? {
        Scenario::load(&p)
            .with_context(|| format!("--scenario: {}", p.display()))?
            .affinity_map()
    } else {
        let p = required_path(&a.affinity, &ctx.cfg.inputs.affinity, "affinity")?;
        AffinityMap::load(&p).with_context(|| format!("--affinity: {}", p.display()))?
    };
    Ok((alerts, tickets, affinity))
}

fn tickets(mut ctx: Ctx, cmd: TicketsCmd) -> Result<()> {
    match cmd {
        TicketsCmd::Train { inputs, truth } => {
            let (alerts, tickets, affinity) = ticket_inputs(&mut ctx, &inputs)?;
            let truth = required_path(&truth, &ctx.cfg.inputs.truth, "truth")?;
            let truth = GroundTruth::load(&truth).with_context(|| format!("--truth: {}", truth.display()))?;
            let (weights, report) = train_ticket_scorer_on(&alerts, &tickets, affinity, &truth, &ctx.cfg.tickets)?;
            ctx.note(format!("scorer trained: {report:?}"));
            ctx.write_json("weights.json", &weights)?;
        }
        TicketsCmd::Aggregate { inputs, weights } => {
            let (alerts, tickets, affinity) = ticket_inputs(&mut ctx, &inputs)?;
            let weights: ScorerWeights = match optional_path(&weights, &ctx.cfg.inputs.weights, "weights")? {
                Some(p) => read_json(&p, "weights")?,
                None => ScorerWeights::default(),
            };
            let agg = aggregate(&alerts, &tickets, affinity, &weights, &ctx.cfg.tickets)?;
            ctx.note(format!(
                "{} events, {} tickets linked, {} clusters",
                agg.events.len(),
                agg.links.iter().filter(|l| l.linked).count(),
                agg.clusters.len()
            ));
            ctx.write_json("events.json", &agg.events)?;
            ctx.write_json("graph.json", &agg.graph)?;
            ctx.write_json("links.json", &agg.links)?;
            ctx.write_json("clusters.json", &agg.clusters)?;
        }
    }
    Ok(())
}

// ---------------------------------------------------------------- dependencies

fn deps(mut ctx: Ctx, cmd: DepsCmd) -> Result<()> {
    let DepsCmd::Intensity {
        traces,
        interval_s,
        max_lag,
    } = cmd;
    set(&mut ctx.cfg.rca.interval_s, interval_s);
    set(&mut ctx.cfg.intensity.max_lag, max_lag);
    let spans: Vec<TraceSpan> = load(&required_path(&traces, &ctx.cfg.inputs.traces, "traces")?, "traces")?;
    let status = build_status_series(&spans, ctx.cfg.rca.interval_s)?;
    let edges = estimate_intensity(&status, &spans, &ctx.cfg.intensity);
    ctx.note(format!("{} dependency edges", edges.len()));
    ctx.write_json("intensity.json", &edges)?;
    Ok(())
}

fn rca(mut ctx: Ctx, cmd: RcaCmd) -> Result<()> {
    let RcaCmd::Localize {
        traces,
        metrics,
        logs,
        interval_s,
        alarm_threshold,
    } = cmd;
    set(&mut ctx.cfg.rca.interval_s, interval_s);
    set(&mut ctx.cfg.rca.localize.alarm_threshold, alarm_threshold);
    let spans: Vec<TraceSpan> = load(&required_path(&traces, &ctx.cfg.inputs.traces, "traces")?, "traces")?;
    let metrics: Vec<MetricSeries> = match optional_path(&metrics, &ctx.cfg.inputs.metrics, "metrics")? {
        Some(p) => load(&p, "metrics")?,
        None => Vec::new(),
    };
    let logs: Vec<LogRecord> = match optional_path(&logs, &ctx.cfg.inputs.logs, "logs")? {
        Some(p) => load(&p, "logs")?,
        None => Vec::new(),
    };
    let r = detect_and_localize(&spans, &metrics, &logs, &ctx.cfg.rca)?;
    if r.ranking.alarm {
        ctx.note(format!(
            "alarm; top candidates {:?}",
            &r.ranking.ranking[..r.ranking.ranking.len().min(3)]
        ));
    } else {
        ctx.note("no alarm; no ranking emitted");
    }
    ctx.write_json("rca.json", &r)?;
    Ok(())
}

// ---------------------------------------------------------------- resilience

fn resilience(mut ctx: Ctx, cmd: ResilienceCmd) -> Result<()> {
    match cmd {
        ResilienceCmd::Test {
            scenario,
            target,
            fault_type,
            intensity,
            start_offset_s,
            duration_s,
        } => {
            let sc = ctx.scenario(&scenario)?;
            let fault = FaultSpec {
                target_service: target,
                fault_type,
                intensity,
                start_ts: sc.start_ts + start_offset_s.unwrap_or(sc.duration_s as i64 / 3),
                duration_s: duration_s.unwrap_or((sc.duration_s / 3).max(1)),
            };
            let r = run_test(&sc, &fault, ctx.seed)?;
            ctx.note(format!(
                "perf {:.3}, business {:.3}, resilience {:.3}",
                r.perf_degradation, r.business_degradation, r.resilience_index
            ));
            ctx.write_json("resilience.json", &r)?;
        }
        ResilienceCmd::Campaign {
            scenario,
            services,
            fault_types,
            i0,
            escalation,
            manifest,
        } => {
            let p = &mut ctx.cfg.campaign;
            set(&mut p.i0, i0);
            set(&mut p.escalation, escalation);
            set(&mut p.manifest, manifest);
            let sc = ctx.scenario(&scenario)?;
            let services = if services.is_empty() {
                let entries = sc.entry_services();
                sc.service_ids()
                    .into_iter()
                    .filter(|s| !entries.contains(s.as_str()))
                    .collect()
            } else {
                services
            };
            let fault_types = if fault_types.is_empty() {
                FaultType::ALL.to_vec()
            } else {
                fault_types
            };
            let r = adaptive_campaign(&sc, &services, &fault_types, &ctx.cfg.campaign, ctx.seed)?;
            ctx.note(r.table());
            ctx.write_json("campaign.json", &r)?;
        }
    }
    Ok(())
}

// ---------------------------------------------------------------- e2e

fn e2e(ctx: Ctx, a: E2eArgs) -> Result<()> {
    let sc = ctx.scenario(&a.scenario)?;
    let lexicon = match optional_path(&a.lexicon, &ctx.cfg.inputs.lexicon, "lexicon")? {
        Some(p) => Lexicon::load(&p)?,
        None => Lexicon::bundled(),
    };
    let cfg = ctx.cfg.e2e.clone().seeded(ctx.seed);
    let (out, report) = run_e2e(&sc, ctx.seed, &cfg, &lexicon)?;
    out.write(ctx.out_dir()?.join("run"))?;
    for c in &report.criteria {
        ctx.note(format!(
            "criterion {:>2} {:<24} {}  {}",
            c.id,
            c.name,
            if c.pass { "PASS" } else { "FAIL" },
            c.detail
        ));
    }
    ctx.write_json("report.json", &report)?;
    ctx.write_json("timings.json", &report.timings_s)?;
    if !report.pass {
        ctx.note("one or more criteria failed");
    }
    Ok(())
}
