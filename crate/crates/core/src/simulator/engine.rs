//! Request-level simulation over the service DAG.
//!
//! Every served call draws from its own generator keyed by (seed, request,
//! call path, attempt), so toggling retries, fallbacks or faults leaves the
//! randomness of all other calls unchanged.

use std::collections::BTreeMap;

use rand::distr::weighted::WeightedIndex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, StandardNormal};
use serde::{Deserialize, Serialize};

use super::scenario::{FaultType, Scenario, CLIENT};
use crate::telemetry::{LogLevel, LogRecord, SpanStatus, TraceSpan};

/// splitmix64 finalizer over a combined word.
pub(crate) fn mix(a: u64, b: u64) -> u64 {
    let mut z = a ^ b
        .wrapping_add(0x9E37_79B9_7F4A_7C15)
        .wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Outcome {
    pub ok: bool,
    pub latency_ms: f64,
    /// Fault that failed or slowed this call, if any.
    pub fault: Option<usize>,
}

/// One served attempt, as seen by the callee.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Attempt {
    pub ts: f64,
    pub service: usize,
    pub ok: bool,
    pub latency_ms: f64,
    pub fault: Option<usize>,
}

/// A call as seen by its caller, after retries and before fallback.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CallRecord {
    pub ts: f64,
    pub caller: usize,
    pub callee: usize,
    pub ok: bool,
    pub latency_ms: f64,
    pub coupled: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RequestRecord {
    pub ts: f64,
    pub entry: usize,
    pub ok: bool,
    pub latency_ms: f64,
    pub fault: Option<usize>,
}

pub(crate) struct Trace {
    pub spans: Vec<TraceSpan>,
    pub logs: Vec<LogRecord>,
    pub attempts: Vec<Attempt>,
    pub calls: Vec<CallRecord>,
    pub requests: Vec<RequestRecord>,
    /// Services degraded by each fault.
    pub affected: Vec<Vec<bool>>,
}

struct Engine<'a> {
    sc: &'a Scenario,
    out_edges: Vec<Vec<usize>>,
    edge_callee: Vec<usize>,
    faults_of: Vec<Vec<usize>>,
    trace_id: String,
    span_counter: usize,
    acc: Trace,
}

/// Fills `{name}` placeholders with generated values.
pub(crate) fn fill_template(template: &str, rng: &mut impl Rng) -> String {
    let mut out = String::with_capacity(template.len() + 16);
    let mut rest = template;
    while let Some(open) = rest.find('{') {
        let Some(close) = rest[open..].find('}') else { break };
        out.push_str(&rest[..open]);
        let key = &rest[open + 1..open + close];
        match key {
            "ip" => out.push_str(&format!(
                "10.{}.{}.{}",
                rng.random_range(0..8),
                rng.random_range(0..256),
                rng.random_range(1..255)
            )),
            "port" => out.push_str(&rng.random_range(1024..65535).to_string()),
            "n" => out.push_str(&rng.random_range(10..10_000).to_string()),
            "uuid" => out.push_str(&format!(
                "{:08x}-{:04x}-{:04x}-{:04x}-{:012x}",
                rng.random::<u32>(),
                rng.random::<u16>(),
                rng.random::<u16>() & 0x0fff | 0x4000,
                rng.random::<u16>() & 0x3fff | 0x8000,
                rng.random::<u64>() & 0xffff_ffff_ffff
            )),
            "path" => out.push_str(&format!(
                "/data/{:08x}/part-{}",
                rng.random::<u32>(),
                rng.random_range(0..64)
            )),
            _ => out.push_str(&format!(
                "{}{:07x}",
                rng.random_range(1..10),
                rng.random::<u32>() & 0x0fff_ffff
            )),
        }
        rest = &rest[open + close + 1..];
    }
    out.push_str(rest);
    out
}

impl<'a> Engine<'a> {
    fn new(sc: &'a Scenario) -> Self {
        let index: BTreeMap<&str, usize> = sc
            .services
            .iter()
            .enumerate()
            .map(|(i, s)| (s.id.as_str(), i))
            .collect();
        let mut out_edges = vec![Vec::new(); sc.services.len()];
        let mut edge_callee = Vec::with_capacity(sc.edges.len());
        for (e, spec) in sc.edges.iter().enumerate() {
            out_edges[index[spec.caller.as_str()]].push(e);
            edge_callee.push(index[spec.callee.as_str()]);
        }
        let mut faults_of = vec![Vec::new(); sc.services.len()];
        for (f, spec) in sc.faults.iter().enumerate() {
            faults_of[index[spec.target_service.as_str()]].push(f);
        }
        Engine {
            sc,
            out_edges,
            edge_callee,
            faults_of,
            trace_id: String::new(),
            span_counter: 0,
            acc: Trace {
                spans: Vec::new(),
                logs: Vec::new(),
                attempts: Vec::new(),
                calls: Vec::new(),
                requests: Vec::new(),
                affected: vec![vec![false; sc.services.len()]; sc.faults.len()],
            },
        }
    }

    fn active_fault(&self, svc: usize, t: f64) -> Option<usize> {
        self.faults_of[svc]
            .iter()
            .copied()
            .find(|&f| self.sc.faults[f].active_at(t))
    }

    fn attempt(&mut self, caller: &str, svc: usize, t: f64, key: u64, parent: Option<&str>) -> Outcome {
        let span_id = format!("{}.{}", self.trace_id, self.span_counter);
        self.span_counter += 1;
        let o = self.serve(svc, t, key, &span_id);
        let sc = self.sc;
        let status = if o.ok { SpanStatus::Ok } else { SpanStatus::Error };
        let mut span = TraceSpan::new(
            self.trace_id.clone(),
            span_id,
            caller,
            sc.services[svc].id.clone(),
            t,
            o.latency_ms,
            status,
        );
        span.parent_span_id = parent.map(str::to_string);
        self.acc.spans.push(span);
        self.acc.attempts.push(Attempt {
            ts: t,
            service: svc,
            ok: o.ok,
            latency_ms: o.latency_ms,
            fault: o.fault,
        });
        if let Some(f) = o.fault {
            self.acc.affected[f][svc] = true;
        }
        o
    }

    fn serve(&mut self, svc: usize, t: f64, key: u64, my_span: &str) -> Outcome {
        let sc = self.sc;
        let spec = &sc.services[svc];
        let fx = sc.effects;
        let mut rng = ChaCha8Rng::seed_from_u64(key);
        let n_edges = self.out_edges[svc].len();
        let draws: Vec<(f64, f64)> = (0..n_edges).map(|_| (rng.random(), rng.random())).collect();
        let u_err: f64 = rng.random();
        let z: f64 = rng.sample(StandardNormal);

        let fault = self.active_fault(svc, t);
        let (ftype, fint) = match fault {
            Some(f) => (Some(sc.faults[f].fault_type), sc.faults[f].intensity),
            None => (None, 0.0),
        };
        if ftype == Some(FaultType::Crash) {
            self.log(svc, t, false, &mut rng);
            return Outcome {
                ok: false,
                latency_ms: fx.crash_latency_ms,
                fault,
            };
        }
        let mut sigma = spec.latency_sigma;
        let mut scale = 1.0;
        let mut cause = None;
        match ftype {
            Some(FaultType::Cpu) => {
                sigma *= 1.0 + fx.cpu_factor * fint;
                cause = fault;
            }
            Some(FaultType::Delay) => {
                scale = 1.0 + fx.delay_factor * fint;
                cause = fault;
            }
            _ => {}
        }
        let own = spec.base_latency_ms * (sigma * z).exp() * scale;

        let mut elapsed = 0.0;
        let mut failed = false;
        #[allow(clippy::needless_range_loop)]
        for k in 0..n_edges {
            let e = self.out_edges[svc][k];
            let edge = &sc.edges[e];
            let (u_call, u_couple) = draws[k];
            if u_call >= edge.call_probability {
                continue;
            }
            let coupled = u_couple < edge.cascade_probability;
            let callee = self.edge_callee[e];
            let tries = if coupled { edge.retries + 1 } else { 1 };
            let mut total = 0.0;
            let mut last = None;
            for a in 0..tries {
                let child_key = mix(mix(key, e as u64 + 1), a as u64);
                let o = self.attempt(
                    &spec.id,
                    callee,
                    t + (elapsed + total) / 1000.0,
                    child_key,
                    Some(my_span),
                );
                total += o.latency_ms;
                last = Some(o);
                if o.ok {
                    break;
                }
            }
            let o = last.expect("at least one attempt");
            self.acc.calls.push(CallRecord {
                ts: t + elapsed / 1000.0,
                caller: svc,
                callee,
                ok: o.ok,
                latency_ms: total,
                coupled,
            });
            if !coupled {
                continue;
            }
            elapsed += total;
            if o.ok {
                cause = cause.or(o.fault);
            } else if edge.fallback {
                elapsed += fx.fallback_latency_ms;
            } else {
                failed = true;
                cause = o.fault;
                break;
            }
        }
        if !failed {
            if u_err < spec.error_rate {
                failed = true;
                cause = None;
            } else if ftype == Some(FaultType::Error) && u_err < fint {
                failed = true;
                cause = fault;
            }
        }
        self.log(svc, t, !failed, &mut rng);
        Outcome {
            ok: !failed,
            latency_ms: own + elapsed,
            fault: cause,
        }
    }

    fn log(&mut self, svc: usize, t: f64, ok: bool, rng: &mut ChaCha8Rng) {
        let spec = &self.sc.services[svc];
        let (pool, level) = if ok || spec.error_templates.is_empty() {
            (&spec.log_templates, LogLevel::Info)
        } else {
            (&spec.error_templates, LogLevel::Error)
        };
        if pool.is_empty() {
            return;
        }
        let template = &pool[rng.random_range(0..pool.len())];
        let msg = fill_template(template, rng);
        self.acc
            .logs
            .push(LogRecord::new(t.floor() as i64, spec.id.clone(), level, msg).with_session(self.trace_id.clone()));
    }
}

/// Runs the workload of `sc` (assumed valid) and collects raw outputs.
pub(crate) fn simulate(sc: &Scenario, seed: u64) -> Trace {
    let mut engine = Engine::new(sc);
    let index: BTreeMap<&str, usize> = sc
        .services
        .iter()
        .enumerate()
        .map(|(i, s)| (s.id.as_str(), i))
        .collect();
    let entries: Vec<usize> = sc.workload.entries.iter().map(|e| index[e.service.as_str()]).collect();
    let pick = WeightedIndex::new(sc.workload.entries.iter().map(|e| e.weight)).expect("validated weights");
    let gap = Exp::new(sc.workload.requests_per_s).expect("validated rate");
    let mut wl = ChaCha8Rng::seed_from_u64(mix(seed, 0xA441));
    let end = sc.end_ts() as f64;
    let mut t = sc.start_ts as f64 + gap.sample(&mut wl);
    let mut i: u64 = 0;
    while t < end {
        let entry = entries[pick.sample(&mut wl)];
        engine.trace_id = format!("r{i}");
        engine.span_counter = 0;
        let key = mix(mix(seed, 0x5EED), i);
        let o = engine.attempt(CLIENT, entry, t, key, None);
        engine.acc.requests.push(RequestRecord {
            ts: t,
            entry,
            ok: o.ok,
            latency_ms: o.latency_ms,
            fault: o.fault,
        });
        i += 1;
        t += gap.sample(&mut wl);
    }
    let mut acc = engine.acc;
    acc.logs.sort_by_key(|l| l.ts);
    acc
}
