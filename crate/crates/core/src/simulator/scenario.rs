//! Scenario description: services, call edges, workload, customers, faults.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::incident::AffinityMap;
use crate::telemetry::Severity;

pub const E2E_SUCCESS_RATE: &str = "e2e_success_rate";
pub const E2E_P95_LATENCY: &str = "e2e_p95_latency_ms";
pub const BUSINESS_METRICS: [&str; 2] = [E2E_SUCCESS_RATE, E2E_P95_LATENCY];
/// Service id under which business metrics are emitted.
pub const BUSINESS_SERVICE: &str = "business";
/// Caller recorded on entry spans.
pub const CLIENT: &str = "client";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum FaultType {
    Delay,
    Error,
    Crash,
    Cpu,
}

impl FaultType {
    pub const ALL: [FaultType; 4] = [FaultType::Delay, FaultType::Error, FaultType::Crash, FaultType::Cpu];
}

impl fmt::Display for FaultType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FaultType::Delay => "DELAY",
            FaultType::Error => "ERROR",
            FaultType::Crash => "CRASH",
            FaultType::Cpu => "CPU",
        })
    }
}

impl FromStr for FaultType {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        FaultType::ALL
            .into_iter()
            .find(|t| t.to_string().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::param("fault_type", format!("unknown fault type {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FaultSpec {
    pub target_service: String,
    pub fault_type: FaultType,
    pub intensity: f64,
    pub start_ts: i64,
    pub duration_s: u32,
}

impl FaultSpec {
    pub fn end_ts(&self) -> i64 {
        self.start_ts + self.duration_s as i64
    }

    /// Whether the fault is active at `t` (seconds, fractional).
    pub fn active_at(&self, t: f64) -> bool {
        t >= self.start_ts as f64 && t < self.end_ts() as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AlertMetric {
    ErrorRate,
    LatencyP95Ms,
    RequestRate,
    /// Fires every interval regardless of metrics.
    Always,
}

impl AlertMetric {
    pub fn metric_name(self) -> Option<&'static str> {
        match self {
            AlertMetric::ErrorRate => Some("error_rate"),
            AlertMetric::LatencyP95Ms => Some("latency_p95_ms"),
            AlertMetric::RequestRate => Some("request_rate"),
            AlertMetric::Always => None,
        }
    }
}

/// Fires when the metric exceeds `threshold` in a metric interval. The
/// text may use `{service}` and `{value}` placeholders.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlertRule {
    pub metric: AlertMetric,
    #[serde(default)]
    pub threshold: f64,
    pub severity: Severity,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ServiceSpec {
    pub id: String,
    pub base_latency_ms: f64,
    /// Log-normal spread of the processing latency.
    #[serde(default = "default_sigma")]
    pub latency_sigma: f64,
    #[serde(default)]
    pub error_rate: f64,
    /// Templates for successful calls; `{name}` placeholders get values.
    #[serde(default)]
    pub log_templates: Vec<String>,
    #[serde(default)]
    pub error_templates: Vec<String>,
    #[serde(default)]
    pub alerts: Vec<AlertRule>,
}

fn default_sigma() -> f64 {
    0.2
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeSpec {
    pub caller: String,
    pub callee: String,
    #[serde(default = "one")]
    pub call_probability: f64,
    /// Probability that the caller waits on the call, so that a failing or
    /// slow callee affects it. Uncoupled calls are fire-and-forget.
    #[serde(default = "one")]
    pub cascade_probability: f64,
    #[serde(default)]
    pub retries: u32,
    /// A failed coupled call is replaced by a cheap local fallback.
    #[serde(default)]
    pub fallback: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntryWeight {
    pub service: String,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Workload {
    pub requests_per_s: f64,
    pub entries: Vec<EntryWeight>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Product {
    pub name: String,
    /// Entry service whose requests belong to this product.
    pub entry: String,
    /// Services the product depends on, for ticket–alert affinity.
    pub services: Vec<String>,
    /// Complaint texts emitted when the product degrades.
    pub ticket_templates: Vec<String>,
    /// Texts for unrelated tickets.
    #[serde(default)]
    pub background_templates: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CustomerModel {
    #[serde(default)]
    pub products: Vec<Product>,
    /// Tickets drawn from requests that went bad because of a fault.
    #[serde(default)]
    pub incident_tickets: usize,
    /// Tickets unrelated to any incident.
    #[serde(default)]
    pub background_tickets: usize,
    /// End-to-end latency above which a request counts as bad.
    #[serde(default = "default_slow_ms")]
    pub slow_ms: f64,
    /// Upper bound of the uniform delay between a bad request and its ticket.
    #[serde(default = "default_report_delay")]
    pub report_delay_s: f64,
}

fn default_slow_ms() -> f64 {
    1000.0
}

fn default_report_delay() -> f64 {
    120.0
}

impl Default for CustomerModel {
    fn default() -> Self {
        CustomerModel {
            products: Vec::new(),
            incident_tickets: 0,
            background_tickets: 0,
            slow_ms: default_slow_ms(),
            report_delay_s: default_report_delay(),
        }
    }
}

/// Fault effect magnitudes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Effects {
    /// DELAY multiplies processing latency by `1 + delay_factor * intensity`.
    pub delay_factor: f64,
    /// CPU multiplies the latency spread by `1 + cpu_factor * intensity`.
    pub cpu_factor: f64,
    pub crash_latency_ms: f64,
    pub fallback_latency_ms: f64,
}

impl Default for Effects {
    fn default() -> Self {
        Effects {
            delay_factor: 10.0,
            cpu_factor: 10.0,
            crash_latency_ms: 5.0,
            fallback_latency_ms: 2.0,
        }
    }
}

fn default_interval() -> u32 {
    60
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub name: String,
    pub start_ts: i64,
    pub duration_s: u32,
    #[serde(default = "default_interval")]
    pub metric_interval_s: u32,
    pub workload: Workload,
    pub services: Vec<ServiceSpec>,
    #[serde(default)]
    pub edges: Vec<EdgeSpec>,
    #[serde(default)]
    pub business_metrics: Vec<String>,
    #[serde(default)]
    pub customers: CustomerModel,
    #[serde(default)]
    pub faults: Vec<FaultSpec>,
    #[serde(default)]
    pub effects: Effects,
}

fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidScenario(msg.into())
}

fn check_prob(p: f64, what: impl fmt::Display) -> Result<()> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(invalid(format!("{what} must lie in [0, 1], got {p}")))
    }
}

impl Scenario {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let sc: Scenario = serde_json::from_str(&text)?;
        sc.validate()?;
        Ok(sc)
    }

    pub fn end_ts(&self) -> i64 {
        self.start_ts + self.duration_s as i64
    }

    pub fn service(&self, id: &str) -> Option<&ServiceSpec> {
        self.services.iter().find(|s| s.id == id)
    }

    pub fn service_ids(&self) -> Vec<String> {
        self.services.iter().map(|s| s.id.clone()).collect()
    }

    pub fn entry_services(&self) -> BTreeSet<&str> {
        self.workload.entries.iter().map(|e| e.service.as_str()).collect()
    }

    pub fn affinity_map(&self) -> AffinityMap {
        AffinityMap(
            self.customers
                .products
                .iter()
                .map(|p| (p.name.clone(), p.services.iter().cloned().collect()))
                .collect(),
        )
    }

    pub fn validate(&self) -> Result<()> {
        if self.duration_s == 0 {
            return Err(invalid("duration_s must be positive"));
        }
        if self.metric_interval_s == 0 {
            return Err(invalid("metric_interval_s must be positive"));
        }
        let mut ids: HashMap<&str, usize> = HashMap::new();
        for (i, s) in self.services.iter().enumerate() {
            if s.id.is_empty() || s.id == CLIENT || s.id == BUSINESS_SERVICE {
                return Err(invalid(format!("reserved or empty service id {:?}", s.id)));
            }
            if ids.insert(&s.id, i).is_some() {
                return Err(invalid(format!("duplicate service {:?}", s.id)));
            }
            if !(s.base_latency_ms >= 0.0 && s.latency_sigma >= 0.0) {
                return Err(invalid(format!(
                    "service {:?}: latency parameters must be non-negative",
                    s.id
                )));
            }
            check_prob(s.error_rate, format_args!("service {:?} error_rate", s.id))?;
        }
        let known = |id: &str, what: &str| -> Result<usize> {
            ids.get(id)
                .copied()
                .ok_or_else(|| invalid(format!("{what} refers to unknown service {id:?}")))
        };
        let mut adj: Vec<Vec<usize>> = vec![Vec::new(); self.services.len()];
        let mut seen = BTreeSet::new();
        for e in &self.edges {
            let (a, b) = (known(&e.caller, "edge")?, known(&e.callee, "edge")?);
            if a == b {
                return Err(invalid(format!("self edge on {:?}", e.caller)));
            }
            if !seen.insert((a, b)) {
                return Err(invalid(format!("duplicate edge {} -> {}", e.caller, e.callee)));
            }
            check_prob(
                e.call_probability,
                format_args!("edge {}->{} call_probability", e.caller, e.callee),
            )?;
            check_prob(
                e.cascade_probability,
                format_args!("edge {}->{} cascade_probability", e.caller, e.callee),
            )?;
            adj[a].push(b);
        }
        // Kahn's algorithm: every node must be removable.
        let mut indeg = vec![0usize; adj.len()];
        for out in &adj {
            for &b in out {
                indeg[b] += 1;
            }
        }
        let mut stack: Vec<usize> = (0..adj.len()).filter(|&i| indeg[i] == 0).collect();
        let mut removed = 0;
        while let Some(u) = stack.pop() {
            removed += 1;
            for &v in &adj[u] {
                indeg[v] -= 1;
                if indeg[v] == 0 {
                    stack.push(v);
                }
            }
        }
        if removed != adj.len() {
            return Err(invalid("service graph has a cycle"));
        }

        if !(self.workload.requests_per_s > 0.0) {
            return Err(invalid("workload.requests_per_s must be positive"));
        }
        if self.workload.entries.is_empty() {
            return Err(invalid("workload needs at least one entry service"));
        }
        for e in &self.workload.entries {
            known(&e.service, "workload entry")?;
            if !(e.weight > 0.0) {
                return Err(invalid(format!("entry weight for {:?} must be positive", e.service)));
            }
        }
        for m in &self.business_metrics {
            if !BUSINESS_METRICS.contains(&m.as_str()) {
                return Err(Error::UnknownBusinessMetric(m.clone()));
            }
        }
        let entries = self.entry_services();
        let mut product_names = BTreeSet::new();
        for p in &self.customers.products {
            if !product_names.insert(&p.name) {
                return Err(invalid(format!("duplicate product {:?}", p.name)));
            }
            if !entries.contains(p.entry.as_str()) {
                return Err(invalid(format!(
                    "product {:?} entry {:?} is not a workload entry",
                    p.name, p.entry
                )));
            }
            for s in &p.services {
                known(s, "product")?;
            }
            if p.ticket_templates.is_empty() {
                return Err(invalid(format!("product {:?} has no ticket templates", p.name)));
            }
        }
        if self.customers.background_tickets > 0
            && self
                .customers
                .products
                .iter()
                .all(|p| p.background_templates.is_empty())
        {
            return Err(invalid("background tickets need background templates"));
        }
        for f in &self.faults {
            if !ids.contains_key(f.target_service.as_str()) {
                return Err(Error::UnknownService(f.target_service.clone()));
            }
            if !(f.intensity > 0.0 && f.intensity <= 1.0) {
                return Err(invalid(format!(
                    "fault intensity must lie in (0, 1], got {}",
                    f.intensity
                )));
            }
            if f.duration_s == 0 {
                return Err(invalid("fault duration_s must be positive"));
            }
        }
        Ok(())
    }

    /// Products keyed by entry service.
    pub(crate) fn product_by_entry(&self) -> BTreeMap<&str, &Product> {
        self.customers.products.iter().map(|p| (p.entry.as_str(), p)).collect()
    }
}
