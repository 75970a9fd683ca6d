//! Bundled scenarios.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::engine::mix;
use super::scenario::*;
use crate::telemetry::Severity;

const T0: i64 = 1_699_999_800;

fn service(id: &str, latency_ms: f64, error_rate: f64) -> ServiceSpec {
    ServiceSpec {
        id: id.to_string(),
        base_latency_ms: latency_ms,
        latency_sigma: 0.2,
        error_rate,
        log_templates: vec![format!("{id} handled request {{id}} in {{n}} ms")],
        error_templates: vec![format!("{id} request {{id}} failed with upstream error")],
        alerts: Vec::new(),
    }
}

fn edge(caller: &str, callee: &str, cascade: f64) -> EdgeSpec {
    EdgeSpec {
        caller: caller.to_string(),
        callee: callee.to_string(),
        call_probability: 1.0,
        cascade_probability: cascade,
        retries: 0,
        fallback: false,
    }
}

fn error_alert(threshold: f64, text: &str) -> AlertRule {
    AlertRule {
        metric: AlertMetric::ErrorRate,
        threshold,
        severity: Severity::Critical,
        text: text.to_string(),
    }
}

fn latency_alert(threshold: f64, text: &str) -> AlertRule {
    AlertRule {
        metric: AlertMetric::LatencyP95Ms,
        threshold,
        severity: Severity::Critical,
        text: text.to_string(),
    }
}

fn heartbeat() -> AlertRule {
    AlertRule {
        metric: AlertMetric::Always,
        threshold: 0.0,
        severity: Severity::Info,
        text: "Heartbeat OK from monitoring agent".to_string(),
    }
}

fn entry(service: &str, weight: f64) -> EntryWeight {
    EntryWeight {
        service: service.to_string(),
        weight,
    }
}

fn strings(v: &[&str]) -> Vec<String> {
    v.iter().map(|s| s.to_string()).collect()
}

fn fault(target: &str, fault_type: FaultType, intensity: f64, offset_s: i64, duration_s: u32) -> FaultSpec {
    FaultSpec {
        target_service: target.to_string(),
        fault_type,
        intensity,
        start_ts: T0 + offset_s,
        duration_s,
    }
}

/// Cloud platform with four customer products over shared infrastructure.
///
/// VM and WebApp customers both depend on storage, so a storage fault
/// raises alerts on storage, vm and webapp and draws tickets from two
/// products with unrelated wording. Two further incidents hit the network
/// (Database customers) and auth (Mail customers), partially overlapping in
/// time. A backup job calls storage fire-and-forget and stays healthy.
pub fn fig2() -> Scenario {
    let mut storage = service("storage", 20.0, 0.001);
    storage.log_templates = strings(&[
        "Read block {id} from volume {id} on host {ip}",
        "Volume {id} IO completed in {n} us",
    ]);
    storage.error_templates = strings(&["IO error on volume {id}: write rejected by backend {ip}"]);
    storage.alerts = vec![
        error_alert(
            0.2,
            "Storage backend error rate {value} exceeds threshold, volume IO failing",
        ),
        heartbeat(),
    ];
    let mut compute = service("compute", 15.0, 0.001);
    compute.alerts = vec![error_alert(0.2, "Compute scheduler error rate {value} above threshold")];
    let mut cache = service("cache", 5.0, 0.001);
    cache.alerts = vec![error_alert(0.2, "Cache lookup error rate {value} above threshold")];
    let mut network = service("network", 10.0, 0.001);
    network.alerts = vec![latency_alert(
        40.0,
        "Network packet latency p95 {value} ms high on core switch",
    )];
    let mut auth = service("auth", 10.0, 0.001);
    auth.alerts = vec![error_alert(0.2, "Auth login failure rate {value} above threshold")];

    let mut vm = service("vm", 30.0, 0.0);
    vm.log_templates = strings(&[
        "Creating instance {uuid} on host {ip}",
        "Instance {uuid} started in {n} ms",
    ]);
    vm.error_templates = strings(&["Failed to start instance {uuid}: volume attach error"]);
    vm.alerts = vec![
        error_alert(0.2, "VM provisioning failure rate {value} for virtual machine start"),
        heartbeat(),
    ];
    let mut webapp = service("webapp", 25.0, 0.0);
    webapp.alerts = vec![error_alert(
        0.2,
        "Web app HTTP 5xx rate {value} above threshold on site frontend",
    )];
    let mut db = service("db", 25.0, 0.0);
    db.alerts = vec![latency_alert(
        110.0,
        "Database query latency p95 {value} ms above threshold",
    )];
    let mut mail = service("mail", 20.0, 0.0);
    mail.alerts = vec![error_alert(0.2, "Mail delivery failure rate {value} above threshold")];
    let mut backup = service("backup", 40.0, 0.0);
    backup.alerts = vec![error_alert(0.2, "Backup job failure rate {value} above threshold")];

    let mut cache_edge = edge("webapp", "cache", 1.0);
    cache_edge.fallback = true;

    Scenario {
        name: "fig2".to_string(),
        start_ts: T0,
        duration_s: 4200,
        metric_interval_s: 60,
        workload: Workload {
            requests_per_s: 4.0,
            entries: vec![
                entry("vm", 3.0),
                entry("webapp", 3.0),
                entry("db", 2.0),
                entry("mail", 2.0),
                entry("backup", 1.0),
            ],
        },
        services: vec![storage, compute, cache, network, auth, vm, webapp, db, mail, backup],
        edges: vec![
            edge("vm", "storage", 1.0),
            edge("vm", "compute", 1.0),
            edge("webapp", "storage", 1.0),
            cache_edge,
            edge("db", "network", 1.0),
            edge("mail", "auth", 1.0),
            edge("backup", "storage", 0.0),
        ],
        business_metrics: strings(&BUSINESS_METRICS),
        customers: CustomerModel {
            products: vec![
                Product {
                    name: "VirtualMachines".to_string(),
                    entry: "vm".to_string(),
                    services: strings(&["vm", "storage", "compute"]),
                    ticket_templates: strings(&[
                        "Cannot start my virtual machine",
                        "Virtual machine start keeps failing",
                        "VM provisioning stuck, machine never starts",
                    ]),
                    background_templates: strings(&[
                        "How do I change the billing contact on my subscription?",
                        "Please send an invoice copy for last month",
                    ]),
                },
                Product {
                    name: "WebApps".to_string(),
                    entry: "webapp".to_string(),
                    services: strings(&["webapp", "storage", "cache"]),
                    ticket_templates: strings(&[
                        "Website shows HTTP 5xx pages",
                        "Our site frontend returns HTTP errors",
                        "Web app pages fail to load for customers",
                    ]),
                    background_templates: strings(&[
                        "Need guidance configuring a custom domain name",
                        "Question about pricing tiers for premium plans",
                    ]),
                },
                Product {
                    name: "Databases".to_string(),
                    entry: "db".to_string(),
                    services: strings(&["db", "network"]),
                    ticket_templates: strings(&[
                        "Database query latency is terrible today",
                        "Queries on our database take seconds",
                        "Slow database responses, query latency high",
                    ]),
                    background_templates: strings(&[
                        "How can we export schema documentation?",
                        "Requesting quota increase for our subscription",
                    ]),
                },
                Product {
                    name: "Mail".to_string(),
                    entry: "mail".to_string(),
                    services: strings(&["mail", "auth"]),
                    ticket_templates: strings(&[
                        "Users cannot login to mail",
                        "Mail delivery failure for outgoing messages",
                        "Login failure when opening mailbox",
                    ]),
                    background_templates: strings(&[
                        "Please add a new team member to our organization",
                        "How do we set up an autoresponder signature?",
                    ]),
                },
            ],
            incident_tickets: 80,
            background_tickets: 120,
            slow_ms: 100.0,
            report_delay_s: 120.0,
        },
        faults: vec![
            fault("storage", FaultType::Error, 0.5, 600, 1200),
            fault("network", FaultType::Delay, 1.0, 1500, 1200),
            fault("auth", FaultType::Error, 0.6, 2400, 1200),
        ],
        effects: Effects::default(),
    }
}

/// A front service with one coupled and one fire-and-forget dependency,
/// each faulted in its own window.
#[derive(Debug, Clone)]
pub struct IntensityProbe {
    pub scenario: Scenario,
    /// (caller, callee) whose cascade probability is the probe parameter.
    pub strong: (String, String),
    /// (caller, callee) with cascade probability 0.
    pub weak: (String, String),
}

pub fn intensity_probe(strong_cascade: f64) -> IntensityProbe {
    let front = service("frontend", 20.0, 0.0);
    let orders = service("orders", 15.0, 0.0);
    let audit = service("audit", 15.0, 0.0);
    Scenario {
        name: format!("intensity-probe-{strong_cascade}"),
        start_ts: T0,
        duration_s: 3600,
        metric_interval_s: 30,
        workload: Workload {
            requests_per_s: 4.0,
            entries: vec![entry("frontend", 1.0)],
        },
        services: vec![front, orders, audit],
        edges: vec![
            edge("frontend", "orders", strong_cascade),
            edge("frontend", "audit", 0.0),
        ],
        business_metrics: strings(&BUSINESS_METRICS),
        customers: CustomerModel::default(),
        faults: vec![
            fault("orders", FaultType::Error, 0.5, 300, 600),
            fault("audit", FaultType::Error, 0.5, 2400, 600),
        ],
        effects: Effects::default(),
    }
    .into_probe()
}

impl Scenario {
    fn into_probe(self) -> IntensityProbe {
        IntensityProbe {
            scenario: self,
            strong: ("frontend".to_string(), "orders".to_string()),
            weak: ("frontend".to_string(), "audit".to_string()),
        }
    }
}

/// Random layered topology (two entries, two or three mid-tier services,
/// two or three leaves) with one ERROR or DELAY fault on a random service.
pub fn rca_scenario(seed: u64) -> Scenario {
    let mut rng = ChaCha8Rng::seed_from_u64(mix(seed, 0x0CA));
    let n_mid = rng.random_range(2..=3);
    let n_leaf = rng.random_range(2..=3);
    let entries: Vec<String> = (0..2).map(|i| format!("gateway-{i}")).collect();
    let mids: Vec<String> = (0..n_mid).map(|i| format!("svc-{i}")).collect();
    let leaves: Vec<String> = (0..n_leaf).map(|i| format!("store-{i}")).collect();

    let mut services = Vec::new();
    for id in &entries {
        services.push(service(id, rng.random_range(10.0..30.0), 0.0));
    }
    for id in mids.iter().chain(&leaves) {
        services.push(service(id, rng.random_range(10.0..40.0), 0.001));
    }

    let mut edges = Vec::new();
    let mut connect = |callers: &[String], callees: &[String], rng: &mut ChaCha8Rng| {
        let mut called = vec![false; callees.len()];
        for c in callers {
            let k = rng.random_range(1..=2.min(callees.len()));
            let mut idx: Vec<usize> = (0..callees.len()).collect();
            for j in 0..k {
                let s = rng.random_range(j..idx.len());
                idx.swap(j, s);
            }
            for &j in &idx[..k] {
                called[j] = true;
                edges.push(edge(c, &callees[j], rng.random_range(0.8..=1.0)));
            }
        }
        // Every callee gets at least one caller.
        for (j, was) in called.iter().enumerate() {
            if !was {
                let c = &callers[rng.random_range(0..callers.len())];
                edges.push(edge(c, &callees[j], rng.random_range(0.8..=1.0)));
            }
        }
    };
    connect(&entries, &mids, &mut rng);
    connect(&mids, &leaves, &mut rng);

    let all: Vec<&String> = entries.iter().chain(&mids).chain(&leaves).collect();
    let target = all[rng.random_range(0..all.len())].clone();
    let (ftype, intensity) = if rng.random_bool(0.5) {
        (FaultType::Error, rng.random_range(0.3..0.8))
    } else {
        (FaultType::Delay, rng.random_range(0.3..1.0))
    };

    Scenario {
        name: format!("rca-{seed}"),
        start_ts: T0,
        duration_s: 1800,
        metric_interval_s: 30,
        workload: Workload {
            requests_per_s: 4.0,
            entries: entries.iter().map(|e| entry(e, 1.0)).collect(),
        },
        services,
        edges,
        business_metrics: strings(&BUSINESS_METRICS),
        customers: CustomerModel::default(),
        faults: vec![fault(&target, ftype, intensity, 900, 600)],
        effects: Effects::default(),
    }
}

/// `gateway` calls `catalog` (which calls `inventory`) and `payments`.
/// Every edge falls back locally on failure when `fallback` is set.
pub fn resilience_chain(fallback: bool) -> Scenario {
    let names = ["gateway", "catalog", "inventory", "payments"];
    let services = names
        .iter()
        .zip([15.0, 20.0, 25.0, 20.0])
        .map(|(n, l)| service(n, l, 0.0))
        .collect();
    let edges = [
        ("gateway", "catalog"),
        ("catalog", "inventory"),
        ("gateway", "payments"),
    ]
    .iter()
    .map(|(a, b)| EdgeSpec {
        fallback,
        ..edge(a, b, 1.0)
    })
    .collect();
    Scenario {
        name: format!("resilience-chain{}", if fallback { "-fallback" } else { "" }),
        start_ts: T0,
        duration_s: 1200,
        metric_interval_s: 60,
        workload: Workload {
            requests_per_s: 5.0,
            entries: vec![entry("gateway", 1.0)],
        },
        services,
        edges,
        business_metrics: strings(&BUSINESS_METRICS),
        customers: CustomerModel::default(),
        faults: Vec::new(),
        effects: Effects::default(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_scenarios_validate() {
        fig2().validate().unwrap();
        intensity_probe(0.5).scenario.validate().unwrap();
        resilience_chain(true).validate().unwrap();
        for seed in 0..50 {
            rca_scenario(seed).validate().unwrap();
        }
    }
}
