//! Labeled VM-lifecycle log sessions for detector and identification tests.
//!
//! A normal session provisions an instance, attaches a volume, optionally
//! resizes or snapshots, then tears everything down. Failure sessions
//! deviate in type-specific ways. `wrong_resource` releases the instance id
//! where the volume id belongs: the message text has the same shape as a
//! normal release, so only concept-aware templates can tell them apart.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::engine::mix;
use crate::telemetry::{LogLevel, LogRecord};

pub const NORMAL: &str = "normal";
pub const FAILURE_TYPES: [&str; 4] = ["auth_rejected", "disk_full", "network_timeout", "wrong_resource"];
const SERVICE: &str = "compute-api";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledSessions {
    /// Time-ordered records, one session id per workflow.
    pub records: Vec<LogRecord>,
    /// Session id → `normal` or a failure type, in generation order.
    pub labels: Vec<(String, String)>,
}

impl LabeledSessions {
    pub fn label_map(&self) -> BTreeMap<&str, &str> {
        self.labels.iter().map(|(s, l)| (s.as_str(), l.as_str())).collect()
    }
}

// Hex identifier that always contains a digit.
fn hex_id(rng: &mut impl Rng) -> String {
    format!("{}{:07x}", rng.random_range(1..10), rng.random::<u32>() & 0x0fff_ffff)
}

fn ip(rng: &mut impl Rng) -> String {
    format!(
        "10.{}.{}.{}",
        rng.random_range(0..4),
        rng.random_range(0..256),
        rng.random_range(1..255)
    )
}

/// `n_sessions` sessions; each is a failure with probability
/// `failure_fraction`, with failure types drawn uniformly.
pub fn session_workload(seed: u64, n_sessions: usize, failure_fraction: f64) -> LabeledSessions {
    let mut rng = ChaCha8Rng::seed_from_u64(mix(seed, 0x5E55));
    let mut out = LabeledSessions {
        records: Vec::new(),
        labels: Vec::new(),
    };
    let t0 = 1_700_000_000i64;
    for i in 0..n_sessions {
        let kind = if rng.random_bool(failure_fraction.clamp(0.0, 1.0)) {
            FAILURE_TYPES[rng.random_range(0..FAILURE_TYPES.len())]
        } else {
            NORMAL
        };
        let sid = format!("s{i:05}");
        let messages = workflow(kind, &mut rng);
        let start = t0 + i as i64 * 60;
        for (k, (level, msg)) in messages.into_iter().enumerate() {
            out.records
                .push(LogRecord::new(start + k as i64 * 2, SERVICE, level, msg).with_session(sid.clone()));
        }
        out.labels.push((sid, kind.to_string()));
    }
    out
}

fn workflow(kind: &str, rng: &mut impl Rng) -> Vec<(LogLevel, String)> {
    use LogLevel::{Error, Info, Warn};
    let inst = hex_id(rng);
    let vol = hex_id(rng);
    let project = hex_id(rng);
    let host = ip(rng);
    let mut m: Vec<(LogLevel, String)> = Vec::new();

    if kind == "auth_rejected" {
        let token = hex_id(rng);
        m.push((Info, format!("Received create request for project {project}")));
        m.push((Warn, format!("Token {token} rejected for project {project}")));
        m.push((
            Error,
            format!("Request aborted for project {project}: authentication failed"),
        ));
        return m;
    }

    m.push((Info, format!("Received create request for project {project}")));
    m.push((Info, format!("Creating instance {inst} for project {project}")));
    m.push((
        Info,
        format!("Allocated volume {vol} size {} GB", rng.random_range(10..500)),
    ));

    if kind == "disk_full" {
        let disk = format!("sd{}", ["a", "b", "c", "d"][rng.random_range(0..4)]);
        m.push((Error, format!("Write failed on {vol}: no space left on disk {disk}")));
        m.push((Warn, format!("Rolling back {inst}")));
        m.push((Info, format!("Released {vol}")));
        return m;
    }

    m.push((Info, format!("Attaching {vol} to {inst}")));

    if kind == "network_timeout" {
        for _ in 0..rng.random_range(2..4) {
            m.push((
                Warn,
                format!(
                    "Timed out connecting to host {host} after {} ms",
                    rng.random_range(3000..9000)
                ),
            ));
        }
        m.push((Error, format!("Instance {inst} marked ERROR after spawn failure")));
        m.push((Info, format!("Detaching {vol} from {inst}")));
        m.push((Info, format!("Released {vol}")));
        return m;
    }

    m.push((Info, format!("Instance {inst} spawned on host {host}")));
    match rng.random_range(0..3) {
        0 => m.push((Info, format!("Resized {inst} to flavor {}", rng.random_range(10..20)))),
        1 => {
            let snap = hex_id(rng);
            m.push((Info, format!("Snapshot {snap} created for {inst}")))
        }
        _ => {}
    }
    m.push((Info, format!("Detaching {vol} from {inst}")));
    if kind == "wrong_resource" {
        m.push((Info, format!("Released {inst}")));
    } else {
        m.push((Info, format!("Released {vol}")));
    }
    m.push((Info, format!("Terminated {inst}")));
    m
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sessions_are_ordered_and_labeled() {
        let w = session_workload(5, 200, 0.3);
        assert_eq!(w.labels.len(), 200);
        assert!(w.records.windows(2).all(|p| p[0].ts <= p[1].ts));
        let failures = w.labels.iter().filter(|(_, l)| l != NORMAL).count();
        assert!((30..90).contains(&failures));
        for t in FAILURE_TYPES {
            assert!(w.labels.iter().any(|(_, l)| l == t), "missing {t}");
        }
        assert_eq!(session_workload(5, 200, 0.3), w);
    }

    #[test]
    fn wrong_resource_differs_only_in_released_id() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let msgs = workflow("wrong_resource", &mut rng);
        let inst = msgs[1].1.split_whitespace().nth(2).unwrap().to_string();
        let released = msgs.iter().find(|(_, m)| m.starts_with("Released")).unwrap();
        assert_eq!(released.1, format!("Released {inst}"));
    }
}
