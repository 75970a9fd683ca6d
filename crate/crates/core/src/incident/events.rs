//! Alert parsing into coarse events and the bucket grid they live on.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::logparse::{syntax_parse, DEFAULT_DEPTH, DEFAULT_SIM_THRESHOLD};
use crate::telemetry::Alert;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub event_id: String,
    pub template_id: usize,
    pub template: String,
    pub service_id: String,
    /// Sorted alert timestamps.
    pub occurrences: Vec<i64>,
    /// Ids of the grouped alerts, aligned with `occurrences`.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub alert_ids: Vec<String>,
}

impl Event {
    pub fn buckets(&self, grid: &BucketGrid) -> BTreeSet<usize> {
        self.occurrences.iter().filter_map(|&t| grid.bucket_of(t)).collect()
    }

    /// Distance in seconds from `ts` to the closest occurrence.
    pub fn nearest_gap(&self, ts: i64) -> i64 {
        let i = self.occurrences.partition_point(|&t| t < ts);
        let after = self.occurrences.get(i).map(|t| t - ts);
        let before = i.checked_sub(1).map(|j| ts - self.occurrences[j]);
        after.into_iter().chain(before).min().unwrap_or(i64::MAX)
    }
}

/// Fixed time buckets `[origin + k * bucket_s, origin + (k + 1) * bucket_s)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BucketGrid {
    pub origin: i64,
    pub bucket_s: i64,
    pub n_buckets: usize,
}

impl BucketGrid {
    pub fn new(origin: i64, bucket_s: i64, n_buckets: usize) -> Result<Self> {
        if bucket_s <= 0 {
            return Err(Error::param("bucket_s", "must be positive"));
        }
        Ok(BucketGrid {
            origin,
            bucket_s,
            n_buckets,
        })
    }

    /// Smallest grid aligned to multiples of `bucket_s` covering every
    /// occurrence.
    pub fn covering(events: &[Event], bucket_s: i64) -> Result<Self> {
        if bucket_s <= 0 {
            return Err(Error::param("bucket_s", "must be positive"));
        }
        let all = events.iter().flat_map(|e| e.occurrences.iter().copied());
        let (lo, hi) = all.fold((i64::MAX, i64::MIN), |(lo, hi), t| (lo.min(t), hi.max(t)));
        if lo > hi {
            return BucketGrid::new(0, bucket_s, 0);
        }
        let origin = lo.div_euclid(bucket_s) * bucket_s;
        let n = (hi - origin).div_euclid(bucket_s) as usize + 1;
        BucketGrid::new(origin, bucket_s, n)
    }

    pub fn bucket_of(&self, ts: i64) -> Option<usize> {
        if ts < self.origin {
            return None;
        }
        let k = ((ts - self.origin) / self.bucket_s) as usize;
        (k < self.n_buckets).then_some(k)
    }
}

/// Groups alerts by (syntax template of the text, service). Event ids are
/// `E0, E1, ...` in order of first appearance.
pub fn parse_alerts(alerts: &[Alert]) -> Vec<Event> {
    if alerts.is_empty() {
        return Vec::new();
    }
    let texts: Vec<&str> = alerts.iter().map(|a| a.text.as_str()).collect();
    let parse = syntax_parse(&texts, DEFAULT_DEPTH, DEFAULT_SIM_THRESHOLD).expect("default drain parameters are valid");

    let mut index: BTreeMap<(usize, &str), usize> = BTreeMap::new();
    let mut events: Vec<Event> = Vec::new();
    for (i, a) in alerts.iter().enumerate() {
        let gid = parse.assignment[i];
        let idx = *index.entry((gid, a.service_id.as_str())).or_insert_with(|| {
            events.push(Event {
                event_id: format!("E{}", events.len()),
                template_id: gid,
                template: parse.groups[gid].template(),
                service_id: a.service_id.clone(),
                occurrences: Vec::new(),
                alert_ids: Vec::new(),
            });
            events.len() - 1
        });
        events[idx].occurrences.push(a.ts);
        events[idx].alert_ids.push(a.alert_id.clone());
    }
    for e in &mut events {
        let mut pairs: Vec<(i64, String)> = e.occurrences.drain(..).zip(e.alert_ids.drain(..)).collect();
        pairs.sort();
        (e.occurrences, e.alert_ids) = pairs.into_iter().unzip();
    }
    events
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::telemetry::Severity;

    fn alert(i: usize, ts: i64, svc: &str, text: &str) -> Alert {
        Alert::new(format!("a{i}"), ts, svc, Severity::Warning, text)
    }

    #[test]
    fn identical_alerts_collapse() {
        let alerts: Vec<Alert> = (0..10)
            .map(|i| alert(i, i as i64 * 60, "vm", "VM allocation failed"))
            .collect();
        let ev = parse_alerts(&alerts);
        assert_eq!(ev.len(), 1);
        assert_eq!(ev[0].occurrences.len(), 10);
    }

    #[test]
    fn service_is_part_of_the_key() {
        let ev = parse_alerts(&[alert(0, 0, "a", "disk full"), alert(1, 1, "b", "disk full")]);
        assert_eq!(ev.len(), 2);
        assert_eq!(ev[0].template_id, ev[1].template_id);
    }

    #[test]
    fn mixed_stream_partitions_exactly() {
        // 20 alerts cycling through 3 templates (with varying parameters)
        // and 2 services. Hand grouping: key = (template kind, service).
        let kinds = [
            "latency high on disk d{}",
            "request failed code {} upstream",
            "queue backlog {} items",
        ];
        let mut alerts = Vec::new();
        let mut expected: BTreeMap<(usize, &str), Vec<i64>> = BTreeMap::new();
        for i in 0..20usize {
            let k = i % 3;
            let svc = if i % 2 == 0 { "s1" } else { "s2" };
            let text = kinds[k].replace("{}", &(100 + i).to_string());
            alerts.push(alert(i, i as i64 * 10, svc, &text));
            expected.entry((k, svc)).or_default().push(i as i64 * 10);
        }
        let ev = parse_alerts(&alerts);
        assert!(ev.len() <= 6);
        assert_eq!(ev.len(), expected.len());
        let mut got: Vec<Vec<i64>> = ev.iter().map(|e| e.occurrences.clone()).collect();
        let mut want: Vec<Vec<i64>> = expected.into_values().collect();
        got.sort();
        want.sort();
        assert_eq!(got, want);
        assert_eq!(ev.iter().map(|e| e.occurrences.len()).sum::<usize>(), 20);
    }

    #[test]
    fn grid_alignment_and_nearest_gap() {
        let e = Event {
            event_id: "E0".into(),
            template_id: 0,
            template: "x".into(),
            service_id: "s".into(),
            occurrences: vec![310, 900, 1500],
            alert_ids: Vec::new(),
        };
        let g = BucketGrid::covering(std::slice::from_ref(&e), 300).unwrap();
        assert_eq!((g.origin, g.n_buckets), (300, 5));
        assert_eq!(e.buckets(&g).into_iter().collect::<Vec<_>>(), vec![0, 2, 4]);
        assert_eq!(e.nearest_gap(1000), 100);
        assert_eq!(e.nearest_gap(0), 310);
        assert_eq!(e.nearest_gap(2000), 500);
    }
}
