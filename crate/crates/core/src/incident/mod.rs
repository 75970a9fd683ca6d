//! Duplicate-ticket aggregation through incident profiling.
//!
//! Alerts are grouped into coarse events, regular events are dropped and
//! co-occurring indicative events are linked into a graph. Each ticket is
//! linked to its best-scoring event, and tickets whose events share a
//! graph component are aggregated.

mod events;
mod graph;
mod scorer;
mod text;

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

pub use events::{parse_alerts, BucketGrid, Event};
pub use graph::{
    occupancy, profile_incidents, windowed_jaccard, Edge, EventGraph, ProfileParams, DEFAULT_BUCKET_S,
    DEFAULT_LINK_THRESHOLD, DEFAULT_LINK_WINDOW, DEFAULT_REGULAR_THRESHOLD,
};
pub use scorer::{accuracy, sigmoid, train_scorer, Features, ScorerWeights, TrainReport, MAX_EPOCHS, REL_TOL};
pub use text::{cosine, terms, SparseVec, TfIdf};

use crate::error::{Error, Result};
use crate::telemetry::Ticket;

pub const DEFAULT_LINK_SCORE: f64 = 0.5;
pub const DEFAULT_LAMBDA_S: f64 = 600.0;

/// Product → services the product depends on.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct AffinityMap(pub BTreeMap<String, BTreeSet<String>>);

impl AffinityMap {
    pub fn affinity(&self, product: &str, service: &str) -> f64 {
        match self.0.get(product) {
            Some(s) if s.contains(service) => 1.0,
            _ => 0.0,
        }
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }
}

/// Feature extraction and scoring for ticket–event pairs.
#[derive(Debug, Clone)]
pub struct Correlator {
    pub tfidf: TfIdf,
    pub affinity: AffinityMap,
    pub lambda_s: f64,
    pub weights: ScorerWeights,
    pub link_score: f64,
}

impl Correlator {
    /// Fits the text model on event templates and ticket texts.
    pub fn new(events: &[Event], tickets: &[Ticket], affinity: AffinityMap) -> Self {
        let docs = events
            .iter()
            .map(|e| e.template.as_str())
            .chain(tickets.iter().map(|t| t.text.as_str()));
        Correlator {
            tfidf: TfIdf::fit(docs),
            affinity,
            lambda_s: DEFAULT_LAMBDA_S,
            weights: ScorerWeights::default(),
            link_score: DEFAULT_LINK_SCORE,
        }
    }

    pub fn features(&self, ticket: &Ticket, event: &Event) -> Features {
        let text = cosine(
            &self.tfidf.vectorize(&ticket.text),
            &self.tfidf.vectorize(&event.template),
        );
        let gap = event.nearest_gap(ticket.ts) as f64;
        let proximity = (-gap / self.lambda_s).exp();
        [
            text,
            proximity,
            self.affinity.affinity(&ticket.product, &event.service_id),
        ]
    }

    pub fn score(&self, ticket: &Ticket, event: &Event) -> f64 {
        self.weights.score(&self.features(ticket, event))
    }

    /// Best-scoring event for the ticket; ties go to the earlier event.
    pub fn correlate(&self, ticket: &Ticket, events: &[&Event]) -> TicketLink {
        let mut best: Option<(&Event, f64)> = None;
        for e in events {
            let s = self.score(ticket, e);
            if best.is_none_or(|(_, b)| s > b) {
                best = Some((e, s));
            }
        }
        match best {
            Some((e, score)) => TicketLink {
                ticket_id: ticket.ticket_id.clone(),
                event_id: Some(e.event_id.clone()),
                score,
                linked: score >= self.link_score,
            },
            None => TicketLink {
                ticket_id: ticket.ticket_id.clone(),
                event_id: None,
                score: 0.0,
                linked: false,
            },
        }
    }

    /// Correlates every ticket against the indicative events of `graph`.
    pub fn correlate_all(&self, tickets: &[Ticket], events: &[Event], graph: &EventGraph) -> Vec<TicketLink> {
        let candidates: Vec<&Event> = events.iter().filter(|e| graph.contains(&e.event_id)).collect();
        tickets.iter().map(|t| self.correlate(t, &candidates)).collect()
    }

    /// Fits the scorer weights on labeled pairs and installs them.
    pub fn train(&mut self, pairs: &[(&Ticket, &Event, bool)]) -> Result<TrainReport> {
        let data: Vec<(Features, bool)> = pairs.iter().map(|(t, e, y)| (self.features(t, e), *y)).collect();
        let (w, report) = train_scorer(&data)?;
        self.weights = w;
        Ok(report)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TicketLink {
    pub ticket_id: String,
    /// Best-scoring event, reported even when not linked.
    pub event_id: Option<String>,
    pub score: f64,
    pub linked: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TicketCluster {
    pub cluster_id: usize,
    pub ticket_ids: Vec<String>,
    pub event_component_id: Option<usize>,
}

/// Linked tickets grouped by the component of their event, then unlinked
/// tickets as singletons in input order.
pub fn aggregate_tickets(links: &[TicketLink], graph: &EventGraph) -> Result<Vec<TicketCluster>> {
    let mut by_component: BTreeMap<usize, Vec<String>> = BTreeMap::new();
    let mut singles = Vec::new();
    for l in links {
        match (&l.event_id, l.linked) {
            (Some(e), true) => {
                let c = graph.component_of(e).ok_or_else(|| Error::UnknownEvent(e.clone()))?;
                by_component.entry(c).or_default().push(l.ticket_id.clone());
            }
            _ => singles.push(l.ticket_id.clone()),
        }
    }
    let mut out: Vec<TicketCluster> = by_component
        .into_iter()
        .map(|(c, ids)| TicketCluster {
            cluster_id: 0,
            ticket_ids: ids,
            event_component_id: Some(c),
        })
        .collect();
    out.extend(singles.into_iter().map(|id| TicketCluster {
        cluster_id: 0,
        ticket_ids: vec![id],
        event_component_id: None,
    }));
    for (i, c) in out.iter_mut().enumerate() {
        c.cluster_id = i;
    }
    Ok(out)
}

/// Cluster id per ticket id.
pub fn cluster_assignment(clusters: &[TicketCluster]) -> BTreeMap<String, usize> {
    clusters
        .iter()
        .flat_map(|c| c.ticket_ids.iter().map(move |t| (t.clone(), c.cluster_id)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ev(id: &str, svc: &str, template: &str, occ: &[i64]) -> Event {
        Event {
            event_id: id.into(),
            template_id: 0,
            template: template.into(),
            service_id: svc.into(),
            occurrences: occ.to_vec(),
            alert_ids: Vec::new(),
        }
    }

    fn affinity(pairs: &[(&str, &str)]) -> AffinityMap {
        let mut m = AffinityMap::default();
        for (p, s) in pairs {
            m.0.entry(p.to_string()).or_default().insert(s.to_string());
        }
        m
    }

    #[test]
    fn maximal_features_link() {
        let e = ev("E0", "vm", "VM allocation failure", &[1000]);
        let t = Ticket::new("t0", 1000, "VM", "VM allocation failure", "c");
        let c = Correlator::new(
            std::slice::from_ref(&e),
            std::slice::from_ref(&t),
            affinity(&[("VM", "vm")]),
        );
        assert_eq!(c.features(&t, &e), [1.0, 1.0, 1.0]);
        let link = c.correlate(&t, &[&e]);
        assert!(link.linked && link.score > DEFAULT_LINK_SCORE);
    }

    #[test]
    fn unrelated_ticket_stays_unlinked() {
        let e = ev("E0", "storage", "storage latency high", &[0]);
        let t = Ticket::new("t0", 86_400, "Billing", "invoice amount wrong", "c");
        let c = Correlator::new(
            std::slice::from_ref(&e),
            std::slice::from_ref(&t),
            affinity(&[("VM", "vm")]),
        );
        let link = c.correlate(&t, &[&e]);
        assert!(!link.linked);
        assert_eq!(link.event_id.as_deref(), Some("E0"));
    }

    #[test]
    fn virtual_machine_ticket_picks_vm_event() {
        // No shared terms with either template, both events two minutes
        // after the ticket: features are [0, exp(-120/600), affinity].
        // VM: sigmoid(-4 + 3 * 0.81873 + 3) = sigmoid(1.45619) ≈ 0.811.
        // Storage: sigmoid(-4 + 3 * 0.81873) = sigmoid(-1.54381) ≈ 0.176.
        let vm = ev("E0", "vm", "VM allocation failure", &[1120]);
        let st = ev("E1", "storage", "storage latency high", &[1120]);
        let t = Ticket::new("t0", 1000, "VirtualMachines", "cannot start my virtual machine", "c");
        let c = Correlator::new(
            &[vm.clone(), st.clone()],
            std::slice::from_ref(&t),
            affinity(&[("VirtualMachines", "vm")]),
        );
        let prox = (-120.0f64 / 600.0).exp();
        assert_eq!(c.features(&t, &vm), [0.0, prox, 1.0]);
        assert!((c.score(&t, &vm) - 0.810_985).abs() < 1e-4);
        assert!((c.score(&t, &st) - 0.176_045).abs() < 1e-4);
        let link = c.correlate(&t, &[&vm, &st]);
        assert_eq!(link.event_id.as_deref(), Some("E0"));
        assert!(link.linked);
    }

    fn graph_two_components() -> EventGraph {
        EventGraph {
            nodes: vec!["E0".into(), "E1".into(), "E2".into()],
            regular: vec![],
            edges: vec![Edge {
                a: "E0".into(),
                b: "E1".into(),
                weight: 1.0,
            }],
            components: vec![vec!["E0".into(), "E1".into()], vec!["E2".into()]],
        }
    }

    fn link(t: &str, e: &str, linked: bool) -> TicketLink {
        TicketLink {
            ticket_id: t.into(),
            event_id: Some(e.into()),
            score: if linked { 0.9 } else { 0.1 },
            linked,
        }
    }

    #[test]
    fn aggregation_rules() {
        let g = graph_two_components();
        let links = [
            link("a", "E0", true),
            link("b", "E0", true),
            link("c", "E1", true),
            link("d", "E2", true),
            link("e", "E0", false),
        ];
        let clusters = aggregate_tickets(&links, &g).unwrap();
        let m = cluster_assignment(&clusters);
        assert_eq!(m["a"], m["b"]);
        assert_eq!(m["a"], m["c"]);
        assert_ne!(m["a"], m["d"]);
        let single = clusters.iter().find(|c| c.ticket_ids == ["e"]).unwrap();
        assert_eq!(single.event_component_id, None);
    }

    #[test]
    fn unknown_event_is_an_error() {
        let err = aggregate_tickets(&[link("a", "E9", true)], &graph_two_components()).unwrap_err();
        assert!(matches!(err, Error::UnknownEvent(e) if e == "E9"));
    }

    #[test]
    fn affinity_map_json_shape() {
        let m: AffinityMap = serde_json::from_str(r#"{"VM":["vm","storage"]}"#).unwrap();
        assert_eq!(m.affinity("VM", "storage"), 1.0);
        assert_eq!(m.affinity("VM", "web"), 0.0);
        assert_eq!(m.affinity("Other", "vm"), 0.0);
    }
}
