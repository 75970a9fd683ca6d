//! Incident profiling: drop regular events, link co-occurring indicative
//! events, and split the result into connected components.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::events::{BucketGrid, Event};
use crate::error::{Error, Result};

pub const DEFAULT_BUCKET_S: i64 = 300;
pub const DEFAULT_LINK_WINDOW: usize = 1;
pub const DEFAULT_REGULAR_THRESHOLD: f64 = 0.5;
pub const DEFAULT_LINK_THRESHOLD: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProfileParams {
    /// Events occupying more than this share of the grid are regular.
    pub regular_threshold: f64,
    /// Co-occurrence window in buckets.
    pub link_window: usize,
    pub link_threshold: f64,
}

impl Default for ProfileParams {
    fn default() -> Self {
        ProfileParams {
            regular_threshold: DEFAULT_REGULAR_THRESHOLD,
            link_window: DEFAULT_LINK_WINDOW,
            link_threshold: DEFAULT_LINK_THRESHOLD,
        }
    }
}

impl ProfileParams {
    fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.regular_threshold) {
            return Err(Error::param("regular_threshold", "must lie in [0, 1]"));
        }
        if !(self.link_threshold > 0.0 && self.link_threshold <= 1.0) {
            return Err(Error::param("link_threshold", "must lie in (0, 1]"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub a: String,
    pub b: String,
    pub weight: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EventGraph {
    /// Indicative event ids.
    pub nodes: Vec<String>,
    /// Event ids dropped as regular.
    pub regular: Vec<String>,
    pub edges: Vec<Edge>,
    /// Components as sorted node lists, ordered by their first node.
    pub components: Vec<Vec<String>>,
}

impl EventGraph {
    pub fn component_of(&self, event_id: &str) -> Option<usize> {
        self.components.iter().position(|c| c.iter().any(|n| n == event_id))
    }

    pub fn contains(&self, event_id: &str) -> bool {
        self.nodes.iter().any(|n| n == event_id)
    }
}

/// Windowed Jaccard similarity of two bucket sets. A bucket counts as
/// matched when the other set has a bucket at most `window` away; with
/// `m = min(matched_a, matched_b)` the score is `m / (|a| + |b| - m)`,
/// which is plain Jaccard for `window = 0`.
pub fn windowed_jaccard(a: &BTreeSet<usize>, b: &BTreeSet<usize>, window: usize) -> f64 {
    if a.is_empty() || b.is_empty() {
        return 0.0;
    }
    let matched = |x: &BTreeSet<usize>, y: &BTreeSet<usize>| {
        x.iter()
            .filter(|&&k| y.range(k.saturating_sub(window)..=k + window).next().is_some())
            .count()
    };
    let m = matched(a, b).min(matched(b, a)) as f64;
    m / (a.len() as f64 + b.len() as f64 - m)
}

pub fn occupancy(buckets: &BTreeSet<usize>, grid: &BucketGrid) -> f64 {
    if grid.n_buckets == 0 {
        0.0
    } else {
        buckets.len() as f64 / grid.n_buckets as f64
    }
}

struct DisjointSets(Vec<usize>);

impl DisjointSets {
    fn find(&mut self, x: usize) -> usize {
        let mut r = x;
        while self.0[r] != r {
            r = self.0[r];
        }
        let mut x = x;
        while self.0[x] != r {
            let next = self.0[x];
            self.0[x] = r;
            x = next;
        }
        r
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.0[ra.max(rb)] = ra.min(rb);
        }
    }
}

pub fn profile_incidents(events: &[Event], grid: &BucketGrid, params: &ProfileParams) -> Result<EventGraph> {
    params.validate()?;
    let mut graph = EventGraph::default();
    let mut kept: Vec<(&Event, BTreeSet<usize>)> = Vec::new();
    for e in events {
        let b = e.buckets(grid);
        if occupancy(&b, grid) > params.regular_threshold {
            graph.regular.push(e.event_id.clone());
        } else {
            kept.push((e, b));
        }
    }
    graph.nodes = kept.iter().map(|(e, _)| e.event_id.clone()).collect();

    let mut sets = DisjointSets((0..kept.len()).collect());
    for i in 0..kept.len() {
        for j in i + 1..kept.len() {
            let w = windowed_jaccard(&kept[i].1, &kept[j].1, params.link_window);
            if w >= params.link_threshold {
                graph.edges.push(Edge {
                    a: kept[i].0.event_id.clone(),
                    b: kept[j].0.event_id.clone(),
                    weight: w,
                });
                sets.union(i, j);
            }
        }
    }

    let mut groups: BTreeMap<usize, Vec<String>> = BTreeMap::new();
    for (i, (e, _)) in kept.iter().enumerate() {
        groups.entry(sets.find(i)).or_default().push(e.event_id.clone());
    }
    graph.components = groups.into_values().collect();
    for c in &mut graph.components {
        c.sort();
    }
    graph.components.sort();
    Ok(graph)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ev(id: &str, occ: &[i64]) -> Event {
        Event {
            event_id: id.into(),
            template_id: 0,
            template: id.into(),
            service_id: id.into(),
            occurrences: occ.to_vec(),
            alert_ids: Vec::new(),
        }
    }

    fn set(v: &[usize]) -> BTreeSet<usize> {
        v.iter().copied().collect()
    }

    #[test]
    fn always_on_event_is_regular() {
        let grid = BucketGrid::new(0, 300, 10).unwrap();
        let hb = ev("hb", &(0..10).map(|k| k * 300).collect::<Vec<_>>());
        for r in [0.0, 0.5, 0.99] {
            let g = profile_incidents(
                std::slice::from_ref(&hb),
                &grid,
                &ProfileParams {
                    regular_threshold: r,
                    ..Default::default()
                },
            )
            .unwrap();
            assert_eq!(g.regular, vec!["hb"]);
            assert!(g.nodes.is_empty());
        }
    }

    #[test]
    fn same_single_bucket_links() {
        let grid = BucketGrid::new(0, 300, 10).unwrap();
        let g = profile_incidents(&[ev("a", &[610]), ev("b", &[650])], &grid, &ProfileParams::default()).unwrap();
        assert_eq!(g.edges.len(), 1);
        assert_eq!(g.edges[0].weight, 1.0);
        assert_eq!(g.components, vec![vec!["a".to_string(), "b".to_string()]]);
    }

    #[test]
    fn windowed_jaccard_hand_values() {
        // a = {0, 1, 2}, b = {3}: window 1 matches a's {2} and b's {3},
        // m = 1, score 1 / (3 + 1 - 1).
        assert!((windowed_jaccard(&set(&[0, 1, 2]), &set(&[3]), 1) - 1.0 / 3.0).abs() < 1e-12);
        assert_eq!(windowed_jaccard(&set(&[0, 1, 2]), &set(&[3]), 0), 0.0);
        // Plain Jaccard for window 0: {0,1,2} vs {1,2,5} = 2 / 4.
        assert_eq!(windowed_jaccard(&set(&[0, 1, 2]), &set(&[1, 2, 5]), 0), 0.5);
        assert_eq!(windowed_jaccard(&set(&[]), &set(&[1]), 3), 0.0);
    }

    #[test]
    fn components_split_on_disjoint_times() {
        let grid = BucketGrid::new(0, 300, 20).unwrap();
        let events = [ev("a", &[0]), ev("b", &[300]), ev("c", &[5000]), ev("d", &[5100])];
        let g = profile_incidents(&events, &grid, &ProfileParams::default()).unwrap();
        assert_eq!(g.components.len(), 2);
        assert_eq!(g.component_of("a"), g.component_of("b"));
        assert_ne!(g.component_of("a"), g.component_of("c"));
    }
}
