//! Session-level log anomaly detection and failure identification on top
//! of parser output.
//!
//! The detector is a count/bigram profile of normal sessions: a session is
//! anomalous when it contains a template never seen in training, or a pair
//! of adjacent templates whose conditional training probability is below
//! `epsilon`. Failure identification matches a session's templates and
//! concepts against per-type signatures by Jaccard overlap.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::Confusion;
use crate::logparse::ParsedLog;

pub const DEFAULT_EPSILON: f64 = 0.01;
pub const DEFAULT_MARGIN: f64 = 0.3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Session {
    pub session_id: String,
    pub records: Vec<ParsedLog>,
    pub window: (i64, i64),
}

impl Session {
    /// Template sequence used by the detector.
    pub fn templates(&self) -> impl Iterator<Item = &str> {
        self.records.iter().map(|r| r.conceptualized_template.as_str())
    }

    /// Tagged templates and concepts present in the session.
    pub fn elements(&self) -> BTreeSet<Element> {
        let mut out = BTreeSet::new();
        for r in &self.records {
            out.insert(Element::Template(r.conceptualized_template.clone()));
            for p in &r.ci_pairs {
                out.insert(Element::Concept(p.concept.clone()));
            }
            for c in &r.orphan_concepts {
                out.insert(Element::Concept(c.clone()));
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SessionMode {
    BySessionId,
    ByWindow { window_s: i64 },
}

pub fn sessionize(records: &[ParsedLog], mode: SessionMode) -> Result<Vec<Session>> {
    if records.windows(2).any(|w| w[1].ts < w[0].ts) {
        return Err(Error::param("records", "must be time-ordered"));
    }
    match mode {
        SessionMode::BySessionId => {
            let missing: Vec<usize> = records
                .iter()
                .enumerate()
                .filter(|(_, r)| r.session_id.is_none())
                .map(|(i, _)| i)
                .collect();
            if !missing.is_empty() {
                return Err(Error::MissingSessionId(missing));
            }
            let mut order: Vec<String> = Vec::new();
            let mut groups: HashMap<&str, Vec<ParsedLog>> = HashMap::new();
            for r in records {
                let id = r.session_id.as_deref().expect("checked above");
                let g = groups.entry(id).or_insert_with(|| {
                    order.push(id.to_string());
                    Vec::new()
                });
                g.push(r.clone());
            }
            Ok(order
                .into_iter()
                .map(|id| {
                    let recs = groups.remove(id.as_str()).expect("grouped above");
                    let window = (recs[0].ts, recs[recs.len() - 1].ts);
                    Session {
                        session_id: id,
                        records: recs,
                        window,
                    }
                })
                .collect())
        }
        SessionMode::ByWindow { window_s } => {
            if window_s <= 0 {
                return Err(Error::param("window_s", "must be positive"));
            }
            let Some(first) = records.first() else {
                return Ok(Vec::new());
            };
            let origin = first.ts;
            let mut out: Vec<Session> = Vec::new();
            for r in records {
                let start = origin + (r.ts - origin).div_euclid(window_s) * window_s;
                match out.last_mut() {
                    Some(s) if s.window.0 == start => s.records.push(r.clone()),
                    _ => out.push(Session {
                        session_id: format!("w{start}"),
                        records: vec![r.clone()],
                        window: (start, start + window_s),
                    }),
                }
            }
            Ok(out)
        }
    }
}

/// Normal-behavior profile learned from anomaly-free sessions.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DetectorModel {
    pub epsilon: f64,
    pub sessions_trained: usize,
    pub template_counts: BTreeMap<String, u64>,
    /// Outgoing-transition counts keyed by predecessor template.
    pub transitions: BTreeMap<String, BTreeMap<String, u64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Evidence {
    UnseenTemplate { template: String },
    RareBigram { from: String, to: String, probability: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub session_id: String,
    pub anomalous: bool,
    pub evidence: Vec<Evidence>,
}

impl DetectorModel {
    pub fn train<'a>(sessions: impl IntoIterator<Item = &'a Session>, epsilon: f64) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon < 1.0) {
            return Err(Error::param("epsilon", "must lie in (0, 1)"));
        }
        let mut model = DetectorModel {
            epsilon,
            ..Default::default()
        };
        for s in sessions {
            model.sessions_trained += 1;
            let templates: Vec<&str> = s.templates().collect();
            for t in &templates {
                *model.template_counts.entry(t.to_string()).or_default() += 1;
            }
            for pair in templates.windows(2) {
                *model
                    .transitions
                    .entry(pair[0].to_string())
                    .or_default()
                    .entry(pair[1].to_string())
                    .or_default() += 1;
            }
        }
        Ok(model)
    }

    /// P(next | prev) from training transitions; 0 when `prev` never had a
    /// successor.
    pub fn bigram_probability(&self, prev: &str, next: &str) -> f64 {
        match self.transitions.get(prev) {
            Some(row) => {
                let total: u64 = row.values().sum();
                row.get(next).map_or(0.0, |&c| c as f64 / total as f64)
            }
            None => 0.0,
        }
    }
}

pub fn detect_session(session: &Session, model: &DetectorModel) -> Result<Detection> {
    if model.sessions_trained == 0 {
        return Err(Error::Untrained);
    }
    let mut evidence = Vec::new();
    let mut reported: BTreeSet<&str> = BTreeSet::new();
    let templates: Vec<&str> = session.templates().collect();
    for t in &templates {
        if !model.template_counts.contains_key(*t) && reported.insert(t) {
            evidence.push(Evidence::UnseenTemplate {
                template: t.to_string(),
            });
        }
    }
    let mut seen_pairs: BTreeSet<(&str, &str)> = BTreeSet::new();
    for pair in templates.windows(2) {
        let (a, b) = (pair[0], pair[1]);
        if !model.template_counts.contains_key(a) || !model.template_counts.contains_key(b) {
            continue;
        }
        let p = model.bigram_probability(a, b);
        if p < model.epsilon && seen_pairs.insert((a, b)) {
            evidence.push(Evidence::RareBigram {
                from: a.to_string(),
                to: b.to_string(),
                probability: p,
            });
        }
    }
    Ok(Detection {
        session_id: session.session_id.clone(),
        anomalous: !evidence.is_empty(),
        evidence,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum Element {
    Template(String),
    Concept(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FailureSignature {
    pub failure_type: String,
    pub discriminative_templates: BTreeSet<String>,
    pub discriminative_ci_concepts: BTreeSet<String>,
}

impl FailureSignature {
    pub fn elements(&self) -> BTreeSet<Element> {
        self.discriminative_templates
            .iter()
            .cloned()
            .map(Element::Template)
            .chain(self.discriminative_ci_concepts.iter().cloned().map(Element::Concept))
            .collect()
    }
}

/// Per-type signatures: elements whose share of sessions in that type
/// exceeds their share in every other type by at least `margin`.
pub fn learn_signatures(labeled: &[(Session, String)], margin: f64) -> Result<Vec<FailureSignature>> {
    // type -> (session count, element -> sessions containing it)
    let mut stats: BTreeMap<&str, (usize, BTreeMap<Element, usize>)> = BTreeMap::new();
    for (session, ty) in labeled {
        let entry = stats.entry(ty.as_str()).or_default();
        entry.0 += 1;
        for e in session.elements() {
            *entry.1.entry(e).or_default() += 1;
        }
    }
    let freq = |ty: &str, e: &Element| -> f64 {
        let (n, counts) = &stats[ty];
        counts.get(e).copied().unwrap_or(0) as f64 / *n as f64
    };

    let mut out = Vec::new();
    for (&ty, (_, counts)) in &stats {
        let mut sig = FailureSignature {
            failure_type: ty.to_string(),
            discriminative_templates: BTreeSet::new(),
            discriminative_ci_concepts: BTreeSet::new(),
        };
        for e in counts.keys() {
            let own = freq(ty, e);
            let other = stats
                .keys()
                .filter(|&&o| o != ty)
                .map(|o| freq(o, e))
                .fold(0.0, f64::max);
            if own - other >= margin - 1e-12 {
                match e {
                    Element::Template(t) => sig.discriminative_templates.insert(t.clone()),
                    Element::Concept(c) => sig.discriminative_ci_concepts.insert(c.clone()),
                };
            }
        }
        if sig.discriminative_templates.is_empty() && sig.discriminative_ci_concepts.is_empty() {
            return Err(Error::NoDiscriminativeElement(ty.to_string()));
        }
        out.push(sig);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FailureScore {
    pub failure_type: String,
    pub score: f64,
}

/// Failure types ranked by Jaccard overlap with the session, descending;
/// ties are broken alphabetically.
pub fn identify_failure(session: &Session, signatures: &[FailureSignature]) -> Vec<FailureScore> {
    let elements = session.elements();
    let mut scores: Vec<FailureScore> = signatures
        .iter()
        .map(|sig| {
            let sig_elements = sig.elements();
            let inter = elements.intersection(&sig_elements).count();
            let union = elements.union(&sig_elements).count();
            FailureScore {
                failure_type: sig.failure_type.clone(),
                score: if union == 0 { 0.0 } else { inter as f64 / union as f64 },
            }
        })
        .collect();
    scores.sort_by(|a, b| {
        b.score
            .total_cmp(&a.score)
            .then_with(|| a.failure_type.cmp(&b.failure_type))
    });
    scores
}

/// Session-level detection scores against ground-truth anomaly flags.
pub fn score_detection(model: &DetectorModel, sessions: &[Session], truth: &[bool]) -> Result<Confusion> {
    let mut c = Confusion::default();
    for (s, &t) in sessions.iter().zip(truth) {
        let d = detect_session(s, model)?;
        match (d.anomalous, t) {
            (true, true) => c.tp += 1,
            (true, false) => c.fp += 1,
            (false, true) => c.fn_ += 1,
            _ => {}
        }
    }
    Ok(c)
}

/// Top-1 identification precision: correct predictions over sessions for
/// which some signature scored above zero.
pub fn identification_precision(signatures: &[FailureSignature], labeled: &[(Session, String)]) -> f64 {
    let mut predicted = 0;
    let mut correct = 0;
    for (s, ty) in labeled {
        if let Some(top) = identify_failure(s, signatures).first() {
            if top.score > 0.0 {
                predicted += 1;
                if &top.failure_type == ty {
                    correct += 1;
                }
            }
        }
    }
    if predicted == 0 {
        0.0
    } else {
        correct as f64 / predicted as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::logparse::CiPair;

    fn log(ts: i64, session: Option<&str>, template: &str) -> ParsedLog {
        ParsedLog {
            ts,
            service_id: "svc".into(),
            session_id: session.map(str::to_string),
            template: template.into(),
            conceptualized_template: template.into(),
            ci_pairs: Vec::new(),
            orphan_concepts: Vec::new(),
            orphan_instances: Vec::new(),
            params: Vec::new(),
        }
    }

    fn session(id: &str, templates: &[&str]) -> Session {
        Session {
            session_id: id.into(),
            records: templates
                .iter()
                .enumerate()
                .map(|(i, t)| log(i as i64, Some(id), t))
                .collect(),
            window: (0, templates.len() as i64),
        }
    }

    #[test]
    fn one_id_one_session() {
        let recs: Vec<_> = (0..4).map(|t| log(t, Some("a"), "x")).collect();
        let s = sessionize(&recs, SessionMode::BySessionId).unwrap();
        assert_eq!(s.len(), 1);
        assert_eq!(s[0].records.len(), 4);
        assert_eq!(s[0].window, (0, 3));
    }

    #[test]
    fn interleaved_ids_keep_internal_order() {
        let recs = vec![
            log(0, Some("a"), "a1"),
            log(1, Some("b"), "b1"),
            log(2, Some("a"), "a2"),
            log(3, Some("b"), "b2"),
        ];
        let s = sessionize(&recs, SessionMode::BySessionId).unwrap();
        assert_eq!(s.len(), 2);
        assert_eq!(s[0].templates().collect::<Vec<_>>(), ["a1", "a2"]);
        assert_eq!(s[1].templates().collect::<Vec<_>>(), ["b1", "b2"]);
    }

    #[test]
    fn window_tiling() {
        // 60 s tiles from t=0: [0,60) holds 0 and 30, [60,120) holds 90.
        let recs = vec![log(0, None, "a"), log(30, None, "b"), log(90, None, "c")];
        let s = sessionize(&recs, SessionMode::ByWindow { window_s: 60 }).unwrap();
        assert_eq!(s.len(), 2);
        assert_eq!(s[0].records.len(), 2);
        assert_eq!(s[1].window, (60, 120));
        assert_eq!(s[1].records[0].ts, 90);
    }

    #[test]
    fn missing_ids_are_listed() {
        let recs = vec![log(0, Some("a"), "x"), log(1, None, "y"), log(2, None, "z")];
        match sessionize(&recs, SessionMode::BySessionId) {
            Err(Error::MissingSessionId(ids)) => assert_eq!(ids, vec![1, 2]),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn untrained_model_errors() {
        assert!(matches!(
            detect_session(&session("s", &["a"]), &DetectorModel::default()),
            Err(Error::Untrained)
        ));
    }

    #[test]
    fn training_session_is_normal() {
        let train = vec![
            session("1", &["open", "read", "close"]),
            session("2", &["open", "write", "close"]),
        ];
        let model = DetectorModel::train(&train, DEFAULT_EPSILON).unwrap();
        for s in &train {
            assert!(!detect_session(s, &model).unwrap().anomalous);
        }
    }

    #[test]
    fn unseen_template_is_cited() {
        let model = DetectorModel::train(&[session("1", &["open", "close"])], DEFAULT_EPSILON).unwrap();
        let d = detect_session(&session("x", &["open", "panic", "close"]), &model).unwrap();
        assert!(d.anomalous);
        assert_eq!(
            d.evidence[0],
            Evidence::UnseenTemplate {
                template: "panic".into()
            }
        );
    }

    #[test]
    fn unseen_order_is_cited() {
        let train = vec![session("1", &["open", "read", "close"]); 3];
        let model = DetectorModel::train(&train, DEFAULT_EPSILON).unwrap();
        // training bigrams enumerated: (open,read), (read,close) only
        assert_eq!(model.transitions.len(), 2);
        assert_eq!(model.bigram_probability("close", "open"), 0.0);
        let d = detect_session(&session("x", &["read", "close", "open"]), &model).unwrap();
        assert!(d.anomalous);
        assert_eq!(
            d.evidence,
            vec![Evidence::RareBigram {
                from: "close".into(),
                to: "open".into(),
                probability: 0.0
            }]
        );
    }

    #[test]
    fn disjoint_types_give_their_own_sets() {
        let labeled = vec![
            (session("1", &["a", "b"]), "t1".to_string()),
            (session("2", &["c"]), "t2".to_string()),
        ];
        let sigs = learn_signatures(&labeled, DEFAULT_MARGIN).unwrap();
        assert_eq!(
            sigs[0].discriminative_templates,
            BTreeSet::from(["a".to_string(), "b".to_string()])
        );
        assert_eq!(sigs[1].discriminative_templates, BTreeSet::from(["c".to_string()]));
    }

    #[test]
    fn background_template_excluded() {
        let labeled = vec![
            (session("1", &["bg", "a"]), "t1".to_string()),
            (session("2", &["bg", "b"]), "t2".to_string()),
        ];
        let sigs = learn_signatures(&labeled, DEFAULT_MARGIN).unwrap();
        assert!(sigs.iter().all(|s| !s.discriminative_templates.contains("bg")));
    }

    #[test]
    fn type_without_discriminative_element_errors() {
        let labeled = vec![
            (session("1", &["bg", "a"]), "t1".to_string()),
            (session("2", &["bg"]), "t2".to_string()),
        ];
        assert!(
            matches!(learn_signatures(&labeled, DEFAULT_MARGIN), Err(Error::NoDiscriminativeElement(t)) if t == "t2")
        );
    }

    #[test]
    fn concepts_count_as_elements() {
        let mut s = session("1", &["x"]);
        s.records[0].ci_pairs.push(CiPair {
            concept: "volume".into(),
            instance: "abc123".into(),
            provenance: crate::logparse::Provenance::Explicit,
        });
        let sigs = learn_signatures(&[(s.clone(), "disk".to_string())], DEFAULT_MARGIN).unwrap();
        assert!(sigs[0].discriminative_ci_concepts.contains("volume"));
        assert_eq!(identify_failure(&s, &sigs)[0].score, 1.0);
    }

    #[test]
    fn identification_ranking() {
        let sig = |name: &str, ts: &[&str]| FailureSignature {
            failure_type: name.into(),
            discriminative_templates: ts.iter().map(|t| t.to_string()).collect(),
            discriminative_ci_concepts: BTreeSet::new(),
        };
        let sigs = vec![sig("b", &["x", "y"]), sig("a", &["p", "q"])];

        let exact = identify_failure(&session("s", &["p", "q"]), &sigs);
        assert_eq!((exact[0].failure_type.as_str(), exact[0].score), ("a", 1.0));

        let none = identify_failure(&session("s", &["z"]), &sigs);
        assert!(none.iter().all(|s| s.score == 0.0));
        assert_eq!(none[0].failure_type, "a");

        // Session {p, q, x, r}: A = {p, q, s1, s2} shares 2 of 4, B = {x, t1, t2, t3} shares 1 of 4.
        // Jaccard: A 2/6, B 1/7.
        let sigs = vec![sig("A", &["p", "q", "s1", "s2"]), sig("B", &["x", "t1", "t2", "t3"])];
        let mixed = identify_failure(&session("s", &["p", "q", "x", "r"]), &sigs);
        assert_eq!(mixed[0].failure_type, "A");
        assert!((mixed[0].score - 2.0 / 6.0).abs() < 1e-12);
        assert!((mixed[1].score - 1.0 / 7.0).abs() < 1e-12);
    }
}
