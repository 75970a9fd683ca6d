//! KPI anomaly detection by pattern sketching.
//!
//! Sliding windows of a metric series are grouped by shape, and each group
//! is summarized by the arithmetic mean of its member windows (a metric
//! pattern). Windows are then classified by their nearest pattern: a window
//! is anomalous when that pattern is labeled anomalous, or when no pattern
//! lies within `theta` (an unprecedented shape). Patterns track drift by
//! absorbing matched windows and promoting recurring unmatched shapes.
//!
//! Shape distance is the Euclidean distance between z-normalized windows.
//! A window with (numerically) zero variance normalizes to the zero vector.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::telemetry::MetricSeries;

pub const DEFAULT_WINDOW: usize = 12;
pub const DEFAULT_THETA: f64 = 1.5;
pub const DEFAULT_RARE_FRACTION: f64 = 0.05;
pub const DEFAULT_PROMOTE_K: usize = 3;
pub const DEFAULT_HORIZON_S: i64 = 86_400;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum PatternLabel {
    Normal,
    Anomalous,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricPattern {
    pub values: Vec<f64>,
    pub label: PatternLabel,
    pub member_count: usize,
    pub last_updated_ts: i64,
}

/// Unmatched shape waiting to recur often enough to become a pattern.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub values: Vec<f64>,
    pub count: usize,
    pub first_seen_ts: i64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatternSet {
    pub w: usize,
    pub theta: f64,
    pub p: f64,
    pub patterns: Vec<MetricPattern>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub candidates: Vec<Candidate>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SketchParams {
    pub window: usize,
    pub theta: f64,
    pub rare_fraction: f64,
}

impl Default for SketchParams {
    fn default() -> Self {
        SketchParams {
            window: DEFAULT_WINDOW,
            theta: DEFAULT_THETA,
            rare_fraction: DEFAULT_RARE_FRACTION,
        }
    }
}

impl SketchParams {
    fn validate(&self) -> Result<()> {
        if self.window == 0 {
            return Err(Error::param("window", "must be positive"));
        }
        if !(self.theta > 0.0) {
            return Err(Error::param("theta", "must be positive"));
        }
        if !(self.rare_fraction > 0.0 && self.rare_fraction < 1.0) {
            return Err(Error::param("rare_fraction", "must lie in (0, 1)"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdaptParams {
    pub promote_k: usize,
    pub horizon_s: i64,
}

impl Default for AdaptParams {
    fn default() -> Self {
        AdaptParams {
            promote_k: DEFAULT_PROMOTE_K,
            horizon_s: DEFAULT_HORIZON_S,
        }
    }
}

/// Mean-removed, unit-variance copy of `x`; the zero vector when `x` has
/// no spread.
pub fn z_normalize(x: &[f64]) -> Vec<f64> {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let var = x.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    let std = var.sqrt();
    if !(std > 1e-9 * (1.0 + mean.abs())) {
        return vec![0.0; x.len()];
    }
    x.iter().map(|v| (v - mean) / std).collect()
}

fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Distance between the shapes of two equal-length windows.
pub fn shape_distance(a: &[f64], b: &[f64]) -> f64 {
    euclidean(&z_normalize(a), &z_normalize(b))
}

/// Arithmetic mean of equal-length member windows.
pub fn pattern_mean<S: AsRef<[f64]>>(members: &[S]) -> Vec<f64> {
    let w = members.first().map_or(0, |m| m.as_ref().len());
    let mut sum = vec![0.0; w];
    for m in members {
        for (s, v) in sum.iter_mut().zip(m.as_ref()) {
            *s += v;
        }
    }
    let n = members.len() as f64;
    sum.into_iter().map(|s| s / n).collect()
}

// Argmin over normalized shapes; ties keep the lowest index.
fn nearest(z: &[f64], shapes: &[Vec<f64>]) -> Option<(usize, f64)> {
    let mut best: Option<(usize, f64)> = None;
    for (i, s) in shapes.iter().enumerate() {
        let d = euclidean(z, s);
        if best.is_none_or(|(_, bd)| d < bd) {
            best = Some((i, d));
        }
    }
    best
}

struct Cluster {
    sum: Vec<f64>,
    count: usize,
    touches_label: bool,
    last_start: usize,
}

impl Cluster {
    fn mean(&self) -> Vec<f64> {
        self.sum.iter().map(|s| s / self.count as f64).collect()
    }
}

/// Result of pattern discovery together with the cluster each sliding
/// window was assigned to (`assignments[i]` is the pattern of the window
/// starting at sample `i`).
#[derive(Debug, Clone)]
pub struct Discovery {
    pub set: PatternSet,
    pub assignments: Vec<usize>,
}

pub fn discover_patterns(series: &MetricSeries, params: &SketchParams, labels: Option<&[bool]>) -> Result<PatternSet> {
    discover_with_assignments(series, params, labels).map(|d| d.set)
}

/// Greedy single-pass clustering of every sliding window, in series order:
/// a window joins its nearest cluster when within `theta`, otherwise it
/// founds a new one.
pub fn discover_with_assignments(
    series: &MetricSeries,
    params: &SketchParams,
    labels: Option<&[bool]>,
) -> Result<Discovery> {
    params.validate()?;
    let w = params.window;
    let values = &series.values;
    if values.len() < w {
        return Err(Error::SeriesTooShort {
            needed: w,
            actual: values.len(),
        });
    }
    if let Some(l) = labels {
        if l.len() != values.len() {
            return Err(Error::LengthMismatch {
                expected: values.len(),
                actual: l.len(),
            });
        }
    }

    let n_windows = values.len() - w + 1;
    let mut clusters: Vec<Cluster> = Vec::new();
    let mut shapes: Vec<Vec<f64>> = Vec::new();
    let mut assignments = Vec::with_capacity(n_windows);

    for start in 0..n_windows {
        let window = &values[start..start + w];
        let z = z_normalize(window);
        let touches = labels.is_some_and(|l| l[start..start + w].iter().any(|&a| a));
        match nearest(&z, &shapes) {
            Some((idx, d)) if d <= params.theta => {
                let c = &mut clusters[idx];
                for (s, v) in c.sum.iter_mut().zip(window) {
                    *s += v;
                }
                c.count += 1;
                c.touches_label |= touches;
                c.last_start = start;
                shapes[idx] = z_normalize(&c.mean());
                assignments.push(idx);
            }
            _ => {
                clusters.push(Cluster {
                    sum: window.to_vec(),
                    count: 1,
                    touches_label: touches,
                    last_start: start,
                });
                shapes.push(z);
                assignments.push(clusters.len() - 1);
            }
        }
    }

    let mut patterns: Vec<MetricPattern> = clusters
        .iter()
        .map(|c| {
            let label = match labels {
                Some(_) if c.touches_label => PatternLabel::Anomalous,
                Some(_) => PatternLabel::Normal,
                None if (c.count as f64) / (n_windows as f64) < params.rare_fraction => PatternLabel::Anomalous,
                None => PatternLabel::Normal,
            };
            MetricPattern {
                values: c.mean(),
                label,
                member_count: c.count,
                last_updated_ts: series.ts_at(c.last_start),
            }
        })
        .collect();

    // Unlabeled discovery always keeps its most populated shape as normal.
    if labels.is_none() && patterns.iter().all(|p| p.label == PatternLabel::Anomalous) {
        let mut best = 0;
        for (i, p) in patterns.iter().enumerate() {
            if p.member_count > patterns[best].member_count {
                best = i;
            }
        }
        patterns[best].label = PatternLabel::Normal;
    }

    Ok(Discovery {
        set: PatternSet {
            w,
            theta: params.theta,
            p: params.rare_fraction,
            patterns,
            candidates: Vec::new(),
        },
        assignments,
    })
}

impl PatternSet {
    fn shapes(&self) -> Vec<Vec<f64>> {
        self.patterns.iter().map(|p| z_normalize(&p.values)).collect()
    }
}

/// Nearest pattern to `subseq` and its shape distance.
pub fn match_pattern(subseq: &[f64], set: &PatternSet) -> Result<(usize, f64)> {
    if subseq.len() != set.w {
        return Err(Error::LengthMismatch {
            expected: set.w,
            actual: subseq.len(),
        });
    }
    nearest(&z_normalize(subseq), &set.shapes()).ok_or_else(|| Error::param("set", "pattern set is empty"))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WindowVerdict {
    pub start: usize,
    pub anomalous: bool,
    pub pattern: usize,
    pub distance: f64,
}

impl WindowVerdict {
    fn classify(start: usize, pattern: usize, distance: f64, set: &PatternSet) -> Self {
        let anomalous = set.patterns[pattern].label == PatternLabel::Anomalous || distance > set.theta;
        WindowVerdict {
            start,
            anomalous,
            pattern,
            distance,
        }
    }
}

pub fn detect(series: &MetricSeries, set: &PatternSet) -> Result<Vec<WindowVerdict>> {
    let w = set.w;
    if series.values.len() < w {
        return Err(Error::SeriesTooShort {
            needed: w,
            actual: series.values.len(),
        });
    }
    if set.patterns.is_empty() {
        return Err(Error::param("set", "pattern set is empty"));
    }
    let shapes = set.shapes();
    Ok(series
        .values
        .windows(w)
        .enumerate()
        .map(|(start, window)| {
            let (idx, d) = nearest(&z_normalize(window), &shapes).expect("non-empty set");
            WindowVerdict::classify(start, idx, d, set)
        })
        .collect())
}

/// Per-sample labels: a sample is anomalous when any window covering it is.
pub fn sample_labels(verdicts: &[WindowVerdict], n_samples: usize, w: usize) -> Vec<bool> {
    let mut out = vec![false; n_samples];
    for v in verdicts.iter().filter(|v| v.anomalous) {
        let end = (v.start + w).min(n_samples);
        out[v.start..end].iter_mut().for_each(|s| *s = true);
    }
    out
}

/// Feeds windows (each tagged with its start timestamp) into the set.
/// Matched windows refine their pattern by running mean; unmatched ones
/// accumulate as candidates and are promoted to NORMAL patterns once they
/// recur `promote_k` times within `horizon_s` of first being seen.
pub fn adapt<'a, I>(set: &mut PatternSet, stream: I, params: &AdaptParams) -> Result<()>
where
    I: IntoIterator<Item = (i64, &'a [f64])>,
{
    if params.promote_k == 0 {
        return Err(Error::param("promote_k", "must be positive"));
    }
    let mut shapes = set.shapes();
    for (ts, window) in stream {
        if window.len() != set.w {
            return Err(Error::LengthMismatch {
                expected: set.w,
                actual: window.len(),
            });
        }
        absorb(set, &mut shapes, ts, window, params);
    }
    Ok(())
}

fn absorb(set: &mut PatternSet, shapes: &mut Vec<Vec<f64>>, ts: i64, window: &[f64], params: &AdaptParams) {
    let z = z_normalize(window);
    if let Some((idx, d)) = nearest(&z, shapes) {
        if d <= set.theta {
            let p = &mut set.patterns[idx];
            p.member_count += 1;
            let n = p.member_count as f64;
            for (v, x) in p.values.iter_mut().zip(window) {
                *v += (x - *v) / n;
            }
            p.last_updated_ts = ts;
            shapes[idx] = z_normalize(&p.values);
            return;
        }
    }

    set.candidates.retain(|c| ts - c.first_seen_ts <= params.horizon_s);
    let cand_shapes: Vec<Vec<f64>> = set.candidates.iter().map(|c| z_normalize(&c.values)).collect();
    let idx = match nearest(&z, &cand_shapes) {
        Some((idx, d)) if d <= set.theta => {
            let c = &mut set.candidates[idx];
            c.count += 1;
            let n = c.count as f64;
            for (v, x) in c.values.iter_mut().zip(window) {
                *v += (x - *v) / n;
            }
            idx
        }
        _ => {
            set.candidates.push(Candidate {
                values: window.to_vec(),
                count: 1,
                first_seen_ts: ts,
            });
            set.candidates.len() - 1
        }
    };
    if set.candidates[idx].count >= params.promote_k {
        let c = set.candidates.remove(idx);
        shapes.push(z_normalize(&c.values));
        set.patterns.push(MetricPattern {
            values: c.values,
            label: PatternLabel::Normal,
            member_count: c.count,
            last_updated_ts: ts,
        });
    }
}

/// Online detection: each window is classified against the current set and
/// then absorbed into it.
pub fn detect_adaptive(
    series: &MetricSeries,
    set: &mut PatternSet,
    params: &AdaptParams,
) -> Result<Vec<WindowVerdict>> {
    let w = set.w;
    if series.values.len() < w {
        return Err(Error::SeriesTooShort {
            needed: w,
            actual: series.values.len(),
        });
    }
    if set.patterns.is_empty() {
        return Err(Error::param("set", "pattern set is empty"));
    }
    let mut shapes = set.shapes();
    let mut out = Vec::with_capacity(series.values.len() - w + 1);
    for (start, window) in series.values.windows(w).enumerate() {
        let (idx, d) = nearest(&z_normalize(window), &shapes).expect("non-empty set");
        out.push(WindowVerdict::classify(start, idx, d, set));
        absorb(set, &mut shapes, series.ts_at(start), window, params);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn series(values: Vec<f64>) -> MetricSeries {
        MetricSeries::new("svc", "kpi", 0, 60, values)
    }

    fn params(window: usize, rare: f64) -> SketchParams {
        SketchParams {
            window,
            theta: DEFAULT_THETA,
            rare_fraction: rare,
        }
    }

    // Independent calculator for z-normalized distance, written out longhand.
    fn reference_distance(a: &[f64], b: &[f64]) -> f64 {
        fn norm(x: &[f64]) -> Vec<f64> {
            let n = x.len() as f64;
            let m: f64 = x.iter().sum::<f64>() / n;
            let mut ss = 0.0;
            for v in x {
                ss += (v - m).powi(2);
            }
            let sd = (ss / n).sqrt();
            if sd == 0.0 {
                vec![0.0; x.len()]
            } else {
                x.iter().map(|v| (v - m) / sd).collect()
            }
        }
        let (za, zb) = (norm(a), norm(b));
        let mut acc = 0.0;
        for i in 0..za.len() {
            acc += (za[i] - zb[i]).powi(2);
        }
        acc.sqrt()
    }

    fn set_of(patterns: &[(&[f64], PatternLabel)], theta: f64) -> PatternSet {
        PatternSet {
            w: patterns[0].0.len(),
            theta,
            p: 0.05,
            patterns: patterns
                .iter()
                .map(|(v, l)| MetricPattern {
                    values: v.to_vec(),
                    label: *l,
                    member_count: 1,
                    last_updated_ts: 0,
                })
                .collect(),
            candidates: Vec::new(),
        }
    }

    #[test]
    fn mean_of_two_members() {
        assert_eq!(pattern_mean(&[[1.0, 2.0, 3.0], [3.0, 2.0, 1.0]]), vec![2.0, 2.0, 2.0]);
    }

    #[test]
    fn identical_windows_give_one_normal_pattern() {
        let flat = series(vec![4.0; 20]);
        let set = discover_patterns(&flat, &params(4, 0.05), None).unwrap();
        assert_eq!(set.patterns.len(), 1);
        assert_eq!(set.patterns[0].values, vec![4.0; 4]);
        assert_eq!(set.patterns[0].label, PatternLabel::Normal);
        assert_eq!(set.patterns[0].member_count, 17);
    }

    #[test]
    fn spike_windows_form_rare_anomalous_clusters() {
        let mut v = vec![1.0; 16];
        v[8] = 9.0;
        let d = discover_with_assignments(&series(v), &params(4, 0.25), None).unwrap();
        // Hand trace: 13 windows. Windows 0-4 and 9-12 are flat (9 windows)
        // and share cluster 0. Windows 5..=8 place the spike at offsets
        // 3, 2, 1, 0. A spike shape is 2.0 from the zero vector and 3.27
        // from a spike at another offset, so each founds its own cluster.
        assert_eq!(d.assignments, vec![0, 0, 0, 0, 0, 1, 2, 3, 4, 0, 0, 0, 0]);
        assert_eq!(d.set.patterns[0].label, PatternLabel::Normal);
        assert_eq!(d.set.patterns[0].values, vec![1.0; 4]);
        for p in &d.set.patterns[1..] {
            assert_eq!(p.label, PatternLabel::Anomalous);
            assert_eq!(p.member_count, 1);
        }
    }

    #[test]
    fn labeled_discovery_marks_overlapping_clusters() {
        let mut v = vec![1.0; 16];
        v[8] = 9.0;
        let mut labels = vec![false; 16];
        labels[8] = true;
        let set = discover_patterns(&series(v), &params(4, 0.01), Some(&labels)).unwrap();
        assert_eq!(set.patterns[0].label, PatternLabel::Normal);
        assert!(set.patterns[1..].iter().all(|p| p.label == PatternLabel::Anomalous));
    }

    #[test]
    fn short_series_rejected() {
        assert!(matches!(
            discover_patterns(&series(vec![1.0; 3]), &params(4, 0.05), None),
            Err(Error::SeriesTooShort { needed: 4, actual: 3 })
        ));
    }

    #[test]
    fn match_identity_and_constant() {
        let set = set_of(
            &[
                (&[0.0, 1.0, 0.0, 3.0], PatternLabel::Normal),
                (&[2.0, 2.0, 2.0, 2.0], PatternLabel::Normal),
            ],
            1.5,
        );
        let (i, d) = match_pattern(&[0.0, 1.0, 0.0, 3.0], &set).unwrap();
        assert_eq!((i, d), (0, 0.0));
        let (i, d) = match_pattern(&[7.0; 4], &set).unwrap();
        assert_eq!((i, d), (1, 0.0));
        assert!(matches!(
            match_pattern(&[1.0; 3], &set),
            Err(Error::LengthMismatch { .. })
        ));
    }

    #[test]
    fn match_prefers_shape_over_amplitude() {
        let a = [0.0, 0.0, 0.0, 0.0];
        let b = [0.0, 0.0, 2.0, 0.0];
        let q = [0.0, 0.0, 1.0, 0.0];
        let da = reference_distance(&q, &a);
        let db = reference_distance(&q, &b);
        assert!((da - 2.0).abs() < 1e-12, "sqrt(w) from zero vector");
        assert!(db.abs() < 1e-12);
        let set = set_of(&[(&a, PatternLabel::Normal), (&b, PatternLabel::Normal)], 1.5);
        let (i, d) = match_pattern(&q, &set).unwrap();
        assert_eq!(i, 1);
        assert!((d - db).abs() < 1e-12);
    }

    #[test]
    fn ties_break_to_lowest_index() {
        let set = set_of(
            &[
                (&[1.0, 2.0, 3.0], PatternLabel::Normal),
                (&[2.0, 4.0, 6.0], PatternLabel::Anomalous),
            ],
            1.5,
        );
        assert_eq!(match_pattern(&[5.0, 6.0, 7.0], &set).unwrap().0, 0);
    }

    #[test]
    fn detect_constant_series_all_normal() {
        let set = set_of(&[(&[3.0; 4], PatternLabel::Normal)], 1.5);
        let v = detect(&series(vec![3.0; 20]), &set).unwrap();
        assert_eq!(v.len(), 17);
        assert!(v.iter().all(|x| !x.anomalous && x.distance == 0.0));
    }

    #[test]
    fn detect_flags_exactly_the_windows_covering_a_spike() {
        let set = set_of(&[(&[3.0; 4], PatternLabel::Normal)], 1.5);
        let mut v = vec![3.0; 20];
        v[10] = 13.0;
        let verdicts = detect(&series(v.clone()), &set).unwrap();
        for verdict in &verdicts {
            let covers = (verdict.start..verdict.start + 4).contains(&10);
            // exhaustive recomputation of the distance
            let d = reference_distance(&v[verdict.start..verdict.start + 4], &[3.0; 4]);
            assert!((verdict.distance - d).abs() < 1e-12);
            assert_eq!(verdict.anomalous, covers, "window {}", verdict.start);
        }
        let samples = sample_labels(&verdicts, 20, 4);
        assert_eq!(samples.iter().filter(|&&s| s).count(), 7);
    }

    #[test]
    fn detect_propagates_anomalous_label() {
        let shape = [1.0, 5.0, 1.0, 1.0];
        let set = set_of(
            &[
                (&[0.0, 1.0, 2.0, 3.0], PatternLabel::Normal),
                (&shape, PatternLabel::Anomalous),
            ],
            1.5,
        );
        let v = detect(&series(shape.to_vec()), &set).unwrap();
        assert_eq!(v.len(), 1);
        assert!(v[0].anomalous);
        assert_eq!(v[0].pattern, 1);
        assert_eq!(v[0].distance, 0.0);
    }

    #[test]
    fn adapt_identical_stream_only_counts() {
        let p = [1.0, 3.0, 2.0, 5.0];
        let mut set = set_of(&[(&p, PatternLabel::Normal)], 1.5);
        adapt(&mut set, (0..5).map(|t| (t * 60, &p[..])), &AdaptParams::default()).unwrap();
        assert_eq!(set.patterns.len(), 1);
        assert_eq!(set.patterns[0].values, p.to_vec());
        assert_eq!(set.patterns[0].member_count, 6);
        assert_eq!(set.patterns[0].last_updated_ts, 240);
    }

    #[test]
    fn adapt_promotes_new_level_after_k() {
        let base = [1.0, 3.0, 2.0, 5.0];
        let level = [10.0; 4];
        let mut set = set_of(&[(&base, PatternLabel::Normal)], 1.5);
        let params = AdaptParams::default();
        // Trace: occurrences 1 and 2 stay candidates; the 3rd promotes.
        adapt(&mut set, [(0, &level[..]), (60, &level[..])], &params).unwrap();
        assert_eq!(set.patterns.len(), 1);
        assert_eq!(set.candidates.len(), 1);
        assert_eq!(set.candidates[0].count, 2);
        adapt(&mut set, [(120, &level[..])], &params).unwrap();
        assert_eq!(set.patterns.len(), 2);
        assert!(set.candidates.is_empty());
        assert_eq!(set.patterns[1].values, level.to_vec());
        assert_eq!(set.patterns[1].label, PatternLabel::Normal);
        assert_eq!(set.patterns[1].member_count, 3);
        assert_eq!(set.patterns[0].label, PatternLabel::Normal);
    }

    #[test]
    fn adapt_single_outlier_leaves_patterns_alone() {
        let base = [1.0, 3.0, 2.0, 5.0];
        let mut set = set_of(&[(&base, PatternLabel::Normal)], 1.5);
        let before = set.patterns.clone();
        adapt(&mut set, [(0, &[0.0, 9.0, 0.0, 0.0][..])], &AdaptParams::default()).unwrap();
        assert_eq!(set.patterns, before);
    }

    #[test]
    fn candidates_expire_outside_horizon() {
        let mut set = set_of(&[(&[1.0, 3.0, 2.0, 5.0], PatternLabel::Normal)], 1.5);
        let params = AdaptParams {
            promote_k: 3,
            horizon_s: 100,
        };
        let level = [10.0; 4];
        adapt(
            &mut set,
            [(0, &level[..]), (60, &level[..]), (500, &level[..])],
            &params,
        )
        .unwrap();
        assert_eq!(set.patterns.len(), 1);
        assert_eq!(set.candidates[0].count, 1);
    }

    #[test]
    fn pattern_set_json_shape() {
        let set = set_of(&[(&[1.0, 2.0], PatternLabel::Anomalous)], 1.5);
        let v = serde_json::to_value(&set).unwrap();
        assert_eq!(v["w"], 2);
        assert_eq!(v["patterns"][0]["label"], "ANOMALOUS");
        assert!(v.get("candidates").is_none());
        let back: PatternSet = serde_json::from_value(v).unwrap();
        assert_eq!(back, set);
    }
}
