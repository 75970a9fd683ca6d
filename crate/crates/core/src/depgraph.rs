//! Service status series from traces, continuous dependency intensity,
//! multi-modal anomaly fusion and random-walk root-cause localization.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::telemetry::{SpanStatus, TraceSpan};

pub const DEFAULT_MAX_LAG: usize = 3;
pub const DEFAULT_ERROR_DEGRADED: f64 = 0.1;
pub const DEFAULT_LATENCY_Z: f64 = 3.0;
pub const DEFAULT_LATENCY_RATIO: f64 = 1.5;
pub const DEFAULT_MIN_RUN: usize = 2;
pub const DEFAULT_ALARM_THRESHOLD: f64 = 0.5;
pub const DEFAULT_DAMPING: f64 = 0.85;
pub const WALK_TOL: f64 = 1e-9;
pub const MAX_WALK_ITERS: usize = 10_000;

/// Per-interval health of one service as a callee.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatusSeries {
    pub service_id: String,
    pub start_ts: i64,
    pub interval_s: u32,
    pub error_rate: Vec<f64>,
    pub p95_latency_ms: Vec<f64>,
    /// Requests per second.
    pub request_rate: Vec<f64>,
}

impl StatusSeries {
    pub fn len(&self) -> usize {
        self.error_rate.len()
    }

    pub fn is_empty(&self) -> bool {
        self.error_rate.is_empty()
    }
}

/// Nearest-rank percentile: the value at rank `ceil(q * n)` of the sorted
/// sample. Zero for an empty sample.
pub fn percentile_nearest_rank(values: &[f64], q: f64) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let rank = ((q * v.len() as f64).ceil() as usize).clamp(1, v.len());
    v[rank - 1]
}

/// Status series for every callee on a shared grid aligned to multiples
/// of `interval_s` that covers all span start times.
pub fn build_status_series(spans: &[TraceSpan], interval_s: u32) -> Result<BTreeMap<String, StatusSeries>> {
    if interval_s == 0 {
        return Err(Error::param("interval_s", "must be positive"));
    }
    let mut out = BTreeMap::new();
    if spans.is_empty() {
        return Ok(out);
    }
    let step = interval_s as i64;
    let lo = spans.iter().map(|s| s.start_ts.floor() as i64).min().unwrap();
    let hi = spans.iter().map(|s| s.start_ts.floor() as i64).max().unwrap();
    let origin = lo.div_euclid(step) * step;
    let n = ((hi - origin) / step) as usize + 1;

    // service -> per-interval (errors, durations)
    let mut acc: BTreeMap<&str, Vec<(usize, Vec<f64>)>> = BTreeMap::new();
    for s in spans {
        let k = ((s.start_ts.floor() as i64 - origin) / step) as usize;
        let cells = acc.entry(s.callee.as_str()).or_insert_with(|| vec![(0, Vec::new()); n]);
        if s.status == SpanStatus::Error {
            cells[k].0 += 1;
        }
        cells[k].1.push(s.duration_ms);
    }
    for (svc, cells) in acc {
        let mut st = StatusSeries {
            service_id: svc.to_string(),
            start_ts: origin,
            interval_s,
            error_rate: Vec::with_capacity(n),
            p95_latency_ms: Vec::with_capacity(n),
            request_rate: Vec::with_capacity(n),
        };
        for (errors, durations) in cells {
            let total = durations.len();
            st.error_rate
                .push(if total == 0 { 0.0 } else { errors as f64 / total as f64 });
            st.p95_latency_ms.push(percentile_nearest_rank(&durations, 0.95));
            st.request_rate.push(total as f64 / interval_s as f64);
        }
        out.insert(svc.to_string(), st);
    }
    Ok(out)
}

/// Robust z-scores `(x - median) / (1.4826 * MAD)`. A zero MAD is floored
/// at a tiny scale, so any departure from a constant series scores high.
pub fn robust_z(values: &[f64]) -> Vec<f64> {
    if values.is_empty() {
        return Vec::new();
    }
    let median = percentile_median(values);
    let dev: Vec<f64> = values.iter().map(|v| (v - median).abs()).collect();
    let scale = (1.4826 * percentile_median(&dev)).max(1e-9 * (1.0 + median.abs()));
    values.iter().map(|v| (v - median) / scale).collect()
}

pub(crate) fn percentile_median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

/// Pearson correlation; `None` when either side has (near) zero variance.
pub fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    let n = x.len().min(y.len());
    if n < 2 {
        return None;
    }
    let mx = x[..n].iter().sum::<f64>() / n as f64;
    let my = y[..n].iter().sum::<f64>() / n as f64;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for i in 0..n {
        let (dx, dy) = (x[i] - mx, y[i] - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    let tiny = 1e-12 * n as f64 * (1.0 + mx * mx + my * my);
    if sxx <= tiny || syy <= tiny {
        return None;
    }
    Some(sxy / (sxx * syy).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IntensityParams {
    pub max_lag: usize,
    /// Callee error rate above which an interval is degraded.
    pub error_threshold: f64,
    /// Callee latency robust z-score above which an interval is degraded.
    pub latency_z: f64,
    /// Latency must also exceed this multiple of the callee's median p95.
    pub latency_ratio: f64,
    /// Degraded runs shorter than this many intervals are ignored.
    pub min_run: usize,
}

impl Default for IntensityParams {
    fn default() -> Self {
        IntensityParams {
            max_lag: DEFAULT_MAX_LAG,
            error_threshold: DEFAULT_ERROR_DEGRADED,
            latency_z: DEFAULT_LATENCY_Z,
            latency_ratio: DEFAULT_LATENCY_RATIO,
            min_run: DEFAULT_MIN_RUN,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DependencyEdge {
    pub caller: String,
    pub callee: String,
    pub intensity: f64,
    pub invocation_count: usize,
}

// Drops degraded runs shorter than `min_run`.
fn sustained(degraded: &[bool], min_run: usize) -> Vec<bool> {
    let mut out = degraded.to_vec();
    let mut i = 0;
    while i < out.len() {
        if !out[i] {
            i += 1;
            continue;
        }
        let start = i;
        while i < out.len() && out[i] {
            i += 1;
        }
        if i - start < min_run {
            out[start..i].fill(false);
        }
    }
    out
}

// Degraded intervals widened on both sides by the run length (at least
// `min_pad`), so each window sees the transition into and out of the
// degradation rather than only its plateau.
fn context_mask(degraded: &[bool], min_pad: usize) -> Vec<bool> {
    let n = degraded.len();
    let mut mask = vec![false; n];
    let mut i = 0;
    while i < n {
        if !degraded[i] {
            i += 1;
            continue;
        }
        let start = i;
        while i < n && degraded[i] {
            i += 1;
        }
        let pad = (i - start).max(min_pad);
        for m in &mut mask[start.saturating_sub(pad)..(i + pad).min(n)] {
            *m = true;
        }
    }
    mask
}

/// Correlation of one degraded callee channel with the caller's channel,
/// maximised later over lags. Returns per-lag clamped correlations.
fn channel_scores(callee: &[f64], caller: &[f64], degraded: &[bool], max_lag: usize) -> Vec<f64> {
    let mask = context_mask(degraded, max_lag.max(1));
    (0..=max_lag)
        .map(|lag| {
            let (mut x, mut y) = (Vec::new(), Vec::new());
            for t in (0..callee.len()).filter(|&t| mask[t] && t + lag < caller.len()) {
                x.push(callee[t]);
                y.push(caller[t + lag]);
            }
            pearson(&x, &y).unwrap_or(0.0).clamp(0.0, 1.0)
        })
        .collect()
}

/// Intensity of `caller` depending on `callee` from their status series.
pub fn pair_intensity(caller: &StatusSeries, callee: &StatusSeries, params: &IntensityParams) -> f64 {
    let z = robust_z(&callee.p95_latency_ms);
    let err_deg: Vec<bool> = callee.error_rate.iter().map(|&e| e > params.error_threshold).collect();
    let err_deg = sustained(&err_deg, params.min_run);
    let floor = params.latency_ratio * percentile_median(&callee.p95_latency_ms);
    let lat_deg: Vec<bool> = z
        .iter()
        .zip(&callee.p95_latency_ms)
        .map(|(&v, &p)| v > params.latency_z && p > floor)
        .collect();
    let lat_deg = sustained(&lat_deg, params.min_run);

    let mut per_channel: Vec<Vec<f64>> = Vec::new();
    if err_deg.iter().any(|&d| d) {
        per_channel.push(channel_scores(
            &callee.error_rate,
            &caller.error_rate,
            &err_deg,
            params.max_lag,
        ));
    }
    if lat_deg.iter().any(|&d| d) {
        per_channel.push(channel_scores(
            &callee.p95_latency_ms,
            &caller.p95_latency_ms,
            &lat_deg,
            params.max_lag,
        ));
    }
    if per_channel.is_empty() {
        return 0.0;
    }
    (0..=params.max_lag)
        .map(|lag| per_channel.iter().map(|c| c[lag]).sum::<f64>() / per_channel.len() as f64)
        .fold(0.0, f64::max)
}

/// One edge per observed caller→callee pair, sorted by (caller, callee).
/// Callers with no status series of their own get intensity 0.
pub fn estimate_intensity(
    status: &BTreeMap<String, StatusSeries>,
    spans: &[TraceSpan],
    params: &IntensityParams,
) -> Vec<DependencyEdge> {
    let mut counts: BTreeMap<(&str, &str), usize> = BTreeMap::new();
    for s in spans.iter().filter(|s| s.caller != s.callee) {
        *counts.entry((s.caller.as_str(), s.callee.as_str())).or_default() += 1;
    }
    counts
        .into_iter()
        .map(|((caller, callee), n)| {
            let intensity = match (status.get(caller), status.get(callee)) {
                (Some(a), Some(b)) => pair_intensity(a, b, params),
                _ => 0.0,
            };
            DependencyEdge {
                caller: caller.to_string(),
                callee: callee.to_string(),
                intensity,
                invocation_count: n,
            }
        })
        .collect()
}

/// Per-modality anomaly indicators in [0, 1]; absent modalities are `None`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ModalityScores {
    pub metrics: Option<f64>,
    pub logs: Option<f64>,
    pub traces: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FusionWeights {
    pub metrics: f64,
    pub logs: f64,
    pub traces: f64,
}

impl Default for FusionWeights {
    fn default() -> Self {
        FusionWeights {
            metrics: 1.0,
            logs: 1.0,
            traces: 1.0,
        }
    }
}

/// Weighted mean of the present modalities, weights renormalized.
pub fn fuse_anomaly_scores(scores: &ModalityScores, weights: &FusionWeights) -> Result<f64> {
    let items = [
        (scores.metrics, weights.metrics, "metrics"),
        (scores.logs, weights.logs, "logs"),
        (scores.traces, weights.traces, "traces"),
    ];
    let (mut num, mut den) = (0.0, 0.0);
    for (s, w, name) in items {
        if w < 0.0 {
            return Err(Error::param(name, "weight must be non-negative"));
        }
        if let Some(s) = s {
            if !(0.0..=1.0).contains(&s) {
                return Err(Error::param(name, "score must lie in [0, 1]"));
            }
            num += w * s;
            den += w;
        }
    }
    if den == 0.0 {
        return Err(Error::NoModalities);
    }
    Ok(num / den)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LocalizeParams {
    pub alarm_threshold: f64,
    pub damping: f64,
}

impl Default for LocalizeParams {
    fn default() -> Self {
        LocalizeParams {
            alarm_threshold: DEFAULT_ALARM_THRESHOLD,
            damping: DEFAULT_DAMPING,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RootCauseRanking {
    pub alarm: bool,
    pub scores: BTreeMap<String, f64>,
    /// Services by descending score, ties by id.
    pub ranking: Vec<String>,
}

impl RootCauseRanking {
    /// Whether `culprit` is among the first `k` ranked services.
    pub fn hit_at(&self, culprit: &str, k: usize) -> bool {
        self.ranking.iter().take(k).any(|s| s == culprit)
    }
}

/// Personalized damped walk along caller→callee edges. From `u` the walk
/// moves to `v` with probability `intensity(u, v) / max(1, Σ intensity(u, ·))`
/// and stays at `u` otherwise; restarts follow the fused scores.
pub fn localize(
    fused: &BTreeMap<String, f64>,
    edges: &[DependencyEdge],
    params: &LocalizeParams,
) -> Result<RootCauseRanking> {
    if !(params.damping >= 0.0 && params.damping < 1.0) {
        return Err(Error::param("damping", "must lie in [0, 1)"));
    }
    let max = fused.values().copied().fold(0.0, f64::max);
    if fused.is_empty() || max < params.alarm_threshold || max <= 0.0 {
        return Ok(RootCauseRanking::default());
    }

    let nodes: Vec<&str> = fused
        .keys()
        .map(String::as_str)
        .chain(edges.iter().flat_map(|e| [e.caller.as_str(), e.callee.as_str()]))
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let index: BTreeMap<&str, usize> = nodes.iter().enumerate().map(|(i, n)| (*n, i)).collect();
    let n = nodes.len();

    let total: f64 = fused.values().sum();
    let mut restart = vec![0.0; n];
    for (s, v) in fused {
        restart[index[s.as_str()]] = v / total;
    }

    let mut out_sum = vec![0.0; n];
    for e in edges.iter().filter(|e| e.caller != e.callee) {
        out_sum[index[e.caller.as_str()]] += e.intensity;
    }
    let stay: Vec<f64> = out_sum.iter().map(|&s| 1.0 - s / s.max(1.0)).collect();
    let moves: Vec<(usize, usize, f64)> = edges
        .iter()
        .filter(|e| e.caller != e.callee && e.intensity > 0.0)
        .map(|e| {
            let u = index[e.caller.as_str()];
            (u, index[e.callee.as_str()], e.intensity / out_sum[u].max(1.0))
        })
        .collect();

    let beta = params.damping;
    let mut pi = restart.clone();
    for _ in 0..MAX_WALK_ITERS {
        let mut next: Vec<f64> = restart.iter().map(|r| (1.0 - beta) * r).collect();
        for (u, p) in pi.iter().enumerate() {
            next[u] += beta * p * stay[u];
        }
        for &(u, v, p) in &moves {
            next[v] += beta * pi[u] * p;
        }
        let delta: f64 = next.iter().zip(&pi).map(|(a, b)| (a - b).abs()).sum();
        pi = next;
        if delta < WALK_TOL {
            let scores: BTreeMap<String, f64> = nodes.iter().map(|s| s.to_string()).zip(pi).collect();
            let mut ranking: Vec<String> = scores.keys().cloned().collect();
            ranking.sort_by(|a, b| scores[b].total_cmp(&scores[a]).then_with(|| a.cmp(b)));
            return Ok(RootCauseRanking {
                alarm: true,
                scores,
                ranking,
            });
        }
    }
    Err(Error::NoConvergence(MAX_WALK_ITERS))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn span(i: usize, caller: &str, callee: &str, ts: f64, dur: f64, ok: bool) -> TraceSpan {
        let status = if ok { SpanStatus::Ok } else { SpanStatus::Error };
        TraceSpan::new(format!("t{i}"), format!("s{i}"), caller, callee, ts, dur, status)
    }

    fn series(id: &str, err: Vec<f64>, lat: Vec<f64>) -> StatusSeries {
        let n = err.len();
        StatusSeries {
            service_id: id.into(),
            start_ts: 0,
            interval_s: 60,
            error_rate: err,
            p95_latency_ms: lat,
            request_rate: vec![1.0; n],
        }
    }

    #[test]
    fn error_rate_and_empty_interval() {
        let mut spans: Vec<TraceSpan> = (0..5)
            .map(|i| span(i, "a", "b", 10.0 + i as f64, 5.0, i != 0))
            .collect();
        spans.push(span(9, "a", "b", 130.0, 5.0, true));
        let st = build_status_series(&spans, 60).unwrap();
        let b = &st["b"];
        assert_eq!(b.error_rate, vec![0.2, 0.0, 0.0]);
        assert_eq!(b.p95_latency_ms[1], 0.0);
        assert_eq!(b.request_rate[1], 0.0);
        assert!((b.request_rate[0] - 5.0 / 60.0).abs() < 1e-12);
        assert!(!st.contains_key("a"));
    }

    #[test]
    fn p95_is_nearest_rank() {
        // ceil(0.95 * 100) = 95, so the 95th smallest of 1..=100.
        let d: Vec<f64> = (1..=100).map(f64::from).collect();
        assert_eq!(percentile_nearest_rank(&d, 0.95), 95.0);
        // ceil(0.95 * 10) = 10: the maximum of a 10-sample.
        assert_eq!(percentile_nearest_rank(&d[..10], 0.95), 10.0);
        let spans: Vec<TraceSpan> = (1..=100).map(|i| span(i, "a", "b", 1.0, i as f64, true)).collect();
        assert_eq!(build_status_series(&spans, 60).unwrap()["b"].p95_latency_ms, vec![95.0]);
    }

    #[test]
    fn identical_error_channel_gives_full_intensity() {
        let mut err = vec![0.0; 40];
        for (i, e) in err.iter_mut().enumerate().skip(15).take(10) {
            *e = 0.3 + 0.02 * (i % 3) as f64;
        }
        let lat = vec![10.0; 40];
        let callee = series("b", err.clone(), lat.clone());
        let caller = series("a", err, lat);
        let v = pair_intensity(&caller, &callee, &IntensityParams::default());
        assert!((v - 1.0).abs() < 1e-12);
    }

    #[test]
    fn unaffected_caller_scores_low() {
        let mut err = vec![0.0; 60];
        for e in err.iter_mut().skip(20).take(20) {
            *e = 0.5;
        }
        let callee = series("b", err, vec![10.0; 60]);
        let caller = series("a", vec![0.0; 60], vec![10.0; 60]);
        assert_eq!(pair_intensity(&caller, &callee, &IntensityParams::default()), 0.0);
    }

    #[test]
    fn lag_is_searched() {
        let mut err = vec![0.0; 50];
        for e in err.iter_mut().skip(20).take(8) {
            *e = 0.6;
        }
        let mut shifted = vec![0.0; 50];
        shifted[22..30].copy_from_slice(&err[20..28]);
        let callee = series("b", err, vec![1.0; 50]);
        let caller = series("a", shifted, vec![1.0; 50]);
        let p = IntensityParams::default();
        assert!((pair_intensity(&caller, &callee, &p) - 1.0).abs() < 1e-12);
        let no_lag = IntensityParams { max_lag: 0, ..p };
        assert!(pair_intensity(&caller, &callee, &no_lag) < 0.8);
    }

    #[test]
    fn no_degradation_means_zero() {
        let callee = series("b", vec![0.0; 10], vec![5.0; 10]);
        let caller = series("a", vec![0.0; 10], vec![5.0; 10]);
        assert_eq!(pair_intensity(&caller, &callee, &IntensityParams::default()), 0.0);
    }

    #[test]
    fn fusion_rules() {
        let w = FusionWeights::default();
        let all0 = ModalityScores {
            metrics: Some(0.0),
            logs: Some(0.0),
            traces: Some(0.0),
        };
        assert_eq!(fuse_anomaly_scores(&all0, &w).unwrap(), 0.0);
        let only = ModalityScores {
            metrics: Some(1.0),
            ..Default::default()
        };
        assert_eq!(fuse_anomaly_scores(&only, &w).unwrap(), 1.0);
        let mixed = ModalityScores {
            metrics: Some(1.0),
            logs: Some(0.0),
            traces: Some(0.5),
        };
        assert_eq!(fuse_anomaly_scores(&mixed, &w).unwrap(), 0.5);
        assert!(matches!(
            fuse_anomaly_scores(&ModalityScores::default(), &w),
            Err(Error::NoModalities)
        ));
    }

    fn edge(a: &str, b: &str, w: f64) -> DependencyEdge {
        DependencyEdge {
            caller: a.into(),
            callee: b.into(),
            intensity: w,
            invocation_count: 1,
        }
    }

    #[test]
    fn isolated_leaf_keeps_its_mass() {
        let fused: BTreeMap<String, f64> = [("a".to_string(), 0.1), ("c".to_string(), 0.9)].into();
        let r = localize(&fused, &[edge("a", "b", 0.2)], &LocalizeParams::default()).unwrap();
        assert!(r.alarm);
        assert_eq!(r.ranking[0], "c");
        assert!((r.scores.values().sum::<f64>() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn chain_mass_flows_to_the_callee() {
        let fused: BTreeMap<String, f64> =
            [("a".to_string(), 0.9), ("b".to_string(), 0.9), ("c".to_string(), 0.8)].into();
        let edges = [edge("a", "b", 0.9), edge("b", "c", 0.9)];
        let r = localize(&fused, &edges, &LocalizeParams::default()).unwrap();
        assert_eq!(r.ranking, vec!["c", "b", "a"]);
    }

    #[test]
    fn walk_matches_closed_form_on_two_nodes() {
        // a -> b with intensity 0.5: a stays with 0.5. Restart (1, 0).
        // pi_a = 0.15 + 0.85 * 0.5 * pi_a  =>  pi_a = 0.15 / 0.575.
        let fused: BTreeMap<String, f64> = [("a".to_string(), 1.0), ("b".to_string(), 0.0)].into();
        let r = localize(&fused, &[edge("a", "b", 0.5)], &LocalizeParams::default()).unwrap();
        let pa = 0.15 / 0.575;
        assert!((r.scores["a"] - pa).abs() < 1e-8);
        assert!((r.scores["b"] - (1.0 - pa)).abs() < 1e-8);
    }

    #[test]
    fn no_alarm_no_ranking() {
        let fused: BTreeMap<String, f64> = [("a".to_string(), 0.3)].into();
        let r = localize(&fused, &[], &LocalizeParams::default()).unwrap();
        assert!(!r.alarm && r.ranking.is_empty() && r.scores.is_empty());
    }
}
