//! Joint anomaly detection and root-cause localization over one telemetry
//! set. Each service gets per-interval indicators from three modalities:
//! trace status (error rate, p95 latency), the emitted metric series and the
//! share of ERROR log lines. Their fused score drives the alarm, and the
//! mean fused score over the alarm window seeds the dependency walk.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::depgraph::{
    build_status_series, estimate_intensity, fuse_anomaly_scores, localize, percentile_median, robust_z,
    DependencyEdge, FusionWeights, IntensityParams, LocalizeParams, ModalityScores, RootCauseRanking, StatusSeries,
};
use crate::error::{Error, Result};
use crate::telemetry::{LogLevel, LogRecord, MetricSeries, TraceSpan};

pub const DEFAULT_INTERVAL_S: u32 = 30;
pub const ERROR_METRIC: &str = "error_rate";
pub const LATENCY_METRIC: &str = "latency_p95_ms";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RcaParams {
    pub interval_s: u32,
    pub intensity: IntensityParams,
    pub localize: LocalizeParams,
    pub fusion: FusionWeights,
}

impl Default for RcaParams {
    fn default() -> Self {
        RcaParams {
            interval_s: DEFAULT_INTERVAL_S,
            intensity: IntensityParams::default(),
            localize: LocalizeParams::default(),
            fusion: FusionWeights::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RcaResult {
    pub ranking: RootCauseRanking,
    /// Start timestamps of intervals whose fused score reached the alarm
    /// threshold on some service.
    pub alarm_intervals: Vec<i64>,
    /// Mean fused score per service over the alarm window.
    pub fused: BTreeMap<String, f64>,
    pub edges: Vec<DependencyEdge>,
}

// Error-rate excess over the service's usual level, saturating at twice the
// degradation threshold.
fn error_indicator(values: &[f64], threshold: f64) -> Vec<f64> {
    let base = percentile_median(values);
    values
        .iter()
        .map(|e| ((e - base) / (2.0 * threshold)).clamp(0.0, 1.0))
        .collect()
}

// Robust z of latency, counted only above `ratio` times the median.
fn latency_indicator(values: &[f64], z_threshold: f64, ratio: f64) -> Vec<f64> {
    let floor = ratio * percentile_median(values);
    robust_z(values)
        .into_iter()
        .zip(values)
        .map(|(z, &v)| {
            if v > floor {
                (z / (2.0 * z_threshold)).clamp(0.0, 1.0)
            } else {
                0.0
            }
        })
        .collect()
}

fn combine(a: Vec<f64>, b: Vec<f64>) -> Vec<f64> {
    a.into_iter().zip(b).map(|(x, y)| x.max(y)).collect()
}

fn trace_indicators(st: &StatusSeries, p: &IntensityParams) -> Vec<f64> {
    combine(
        error_indicator(&st.error_rate, p.error_threshold),
        latency_indicator(&st.p95_latency_ms, p.latency_z, p.latency_ratio),
    )
}

// Resamples a metric series onto the grid, keeping the worst value per cell.
fn regrid(m: &MetricSeries, origin: i64, interval: i64, n: usize) -> Option<Vec<f64>> {
    let mut out = vec![f64::NAN; n];
    for (k, &v) in m.values.iter().enumerate() {
        let ts = m.start_ts + k as i64 * m.interval_s as i64;
        if ts < origin {
            continue;
        }
        let cell = ((ts - origin) / interval) as usize;
        if cell < n && (out[cell].is_nan() || v > out[cell]) {
            out[cell] = v;
        }
    }
    if out.iter().all(|v| v.is_nan()) {
        return None;
    }
    // Carry the last seen value into cells the series does not cover.
    let mut last = out.iter().copied().find(|v| !v.is_nan()).unwrap_or(0.0);
    for v in &mut out {
        if v.is_nan() {
            *v = last;
        } else {
            last = *v;
        }
    }
    Some(out)
}

fn metric_indicators(
    metrics: &[MetricSeries],
    service: &str,
    origin: i64,
    interval: i64,
    n: usize,
    p: &IntensityParams,
) -> Option<Vec<f64>> {
    let find = |name: &str| {
        metrics
            .iter()
            .find(|m| m.service_id == service && m.metric_name == name)
            .and_then(|m| regrid(m, origin, interval, n))
    };
    let err = find(ERROR_METRIC).map(|v| error_indicator(&v, p.error_threshold));
    let lat = find(LATENCY_METRIC).map(|v| latency_indicator(&v, p.latency_z, p.latency_ratio));
    match (err, lat) {
        (Some(a), Some(b)) => Some(combine(a, b)),
        (a, b) => a.or(b),
    }
}

fn log_indicators(logs: &[&LogRecord], origin: i64, interval: i64, n: usize, p: &IntensityParams) -> Vec<f64> {
    let mut total = vec![0usize; n];
    let mut errors = vec![0usize; n];
    for l in logs {
        if l.ts < origin {
            continue;
        }
        let cell = ((l.ts - origin) / interval) as usize;
        if cell < n {
            total[cell] += 1;
            if l.level == LogLevel::Error {
                errors[cell] += 1;
            }
        }
    }
    let share: Vec<f64> = total
        .iter()
        .zip(&errors)
        .map(|(&t, &e)| if t == 0 { 0.0 } else { e as f64 / t as f64 })
        .collect();
    error_indicator(&share, p.error_threshold)
}

/// Per-service fused anomaly score per interval on the trace status grid.
pub fn fused_series(
    status: &BTreeMap<String, StatusSeries>,
    metrics: &[MetricSeries],
    logs: &[LogRecord],
    params: &RcaParams,
) -> Result<BTreeMap<String, Vec<f64>>> {
    let mut by_service: BTreeMap<&str, Vec<&LogRecord>> = BTreeMap::new();
    for l in logs {
        by_service.entry(l.service_id.as_str()).or_default().push(l);
    }
    let p = &params.intensity;
    let mut out = BTreeMap::new();
    for (svc, st) in status {
        let n = st.len();
        let interval = st.interval_s as i64;
        let traces = trace_indicators(st, p);
        let metric = metric_indicators(metrics, svc, st.start_ts, interval, n, p);
        let log = by_service
            .get(svc.as_str())
            .map(|l| log_indicators(l, st.start_ts, interval, n, p));
        let mut fused = Vec::with_capacity(n);
        for k in 0..n {
            let scores = ModalityScores {
                metrics: metric.as_ref().map(|m| m[k]),
                logs: log.as_ref().map(|l| l[k]),
                traces: Some(traces[k]),
            };
            fused.push(fuse_anomaly_scores(&scores, &params.fusion)?);
        }
        out.insert(svc.clone(), fused);
    }
    Ok(out)
}

/// Detects the alarm window and, when there is one, ranks culprit services.
pub fn detect_and_localize(
    spans: &[TraceSpan],
    metrics: &[MetricSeries],
    logs: &[LogRecord],
    params: &RcaParams,
) -> Result<RcaResult> {
    if spans.is_empty() {
        return Err(Error::param("spans", "no trace spans to analyse"));
    }
    let status = build_status_series(spans, params.interval_s)?;
    let edges = estimate_intensity(&status, spans, &params.intensity);
    let series = fused_series(&status, metrics, logs, params)?;
    let n = status.values().map(StatusSeries::len).max().unwrap_or(0);
    let threshold = params.localize.alarm_threshold;
    let alarmed: Vec<usize> = (0..n)
        .filter(|&k| series.values().any(|s| s.get(k).is_some_and(|&v| v >= threshold)))
        .collect();
    let origin = status.values().next().map_or(0, |s| s.start_ts);
    let alarm_intervals = alarmed
        .iter()
        .map(|&k| origin + k as i64 * params.interval_s as i64)
        .collect();
    if alarmed.is_empty() {
        return Ok(RcaResult {
            ranking: RootCauseRanking::default(),
            alarm_intervals,
            fused: BTreeMap::new(),
            edges,
        });
    }
    let fused: BTreeMap<String, f64> = series
        .iter()
        .map(|(svc, s)| {
            (
                svc.clone(),
                alarmed.iter().map(|&k| s[k]).sum::<f64>() / alarmed.len() as f64,
            )
        })
        .collect();
    // The window is non-empty, so the walk always runs; a window whose mean
    // dips below the threshold still alarms.
    let walk = LocalizeParams {
        alarm_threshold: 0.0,
        ..params.localize
    };
    let ranking = localize(&fused, &edges, &walk)?;
    Ok(RcaResult {
        ranking,
        alarm_intervals,
        fused,
        edges,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn indicators_are_bounded_and_baseline_relative() {
        let e = error_indicator(&[0.01, 0.01, 0.01, 0.11, 0.5], 0.1);
        assert_eq!(e[0], 0.0);
        assert!((e[3] - 0.5).abs() < 1e-12);
        assert_eq!(e[4], 1.0);
        let mut lat = vec![20.0; 20];
        lat[5] = 25.0;
        lat[10] = 200.0;
        let l = latency_indicator(&lat, 3.0, 1.5);
        assert_eq!(l[5], 0.0);
        assert_eq!(l[10], 1.0);
        assert!(l.iter().all(|v| (0.0..=1.0).contains(v)));
    }

    #[test]
    fn regrid_keeps_worst_value() {
        let m = MetricSeries::new("a", ERROR_METRIC, 100, 10, vec![0.1, 0.3, 0.2, 0.0]);
        assert_eq!(regrid(&m, 100, 20, 3).unwrap(), vec![0.3, 0.2, 0.2]);
    }
}
