//! Record types for the five monitoring-data kinds, JSON-lines ingestion
//! and fixed-interval windowing.
//!
//! Every kind lives in its own `.jsonl` file, one object per line. Fields
//! the types do not know about are kept in `extra` so that a load/store
//! cycle reproduces the input.

use std::collections::HashSet;
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::error::{Error, Result};

pub type Extra = Map<String, Value>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricSeries {
    pub service_id: String,
    pub metric_name: String,
    pub start_ts: i64,
    pub interval_s: u32,
    pub values: Vec<f64>,
    #[serde(flatten)]
    pub extra: Extra,
}

impl MetricSeries {
    pub fn new(
        service_id: impl Into<String>,
        metric_name: impl Into<String>,
        start_ts: i64,
        interval_s: u32,
        values: Vec<f64>,
    ) -> Self {
        MetricSeries {
            service_id: service_id.into(),
            metric_name: metric_name.into(),
            start_ts,
            interval_s,
            values,
            extra: Extra::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Timestamp of sample `i`.
    pub fn ts_at(&self, i: usize) -> i64 {
        self.start_ts + i as i64 * i64::from(self.interval_s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum LogLevel {
    Debug,
    Info,
    Warn,
    Error,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogRecord {
    pub ts: i64,
    pub service_id: String,
    pub level: LogLevel,
    pub message: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub session_id: Option<String>,
    #[serde(flatten)]
    pub extra: Extra,
}

impl LogRecord {
    pub fn new(ts: i64, service_id: impl Into<String>, level: LogLevel, message: impl Into<String>) -> Self {
        LogRecord {
            ts,
            service_id: service_id.into(),
            level,
            message: message.into(),
            session_id: None,
            extra: Extra::new(),
        }
    }

    pub fn with_session(mut self, session_id: impl Into<String>) -> Self {
        self.session_id = Some(session_id.into());
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum SpanStatus {
    Ok,
    Error,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceSpan {
    pub trace_id: String,
    pub span_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parent_span_id: Option<String>,
    pub caller: String,
    pub callee: String,
    pub start_ts: f64,
    pub duration_ms: f64,
    pub status: SpanStatus,
    #[serde(flatten)]
    pub extra: Extra,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Severity {
    Info,
    Warning,
    Critical,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Alert {
    pub alert_id: String,
    pub ts: i64,
    pub service_id: String,
    pub severity: Severity,
    pub text: String,
    #[serde(flatten)]
    pub extra: Extra,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ticket {
    pub ticket_id: String,
    pub ts: i64,
    pub product: String,
    pub text: String,
    pub customer_id: String,
    #[serde(flatten)]
    pub extra: Extra,
}

impl TraceSpan {
    pub fn new(
        trace_id: impl Into<String>,
        span_id: impl Into<String>,
        caller: impl Into<String>,
        callee: impl Into<String>,
        start_ts: f64,
        duration_ms: f64,
        status: SpanStatus,
    ) -> Self {
        TraceSpan {
            trace_id: trace_id.into(),
            span_id: span_id.into(),
            parent_span_id: None,
            caller: caller.into(),
            callee: callee.into(),
            start_ts,
            duration_ms,
            status,
            extra: Extra::new(),
        }
    }

    pub fn with_parent(mut self, parent: impl Into<String>) -> Self {
        self.parent_span_id = Some(parent.into());
        self
    }
}

impl Alert {
    pub fn new(
        alert_id: impl Into<String>,
        ts: i64,
        service_id: impl Into<String>,
        severity: Severity,
        text: impl Into<String>,
    ) -> Self {
        Alert {
            alert_id: alert_id.into(),
            ts,
            service_id: service_id.into(),
            severity,
            text: text.into(),
            extra: Extra::new(),
        }
    }
}

impl Ticket {
    pub fn new(
        ticket_id: impl Into<String>,
        ts: i64,
        product: impl Into<String>,
        text: impl Into<String>,
        customer_id: impl Into<String>,
    ) -> Self {
        Ticket {
            ticket_id: ticket_id.into(),
            ts,
            product: product.into(),
            text: text.into(),
            customer_id: customer_id.into(),
            extra: Extra::new(),
        }
    }
}

/// A field-level invariant violation.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldError {
    pub field: &'static str,
    pub message: String,
}

impl FieldError {
    fn new(field: &'static str, message: impl Into<String>) -> Self {
        FieldError {
            field,
            message: message.into(),
        }
    }
}

/// A record kind that can be validated on its own and in the context of
/// the records that precede it in the same file.
pub trait Record: Serialize + DeserializeOwned {
    type StreamState: Default;

    const KIND: RecordKind;

    fn validate(&self) -> Result<(), FieldError>;

    fn validate_in_stream(&self, _state: &mut Self::StreamState) -> Result<(), FieldError> {
        Ok(())
    }
}

impl Record for MetricSeries {
    type StreamState = ();
    const KIND: RecordKind = RecordKind::Metrics;

    fn validate(&self) -> Result<(), FieldError> {
        if self.interval_s == 0 {
            return Err(FieldError::new("interval_s", "must be positive"));
        }
        if self.values.is_empty() {
            return Err(FieldError::new("values", "must contain at least one sample"));
        }
        if let Some(i) = self.values.iter().position(|v| !v.is_finite()) {
            return Err(FieldError::new("values", format!("sample {i} is not finite")));
        }
        Ok(())
    }
}

impl Record for LogRecord {
    type StreamState = Option<i64>;
    const KIND: RecordKind = RecordKind::Logs;

    fn validate(&self) -> Result<(), FieldError> {
        if self.message.trim().is_empty() {
            return Err(FieldError::new("message", "must be non-empty"));
        }
        Ok(())
    }

    fn validate_in_stream(&self, last_ts: &mut Option<i64>) -> Result<(), FieldError> {
        if let Some(prev) = *last_ts {
            if self.ts < prev {
                return Err(FieldError::new(
                    "ts",
                    format!("{} precedes previous record at {prev}", self.ts),
                ));
            }
        }
        *last_ts = Some(self.ts);
        Ok(())
    }
}

impl Record for TraceSpan {
    type StreamState = HashSet<(String, String)>;
    const KIND: RecordKind = RecordKind::Traces;

    fn validate(&self) -> Result<(), FieldError> {
        if !(self.duration_ms >= 0.0) || !self.duration_ms.is_finite() {
            return Err(FieldError::new(
                "duration_ms",
                format!("{} is negative or not finite", self.duration_ms),
            ));
        }
        if !self.start_ts.is_finite() {
            return Err(FieldError::new("start_ts", "not finite"));
        }
        if self.caller == self.callee {
            return Err(FieldError::new("callee", "caller and callee must differ"));
        }
        Ok(())
    }

    fn validate_in_stream(&self, seen: &mut Self::StreamState) -> Result<(), FieldError> {
        if !seen.insert((self.trace_id.clone(), self.span_id.clone())) {
            return Err(FieldError::new(
                "span_id",
                format!("duplicate span {} in trace {}", self.span_id, self.trace_id),
            ));
        }
        Ok(())
    }
}

impl Record for Alert {
    type StreamState = ();
    const KIND: RecordKind = RecordKind::Alerts;

    fn validate(&self) -> Result<(), FieldError> {
        if self.text.trim().is_empty() {
            return Err(FieldError::new("text", "must be non-empty"));
        }
        Ok(())
    }
}

impl Record for Ticket {
    type StreamState = HashSet<String>;
    const KIND: RecordKind = RecordKind::Tickets;

    fn validate(&self) -> Result<(), FieldError> {
        Ok(())
    }

    fn validate_in_stream(&self, seen: &mut HashSet<String>) -> Result<(), FieldError> {
        if !seen.insert(self.ticket_id.clone()) {
            return Err(FieldError::new("ticket_id", format!("duplicate id {}", self.ticket_id)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RecordKind {
    Metrics,
    Logs,
    Traces,
    Alerts,
    Tickets,
}

impl RecordKind {
    pub const ALL: [RecordKind; 5] = [
        RecordKind::Metrics,
        RecordKind::Logs,
        RecordKind::Traces,
        RecordKind::Alerts,
        RecordKind::Tickets,
    ];

    pub fn file_name(self) -> &'static str {
        match self {
            RecordKind::Metrics => "metrics.jsonl",
            RecordKind::Logs => "logs.jsonl",
            RecordKind::Traces => "traces.jsonl",
            RecordKind::Alerts => "alerts.jsonl",
            RecordKind::Tickets => "tickets.jsonl",
        }
    }
}

impl fmt::Display for RecordKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            RecordKind::Metrics => "metrics",
            RecordKind::Logs => "logs",
            RecordKind::Traces => "traces",
            RecordKind::Alerts => "alerts",
            RecordKind::Tickets => "tickets",
        };
        f.write_str(name)
    }
}

impl FromStr for RecordKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "metrics" => Ok(RecordKind::Metrics),
            "logs" => Ok(RecordKind::Logs),
            "traces" => Ok(RecordKind::Traces),
            "alerts" => Ok(RecordKind::Alerts),
            "tickets" => Ok(RecordKind::Tickets),
            other => Err(Error::param("kind", format!("unknown record kind `{other}`"))),
        }
    }
}

/// Records of any kind, as returned by [`load_records`].
#[derive(Debug, Clone, PartialEq)]
pub enum Records {
    Metrics(Vec<MetricSeries>),
    Logs(Vec<LogRecord>),
    Traces(Vec<TraceSpan>),
    Alerts(Vec<Alert>),
    Tickets(Vec<Ticket>),
}

impl Records {
    pub fn len(&self) -> usize {
        match self {
            Records::Metrics(v) => v.len(),
            Records::Logs(v) => v.len(),
            Records::Traces(v) => v.len(),
            Records::Alerts(v) => v.len(),
            Records::Tickets(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Parses JSON-lines text. Blank lines are skipped; line numbers in errors
/// are 1-based.
pub fn parse_stream<T: Record>(reader: impl BufRead) -> Result<Vec<T>> {
    let mut out = Vec::new();
    let mut state = T::StreamState::default();
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line.map_err(|e| Error::Malformed {
            line: line_no,
            message: e.to_string(),
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let record: T = serde_json::from_str(&line).map_err(|e| Error::Malformed {
            line: line_no,
            message: e.to_string(),
        })?;
        record
            .validate()
            .and_then(|_| record.validate_in_stream(&mut state))
            .map_err(|e| Error::Validation {
                line: line_no,
                field: e.field,
                message: e.message,
            })?;
        out.push(record);
    }
    Ok(out)
}

pub fn load_stream<T: Record>(path: impl AsRef<Path>) -> Result<Vec<T>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    parse_stream(BufReader::new(file))
}

pub fn load_records(path: impl AsRef<Path>, kind: RecordKind) -> Result<Records> {
    Ok(match kind {
        RecordKind::Metrics => Records::Metrics(load_stream(path)?),
        RecordKind::Logs => Records::Logs(load_stream(path)?),
        RecordKind::Traces => Records::Traces(load_stream(path)?),
        RecordKind::Alerts => Records::Alerts(load_stream(path)?),
        RecordKind::Tickets => Records::Tickets(load_stream(path)?),
    })
}

pub fn write_jsonl<T: Serialize>(mut writer: impl Write, records: &[T]) -> Result<()> {
    for record in records {
        serde_json::to_writer(&mut writer, record)?;
        writer.write_all(b"\n").map_err(|e| Error::io("<writer>", e))?;
    }
    Ok(())
}

pub fn store_stream<T: Serialize>(path: impl AsRef<Path>, records: &[T]) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut writer = BufWriter::new(file);
    write_jsonl(&mut writer, records)?;
    writer.flush().map_err(|e| Error::io(path, e))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WindowStats {
    pub start_ts: i64,
    pub mean: f64,
    pub max: f64,
    pub count: usize,
}

/// Tiles the series into consecutive windows of `window_s` seconds. A
/// trailing partial window is kept with its true sample count.
pub fn window_metrics(series: &MetricSeries, window_s: u32) -> Result<Vec<WindowStats>> {
    let interval = series.interval_s;
    if interval == 0 {
        return Err(Error::param("interval_s", "must be positive"));
    }
    if window_s == 0 || !window_s.is_multiple_of(interval) {
        return Err(Error::param(
            "window_s",
            format!("{window_s} is not a positive multiple of the sampling interval {interval}"),
        ));
    }
    let per_window = (window_s / interval) as usize;
    Ok(series
        .values
        .chunks(per_window)
        .enumerate()
        .map(|(i, chunk)| WindowStats {
            start_ts: series.start_ts + (i * per_window) as i64 * i64::from(interval),
            mean: chunk.iter().sum::<f64>() / chunk.len() as f64,
            max: chunk.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            count: chunk.len(),
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn series(values: Vec<f64>) -> MetricSeries {
        MetricSeries::new("svc", "latency", 0, 60, values)
    }

    #[test]
    fn empty_input_loads_nothing() {
        let logs: Vec<LogRecord> = parse_stream("".as_bytes()).unwrap();
        assert!(logs.is_empty());
    }

    #[test]
    fn single_log_line_round_trips() {
        let line = r#"{"ts":10,"service_id":"nova","level":"INFO","message":"Listing instance in cell 949e1227","session_id":"s1"}"#;
        let logs: Vec<LogRecord> = parse_stream(line.as_bytes()).unwrap();
        assert_eq!(logs.len(), 1);
        assert_eq!(logs[0].ts, 10);
        assert_eq!(logs[0].service_id, "nova");
        assert_eq!(logs[0].level, LogLevel::Info);
        assert_eq!(logs[0].message, "Listing instance in cell 949e1227");
        assert_eq!(logs[0].session_id.as_deref(), Some("s1"));
        let back = serde_json::to_value(&logs[0]).unwrap();
        assert_eq!(back, serde_json::from_str::<Value>(line).unwrap());
    }

    #[test]
    fn negative_duration_names_field() {
        let line =
            r#"{"trace_id":"t","span_id":"s","caller":"a","callee":"b","start_ts":1.5,"duration_ms":-1,"status":"OK"}"#;
        let err = parse_stream::<TraceSpan>(line.as_bytes()).unwrap_err();
        match err {
            Error::Validation { line, field, .. } => {
                assert_eq!(line, 1);
                assert_eq!(field, "duration_ms");
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn malformed_line_carries_line_number() {
        let text = "{\"alert_id\":\"a\",\"ts\":1,\"service_id\":\"s\",\"severity\":\"INFO\",\"text\":\"x\"}\n{oops\n";
        match parse_stream::<Alert>(text.as_bytes()).unwrap_err() {
            Error::Malformed { line, .. } => assert_eq!(line, 2),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn out_of_order_logs_rejected() {
        let text = concat!(
            r#"{"ts":10,"service_id":"a","level":"INFO","message":"x"}"#,
            "\n",
            r#"{"ts":9,"service_id":"a","level":"INFO","message":"y"}"#,
        );
        match parse_stream::<LogRecord>(text.as_bytes()).unwrap_err() {
            Error::Validation { line, field, .. } => assert_eq!((line, field), (2, "ts")),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn duplicate_span_and_ticket_ids_rejected() {
        let span =
            r#"{"trace_id":"t","span_id":"s","caller":"a","callee":"b","start_ts":1.0,"duration_ms":1,"status":"OK"}"#;
        let text = format!("{span}\n{span}\n");
        assert!(matches!(
            parse_stream::<TraceSpan>(text.as_bytes()),
            Err(Error::Validation { field: "span_id", .. })
        ));
        let ticket = r#"{"ticket_id":"k","ts":1,"product":"vm","text":"down","customer_id":"c"}"#;
        let text = format!("{ticket}\n{ticket}\n");
        assert!(matches!(
            parse_stream::<Ticket>(text.as_bytes()),
            Err(Error::Validation { field: "ticket_id", .. })
        ));
    }

    #[test]
    fn self_call_and_non_finite_metric_rejected() {
        let span =
            r#"{"trace_id":"t","span_id":"s","caller":"a","callee":"a","start_ts":1.0,"duration_ms":1,"status":"OK"}"#;
        assert!(matches!(
            parse_stream::<TraceSpan>(span.as_bytes()),
            Err(Error::Validation { field: "callee", .. })
        ));
        let metric = r#"{"service_id":"a","metric_name":"m","start_ts":0,"interval_s":0,"values":[1.0]}"#;
        assert!(matches!(
            parse_stream::<MetricSeries>(metric.as_bytes()),
            Err(Error::Validation {
                field: "interval_s",
                ..
            })
        ));
    }

    #[test]
    fn unknown_fields_are_preserved() {
        let line = r#"{"ticket_id":"k","ts":1,"product":"vm","text":"down","customer_id":"c","region":"eu"}"#;
        let tickets: Vec<Ticket> = parse_stream(line.as_bytes()).unwrap();
        assert_eq!(tickets[0].extra.get("region"), Some(&Value::from("eu")));
        let mut out = Vec::new();
        write_jsonl(&mut out, &tickets).unwrap();
        let back: Value = serde_json::from_slice(&out).unwrap();
        assert_eq!(back, serde_json::from_str::<Value>(line).unwrap());
    }

    #[test]
    fn constant_series_two_full_windows() {
        let w = window_metrics(&series(vec![1.0; 4]), 120).unwrap();
        assert_eq!(w.len(), 2);
        assert!(w.iter().all(|s| s.mean == 1.0 && s.count == 2));
        assert_eq!(w[1].start_ts, 120);
    }

    #[test]
    fn window_mean_and_max() {
        let w = window_metrics(&series(vec![0.0, 2.0]), 120).unwrap();
        assert_eq!(w.len(), 1);
        assert_eq!(w[0].mean, 1.0);
        assert_eq!(w[0].max, 2.0);
    }

    #[test]
    fn partial_trailing_window_keeps_true_count() {
        // Hand tiling: [0,120) holds the single sample at t=0.
        let w = window_metrics(&series(vec![5.0]), 120).unwrap();
        assert_eq!(
            w,
            vec![WindowStats {
                start_ts: 0,
                mean: 5.0,
                max: 5.0,
                count: 1
            }]
        );
        // Five samples at 60 s in 180 s windows: counts 3 then 2.
        let w = window_metrics(&series(vec![1.0, 2.0, 3.0, 4.0, 6.0]), 180).unwrap();
        assert_eq!(w.iter().map(|s| s.count).collect::<Vec<_>>(), vec![3, 2]);
        assert_eq!(w[1].start_ts, 180);
        assert_eq!(w[1].mean, 5.0);
    }

    #[test]
    fn window_not_multiple_of_interval_rejected() {
        assert!(window_metrics(&series(vec![1.0; 4]), 90).is_err());
        assert!(window_metrics(&series(vec![1.0; 4]), 0).is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn window_counts_cover_every_sample(
                values in prop::collection::vec(-1e6f64..1e6, 1..200),
                interval in 1u32..120,
                per in 1u32..20,
            ) {
                let s = MetricSeries::new("s", "m", 1000, interval, values.clone());
                let w = window_metrics(&s, interval * per).unwrap();
                prop_assert_eq!(w.iter().map(|x| x.count).sum::<usize>(), values.len());
            }

            #[test]
            fn metric_series_round_trip(
                values in prop::collection::vec(-1e9f64..1e9, 1..50),
                start in -1_000_000i64..1_000_000,
                interval in 1u32..3600,
            ) {
                let s = vec![MetricSeries::new("svc", "cpu", start, interval, values)];
                let mut buf = Vec::new();
                write_jsonl(&mut buf, &s).unwrap();
                let back: Vec<MetricSeries> = parse_stream(buf.as_slice()).unwrap();
                prop_assert_eq!(back, s);
            }
        }
    }
}
