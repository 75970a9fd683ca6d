//! Synthetic periodic KPI series with labeled anomaly segments.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::engine::mix;
use crate::telemetry::MetricSeries;

/// Samples per seasonal cycle.
pub const KPI_PERIOD: usize = 24;
const MIN_SEGMENT: usize = 50;
const MAX_SEGMENT: usize = 150;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KpiSeries {
    pub series: MetricSeries,
    /// Per-sample anomaly labels.
    pub labels: Vec<bool>,
}

#[derive(Debug, Clone, Copy)]
enum Kind {
    Jitter,
    Spikes,
    Flatline,
    LevelShift,
}

/// `n_series` sine-shaped KPIs of `len` samples with roughly
/// `anomaly_fraction` of the samples inside injected anomaly segments of
/// 50 to 150 samples (jitter bursts, spike trains, flatlines and level
/// shifts). The first and last period are always normal.
pub fn kpi_suite(seed: u64, n_series: usize, len: usize, anomaly_fraction: f64) -> Vec<KpiSeries> {
    (0..n_series)
        .map(|i| one_series(mix(mix(seed, 0x6B91), i as u64), i, len, anomaly_fraction))
        .collect()
}

fn one_series(key: u64, idx: usize, len: usize, fraction: f64) -> KpiSeries {
    let mut rng = ChaCha8Rng::seed_from_u64(key);
    let level = rng.random_range(50.0..150.0);
    let amp = level * rng.random_range(0.2..0.5);
    let phase = rng.random_range(0.0..std::f64::consts::TAU);
    let noise = Normal::new(0.0, 0.02 * amp).expect("positive sd");
    let omega = std::f64::consts::TAU / KPI_PERIOD as f64;
    let mut values: Vec<f64> = (0..len)
        .map(|t| level + amp * (omega * t as f64 + phase).sin() + noise.sample(&mut rng))
        .collect();
    let mut labels = vec![false; len];

    let target = (fraction * len as f64).round() as usize;
    let margin = KPI_PERIOD.max(MAX_SEGMENT / 2);
    let mut placed = 0;
    let mut tries = 0;
    while placed < target && tries < 1000 && len > 2 * margin + MIN_SEGMENT {
        tries += 1;
        let seg = rng
            .random_range(MIN_SEGMENT..=MAX_SEGMENT)
            .min(target - placed)
            .max(MIN_SEGMENT);
        let start = rng.random_range(margin..len - margin - seg);
        // Keep a normal gap of several periods between segments.
        let gap = 4 * KPI_PERIOD;
        let lo = start.saturating_sub(gap);
        let hi = (start + seg + gap).min(len);
        if labels[lo..hi].iter().any(|&l| l) {
            continue;
        }
        let kind = match rng.random_range(0..4) {
            0 => Kind::Jitter,
            1 => Kind::Spikes,
            2 => Kind::Flatline,
            _ => Kind::LevelShift,
        };
        match kind {
            Kind::Jitter => {
                let burst = Normal::new(0.0, 0.6 * amp).expect("positive sd");
                for v in &mut values[start..start + seg] {
                    *v += burst.sample(&mut rng);
                }
            }
            Kind::Spikes => {
                for v in values[start..start + seg].iter_mut().step_by(5) {
                    *v += amp * rng.random_range(1.5..3.0);
                }
            }
            Kind::Flatline => {
                let flat = values[start];
                for v in &mut values[start..start + seg] {
                    *v = flat;
                }
            }
            Kind::LevelShift => {
                let shift = amp * rng.random_range(1.5..2.5);
                for v in &mut values[start..start + seg] {
                    *v += shift;
                }
            }
        }
        for l in &mut labels[start..start + seg] {
            *l = true;
        }
        placed += seg;
    }

    KpiSeries {
        series: MetricSeries::new(format!("kpi-{idx}"), "value", 1_700_000_000, 60, values),
        labels,
    }
}

/// A KPI whose regime changes for good at `shift_at`: the level rises and
/// the seasonal shape turns from a sine into a sawtooth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriftSeries {
    pub series: MetricSeries,
    pub shift_at: usize,
}

pub fn drift_series(seed: u64, pre_len: usize, post_len: usize) -> DriftSeries {
    let mut rng = ChaCha8Rng::seed_from_u64(mix(seed, 0xD41F));
    let level = rng.random_range(50.0..150.0);
    let amp = level * rng.random_range(0.2..0.5);
    let shift = amp * rng.random_range(1.5..2.5);
    let phase = rng.random_range(0..KPI_PERIOD);
    let noise = Normal::new(0.0, 0.02 * amp).expect("positive sd");
    let omega = std::f64::consts::TAU / KPI_PERIOD as f64;
    let mut values = Vec::with_capacity(pre_len + post_len);
    for t in 0..pre_len {
        values.push(level + amp * (omega * (t + phase) as f64).sin() + noise.sample(&mut rng));
    }
    for t in 0..post_len {
        let saw = 2.0 * ((t + phase) % KPI_PERIOD) as f64 / KPI_PERIOD as f64 - 1.0;
        values.push(level + shift + amp * saw + noise.sample(&mut rng));
    }
    DriftSeries {
        series: MetricSeries::new(format!("drift-{seed}"), "value", 1_700_000_000, 60, values),
        shift_at: pre_len,
    }
}
