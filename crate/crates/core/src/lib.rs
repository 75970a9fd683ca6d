//! Reliability analytics for microservice systems: KPI anomaly detection
//! by pattern sketching, semantic log parsing and log anomaly detection,
//! incident-aware ticket aggregation, dependency-intensity estimation,
//! root-cause localization and resilience testing, all checked against a
//! deterministic telemetry simulator.
// Negated float comparisons are used on purpose so NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod benchmark;
pub mod depgraph;
pub mod error;
pub mod eval;
pub mod incident;
pub mod logdetect;
pub mod logparse;
pub mod pipeline;
pub mod rca;
pub mod resilience;
pub mod simulator;
pub mod sketch;
pub mod telemetry;

pub use error::{Error, Result};
