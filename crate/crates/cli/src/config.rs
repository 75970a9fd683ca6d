//! The run configuration file. Every field is optional; a command-line flag
//! beats the file, and the file beats the built-in default.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use opsforge::benchmark::TicketParams;
use opsforge::depgraph::IntensityParams;
use opsforge::logdetect::{DEFAULT_EPSILON, DEFAULT_MARGIN};
use opsforge::logparse::{DEFAULT_DEPTH, DEFAULT_SIM_THRESHOLD};
use opsforge::pipeline::E2eConfig;
use opsforge::rca::RcaParams;
use opsforge::resilience::CampaignParams;
use opsforge::sketch::{AdaptParams, SketchParams};
use serde::Deserialize;

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Inputs {
    pub metrics: Option<PathBuf>,
    pub logs: Option<PathBuf>,
    pub parsed: Option<PathBuf>,
    pub traces: Option<PathBuf>,
    pub alerts: Option<PathBuf>,
    pub tickets: Option<PathBuf>,
    pub affinity: Option<PathBuf>,
    pub truth: Option<PathBuf>,
    pub lexicon: Option<PathBuf>,
    pub knowledge: Option<PathBuf>,
    pub patterns: Option<PathBuf>,
    pub model: Option<PathBuf>,
    pub labels: Option<PathBuf>,
    pub weights: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ParseParams {
    pub depth: usize,
    pub sim_threshold: f64,
}

impl Default for ParseParams {
    fn default() -> Self {
        ParseParams {
            depth: DEFAULT_DEPTH,
            sim_threshold: DEFAULT_SIM_THRESHOLD,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LogDetectParams {
    pub epsilon: f64,
    pub margin: f64,
}

impl Default for LogDetectParams {
    fn default() -> Self {
        LogDetectParams {
            epsilon: DEFAULT_EPSILON,
            margin: DEFAULT_MARGIN,
        }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub scenario: Option<PathBuf>,
    pub inputs: Inputs,
    pub sketch: SketchParams,
    pub adapt: AdaptParams,
    pub parse: ParseParams,
    pub logdetect: LogDetectParams,
    pub tickets: TicketParams,
    pub intensity: IntensityParams,
    pub rca: RcaParams,
    pub campaign: CampaignParams,
    pub e2e: E2eConfig,
}

impl RunConfig {
    /// Reads a config file. Relative paths inside it are taken relative to
    /// the file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        if !path.exists() {
            bail!("--config: {} does not exist", path.display());
        }
        let text = std::fs::read_to_string(path).with_context(|| format!("--config: reading {}", path.display()))?;
        let mut cfg: RunConfig =
            serde_json::from_str(&text).with_context(|| format!("--config: invalid config {}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new(""));
        cfg.rebase(base);
        Ok(cfg)
    }

    fn rebase(&mut self, base: &Path) {
        let fix = |p: &mut Option<PathBuf>| {
            if let Some(x) = p {
                if x.is_relative() {
                    *x = base.join(&*x);
                }
            }
        };
        fix(&mut self.out);
        fix(&mut self.scenario);
        let i = &mut self.inputs;
        for p in [
            &mut i.metrics,
            &mut i.logs,
            &mut i.parsed,
            &mut i.traces,
            &mut i.alerts,
            &mut i.tickets,
            &mut i.affinity,
            &mut i.truth,
            &mut i.lexicon,
            &mut i.knowledge,
            &mut i.patterns,
            &mut i.model,
            &mut i.labels,
            &mut i.weights,
        ] {
            fix(p);
        }
    }
}

/// The flag value, else the config value, checked to exist.
pub fn required_path(flag: &Option<PathBuf>, cfg: &Option<PathBuf>, name: &str) -> Result<PathBuf> {
    match optional_path(flag, cfg, name)? {
        Some(p) => Ok(p),
        None => bail!("missing --{name} (or `{}` in the config)", name.replace('-', "_")),
    }
}

pub fn optional_path(flag: &Option<PathBuf>, cfg: &Option<PathBuf>, name: &str) -> Result<Option<PathBuf>> {
    let Some(p) = flag.as_ref().or(cfg.as_ref()) else {
        return Ok(None);
    };
    if !p.exists() {
        bail!("--{name}: {} does not exist", p.display());
    }
    Ok(Some(p.clone()))
}

/// Overwrites `slot` when the flag was given.
pub fn set<T: Copy>(slot: &mut T, flag: Option<T>) {
    if let Some(v) = flag {
        *slot = v;
    }
}
