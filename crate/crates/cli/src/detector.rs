//! Detector spec strings: `kind[:key=value,...]`.
//!
//! | kind    | keys |
//! |---------|------|
//! | `exact` | `budget` |
//! | `mmse`  | none |
//! | `ec-sl` | `beta`, `iters`, `floor`, `floor_initial`, `floor_start`, `floor_decay`, `tol`, `skip`, `cavity` (`damped`/`undamped`) |
//! | `ec-dl` | `beta`, `iters`, `inner_steps`, `step`, `growth`, `grad_tol`, `tol` |
//!
//! Every kind also accepts `name`, the label used in output tables. Without
//! it the label is the spec string itself. Unset keys keep the defaults:
//! [`EcConfig::recommended`] for `ec-sl`, [`EcConfig::double_loop`] for
//! `ec-dl`.

use std::fmt;
use std::str::FromStr;

use ecmimo::{CavityReading, Detector, EcConfig64, EcDoubleLoop, EcSingleLoop, ExactDetector, MmseDetector, DEFAULT_ENUMERATION_BUDGET};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq)]
pub enum DetectorKind {
    Exact { budget: u64 },
    Mmse,
    SingleLoop(EcConfig64),
    DoubleLoop(EcConfig64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct DetectorSpec {
    text: String,
    name: Option<String>,
    pub kind: DetectorKind,
}

impl DetectorSpec {
    pub fn label(&self) -> &str {
        self.name.as_deref().unwrap_or(&self.text)
    }

    pub fn is_ec(&self) -> bool {
        matches!(self.kind, DetectorKind::SingleLoop(_) | DetectorKind::DoubleLoop(_))
    }

    /// `M^m` limit for the exact detector.
    pub fn budget(&self) -> Option<u64> {
        match self.kind {
            DetectorKind::Exact { budget } => Some(budget),
            _ => None,
        }
    }

    /// Builds the detector, optionally forcing energy recording.
    pub fn build(&self, record_energy: bool) -> Box<dyn Detector<f64>> {
        let label = self.label().to_string();
        match &self.kind {
            DetectorKind::Exact { budget } => Box::new(ExactDetector { budget: *budget, ..ExactDetector::default() }),
            DetectorKind::Mmse => Box::new(MmseDetector::default()),
            DetectorKind::SingleLoop(cfg) => {
                Box::new(EcSingleLoop { config: EcConfig64 { record_energy, ..cfg.clone() }, name: label })
            }
            DetectorKind::DoubleLoop(cfg) => {
                Box::new(EcDoubleLoop { config: EcConfig64 { record_energy, ..cfg.clone() }, name: label })
            }
        }
    }
}

impl fmt::Display for DetectorSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.text)
    }
}

impl From<DetectorSpec> for String {
    fn from(d: DetectorSpec) -> String {
        d.text
    }
}

impl TryFrom<String> for DetectorSpec {
    type Error = CliError;
    fn try_from(s: String) -> Result<Self, CliError> {
        s.parse()
    }
}

impl FromStr for DetectorSpec {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self, CliError> {
        let text = s.trim().to_string();
        let err = |reason: String| CliError::Detector { spec: text.clone(), reason };
        let (kind, opts) = match text.split_once(':') {
            Some((k, o)) => (k.trim(), o),
            None => (text.as_str(), ""),
        };
        let mut pairs = Vec::new();
        for part in opts.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let (k, v) = part.split_once('=').ok_or_else(|| err(format!("option `{part}` is not key=value")))?;
            pairs.push((k.trim(), v.trim()));
        }

        let mut name = None;
        let mut kind = match kind {
            "exact" => DetectorKind::Exact { budget: DEFAULT_ENUMERATION_BUDGET },
            "mmse" => DetectorKind::Mmse,
            "ec-sl" => DetectorKind::SingleLoop(EcConfig64::recommended()),
            "ec-dl" => DetectorKind::DoubleLoop(EcConfig64::double_loop()),
            other => return Err(err(format!("unknown detector `{other}` (expected exact, mmse, ec-sl or ec-dl)"))),
        };
        for (k, v) in pairs {
            let bad = |what: &str| err(format!("`{k}` expects {what}, got `{v}`"));
            let real = || v.parse::<f64>().map_err(|_| bad("a number"));
            let count = || v.parse::<usize>().map_err(|_| bad("a non-negative integer"));
            let flag = || v.parse::<bool>().map_err(|_| bad("true or false"));
            if k == "name" {
                name = Some(v.to_string());
                continue;
            }
            match &mut kind {
                DetectorKind::Exact { budget } if k == "budget" => *budget = v.parse().map_err(|_| bad("a non-negative integer"))?,
                DetectorKind::SingleLoop(c) | DetectorKind::DoubleLoop(c) if matches!(k, "beta" | "iters" | "tol") => match k {
                    "beta" => c.beta = real()?,
                    "iters" => c.max_iters = count()?,
                    _ => c.convergence_tol = real()?,
                },
                DetectorKind::SingleLoop(c) => match k {
                    "floor" => c.variance_floor_enabled = flag()?,
                    "floor_initial" => c.floor_initial = real()?,
                    "floor_start" => c.floor_start_iter = count()?,
                    "floor_decay" => c.floor_decay = real()?,
                    "skip" => c.skip_negative_precision = flag()?,
                    "cavity" => {
                        c.cavity = match v {
                            "damped" => CavityReading::DampedPrevious,
                            "undamped" => CavityReading::UndampedProposal,
                            _ => return Err(bad("damped or undamped")),
                        }
                    }
                    _ => return Err(err(format!("unknown option `{k}` for ec-sl"))),
                },
                DetectorKind::DoubleLoop(c) => match k {
                    "inner_steps" => c.dl_inner_steps = count()?,
                    "step" => c.dl_step_size = real()?,
                    "growth" => c.dl_step_growth = real()?,
                    "grad_tol" => c.dl_grad_tol = real()?,
                    _ => return Err(err(format!("unknown option `{k}` for ec-dl"))),
                },
                _ => return Err(err(format!("unknown option `{k}`"))),
            }
        }
        if let DetectorKind::SingleLoop(c) | DetectorKind::DoubleLoop(c) = &kind {
            if !(c.beta > 0.0 && c.beta <= 1.0) {
                return Err(err(format!("beta must lie in (0, 1], got {}", c.beta)));
            }
            if c.max_iters == 0 {
                return Err(err("iters must be at least 1".into()));
            }
        }
        Ok(Self { text, name, kind })
    }
}
