//! Causal moving-average smoothing of joint-coordinate signals.
//!
//! All four filters are convex combinations of past samples (or past
//! outputs), so a constant signal passes through unchanged and outputs stay
//! inside the input range. Window sums are evaluated relative to the current
//! sample, which keeps the constant-signal case exact in floating point.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::skeleton::{sequence_to_signals, signals_to_sequence, JointSignal, PoseSequence3D};

pub const DEFAULT_WINDOW: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FilterKind {
    Sma,
    Ema,
    Wma,
    Mma,
}

impl FilterKind {
    pub const ALL: [FilterKind; 4] = [
        FilterKind::Sma,
        FilterKind::Ema,
        FilterKind::Wma,
        FilterKind::Mma,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            FilterKind::Sma => "sma",
            FilterKind::Ema => "ema",
            FilterKind::Wma => "wma",
            FilterKind::Mma => "mma",
        }
    }
}

impl fmt::Display for FilterKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FilterKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "sma" => Ok(FilterKind::Sma),
            "ema" => Ok(FilterKind::Ema),
            "wma" => Ok(FilterKind::Wma),
            "mma" => Ok(FilterKind::Mma),
            other => Err(Error::Config(format!(
                "unknown filter '{other}' (expected sma, ema, wma or mma)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "RawFilterSpec")]
pub struct FilterSpec {
    pub kind: FilterKind,
    pub window: usize,
}

#[derive(Deserialize)]
struct RawFilterSpec {
    kind: FilterKind,
    window: usize,
}

impl TryFrom<RawFilterSpec> for FilterSpec {
    type Error = Error;

    fn try_from(raw: RawFilterSpec) -> Result<Self> {
        FilterSpec::new(raw.kind, raw.window)
    }
}

impl FilterSpec {
    pub fn new(kind: FilterKind, window: usize) -> Result<Self> {
        if window == 0 {
            return Err(Error::Config(format!("{kind} window must be at least 1")));
        }
        Ok(FilterSpec { kind, window })
    }

    /// Smoothing factor of the recursive filters (EMA, MMA); `None` for the
    /// windowed ones.
    pub fn alpha(&self) -> Option<f64> {
        match self.kind {
            FilterKind::Ema => Some(2.0 / (self.window as f64 + 1.0)),
            FilterKind::Mma => Some(1.0 / self.window as f64),
            FilterKind::Sma | FilterKind::Wma => None,
        }
    }

    /// Stable label used for output directories and table columns, e.g. `mma_w5`.
    pub fn label(&self) -> String {
        format!("{}_w{}", self.kind, self.window)
    }
}

impl fmt::Display for FilterSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

/// Smooths a raw series. Output has the input's length.
pub fn smooth_values(values: &[f64], spec: FilterSpec) -> Vec<f64> {
    let w = spec.window;
    if w <= 1 || values.len() <= 1 {
        return values.to_vec();
    }
    match spec.kind {
        FilterKind::Sma => windowed(values, w, |_| 1.0, w as f64),
        FilterKind::Wma => windowed(
            values,
            w,
            |lag| (w - lag) as f64,
            (w * (w + 1)) as f64 / 2.0,
        ),
        FilterKind::Ema | FilterKind::Mma => {
            recursive(values, spec.alpha().expect("recursive filters have alpha"))
        }
    }
}

// The first `w` samples pass through; afterwards each output is the weighted
// mean of the window ending at t.
fn windowed(values: &[f64], w: usize, weight: impl Fn(usize) -> f64, total: f64) -> Vec<f64> {
    values
        .iter()
        .enumerate()
        .map(|(t, &current)| {
            if t < w {
                return current;
            }
            let offset: f64 = (1..w)
                .map(|lag| weight(lag) * (values[t - lag] - current))
                .sum();
            current + offset / total
        })
        .collect()
}

fn recursive(values: &[f64], alpha: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(values.len());
    let mut prev = values[0];
    out.push(prev);
    for &v in &values[1..] {
        prev += alpha * (v - prev);
        out.push(prev);
    }
    out
}

pub fn smooth_signal(signal: &JointSignal, spec: FilterSpec) -> JointSignal {
    JointSignal {
        values: smooth_values(&signal.values, spec),
        joint: signal.joint,
        axis: signal.axis,
    }
}

/// Smooths every joint coordinate of a sequence independently.
pub fn smooth_sequence(seq: &PoseSequence3D, spec: FilterSpec) -> PoseSequence3D {
    let smoothed: Vec<JointSignal> = sequence_to_signals(seq)
        .par_iter()
        .map(|s| smooth_signal(s, spec))
        .collect();
    signals_to_sequence(&smoothed, seq.topology().clone())
        .expect("smoothing preserves signal structure")
}
