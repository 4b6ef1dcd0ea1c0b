//! Sampled state trajectories and their CSV form.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    times: Vec<f64>,
    states: Vec<Vec<f64>>,
    /// Set when integration stopped at the blow-up guard.
    pub diverged: bool,
}

impl Trajectory {
    pub fn new(times: Vec<f64>, states: Vec<Vec<f64>>) -> Result<Self> {
        check_dim(times.len(), states.len())?;
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidArgument(
                "trajectory times must be strictly increasing".into(),
            ));
        }
        if let Some(first) = states.first() {
            for s in &states {
                check_dim(first.len(), s.len())?;
            }
        }
        Ok(Self {
            times,
            states,
            diverged: false,
        })
    }

    pub(crate) fn from_parts(times: Vec<f64>, states: Vec<Vec<f64>>, diverged: bool) -> Self {
        Self {
            times,
            states,
            diverged,
        }
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn states(&self) -> &[Vec<f64>] {
        &self.states
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.states.first().map_or(0, Vec::len)
    }

    pub fn last_state(&self) -> Option<&[f64]> {
        self.states.last().map(Vec::as_slice)
    }

    /// CSV with header `t,x1,...,xn`; every `stride`-th row plus the last.
    pub fn to_csv(&self, stride: usize) -> String {
        let stride = stride.max(1);
        let mut out = String::from("t");
        for k in 1..=self.dim() {
            let _ = write!(out, ",x{k}");
        }
        out.push('\n');
        let last = self.len().saturating_sub(1);
        for (i, (t, x)) in self.times.iter().zip(&self.states).enumerate() {
            if i % stride != 0 && i != last {
                continue;
            }
            let _ = write!(out, "{}", fmt_sig(*t));
            for v in x {
                let _ = write!(out, ",{}", fmt_sig(*v));
            }
            out.push('\n');
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::InvalidArgument("empty CSV".into()))?;
        let cols: Vec<&str> = header.split(',').collect();
        if cols.first() != Some(&"t") {
            return Err(Error::InvalidArgument(
                "CSV header must start with `t`".into(),
            ));
        }
        let mut times = Vec::new();
        let mut states = Vec::new();
        for (row, line) in lines.enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let vals: std::result::Result<Vec<f64>, _> =
                line.split(',').map(|s| s.trim().parse::<f64>()).collect();
            let vals =
                vals.map_err(|e| Error::InvalidArgument(format!("CSV row {}: {e}", row + 2)))?;
            check_dim(cols.len(), vals.len())?;
            times.push(vals[0]);
            states.push(vals[1..].to_vec());
        }
        Self::new(times, states)
    }
}

/// Formats with 12 significant digits.
pub fn fmt_sig(v: f64) -> String {
    if v == 0.0 || !v.is_finite() {
        return format!("{v}");
    }
    let s = format!("{v:.11e}");
    let parsed: f64 = s.parse().unwrap_or(v);
    let a = parsed.abs();
    if !(1e-5..1e15).contains(&a) {
        format!("{parsed:e}")
    } else {
        format!("{parsed}")
    }
}
