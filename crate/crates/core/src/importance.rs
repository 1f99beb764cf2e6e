//! Sensitivity scale of the risk parameter to each macro shock: the
//! penalized coefficients of the risk equation after every series has been
//! standardized.

use std::cmp::Ordering;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::graph::LAG_SUFFIX;
use crate::model::ConstraintMask;
use crate::panel::{build_design, standardize, TimeSeriesPanel};
use crate::solver::{self, FitReport, SolverConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Normalization {
    Raw,
    /// Largest absolute score is 1.
    UnitMax,
    /// Absolute scores sum to 1.
    UnitSum,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImportanceEntry {
    pub variable: String,
    pub lag: u8,
    pub score: f64,
}

impl ImportanceEntry {
    pub fn label(&self) -> String {
        if self.lag == 0 {
            self.variable.clone()
        } else {
            format!("{}{LAG_SUFFIX}", self.variable)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImportanceScale {
    /// Sorted by `|score|` descending, then name, then lag.
    pub entries: Vec<ImportanceEntry>,
    /// Normalization actually applied (falls back to `Raw` when all scores are 0).
    pub normalization: Normalization,
    pub requested: Normalization,
    /// True when every score is zero and no normalization could be applied.
    pub all_zero: bool,
}

impl ImportanceScale {
    pub fn score(&self, variable: &str, lag: u8) -> Option<f64> {
        self.entries
            .iter()
            .find(|e| e.variable == variable && e.lag == lag)
            .map(|e| e.score)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["variable", "lag", "score"])?;
        for e in &self.entries {
            w.write_record([e.variable.clone(), e.lag.to_string(), e.score.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

fn by_magnitude(a: &ImportanceEntry, b: &ImportanceEntry) -> Ordering {
    b.score
        .abs()
        .total_cmp(&a.score.abs())
        .then_with(|| a.variable.cmp(&b.variable))
        .then_with(|| a.lag.cmp(&b.lag))
}

/// Builds the scale from raw risk-row coefficients `(name, lag, value)`.
pub fn normalize_scores(raw: Vec<ImportanceEntry>, normalization: Normalization) -> ImportanceScale {
    let mut entries = raw;
    let max = entries.iter().map(|e| e.score.abs()).fold(0.0, f64::max);
    let sum: f64 = entries.iter().map(|e| e.score.abs()).sum();
    let all_zero = max == 0.0;
    let applied = if all_zero { Normalization::Raw } else { normalization };
    let divisor = match applied {
        Normalization::Raw => 1.0,
        Normalization::UnitMax => max,
        Normalization::UnitSum => sum,
    };
    if divisor != 1.0 {
        for e in &mut entries {
            e.score /= divisor;
        }
    }
    entries.sort_by(by_magnitude);
    ImportanceScale {
        entries,
        normalization: applied,
        requested: normalization,
        all_zero,
    }
}

/// Standardizes every series, fits the penalized model with `config`, and
/// scores each contemporaneous and lagged variable by its coefficient in the
/// risk-parameter equation. Frozen coordinates score exactly 0.
pub fn importance_scale(
    panel: &TimeSeriesPanel,
    mask: &ConstraintMask,
    config: &SolverConfig,
    normalization: Normalization,
) -> Result<(ImportanceScale, FitReport)> {
    let standardized = standardize(panel);
    let design = build_design(&standardized.panel)?;
    let (coeffs, report) = solver::fit(&design, mask, config)?;
    let names = panel.names();
    let p = panel.p();
    let mut raw = Vec::with_capacity(2 * p - 1);
    for j in 0..2 * p {
        // the risk parameter's own contemporaneous value is not a shock
        if j == 0 {
            continue;
        }
        let (var, lag) = if j < p { (j, 0) } else { (j - p, 1) };
        raw.push(ImportanceEntry {
            variable: names[var].clone(),
            lag,
            score: coeffs.theta(0, j),
        });
    }
    Ok((normalize_scores(raw, normalization), report))
}
