//! Time-series panels and the lag-stacked design used by the estimator.
//!
//! A panel holds `p` series observed at `T` periods, in level, with the risk
//! parameter in row 0. [`build_design`] turns it into the response matrix
//! `X` (columns `t = 2..T`) and the stacked predictor matrix
//! `Z = (X_t', X_{t-1}')'`.

use std::collections::HashSet;
use std::io::{Read, Write};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Role {
    RiskParameter,
    Macro,
}

/// Transform already applied to a series.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Transform {
    None,
    Logit,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VariableMeta {
    pub name: String,
    pub role: Role,
    pub transform: Transform,
}

impl VariableMeta {
    pub fn risk(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            role: Role::RiskParameter,
            transform: Transform::None,
        }
    }

    pub fn macro_var(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            role: Role::Macro,
            transform: Transform::None,
        }
    }
}

/// `p × T` observations, one row per variable, risk parameter first.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeriesPanel {
    variables: Vec<VariableMeta>,
    values: DMatrix<f64>,
    period_labels: Vec<String>,
}

impl TimeSeriesPanel {
    pub fn new(
        variables: Vec<VariableMeta>,
        values: DMatrix<f64>,
        period_labels: Vec<String>,
    ) -> Result<Self> {
        let p = variables.len();
        if p < 2 {
            return Err(Error::InvalidPanel(format!(
                "at least 2 variables required (risk parameter plus one macro), got {p}"
            )));
        }
        if values.nrows() != p {
            return Err(Error::DimensionMismatch(format!(
                "{} variables but {} value rows",
                p,
                values.nrows()
            )));
        }
        let t = values.ncols();
        if t < 3 {
            return Err(Error::InvalidPanel(format!(
                "at least 3 periods required, got {t}"
            )));
        }
        if period_labels.len() != t {
            return Err(Error::DimensionMismatch(format!(
                "{} period labels for {} periods",
                period_labels.len(),
                t
            )));
        }
        let mut seen = HashSet::new();
        for v in &variables {
            if v.name.is_empty() {
                return Err(Error::InvalidPanel("empty variable name".into()));
            }
            if !seen.insert(v.name.as_str()) {
                return Err(Error::InvalidPanel(format!(
                    "duplicate variable name '{}'",
                    v.name
                )));
            }
            if v.transform == Transform::Logit && v.role != Role::RiskParameter {
                return Err(Error::InvalidPanel(format!(
                    "logit transform is only allowed on the risk parameter, not '{}'",
                    v.name
                )));
            }
        }
        if variables[0].role != Role::RiskParameter {
            return Err(Error::InvalidPanel(
                "the risk parameter must occupy index 0".into(),
            ));
        }
        if variables[1..].iter().any(|v| v.role == Role::RiskParameter) {
            return Err(Error::InvalidPanel(
                "exactly one risk parameter is allowed".into(),
            ));
        }
        for i in 0..p {
            for k in 0..t {
                if !values[(i, k)].is_finite() {
                    return Err(Error::NonFinite(format!(
                        "variable '{}' at period '{}'",
                        variables[i].name, period_labels[k]
                    )));
                }
            }
        }
        Ok(Self {
            variables,
            values,
            period_labels,
        })
    }

    pub fn p(&self) -> usize {
        self.variables.len()
    }

    pub fn t(&self) -> usize {
        self.values.ncols()
    }

    pub fn variables(&self) -> &[VariableMeta] {
        &self.variables
    }

    pub fn names(&self) -> Vec<String> {
        self.variables.iter().map(|v| v.name.clone()).collect()
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn period_labels(&self) -> &[String] {
        &self.period_labels
    }

    /// Returns a copy with one row replaced. Used for rescaling experiments.
    pub fn with_row(&self, row: usize, data: &[f64]) -> Result<Self> {
        if row >= self.p() || data.len() != self.t() {
            return Err(Error::DimensionMismatch(format!(
                "row {row} with {} values for a {}x{} panel",
                data.len(),
                self.p(),
                self.t()
            )));
        }
        let mut values = self.values.clone();
        for (k, v) in data.iter().enumerate() {
            values[(row, k)] = *v;
        }
        Self::new(self.variables.clone(), values, self.period_labels.clone())
    }

    /// Writes the panel in the ingestion format (label column, then variables).
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["period".to_string()];
        header.extend(self.names());
        w.write_record(&header)?;
        for k in 0..self.t() {
            let mut rec = vec![self.period_labels[k].clone()];
            rec.extend((0..self.p()).map(|i| format!("{}", self.values[(i, k)])));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Reads a CSV panel. The first column holds period labels; the column named
/// `risk_variable` is moved to index 0 and the rest keep file order.
pub fn load_csv<R: Read>(source: R, risk_variable: &str) -> Result<TimeSeriesPanel> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(false)
        .from_reader(source);
    let header: Vec<String> = reader
        .headers()?
        .iter()
        .map(|s| s.trim().to_string())
        .collect();
    if header.len() < 2 {
        return Err(Error::InvalidPanel(
            "header must contain a period column and at least one variable".into(),
        ));
    }
    let columns = &header[1..];
    let mut seen = HashSet::new();
    for c in columns {
        if !seen.insert(c.as_str()) {
            return Err(Error::InvalidPanel(format!("duplicate column name '{c}'")));
        }
    }
    let risk_col = columns
        .iter()
        .position(|c| c == risk_variable)
        .ok_or_else(|| {
            Error::InvalidPanel(format!("risk variable column '{risk_variable}' not found"))
        })?;
    if columns.len() < 2 {
        return Err(Error::InvalidPanel(
            "at least one macro variable is required besides the risk parameter".into(),
        ));
    }

    let mut labels = Vec::new();
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (r, record) in reader.records().enumerate() {
        // csv reports ragged rows as UnequalLengths
        let record = record?;
        let line = r + 2;
        labels.push(record.get(0).unwrap_or_default().trim().to_string());
        let mut parsed = Vec::with_capacity(columns.len());
        for (c, name) in columns.iter().enumerate() {
            let raw = record.get(c + 1).unwrap_or_default().trim();
            let v: f64 = raw.parse().map_err(|_| Error::Parse {
                row: line,
                column: name.clone(),
                value: raw.to_string(),
            })?;
            if !v.is_finite() {
                return Err(Error::Parse {
                    row: line,
                    column: name.clone(),
                    value: raw.to_string(),
                });
            }
            parsed.push(v);
        }
        rows.push(parsed);
    }
    if rows.len() < 3 {
        return Err(Error::InvalidPanel(format!(
            "at least 3 data rows required, got {}",
            rows.len()
        )));
    }

    let mut order = vec![risk_col];
    order.extend((0..columns.len()).filter(|&c| c != risk_col));
    let variables = order
        .iter()
        .enumerate()
        .map(|(i, &c)| {
            if i == 0 {
                VariableMeta::risk(columns[c].clone())
            } else {
                VariableMeta::macro_var(columns[c].clone())
            }
        })
        .collect();
    let t = rows.len();
    let values = DMatrix::from_fn(order.len(), t, |i, k| rows[k][order[i]]);
    TimeSeriesPanel::new(variables, values, labels)
}

pub fn logit(v: f64) -> f64 {
    (v / (1.0 - v)).ln()
}

pub fn inverse_logit(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Replaces the risk-parameter row by its log-odds.
pub fn apply_logit(panel: &TimeSeriesPanel) -> Result<TimeSeriesPanel> {
    if panel.variables[0].transform == Transform::Logit {
        return Err(Error::InvalidPanel(
            "logit transform already applied to the risk parameter".into(),
        ));
    }
    let mut values = panel.values.clone();
    for k in 0..panel.t() {
        let v = values[(0, k)];
        if !(v > 0.0 && v < 1.0) {
            return Err(Error::LogitDomain {
                period: panel.period_labels[k].clone(),
                value: v,
            });
        }
        values[(0, k)] = logit(v);
    }
    let mut variables = panel.variables.clone();
    variables[0].transform = Transform::Logit;
    TimeSeriesPanel::new(variables, values, panel.period_labels.clone())
}

/// Undoes [`apply_logit`] on the risk-parameter row.
pub fn invert_logit(panel: &TimeSeriesPanel) -> Result<TimeSeriesPanel> {
    if panel.variables[0].transform != Transform::Logit {
        return Err(Error::InvalidPanel(
            "risk parameter is not logit-transformed".into(),
        ));
    }
    let mut values = panel.values.clone();
    for k in 0..panel.t() {
        values[(0, k)] = inverse_logit(values[(0, k)]);
    }
    let mut variables = panel.variables.clone();
    variables[0].transform = Transform::None;
    TimeSeriesPanel::new(variables, values, panel.period_labels.clone())
}

#[derive(Debug, Clone)]
pub struct Standardized {
    pub panel: TimeSeriesPanel,
    pub means: Vec<f64>,
    pub sds: Vec<f64>,
}

/// Sample mean and standard deviation (denominator `n - 1`).
pub(crate) fn mean_sd<I>(values: I) -> (f64, f64)
where
    I: Iterator<Item = f64> + Clone,
{
    let n = values.clone().count();
    let mean = values.clone().sum::<f64>() / n as f64;
    if n < 2 {
        return (mean, 0.0);
    }
    let ss: f64 = values.map(|v| (v - mean) * (v - mean)).sum();
    (mean, (ss / (n - 1) as f64).sqrt())
}

/// Centers every row and scales it to unit sample sd. Constant rows become
/// all zeros and report sd 0.
pub fn standardize(panel: &TimeSeriesPanel) -> Standardized {
    let (p, t) = (panel.p(), panel.t());
    let mut values = panel.values.clone();
    let mut means = Vec::with_capacity(p);
    let mut sds = Vec::with_capacity(p);
    for i in 0..p {
        let (mean, mut sd) = mean_sd(panel.values.row(i).iter().copied());
        // rows that are constant up to rounding are treated as constant
        if sd <= f64::EPSILON * mean.abs().max(1.0) * 8.0 {
            sd = 0.0;
        }
        for k in 0..t {
            values[(i, k)] = if sd > 0.0 {
                (panel.values[(i, k)] - mean) / sd
            } else {
                0.0
            };
        }
        means.push(mean);
        sds.push(sd);
    }
    let panel = TimeSeriesPanel {
        variables: panel.variables.clone(),
        values,
        period_labels: panel.period_labels.clone(),
    };
    Standardized { panel, means, sds }
}

/// Responses `X` (`p × Te`) and stacked predictors `Z` (`2p × Te`).
#[derive(Debug, Clone, PartialEq)]
pub struct DesignMatrices {
    pub x: DMatrix<f64>,
    pub z: DMatrix<f64>,
    pub te: usize,
    pub column_means: DVector<f64>,
    pub column_sds: DVector<f64>,
    pub response_means: DVector<f64>,
}

impl DesignMatrices {
    /// Builds a design from explicit response and predictor matrices.
    pub fn from_parts(x: DMatrix<f64>, z: DMatrix<f64>) -> Result<Self> {
        let p = x.nrows();
        if z.nrows() != 2 * p || z.ncols() != x.ncols() {
            return Err(Error::DimensionMismatch(format!(
                "X is {}x{}, Z must be {}x{} but is {}x{}",
                p,
                x.ncols(),
                2 * p,
                x.ncols(),
                z.nrows(),
                z.ncols()
            )));
        }
        let te = x.ncols();
        if te < 2 {
            return Err(Error::InvalidPanel(format!(
                "at least 2 effective samples required, got {te}"
            )));
        }
        if x.iter().chain(z.iter()).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("design matrices".into()));
        }
        let mut column_means = DVector::zeros(2 * p);
        let mut column_sds = DVector::zeros(2 * p);
        for j in 0..2 * p {
            let (m, s) = mean_sd(z.row(j).iter().copied());
            column_means[j] = m;
            column_sds[j] = s;
        }
        let response_means = DVector::from_fn(p, |i, _| x.row(i).mean());
        Ok(Self {
            x,
            z,
            te,
            column_means,
            column_sds,
            response_means,
        })
    }

    pub fn p(&self) -> usize {
        self.x.nrows()
    }

    /// Restricts the design to the given sample columns and recomputes the
    /// centering and scaling statistics on them.
    pub fn select_columns(&self, columns: &[usize]) -> Result<Self> {
        if let Some(&bad) = columns.iter().find(|&&c| c >= self.te) {
            return Err(Error::DimensionMismatch(format!(
                "column {bad} out of range for Te = {}",
                self.te
            )));
        }
        Self::from_parts(self.x.select_columns(columns), self.z.select_columns(columns))
    }
}

/// Conditions on the first observation: `X` holds periods `2..T`, and
/// column `k` of `Z` stacks period `k + 1` over period `k`.
pub fn build_design(panel: &TimeSeriesPanel) -> Result<DesignMatrices> {
    let (p, t) = (panel.p(), panel.t());
    if t < 3 {
        return Err(Error::InvalidPanel(format!(
            "at least 3 periods required, got {t}"
        )));
    }
    let te = t - 1;
    let x = panel.values.columns(1, te).into_owned();
    let z = DMatrix::from_fn(2 * p, te, |r, k| {
        if r < p {
            panel.values[(r, k + 1)]
        } else {
            panel.values[(r - p, k)]
        }
    });
    DesignMatrices::from_parts(x, z)
}
