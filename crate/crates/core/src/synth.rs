//! Simulation of the structural model with a known sparse structure, and
//! scoring of recovered edges against it.

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{default_mask, CoefficientSet, ConstraintMask};
use crate::panel::{inverse_logit, TimeSeriesPanel, VariableMeta};

/// Variable names of the credit-risk case study; the risk parameter first.
pub const CASE_STUDY_NAMES: [&str; 14] = [
    "PD", "RTP", "GDP", "UNEMP", "OR", "CCI", "CEI", "ICI", "BI", "HP", "CPI", "SM", "FX", "HD",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub p: usize,
    pub t: usize,
    /// Fraction of the estimable macro-equation coordinates drawn nonzero.
    pub edge_density: f64,
    pub coef_low: f64,
    pub coef_high: f64,
    /// Per-variable innovation standard deviations (diagonal of D, square-rooted).
    pub noise_sd: Vec<f64>,
    pub intercept_range: (f64, f64),
    pub init_mean: Vec<f64>,
    pub init_sd: Vec<f64>,
    pub seed: u64,
    /// Draw contemporaneous (Ψ) edges; they always form a DAG.
    pub contemporaneous: bool,
    /// Inclusive range for the number of lagged macro drivers of the risk parameter.
    pub risk_parents: (usize, usize),
    pub max_retries: usize,
    /// Skip the stationarity rejection step.
    pub allow_unit_root: bool,
    pub names: Vec<String>,
    pub period_labels: Option<Vec<String>>,
}

impl SynthSpec {
    pub fn new(p: usize, t: usize, seed: u64) -> Self {
        let mut names = vec!["PD".to_string()];
        names.extend((1..p).map(|i| format!("X{i}")));
        Self {
            p,
            t,
            edge_density: 0.15,
            coef_low: 0.4,
            coef_high: 0.8,
            noise_sd: vec![0.05; p],
            intercept_range: (-0.1, 0.1),
            init_mean: vec![0.0; p],
            init_sd: vec![1.0; p],
            seed,
            contemporaneous: true,
            risk_parents: (2, 4),
            max_retries: 1000,
            allow_unit_root: false,
            names,
            period_labels: None,
        }
    }

    pub fn with_noise(mut self, sd: f64) -> Self {
        self.noise_sd = vec![sd; self.p];
        self
    }

    /// 14 variables over 24 quarters, 2009Q2 to 2015Q1.
    pub fn case_study(seed: u64) -> Self {
        let mut spec = Self::new(14, 24, seed);
        spec.names = CASE_STUDY_NAMES.iter().map(|s| s.to_string()).collect();
        spec.period_labels = Some(quarter_labels(2009, 2, 24));
        spec.edge_density = 0.08;
        spec.coef_low = 0.2;
        spec.coef_high = 0.6;
        spec.noise_sd = vec![0.3; 14];
        spec
    }

    fn validate(&self) -> Result<()> {
        let p = self.p;
        if p < 2 {
            return Err(Error::InvalidConfig(format!("synthetic p must be >= 2, got {p}")));
        }
        if self.t < 3 {
            return Err(Error::InvalidConfig(format!("synthetic T must be >= 3, got {}", self.t)));
        }
        if !(0.0..=1.0).contains(&self.edge_density) {
            return Err(Error::InvalidConfig("edge_density must lie in [0, 1]".into()));
        }
        if !(self.coef_low >= 0.0 && self.coef_low <= self.coef_high && self.coef_high.is_finite()) {
            return Err(Error::InvalidConfig("need 0 <= coef_low <= coef_high".into()));
        }
        if self.intercept_range.0 > self.intercept_range.1 {
            return Err(Error::InvalidConfig("intercept range is reversed".into()));
        }
        for (what, v) in [
            ("noise_sd", &self.noise_sd),
            ("init_mean", &self.init_mean),
            ("init_sd", &self.init_sd),
        ] {
            if v.len() != p {
                return Err(Error::InvalidConfig(format!("{what} must have length {p}")));
            }
        }
        if self.noise_sd.iter().chain(&self.init_sd).any(|s| !(*s >= 0.0)) {
            return Err(Error::InvalidConfig("standard deviations must be >= 0".into()));
        }
        if self.names.len() != p {
            return Err(Error::InvalidConfig(format!("names must have length {p}")));
        }
        if let Some(l) = &self.period_labels {
            if l.len() != self.t {
                return Err(Error::InvalidConfig(format!("period_labels must have length {}", self.t)));
            }
        }
        if self.risk_parents.0 > self.risk_parents.1 {
            return Err(Error::InvalidConfig("risk_parents range is reversed".into()));
        }
        Ok(())
    }

    fn labels(&self) -> Vec<String> {
        self.period_labels
            .clone()
            .unwrap_or_else(|| (1..=self.t).map(|k| format!("t{k}")).collect())
    }
}

/// `n` quarter tags such as `2009Q2`, `2009Q3`, ...
pub fn quarter_labels(start_year: i32, start_quarter: u8, n: usize) -> Vec<String> {
    let mut year = start_year;
    let mut q = start_quarter;
    (0..n)
        .map(|_| {
            let label = format!("{year}Q{q}");
            q += 1;
            if q > 4 {
                q = 1;
                year += 1;
            }
            label
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct SynthDraw {
    pub panel: TimeSeriesPanel,
    pub truth: CoefficientSet,
    /// Spectral radius of `(I − Ψ)⁻¹Φ`.
    pub spectral_radius: f64,
    /// 2-norm condition number of `I − Ψ`.
    pub condition_number: f64,
    pub attempts: usize,
}

pub fn spectral_radius(m: &DMatrix<f64>) -> f64 {
    m.complex_eigenvalues()
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max)
}

fn condition_number(m: &DMatrix<f64>) -> f64 {
    let sv = m.clone().svd(false, false).singular_values;
    let max = sv.iter().copied().fold(0.0, f64::max);
    let min = sv.iter().copied().fold(f64::INFINITY, f64::min);
    if min == 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

/// Reduced-form transition `(I − Ψ)⁻¹Φ`, or `None` if `I − Ψ` is singular.
pub fn reduced_form(truth: &CoefficientSet) -> Option<DMatrix<f64>> {
    let p = truth.p();
    let lhs = DMatrix::identity(p, p) - &truth.psi;
    lhs.lu().solve(&truth.phi)
}

fn draw_magnitude<R: Rng>(rng: &mut R, spec: &SynthSpec) -> f64 {
    let m = if spec.coef_high > spec.coef_low {
        rng.random_range(spec.coef_low..=spec.coef_high)
    } else {
        spec.coef_low
    };
    if rng.random_bool(0.5) {
        m
    } else {
        -m
    }
}

fn draw_truth<R: Rng>(rng: &mut R, spec: &SynthSpec, mask: &ConstraintMask) -> CoefficientSet {
    let p = spec.p;
    let mut truth = CoefficientSet::zeros(p);

    // macro equations: Ψ edges respect a random causal order
    let mut order: Vec<usize> = (1..p).collect();
    order.shuffle(rng);
    let mut rank = vec![0; p];
    for (r, &v) in order.iter().enumerate() {
        rank[v] = r;
    }
    let mut n_free = 0;
    let mut pool = Vec::new();
    for i in 1..p {
        for j in mask.free_columns(i) {
            n_free += 1;
            let eligible = if j < p {
                spec.contemporaneous && rank[j] < rank[i]
            } else {
                true
            };
            if eligible {
                pool.push((i, j));
            }
        }
    }
    let target = ((spec.edge_density * n_free as f64).round() as usize).min(pool.len());
    pool.shuffle(rng);
    let mut chosen: Vec<(usize, usize)> = pool[..target].to_vec();
    chosen.sort_unstable();
    for (i, j) in chosen {
        let v = draw_magnitude(rng, spec);
        truth.set_theta(i, j, v);
    }

    // risk equation: lagged macro drivers only
    let mut risk_free: Vec<usize> = mask.free_columns(0).into_iter().filter(|&j| j > p).collect();
    let lo = spec.risk_parents.0.min(risk_free.len());
    let hi = spec.risk_parents.1.min(risk_free.len());
    let k = if hi > lo { rng.random_range(lo..=hi) } else { lo };
    risk_free.shuffle(rng);
    let mut picks = risk_free[..k].to_vec();
    picks.sort_unstable();
    for j in picks {
        let v = draw_magnitude(rng, spec);
        truth.set_theta(0, j, v);
    }

    let (lo, hi) = spec.intercept_range;
    for i in 0..p {
        truth.intercept[i] = if hi > lo { rng.random_range(lo..hi) } else { lo };
    }
    truth
}

fn simulate_values<R: Rng>(
    rng: &mut R,
    truth: &CoefficientSet,
    t: usize,
    noise_sd: &[f64],
    init_mean: &[f64],
    init_sd: &[f64],
) -> Result<DMatrix<f64>> {
    let p = truth.p();
    let lu = (DMatrix::identity(p, p) - &truth.psi).lu();
    if !lu.is_invertible() {
        return Err(Error::Synthesis("I − Ψ is singular".into()));
    }
    let mut prev = DVector::from_fn(p, |i, _| {
        init_mean[i] + init_sd[i] * rng.sample::<f64, _>(StandardNormal)
    });
    let mut values = DMatrix::zeros(p, t);
    for k in 0..t {
        let mut rhs = &truth.phi * &prev + &truth.intercept;
        for i in 0..p {
            rhs[i] += noise_sd[i] * rng.sample::<f64, _>(StandardNormal);
        }
        let next = lu
            .solve(&rhs)
            .ok_or_else(|| Error::Synthesis("I − Ψ is singular".into()))?;
        values.set_column(k, &next);
        prev = next;
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::Synthesis("simulated path diverged".into()));
    }
    Ok(values)
}

fn panel_from(values: DMatrix<f64>, names: &[String], labels: Vec<String>) -> Result<TimeSeriesPanel> {
    let mut vars = vec![VariableMeta::risk(names[0].clone())];
    vars.extend(names[1..].iter().map(|n| VariableMeta::macro_var(n.clone())));
    TimeSeriesPanel::new(vars, values, labels)
}

/// Simulates `X_t = (I − Ψ)⁻¹(Φ X_{t−1} + b + ω_t)` for `t = 1..T` from a
/// given truth. The returned panel holds `X_1..X_T`; `X_0` is discarded.
pub fn simulate(truth: &CoefficientSet, spec: &SynthSpec) -> Result<TimeSeriesPanel> {
    spec.validate()?;
    truth.check_dims()?;
    if truth.p() != spec.p {
        return Err(Error::DimensionMismatch("truth and spec disagree on p".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let values = simulate_values(&mut rng, truth, spec.t, &spec.noise_sd, &spec.init_mean, &spec.init_sd)?;
    panel_from(values, &spec.names, spec.labels())
}

/// Draws a sparse stationary truth under the default mask and simulates it.
/// Deterministic in `spec.seed`.
pub fn generate(spec: &SynthSpec) -> Result<SynthDraw> {
    spec.validate()?;
    let mask = default_mask(spec.p)?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    for attempt in 1..=spec.max_retries.max(1) {
        let truth = draw_truth(&mut rng, spec, &mask);
        let lhs = DMatrix::identity(spec.p, spec.p) - &truth.psi;
        let cond = condition_number(&lhs);
        let Some(reduced) = reduced_form(&truth) else {
            continue;
        };
        let rho = spectral_radius(&reduced);
        if !cond.is_finite() || (!spec.allow_unit_root && rho >= 1.0) {
            continue;
        }
        let values = simulate_values(
            &mut rng,
            &truth,
            spec.t,
            &spec.noise_sd,
            &spec.init_mean,
            &spec.init_sd,
        )?;
        return Ok(SynthDraw {
            panel: panel_from(values, &spec.names, spec.labels())?,
            truth,
            spectral_radius: rho,
            condition_number: cond,
            attempts: attempt,
        });
    }
    Err(Error::Synthesis(format!(
        "no stationary draw within {} attempts; lower edge_density or coef_high",
        spec.max_retries
    )))
}

/// Case-study-shaped panel whose risk row is mapped into `(0, 1)` so that
/// it can go through the logit transform like an observed PD.
pub fn case_study_panel(seed: u64) -> Result<SynthDraw> {
    let mut draw = generate(&SynthSpec::case_study(seed))?;
    let risk: Vec<f64> = draw
        .panel
        .values()
        .row(0)
        .iter()
        .map(|v| inverse_logit(v - 3.0))
        .collect();
    draw.panel = draw.panel.with_row(0, &risk)?;
    Ok(draw)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EdgeCounts {
    pub true_positive: usize,
    pub false_positive: usize,
    pub false_negative: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecoveryMetrics {
    pub psi: EdgeCounts,
    pub phi: EdgeCounts,
    pub combined: EdgeCounts,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// Share of true positives whose estimated sign matches; `None` without true positives.
    pub sign_agreement: Option<f64>,
}

/// Compares supports over the mask's estimable coordinates. A truth entry is
/// present when nonzero; an estimate entry when `|value| > threshold`.
pub fn edge_metrics(
    truth: &CoefficientSet,
    estimate: &CoefficientSet,
    mask: &ConstraintMask,
    threshold: f64,
) -> Result<RecoveryMetrics> {
    truth.check_dims()?;
    estimate.check_dims()?;
    let p = mask.p();
    if truth.p() != p || estimate.p() != p {
        return Err(Error::DimensionMismatch(format!(
            "truth p = {}, estimate p = {}, mask p = {}",
            truth.p(),
            estimate.p(),
            p
        )));
    }
    let (mut psi, mut phi) = (EdgeCounts::default(), EdgeCounts::default());
    let (mut agree, mut tp_total) = (0usize, 0usize);
    for i in 0..p {
        for j in mask.free_columns(i) {
            let t = truth.theta(i, j);
            let e = estimate.theta(i, j);
            let counts = if j < p { &mut psi } else { &mut phi };
            match (t != 0.0, e.abs() > threshold) {
                (true, true) => {
                    counts.true_positive += 1;
                    tp_total += 1;
                    if t.signum() == e.signum() {
                        agree += 1;
                    }
                }
                (false, true) => counts.false_positive += 1,
                (true, false) => counts.false_negative += 1,
                (false, false) => {}
            }
        }
    }
    let combined = EdgeCounts {
        true_positive: psi.true_positive + phi.true_positive,
        false_positive: psi.false_positive + phi.false_positive,
        false_negative: psi.false_negative + phi.false_negative,
    };
    let (tp, fp, fn_) = (
        combined.true_positive as f64,
        combined.false_positive as f64,
        combined.false_negative as f64,
    );
    // empty denominators count as perfect only when nothing was missed / invented
    let precision = if tp + fp > 0.0 { tp / (tp + fp) } else if fn_ == 0.0 { 1.0 } else { 0.0 };
    let recall = if tp + fn_ > 0.0 { tp / (tp + fn_) } else if fp == 0.0 { 1.0 } else { 0.0 };
    let f1 = if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    };
    Ok(RecoveryMetrics {
        psi,
        phi,
        combined,
        precision,
        recall,
        f1,
        sign_agreement: (tp_total > 0).then(|| agree as f64 / tp_total as f64),
    })
}
