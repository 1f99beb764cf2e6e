//! Constrained Lasso / Elastic-Net estimation by cyclic coordinate descent.
//!
//! The problem solved is
//!
//! ```text
//! min  ½‖X − b1' − ΘZ‖²_F + λ [ ½(1−α)‖WΘ‖²₂ + α‖WΘ‖₁ ]
//! ```
//!
//! over the unfrozen entries of `Θ = (Ψ, Φ)`, with `b` unpenalized. `W`
//! scales each predictor column: its sample standard deviation when
//! `standardize` is on, 1 otherwise. With `W = I` and `α = 1` this is the
//! plain Lasso. The objective separates over the rows of `Θ`, so each
//! variable's equation is solved independently.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{CoefficientSet, ConstraintMask};
use crate::panel::DesignMatrices;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    /// Elastic-Net mixing in `(0, 1]`; 1 is the Lasso.
    pub alpha: f64,
    pub lambda: f64,
    /// Convergence threshold on the largest coefficient change in a sweep.
    pub tol: f64,
    pub max_sweeps: usize,
    pub standardize: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            alpha: 1.0,
            lambda: 0.0,
            tol: 1e-7,
            max_sweeps: 10_000,
            standardize: true,
        }
    }
}

impl SolverConfig {
    pub fn new(alpha: f64, lambda: f64) -> Self {
        Self {
            alpha,
            lambda,
            ..Self::default()
        }
    }

    pub fn with_lambda(self, lambda: f64) -> Self {
        Self { lambda, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "alpha must lie in (0, 1], got {}",
                self.alpha
            )));
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "lambda must be finite and >= 0, got {}",
                self.lambda
            )));
        }
        if !(self.tol > 0.0) {
            return Err(Error::InvalidConfig(format!("tol must be > 0, got {}", self.tol)));
        }
        if self.max_sweeps == 0 {
            return Err(Error::InvalidConfig("max_sweeps must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub objective_value: f64,
    pub sweeps_used: usize,
    pub converged: bool,
    pub kkt_residual: f64,
    pub per_row_sweeps: Vec<usize>,
}

#[inline]
pub fn soft_threshold(z: f64, gamma: f64) -> f64 {
    if z > gamma {
        z - gamma
    } else if z < -gamma {
        z + gamma
    } else {
        0.0
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// A standard deviation this small relative to the mean is rounding noise
/// on a constant column.
pub(crate) fn is_degenerate_sd(sd: f64, mean: f64) -> bool {
    !(sd > 8.0 * f64::EPSILON * mean.abs().max(1.0))
}

/// Centered (and optionally scaled) predictors and centered responses.
struct Prepared {
    p: usize,
    /// Row `j`: `(z_j − m_j) / w_j` over the `Te` samples.
    predictors: Vec<Vec<f64>>,
    /// `w_j`; zero marks a predictor that is never updated.
    scale: Vec<f64>,
    sq_norms: Vec<f64>,
    responses: Vec<Vec<f64>>,
}

impl Prepared {
    fn new(design: &DesignMatrices, standardize: bool) -> Self {
        let p = design.p();
        let te = design.te;
        let mut predictors = Vec::with_capacity(2 * p);
        let mut scale = Vec::with_capacity(2 * p);
        let mut sq_norms = Vec::with_capacity(2 * p);
        for j in 0..2 * p {
            let mean = design.column_means[j];
            let sd = design.column_sds[j];
            let w = if is_degenerate_sd(sd, mean) {
                0.0
            } else if standardize {
                sd
            } else {
                1.0
            };
            let col: Vec<f64> = if w > 0.0 {
                (0..te).map(|k| (design.z[(j, k)] - mean) / w).collect()
            } else {
                vec![0.0; te]
            };
            sq_norms.push(dot(&col, &col));
            predictors.push(col);
            scale.push(w);
        }
        let responses = (0..p)
            .map(|i| {
                let m = design.response_means[i];
                (0..te).map(|k| design.x[(i, k)] - m).collect()
            })
            .collect();
        Self {
            p,
            predictors,
            scale,
            sq_norms,
            responses,
        }
    }

    fn active(&self, j: usize) -> bool {
        self.scale[j] > 0.0 && self.sq_norms[j] > 0.0
    }
}

/// Solution of a single equation.
#[derive(Debug, Clone, PartialEq)]
pub struct RowFit {
    pub row: usize,
    /// Stacked `(ψ_i·, φ_i·)` on the original scale, length `2p`.
    pub coefficients: Vec<f64>,
    pub intercept: f64,
    pub sweeps: usize,
    pub converged: bool,
}

fn row_penalty(beta: &[f64], config: &SolverConfig) -> f64 {
    let (l1, l2) = beta
        .iter()
        .fold((0.0, 0.0), |(a, b), v| (a + v.abs(), b + v * v));
    config.lambda * (0.5 * (1.0 - config.alpha) * l2 + config.alpha * l1)
}

fn solve_row(
    prep: &Prepared,
    design: &DesignMatrices,
    mask: &ConstraintMask,
    config: &SolverConfig,
    row: usize,
    warm: Option<&[f64]>,
) -> RowFit {
    let p = prep.p;
    let free: Vec<usize> = mask
        .free_columns(row)
        .into_iter()
        .filter(|&j| prep.active(j))
        .collect();
    let mut beta = vec![0.0; 2 * p];
    let mut resid = prep.responses[row].clone();
    if let Some(init) = warm {
        for &j in &free {
            let b = init[j] * prep.scale[j];
            if b != 0.0 {
                beta[j] = b;
                for (r, u) in resid.iter_mut().zip(&prep.predictors[j]) {
                    *r -= b * u;
                }
            }
        }
    }

    let threshold = config.lambda * config.alpha;
    let ridge = config.lambda * (1.0 - config.alpha);
    let mut sweeps = 0;
    let mut converged = free.is_empty();
    #[cfg(debug_assertions)]
    let mut last_obj = 0.5 * dot(&resid, &resid) + row_penalty(&beta, config);

    while !converged && sweeps < config.max_sweeps {
        sweeps += 1;
        let mut max_delta: f64 = 0.0;
        for &j in &free {
            let u = &prep.predictors[j];
            let old = beta[j];
            let rho = dot(u, &resid) + prep.sq_norms[j] * old;
            let new = soft_threshold(rho, threshold) / (prep.sq_norms[j] + ridge);
            if new != old {
                let delta = new - old;
                for (r, uk) in resid.iter_mut().zip(u) {
                    *r -= delta * uk;
                }
                max_delta = max_delta.max(delta.abs());
                beta[j] = new;
            }
        }
        #[cfg(debug_assertions)]
        {
            let obj = 0.5 * dot(&resid, &resid) + row_penalty(&beta, config);
            debug_assert!(
                obj <= last_obj + 1e-9 * (1.0 + last_obj.abs()),
                "coordinate sweep increased the objective: {last_obj} -> {obj}"
            );
            last_obj = obj;
        }
        converged = max_delta < config.tol;
    }

    let coefficients: Vec<f64> = (0..2 * p)
        .map(|j| if beta[j] != 0.0 { beta[j] / prep.scale[j] } else { 0.0 })
        .collect();
    let intercept = design.response_means[row]
        - coefficients
            .iter()
            .zip(design.column_means.iter())
            .map(|(c, m)| c * m)
            .sum::<f64>();
    RowFit {
        row,
        coefficients,
        intercept,
        sweeps,
        converged,
    }
}

fn check_inputs(design: &DesignMatrices, mask: &ConstraintMask, config: &SolverConfig) -> Result<()> {
    config.validate()?;
    if design.p() != mask.p() {
        return Err(Error::DimensionMismatch(format!(
            "design has p = {} but mask has p = {}",
            design.p(),
            mask.p()
        )));
    }
    if design.x.iter().chain(design.z.iter()).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("design matrices".into()));
    }
    Ok(())
}

/// Solves the equation of variable `row` alone.
pub fn fit_row(
    design: &DesignMatrices,
    mask: &ConstraintMask,
    config: &SolverConfig,
    row: usize,
) -> Result<RowFit> {
    check_inputs(design, mask, config)?;
    if row >= design.p() {
        return Err(Error::DimensionMismatch(format!("row {row} out of range")));
    }
    let prep = Prepared::new(design, config.standardize);
    Ok(solve_row(&prep, design, mask, config, row, None))
}

/// Puts row solutions into a coefficient set.
pub fn assemble(rows: &[RowFit]) -> CoefficientSet {
    let p = rows.len();
    let mut out = CoefficientSet::zeros(p);
    for r in rows {
        for (j, &v) in r.coefficients.iter().enumerate() {
            if v != 0.0 {
                out.set_theta(r.row, j, v);
            }
        }
        out.intercept[r.row] = r.intercept;
    }
    out
}

fn fit_prepared(
    prep: &Prepared,
    design: &DesignMatrices,
    mask: &ConstraintMask,
    config: &SolverConfig,
    warm: Option<&CoefficientSet>,
) -> Result<(CoefficientSet, FitReport)> {
    let p = design.p();
    let warm_rows: Option<Vec<Vec<f64>>> = warm.map(|c| {
        (0..p)
            .map(|i| (0..2 * p).map(|j| c.theta(i, j)).collect())
            .collect()
    });
    let rows: Vec<RowFit> = (0..p)
        .into_par_iter()
        .map(|i| {
            let init = warm_rows.as_ref().map(|w| w[i].as_slice());
            solve_row(prep, design, mask, config, i, init)
        })
        .collect();
    let coeffs = assemble(&rows);
    let per_row_sweeps: Vec<usize> = rows.iter().map(|r| r.sweeps).collect();
    let report = FitReport {
        objective_value: objective(design, &coeffs, config)?,
        sweeps_used: per_row_sweeps.iter().copied().max().unwrap_or(0),
        converged: rows.iter().all(|r| r.converged),
        kkt_residual: kkt_residual(design, &coeffs, mask, config)?,
        per_row_sweeps,
    };
    Ok((coeffs, report))
}

/// Fits all `p` equations. Exhausting `max_sweeps` is reported through
/// `FitReport::converged`, not as an error.
pub fn fit(
    design: &DesignMatrices,
    mask: &ConstraintMask,
    config: &SolverConfig,
) -> Result<(CoefficientSet, FitReport)> {
    fit_warm(design, mask, config, None)
}

/// Like [`fit`], starting coordinate descent from `warm`.
pub fn fit_warm(
    design: &DesignMatrices,
    mask: &ConstraintMask,
    config: &SolverConfig,
    warm: Option<&CoefficientSet>,
) -> Result<(CoefficientSet, FitReport)> {
    check_inputs(design, mask, config)?;
    if let Some(w) = warm {
        w.check_dims()?;
        if w.p() != design.p() {
            return Err(Error::DimensionMismatch("warm start has wrong p".into()));
        }
    }
    let prep = Prepared::new(design, config.standardize);
    fit_prepared(&prep, design, mask, config, warm)
}

/// Per-column penalty weights `w_j` (0 for skipped constant predictors).
fn penalty_weights(design: &DesignMatrices, standardize: bool) -> Vec<f64> {
    (0..2 * design.p())
        .map(|j| {
            let (m, s) = (design.column_means[j], design.column_sds[j]);
            if is_degenerate_sd(s, m) {
                0.0
            } else if standardize {
                s
            } else {
                1.0
            }
        })
        .collect()
}

fn check_coeff_dims(design: &DesignMatrices, coeffs: &CoefficientSet) -> Result<()> {
    coeffs.check_dims()?;
    if coeffs.p() != design.p() {
        return Err(Error::DimensionMismatch(format!(
            "coefficients for p = {} against design with p = {}",
            coeffs.p(),
            design.p()
        )));
    }
    if !coeffs.is_finite() {
        return Err(Error::NonFinite("coefficient set".into()));
    }
    Ok(())
}

/// Residual matrix `X − b1' − ΘZ`.
fn residuals(design: &DesignMatrices, coeffs: &CoefficientSet) -> DMatrix<f64> {
    let p = design.p();
    let mut theta = DMatrix::zeros(p, 2 * p);
    theta.columns_mut(0, p).copy_from(&coeffs.psi);
    theta.columns_mut(p, p).copy_from(&coeffs.phi);
    let mut r = &design.x - theta * &design.z;
    for mut col in r.column_iter_mut() {
        col -= &coeffs.intercept;
    }
    r
}

/// Evaluates the penalized objective at `coeffs` (including its intercept).
pub fn objective(design: &DesignMatrices, coeffs: &CoefficientSet, config: &SolverConfig) -> Result<f64> {
    check_coeff_dims(design, coeffs)?;
    let p = design.p();
    let r = residuals(design, coeffs);
    let w = penalty_weights(design, config.standardize);
    let beta: Vec<f64> = (0..p)
        .flat_map(|i| (0..2 * p).map(move |j| (i, j)))
        .map(|(i, j)| coeffs.theta(i, j) * w[j])
        .collect();
    Ok(0.5 * r.norm_squared() + row_penalty(&beta, config))
}

/// Largest violation of the optimality conditions over unfrozen coordinates
/// (and of the intercept's zero-gradient condition). Zero at an exact optimum.
pub fn kkt_residual(
    design: &DesignMatrices,
    coeffs: &CoefficientSet,
    mask: &ConstraintMask,
    config: &SolverConfig,
) -> Result<f64> {
    check_coeff_dims(design, coeffs)?;
    if mask.p() != design.p() {
        return Err(Error::DimensionMismatch("mask and design disagree on p".into()));
    }
    let p = design.p();
    let r = residuals(design, coeffs);
    let w = penalty_weights(design, config.standardize);
    let l1 = config.lambda * config.alpha;
    let l2 = config.lambda * (1.0 - config.alpha);
    let mut worst: f64 = 0.0;
    for i in 0..p {
        let ri = r.row(i);
        worst = worst.max(ri.sum().abs());
        for j in mask.free_columns(i) {
            if w[j] == 0.0 {
                continue;
            }
            let g = -design.z.row(j).dot(&ri) / w[j];
            let beta = coeffs.theta(i, j) * w[j];
            let v = if beta != 0.0 {
                (g + l2 * beta + l1 * beta.signum()).abs()
            } else {
                (g.abs() - l1).max(0.0)
            };
            worst = worst.max(v);
        }
    }
    Ok(worst)
}

/// Smallest λ at which the all-zero `Θ` is optimal.
pub fn lambda_max(design: &DesignMatrices, mask: &ConstraintMask, alpha: f64, standardize: bool) -> Result<f64> {
    if !(alpha > 0.0) {
        return Err(Error::InvalidConfig(format!("lambda_max needs alpha > 0, got {alpha}")));
    }
    if design.p() != mask.p() {
        return Err(Error::DimensionMismatch("mask and design disagree on p".into()));
    }
    let prep = Prepared::new(design, standardize);
    Ok(lambda_max_prepared(&prep, mask, alpha))
}

fn lambda_max_prepared(prep: &Prepared, mask: &ConstraintMask, alpha: f64) -> f64 {
    let mut best: f64 = 0.0;
    for i in 0..prep.p {
        for j in mask.free_columns(i) {
            if prep.active(j) {
                best = best.max(dot(&prep.predictors[j], &prep.responses[i]).abs());
            }
        }
    }
    best / alpha
}

/// Log-spaced grid from `lmax` down to `lmax · min_ratio`.
pub fn lambda_grid(lmax: f64, n: usize, min_ratio: f64) -> Vec<f64> {
    if n == 1 {
        return vec![lmax];
    }
    (0..n)
        .map(|k| {
            if k == 0 {
                lmax
            } else {
                lmax * min_ratio.powf(k as f64 / (n - 1) as f64)
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct PathPoint {
    pub lambda: f64,
    pub coefficients: CoefficientSet,
    pub report: FitReport,
}

/// Warm-started fits along an explicit decreasing λ sequence.
pub fn fit_lambdas(
    design: &DesignMatrices,
    mask: &ConstraintMask,
    config: &SolverConfig,
    lambdas: &[f64],
) -> Result<Vec<PathPoint>> {
    check_inputs(design, mask, config)?;
    let prep = Prepared::new(design, config.standardize);
    let mut out: Vec<PathPoint> = Vec::with_capacity(lambdas.len());
    for &lambda in lambdas {
        let cfg = config.with_lambda(lambda);
        cfg.validate()?;
        let warm = out.last().map(|pt| &pt.coefficients);
        let (coefficients, report) = fit_prepared(&prep, design, mask, &cfg, warm)?;
        out.push(PathPoint {
            lambda,
            coefficients,
            report,
        });
    }
    Ok(out)
}

/// Regularization path over `n_lambdas` log-spaced values starting at
/// [`lambda_max`].
pub fn fit_path(
    design: &DesignMatrices,
    mask: &ConstraintMask,
    config: &SolverConfig,
    n_lambdas: usize,
    lambda_min_ratio: f64,
) -> Result<Vec<PathPoint>> {
    if n_lambdas < 2 {
        return Err(Error::InvalidConfig(format!("n_lambdas must be >= 2, got {n_lambdas}")));
    }
    if !(lambda_min_ratio > 0.0 && lambda_min_ratio < 1.0) {
        return Err(Error::InvalidConfig(format!(
            "lambda_min_ratio must lie in (0, 1), got {lambda_min_ratio}"
        )));
    }
    check_inputs(design, mask, config)?;
    let lmax = lambda_max(design, mask, config.alpha, config.standardize)?;
    fit_lambdas(design, mask, config, &lambda_grid(lmax, n_lambdas, lambda_min_ratio))
}

/// JSON form of an estimate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoefficientReport {
    pub variables: Vec<String>,
    pub psi: Vec<Vec<f64>>,
    pub phi: Vec<Vec<f64>>,
    pub intercept: Vec<f64>,
    pub lambda: f64,
    pub alpha: f64,
    /// Absent for coefficient sets that were not estimated (simulation truth).
    pub objective: Option<f64>,
    pub kkt_residual: Option<f64>,
}

fn rows_of(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

impl CoefficientReport {
    pub fn new(
        variables: Vec<String>,
        coeffs: &CoefficientSet,
        config: &SolverConfig,
        report: &FitReport,
    ) -> Self {
        Self {
            variables,
            psi: rows_of(&coeffs.psi),
            phi: rows_of(&coeffs.phi),
            intercept: coeffs.intercept.iter().copied().collect(),
            lambda: config.lambda,
            alpha: config.alpha,
            objective: Some(report.objective_value),
            kkt_residual: Some(report.kkt_residual),
        }
    }

    /// Report for coefficients that come with no fit (e.g. a simulation truth).
    pub fn unfitted(variables: Vec<String>, coeffs: &CoefficientSet) -> Self {
        Self {
            variables,
            psi: rows_of(&coeffs.psi),
            phi: rows_of(&coeffs.phi),
            intercept: coeffs.intercept.iter().copied().collect(),
            lambda: 0.0,
            alpha: 1.0,
            objective: None,
            kkt_residual: None,
        }
    }

    pub fn coefficients(&self) -> Result<CoefficientSet> {
        let p = self.variables.len();
        let grab = |rows: &Vec<Vec<f64>>, what: &str| -> Result<DMatrix<f64>> {
            if rows.len() != p || rows.iter().any(|r| r.len() != p) {
                return Err(Error::DimensionMismatch(format!("{what} must be {p}x{p}")));
            }
            Ok(DMatrix::from_fn(p, p, |i, j| rows[i][j]))
        };
        if self.intercept.len() != p {
            return Err(Error::DimensionMismatch("intercept length".into()));
        }
        Ok(CoefficientSet {
            psi: grab(&self.psi, "psi")?,
            phi: grab(&self.phi, "phi")?,
            intercept: DVector::from_vec(self.intercept.clone()),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::default_mask;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_design(p: usize, te: usize, seed: u64) -> DesignMatrices {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let t = te + 1;
        let vals: Vec<f64> = (0..p * t).map(|_| rng.random_range(-1.0..1.0)).collect();
        let values = DMatrix::from_row_slice(p, t, &vals);
        let x = values.columns(1, te).into_owned();
        let z = DMatrix::from_fn(2 * p, te, |r, k| {
            if r < p {
                values[(r, k + 1)]
            } else {
                values[(r - p, k)]
            }
        });
        DesignMatrices::from_parts(x, z).unwrap()
    }

    #[test]
    fn soft_threshold_cases() {
        assert_eq!(soft_threshold(5.0, 2.0), 3.0);
        assert_eq!(soft_threshold(-5.0, 2.0), -3.0);
        assert_eq!(soft_threshold(1.0, 2.0), 0.0);
        assert_eq!(soft_threshold(2.0, 2.0), 0.0);
    }

    #[test]
    fn config_validation() {
        assert!(SolverConfig::new(0.0, 1.0).validate().is_err());
        assert!(SolverConfig::new(1.1, 1.0).validate().is_err());
        assert!(SolverConfig::new(0.5, -1.0).validate().is_err());
        assert!(SolverConfig { tol: 0.0, ..SolverConfig::default() }.validate().is_err());
        assert!(SolverConfig::new(0.5, 0.0).validate().is_ok());
    }

    #[test]
    fn objective_at_zero_is_half_frobenius() {
        let d = random_design(3, 10, 1);
        let zero = CoefficientSet::zeros(3);
        let obj = objective(&d, &zero, &SolverConfig::new(0.5, 3.0)).unwrap();
        assert!((obj - 0.5 * d.x.norm_squared()).abs() < 1e-12);
    }

    #[test]
    fn full_shrinkage_returns_means() {
        let d = random_design(4, 20, 2);
        let mask = default_mask(4).unwrap();
        let lmax = lambda_max(&d, &mask, 0.5, true).unwrap();
        let (c, rep) = fit(&d, &mask, &SolverConfig::new(0.5, lmax * 1.0001)).unwrap();
        assert_eq!(c.nonzero_count(), 0);
        for i in 0..4 {
            assert_eq!(c.intercept[i], d.response_means[i]);
        }
        let centered: f64 = (0..4)
            .flat_map(|i| (0..20).map(move |k| (i, k)))
            .map(|(i, k)| (d.x[(i, k)] - d.response_means[i]).powi(2))
            .sum();
        assert!((rep.objective_value - 0.5 * centered).abs() < 1e-10);
        assert!(rep.kkt_residual < 1e-12);
    }

    #[test]
    fn zero_response_has_zero_lambda_max() {
        let mut d = random_design(3, 10, 3);
        d.x.fill(0.0);
        let d = DesignMatrices::from_parts(d.x, d.z).unwrap();
        assert_eq!(lambda_max(&d, &default_mask(3).unwrap(), 1.0, true).unwrap(), 0.0);
        assert!(lambda_max(&d, &default_mask(3).unwrap(), 0.0, true).is_err());
    }

    #[test]
    fn constant_predictor_skipped() {
        let d = random_design(3, 15, 4);
        let mut z = d.z.clone();
        for k in 0..15 {
            z[(4, k)] = 2.5;
        }
        let d = DesignMatrices::from_parts(d.x, z).unwrap();
        let (c, rep) = fit(&d, &default_mask(3).unwrap(), &SolverConfig::new(1.0, 0.0)).unwrap();
        assert_eq!(c.theta(1, 4), 0.0);
        assert!(rep.objective_value.is_finite());
    }

    #[test]
    fn exhausted_sweeps_reported() {
        let d = random_design(4, 30, 5);
        let cfg = SolverConfig {
            max_sweeps: 1,
            tol: 1e-15,
            ..SolverConfig::new(1.0, 0.0)
        };
        let (_, rep) = fit(&d, &default_mask(4).unwrap(), &cfg).unwrap();
        assert!(!rep.converged);
        assert_eq!(rep.sweeps_used, 1);
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let d = random_design(3, 10, 6);
        assert!(fit(&d, &default_mask(4).unwrap(), &SolverConfig::default()).is_err());
    }

    #[test]
    fn report_json_round_trip() {
        let d = random_design(3, 12, 7);
        let mask = default_mask(3).unwrap();
        let cfg = SolverConfig::new(0.5, 0.1);
        let (c, rep) = fit(&d, &mask, &cfg).unwrap();
        let names = vec!["PD".into(), "A".into(), "B".into()];
        let json = serde_json::to_string(&CoefficientReport::new(names, &c, &cfg, &rep)).unwrap();
        let back: CoefficientReport = serde_json::from_str(&json).unwrap();
        assert_eq!(back.coefficients().unwrap(), c);
    }

    #[test]
    fn lambda_grid_endpoints() {
        let g = lambda_grid(2.0, 5, 0.01);
        assert_eq!(g[0], 2.0);
        assert!((g[4] - 0.02).abs() < 1e-15);
        assert!(g.windows(2).all(|w| w[1] < w[0]));
    }
}
