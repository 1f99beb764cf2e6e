//! Cross-validation over time for the penalty level λ (and mixing α).

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::ConstraintMask;
use crate::panel::DesignMatrices;
use crate::solver::{self, SolverConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FoldScheme {
    /// `k` contiguous validation blocks; training uses all other columns.
    KFoldContiguous,
    /// `k` expanding windows, each validated on the block that follows it.
    RollingOrigin,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fold {
    pub train: Vec<usize>,
    pub validation: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub scheme: FoldScheme,
    pub k: usize,
    pub folds: Vec<Fold>,
}

/// Splits `0..n` into `blocks` contiguous ranges whose sizes differ by at most one,
/// larger blocks first.
fn contiguous_blocks(n: usize, blocks: usize) -> Vec<std::ops::Range<usize>> {
    let (base, extra) = (n / blocks, n % blocks);
    let mut start = 0;
    (0..blocks)
        .map(|b| {
            let len = base + usize::from(b < extra);
            let r = start..start + len;
            start += len;
            r
        })
        .collect()
}

pub fn make_folds(te: usize, k: usize, scheme: FoldScheme) -> Result<FoldPlan> {
    if k < 2 || k > te {
        return Err(Error::InvalidConfig(format!(
            "fold count must satisfy 2 <= k <= Te = {te}, got {k}"
        )));
    }
    let folds = match scheme {
        FoldScheme::KFoldContiguous => contiguous_blocks(te, k)
            .into_iter()
            .map(|v| Fold {
                train: (0..te).filter(|i| !v.contains(i)).collect(),
                validation: v.collect(),
            })
            .collect(),
        FoldScheme::RollingOrigin => {
            if k + 1 > te {
                return Err(Error::InvalidConfig(format!(
                    "rolling origin with k = {k} needs Te > k, got Te = {te}"
                )));
            }
            let blocks = contiguous_blocks(te, k + 1);
            blocks[1..]
                .iter()
                .map(|v| Fold {
                    train: (0..v.start).collect(),
                    validation: v.clone().collect(),
                })
                .collect()
        }
    };
    Ok(FoldPlan { scheme, k, folds })
}

/// Which responses enter the validation error.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Scoring {
    AllResponses,
    RiskOnly,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvSettings {
    pub alphas: Vec<f64>,
    pub n_lambdas: usize,
    pub lambda_min_ratio: f64,
    /// Explicit λ sequence shared by every α; overrides the λmax-anchored grid.
    pub lambdas: Option<Vec<f64>>,
    pub scoring: Scoring,
    /// Tolerance, sweep cap and standardization for every fit.
    pub solver: SolverConfig,
}

impl Default for CvSettings {
    fn default() -> Self {
        Self {
            alphas: vec![1.0],
            n_lambdas: 50,
            lambda_min_ratio: 1e-3,
            lambdas: None,
            scoring: Scoring::AllResponses,
            solver: SolverConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    pub alpha: f64,
    pub lambda: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvResult {
    pub grid: Vec<GridPoint>,
    pub mean_cv_error: Vec<f64>,
    pub sd_cv_error: Vec<f64>,
    pub best: usize,
    pub best_1se: usize,
    pub n_folds: usize,
}

impl CvResult {
    pub fn best_point(&self) -> GridPoint {
        self.grid[self.best]
    }

    pub fn best_1se_point(&self) -> GridPoint {
        self.grid[self.best_1se]
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["alpha", "lambda", "mean", "sd"])?;
        for (g, (m, s)) in self
            .grid
            .iter()
            .zip(self.mean_cv_error.iter().zip(&self.sd_cv_error))
        {
            w.write_record([
                g.alpha.to_string(),
                g.lambda.to_string(),
                m.to_string(),
                s.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Mean squared one-step error `X_t − (b + Θ Z_t)` over the given columns.
fn validation_error(
    design: &DesignMatrices,
    coeffs: &crate::model::CoefficientSet,
    columns: &[usize],
    scoring: Scoring,
) -> f64 {
    let p = design.p();
    let rows: Vec<usize> = match scoring {
        Scoring::AllResponses => (0..p).collect(),
        Scoring::RiskOnly => vec![0],
    };
    let mut total = 0.0;
    for &k in columns {
        for &i in &rows {
            let mut pred = coeffs.intercept[i];
            for j in 0..2 * p {
                let c = coeffs.theta(i, j);
                if c != 0.0 {
                    pred += c * design.z[(j, k)];
                }
            }
            let e = design.x[(i, k)] - pred;
            total += e * e;
        }
    }
    total / (columns.len() * rows.len()) as f64
}

/// Scores every `(α, λ)` grid point by fold-averaged validation error.
///
/// λ grids are anchored at λmax of the full design, one grid per α, and
/// shared by all folds. Fits along each grid are warm-started.
pub fn cross_validate(
    design: &DesignMatrices,
    mask: &ConstraintMask,
    settings: &CvSettings,
    plan: &FoldPlan,
) -> Result<CvResult> {
    if settings.alphas.is_empty() {
        return Err(Error::InvalidConfig("alpha grid is empty".into()));
    }
    if plan.folds.is_empty() {
        return Err(Error::InvalidConfig("fold plan is empty".into()));
    }
    for (f, fold) in plan.folds.iter().enumerate() {
        if fold.train.len() < 2 {
            return Err(Error::InvalidConfig(format!(
                "fold {f} has {} training columns, at least 2 required",
                fold.train.len()
            )));
        }
        if fold.validation.is_empty() {
            return Err(Error::InvalidConfig(format!("fold {f} has no validation columns")));
        }
        if fold.validation.iter().any(|v| fold.train.contains(v)) {
            return Err(Error::InvalidConfig(format!(
                "fold {f} validates on a training column"
            )));
        }
    }

    let mut grids = Vec::with_capacity(settings.alphas.len());
    for &alpha in &settings.alphas {
        let cfg = SolverConfig {
            alpha,
            ..settings.solver
        };
        cfg.validate()?;
        let lambdas = match &settings.lambdas {
            Some(l) if l.is_empty() => {
                return Err(Error::InvalidConfig("lambda grid is empty".into()))
            }
            Some(l) => l.clone(),
            None => {
                if settings.n_lambdas == 0 {
                    return Err(Error::InvalidConfig("n_lambdas must be positive".into()));
                }
                if !(settings.lambda_min_ratio > 0.0 && settings.lambda_min_ratio < 1.0) {
                    return Err(Error::InvalidConfig(format!(
                        "lambda_min_ratio must lie in (0, 1), got {}",
                        settings.lambda_min_ratio
                    )));
                }
                let lmax = solver::lambda_max(design, mask, alpha, cfg.standardize)?;
                solver::lambda_grid(lmax, settings.n_lambdas, settings.lambda_min_ratio)
            }
        };
        grids.push((cfg, lambdas));
    }

    let cells: Vec<(usize, usize)> = (0..grids.len())
        .flat_map(|a| (0..plan.folds.len()).map(move |f| (a, f)))
        .collect();
    let scores: Vec<Vec<f64>> = cells
        .par_iter()
        .map(|&(a, f)| -> Result<Vec<f64>> {
            let (cfg, lambdas) = &grids[a];
            let fold = &plan.folds[f];
            let train = design.select_columns(&fold.train)?;
            let path = solver::fit_lambdas(&train, mask, cfg, lambdas)?;
            Ok(path
                .iter()
                .map(|pt| validation_error(design, &pt.coefficients, &fold.validation, settings.scoring))
                .collect())
        })
        .collect::<Result<_>>()?;

    let n_folds = plan.folds.len();
    let mut grid = Vec::new();
    let mut mean_cv_error = Vec::new();
    let mut sd_cv_error = Vec::new();
    for (a, (cfg, lambdas)) in grids.iter().enumerate() {
        for (l, &lambda) in lambdas.iter().enumerate() {
            let errs: Vec<f64> = (0..n_folds).map(|f| scores[a * n_folds + f][l]).collect();
            let mean = errs.iter().sum::<f64>() / n_folds as f64;
            let sd = if n_folds > 1 {
                (errs.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / (n_folds - 1) as f64).sqrt()
            } else {
                0.0
            };
            grid.push(GridPoint {
                alpha: cfg.alpha,
                lambda,
            });
            mean_cv_error.push(mean);
            sd_cv_error.push(sd);
        }
    }

    let mut best = 0;
    for (i, &m) in mean_cv_error.iter().enumerate() {
        if m < mean_cv_error[best] {
            best = i;
        }
    }
    let cutoff = mean_cv_error[best] + sd_cv_error[best] / (n_folds as f64).sqrt();
    let best_alpha = grid[best].alpha;
    let best_1se = (0..grid.len())
        .filter(|&i| grid[i].alpha == best_alpha)
        .filter(|&i| mean_cv_error[i] <= cutoff)
        .max_by(|&a, &b| {
            grid[a]
                .lambda
                .total_cmp(&grid[b].lambda)
                .then(b.cmp(&a))
        })
        .unwrap_or(best);

    Ok(CvResult {
        grid,
        mean_cv_error,
        sd_cv_error,
        best,
        best_1se,
        n_folds,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn kfold_block_sizes() {
        let plan = make_folds(23, 5, FoldScheme::KFoldContiguous).unwrap();
        let sizes: Vec<usize> = plan.folds.iter().map(|f| f.validation.len()).collect();
        assert_eq!(sizes, vec![5, 5, 5, 4, 4]);
    }

    #[test]
    fn kfold_leave_one_out() {
        let plan = make_folds(10, 10, FoldScheme::KFoldContiguous).unwrap();
        for (i, f) in plan.folds.iter().enumerate() {
            assert_eq!(f.validation, vec![i]);
            assert_eq!(f.train.len(), 9);
        }
    }

    #[test]
    fn rolling_origin_respects_time() {
        let plan = make_folds(20, 4, FoldScheme::RollingOrigin).unwrap();
        assert_eq!(plan.folds.len(), 4);
        for f in &plan.folds {
            let first_val = f.validation[0];
            assert!(f.train.iter().all(|&t| t < first_val));
            assert_eq!(*f.train.last().unwrap() + 1, first_val);
        }
        let vals: Vec<usize> = plan.folds.iter().flat_map(|f| f.validation.clone()).collect();
        assert!(vals.windows(2).all(|w| w[1] == w[0] + 1));
        assert_eq!(*vals.last().unwrap(), 19);
    }

    #[test]
    fn fold_count_range() {
        assert!(make_folds(10, 1, FoldScheme::KFoldContiguous).is_err());
        assert!(make_folds(10, 11, FoldScheme::KFoldContiguous).is_err());
        assert!(make_folds(10, 10, FoldScheme::RollingOrigin).is_err());
    }

    proptest! {
        #[test]
        fn kfold_partitions(te in 2usize..80, k_raw in 2usize..80) {
            let k = 2 + k_raw % (te - 1);
            let plan = make_folds(te, k, FoldScheme::KFoldContiguous).unwrap();
            let mut all: Vec<usize> = plan.folds.iter().flat_map(|f| f.validation.clone()).collect();
            all.sort();
            prop_assert_eq!(all, (0..te).collect::<Vec<_>>());
            for f in &plan.folds {
                prop_assert!(!f.train.is_empty() && !f.validation.is_empty());
                prop_assert!(f.validation.iter().all(|v| !f.train.contains(v)));
                prop_assert_eq!(f.train.len() + f.validation.len(), te);
            }
        }

        #[test]
        fn rolling_disjoint_terminal(te in 3usize..80, k_raw in 2usize..80) {
            let k = 2 + k_raw % (te - 2);
            let plan = make_folds(te, k, FoldScheme::RollingOrigin).unwrap();
            for f in &plan.folds {
                prop_assert!(!f.train.is_empty() && !f.validation.is_empty());
                prop_assert!(f.train.iter().max().unwrap() < f.validation.iter().min().unwrap());
            }
        }
    }
}
