//! Shared fixtures and independent oracles for the integration tests.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use stn_core::model::{CoefficientSet, ConstraintMask};
use stn_core::panel::{build_design, DesignMatrices, TimeSeriesPanel, VariableMeta};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn names(p: usize) -> Vec<String> {
    let mut v = vec!["PD".to_string()];
    v.extend((1..p).map(|i| format!("X{i}")));
    v
}

/// Gaussian random walk-free panel: a weakly persistent AR(1) per series
/// with independent shocks, so every column of the design is informative.
pub fn random_panel(seed: u64, p: usize, t: usize) -> TimeSeriesPanel {
    let mut r = rng(seed);
    let mut values = DMatrix::zeros(p, t);
    for i in 0..p {
        let rho: f64 = r.random_range(-0.5..0.8);
        let scale: f64 = r.random_range(0.5..3.0);
        let mut prev: f64 = StandardNormal.sample(&mut r);
        for k in 0..t {
            let e: f64 = StandardNormal.sample(&mut r);
            prev = rho * prev + e;
            values[(i, k)] = scale * prev + (i as f64);
        }
    }
    panel_from(values)
}

pub fn panel_from(values: DMatrix<f64>) -> TimeSeriesPanel {
    let (p, t) = values.shape();
    let mut vars = vec![VariableMeta::risk("PD")];
    vars.extend((1..p).map(|i| VariableMeta::macro_var(format!("X{i}"))));
    let labels = (1..=t).map(|k| format!("t{k}")).collect();
    TimeSeriesPanel::new(vars, values, labels).unwrap()
}

pub fn random_design(seed: u64, p: usize, te: usize) -> DesignMatrices {
    build_design(&random_panel(seed, p, te + 1)).unwrap()
}

/// Constrained OLS: for each row, normal equations of the response on an
/// intercept plus the unfrozen predictors, solved by dense LU.
pub fn constrained_ols(design: &DesignMatrices, mask: &ConstraintMask) -> CoefficientSet {
    let p = design.p();
    let te = design.te;
    let mut out = CoefficientSet::zeros(p);
    for i in 0..p {
        let free = mask.free_columns(i);
        let m = free.len() + 1;
        let a = DMatrix::from_fn(te, m, |t, c| if c == 0 { 1.0 } else { design.z[(free[c - 1], t)] });
        let y = DVector::from_fn(te, |t, _| design.x[(i, t)]);
        let gram = a.transpose() * &a;
        let rhs = a.transpose() * y;
        let sol = gram.lu().solve(&rhs).expect("normal equations are singular");
        out.intercept[i] = sol[0];
        for (c, &j) in free.iter().enumerate() {
            out.set_theta(i, j, sol[c + 1]);
        }
    }
    out
}

/// Objective `½‖X − b − ΘZ‖² + λ Σ [½(1−α)β² + α|β|]` with `β = θ·w`,
/// evaluated directly from its definition.
pub fn objective_oracle(design: &DesignMatrices, c: &CoefficientSet, lambda: f64, alpha: f64, standardize: bool) -> f64 {
    let p = design.p();
    let mut rss = 0.0;
    for i in 0..p {
        for t in 0..design.te {
            let mut fit = c.intercept[i];
            for j in 0..2 * p {
                fit += c.theta(i, j) * design.z[(j, t)];
            }
            rss += (design.x[(i, t)] - fit).powi(2);
        }
    }
    let mut pen = 0.0;
    for j in 0..2 * p {
        let w = if standardize { sample_sd(design.z.row(j).iter().copied()) } else { 1.0 };
        for i in 0..p {
            let b = c.theta(i, j) * w;
            pen += 0.5 * (1.0 - alpha) * b * b + alpha * b.abs();
        }
    }
    0.5 * rss + lambda * pen
}

pub fn sample_sd(v: impl Iterator<Item = f64> + Clone) -> f64 {
    let n = v.clone().count() as f64;
    let mean = v.clone().sum::<f64>() / n;
    (v.map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
}

/// Gelfand estimate `‖Mᵏ‖^{1/k}` of the spectral radius.
pub fn gelfand_radius(m: &DMatrix<f64>, k: u32) -> f64 {
    let mut acc = DMatrix::identity(m.nrows(), m.ncols());
    let mut log_scale = 0.0;
    for _ in 0..k {
        acc = &acc * m;
        let n = acc.norm();
        if n == 0.0 {
            return 0.0;
        }
        acc /= n;
        log_scale += n.ln();
    }
    (log_scale / k as f64).exp()
}

pub fn median(v: &[f64]) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len();
    if n % 2 == 1 {
        s[n / 2]
    } else {
        0.5 * (s[n / 2 - 1] + s[n / 2])
    }
}
