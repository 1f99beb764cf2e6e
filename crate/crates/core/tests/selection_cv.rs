mod common;

use nalgebra::DMatrix;
use rand_distr::{Distribution, StandardNormal};

use stn_core::model::{default_mask, CoefficientSet};
use stn_core::panel::build_design;
use stn_core::selection::{cross_validate, make_folds, CvSettings, FoldScheme, Scoring};
use stn_core::synth::{simulate, SynthSpec};

use common::*;

#[test]
fn pure_noise_selects_heavy_shrinkage() {
    let n_lambdas = 50;
    let mut selected = Vec::new();
    for seed in 0..50 {
        let mut r = rng(1000 + seed);
        let values = DMatrix::from_fn(5, 61, |_, _| StandardNormal.sample(&mut r));
        let d = build_design(&panel_from(values)).unwrap();
        let mask = default_mask(5).unwrap();
        let plan = make_folds(d.te, 5, FoldScheme::KFoldContiguous).unwrap();
        let settings = CvSettings {
            n_lambdas,
            ..CvSettings::default()
        };
        let cv = cross_validate(&d, &mask, &settings, &plan).unwrap();
        selected.push(cv.best as f64);
    }
    let med = median(&selected);
    assert!(med < n_lambdas as f64 / 10.0, "median selected index {med}");
}

#[test]
fn strong_noiseless_signal_beats_the_null_model() {
    // persistent planted dynamics, all magnitudes 0.5; a random sparse draw
    // may have no lag loop and die out after one period
    let mut truth = CoefficientSet::zeros(5);
    truth.phi[(0, 1)] = 0.5;
    truth.phi[(1, 1)] = 0.5;
    truth.phi[(2, 1)] = -0.5;
    truth.phi[(3, 3)] = 0.5;
    truth.phi[(4, 3)] = 0.5;
    truth.psi[(4, 2)] = 0.5;
    for seed in 0..5 {
        let spec = SynthSpec::new(5, 30, seed).with_noise(0.0);
        let panel = simulate(&truth, &spec).unwrap();
        let d = build_design(&panel).unwrap();
        let mask = default_mask(5).unwrap();
        let plan = make_folds(d.te, 5, FoldScheme::KFoldContiguous).unwrap();
        let cv = cross_validate(&d, &mask, &CvSettings::default(), &plan).unwrap();
        let at_best = cv.mean_cv_error[cv.best];
        let at_max = cv.mean_cv_error[0];
        assert!(at_max >= 10.0 * at_best, "seed {seed}: {at_max} vs {at_best}");
    }
}

#[test]
fn single_grid_point_is_selected() {
    let d = random_design(3, 4, 30);
    let mask = default_mask(4).unwrap();
    let plan = make_folds(d.te, 3, FoldScheme::RollingOrigin).unwrap();
    let settings = CvSettings {
        lambdas: Some(vec![0.7]),
        ..CvSettings::default()
    };
    let cv = cross_validate(&d, &mask, &settings, &plan).unwrap();
    assert_eq!(cv.grid.len(), 1);
    assert_eq!((cv.best, cv.best_1se), (0, 0));
    assert_eq!(cv.best_point().lambda, 0.7);
}

#[test]
fn cv_is_deterministic_and_one_se_is_no_denser() {
    let d = random_design(9, 5, 50);
    let mask = default_mask(5).unwrap();
    let plan = make_folds(d.te, 5, FoldScheme::KFoldContiguous).unwrap();
    let settings = CvSettings {
        alphas: vec![1.0, 0.5],
        n_lambdas: 20,
        ..CvSettings::default()
    };
    let a = cross_validate(&d, &mask, &settings, &plan).unwrap();
    let b = cross_validate(&d, &mask, &settings, &plan).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.grid.len(), 40);
    let best = a.best_point();
    let one_se = a.best_1se_point();
    assert_eq!(best.alpha, one_se.alpha);
    assert!(one_se.lambda >= best.lambda);
    let min = a.mean_cv_error.iter().copied().fold(f64::INFINITY, f64::min);
    assert_eq!(a.mean_cv_error[a.best], min);
}

#[test]
fn risk_only_scoring_and_rolling_origin_run() {
    let d = random_design(10, 4, 40);
    let mask = default_mask(4).unwrap();
    let plan = make_folds(d.te, 4, FoldScheme::RollingOrigin).unwrap();
    let settings = CvSettings {
        scoring: Scoring::RiskOnly,
        n_lambdas: 10,
        ..CvSettings::default()
    };
    let cv = cross_validate(&d, &mask, &settings, &plan).unwrap();
    assert_eq!(cv.n_folds, 4);
    assert!(cv.mean_cv_error.iter().all(|e| e.is_finite() && *e >= 0.0));
    let mut buf = Vec::new();
    cv.write_csv(&mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert_eq!(text.lines().count(), 11);
}
