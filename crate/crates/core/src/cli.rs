//! The `stn` command line: ingestion, estimation, selection, graphs and
//! exports, plus a synthetic-recovery harness.
//!
//! Data artifacts go to the `--out` directory under fixed names;
//! diagnostics go to stderr. Exit code 1 signals a pipeline error, 2 a bad
//! invocation.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::graph::{compact_graph, export_adjacency, export_dot, extended_graph, is_acyclic, neighborhoods};
use crate::importance::{importance_scale, ImportanceScale, Normalization};
use crate::model::{
    check_coefficients, default_mask, set_pd_contemporaneous_out, set_pd_self_lag, ConstraintMask, MaskJson,
};
use crate::panel::{apply_logit, build_design, load_csv, standardize, DesignMatrices, TimeSeriesPanel};
use crate::selection::{cross_validate, make_folds, CvResult, CvSettings, FoldScheme, Scoring};
use crate::solver::{self, CoefficientReport, SolverConfig};
use crate::synth::{self, edge_metrics, RecoveryMetrics, SynthSpec};

#[derive(Debug, Parser)]
#[command(name = "stn", version, about = "Stress testing network reconstruction")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Estimate the network from a CSV panel and write all artifacts.
    Reconstruct(ReconstructArgs),
    /// Write the importance scale of macro shocks on the risk parameter.
    Importance(ImportanceArgs),
    /// Simulate panels with known structure and score edge recovery.
    SynthEval(SynthEvalArgs),
    /// Write one simulated panel and its true coefficients.
    Synth(SynthArgs),
    /// Re-run a reconstruction from its manifest.
    Rerun(RerunArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Penalty {
    Lasso,
    Enet,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SchemeArg {
    Kfold,
    Rolling,
}

impl From<SchemeArg> for FoldScheme {
    fn from(s: SchemeArg) -> Self {
        match s {
            SchemeArg::Kfold => FoldScheme::KFoldContiguous,
            SchemeArg::Rolling => FoldScheme::RollingOrigin,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SelectRule {
    Min,
    #[value(name = "1se")]
    #[serde(rename = "1se")]
    OneSe,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScoreTarget {
    All,
    Risk,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum NormalizeArg {
    Raw,
    Unitmax,
    Unitsum,
}

impl From<NormalizeArg> for Normalization {
    fn from(n: NormalizeArg) -> Self {
        match n {
            NormalizeArg::Raw => Normalization::Raw,
            NormalizeArg::Unitmax => Normalization::UnitMax,
            NormalizeArg::Unitsum => Normalization::UnitSum,
        }
    }
}

/// `--lambda` value: a number or `cv`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LambdaRequest {
    Cv,
    Fixed(f64),
}

fn parse_lambda(s: &str) -> std::result::Result<LambdaRequest, String> {
    if s.eq_ignore_ascii_case("cv") {
        return Ok(LambdaRequest::Cv);
    }
    match s.parse::<f64>() {
        Ok(v) if v >= 0.0 && v.is_finite() => Ok(LambdaRequest::Fixed(v)),
        _ => Err(format!("expected a non-negative number or 'cv', got '{s}'")),
    }
}

fn parse_alpha(s: &str) -> std::result::Result<f64, String> {
    match s.parse::<f64>() {
        Ok(v) if v > 0.0 && v <= 1.0 => Ok(v),
        _ => Err(format!("alpha must lie in (0, 1], got '{s}'")),
    }
}

fn parse_ratio(s: &str) -> std::result::Result<f64, String> {
    match s.parse::<f64>() {
        Ok(v) if v > 0.0 && v < 1.0 => Ok(v),
        _ => Err(format!("expected a value in (0, 1), got '{s}'")),
    }
}

#[derive(Debug, Clone, Args)]
struct InputArgs {
    /// CSV panel: period label column first, one column per variable.
    #[arg(long)]
    input: PathBuf,
    /// Name of the risk-parameter column.
    #[arg(long)]
    risk: String,
    /// Apply the logit transform to the risk parameter (values must lie in (0, 1)).
    #[arg(long)]
    logit: bool,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct EstimationArgs {
    /// Elastic-Net mixing used with `--penalty enet`.
    #[arg(long, default_value_t = 0.5, value_parser = parse_alpha)]
    pub alpha: f64,
    /// Penalty level, or `cv` for cross-validation.
    #[arg(long, default_value = "cv", value_parser = parse_lambda)]
    pub lambda: LambdaRequest,
    #[arg(long, default_value_t = 5)]
    pub folds: usize,
    #[arg(long, value_enum, default_value_t = SchemeArg::Kfold)]
    pub scheme: SchemeArg,
    #[arg(long, default_value_t = 50)]
    pub n_lambdas: usize,
    #[arg(long, default_value_t = 1e-3, value_parser = parse_ratio)]
    pub lambda_min_ratio: f64,
    /// Rule used to pick λ from the cross-validation curve.
    #[arg(long, value_enum, default_value_t = SelectRule::Min)]
    pub select: SelectRule,
    /// Responses scored in cross-validation.
    #[arg(long, value_enum, default_value_t = ScoreTarget::All)]
    pub score: ScoreTarget,
    /// Let the risk parameter depend on its own lag.
    #[arg(long)]
    pub allow_pd_self_lag: bool,
    /// Let the contemporaneous risk parameter enter macro equations.
    #[arg(long)]
    pub allow_pd_contemporaneous_out: bool,
    #[arg(long, default_value_t = 1e-7)]
    pub tol: f64,
    #[arg(long, default_value_t = 10_000)]
    pub max_sweeps: usize,
    /// Penalize raw rather than standardized coefficients.
    #[arg(long)]
    pub no_standardize: bool,
    /// Edge threshold on |coefficient| (0 keeps every nonzero).
    #[arg(long, default_value_t = 0.0)]
    pub threshold: f64,
}

impl EstimationArgs {
    fn mask(&self, p: usize) -> Result<ConstraintMask> {
        let mask = set_pd_self_lag(&default_mask(p)?, self.allow_pd_self_lag);
        Ok(set_pd_contemporaneous_out(&mask, self.allow_pd_contemporaneous_out))
    }

    fn solver(&self, alpha: f64) -> SolverConfig {
        SolverConfig {
            alpha,
            lambda: 0.0,
            tol: self.tol,
            max_sweeps: self.max_sweeps,
            standardize: !self.no_standardize,
        }
    }

    fn cv_settings(&self, alpha: f64) -> CvSettings {
        CvSettings {
            alphas: vec![alpha],
            n_lambdas: self.n_lambdas,
            lambda_min_ratio: self.lambda_min_ratio,
            lambdas: None,
            scoring: match self.score {
                ScoreTarget::All => Scoring::AllResponses,
                ScoreTarget::Risk => Scoring::RiskOnly,
            },
            solver: self.solver(alpha),
        }
    }
}

#[derive(Debug, Clone, Args)]
struct ReconstructArgs {
    #[command(flatten)]
    input: InputArgs,
    #[arg(long, value_enum, default_value_t = Penalty::Enet)]
    penalty: Penalty,
    #[command(flatten)]
    est: EstimationArgs,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Clone, Args)]
struct ImportanceArgs {
    #[command(flatten)]
    input: InputArgs,
    #[arg(long, value_enum, default_value_t = Penalty::Enet)]
    penalty: Penalty,
    #[command(flatten)]
    est: EstimationArgs,
    #[arg(long, value_enum, default_value_t = NormalizeArg::Unitmax)]
    normalize: NormalizeArg,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum PenaltySet {
    Lasso,
    Enet,
    Both,
}

#[derive(Debug, Clone, Args)]
struct SynthEvalArgs {
    #[arg(long, value_parser = clap::value_parser!(u64).range(2..))]
    p: u64,
    #[arg(long = "T", value_parser = clap::value_parser!(u64).range(3..))]
    t: u64,
    #[arg(long, default_value_t = 0.15)]
    density: f64,
    #[arg(long, default_value_t = 0.05)]
    noise: f64,
    #[arg(long, default_value_t = 0.4)]
    coef_low: f64,
    #[arg(long, default_value_t = 0.8)]
    coef_high: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..))]
    replicates: u64,
    #[arg(long, value_enum, default_value_t = PenaltySet::Both)]
    penalty: PenaltySet,
    #[command(flatten)]
    est: EstimationArgs,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Clone, Args)]
struct SynthArgs {
    #[arg(long, value_parser = clap::value_parser!(u64).range(2..), default_value_t = 6)]
    p: u64,
    #[arg(long = "T", value_parser = clap::value_parser!(u64).range(3..), default_value_t = 100)]
    t: u64,
    #[arg(long, default_value_t = 0.15)]
    density: f64,
    #[arg(long, default_value_t = 0.05)]
    noise: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Case-study layout: 14 named variables, 24 quarters from 2009Q2, PD in (0, 1).
    #[arg(long)]
    case_study: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Clone, Args)]
struct RerunArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputRecord {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldRecord {
    pub scheme: SchemeArg,
    pub k: usize,
}

/// Everything needed to reproduce a reconstruction run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub artifact: String,
    pub version: String,
    pub input: InputRecord,
    pub risk_variable: String,
    pub transform: String,
    pub mask: MaskJson,
    pub penalty: Penalty,
    pub alpha: f64,
    pub lambda: f64,
    pub lambda_selection: String,
    pub fold_plan: Option<FoldRecord>,
    pub solver: SolverConfig,
    pub estimation: EstimationArgs,
    pub seed: Option<u64>,
}

/// Entry point; returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let result = with_thread_cap(|| match cli.command {
        Command::Reconstruct(a) => cmd_reconstruct(&a),
        Command::Importance(a) => cmd_importance(&a),
        Command::SynthEval(a) => cmd_synth_eval(&a),
        Command::Synth(a) => cmd_synth(&a),
        Command::Rerun(a) => cmd_rerun(&a),
    });
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

/// Runs `f` on a pool capped by `STN_THREADS` (unset or 0: rayon's default).
fn with_thread_cap<F: FnOnce() -> Result<()> + Send>(f: F) -> Result<()> {
    let cap = std::env::var("STN_THREADS")
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .unwrap_or(0);
    if cap == 0 {
        return f();
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cap)
        .build()
        .map_err(|e| Error::InvalidConfig(format!("thread pool: {e}")))?;
    pool.install(f)
}

fn effective_alpha(penalty: Penalty, alpha: f64) -> f64 {
    match penalty {
        Penalty::Lasso => 1.0,
        Penalty::Enet => alpha,
    }
}

fn read_panel(path: &Path, risk: &str, logit: bool) -> Result<(TimeSeriesPanel, Vec<u8>)> {
    let bytes = fs::read(path)?;
    let mut panel = load_csv(bytes.as_slice(), risk)?;
    if logit {
        panel = apply_logit(&panel)?;
    }
    Ok((panel, bytes))
}

struct Selection {
    lambda: f64,
    how: String,
    cv: Option<CvResult>,
    folds: Option<FoldRecord>,
}

fn select_lambda(
    design: &DesignMatrices,
    mask: &ConstraintMask,
    est: &EstimationArgs,
    alpha: f64,
) -> Result<Selection> {
    match est.lambda {
        LambdaRequest::Fixed(v) => Ok(Selection {
            lambda: v,
            how: "fixed".into(),
            cv: None,
            folds: None,
        }),
        LambdaRequest::Cv => {
            let plan = make_folds(design.te, est.folds, est.scheme.into())?;
            let cv = cross_validate(design, mask, &est.cv_settings(alpha), &plan)?;
            let (point, how) = match est.select {
                SelectRule::Min => (cv.best_point(), "cv-min"),
                SelectRule::OneSe => (cv.best_1se_point(), "cv-1se"),
            };
            Ok(Selection {
                lambda: point.lambda,
                how: how.into(),
                cv: Some(cv),
                folds: Some(FoldRecord {
                    scheme: est.scheme,
                    k: est.folds,
                }),
            })
        }
    }
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

fn write_csv_with<F>(path: &Path, f: F) -> Result<()>
where
    F: FnOnce(&mut Vec<u8>) -> Result<()>,
{
    let mut buf = Vec::new();
    f(&mut buf)?;
    fs::write(path, buf)?;
    Ok(())
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

struct ReconstructPlan<'a> {
    input: &'a Path,
    risk: &'a str,
    logit: bool,
    penalty: Penalty,
    est: &'a EstimationArgs,
    out: &'a Path,
    expected_hash: Option<&'a str>,
}

fn reconstruct(plan: ReconstructPlan<'_>) -> Result<()> {
    let est = plan.est;
    let (panel, bytes) = read_panel(plan.input, plan.risk, plan.logit)?;
    let hash = sha256_hex(&bytes);
    if let Some(expected) = plan.expected_hash {
        if expected != hash {
            return Err(Error::InvalidConfig(format!(
                "input {} does not match the manifest hash",
                plan.input.display()
            )));
        }
    }
    let names = panel.names();
    let mask = est.mask(panel.p())?;
    let design = build_design(&panel)?;
    let alpha = effective_alpha(plan.penalty, est.alpha);
    let selection = select_lambda(&design, &mask, est, alpha)?;
    let config = SolverConfig {
        lambda: selection.lambda,
        ..est.solver(alpha)
    };
    config.validate()?;

    let (coeffs, report) = solver::fit(&design, &mask, &config)?;
    let violations = check_coefficients(&coeffs, &mask)?;
    if !violations.is_empty() {
        return Err(Error::InvalidConfig(format!(
            "estimate violates the constraint mask at {} entries",
            violations.len()
        )));
    }
    if !report.converged {
        eprintln!(
            "warning: coordinate descent hit max_sweeps = {} before converging",
            config.max_sweeps
        );
    }

    let extended = extended_graph(&coeffs, &names, est.threshold)?;
    let compact = compact_graph(&extended)?;
    let (scale, _) = importance_scale(&panel, &mask, &config, Normalization::UnitMax)?;

    fs::create_dir_all(plan.out)?;
    let out = plan.out;
    write_json(
        &out.join("coefficients.json"),
        &CoefficientReport::new(names.clone(), &coeffs, &config, &report),
    )?;
    fs::write(out.join("extended.dot"), export_dot(&extended))?;
    fs::write(out.join("compact.dot"), export_dot(&compact))?;
    fs::write(out.join("adjacency_extended.csv"), export_adjacency(&extended)?.1)?;
    fs::write(out.join("adjacency_compact.csv"), export_adjacency(&compact)?.1)?;
    write_json(&out.join("graph_extended.json"), &extended)?;
    write_json(&out.join("graph_compact.json"), &compact)?;
    write_csv_with(&out.join("importance.csv"), |b| scale.write_csv(b))?;
    if let Some(cv) = &selection.cv {
        write_csv_with(&out.join("cv.csv"), |b| cv.write_csv(b))?;
    }
    let manifest = RunManifest {
        artifact: env!("CARGO_PKG_NAME").into(),
        version: env!("CARGO_PKG_VERSION").into(),
        input: InputRecord {
            path: plan.input.display().to_string(),
            sha256: hash,
        },
        risk_variable: plan.risk.into(),
        transform: if plan.logit { "logit" } else { "none" }.into(),
        mask: mask.to_json(),
        penalty: plan.penalty,
        alpha,
        lambda: selection.lambda,
        lambda_selection: selection.how.clone(),
        fold_plan: selection.folds.clone(),
        solver: config,
        estimation: est.clone(),
        seed: None,
    };
    write_json(&out.join("manifest.json"), &manifest)?;

    eprintln!(
        "lambda = {} ({}), alpha = {}, objective = {:.6e}, kkt = {:.3e}, sweeps = {}",
        selection.lambda,
        selection.how,
        alpha,
        report.objective_value,
        report.kkt_residual,
        report.sweeps_used
    );
    eprintln!(
        "extended graph: {} edges; compact graph: {} edges",
        extended.edges.len(),
        compact.edges.len()
    );
    let acyc = is_acyclic(&compact, true);
    if let Some(w) = acyc.witness {
        let labels: Vec<&str> = w.iter().map(|&i| compact.nodes[i].label.as_str()).collect();
        eprintln!("warning: compact graph has a cycle: {}", labels.join(" -> "));
    }
    let risk_out = compact.risk_out_edges();
    if !risk_out.is_empty() {
        eprintln!("warning: {} edges leave the risk parameter", risk_out.len());
    }
    let ne = neighborhoods(&compact, 0)?;
    let cands: Vec<&str> = ne.ne.iter().map(|&i| compact.nodes[i].label.as_str()).collect();
    eprintln!("neighbors of {}: [{}]", names[0], cands.join(", "));
    Ok(())
}

fn cmd_reconstruct(a: &ReconstructArgs) -> Result<()> {
    reconstruct(ReconstructPlan {
        input: &a.input.input,
        risk: &a.input.risk,
        logit: a.input.logit,
        penalty: a.penalty,
        est: &a.est,
        out: &a.out,
        expected_hash: None,
    })
}

fn cmd_rerun(a: &RerunArgs) -> Result<()> {
    let text = fs::read_to_string(&a.manifest)?;
    let m: RunManifest = serde_json::from_str(&text)?;
    let logit = match m.transform.as_str() {
        "logit" => true,
        "none" => false,
        other => return Err(Error::InvalidConfig(format!("unknown transform '{other}'"))),
    };
    let input = PathBuf::from(&m.input.path);
    reconstruct(ReconstructPlan {
        input: &input,
        risk: &m.risk_variable,
        logit,
        penalty: m.penalty,
        est: &m.estimation,
        out: &a.out,
        expected_hash: Some(&m.input.sha256),
    })
}

/// Importance scale with λ chosen on the standardized panel.
fn compute_importance(
    panel: &TimeSeriesPanel,
    penalty: Penalty,
    est: &EstimationArgs,
    normalization: Normalization,
) -> Result<(ImportanceScale, f64)> {
    let mask = est.mask(panel.p())?;
    let alpha = effective_alpha(penalty, est.alpha);
    let std_design = build_design(&standardize(panel).panel)?;
    let selection = select_lambda(&std_design, &mask, est, alpha)?;
    let config = SolverConfig {
        lambda: selection.lambda,
        ..est.solver(alpha)
    };
    let (scale, _) = importance_scale(panel, &mask, &config, normalization)?;
    Ok((scale, selection.lambda))
}

fn cmd_importance(a: &ImportanceArgs) -> Result<()> {
    let (panel, _) = read_panel(&a.input.input, &a.input.risk, a.input.logit)?;
    let (scale, lambda) = compute_importance(&panel, a.penalty, &a.est, a.normalize.into())?;
    fs::create_dir_all(&a.out)?;
    write_csv_with(&a.out.join("importance.csv"), |b| scale.write_csv(b))?;
    if scale.all_zero {
        eprintln!(
            "warning: every coefficient of {} is zero at lambda = {lambda}; scores reported raw",
            panel.names()[0]
        );
    } else {
        eprintln!("lambda = {lambda}, normalization = {:?}", scale.normalization);
    }
    Ok(())
}

#[derive(Debug, Clone, Serialize)]
struct ReplicateRecord {
    replicate: u64,
    seed: u64,
    penalty: Penalty,
    alpha: f64,
    lambda: f64,
    metrics: RecoveryMetrics,
}

fn mean_sd(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let sd = if v.len() > 1 {
        (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    (mean, sd)
}

pub fn median(v: &[f64]) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len();
    if n == 0 {
        return f64::NAN;
    }
    if n % 2 == 1 {
        s[n / 2]
    } else {
        0.5 * (s[n / 2 - 1] + s[n / 2])
    }
}

fn cmd_synth_eval(a: &SynthEvalArgs) -> Result<()> {
    let p = a.p as usize;
    let penalties: Vec<Penalty> = match a.penalty {
        PenaltySet::Lasso => vec![Penalty::Lasso],
        PenaltySet::Enet => vec![Penalty::Enet],
        PenaltySet::Both => vec![Penalty::Lasso, Penalty::Enet],
    };
    let mut records = Vec::new();
    for r in 0..a.replicates {
        let seed = a.seed.wrapping_add(r);
        let mut spec = SynthSpec::new(p, a.t as usize, seed).with_noise(a.noise);
        spec.edge_density = a.density;
        spec.coef_low = a.coef_low;
        spec.coef_high = a.coef_high;
        let draw = synth::generate(&spec)?;
        let mask = a.est.mask(p)?;
        let design = build_design(&draw.panel)?;
        for &penalty in &penalties {
            let alpha = effective_alpha(penalty, a.est.alpha);
            let sel = select_lambda(&design, &mask, &a.est, alpha)?;
            let config = SolverConfig {
                lambda: sel.lambda,
                ..a.est.solver(alpha)
            };
            let (coeffs, _) = solver::fit(&design, &mask, &config)?;
            let metrics = edge_metrics(&draw.truth, &coeffs, &mask, a.est.threshold)?;
            records.push(ReplicateRecord {
                replicate: r,
                seed,
                penalty,
                alpha,
                lambda: sel.lambda,
                metrics,
            });
        }
    }

    fs::create_dir_all(&a.out)?;
    write_json(&a.out.join("metrics.json"), &records)?;
    write_csv_with(&a.out.join("replicates.csv"), |buf| {
        let mut w = csv::Writer::from_writer(buf);
        w.write_record([
            "replicate", "seed", "penalty", "alpha", "lambda", "tp", "fp", "fn", "precision", "recall", "f1",
            "sign_agreement",
        ])?;
        for rec in &records {
            let m = &rec.metrics;
            w.write_record([
                rec.replicate.to_string(),
                rec.seed.to_string(),
                penalty_name(rec.penalty).into(),
                rec.alpha.to_string(),
                rec.lambda.to_string(),
                m.combined.true_positive.to_string(),
                m.combined.false_positive.to_string(),
                m.combined.false_negative.to_string(),
                m.precision.to_string(),
                m.recall.to_string(),
                m.f1.to_string(),
                m.sign_agreement.map(|s| s.to_string()).unwrap_or_default(),
            ])?;
        }
        w.flush()?;
        Ok(())
    })?;
    write_csv_with(&a.out.join("summary.csv"), |buf| {
        let mut w = csv::Writer::from_writer(buf);
        w.write_record([
            "penalty",
            "replicates",
            "precision_mean",
            "precision_sd",
            "recall_mean",
            "recall_sd",
            "f1_mean",
            "f1_sd",
            "f1_median",
        ])?;
        for &penalty in &penalties {
            let rows: Vec<&RecoveryMetrics> = records
                .iter()
                .filter(|r| r.penalty == penalty)
                .map(|r| &r.metrics)
                .collect();
            let pr: Vec<f64> = rows.iter().map(|m| m.precision).collect();
            let rc: Vec<f64> = rows.iter().map(|m| m.recall).collect();
            let f1: Vec<f64> = rows.iter().map(|m| m.f1).collect();
            let (pm, ps) = mean_sd(&pr);
            let (rm, rs) = mean_sd(&rc);
            let (fm, fs_) = mean_sd(&f1);
            w.write_record([
                penalty_name(penalty).to_string(),
                rows.len().to_string(),
                pm.to_string(),
                ps.to_string(),
                rm.to_string(),
                rs.to_string(),
                fm.to_string(),
                fs_.to_string(),
                median(&f1).to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    })?;
    eprintln!("wrote {} replicate rows to {}", records.len(), a.out.display());
    Ok(())
}

fn penalty_name(p: Penalty) -> &'static str {
    match p {
        Penalty::Lasso => "lasso",
        Penalty::Enet => "enet",
    }
}

fn cmd_synth(a: &SynthArgs) -> Result<()> {
    let draw = if a.case_study {
        synth::case_study_panel(a.seed)?
    } else {
        let mut spec = SynthSpec::new(a.p as usize, a.t as usize, a.seed).with_noise(a.noise);
        spec.edge_density = a.density;
        synth::generate(&spec)?
    };
    fs::create_dir_all(&a.out)?;
    write_csv_with(&a.out.join("panel.csv"), |b| draw.panel.write_csv(b))?;
    write_json(
        &a.out.join("truth.json"),
        &CoefficientReport::unfitted(draw.panel.names(), &draw.truth),
    )?;
    eprintln!(
        "spectral radius {:.4}, condition number {:.3}, accepted after {} draws",
        draw.spectral_radius, draw.condition_number, draw.attempts
    );
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lambda_flag_parsing() {
        assert_eq!(parse_lambda("cv"), Ok(LambdaRequest::Cv));
        assert_eq!(parse_lambda("0.25"), Ok(LambdaRequest::Fixed(0.25)));
        assert!(parse_lambda("-1").is_err());
        assert!(parse_lambda("abc").is_err());
    }

    #[test]
    fn bad_flags_exit_2() {
        assert_eq!(run(["stn", "synth-eval", "--p", "1", "--T", "50", "--out", "/tmp/x"]), 2);
        assert_eq!(run(["stn", "reconstruct", "--input", "a.csv"]), 2);
        assert_eq!(run(["stn", "bogus"]), 2);
    }

    #[test]
    fn missing_input_exit_1() {
        let dir = tempfile::tempdir().unwrap();
        let code = run([
            "stn".as_ref(),
            "reconstruct".as_ref(),
            "--input".as_ref(),
            dir.path().join("nope.csv").as_os_str(),
            "--risk".as_ref(),
            "PD".as_ref(),
            "--out".as_ref(),
            dir.path().as_os_str(),
        ]);
        assert_eq!(code, 1);
    }

    #[test]
    fn median_values() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
    }
}
