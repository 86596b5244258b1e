//! End-to-end orchestration: one config describes input, folds, nuisances,
//! basis, fairness criteria, solver route, and evaluation; the stages here
//! can run individually (the CLI persists artifacts between them) or as one
//! in-memory run (tests and the browser demo).

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::basis::{assemble, mean_column_value, BasisMatrix, BasisSource};
use crate::dataset::{load_csv, split, ColumnRoles, Dataset, SplitFolds, SplitPlan};
use crate::error::{FadeError, Result};
use crate::eval::{evaluate_predictions, select_min_norm, PerformanceProfile, RiskTarget};
use crate::fairness::{eval_fairness, FairnessMode, FairnessSpec, FairnessVector};
use crate::nuisance::{
    cross_fit, fit_builtin, fit_nuisance_model, ingest_external_scores, pseudo_outcomes, FitOptions,
    GlmModel, NuisanceFit, NuisanceTarget, PseudoOutcomes, DEFAULT_GAMMA,
};
use crate::sim::{generate, DgpSpec};
use crate::solver::{
    build_problem, predict_solution, seed_grid, solve_grid, solve_penalized, solve_risk_min,
    solve_unfair_min, FadeSolution, LambdaGrid, ProblemData, SolutionOrigin, DEFAULT_LAMBDA_AXIS,
};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InputConfig {
    Dgp(DgpSpec),
    Csv { path: PathBuf, roles: ColumnRoles, bounds: [f64; 2] },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScoreFiles {
    pub pi: PathBuf,
    pub mu0: PathBuf,
    #[serde(default)]
    pub nu0: Option<PathBuf>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NuisanceConfig {
    /// In-crate regressions fit on the nuisance folds (or cross-fit when the
    /// split plan asks for more than one fold).
    Builtin {
        #[serde(default = "default_gamma")]
        gamma: f64,
        #[serde(default)]
        options: FitOptions,
    },
    /// Externally computed per-row scores aligned with the target folds.
    External {
        train: ScoreFiles,
        #[serde(default)]
        test: Option<ScoreFiles>,
        #[serde(default = "default_gamma")]
        gamma: f64,
    },
}

fn default_gamma() -> f64 {
    DEFAULT_GAMMA
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BasisSpec {
    /// Constant column anchored at the training outcome mean.
    Mean,
    /// Raw feature or prior score column.
    Feature(String),
    /// Regression trained on the learning fold over the named covariates.
    Trained { label: String, covariates: Vec<String> },
    /// Externally computed predictor columns, one file per fold.
    File { name: String, train: PathBuf, test: PathBuf },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverConfig {
    /// Penalty-grid sweep; `axes` defaults to the standard axis per criterion.
    Grid {
        #[serde(default)]
        axes: Option<Vec<Vec<f64>>>,
    },
    /// Hard disparity budgets.
    RiskMin { epsilon: Vec<f64> },
    /// Minimum unfairness under a risk budget.
    UnfairMin {
        epsilon: f64,
        #[serde(default)]
        alpha: Option<Vec<f64>>,
    },
    /// Constrained solve, multiplier mapping, then a grid seeded around it.
    SeedThenGrid { epsilon: Vec<f64>, spread: Vec<f64> },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProxyKind {
    /// Doubly robust pseudo-outcome column (default).
    PseudoOutcome,
    /// Untreated outcome regression only.
    UntreatedRegression,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct EvalConfig {
    pub alpha: f64,
    /// Evaluate against the oracle untreated potential outcome (synthetic
    /// data only): error, ranking, and outcome-dependent criteria all use it.
    pub oracle: bool,
    pub proxy: ProxyKind,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig { alpha: 0.05, oracle: false, proxy: ProxyKind::PseudoOutcome }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub input: InputConfig,
    pub split: SplitPlan,
    pub mode: FairnessMode,
    #[serde(default)]
    pub nuisance: Option<NuisanceConfig>,
    pub basis: Vec<BasisSpec>,
    pub fairness: Vec<FairnessSpec>,
    pub solver: SolverConfig,
    #[serde(default)]
    pub evaluation: EvalConfig,
}

/// Nuisance values and pseudo-outcomes aligned with one target fold.
#[derive(Debug, Clone)]
pub struct FoldNuisance {
    pub fit: NuisanceFit,
    pub pseudo: PseudoOutcomes,
}

/// Everything the solver and evaluator need, reconstructed deterministically
/// from the config (and intermediate artifacts when staged on disk).
pub struct Prepared {
    pub folds: SplitFolds,
    pub bases: Vec<TrainedColumn>,
    pub mean_value: Option<f64>,
    pub train_nuisance: Option<FoldNuisance>,
    pub test_nuisance: Option<FoldNuisance>,
}

#[derive(Debug, Clone)]
pub struct TrainedColumn {
    pub label: String,
    pub model: GlmModel,
}

pub struct FitOutput {
    pub problem: ProblemData,
    pub solutions: Vec<FadeSolution>,
    pub basis_names: Vec<String>,
    pub fairness_labels: Vec<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SelectionEntry {
    pub metrics: Vec<String>,
    pub model_id: usize,
    pub lambda: Vec<f64>,
    pub mse: f64,
    pub disparities: Vec<(String, f64)>,
}

pub struct RunArtifacts {
    pub data: Dataset,
    pub fit: FitOutput,
    pub profiles: Vec<PerformanceProfile>,
    pub selections: Vec<SelectionEntry>,
    /// Stage label and wall-clock milliseconds (zero where no clock exists).
    pub timings: Vec<(String, f64)>,
}

#[cfg(not(target_arch = "wasm32"))]
fn clock_ms() -> f64 {
    use std::time::{SystemTime, UNIX_EPOCH};
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs_f64() * 1e3).unwrap_or(0.0)
}

#[cfg(target_arch = "wasm32")]
fn clock_ms() -> f64 {
    0.0
}

/// Criterion labels, disambiguated when one kind appears twice.
pub fn fairness_labels(specs: &[FairnessSpec]) -> Vec<String> {
    let mut labels = Vec::with_capacity(specs.len());
    for spec in specs {
        let base = spec.label();
        let mut label = base.clone();
        let mut k = 2;
        while labels.contains(&label) {
            label = format!("{base}{k}");
            k += 1;
        }
        labels.push(label);
    }
    labels
}

pub fn load_input(cfg: &PipelineConfig) -> Result<Dataset> {
    match &cfg.input {
        InputConfig::Dgp(spec) => generate(spec),
        InputConfig::Csv { path, roles, bounds } => load_csv(path, roles, (bounds[0], bounds[1])),
    }
}

fn validate(cfg: &PipelineConfig, data: &Dataset) -> Result<()> {
    if cfg.basis.is_empty() {
        return Err(FadeError::Config("basis must name at least one column".into()));
    }
    if cfg.fairness.is_empty() {
        return Err(FadeError::Config("at least one fairness criterion is required".into()));
    }
    if cfg.mode == FairnessMode::Counterfactual {
        if cfg.nuisance.is_none() {
            return Err(FadeError::Config("counterfactual targets need a nuisance config".into()));
        }
        if !data.has_d() {
            return Err(FadeError::Config("counterfactual targets need a decision column".into()));
        }
        for spec in &cfg.fairness {
            if spec.mode != FairnessMode::Counterfactual {
                return Err(FadeError::Config(
                    "observable criteria cannot be mixed into a counterfactual run".into(),
                ));
            }
        }
    }
    if cfg.evaluation.oracle && !data.has_oracle() {
        return Err(FadeError::Config("oracle evaluation needs potential-outcome columns".into()));
    }
    Ok(())
}

fn base_training_data(learn: &Dataset, mode: FairnessMode) -> Result<Dataset> {
    match mode {
        FairnessMode::Observable => Ok(learn.clone()),
        // Counterfactual targets are untreated outcomes, so base predictors
        // see untreated rows only.
        FairnessMode::Counterfactual => {
            let sub = learn.untreated()?;
            if sub.is_empty() {
                return Err(FadeError::Data("learning fold has no untreated rows".into()));
            }
            Ok(sub)
        }
    }
}

pub fn train_bases(cfg: &PipelineConfig, folds: &SplitFolds) -> Result<Vec<TrainedColumn>> {
    let mut out = Vec::new();
    for spec in &cfg.basis {
        if let BasisSpec::Trained { label, covariates } = spec {
            if folds.learn.is_empty() {
                return Err(FadeError::Config(
                    "trained basis columns need a nonempty learning fold".into(),
                ));
            }
            let train = base_training_data(&folds.learn, cfg.mode)?;
            let target = match cfg.mode {
                FairnessMode::Observable => NuisanceTarget::ObservedOutcome,
                FairnessMode::Counterfactual => NuisanceTarget::ObservedOutcome,
            };
            let model = fit_nuisance_model(&train, covariates, target, FitOptions::default())?;
            out.push(TrainedColumn { label: label.clone(), model });
        }
    }
    Ok(out)
}

fn nuisance_for_fold(
    cfg: &PipelineConfig,
    folds: &SplitFolds,
    test_side: bool,
) -> Result<Option<FoldNuisance>> {
    if cfg.mode == FairnessMode::Observable {
        return Ok(None);
    }
    let target_fold = if test_side { &folds.test_target } else { &folds.train_target };
    let nuis_fold = if test_side { &folds.test_nuis } else { &folds.train_nuis };
    let nuisance = cfg.nuisance.as_ref().expect("validated");
    let fit = match nuisance {
        NuisanceConfig::Builtin { gamma, options } => {
            if cfg.split.cross_fit_folds > 1 {
                cross_fit(
                    target_fold,
                    cfg.split.cross_fit_folds,
                    cfg.split.seed,
                    &target_fold.feature_names(),
                    *options,
                    true,
                    *gamma,
                )?
            } else {
                if nuis_fold.is_empty() {
                    return Err(FadeError::Config(
                        "nuisance fold is empty; give it a positive fraction or enable cross-fitting"
                            .into(),
                    ));
                }
                fit_builtin(nuis_fold, target_fold, &nuis_fold.feature_names(), *options, true, *gamma)?
            }
        }
        NuisanceConfig::External { train, test, gamma } => {
            let files = if test_side {
                test.as_ref().ok_or_else(|| {
                    FadeError::Config("external nuisance scores missing for the test fold".into())
                })?
            } else {
                train
            };
            let n = target_fold.n();
            let bounds = target_fold.bounds();
            let pi = ingest_external_scores(&files.pi, n, (0.0, 1.0), "propensity")?;
            let mu0 = ingest_external_scores(&files.mu0, n, bounds, "untreated-outcome")?;
            let nu0 = match &files.nu0 {
                Some(p) => Some(ingest_external_scores(p, n, (0.0, f64::INFINITY), "second-moment")?),
                // Binary outcomes: the second moment equals the mean.
                None => {
                    let binary = target_fold.records().iter().all(|r| r.y == 0.0 || r.y == 1.0);
                    if binary {
                        Some(mu0.clone())
                    } else {
                        return Err(FadeError::Config(
                            "non-binary outcomes need an external second-moment score file".into(),
                        ));
                    }
                }
            };
            NuisanceFit::assemble(pi, mu0, nu0, *gamma, bounds)?
        }
    };
    let pseudo = pseudo_outcomes(&fit, target_fold, true)?;
    Ok(Some(FoldNuisance { fit, pseudo }))
}

/// Runs input loading, splitting, base training, and nuisance estimation.
pub fn prepare(cfg: &PipelineConfig) -> Result<(Dataset, Prepared)> {
    let data = load_input(cfg)?;
    validate(cfg, &data)?;
    let folds = split(&data, &cfg.split)?;
    let prepared = prepare_from_folds(cfg, folds)?;
    Ok((data, prepared))
}

/// Same as `prepare` but starting from folds already on hand (the staged CLI
/// path reloads them from disk).
pub fn prepare_from_folds(cfg: &PipelineConfig, folds: SplitFolds) -> Result<Prepared> {
    let bases = train_bases(cfg, &folds)?;
    let mean_value = if cfg.basis.iter().any(|b| matches!(b, BasisSpec::Mean)) {
        let anchor = if folds.learn.is_empty() { &folds.train_target } else { &folds.learn };
        Some(mean_column_value(anchor, cfg.mode)?)
    } else {
        None
    };
    let train_nuisance = nuisance_for_fold(cfg, &folds, false)?;
    let test_nuisance = if cfg.evaluation.oracle {
        // Oracle evaluation never touches estimated counterfactual proxies.
        None
    } else {
        nuisance_for_fold(cfg, &folds, true)?
    };
    Ok(Prepared { folds, bases, mean_value, train_nuisance, test_nuisance })
}

/// Assembles the basis on one fold, evaluating trained models and slotting
/// in external score columns.
pub fn assemble_basis(
    cfg: &PipelineConfig,
    prepared: &Prepared,
    fold_data: &Dataset,
    fold_label: &str,
) -> Result<BasisMatrix> {
    let test_side = fold_label.starts_with("test");
    let mut sources = Vec::with_capacity(cfg.basis.len());
    for spec in &cfg.basis {
        match spec {
            BasisSpec::Mean => {
                let value = prepared
                    .mean_value
                    .ok_or_else(|| FadeError::Config("mean column value missing".into()))?;
                sources.push(BasisSource::Mean { value });
            }
            BasisSpec::Feature(name) => sources.push(BasisSource::Feature { name: name.clone() }),
            BasisSpec::Trained { label, .. } => {
                let trained = prepared
                    .bases
                    .iter()
                    .find(|t| &t.label == label)
                    .ok_or_else(|| FadeError::Config(format!("trained column `{label}` not prepared")))?;
                sources.push(BasisSource::Scores {
                    name: label.clone(),
                    values: trained.model.predict(fold_data)?,
                });
            }
            BasisSpec::File { name, train, test } => {
                let path = if test_side { test } else { train };
                let values =
                    ingest_external_scores(path, fold_data.n(), fold_data.bounds(), name)?;
                sources.push(BasisSource::Scores { name: name.clone(), values });
            }
        }
    }
    assemble(fold_data, &sources, fold_label)
}

/// Fairness vectors on a fold. Counterfactual outcome-dependent criteria use
/// the configured proxy; when `oracle_outcome` is supplied (oracle test
/// evaluation) it replaces the proxy outright.
pub fn fairness_vectors(
    cfg: &PipelineConfig,
    fold_data: &Dataset,
    nuis: Option<&FoldNuisance>,
    oracle_outcome: Option<&[f64]>,
) -> Result<Vec<FairnessVector>> {
    let labels = fairness_labels(&cfg.fairness);
    cfg.fairness
        .iter()
        .zip(labels)
        .map(|(spec, label)| {
            let proxy_store;
            let proxy: Option<&[f64]> = if spec.mode == FairnessMode::Counterfactual
                && spec.outcome_dependent()
            {
                match oracle_outcome {
                    Some(o) => Some(o),
                    None => {
                        let n = nuis.ok_or_else(|| {
                            FadeError::Config(
                                "counterfactual criteria need nuisance estimates on this fold".into(),
                            )
                        })?;
                        proxy_store = match cfg.evaluation.proxy {
                            ProxyKind::PseudoOutcome => n.pseudo.phi.clone(),
                            ProxyKind::UntreatedRegression => n.fit.mu0.clone(),
                        };
                        Some(&proxy_store)
                    }
                }
            } else {
                None
            };
            let mut fv = eval_fairness(spec, fold_data, proxy)?;
            fv.label = label;
            Ok(fv)
        })
        .collect()
}

/// Builds training moments and runs the configured solver route.
pub fn fit(cfg: &PipelineConfig, prepared: &Prepared) -> Result<FitOutput> {
    let train = &prepared.folds.train_target;
    if train.is_empty() {
        return Err(FadeError::Config("training target fold is empty".into()));
    }
    let basis = assemble_basis(cfg, prepared, train, "train_target")?;
    let vectors = fairness_vectors(cfg, train, prepared.train_nuisance.as_ref(), None)?;
    let (target, d_values): (Vec<f64>, Vec<f64>) = match cfg.mode {
        FairnessMode::Observable => {
            let y = train.y_values();
            let y2 = y.iter().map(|v| v * v).collect();
            (y, y2)
        }
        FairnessMode::Counterfactual => {
            let nuis = prepared.train_nuisance.as_ref().expect("validated");
            (
                nuis.pseudo.phi.clone(),
                nuis.pseudo
                    .phibar
                    .clone()
                    .ok_or_else(|| FadeError::Data("squared pseudo-outcomes missing".into()))?,
            )
        }
    };
    let problem = build_problem(&basis, &target, &vectors, Some(&d_values))?;
    let solutions = match &cfg.solver {
        SolverConfig::Grid { axes } => {
            let grid = match axes {
                Some(axes) => LambdaGrid { axes: axes.clone() },
                None => LambdaGrid::uniform(problem.t(), &DEFAULT_LAMBDA_AXIS),
            };
            solve_grid(&problem, &grid, None)?
        }
        SolverConfig::RiskMin { epsilon } => vec![solve_risk_min(&problem, epsilon)?],
        SolverConfig::UnfairMin { epsilon, alpha } => {
            let alpha = alpha.clone().unwrap_or_else(|| vec![1.0; problem.t()]);
            vec![solve_unfair_min(&problem, *epsilon, &alpha)?]
        }
        SolverConfig::SeedThenGrid { epsilon, spread } => {
            let seeded = solve_risk_min(&problem, epsilon)?;
            let grid = seed_grid(&seeded, spread)?;
            let mut sols = vec![seeded];
            sols.extend(solve_grid(&problem, &grid, None)?);
            sols
        }
    };
    Ok(FitOutput {
        basis_names: basis.names().to_vec(),
        fairness_labels: vectors.into_iter().map(|v| v.label).collect(),
        problem,
        solutions,
    })
}

fn lambda_of(sol: &FadeSolution) -> Vec<f64> {
    match &sol.origin {
        SolutionOrigin::Penalized { lambda } => lambda.clone(),
        SolutionOrigin::RiskConstrained { dual, .. } => dual.clone(),
        SolutionOrigin::UnfairnessMin { .. } => vec![],
    }
}

/// Evaluates every solution on the held-out target fold.
pub fn evaluate(
    cfg: &PipelineConfig,
    prepared: &Prepared,
    solutions: &[FadeSolution],
) -> Result<Vec<PerformanceProfile>> {
    let test = &prepared.folds.test_target;
    if test.is_empty() {
        return Err(FadeError::Config("test target fold is empty".into()));
    }
    let basis = assemble_basis(cfg, prepared, test, "test_target")?;
    let oracle_y0 = if cfg.evaluation.oracle { test.y0_values() } else { None };
    let vectors = fairness_vectors(
        cfg,
        test,
        prepared.test_nuisance.as_ref(),
        oracle_y0.as_deref(),
    )?;
    let y_store;
    let phi_store;
    let risk: RiskTarget = match (&oracle_y0, cfg.mode) {
        (Some(y0), _) => RiskTarget::Observable { y: y0 },
        (None, FairnessMode::Observable) => {
            y_store = test.y_values();
            RiskTarget::Observable { y: &y_store }
        }
        (None, FairnessMode::Counterfactual) => {
            let nuis = prepared
                .test_nuisance
                .as_ref()
                .ok_or_else(|| FadeError::Config("test-fold nuisances missing".into()))?;
            phi_store = (
                nuis.pseudo.phi.clone(),
                nuis.pseudo
                    .phibar
                    .clone()
                    .ok_or_else(|| FadeError::Data("squared pseudo-outcomes missing".into()))?,
            );
            RiskTarget::Counterfactual { phi: &phi_store.0, phibar: &phi_store.1 }
        }
    };
    // Ranking labels: the oracle outcome when present, otherwise the observed
    // outcome if binary; counterfactual runs without oracle go unlabeled.
    let labels_store: Option<Vec<f64>> = match (&oracle_y0, cfg.mode) {
        (Some(y0), _) => Some(y0.clone()),
        (None, FairnessMode::Observable) => {
            let y = test.y_values();
            y.iter().all(|&v| v == 0.0 || v == 1.0).then_some(y)
        }
        (None, FairnessMode::Counterfactual) => None,
    };
    let alpha = cfg.evaluation.alpha;

    let work = |(id, sol): (usize, &FadeSolution)| -> Result<PerformanceProfile> {
        let preds = predict_solution(&basis, sol, true)?;
        evaluate_predictions(
            id,
            lambda_of(sol),
            &preds,
            &risk,
            &vectors,
            labels_store.as_deref(),
            alpha,
        )
    };
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        solutions.par_iter().enumerate().map(work).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        solutions.iter().enumerate().map(work).collect()
    }
}

/// Min-norm picks for error alone and for error joined with every nonempty
/// subset of the disparity metrics.
pub fn selections(
    profiles: &[PerformanceProfile],
    labels: &[String],
) -> Result<Vec<SelectionEntry>> {
    let mut subsets: Vec<Vec<String>> = vec![vec!["mse".to_string()]];
    let t = labels.len();
    for mask in 1u32..(1 << t) {
        let mut metrics = vec!["mse".to_string()];
        for (j, label) in labels.iter().enumerate() {
            if mask & (1 << j) != 0 {
                metrics.push(label.clone());
            }
        }
        subsets.push(metrics);
    }
    subsets
        .into_iter()
        .map(|metrics| {
            let best = select_min_norm(profiles, &metrics)?;
            Ok(SelectionEntry {
                metrics,
                model_id: best.model_id,
                lambda: best.lambda.clone(),
                mse: best.mse,
                disparities: best.disparities.iter().map(|d| (d.label.clone(), d.abs)).collect(),
            })
        })
        .collect()
}

/// Full pipeline with stage timings.
pub fn run(cfg: &PipelineConfig) -> Result<RunArtifacts> {
    let mut timings = Vec::new();
    let mut stamp = |label: &str, t0: f64| timings.push((label.to_string(), clock_ms() - t0));

    let t0 = clock_ms();
    let data = load_input(cfg)?;
    validate(cfg, &data)?;
    stamp("input", t0);

    let t0 = clock_ms();
    let folds = split(&data, &cfg.split)?;
    stamp("split", t0);

    let t0 = clock_ms();
    let prepared = prepare_from_folds(cfg, folds)?;
    stamp("prepare", t0);

    let t0 = clock_ms();
    let fit_out = fit(cfg, &prepared)?;
    stamp("fit", t0);

    let t0 = clock_ms();
    let profiles = evaluate(cfg, &prepared, &fit_out.solutions)?;
    stamp("evaluate", t0);

    let t0 = clock_ms();
    let selections = selections(&profiles, &fit_out.fairness_labels)?;
    stamp("select", t0);

    Ok(RunArtifacts { data, fit: fit_out, profiles, selections, timings })
}

/// The synthetic-study configuration used across tests and the demo: mean
/// column plus four deliberately partial-view regressions (none sees every
/// covariate, so stacking has room to help), counterfactual targets, and the
/// three standard criteria on the default grid.
pub fn simulation_study_config(
    n_learn: usize,
    n_train: usize,
    n_test: usize,
    seed: u64,
    axes: Option<Vec<Vec<f64>>>,
    oracle: bool,
) -> PipelineConfig {
    let n = n_learn + 2 * n_train + n_test;
    let nf = n as f64;
    PipelineConfig {
        input: InputConfig::Dgp(DgpSpec { n, seed, ..DgpSpec::default() }),
        split: SplitPlan {
            fractions: [
                n_learn as f64 / nf,
                n_train as f64 / nf,
                n_train as f64 / nf,
                0.0,
                n_test as f64 / nf,
            ],
            seed: seed ^ 0x5eed_5p11 as u64,
            cross_fit_folds: 1,
        },
        mode: FairnessMode::Counterfactual,
        nuisance: Some(NuisanceConfig::Builtin {
            gamma: DEFAULT_GAMMA,
            options: FitOptions::default(),
        }),
        basis: vec![
            BasisSpec::Mean,
            BasisSpec::Trained { label: "b1".into(), covariates: vec!["x1".into(), "x2".into()] },
            BasisSpec::Trained { label: "b2".into(), covariates: vec!["x3".into(), "x4".into()] },
            BasisSpec::Trained {
                label: "b3".into(),
                covariates: vec!["a".into(), "x1".into(), "x3".into()],
            },
            BasisSpec::Trained {
                label: "b4".into(),
                covariates: vec!["a".into(), "x2".into(), "x4".into()],
            },
        ],
        fairness: vec![
            FairnessSpec { kind: crate::fairness::FairnessKind::Rate, mode: FairnessMode::Counterfactual },
            FairnessSpec { kind: crate::fairness::FairnessKind::Fpr, mode: FairnessMode::Counterfactual },
            FairnessSpec { kind: crate::fairness::FairnessKind::Fnr, mode: FairnessMode::Counterfactual },
        ],
        solver: SolverConfig::Grid { axes },
        evaluation: EvalConfig { alpha: 0.05, oracle, proxy: ProxyKind::PseudoOutcome },
    }
}
