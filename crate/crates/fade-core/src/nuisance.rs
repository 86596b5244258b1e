//! Nuisance estimation and doubly robust pseudo-outcomes.
//!
//! Counterfactual targets need three nuisance functions of the features:
//! the decision propensity, the untreated conditional mean outcome, and the
//! untreated conditional second moment. They can be fit in-crate (logistic or
//! linear regression), supplied externally as score files, or taken as known.
//! Pseudo-outcomes combine the observed outcome of untreated rows with the
//! outcome-model prediction, reweighted by the inverse untreated probability,
//! so the resulting mean stays consistent when either the propensity or the
//! outcome model is correct.

use std::path::Path;

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{FadeError, Result};
use crate::linalg::solve_spd;
use crate::stats::expit;

/// Default propensity truncation: decision probabilities are capped at
/// 1 - GAMMA so inverse weights stay bounded by 1/GAMMA.
pub const DEFAULT_GAMMA: f64 = 0.025;

/// Probability clamp for fitted regressions, preventing overflow in weights
/// and keeping log-likelihood terms finite even on separable data.
pub const PROB_CLAMP: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NuisanceTarget {
    /// Binary decision, fit on all rows.
    Decision,
    /// Outcome regressed on features over untreated rows only.
    UntreatedOutcome,
    /// Squared outcome over untreated rows (distinct from the mean only for
    /// non-binary outcomes).
    UntreatedSquaredOutcome,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GlmKind {
    Logistic,
    Linear,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct FitOptions {
    pub max_iter: usize,
    pub tol: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions { max_iter: 100, tol: 1e-8 }
    }
}

/// A fitted generalized linear model over named feature columns, with an
/// intercept in position zero.
#[derive(Debug, Clone)]
pub struct GlmModel {
    pub covariates: Vec<String>,
    pub coefs: Array1<f64>,
    pub kind: GlmKind,
    pub converged: bool,
    pub iterations: usize,
}

fn design_matrix(data: &Dataset, covariates: &[String], rows: Option<&[usize]>) -> Result<Array2<f64>> {
    let cols: Vec<Vec<f64>> = covariates
        .iter()
        .map(|name| {
            data.feature_column(name)
                .ok_or_else(|| FadeError::Data(format!("unknown feature column `{name}`")))
        })
        .collect::<Result<_>>()?;
    let take = |v: &Vec<f64>, i: usize| v[i];
    let n = rows.map(|r| r.len()).unwrap_or(data.n());
    let mut x = Array2::<f64>::zeros((n, covariates.len() + 1));
    for r in 0..n {
        let i = rows.map(|rs| rs[r]).unwrap_or(r);
        x[[r, 0]] = 1.0;
        for (j, col) in cols.iter().enumerate() {
            x[[r, j + 1]] = take(col, i);
        }
    }
    Ok(x)
}

fn target_rows_and_values(data: &Dataset, target: NuisanceTarget) -> Result<(Vec<usize>, Vec<f64>)> {
    match target {
        NuisanceTarget::Decision => {
            let d = data
                .d_values()
                .ok_or_else(|| FadeError::Data("decision column required to fit a propensity".into()))?;
            Ok(((0..data.n()).collect(), d))
        }
        NuisanceTarget::UntreatedOutcome | NuisanceTarget::UntreatedSquaredOutcome => {
            if !data.has_d() {
                return Err(FadeError::Data(
                    "decision column required to fit untreated-outcome regressions".into(),
                ));
            }
            let rows: Vec<usize> = data
                .records()
                .iter()
                .enumerate()
                .filter(|(_, r)| r.d == Some(0))
                .map(|(i, _)| i)
                .collect();
            if rows.is_empty() {
                return Err(FadeError::Data("no untreated rows to fit the outcome regression".into()));
            }
            let square = target == NuisanceTarget::UntreatedSquaredOutcome;
            let vals = rows
                .iter()
                .map(|&i| {
                    let y = data.records()[i].y;
                    if square {
                        y * y
                    } else {
                        y
                    }
                })
                .collect();
            Ok((rows, vals))
        }
    }
}

fn is_binary(vals: &[f64]) -> bool {
    vals.iter().all(|&v| v == 0.0 || v == 1.0)
}

/// Fits a nuisance regression: iteratively reweighted least squares with the
/// logistic link for binary targets, ordinary least squares otherwise.
/// Convergence is declared on the max-norm of the score; on separable data
/// the clamped probabilities keep every quantity finite and the model is
/// returned with `converged = false` after `max_iter` sweeps.
pub fn fit_nuisance_model(
    data: &Dataset,
    covariates: &[String],
    target: NuisanceTarget,
    opts: FitOptions,
) -> Result<GlmModel> {
    let (rows, yvals) = target_rows_and_values(data, target)?;
    let x = design_matrix(data, covariates, Some(&rows))?;
    let y = Array1::from_vec(yvals);
    let k = x.ncols();
    if x.nrows() < k {
        return Err(FadeError::Data(format!(
            "{} rows cannot identify {k} regression coefficients",
            x.nrows()
        )));
    }
    if is_binary(y.as_slice().unwrap()) {
        let mut beta = Array1::<f64>::zeros(k);
        let mut converged = false;
        let mut iterations = 0;
        for it in 1..=opts.max_iter {
            iterations = it;
            let eta = x.dot(&beta);
            let p: Array1<f64> =
                eta.mapv(|e| expit(e).clamp(PROB_CLAMP, 1.0 - PROB_CLAMP));
            let resid = &y - &p;
            let grad = x.t().dot(&resid);
            if grad.iter().all(|g| g.abs() <= opts.tol) {
                converged = true;
                break;
            }
            let mut h = Array2::<f64>::zeros((k, k));
            for r in 0..x.nrows() {
                let w = p[r] * (1.0 - p[r]);
                for i in 0..k {
                    for j in i..k {
                        h[[i, j]] += w * x[[r, i]] * x[[r, j]];
                    }
                }
            }
            for i in 0..k {
                for j in 0..i {
                    h[[i, j]] = h[[j, i]];
                }
            }
            let step = match solve_spd(&h, &grad, "logistic IRLS") {
                Ok(s) => s,
                Err(_) => {
                    // Near-singular weighted Gram: damp and retry once.
                    let trace: f64 = (0..k).map(|i| h[[i, i]]).sum();
                    for i in 0..k {
                        h[[i, i]] += 1e-10 * (trace / k as f64).max(1e-12);
                    }
                    solve_spd(&h, &grad, "logistic IRLS (damped)")?
                }
            };
            // Trust cap: separable data produces ever-growing steps; capping
            // the sup-norm keeps the walk toward the clamp finite.
            let snorm = step.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            let scale = if snorm > 25.0 { 25.0 / snorm } else { 1.0 };
            beta = &beta + &(step * scale);
        }
        Ok(GlmModel {
            covariates: covariates.to_vec(),
            coefs: beta,
            kind: GlmKind::Logistic,
            converged,
            iterations,
        })
    } else {
        let xtx = x.t().dot(&x);
        let xty = x.t().dot(&y);
        let coefs = solve_spd(&xtx, &xty, "least squares nuisance fit")?;
        Ok(GlmModel {
            covariates: covariates.to_vec(),
            coefs,
            kind: GlmKind::Linear,
            converged: true,
            iterations: 1,
        })
    }
}

impl GlmModel {
    /// Evaluates the fitted regression on every row. Logistic predictions are
    /// clamped away from 0 and 1; linear predictions are returned raw.
    pub fn predict(&self, data: &Dataset) -> Result<Vec<f64>> {
        let x = design_matrix(data, &self.covariates, None)?;
        let eta = x.dot(&self.coefs);
        Ok(match self.kind {
            GlmKind::Logistic => eta
                .iter()
                .map(|&e| expit(e).clamp(PROB_CLAMP, 1.0 - PROB_CLAMP))
                .collect(),
            GlmKind::Linear => eta.to_vec(),
        })
    }
}

/// Per-row nuisance values aligned with one fold.
#[derive(Debug, Clone)]
pub struct NuisanceFit {
    pub pi: Vec<f64>,
    pub mu0: Vec<f64>,
    pub nu0: Option<Vec<f64>>,
    pub gamma: f64,
    /// Set when nuisances were fit on the same rows they are evaluated on.
    pub in_sample: bool,
}

impl NuisanceFit {
    /// Validates ranges, truncates propensities at 1 - gamma, and clips
    /// outcome moments into their admissible ranges.
    pub fn assemble(
        pi: Vec<f64>,
        mu0: Vec<f64>,
        nu0: Option<Vec<f64>>,
        gamma: f64,
        bounds: (f64, f64),
    ) -> Result<Self> {
        if !(0.0..0.5).contains(&gamma) {
            return Err(FadeError::Config(format!("truncation gamma = {gamma} outside [0, 0.5)")));
        }
        if pi.len() != mu0.len() || nu0.as_ref().map_or(false, |v| v.len() != pi.len()) {
            return Err(FadeError::Data("nuisance component lengths differ".into()));
        }
        if pi.iter().any(|&p| !(0.0..=1.0).contains(&p)) {
            return Err(FadeError::Data("propensity outside [0, 1]".into()));
        }
        let (lo, hi) = bounds;
        Ok(NuisanceFit {
            pi: pi.into_iter().map(|p| p.min(1.0 - gamma)).collect(),
            mu0: mu0.into_iter().map(|m| m.clamp(lo, hi)).collect(),
            nu0: nu0.map(|v| v.into_iter().map(|m| m.max(0.0)).collect()),
            gamma,
            in_sample: false,
        })
    }

    pub fn len(&self) -> usize {
        self.pi.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pi.is_empty()
    }
}

/// Fits all nuisances on `train` and evaluates them on `eval`.
pub fn fit_builtin(
    train: &Dataset,
    eval: &Dataset,
    covariates: &[String],
    opts: FitOptions,
    want_nu0: bool,
    gamma: f64,
) -> Result<NuisanceFit> {
    let pi_model = fit_nuisance_model(train, covariates, NuisanceTarget::Decision, opts)?;
    let mu_model = fit_nuisance_model(train, covariates, NuisanceTarget::UntreatedOutcome, opts)?;
    let pi = pi_model.predict(eval)?;
    let mu0raw = mu_model.predict(eval)?;
    let nu0 = if want_nu0 {
        let binary_outcome = train.records().iter().all(|r| r.y == 0.0 || r.y == 1.0);
        if binary_outcome {
            // For 0/1 outcomes the second moment equals the mean.
            Some(mu0raw.clone())
        } else {
            let nu_model =
                fit_nuisance_model(train, covariates, NuisanceTarget::UntreatedSquaredOutcome, opts)?;
            Some(nu_model.predict(eval)?)
        }
    } else {
        None
    };
    NuisanceFit::assemble(pi, mu0raw, nu0, gamma, eval.bounds())
}

/// Reads a headerless single-column score file aligned with a fold.
pub fn ingest_external_scores(
    path: &Path,
    expected_len: usize,
    range: (f64, f64),
    label: &str,
) -> Result<Vec<f64>> {
    let mut reader = csv::ReaderBuilder::new().has_headers(false).from_path(path)?;
    let mut out = Vec::with_capacity(expected_len);
    for (i, rec) in reader.records().enumerate() {
        let rec = rec?;
        if rec.len() != 1 {
            return Err(FadeError::Data(format!(
                "{label} scores at {}: row {i} has {} fields, expected a single column",
                path.display(),
                rec.len()
            )));
        }
        let v: f64 = rec[0]
            .trim()
            .parse()
            .map_err(|_| FadeError::Data(format!("{label} scores: non-numeric row {i}")))?;
        if !v.is_finite() || v < range.0 || v > range.1 {
            return Err(FadeError::Data(format!(
                "{label} scores: value {v} at row {i} outside [{}, {}]",
                range.0, range.1
            )));
        }
        out.push(v);
    }
    if out.len() != expected_len {
        return Err(FadeError::Data(format!(
            "{label} scores: {} rows, expected {expected_len} (must align with the fold)",
            out.len()
        )));
    }
    Ok(out)
}

/// Doubly robust pseudo-outcomes for the untreated potential outcome and,
/// optionally, its square.
#[derive(Debug, Clone)]
pub struct PseudoOutcomes {
    pub phi: Vec<f64>,
    pub phibar: Option<Vec<f64>>,
}

pub fn pseudo_outcomes(fit: &NuisanceFit, data: &Dataset, want_phibar: bool) -> Result<PseudoOutcomes> {
    if fit.len() != data.n() {
        return Err(FadeError::Data(format!(
            "nuisance fit covers {} rows but the fold has {}",
            fit.len(),
            data.n()
        )));
    }
    let d = data
        .d_values()
        .ok_or_else(|| FadeError::Data("decision column required for pseudo-outcomes".into()))?;
    if want_phibar && fit.nu0.is_none() {
        return Err(FadeError::Data(
            "second-moment nuisance required for squared pseudo-outcomes".into(),
        ));
    }
    let mut phi = Vec::with_capacity(data.n());
    let mut phibar = want_phibar.then(|| Vec::with_capacity(data.n()));
    for (i, r) in data.records().iter().enumerate() {
        let denom = 1.0 - fit.pi[i];
        if denom <= 0.0 {
            return Err(FadeError::Numerical(format!(
                "truncated propensity still reaches 1 at row {i}"
            )));
        }
        let w = (1.0 - d[i]) / denom;
        phi.push(w * (r.y - fit.mu0[i]) + fit.mu0[i]);
        if let Some(pb) = phibar.as_mut() {
            let nu = fit.nu0.as_ref().unwrap()[i];
            pb.push(w * (r.y * r.y - nu) + nu);
        }
    }
    Ok(PseudoOutcomes { phi, phibar })
}

/// Cross-fit nuisances: rows are shuffled into `folds` blocks by the given
/// seed and each block is scored by models trained on its complement.
/// `folds = 1` degenerates to a warned in-sample fit.
#[allow(clippy::too_many_arguments)]
pub fn cross_fit(
    data: &Dataset,
    folds: usize,
    seed: u64,
    covariates: &[String],
    opts: FitOptions,
    want_nu0: bool,
    gamma: f64,
) -> Result<NuisanceFit> {
    if folds == 0 {
        return Err(FadeError::Config("cross-fitting needs at least one fold".into()));
    }
    if folds == 1 {
        log::warn!("cross-fitting disabled: nuisances fit and evaluated on the same rows");
        let mut fit = fit_builtin(data, data, covariates, opts, want_nu0, gamma)?;
        fit.in_sample = true;
        return Ok(fit);
    }
    if folds > data.n() {
        return Err(FadeError::Config(format!(
            "{folds} cross-fit folds exceed the {} available rows",
            data.n()
        )));
    }
    use rand::seq::SliceRandom;
    use rand::SeedableRng;
    let mut idx: Vec<usize> = (0..data.n()).collect();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    idx.shuffle(&mut rng);
    let mut assignment = vec![0usize; data.n()];
    for (pos, &row) in idx.iter().enumerate() {
        assignment[row] = pos % folds;
    }
    let mut pi = vec![0.0; data.n()];
    let mut mu0 = vec![0.0; data.n()];
    let mut nu0 = want_nu0.then(|| vec![0.0; data.n()]);
    for f in 0..folds {
        let held: Vec<usize> = (0..data.n()).filter(|&i| assignment[i] == f).collect();
        let rest: Vec<usize> = (0..data.n()).filter(|&i| assignment[i] != f).collect();
        let train = data.select(&rest);
        let eval = data.select(&held);
        let fit = fit_builtin(&train, &eval, covariates, opts, want_nu0, gamma)?;
        for (slot, &row) in held.iter().enumerate() {
            pi[row] = fit.pi[slot];
            mu0[row] = fit.mu0[slot];
            if let Some(n0) = nu0.as_mut() {
                n0[row] = fit.nu0.as_ref().unwrap()[slot];
            }
        }
    }
    // Components were already truncated per fold; reassemble for validation.
    NuisanceFit::assemble(pi, mu0, nu0, gamma, data.bounds())
}
