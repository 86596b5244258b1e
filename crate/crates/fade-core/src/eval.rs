//! Held-out evaluation: error and disparity estimates with normal confidence
//! intervals, ranking quality, classification rules, and min-norm selection.
//!
//! Counterfactual squared error replaces the unobserved outcome with
//! pseudo-outcome columns, so the per-unit loss is f^2 - 2 f phi + phibar;
//! its mean can dip slightly below zero in finite samples and is reported
//! as-is with a warning rather than clipped. Disparity intervals use the
//! delta-method influence function of the two weighted means, which accounts
//! for the estimated normalizers (a plain variance of the g·f products would
//! treat them as constants and overcover).

use serde::Serialize;

use crate::error::{FadeError, Result};
use crate::fairness::{disparity, FairnessVector};
use crate::stats::{mean, normal_critical, sample_var};

#[derive(Debug, Clone)]
pub enum RiskTarget<'a> {
    /// Squared error against an observed (or oracle) outcome column.
    Observable { y: &'a [f64] },
    /// Pseudo-outcome squared error for counterfactual targets.
    Counterfactual { phi: &'a [f64], phibar: &'a [f64] },
}

/// Mean squared error with a level-alpha normal CI half-width and a flag for
/// the negative-estimate quirk of pseudo-outcome losses.
pub fn estimate_risk(preds: &[f64], target: &RiskTarget, alpha: f64) -> Result<(f64, f64, bool)> {
    let n = preds.len();
    if n == 0 {
        return Err(FadeError::Data("cannot evaluate risk on an empty fold".into()));
    }
    let mut unit = Vec::with_capacity(n);
    match target {
        RiskTarget::Observable { y } => {
            if y.len() != n {
                return Err(FadeError::Data("outcome column length differs from predictions".into()));
            }
            for (f, yi) in preds.iter().zip(*y) {
                unit.push((f - yi) * (f - yi));
            }
        }
        RiskTarget::Counterfactual { phi, phibar } => {
            if phi.len() != n || phibar.len() != n {
                return Err(FadeError::Data("pseudo-outcome length differs from predictions".into()));
            }
            for i in 0..n {
                unit.push(preds[i] * preds[i] - 2.0 * preds[i] * phi[i] + phibar[i]);
            }
        }
    }
    let mse = mean(&unit);
    let ci = normal_critical(alpha) * (sample_var(&unit) / n as f64).sqrt();
    let negative = mse < 0.0;
    if negative {
        log::warn!("pseudo-outcome squared error is negative ({mse:.3e}); reporting as-is");
    }
    Ok((mse, ci, negative))
}

#[derive(Debug, Clone, Serialize)]
pub struct DisparityEstimate {
    pub label: String,
    pub signed: f64,
    pub abs: f64,
    pub ci_half: f64,
}

/// Signed disparity with a delta-method CI half-width. The influence function
/// of each weighted-mean term is w_i (f_i - term_mean) / mean(w).
pub fn estimate_disparity(fv: &FairnessVector, preds: &[f64], alpha: f64) -> Result<DisparityEstimate> {
    let n = preds.len();
    let signed = disparity(fv, preds)?;
    let mp = mean(&fv.plus_weights);
    let mm = mean(&fv.minus_weights);
    let rp = fv.plus_weights.iter().zip(preds).map(|(w, f)| w * f).sum::<f64>() / (mp * n as f64);
    let rm = fv.minus_weights.iter().zip(preds).map(|(w, f)| w * f).sum::<f64>() / (mm * n as f64);
    let infl: Vec<f64> = (0..n)
        .map(|i| {
            fv.alpha_plus * fv.plus_weights[i] * (preds[i] - rp) / mp
                - fv.alpha_minus * fv.minus_weights[i] * (preds[i] - rm) / mm
        })
        .collect();
    let ci = normal_critical(alpha) * (sample_var(&infl) / n as f64).sqrt();
    Ok(DisparityEstimate { label: fv.label.clone(), signed, abs: signed.abs(), ci_half: ci })
}

/// Probability that a random positive outranks a random negative, ties at
/// half weight (rank form of the two-sample rank-sum statistic).
pub fn auc(preds: &[f64], labels: &[f64]) -> Result<f64> {
    if preds.len() != labels.len() {
        return Err(FadeError::Data("label column length differs from predictions".into()));
    }
    if labels.iter().any(|&l| l != 0.0 && l != 1.0) {
        return Err(FadeError::Data("ranking quality needs binary labels".into()));
    }
    let n_pos = labels.iter().filter(|&&l| l == 1.0).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(FadeError::Data("ranking quality undefined for single-class labels".into()));
    }
    let mut idx: Vec<usize> = (0..preds.len()).collect();
    idx.sort_by(|&i, &j| preds[i].partial_cmp(&preds[j]).unwrap());
    let mut rank_sum_pos = 0.0f64;
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j < idx.len() && preds[idx[j]] == preds[idx[i]] {
            j += 1;
        }
        // Average rank of the tie run [i, j): ranks are 1-based.
        let avg_rank = (i + 1 + j) as f64 / 2.0;
        for &u in &idx[i..j] {
            if labels[u] == 1.0 {
                rank_sum_pos += avg_rank;
            }
        }
        i = j;
    }
    let u_stat = rank_sum_pos - (n_pos * (n_pos + 1)) as f64 / 2.0;
    Ok(u_stat / (n_pos as f64 * n_neg as f64))
}

/// Asymptotic CI half-width for the ranking statistic (exponential-model
/// variance approximation; adequate as a profile readout).
pub fn auc_ci_half(a: f64, n_pos: usize, n_neg: usize, alpha: f64) -> f64 {
    let q1 = a / (2.0 - a);
    let q2 = 2.0 * a * a / (1.0 + a);
    let var = (a * (1.0 - a)
        + (n_pos as f64 - 1.0) * (q1 - a * a)
        + (n_neg as f64 - 1.0) * (q2 - a * a))
        / (n_pos as f64 * n_neg as f64);
    normal_critical(alpha) * var.max(0.0).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ClassifierRule {
    /// 1 when the prediction reaches the cutoff.
    Threshold(f64),
    /// Bernoulli draw with the prediction as success probability.
    Bernoulli { seed: u64 },
}

pub fn to_classifier(preds: &[f64], rule: ClassifierRule) -> Result<Vec<u8>> {
    match rule {
        ClassifierRule::Threshold(c) => Ok(preds.iter().map(|&p| u8::from(p >= c)).collect()),
        ClassifierRule::Bernoulli { seed } => {
            if preds.iter().any(|&p| !(0.0..=1.0).contains(&p)) {
                return Err(FadeError::Data(
                    "random classification needs predictions in [0, 1]; truncate first".into(),
                ));
            }
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            Ok(preds.iter().map(|&p| u8::from(rng.gen::<f64>() < p)).collect())
        }
    }
}

/// One model's held-out summary: error, ranking quality when labels exist,
/// and every requested disparity, each with its CI half-width.
#[derive(Debug, Clone, Serialize)]
pub struct PerformanceProfile {
    pub model_id: usize,
    pub lambda: Vec<f64>,
    pub mse: f64,
    pub mse_ci: f64,
    pub mse_negative: bool,
    pub auc: Option<f64>,
    pub auc_ci: Option<f64>,
    pub disparities: Vec<DisparityEstimate>,
    pub n: usize,
}

impl PerformanceProfile {
    pub fn metric(&self, name: &str) -> Option<f64> {
        if name == "mse" {
            return Some(self.mse);
        }
        self.disparities.iter().find(|d| d.label == name).map(|d| d.abs)
    }
}

/// Builds the profile of one prediction vector.
#[allow(clippy::too_many_arguments)]
pub fn evaluate_predictions(
    model_id: usize,
    lambda: Vec<f64>,
    preds: &[f64],
    risk: &RiskTarget,
    fairness: &[FairnessVector],
    auc_labels: Option<&[f64]>,
    alpha: f64,
) -> Result<PerformanceProfile> {
    let (mse, mse_ci, mse_negative) = estimate_risk(preds, risk, alpha)?;
    let disparities: Vec<DisparityEstimate> = fairness
        .iter()
        .map(|fv| estimate_disparity(fv, preds, alpha))
        .collect::<Result<_>>()?;
    let (auc_val, auc_half) = match auc_labels {
        Some(labels) => {
            let a = auc(preds, labels)?;
            let n_pos = labels.iter().filter(|&&l| l == 1.0).count();
            (Some(a), Some(auc_ci_half(a, n_pos, labels.len() - n_pos, alpha)))
        }
        None => (None, None),
    };
    Ok(PerformanceProfile {
        model_id,
        lambda,
        mse,
        mse_ci,
        mse_negative,
        auc: auc_val,
        auc_ci: auc_half,
        disparities,
        n: preds.len(),
    })
}

/// Picks the profile minimizing the Euclidean norm of the chosen metric
/// vector (`"mse"` plus absolute disparities by label). Ties break toward
/// lower error, then lower model id.
pub fn select_min_norm<'a>(
    profiles: &'a [PerformanceProfile],
    metrics: &[String],
) -> Result<&'a PerformanceProfile> {
    if profiles.is_empty() {
        return Err(FadeError::Data("no profiles to select from".into()));
    }
    if metrics.is_empty() {
        return Err(FadeError::Config("selection needs at least one metric".into()));
    }
    let mut best: Option<(&PerformanceProfile, f64)> = None;
    for p in profiles {
        let mut sq = 0.0;
        for m in metrics {
            let v = p
                .metric(m)
                .ok_or_else(|| FadeError::Config(format!("metric `{m}` absent from profiles")))?;
            sq += v * v;
        }
        let norm = sq.sqrt();
        let better = match best {
            None => true,
            Some((b, bn)) => {
                norm < bn
                    || (norm == bn && p.mse < b.mse)
                    || (norm == bn && p.mse == b.mse && p.model_id < b.model_id)
            }
        };
        if better {
            best = Some((p, norm));
        }
    }
    Ok(best.unwrap().0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{Dataset, Record};
    use crate::fairness::{eval_fairness, FairnessKind, FairnessMode, FairnessSpec};
    use approx::assert_abs_diff_eq;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn observable_risk_matches_hand_computation() {
        let preds = [0.5, 0.0];
        let y = [1.0, 0.0];
        let (mse, ci, neg) = estimate_risk(&preds, &RiskTarget::Observable { y: &y }, 0.05).unwrap();
        assert_abs_diff_eq!(mse, 0.125, epsilon = 1e-15);
        // Unit losses are (0.25, 0): sd = 0.25/sqrt(2), se = sd/sqrt(2).
        let sd = ((0.125f64 * 0.125 * 2.0) / 1.0).sqrt();
        assert_abs_diff_eq!(ci, 1.9599639845 * sd / 2.0f64.sqrt(), epsilon = 1e-6);
        assert!(!neg);
    }

    #[test]
    fn counterfactual_risk_per_unit_identity() {
        // f^2 - 2 f phi + phibar with phi = phibar = y0 equals (f - y0)^2 for
        // binary y0; verify on a handmade pair.
        let preds = [0.5, 0.2];
        let phi = [1.0, 0.0];
        let (mse, _, _) = estimate_risk(
            &preds,
            &RiskTarget::Counterfactual { phi: &phi, phibar: &phi },
            0.05,
        )
        .unwrap();
        let direct = ((0.5f64 - 1.0).powi(2) + (0.2f64 - 0.0).powi(2)) / 2.0;
        assert_abs_diff_eq!(mse, direct, epsilon = 1e-15);
    }

    #[test]
    fn negative_counterfactual_risk_is_reported_not_clipped() {
        let preds = [0.0];
        let phi = [0.0];
        let phibar = [-0.5];
        let (mse, _, neg) = estimate_risk(
            &preds,
            &RiskTarget::Counterfactual { phi: &phi, phibar: &phibar },
            0.05,
        )
        .unwrap();
        assert!(mse < 0.0 && neg);
    }

    #[test]
    fn auc_extremes_and_ties() {
        assert_abs_diff_eq!(auc(&[0.1, 0.9], &[0.0, 1.0]).unwrap(), 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(auc(&[0.9, 0.1], &[0.0, 1.0]).unwrap(), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(auc(&[0.4, 0.4, 0.4], &[0.0, 1.0, 0.0]).unwrap(), 0.5, epsilon = 1e-15);
        assert!(auc(&[0.1, 0.2], &[1.0, 1.0]).is_err());
        assert!(auc(&[0.1, 0.2], &[0.0, 0.5]).is_err());
    }

    #[test]
    fn auc_matches_pair_enumeration_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..30 {
            let n = rng.gen_range(5..80);
            // Coarse grid of scores forces plenty of ties.
            let preds: Vec<f64> = (0..n).map(|_| rng.gen_range(0..5) as f64 / 4.0).collect();
            let labels: Vec<f64> = (0..n).map(|_| f64::from(rng.gen_bool(0.4))).collect();
            if labels.iter().all(|&l| l == 0.0) || labels.iter().all(|&l| l == 1.0) {
                continue;
            }
            let got = auc(&preds, &labels).unwrap();
            let mut num = 0.0;
            let mut den = 0.0;
            for i in 0..n {
                for j in 0..n {
                    if labels[i] == 1.0 && labels[j] == 0.0 {
                        den += 1.0;
                        if preds[i] > preds[j] {
                            num += 1.0;
                        } else if preds[i] == preds[j] {
                            num += 0.5;
                        }
                    }
                }
            }
            assert_abs_diff_eq!(got, num / den, epsilon = 1e-12);
        }
    }

    #[test]
    fn classifier_rules() {
        let preds = [0.2, 0.5, 0.8];
        assert_eq!(to_classifier(&preds, ClassifierRule::Threshold(0.5)).unwrap(), vec![0, 1, 1]);
        let b1 = to_classifier(&preds, ClassifierRule::Bernoulli { seed: 4 }).unwrap();
        let b2 = to_classifier(&preds, ClassifierRule::Bernoulli { seed: 4 }).unwrap();
        assert_eq!(b1, b2);
        assert!(to_classifier(&[1.2], ClassifierRule::Bernoulli { seed: 0 }).is_err());
        // Threshold includes the boundary.
        assert_eq!(to_classifier(&[0.5], ClassifierRule::Threshold(0.5)).unwrap(), vec![1]);
    }

    fn fold(rows: &[(u8, f64)]) -> Dataset {
        let recs: Vec<Record> = rows
            .iter()
            .map(|&(a, y)| Record { a, x: vec![], s: vec![], d: None, y, y0: None, y1: None })
            .collect();
        Dataset::new(recs, (0.0, 1.0)).unwrap()
    }

    #[test]
    fn constant_predictor_has_exactly_zero_rate_disparity_and_width() {
        let rows: Vec<(u8, f64)> = (0..12).map(|i| ((i % 3 == 0) as u8, 0.0)).collect();
        let data = fold(&rows);
        let fv = eval_fairness(
            &FairnessSpec { kind: FairnessKind::Rate, mode: FairnessMode::Observable },
            &data,
            None,
        )
        .unwrap();
        let preds = vec![0.7; 12];
        let est = estimate_disparity(&fv, &preds, 0.05).unwrap();
        assert_abs_diff_eq!(est.signed, 0.0, epsilon = 1e-12);
        // The estimator is invariant in the constant, so the influence
        // function vanishes identically.
        assert_abs_diff_eq!(est.ci_half, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn disparity_interval_scales_with_root_n() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let make = |n: usize, rng: &mut ChaCha8Rng| {
            let rows: Vec<(u8, f64)> = (0..n).map(|_| (u8::from(rng.gen_bool(0.4)), 0.0)).collect();
            let preds: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..1.0)).collect();
            (fold(&rows), preds)
        };
        let (d1, p1) = make(500, &mut rng);
        let (d2, p2) = make(50_000, &mut rng);
        let spec = FairnessSpec { kind: FairnessKind::Rate, mode: FairnessMode::Observable };
        let e1 = estimate_disparity(&eval_fairness(&spec, &d1, None).unwrap(), &p1, 0.05).unwrap();
        let e2 = estimate_disparity(&eval_fairness(&spec, &d2, None).unwrap(), &p2, 0.05).unwrap();
        let ratio = e1.ci_half / e2.ci_half;
        assert!(ratio > 6.0 && ratio < 16.0, "width ratio {ratio} off the 10x root-n scale");
    }

    fn mk_profile(id: usize, mse: f64, rate: f64) -> PerformanceProfile {
        PerformanceProfile {
            model_id: id,
            lambda: vec![],
            mse,
            mse_ci: 0.0,
            mse_negative: false,
            auc: None,
            auc_ci: None,
            disparities: vec![DisparityEstimate {
                label: "rate".into(),
                signed: rate,
                abs: rate.abs(),
                ci_half: 0.0,
            }],
            n: 100,
        }
    }

    #[test]
    fn min_norm_selection_and_tie_breaks() {
        let profiles = vec![
            mk_profile(0, 0.10, 0.30),
            mk_profile(1, 0.20, 0.05),
            mk_profile(2, 0.15, 0.08),
        ];
        // Pure error: model 0 wins.
        let m = select_min_norm(&profiles, &["mse".to_string()]).unwrap();
        assert_eq!(m.model_id, 0);
        // Error + rate: sqrt(.1^2+.3^2)=.316 vs sqrt(.04+.0025)=.206 vs sqrt(.0225+.0064)=.17.
        let m = select_min_norm(&profiles, &["mse".to_string(), "rate".to_string()]).unwrap();
        assert_eq!(m.model_id, 2);
        // Exact norm tie: lower mse wins, then lower id.
        let tied = vec![mk_profile(7, 0.3, 0.4), mk_profile(3, 0.4, 0.3), mk_profile(5, 0.3, 0.4)];
        let m = select_min_norm(&tied, &["mse".to_string(), "rate".to_string()]).unwrap();
        assert_eq!(m.model_id, 7);
        assert!(select_min_norm(&profiles, &["nope".to_string()]).is_err());
    }
}
