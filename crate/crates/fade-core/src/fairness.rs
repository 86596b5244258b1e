//! Fairness criteria as per-unit weight vectors.
//!
//! Every supported criterion is a difference of two weighted prediction
//! means, encoded as one weight vector g with empirical normalizers so that
//! the sample disparity of a prediction vector f is just the mean of g·f.
//! Outcome-dependent criteria accept either the observed outcome or a
//! counterfactual proxy column (doubly robust pseudo-outcome or untreated
//! regression), with proxies clipped into [0, 1] where they act as cell
//! probabilities.

use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{FadeError, Result};
use crate::stats::mean;

/// Indicator over the four (attribute, binary outcome) cells. With a
/// probabilistic outcome proxy p the indicator is averaged over the cell
/// pair: weight = p * cell(a, 1) + (1 - p) * cell(a, 0).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CellIndicator {
    /// Membership flags indexed by [a][outcome].
    pub cells: [[bool; 2]; 2],
}

impl CellIndicator {
    pub fn single(a: usize, outcome: usize) -> Self {
        let mut cells = [[false; 2]; 2];
        cells[a][outcome] = true;
        CellIndicator { cells }
    }

    pub fn group(a: usize) -> Self {
        let mut cells = [[false; 2]; 2];
        cells[a] = [true, true];
        CellIndicator { cells }
    }

    fn weight(&self, a: u8, ytilde: f64) -> f64 {
        let row = self.cells[a as usize];
        ytilde * f64::from(row[1]) + (1.0 - ytilde) * f64::from(row[0])
    }

    fn describe(&self) -> String {
        let mut parts = Vec::new();
        for a in 0..2 {
            for o in 0..2 {
                if self.cells[a][o] {
                    parts.push(format!("A={a},outcome={o}"));
                }
            }
        }
        parts.join(" | ")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FairnessKind {
    /// Positive-prediction rate gap: mean f over A=0 minus over A=1.
    Rate,
    /// False-positive style gap: negative-outcome-weighted means, A=0 minus A=1.
    Fpr,
    /// False-negative style gap: positive-outcome-weighted means, A=1 minus A=0.
    Fnr,
    /// General two-cell contrast alpha_plus * mean_plus - alpha_minus * mean_minus.
    Custom {
        alpha_plus: f64,
        alpha_minus: f64,
        plus: CellIndicator,
        minus: CellIndicator,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FairnessMode {
    /// Outcome-dependent weights use the observed outcome.
    Observable,
    /// Outcome-dependent weights use a supplied counterfactual proxy.
    Counterfactual,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FairnessSpec {
    pub kind: FairnessKind,
    pub mode: FairnessMode,
}

impl FairnessSpec {
    pub fn label(&self) -> String {
        match &self.kind {
            FairnessKind::Rate => "rate".into(),
            FairnessKind::Fpr => "fpr".into(),
            FairnessKind::Fnr => "fnr".into(),
            FairnessKind::Custom { .. } => "custom".into(),
        }
    }

    /// Whether the weights depend on the (possibly counterfactual) outcome.
    pub fn outcome_dependent(&self) -> bool {
        match &self.kind {
            FairnessKind::Rate => false,
            FairnessKind::Fpr | FairnessKind::Fnr => true,
            FairnessKind::Custom { plus, minus, .. } => {
                let flat = |c: &CellIndicator| c.cells[0][0] == c.cells[0][1] && c.cells[1][0] == c.cells[1][1];
                !(flat(plus) && flat(minus))
            }
        }
    }
}

/// A fairness criterion evaluated on one fold: the combined weight vector g
/// plus the two term decompositions needed for delta-method variances.
#[derive(Debug, Clone)]
pub struct FairnessVector {
    pub label: String,
    pub g: Vec<f64>,
    pub plus_weights: Vec<f64>,
    pub minus_weights: Vec<f64>,
    pub alpha_plus: f64,
    pub alpha_minus: f64,
}

fn term_weights(
    cell: &CellIndicator,
    data: &Dataset,
    ytilde: Option<&[f64]>,
) -> Vec<f64> {
    data.records()
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let yt = ytilde.map(|v| v[i]).unwrap_or(0.0);
            cell.weight(r.a, yt)
        })
        .collect()
}

/// Builds the weight vector for a criterion on a fold. `proxy` supplies the
/// counterfactual outcome stand-in for outcome-dependent counterfactual
/// criteria and is clipped into [0, 1]; observable criteria use the observed
/// outcome, which must already lie in [0, 1] for outcome-dependent kinds.
pub fn eval_fairness(spec: &FairnessSpec, data: &Dataset, proxy: Option<&[f64]>) -> Result<FairnessVector> {
    let (alpha_plus, alpha_minus, plus, minus) = match &spec.kind {
        FairnessKind::Rate => (1.0, 1.0, CellIndicator::group(0), CellIndicator::group(1)),
        FairnessKind::Fpr => (1.0, 1.0, CellIndicator::single(0, 0), CellIndicator::single(1, 0)),
        FairnessKind::Fnr => (1.0, 1.0, CellIndicator::single(1, 1), CellIndicator::single(0, 1)),
        FairnessKind::Custom { alpha_plus, alpha_minus, plus, minus } => {
            if !alpha_plus.is_finite() || !alpha_minus.is_finite() || *alpha_plus < 0.0 || *alpha_minus < 0.0
            {
                return Err(FadeError::Config("custom fairness scale factors must be nonnegative".into()));
            }
            (*alpha_plus, *alpha_minus, *plus, *minus)
        }
    };

    let ytilde: Option<Vec<f64>> = if spec.outcome_dependent() {
        let vals = match spec.mode {
            FairnessMode::Observable => {
                let y = data.y_values();
                if y.iter().any(|&v| !(0.0..=1.0).contains(&v)) {
                    return Err(FadeError::Data(
                        "outcome-dependent criteria need outcomes in [0, 1]".into(),
                    ));
                }
                y
            }
            FairnessMode::Counterfactual => {
                let p = proxy.ok_or_else(|| {
                    FadeError::Data("counterfactual criterion needs an outcome proxy column".into())
                })?;
                if p.len() != data.n() {
                    return Err(FadeError::Data(format!(
                        "proxy has {} rows, fold has {}",
                        p.len(),
                        data.n()
                    )));
                }
                p.iter().map(|v| v.clamp(0.0, 1.0)).collect()
            }
        };
        Some(vals)
    } else {
        None
    };

    let plus_weights = term_weights(&plus, data, ytilde.as_deref());
    let minus_weights = term_weights(&minus, data, ytilde.as_deref());
    let mean_plus = mean(&plus_weights);
    let mean_minus = mean(&minus_weights);
    if !(mean_plus > 0.0) {
        return Err(FadeError::EmptyCell { cell: plus.describe() });
    }
    if !(mean_minus > 0.0) {
        return Err(FadeError::EmptyCell { cell: minus.describe() });
    }
    let g = plus_weights
        .iter()
        .zip(&minus_weights)
        .map(|(&wp, &wm)| alpha_plus * wp / mean_plus - alpha_minus * wm / mean_minus)
        .collect();
    Ok(FairnessVector {
        label: spec.label(),
        g,
        plus_weights,
        minus_weights,
        alpha_plus,
        alpha_minus,
    })
}

/// Signed sample disparity of a prediction vector: mean of g·f.
pub fn disparity(vector: &FairnessVector, f: &[f64]) -> Result<f64> {
    if vector.g.len() != f.len() {
        return Err(FadeError::Data(format!(
            "prediction vector has {} rows, fairness vector has {}",
            f.len(),
            vector.g.len()
        )));
    }
    Ok(vector.g.iter().zip(f).map(|(g, f)| g * f).sum::<f64>() / f.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::Record;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn tiny(rows: &[(u8, f64)]) -> Dataset {
        let recs: Vec<Record> = rows
            .iter()
            .map(|&(a, y)| Record { a, x: vec![], s: vec![], d: None, y, y0: None, y1: None })
            .collect();
        Dataset::new(recs, (0.0, 1.0)).unwrap()
    }

    /// Independent oracle: disparity as an explicit difference of weighted
    /// means, computed without constructing g.
    fn oracle_disparity(
        data: &Dataset,
        f: &[f64],
        ytilde: Option<&[f64]>,
        plus: CellIndicator,
        minus: CellIndicator,
        alphas: (f64, f64),
    ) -> f64 {
        let wmean = |cell: &CellIndicator| {
            let mut num = 0.0;
            let mut den = 0.0;
            for (i, r) in data.records().iter().enumerate() {
                let yt = ytilde.map(|v| v[i].clamp(0.0, 1.0)).unwrap_or(0.0);
                let w = cell.weight(r.a, yt);
                num += w * f[i];
                den += w;
            }
            num / den
        };
        alphas.0 * wmean(&plus) - alphas.1 * wmean(&minus)
    }

    #[test]
    fn rate_weights_match_group_frequencies() {
        // Expected entries derived from the definition with P(A=1) = 0.3:
        // (1-a)/0.7 = 10/7 and -a/0.3 = -10/3.
        let rows: Vec<(u8, f64)> = (0..10).map(|i| (u8::from(i < 3), 0.5)).collect();
        let data = tiny(&rows);
        let spec = FairnessSpec { kind: FairnessKind::Rate, mode: FairnessMode::Observable };
        let v = eval_fairness(&spec, &data, None).unwrap();
        for (i, g) in v.g.iter().enumerate() {
            let want = if i < 3 { -10.0 / 3.0 } else { 10.0 / 7.0 };
            assert_abs_diff_eq!(*g, want, epsilon = 1e-12);
        }
        assert_abs_diff_eq!(mean(&v.g), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn fpr_weights_on_one_row_per_cell() {
        // Four rows covering each (a, y) cell once; empirical cell means are
        // all 1/4, so the oracle gives +-(1/4)^-1 = +-4 on the negative-outcome
        // rows. Frozen from oracle_disparity applied to unit vectors.
        let data = tiny(&[(0, 0.0), (0, 1.0), (1, 0.0), (1, 1.0)]);
        let spec = FairnessSpec { kind: FairnessKind::Fpr, mode: FairnessMode::Observable };
        let v = eval_fairness(&spec, &data, None).unwrap();
        let frozen = [4.0, 0.0, -4.0, 0.0];
        for (g, want) in v.g.iter().zip(frozen) {
            assert_abs_diff_eq!(*g, want, epsilon = 1e-12);
        }
        // Cross-check every unit vector against the weighted-mean oracle.
        for i in 0..4 {
            let mut f = vec![0.0; 4];
            f[i] = 1.0;
            let want = oracle_disparity(
                &data,
                &f,
                Some(&data.y_values()),
                CellIndicator::single(0, 0),
                CellIndicator::single(1, 0),
                (1.0, 1.0),
            );
            assert_abs_diff_eq!(disparity(&v, &f).unwrap(), want, epsilon = 1e-12);
        }
    }

    #[test]
    fn fnr_orientation_is_group1_minus_group0() {
        let data = tiny(&[(0, 1.0), (0, 1.0), (1, 1.0), (1, 0.0)]);
        let spec = FairnessSpec { kind: FairnessKind::Fnr, mode: FairnessMode::Observable };
        let v = eval_fairness(&spec, &data, None).unwrap();
        // f favoring group 1 rows should produce a positive gap.
        let f = vec![0.0, 0.0, 1.0, 1.0];
        let got = disparity(&v, &f).unwrap();
        let want = oracle_disparity(
            &data,
            &f,
            Some(&data.y_values()),
            CellIndicator::single(1, 1),
            CellIndicator::single(0, 1),
            (1.0, 1.0),
        );
        assert_abs_diff_eq!(got, want, epsilon = 1e-12);
        assert!(got > 0.0);
    }

    #[test]
    fn identity_prediction_on_attribute_has_unit_rate_gap() {
        let rows: Vec<(u8, f64)> = (0..20).map(|i| (u8::from(i % 4 == 0), 0.0)).collect();
        let data = tiny(&rows);
        let spec = FairnessSpec { kind: FairnessKind::Rate, mode: FairnessMode::Observable };
        let v = eval_fairness(&spec, &data, None).unwrap();
        let f = data.a_values();
        assert_abs_diff_eq!(disparity(&v, &f).unwrap(), -1.0, epsilon = 1e-12);
    }

    #[test]
    fn empty_cell_is_reported() {
        let data = tiny(&[(1, 0.0), (1, 1.0)]);
        let spec = FairnessSpec { kind: FairnessKind::Rate, mode: FairnessMode::Observable };
        match eval_fairness(&spec, &data, None) {
            Err(FadeError::EmptyCell { cell }) => assert!(cell.contains("A=0")),
            other => panic!("expected empty-cell error, got {other:?}"),
        }
    }

    #[test]
    fn counterfactual_proxy_is_clipped() {
        let data = tiny(&[(0, 0.0), (1, 0.0)]);
        let spec = FairnessSpec { kind: FairnessKind::Fpr, mode: FairnessMode::Counterfactual };
        // Proxy outside [0,1] behaves as its clipped value.
        let v_wild = eval_fairness(&spec, &data, Some(&[-0.4, 1.7])).unwrap();
        let v_clip = eval_fairness(&spec, &data, Some(&[0.0, 1.0])).unwrap();
        assert_eq!(v_wild.g, v_clip.g);
    }

    #[test]
    fn counterfactual_outcome_dependent_requires_proxy() {
        let data = tiny(&[(0, 0.0), (1, 0.0)]);
        let spec = FairnessSpec { kind: FairnessKind::Fnr, mode: FairnessMode::Counterfactual };
        assert!(eval_fairness(&spec, &data, None).is_err());
        // Rate carries no outcome dependence, so no proxy is needed.
        let rate = FairnessSpec { kind: FairnessKind::Rate, mode: FairnessMode::Counterfactual };
        assert!(eval_fairness(&rate, &data, None).is_ok());
    }

    proptest! {
        /// The weight-vector disparity must agree with the direct
        /// weighted-group-mean contrast for every kind, sample, and
        /// prediction vector.
        #[test]
        fn disparity_matches_weighted_mean_oracle(
            raw in proptest::collection::vec((0u8..2, 0u8..2, 0.0f64..1.0), 8..60),
            kindsel in 0usize..3,
        ) {
            let rows: Vec<(u8, f64)> = raw.iter().map(|&(a, y, _)| (a, f64::from(y))).collect();
            let f: Vec<f64> = raw.iter().map(|&(_, _, p)| p).collect();
            let data = tiny(&rows);
            let (kind, plus, minus) = match kindsel {
                0 => (FairnessKind::Rate, CellIndicator::group(0), CellIndicator::group(1)),
                1 => (FairnessKind::Fpr, CellIndicator::single(0, 0), CellIndicator::single(1, 0)),
                _ => (FairnessKind::Fnr, CellIndicator::single(1, 1), CellIndicator::single(0, 1)),
            };
            let spec = FairnessSpec { kind, mode: FairnessMode::Observable };
            if let Ok(v) = eval_fairness(&spec, &data, None) {
                let got = disparity(&v, &f).unwrap();
                let want = oracle_disparity(&data, &f, Some(&data.y_values()), plus, minus, (1.0, 1.0));
                prop_assert!((got - want).abs() < 1e-12);
                // Built-in kinds center exactly.
                prop_assert!(mean(&v.g).abs() < 1e-12);
            }
        }
    }
}
