//! Ensemble basis assembly.
//!
//! A fitted predictor is a linear combination of basis columns evaluated per
//! unit: constant mean columns, raw features or prior scores, and externally
//! computed predictor columns. Assembly checks numerical conditioning of the
//! basis Gram matrix eagerly so downstream solves fail early with named
//! columns instead of deep inside a factorization.

use ndarray::{Array1, Array2};

use crate::dataset::Dataset;
use crate::error::{FadeError, Result};
use crate::fairness::FairnessMode;
use crate::linalg::sym_eigen;

/// Relative eigenvalue floor for the basis Gram matrix.
pub const EIG_TOL: f64 = 1e-8;

#[derive(Debug, Clone)]
pub enum BasisSource {
    /// Constant column carrying a precomputed outcome mean.
    Mean { value: f64 },
    /// A feature column of the dataset (attribute, covariate, or prior score).
    Feature { name: String },
    /// An externally computed predictor column aligned with the fold.
    Scores { name: String, values: Vec<f64> },
}

/// Identifies which basis produced a set of weights: `columns` hashes the
/// ordered column names (the basis definition), `fold` hashes the fold label
/// (the rows it was evaluated on).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BasisSignature {
    pub columns: u64,
    pub fold: u64,
}

impl std::fmt::Display for BasisSignature {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{:016x}:{:016x}", self.columns, self.fold)
    }
}

fn fnv1a(init: u64, bytes: &[u8]) -> u64 {
    let mut h = init;
    for &b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x1000_0000_01b3);
    }
    h
}

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;

#[derive(Debug, Clone)]
pub struct BasisMatrix {
    matrix: Array2<f64>,
    names: Vec<String>,
    signature: BasisSignature,
    bounds: (f64, f64),
}

/// Mean-column value: the average observed outcome, restricted to untreated
/// rows when targets are counterfactual.
pub fn mean_column_value(data: &Dataset, mode: FairnessMode) -> Result<f64> {
    match mode {
        FairnessMode::Observable => Ok(data.mean_y()),
        FairnessMode::Counterfactual => {
            let untreated = data.untreated()?;
            if untreated.is_empty() {
                return Err(FadeError::Data("no untreated rows to anchor the mean column".into()));
            }
            Ok(untreated.mean_y())
        }
    }
}

/// Evaluates the sources on a fold and verifies conditioning of the Gram
/// matrix. `fold_label` names the rows (it feeds the signature, so weights
/// cannot silently cross folds of a different basis).
pub fn assemble(data: &Dataset, sources: &[BasisSource], fold_label: &str) -> Result<BasisMatrix> {
    if sources.is_empty() {
        return Err(FadeError::Config("basis needs at least one column".into()));
    }
    let n = data.n();
    if n <= sources.len() {
        return Err(FadeError::Data(format!(
            "basis with {} columns needs more than {} rows",
            sources.len(),
            n
        )));
    }
    let mut names = Vec::with_capacity(sources.len());
    let mut matrix = Array2::<f64>::zeros((n, sources.len()));
    for (j, src) in sources.iter().enumerate() {
        match src {
            BasisSource::Mean { value } => {
                if !value.is_finite() {
                    return Err(FadeError::Data("mean column value must be finite".into()));
                }
                names.push("mean".to_string());
                matrix.column_mut(j).fill(*value);
            }
            BasisSource::Feature { name } => {
                let col = data
                    .feature_column(name)
                    .ok_or_else(|| FadeError::Data(format!("unknown feature column `{name}`")))?;
                names.push(name.clone());
                for (i, v) in col.into_iter().enumerate() {
                    matrix[[i, j]] = v;
                }
            }
            BasisSource::Scores { name, values } => {
                if values.len() != n {
                    return Err(FadeError::Data(format!(
                        "score column `{name}` has {} rows, fold has {n}",
                        values.len()
                    )));
                }
                if values.iter().any(|v| !v.is_finite()) {
                    return Err(FadeError::Data(format!("score column `{name}` has non-finite values")));
                }
                names.push(name.clone());
                for (i, &v) in values.iter().enumerate() {
                    matrix[[i, j]] = v;
                }
            }
        }
    }

    // Conditioning gate on Pn(b bᵀ).
    let gram = matrix.t().dot(&matrix) / n as f64;
    let (vals, vecs) = sym_eigen(&gram);
    let k = sources.len();
    let max_eig = vals[k - 1].max(0.0);
    let min_eig = vals[0];
    if !(max_eig > 0.0) || min_eig < EIG_TOL * max_eig {
        let v = vecs.column(0);
        let peak = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        let columns: Vec<String> = names
            .iter()
            .zip(v.iter())
            .filter(|(_, &load)| load.abs() > 0.1 * peak)
            .map(|(n, _)| n.clone())
            .collect();
        return Err(FadeError::IllConditioned {
            ratio: if max_eig > 0.0 { min_eig / max_eig } else { 0.0 },
            tol: EIG_TOL,
            columns,
        });
    }

    let mut columns_hash = FNV_OFFSET;
    for name in &names {
        columns_hash = fnv1a(columns_hash, name.as_bytes());
        columns_hash = fnv1a(columns_hash, &[0xff]);
    }
    Ok(BasisMatrix {
        matrix,
        names,
        signature: BasisSignature {
            columns: columns_hash,
            fold: fnv1a(FNV_OFFSET, fold_label.as_bytes()),
        },
        bounds: data.bounds(),
    })
}

impl BasisMatrix {
    pub fn n(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn k(&self) -> usize {
        self.matrix.ncols()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn signature(&self) -> BasisSignature {
        self.signature
    }

    pub fn bounds(&self) -> (f64, f64) {
        self.bounds
    }

    pub fn matrix(&self) -> &Array2<f64> {
        &self.matrix
    }

    /// Linear predictions b(w)ᵀ beta. Optimization works with the raw linear
    /// values; `truncate` clips into the outcome bounds for evaluation and
    /// deployment.
    pub fn predict(&self, beta: &Array1<f64>, truncate: bool) -> Result<Vec<f64>> {
        if beta.len() != self.k() {
            return Err(FadeError::Data(format!(
                "weight vector has {} entries, basis has {} columns",
                beta.len(),
                self.k()
            )));
        }
        let raw = self.matrix.dot(beta);
        let (lo, hi) = self.bounds;
        Ok(raw
            .into_iter()
            .map(|v| if truncate { v.clamp(lo, hi) } else { v })
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::Record;
    use approx::assert_abs_diff_eq;
    use ndarray::array;

    fn data_with(xs: &[(f64, f64)]) -> Dataset {
        let recs: Vec<Record> = xs
            .iter()
            .enumerate()
            .map(|(i, &(x1, x2))| Record {
                a: (i % 2) as u8,
                x: vec![x1, x2],
                s: vec![],
                d: Some((i % 3 == 0) as u8),
                y: if i % 3 == 0 { 0.0 } else { 1.0 },
                y0: None,
                y1: None,
            })
            .collect();
        Dataset::new(recs, (0.0, 1.0)).unwrap()
    }

    #[test]
    fn mean_value_modes() {
        // Untreated outcomes are the i % 3 != 0 rows... inverted: d=1 when
        // i % 3 == 0, so untreated y are all 1.
        let data = data_with(&[(0.0, 1.0), (1.0, 2.0), (2.0, 0.5), (3.0, -1.0)]);
        assert_abs_diff_eq!(
            mean_column_value(&data, FairnessMode::Counterfactual).unwrap(),
            1.0,
            epsilon = 1e-15
        );
        assert_abs_diff_eq!(
            mean_column_value(&data, FairnessMode::Observable).unwrap(),
            0.5,
            epsilon = 1e-15
        );
    }

    #[test]
    fn assemble_lays_out_columns() {
        let data = data_with(&[(0.0, 1.0), (1.0, 2.0), (2.0, 0.5), (3.0, -1.0)]);
        let basis = assemble(
            &data,
            &[
                BasisSource::Mean { value: 0.25 },
                BasisSource::Feature { name: "x1".into() },
                BasisSource::Scores { name: "ext".into(), values: vec![0.1, 0.2, 0.3, 0.4] },
            ],
            "train",
        )
        .unwrap();
        assert_eq!(basis.names(), &["mean", "x1", "ext"]);
        let m = basis.matrix();
        for i in 0..4 {
            assert_abs_diff_eq!(m[[i, 0]], 0.25, epsilon = 1e-15);
            assert_abs_diff_eq!(m[[i, 1]], i as f64, epsilon = 1e-15);
            assert_abs_diff_eq!(m[[i, 2]], 0.1 * (i + 1) as f64, epsilon = 1e-15);
        }
    }

    #[test]
    fn predictions_match_rowwise_dot_oracle() {
        let data = data_with(&[(0.0, 1.0), (1.0, 2.0), (2.0, 0.5), (3.0, -1.0), (0.5, 0.5)]);
        let basis = assemble(
            &data,
            &[
                BasisSource::Mean { value: 1.0 },
                BasisSource::Feature { name: "x1".into() },
                BasisSource::Feature { name: "x2".into() },
            ],
            "train",
        )
        .unwrap();
        let beta = array![0.3, 0.5, -0.2];
        let preds = basis.predict(&beta, false).unwrap();
        for (i, r) in data.records().iter().enumerate() {
            let want = 0.3 + 0.5 * r.x[0] - 0.2 * r.x[1];
            assert_abs_diff_eq!(preds[i], want, epsilon = 1e-14);
        }
        // Truncated view clips into the outcome bounds.
        let clipped = basis.predict(&beta, true).unwrap();
        for (c, p) in clipped.iter().zip(&preds) {
            assert_abs_diff_eq!(*c, p.clamp(0.0, 1.0), epsilon = 1e-15);
        }
    }

    #[test]
    fn duplicate_columns_are_rejected_by_name() {
        let data = data_with(&[(0.0, 1.0), (1.0, 2.0), (2.0, 0.5), (3.0, -1.0)]);
        let err = assemble(
            &data,
            &[
                BasisSource::Feature { name: "x1".into() },
                BasisSource::Feature { name: "x1".into() },
            ],
            "train",
        )
        .unwrap_err();
        match err {
            FadeError::IllConditioned { columns, .. } => {
                assert!(columns.iter().any(|c| c == "x1"));
            }
            other => panic!("expected conditioning error, got {other:?}"),
        }
    }

    #[test]
    fn signature_tracks_columns_and_fold() {
        let data = data_with(&[(0.0, 1.0), (1.0, 2.0), (2.0, 0.5), (3.0, -1.0)]);
        let srcs = [BasisSource::Mean { value: 0.5 }, BasisSource::Feature { name: "x1".into() }];
        let b1 = assemble(&data, &srcs, "train").unwrap();
        let b2 = assemble(&data, &srcs, "train").unwrap();
        let b3 = assemble(&data, &srcs, "test").unwrap();
        assert_eq!(b1.signature(), b2.signature());
        assert_eq!(b1.signature().columns, b3.signature().columns);
        assert_ne!(b1.signature().fold, b3.signature().fold);
        let b4 = assemble(
            &data,
            &[BasisSource::Mean { value: 0.5 }, BasisSource::Feature { name: "x2".into() }],
            "train",
        )
        .unwrap();
        assert_ne!(b1.signature().columns, b4.signature().columns);
    }

    #[test]
    fn too_few_rows_is_an_error() {
        let data = data_with(&[(0.0, 1.0), (1.0, 2.0)]);
        let err = assemble(
            &data,
            &[
                BasisSource::Feature { name: "x1".into() },
                BasisSource::Feature { name: "x2".into() },
            ],
            "train",
        );
        assert!(err.is_err());
    }
}
