//! Observational data containers, CSV interchange, and fold splitting.
//!
//! A unit of analysis carries a binary sensitive attribute `a`, covariates
//! `x`, optional prior predictor scores `s`, an optional binary decision `d`,
//! the observed outcome `y`, and optional oracle potential outcomes `y0`/`y1`
//! (available only for synthetic data).

use std::collections::HashSet;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{FadeError, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Record {
    pub a: u8,
    pub x: Vec<f64>,
    pub s: Vec<f64>,
    pub d: Option<u8>,
    pub y: f64,
    pub y0: Option<f64>,
    pub y1: Option<f64>,
}

/// Maps CSV headers onto record roles. `x` and `s` may be empty; `d`, `y0`,
/// `y1` are optional. All named columns must be distinct.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ColumnRoles {
    pub a: String,
    pub y: String,
    #[serde(default)]
    pub d: Option<String>,
    #[serde(default)]
    pub x: Vec<String>,
    #[serde(default)]
    pub s: Vec<String>,
    #[serde(default)]
    pub y0: Option<String>,
    #[serde(default)]
    pub y1: Option<String>,
}

impl ColumnRoles {
    fn all_names(&self) -> Vec<&String> {
        let mut names = vec![&self.a, &self.y];
        names.extend(self.d.iter());
        names.extend(self.x.iter());
        names.extend(self.s.iter());
        names.extend(self.y0.iter());
        names.extend(self.y1.iter());
        names
    }
}

#[derive(Debug, Clone)]
pub struct Dataset {
    records: Vec<Record>,
    bounds: (f64, f64),
    a_name: String,
    y_name: String,
    d_name: Option<String>,
    x_names: Vec<String>,
    s_names: Vec<String>,
    y0_name: Option<String>,
    y1_name: Option<String>,
}

/// Five-way split: base-predictor learning, nuisance/target training halves,
/// and nuisance/target test halves.
#[derive(Debug, Clone)]
pub struct SplitFolds {
    pub learn: Dataset,
    pub train_nuis: Dataset,
    pub train_target: Dataset,
    pub test_nuis: Dataset,
    pub test_target: Dataset,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SplitPlan {
    /// Fractions for (learn, train_nuis, train_target, test_nuis, test_target);
    /// must sum to 1. Zero entries yield empty folds, which is legitimate when
    /// the fold is unused (e.g. nuisance folds with observable outcomes).
    pub fractions: [f64; 5],
    pub seed: u64,
    /// Number of cross-fitting folds used downstream; 1 disables cross-fitting.
    #[serde(default = "default_cross_fit_folds")]
    pub cross_fit_folds: usize,
}

fn default_cross_fit_folds() -> usize {
    1
}

pub const FOLD_NAMES: [&str; 5] = ["learn", "train_nuis", "train_target", "test_nuis", "test_target"];

impl Dataset {
    /// Validates and wraps records with default column names.
    pub fn new(records: Vec<Record>, bounds: (f64, f64)) -> Result<Self> {
        let p = records.first().map(|r| r.x.len()).unwrap_or(0);
        let q = records.first().map(|r| r.s.len()).unwrap_or(0);
        Self::with_names(
            records,
            bounds,
            "a".into(),
            "y".into(),
            Some("d".into()),
            (1..=p).map(|i| format!("x{i}")).collect(),
            (1..=q).map(|i| format!("s{i}")).collect(),
            Some("y0".into()),
            Some("y1".into()),
        )
    }

    #[allow(clippy::too_many_arguments)]
    pub fn with_names(
        records: Vec<Record>,
        bounds: (f64, f64),
        a_name: String,
        y_name: String,
        d_name: Option<String>,
        x_names: Vec<String>,
        s_names: Vec<String>,
        y0_name: Option<String>,
        y1_name: Option<String>,
    ) -> Result<Self> {
        let (lo, hi) = bounds;
        if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
            return Err(FadeError::Data(format!(
                "outcome bounds must be finite with lower < upper, got [{lo}, {hi}]"
            )));
        }
        let has_d = records.iter().any(|r| r.d.is_some());
        let has_y0 = records.iter().any(|r| r.y0.is_some());
        let has_y1 = records.iter().any(|r| r.y1.is_some());
        for (i, r) in records.iter().enumerate() {
            if r.x.len() != x_names.len() || r.s.len() != s_names.len() {
                return Err(FadeError::Data(format!(
                    "row {i}: covariate/score arity differs from the declared columns"
                )));
            }
            if r.a > 1 {
                return Err(FadeError::Data(format!("row {i}: sensitive attribute not binary")));
            }
            if r.d.is_some() != has_d || r.y0.is_some() != has_y0 || r.y1.is_some() != has_y1 {
                return Err(FadeError::Data(format!(
                    "row {i}: optional columns must be present for all rows or none"
                )));
            }
            if let Some(d) = r.d {
                if d > 1 {
                    return Err(FadeError::Data(format!("row {i}: decision not binary")));
                }
            }
            for (label, v) in [("y", Some(r.y)), ("y0", r.y0), ("y1", r.y1)] {
                if let Some(v) = v {
                    if !v.is_finite() || v < lo || v > hi {
                        return Err(FadeError::Data(format!(
                            "row {i}: {label} = {v} outside declared bounds [{lo}, {hi}]"
                        )));
                    }
                }
            }
            for v in r.x.iter().chain(r.s.iter()) {
                if !v.is_finite() {
                    return Err(FadeError::Data(format!("row {i}: non-finite covariate or score")));
                }
            }
            if let (Some(d), Some(y0), Some(y1)) = (r.d, r.y0, r.y1) {
                let expect = if d == 0 { y0 } else { y1 };
                if (r.y - expect).abs() > 1e-9 {
                    return Err(FadeError::Data(format!(
                        "row {i}: observed outcome inconsistent with the decision-selected potential outcome"
                    )));
                }
            }
        }
        Ok(Dataset {
            records,
            bounds,
            a_name,
            y_name,
            d_name: if has_d { d_name } else { None },
            x_names,
            s_names,
            y0_name: if has_y0 { y0_name } else { None },
            y1_name: if has_y1 { y1_name } else { None },
        })
    }

    pub fn n(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn bounds(&self) -> (f64, f64) {
        self.bounds
    }

    pub fn records(&self) -> &[Record] {
        &self.records
    }

    pub fn has_d(&self) -> bool {
        self.d_name.is_some() || self.records.iter().any(|r| r.d.is_some())
    }

    pub fn has_oracle(&self) -> bool {
        self.records.iter().any(|r| r.y0.is_some())
    }

    pub fn x_names(&self) -> &[String] {
        &self.x_names
    }

    pub fn s_names(&self) -> &[String] {
        &self.s_names
    }

    pub fn a_values(&self) -> Vec<f64> {
        self.records.iter().map(|r| f64::from(r.a)).collect()
    }

    pub fn y_values(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.y).collect()
    }

    pub fn d_values(&self) -> Option<Vec<f64>> {
        if !self.has_d() {
            return None;
        }
        Some(self.records.iter().map(|r| f64::from(r.d.unwrap())).collect())
    }

    pub fn y0_values(&self) -> Option<Vec<f64>> {
        if !self.has_oracle() {
            return None;
        }
        Some(self.records.iter().map(|r| r.y0.unwrap()).collect())
    }

    /// Feature column lookup over the sensitive attribute, covariates, and
    /// prior scores (the inputs a prediction function may depend on).
    pub fn feature_column(&self, name: &str) -> Option<Vec<f64>> {
        if name == self.a_name {
            return Some(self.a_values());
        }
        if let Some(j) = self.x_names.iter().position(|x| x == name) {
            return Some(self.records.iter().map(|r| r.x[j]).collect());
        }
        if let Some(j) = self.s_names.iter().position(|s| s == name) {
            return Some(self.records.iter().map(|r| r.s[j]).collect());
        }
        None
    }

    /// All feature names in canonical order (a, x..., s...).
    pub fn feature_names(&self) -> Vec<String> {
        let mut names = vec![self.a_name.clone()];
        names.extend(self.x_names.iter().cloned());
        names.extend(self.s_names.iter().cloned());
        names
    }

    /// New dataset holding the selected rows (indices may repeat).
    pub fn select(&self, idx: &[usize]) -> Dataset {
        Dataset {
            records: idx.iter().map(|&i| self.records[i].clone()).collect(),
            ..self.clone()
        }
    }

    /// Rows with d = 0 (the untreated subsample). Errors when no decision
    /// column is present.
    pub fn untreated(&self) -> Result<Dataset> {
        if !self.has_d() {
            return Err(FadeError::Data(
                "decision column required to restrict to untreated rows".into(),
            ));
        }
        let idx: Vec<usize> = self
            .records
            .iter()
            .enumerate()
            .filter(|(_, r)| r.d == Some(0))
            .map(|(i, _)| i)
            .collect();
        Ok(self.select(&idx))
    }

    pub fn mean_y(&self) -> f64 {
        crate::stats::mean(&self.y_values())
    }
}

/// Loads a dataset from a headed CSV file. Every row must provide a numeric
/// value for every role column; missing or non-numeric cells are rejected.
pub fn load_csv(path: &Path, roles: &ColumnRoles, bounds: (f64, f64)) -> Result<Dataset> {
    let names = roles.all_names();
    let mut seen = HashSet::new();
    for n in &names {
        if !seen.insert(n.as_str()) {
            return Err(FadeError::Data(format!("column `{n}` assigned to more than one role")));
        }
    }
    let mut reader = csv::Reader::from_path(path)?;
    let headers = reader.headers()?.clone();
    let find = |name: &str| -> Result<usize> {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| FadeError::Data(format!("column `{name}` not found in {}", path.display())))
    };
    let a_idx = find(&roles.a)?;
    let y_idx = find(&roles.y)?;
    let d_idx = roles.d.as_deref().map(find).transpose()?;
    let y0_idx = roles.y0.as_deref().map(find).transpose()?;
    let y1_idx = roles.y1.as_deref().map(find).transpose()?;
    let x_idx: Vec<usize> = roles.x.iter().map(|n| find(n)).collect::<Result<_>>()?;
    let s_idx: Vec<usize> = roles.s.iter().map(|n| find(n)).collect::<Result<_>>()?;

    let parse = |row: usize, field: &str, name: &str| -> Result<f64> {
        field.trim().parse::<f64>().map_err(|_| {
            FadeError::Data(format!("row {row}: missing or non-numeric value in column `{name}`"))
        })
    };
    let parse_bit = |row: usize, field: &str, name: &str| -> Result<u8> {
        match parse(row, field, name)? {
            v if v == 0.0 => Ok(0),
            v if v == 1.0 => Ok(1),
            v => Err(FadeError::Data(format!("row {row}: column `{name}` = {v} is not binary"))),
        }
    };

    let mut records = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let rec = rec?;
        let get = |j: usize| rec.get(j).unwrap_or("");
        records.push(Record {
            a: parse_bit(i, get(a_idx), &roles.a)?,
            x: x_idx
                .iter()
                .zip(&roles.x)
                .map(|(&j, n)| parse(i, get(j), n))
                .collect::<Result<_>>()?,
            s: s_idx
                .iter()
                .zip(&roles.s)
                .map(|(&j, n)| parse(i, get(j), n))
                .collect::<Result<_>>()?,
            d: d_idx
                .map(|j| parse_bit(i, get(j), roles.d.as_ref().unwrap()))
                .transpose()?,
            y: parse(i, get(y_idx), &roles.y)?,
            y0: y0_idx
                .map(|j| parse(i, get(j), roles.y0.as_ref().unwrap()))
                .transpose()?,
            y1: y1_idx
                .map(|j| parse(i, get(j), roles.y1.as_ref().unwrap()))
                .transpose()?,
        });
    }
    Dataset::with_names(
        records,
        bounds,
        roles.a.clone(),
        roles.y.clone(),
        roles.d.clone(),
        roles.x.clone(),
        roles.s.clone(),
        roles.y0.clone(),
        roles.y1.clone(),
    )
}

/// Writes the dataset to CSV with its stored column names. Loading the file
/// back with matching roles reproduces the dataset exactly.
pub fn save_csv(data: &Dataset, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header: Vec<String> = vec![data.a_name.clone()];
    header.extend(data.x_names.iter().cloned());
    header.extend(data.s_names.iter().cloned());
    if let Some(d) = &data.d_name {
        header.push(d.clone());
    }
    header.push(data.y_name.clone());
    if let Some(n) = &data.y0_name {
        header.push(n.clone());
    }
    if let Some(n) = &data.y1_name {
        header.push(n.clone());
    }
    w.write_record(&header)?;
    let fmt = |v: f64| {
        let mut buf = ryu_format(v);
        if buf.ends_with(".0") {
            buf.truncate(buf.len() - 2);
        }
        buf
    };
    for r in &data.records {
        let mut row: Vec<String> = vec![r.a.to_string()];
        row.extend(r.x.iter().map(|&v| fmt(v)));
        row.extend(r.s.iter().map(|&v| fmt(v)));
        if data.d_name.is_some() {
            row.push(r.d.unwrap().to_string());
        }
        row.push(fmt(r.y));
        if data.y0_name.is_some() {
            row.push(fmt(r.y0.unwrap()));
        }
        if data.y1_name.is_some() {
            row.push(fmt(r.y1.unwrap()));
        }
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Shortest decimal representation that round-trips the f64 exactly.
fn ryu_format(v: f64) -> String {
    let mut s = format!("{v}");
    if s.parse::<f64>().map(|b| b.to_bits()) != Ok(v.to_bits()) {
        s = format!("{v:?}");
    }
    s
}

/// Roles matching the canonical column names `save_csv` would write for this
/// dataset, for symmetric reloads.
pub fn roles_of(data: &Dataset) -> ColumnRoles {
    ColumnRoles {
        a: data.a_name.clone(),
        y: data.y_name.clone(),
        d: data.d_name.clone(),
        x: data.x_names.to_vec(),
        s: data.s_names.to_vec(),
        y0: data.y0_name.clone(),
        y1: data.y1_name.clone(),
    }
}

/// Fold sizes by largest-remainder rounding of `fractions * n`; remainders
/// break ties toward lower fold index so the split is fully deterministic.
fn fold_sizes(n: usize, fractions: &[f64; 5]) -> [usize; 5] {
    let mut sizes = [0usize; 5];
    let mut rems: Vec<(usize, f64)> = Vec::with_capacity(5);
    let mut assigned = 0usize;
    for (i, &f) in fractions.iter().enumerate() {
        let exact = f * n as f64;
        let base = exact.floor() as usize;
        sizes[i] = base;
        assigned += base;
        rems.push((i, exact - base as f64));
    }
    rems.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
    for k in 0..n.saturating_sub(assigned) {
        sizes[rems[k % 5].0] += 1;
    }
    sizes
}

/// Splits into the five folds by a seeded uniform permutation followed by
/// contiguous slicing. A fold with positive fraction must be nonempty.
pub fn split(data: &Dataset, plan: &SplitPlan) -> Result<SplitFolds> {
    let sum: f64 = plan.fractions.iter().sum();
    if (sum - 1.0).abs() > 1e-9 {
        return Err(FadeError::Config(format!("split fractions sum to {sum}, expected 1")));
    }
    if plan.fractions.iter().any(|&f| f < 0.0) {
        return Err(FadeError::Config("split fractions must be nonnegative".into()));
    }
    if plan.cross_fit_folds < 1 {
        return Err(FadeError::Config("cross_fit_folds must be at least 1".into()));
    }
    let n = data.n();
    let sizes = fold_sizes(n, &plan.fractions);
    for (i, (&sz, &f)) in sizes.iter().zip(plan.fractions.iter()).enumerate() {
        if f > 0.0 && sz == 0 {
            return Err(FadeError::Config(format!(
                "fold `{}` has positive fraction {f} but receives no rows at n = {n}",
                FOLD_NAMES[i]
            )));
        }
    }
    let mut idx: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(plan.seed);
    idx.shuffle(&mut rng);
    let mut offset = 0usize;
    let mut folds = Vec::with_capacity(5);
    for &sz in &sizes {
        folds.push(data.select(&idx[offset..offset + sz]));
        offset += sz;
    }
    let mut it = folds.into_iter();
    Ok(SplitFolds {
        learn: it.next().unwrap(),
        train_nuis: it.next().unwrap(),
        train_target: it.next().unwrap(),
        test_nuis: it.next().unwrap(),
        test_target: it.next().unwrap(),
    })
}

impl SplitFolds {
    pub fn as_array(&self) -> [&Dataset; 5] {
        [
            &self.learn,
            &self.train_nuis,
            &self.train_target,
            &self.test_nuis,
            &self.test_target,
        ]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn toy_records(n: usize) -> Vec<Record> {
        (0..n)
            .map(|i| Record {
                a: (i % 3 == 0) as u8,
                x: vec![i as f64 * 0.5, -(i as f64)],
                s: vec![0.25],
                d: Some((i % 2) as u8),
                y: if i % 2 == 0 { 0.25 } else { 0.75 },
                y0: Some(0.25),
                y1: Some(0.75),
            })
            .collect()
    }

    #[test]
    fn rejects_out_of_bounds_outcome() {
        let mut recs = toy_records(4);
        recs[2].y = 1.5;
        recs[2].y1 = Some(1.5);
        let err = Dataset::new(recs, (0.0, 1.0)).unwrap_err();
        assert!(matches!(err, FadeError::Data(_)));
    }

    #[test]
    fn rejects_inconsistent_observed_outcome() {
        let mut recs = toy_records(4);
        recs[1].y = 0.25; // d = 1 row must equal y1
        let err = Dataset::new(recs, (0.0, 1.0)).unwrap_err();
        assert!(matches!(err, FadeError::Data(_)));
    }

    #[test]
    fn rejects_nonbinary_attribute() {
        let mut recs = toy_records(4);
        recs[0].a = 2;
        assert!(Dataset::new(recs, (0.0, 1.0)).is_err());
    }

    #[test]
    fn equal_fifths_on_ten_rows() {
        let data = Dataset::new(toy_records(10), (0.0, 1.0)).unwrap();
        let plan = SplitPlan { fractions: [0.2; 5], seed: 1, cross_fit_folds: 1 };
        let folds = split(&data, &plan).unwrap();
        for f in folds.as_array() {
            assert_eq!(f.n(), 2);
        }
    }

    #[test]
    fn near_equal_fifths_on_awkward_count() {
        // 5188 rows into five equal fractions: every fold within one row of n/5.
        let data = Dataset::new(toy_records(5188), (0.0, 1.0)).unwrap();
        let plan = SplitPlan { fractions: [0.2; 5], seed: 9, cross_fit_folds: 1 };
        let folds = split(&data, &plan).unwrap();
        let total: usize = folds.as_array().iter().map(|f| f.n()).sum();
        assert_eq!(total, 5188);
        for f in folds.as_array() {
            assert!((f.n() as f64 - 5188.0 / 5.0).abs() <= 1.0);
        }
    }

    #[test]
    fn zero_fraction_folds_are_allowed_empty() {
        let data = Dataset::new(toy_records(40), (0.0, 1.0)).unwrap();
        let plan = SplitPlan { fractions: [0.5, 0.0, 0.25, 0.0, 0.25], seed: 3, cross_fit_folds: 1 };
        let folds = split(&data, &plan).unwrap();
        assert_eq!(folds.train_nuis.n(), 0);
        assert_eq!(folds.test_nuis.n(), 0);
        assert_eq!(folds.learn.n(), 20);
    }

    #[test]
    fn positive_fraction_with_no_rows_errors() {
        let data = Dataset::new(toy_records(10), (0.0, 1.0)).unwrap();
        let plan = SplitPlan { fractions: [0.96, 0.01, 0.01, 0.01, 0.01], seed: 3, cross_fit_folds: 1 };
        assert!(split(&data, &plan).is_err());
    }

    #[test]
    fn split_is_deterministic_in_seed() {
        let data = Dataset::new(toy_records(101), (0.0, 1.0)).unwrap();
        let plan = SplitPlan { fractions: [0.2, 0.2, 0.2, 0.2, 0.2], seed: 42, cross_fit_folds: 1 };
        let f1 = split(&data, &plan).unwrap();
        let f2 = split(&data, &plan).unwrap();
        for (a, b) in f1.as_array().iter().zip(f2.as_array()) {
            assert_eq!(a.records(), b.records());
        }
        let other = split(&data, &SplitPlan { seed: 43, ..plan.clone() }).unwrap();
        assert_ne!(f1.learn.records(), other.learn.records());
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("data.csv");
        let data = Dataset::new(toy_records(23), (0.0, 1.0)).unwrap();
        save_csv(&data, &path).unwrap();
        let back = load_csv(&path, &roles_of(&data), data.bounds()).unwrap();
        assert_eq!(data.records(), back.records());
    }

    #[test]
    fn csv_rejects_missing_cells() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.csv");
        std::fs::write(&path, "a,y\n0,0.5\n1,\n").unwrap();
        let roles = ColumnRoles {
            a: "a".into(),
            y: "y".into(),
            d: None,
            x: vec![],
            s: vec![],
            y0: None,
            y1: None,
        };
        assert!(load_csv(&path, &roles, (0.0, 1.0)).is_err());
    }

    #[test]
    fn csv_rejects_duplicate_roles() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("dup.csv");
        std::fs::write(&path, "a,y\n0,0.5\n").unwrap();
        let roles = ColumnRoles {
            a: "a".into(),
            y: "a".into(),
            d: None,
            x: vec![],
            s: vec![],
            y0: None,
            y1: None,
        };
        assert!(load_csv(&path, &roles, (0.0, 1.0)).is_err());
    }

    proptest! {
        #[test]
        fn split_partitions_every_row(n in 5usize..400, seed in 0u64..1000) {
            let data = Dataset::new(toy_records(n), (0.0, 1.0)).unwrap();
            let plan = SplitPlan { fractions: [0.3, 0.1, 0.25, 0.1, 0.25], seed, cross_fit_folds: 1 };
            if let Ok(folds) = split(&data, &plan) {
                let mut seen: Vec<(u64, i64)> = Vec::new();
                for f in folds.as_array() {
                    for r in f.records() {
                        seen.push((r.y.to_bits(), r.x[1] as i64));
                    }
                }
                prop_assert_eq!(seen.len(), n);
                // Row identity via the unique x[1] = -i coordinate.
                let mut ids: Vec<i64> = seen.iter().map(|(_, i)| -i).collect();
                ids.sort_unstable();
                let expect: Vec<i64> = (0..n as i64).collect();
                prop_assert_eq!(ids, expect);
            }
        }
    }
}
