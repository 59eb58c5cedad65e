//! Ridge regression on standardized features, with AIC backward elimination,
//! collinearity pruning and group-disjoint cross-validation.

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::rng::SeededRng;

#[derive(Debug, Error, PartialEq)]
pub enum RegressError {
    #[error("need at least 2 rows, got {0}")]
    TooFewRows(usize),
    #[error("row {row} has {got} values, expected {expected}")]
    RaggedRow { row: usize, got: usize, expected: usize },
    #[error("non-finite value in row {0}")]
    NonFinite(usize),
    #[error("{groups} distinct instances cannot fill {folds} folds")]
    TooFewGroups { groups: usize, folds: usize },
    #[error("feature `{0}` is missing from the input")]
    MissingFeature(String),
    #[error("feature schema mismatch: model expects {expected}, input has {got}")]
    SchemaMismatch { expected: String, got: String },
    #[error("invalid training config: {0}")]
    InvalidConfig(String),
    #[error("model document: {0}")]
    Document(String),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub lambda_grid: Vec<f64>,
    pub folds: usize,
    /// Folds of the inner validation that picks lambda.
    pub inner_folds: usize,
    pub vif_threshold: f64,
    pub aic_elimination: bool,
    pub collinearity_pruning: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            lambda_grid: vec![1e-6, 1e-4, 1e-2, 1.0, 10.0, 100.0],
            folds: 10,
            inner_folds: 5,
            vif_threshold: 10.0,
            aic_elimination: true,
            collinearity_pruning: true,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), RegressError> {
        if self.lambda_grid.is_empty() || self.lambda_grid.iter().any(|l| !(l.is_finite() && *l >= 0.0)) {
            return Err(RegressError::InvalidConfig("lambda grid must be non-empty and non-negative".into()));
        }
        if self.folds < 2 || self.inner_folds < 2 {
            return Err(RegressError::InvalidConfig("fold counts must be at least 2".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub means: Vec<f64>,
    pub sds: Vec<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainingMetadata {
    pub rows: usize,
    pub dataset_hash: String,
    pub fold_seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RidgeModel {
    /// Column order of the vectors the model is queried with.
    pub input_features: Vec<String>,
    pub schema_hash: String,
    pub retained_features: Vec<String>,
    pub retained_index: Vec<usize>,
    pub standardizer: Standardizer,
    /// Coefficients of the standardized retained features.
    pub weights: Vec<f64>,
    pub intercept: f64,
    pub lambda: f64,
    pub metadata: TrainingMetadata,
}

impl RidgeModel {
    pub fn predict(&self, row: &[f64]) -> f64 {
        self.intercept
            + self
                .retained_index
                .iter()
                .zip(&self.weights)
                .zip(self.standardizer.means.iter().zip(&self.standardizer.sds))
                .map(|((&j, w), (m, s))| w * (row[j] - m) / s)
                .sum::<f64>()
    }

    /// Predicts from a vector with its own column names.
    pub fn predict_named(&self, names: &[String], row: &[f64]) -> Result<f64, RegressError> {
        let mut full = vec![0.0; self.input_features.len()];
        for &j in &self.retained_index {
            let name = &self.input_features[j];
            let i = names.iter().position(|n| n == name).ok_or_else(|| RegressError::MissingFeature(name.clone()))?;
            full[j] = row[i];
        }
        Ok(self.predict(&full))
    }

    pub fn check_schema(&self, names: &[String]) -> Result<(), RegressError> {
        let got = schema_hash(names);
        if got != self.schema_hash {
            return Err(RegressError::SchemaMismatch { expected: self.schema_hash.clone(), got });
        }
        Ok(())
    }

    /// Intercept and per-input coefficients in raw feature units.
    pub fn raw_coefficients(&self) -> (f64, Vec<f64>) {
        let mut coef = vec![0.0; self.input_features.len()];
        let mut intercept = self.intercept;
        for (k, &j) in self.retained_index.iter().enumerate() {
            let c = self.weights[k] / self.standardizer.sds[k];
            coef[j] = c;
            intercept -= c * self.standardizer.means[k];
        }
        (intercept, coef)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, RegressError> {
        serde_json::from_str(text).map_err(|e| RegressError::Document(e.to_string()))
    }
}

pub fn schema_hash(names: &[String]) -> String {
    let mut h = Sha256::new();
    for n in names {
        h.update(n.as_bytes());
        h.update(b"\n");
    }
    hex::encode(h.finalize())
}

pub fn dataset_hash(x: &[Vec<f64>], y: &[f64], groups: &[String]) -> String {
    let mut h = Sha256::new();
    for ((row, t), g) in x.iter().zip(y).zip(groups) {
        h.update(g.as_bytes());
        for v in row.iter().chain(std::iter::once(t)) {
            h.update(v.to_bits().to_le_bytes());
        }
    }
    hex::encode(h.finalize())
}

fn check_inputs(x: &[Vec<f64>], y: &[f64]) -> Result<usize, RegressError> {
    if x.len() < 2 || y.len() != x.len() {
        return Err(RegressError::TooFewRows(x.len().min(y.len())));
    }
    let p = x[0].len();
    for (i, row) in x.iter().enumerate() {
        if row.len() != p {
            return Err(RegressError::RaggedRow { row: i, got: row.len(), expected: p });
        }
        if row.iter().any(|v| !v.is_finite()) || !y[i].is_finite() {
            return Err(RegressError::NonFinite(i));
        }
    }
    Ok(p)
}

/// Standardized design over a set of columns: `Z`, centered `y`, and `Z'Z`, `Z'y`.
struct Design {
    columns: Vec<usize>,
    means: Vec<f64>,
    sds: Vec<f64>,
    z: DMatrix<f64>,
    yc: DVector<f64>,
    y_mean: f64,
    gram: DMatrix<f64>,
    zy: DVector<f64>,
}

impl Design {
    fn new(x: &[Vec<f64>], y: &[f64], rows: &[usize], columns: &[usize]) -> Design {
        let n = rows.len();
        let nf = n as f64;
        let y_mean = rows.iter().map(|&r| y[r]).sum::<f64>() / nf;
        let mut means = Vec::with_capacity(columns.len());
        let mut sds = Vec::with_capacity(columns.len());
        for &c in columns {
            let m = rows.iter().map(|&r| x[r][c]).sum::<f64>() / nf;
            let v = rows.iter().map(|&r| (x[r][c] - m).powi(2)).sum::<f64>() / nf;
            means.push(m);
            sds.push(v.sqrt());
        }
        let z = DMatrix::from_fn(n, columns.len(), |i, k| (x[rows[i]][columns[k]] - means[k]) / sds[k]);
        let yc = DVector::from_fn(n, |i, _| y[rows[i]] - y_mean);
        let gram = z.tr_mul(&z);
        let zy = z.tr_mul(&yc);
        Design { columns: columns.to_vec(), means, sds, z, yc, y_mean, gram, zy }
    }

    fn rows(&self) -> usize {
        self.z.nrows()
    }

    /// Ridge weights on a subset of design positions.
    fn solve(&self, subset: &[usize], lambda: f64) -> Vec<f64> {
        if subset.is_empty() {
            return Vec::new();
        }
        let k = subset.len();
        let a = DMatrix::from_fn(k, k, |i, j| self.gram[(subset[i], subset[j])] + if i == j { lambda } else { 0.0 });
        let b = DVector::from_fn(k, |i, _| self.zy[subset[i]]);
        let w = solve_spd(a, &b);
        w.iter().copied().collect()
    }

    fn rss(&self, subset: &[usize], w: &[f64]) -> f64 {
        (0..self.rows())
            .map(|i| {
                let fit: f64 = subset.iter().zip(w).map(|(&k, wk)| self.z[(i, k)] * wk).sum();
                (self.yc[i] - fit).powi(2)
            })
            .sum()
    }

    fn tss(&self) -> f64 {
        self.yc.norm_squared()
    }
}

/// Solves a symmetric positive (semi)definite system, adding diagonal jitter if needed.
fn solve_spd(a: DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
    let scale = (0..a.nrows()).map(|i| a[(i, i)].abs()).fold(0.0, f64::max).max(1.0);
    let mut jitter = 0.0;
    loop {
        let mut m = a.clone();
        for i in 0..m.nrows() {
            m[(i, i)] += jitter;
        }
        if let Some(ch) = m.cholesky() {
            return ch.solve(b);
        }
        jitter = if jitter == 0.0 { scale * 1e-12 } else { jitter * 10.0 };
    }
}

fn model_from(design: &Design, subset: &[usize], w: Vec<f64>, lambda: f64, names: &[String]) -> RidgeModel {
    let retained_index: Vec<usize> = subset.iter().map(|&k| design.columns[k]).collect();
    RidgeModel {
        input_features: names.to_vec(),
        schema_hash: schema_hash(names),
        retained_features: retained_index.iter().map(|&j| names[j].clone()).collect(),
        standardizer: Standardizer {
            means: subset.iter().map(|&k| design.means[k]).collect(),
            sds: subset.iter().map(|&k| design.sds[k]).collect(),
        },
        retained_index,
        weights: w,
        intercept: design.y_mean,
        lambda,
        metadata: TrainingMetadata { rows: design.rows(), ..Default::default() },
    }
}

/// Columns with non-zero variance over `rows`.
fn varying_columns(x: &[Vec<f64>], rows: &[usize], p: usize) -> Vec<usize> {
    (0..p).filter(|&c| rows.iter().any(|&r| x[r][c] != x[rows[0]][c])).collect()
}

fn default_names(p: usize) -> Vec<String> {
    (0..p).map(|i| format!("x{}", i + 1)).collect()
}

/// `argmin ||y - Xw - b||^2 + lambda ||w||^2` on standardized features; constant
/// columns get no weight.
pub fn fit_ridge(x: &[Vec<f64>], y: &[f64], lambda: f64) -> Result<RidgeModel, RegressError> {
    let p = check_inputs(x, y)?;
    fit_ridge_named(&default_names(p), x, y, lambda)
}

pub fn fit_ridge_named(names: &[String], x: &[Vec<f64>], y: &[f64], lambda: f64) -> Result<RidgeModel, RegressError> {
    let p = check_inputs(x, y)?;
    let rows: Vec<usize> = (0..x.len()).collect();
    let design = Design::new(x, y, &rows, &varying_columns(x, &rows, p));
    let subset: Vec<usize> = (0..design.columns.len()).collect();
    let w = design.solve(&subset, lambda);
    Ok(model_from(&design, &subset, w, lambda, names))
}

/// Gaussian AIC `n ln(RSS / n) + 2k`, with `k` counting the intercept.
/// RSS is floored at a tiny fraction of the total sum of squares.
pub fn aic(n: usize, rss: f64, tss: f64, num_features: usize) -> f64 {
    let floor = (tss * 1e-12).max(f64::MIN_POSITIVE);
    let nf = n as f64;
    nf * (rss.max(floor) / nf).ln() + 2.0 * (num_features as f64 + 1.0)
}

/// Drops the feature with the smallest |standardized coefficient| while AIC improves.
fn eliminate_aic(design: &Design, mut subset: Vec<usize>, lambda: f64) -> Vec<usize> {
    if subset.len() < 2 {
        return subset;
    }
    let n = design.rows();
    let tss = design.tss();
    let mut w = design.solve(&subset, lambda);
    let mut current = aic(n, design.rss(&subset, &w), tss, subset.len());
    while !subset.is_empty() {
        let drop = (0..subset.len())
            .rev()
            .min_by(|&a, &b| w[a].abs().total_cmp(&w[b].abs()))
            .expect("non-empty subset");
        let mut candidate = subset.clone();
        candidate.remove(drop);
        let cw = design.solve(&candidate, lambda);
        let next = aic(n, design.rss(&candidate, &cw), tss, candidate.len());
        if next >= current {
            break;
        }
        subset = candidate;
        w = cw;
        current = next;
    }
    subset
}

/// Variance inflation factors of the subset, from the inverse correlation matrix.
fn vifs(design: &Design, subset: &[usize]) -> Vec<f64> {
    let k = subset.len();
    let n = design.rows() as f64;
    let corr = DMatrix::from_fn(k, k, |i, j| design.gram[(subset[i], subset[j])] / n);
    let mut m = corr;
    for i in 0..k {
        m[(i, i)] += 1e-10;
    }
    match m.cholesky() {
        Some(ch) => ch.inverse().diagonal().iter().copied().collect(),
        None => vec![f64::INFINITY; k],
    }
}

/// Drops the highest-VIF feature while any VIF exceeds `threshold`; near-ties go to the later feature.
fn eliminate_collinear_in(design: &Design, mut subset: Vec<usize>, threshold: f64) -> Vec<usize> {
    while subset.len() >= 2 {
        let v = vifs(design, &subset);
        let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if max <= threshold {
            break;
        }
        let drop = (0..v.len()).rev().find(|&i| v[i] >= max * (1.0 - 1e-9)).expect("max exists");
        subset.remove(drop);
    }
    subset
}

/// Backward AIC elimination over all varying columns; returns retained column indices.
pub fn backward_eliminate_aic(x: &[Vec<f64>], y: &[f64], lambda: f64) -> Result<Vec<usize>, RegressError> {
    let p = check_inputs(x, y)?;
    let rows: Vec<usize> = (0..x.len()).collect();
    let design = Design::new(x, y, &rows, &varying_columns(x, &rows, p));
    let kept = eliminate_aic(&design, (0..design.columns.len()).collect(), lambda);
    Ok(kept.into_iter().map(|k| design.columns[k]).collect())
}

/// Collinearity pruning of `retained` columns by VIF.
pub fn eliminate_collinear(x: &[Vec<f64>], retained: &[usize], threshold: f64) -> Result<Vec<usize>, RegressError> {
    let y = vec![0.0; x.len()];
    check_inputs(x, &y)?;
    let rows: Vec<usize> = (0..x.len()).collect();
    let varying = varying_columns(x, &rows, x[0].len());
    let columns: Vec<usize> = retained.iter().copied().filter(|c| varying.contains(c)).collect();
    let design = Design::new(x, &y, &rows, &columns);
    let kept = eliminate_collinear_in(&design, (0..columns.len()).collect(), threshold);
    Ok(kept.into_iter().map(|k| columns[k]).collect())
}

/// Assigns each row a fold so that rows sharing a group share a fold.
pub fn assign_folds(groups: &[String], folds: usize, seed: u64) -> Result<Vec<usize>, RegressError> {
    let mut unique: Vec<&String> = groups.iter().collect();
    unique.sort();
    unique.dedup();
    if unique.len() < folds {
        return Err(RegressError::TooFewGroups { groups: unique.len(), folds });
    }
    let mut rng = SeededRng::seed_from_u64(seed);
    unique.shuffle(&mut rng);
    let fold_of: std::collections::BTreeMap<&String, usize> = unique.iter().enumerate().map(|(i, g)| (*g, i % folds)).collect();
    Ok(groups.iter().map(|g| fold_of[g]).collect())
}

/// Picks lambda by group-disjoint validation over `rows`.
fn select_lambda(x: &[Vec<f64>], y: &[f64], groups: &[String], rows: &[usize], columns: &[usize], cfg: &TrainConfig, seed: u64) -> f64 {
    if cfg.lambda_grid.len() == 1 {
        return cfg.lambda_grid[0];
    }
    let sub_groups: Vec<String> = rows.iter().map(|&r| groups[r].clone()).collect();
    let distinct = {
        let mut g = sub_groups.clone();
        g.sort();
        g.dedup();
        g.len()
    };
    let k = cfg.inner_folds.min(distinct);
    if k < 2 {
        return cfg.lambda_grid[0];
    }
    let folds = assign_folds(&sub_groups, k, seed).expect("k bounded by groups");
    let mut sse = vec![0.0; cfg.lambda_grid.len()];
    for f in 0..k {
        let train: Vec<usize> = rows.iter().zip(&folds).filter(|(_, &g)| g != f).map(|(&r, _)| r).collect();
        let test: Vec<usize> = rows.iter().zip(&folds).filter(|(_, &g)| g == f).map(|(&r, _)| r).collect();
        let cols: Vec<usize> = columns.iter().copied().filter(|&c| varying_columns(x, &train, x[0].len()).contains(&c)).collect();
        let design = Design::new(x, y, &train, &cols);
        let subset: Vec<usize> = (0..cols.len()).collect();
        for (li, &lambda) in cfg.lambda_grid.iter().enumerate() {
            let model = model_from(&design, &subset, design.solve(&subset, lambda), lambda, &default_names(x[0].len()));
            sse[li] += test.iter().map(|&r| (model.predict(&x[r]) - y[r]).powi(2)).sum::<f64>();
        }
    }
    let best = (0..sse.len()).min_by(|&a, &b| sse[a].total_cmp(&sse[b])).expect("non-empty grid");
    cfg.lambda_grid[best]
}

/// Full training pipeline on `rows`: lambda selection, AIC elimination, collinearity pruning, refit.
fn train_rows(names: &[String], x: &[Vec<f64>], y: &[f64], groups: &[String], rows: &[usize], cfg: &TrainConfig, seed: u64) -> RidgeModel {
    let columns = varying_columns(x, rows, names.len());
    let lambda = select_lambda(x, y, groups, rows, &columns, cfg, seed);
    let design = Design::new(x, y, rows, &columns);
    let mut subset: Vec<usize> = (0..columns.len()).collect();
    if cfg.aic_elimination {
        subset = eliminate_aic(&design, subset, lambda);
    }
    if cfg.collinearity_pruning {
        subset = eliminate_collinear_in(&design, subset, cfg.vif_threshold);
    }
    let w = design.solve(&subset, lambda);
    model_from(&design, &subset, w, lambda, names)
}

/// Trains on every row.
pub fn train(names: &[String], x: &[Vec<f64>], y: &[f64], groups: &[String], cfg: &TrainConfig, seed: u64) -> Result<RidgeModel, RegressError> {
    cfg.validate()?;
    let p = check_inputs(x, y)?;
    if names.len() != p {
        return Err(RegressError::RaggedRow { row: 0, got: p, expected: names.len() });
    }
    let rows: Vec<usize> = (0..x.len()).collect();
    let mut model = train_rows(names, x, y, groups, &rows, cfg, seed);
    model.metadata = TrainingMetadata { rows: x.len(), dataset_hash: dataset_hash(x, y, groups), fold_seed: seed };
    Ok(model)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CvResult {
    /// Out-of-fold prediction per row.
    pub predictions: Vec<f64>,
    pub fold_of_row: Vec<usize>,
    pub lambdas: Vec<f64>,
    pub retained_per_fold: Vec<Vec<String>>,
}

/// k-fold cross-validation with instance-disjoint folds.
pub fn cross_validate(names: &[String], x: &[Vec<f64>], y: &[f64], groups: &[String], cfg: &TrainConfig, seed: u64) -> Result<CvResult, RegressError> {
    cfg.validate()?;
    check_inputs(x, y)?;
    let fold_of_row = assign_folds(groups, cfg.folds, seed)?;
    let mut predictions = vec![f64::NAN; x.len()];
    let mut lambdas = Vec::new();
    let mut retained_per_fold = Vec::new();
    for f in 0..cfg.folds {
        let train: Vec<usize> = (0..x.len()).filter(|&r| fold_of_row[r] != f).collect();
        let model = train_rows(names, x, y, groups, &train, cfg, seed ^ (f as u64 + 1));
        for r in (0..x.len()).filter(|&r| fold_of_row[r] == f) {
            predictions[r] = model.predict(&x[r]);
        }
        lambdas.push(model.lambda);
        retained_per_fold.push(model.retained_features);
    }
    Ok(CvResult { predictions, fold_of_row, lambdas, retained_per_fold })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand_distr::StandardNormal;

    fn normal(rng: &mut impl Rng) -> f64 {
        rng.sample(StandardNormal)
    }

    /// Ordinary least squares by Gaussian elimination on the raw normal equations.
    fn ols_oracle(x: &[Vec<f64>], y: &[f64]) -> Vec<f64> {
        let p = x[0].len() + 1;
        let mut a = vec![vec![0.0; p + 1]; p];
        for (row, &t) in x.iter().zip(y) {
            let r: Vec<f64> = std::iter::once(1.0).chain(row.iter().copied()).collect();
            for i in 0..p {
                for j in 0..p {
                    a[i][j] += r[i] * r[j];
                }
                a[i][p] += r[i] * t;
            }
        }
        for c in 0..p {
            let piv = (c..p).max_by(|&i, &j| a[i][c].abs().total_cmp(&a[j][c].abs())).unwrap();
            a.swap(c, piv);
            for r in 0..p {
                if r != c {
                    let f = a[r][c] / a[c][c];
                    for k in c..=p {
                        a[r][k] -= f * a[c][k];
                    }
                }
            }
        }
        (0..p).map(|i| a[i][p] / a[i][i]).collect()
    }

    fn planted(seed: u64, n: usize, noise_features: usize) -> (Vec<Vec<f64>>, Vec<f64>) {
        let mut rng = SeededRng::seed_from_u64(seed);
        let x: Vec<Vec<f64>> = (0..n).map(|_| (0..2 + noise_features).map(|_| normal(&mut rng)).collect()).collect();
        let y = x.iter().map(|r| 3.0 * r[0] - 2.0 * r[1] + 0.01 * normal(&mut rng)).collect();
        (x, y)
    }

    #[test]
    fn perfect_line() {
        let x = vec![vec![1.0], vec![2.0], vec![3.0]];
        let m = fit_ridge(&x, &[1.0, 2.0, 3.0], 0.0).unwrap();
        let (b, w) = m.raw_coefficients();
        assert!((w[0] - 1.0).abs() < 1e-8 && b.abs() < 1e-8);
    }

    #[test]
    fn heavy_shrinkage_gives_mean() {
        let x = vec![vec![1.0], vec![2.0], vec![3.0]];
        let m = fit_ridge(&x, &[1.0, 2.0, 3.0], 1e12).unwrap();
        let (b, w) = m.raw_coefficients();
        assert!(w[0].abs() < 1e-9 && (b - 2.0).abs() < 1e-9);
    }

    #[test]
    fn zero_lambda_matches_ols() {
        let (x, y) = planted(1, 60, 3);
        let oracle = ols_oracle(&x, &y);
        let (b, w) = fit_ridge(&x, &y, 0.0).unwrap().raw_coefficients();
        assert!((b - oracle[0]).abs() < 1e-8);
        for (a, o) in w.iter().zip(&oracle[1..]) {
            assert!((a - o).abs() < 1e-8);
        }
    }

    #[test]
    fn planted_recovery() {
        let (x, y) = planted(2, 200, 0);
        let (_, w) = fit_ridge(&x, &y, 1e-6).unwrap().raw_coefficients();
        assert!((w[0] - 3.0).abs() < 0.05 && (w[1] + 2.0).abs() < 0.05);
    }

    #[test]
    fn norm_shrinks_with_lambda() {
        let (x, y) = planted(3, 80, 4);
        let norms: Vec<f64> = TrainConfig::default()
            .lambda_grid
            .iter()
            .map(|&l| fit_ridge(&x, &y, l).unwrap().weights.iter().map(|w| w * w).sum::<f64>().sqrt())
            .collect();
        assert!(norms.windows(2).all(|p| p[1] <= p[0] + 1e-12), "{norms:?}");
    }

    #[test]
    fn errors() {
        assert_eq!(fit_ridge(&[vec![1.0]], &[1.0], 0.0), Err(RegressError::TooFewRows(1)));
        assert_eq!(fit_ridge(&[vec![1.0], vec![f64::NAN]], &[1.0, 2.0], 0.0), Err(RegressError::NonFinite(1)));
    }

    #[test]
    fn constant_column_is_dropped() {
        let x = vec![vec![1.0, 5.0], vec![2.0, 5.0], vec![3.0, 5.0]];
        let m = fit_ridge(&x, &[2.0, 4.0, 6.0], 0.0).unwrap();
        assert_eq!(m.retained_features, vec!["x1"]);
        assert!(m.standardizer.sds.iter().all(|&s| s > 0.0));
    }

    #[test]
    fn destandardized_prediction_matches() {
        let (x, y) = planted(4, 50, 2);
        let m = fit_ridge(&x, &y, 0.5).unwrap();
        let (b, w) = m.raw_coefficients();
        for row in &x {
            let raw = b + row.iter().zip(&w).map(|(a, c)| a * c).sum::<f64>();
            assert!((raw - m.predict(row)).abs() <= 1e-12 * raw.abs().max(1.0));
        }
    }

    #[test]
    fn aic_keeps_signal_drops_noise() {
        let mut rng = SeededRng::seed_from_u64(5);
        let n = 100;
        let x: Vec<Vec<f64>> = (0..n).map(|_| (0..15).map(|_| normal(&mut rng)).collect()).collect();
        let y: Vec<f64> = x.iter().map(|r| r[0] + 2.0 * r[1] - r[2] + 1.5 * r[3] - 0.5 * r[4] + 0.3 * normal(&mut rng)).collect();
        let kept = backward_eliminate_aic(&x, &y, 1e-6).unwrap();
        assert!((0..5).all(|s| kept.contains(&s)));
    }

    #[test]
    fn aic_never_increases() {
        let (x, y) = planted(6, 70, 6);
        let kept = backward_eliminate_aic(&x, &y, 1e-4).unwrap();
        let rss_of = |cols: &[usize]| {
            let xs: Vec<Vec<f64>> = x.iter().map(|r| cols.iter().map(|&c| r[c]).collect()).collect();
            let m = fit_ridge(&xs, &y, 1e-4).unwrap();
            xs.iter().zip(&y).map(|(r, t)| (m.predict(r) - t).powi(2)).sum::<f64>()
        };
        let tss: f64 = {
            let m = y.iter().sum::<f64>() / y.len() as f64;
            y.iter().map(|t| (t - m).powi(2)).sum()
        };
        let all: Vec<usize> = (0..8).collect();
        assert!(aic(70, rss_of(&kept), tss, kept.len()) <= aic(70, rss_of(&all), tss, 8));
    }

    #[test]
    fn single_feature_unchanged_and_constant_target() {
        let x: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64]).collect();
        let y: Vec<f64> = (0..10).map(|i| (i * 7 % 3) as f64).collect();
        assert_eq!(backward_eliminate_aic(&x, &y, 1e-6).unwrap(), vec![0]);
        let x: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64, (i * i) as f64, ((i * 3) % 4) as f64]).collect();
        assert!(backward_eliminate_aic(&x, &[4.0; 10], 1e-6).unwrap().is_empty());
    }

    #[test]
    fn collinearity() {
        let mut rng = SeededRng::seed_from_u64(7);
        let base: Vec<Vec<f64>> = (0..100).map(|_| (0..3).map(|_| normal(&mut rng)).collect()).collect();
        let dup: Vec<Vec<f64>> = base.iter().map(|r| vec![r[0], r[1], r[0]]).collect();
        assert_eq!(eliminate_collinear(&dup, &[0, 1, 2], 10.0).unwrap(), vec![0, 1]);

        let orth: Vec<Vec<f64>> = (0..8).map(|i| vec![[1.0, -1.0][i % 2], [1.0, 1.0, -1.0, -1.0][i % 4]]).collect();
        assert_eq!(eliminate_collinear(&orth, &[0, 1], 10.0).unwrap(), vec![0, 1]);

        let sum: Vec<Vec<f64>> = base.iter().map(|r| vec![r[0], r[1], r[0] + r[1] + 1e-4 * normal(&mut rng)]).collect();
        let kept = eliminate_collinear(&sum, &[0, 1, 2], 10.0).unwrap();
        assert_eq!(kept.len(), 2);
        let rows: Vec<usize> = (0..100).collect();
        let d = Design::new(&sum, &[0.0; 100], &rows, &kept);
        assert!(vifs(&d, &[0, 1]).iter().all(|&v| v < 10.0));
    }

    #[test]
    fn folds_are_group_disjoint_and_cover() {
        let groups: Vec<String> = (0..100).map(|i| format!("inst{}", i / 3)).collect();
        let folds = assign_folds(&groups, 10, 1).unwrap();
        for (g, f) in groups.iter().zip(&folds) {
            assert!(groups.iter().zip(&folds).filter(|(h, _)| *h == g).all(|(_, e)| e == f));
        }
        assert_eq!(folds, assign_folds(&groups, 10, 1).unwrap());
        assert!(matches!(assign_folds(&groups[..9], 10, 1), Err(RegressError::TooFewGroups { .. })));
    }

    #[test]
    fn cross_validation_predicts_each_row_once() {
        let (x, y) = planted(8, 100, 3);
        let names = default_names(5);
        let groups: Vec<String> = (0..100).map(|i| format!("i{i}")).collect();
        let cv = cross_validate(&names, &x, &y, &groups, &TrainConfig::default(), 3).unwrap();
        assert!(cv.predictions.iter().all(|p| p.is_finite()));
        for f in 0..10 {
            assert_eq!(cv.fold_of_row.iter().filter(|&&g| g == f).count(), 10);
        }
        let again = cross_validate(&names, &x, &y, &groups, &TrainConfig::default(), 3).unwrap();
        assert_eq!(cv, again);
        let err: f64 = cv.predictions.iter().zip(&y).map(|(p, t)| (p - t).abs()).sum::<f64>() / 100.0;
        assert!(err < 0.05, "{err}");
    }

    #[test]
    fn model_document_round_trips() {
        let (x, y) = planted(9, 40, 2);
        let names = default_names(4);
        let groups: Vec<String> = (0..40).map(|i| i.to_string()).collect();
        let m = train(&names, &x, &y, &groups, &TrainConfig::default(), 11).unwrap();
        let back = RidgeModel::from_json(&m.to_json()).unwrap();
        assert_eq!(m, back);
        assert!(x.iter().all(|r| m.predict(r).to_bits() == back.predict(r).to_bits()));
        assert!(m.check_schema(&names).is_ok());
        assert!(m.check_schema(&default_names(3)).is_err());
    }

    #[test]
    fn named_prediction_reorders() {
        let (x, y) = planted(10, 40, 1);
        let m = fit_ridge(&x, &y, 1e-3).unwrap();
        let names = vec!["x3".to_string(), "x2".to_string(), "x1".to_string()];
        let rev: Vec<f64> = x[0].iter().rev().copied().collect();
        assert_eq!(m.predict_named(&names, &rev).unwrap(), m.predict(&x[0]));
        assert!(matches!(m.predict_named(&names[..1], &rev), Err(RegressError::MissingFeature(_))));
    }
}
