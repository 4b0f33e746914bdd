//! Repeated random train/validation splits of a real data set.

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::RegressionData;
use crate::error::{Error, Result};
use crate::penalty::PenaltyFamily;
use crate::refit::ridge_refit;
use crate::rng::{stream, Purpose};
use crate::sim::Summary;
use crate::solver::{select_by_validation, solve_path, PathConfig};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitConfig {
    pub splits: usize,
    pub n_train: usize,
    pub seed: u64,
    /// Ridge parameters for refitting the selected model, chosen by
    /// validation error. No refit when empty.
    pub lambda1_grid: Vec<f64>,
}

impl SplitConfig {
    /// Training size `round(train_frac * n)`.
    pub fn from_fraction(n: usize, train_frac: f64, splits: usize, seed: u64) -> Result<Self> {
        if !(train_frac > 0.0 && train_frac < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "training fraction must lie in (0, 1), got {train_frac}"
            )));
        }
        Ok(Self {
            splits,
            n_train: (train_frac * n as f64).round() as usize,
            seed,
            lambda1_grid: Vec::new(),
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitRecord {
    pub split: usize,
    pub method: String,
    pub lambda: f64,
    /// Validation mean squared prediction error.
    pub pe: f64,
    pub size: usize,
    pub support: Vec<usize>,
    /// Original-scale coefficients, zero off the support.
    pub coefficients: Vec<f64>,
    pub intercept: f64,
    pub lambda1: Option<f64>,
    pub refit_pe: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PredictorSummary {
    pub name: String,
    pub selection_frequency: f64,
    pub coef_mean: f64,
    pub coef_sd: f64,
    /// `coef_mean / coef_sd`; absent when the coefficient never varies.
    pub t_stat: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitMethodSummary {
    pub method: String,
    pub pe: Summary,
    pub refit_pe: Option<Summary>,
    pub median_size: f64,
    pub predictors: Vec<PredictorSummary>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitReport {
    pub config: SplitConfig,
    pub path_config: PathConfig,
    pub n_val: usize,
    pub records: Vec<SplitRecord>,
    pub summaries: Vec<SplitMethodSummary>,
}

impl SplitReport {
    pub fn write_records_csv<W: std::io::Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(["split", "method", "lambda", "pe", "size", "support", "lambda1", "refit_pe"])?;
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        for r in &self.records {
            let support = r.support.iter().map(|j| j.to_string()).collect::<Vec<_>>().join(" ");
            wtr.write_record([
                r.split.to_string(),
                r.method.clone(),
                r.lambda.to_string(),
                r.pe.to_string(),
                r.size.to_string(),
                support,
                opt(r.lambda1),
                opt(r.refit_pe),
            ])?;
        }
        wtr.flush()?;
        Ok(())
    }
}

fn median(v: &mut [f64]) -> f64 {
    v.sort_by(f64::total_cmp);
    let m = v.len();
    if m % 2 == 1 {
        v[m / 2]
    } else {
        0.5 * (v[m / 2 - 1] + v[m / 2])
    }
}

/// Per split: shuffle the rows, fit each method's path on the centered and
/// rescaled training part, choose lambda by validation error on the rest.
pub fn random_split_study(
    data: &RegressionData,
    methods: &[PenaltyFamily],
    cfg: &PathConfig,
    split_cfg: &SplitConfig,
) -> Result<SplitReport> {
    if data.is_rescaled() || data.centering().is_some() {
        return Err(Error::InvalidArgument("split study expects raw data".into()));
    }
    let n = data.n();
    if split_cfg.splits == 0 {
        return Err(Error::InvalidArgument("at least one split is required".into()));
    }
    if split_cfg.n_train < 2 || split_cfg.n_train >= n {
        return Err(Error::InvalidArgument(format!(
            "training size {} is infeasible for {n} observations",
            split_cfg.n_train
        )));
    }
    if methods.is_empty() {
        return Err(Error::InvalidArgument("no methods requested".into()));
    }
    if split_cfg.lambda1_grid.iter().any(|l| !(*l >= 0.0) || !l.is_finite()) {
        return Err(Error::InvalidArgument("ridge grid must be nonnegative".into()));
    }
    cfg.validate(split_cfg.n_train)?;

    let per_split: Vec<Vec<SplitRecord>> = (0..split_cfg.splits)
        .into_par_iter()
        .map(|split| {
            let mut idx: Vec<usize> = (0..n).collect();
            idx.shuffle(&mut stream(split_cfg.seed, split as u64, Purpose::Split));
            let (tr, va) = idx.split_at(split_cfg.n_train);
            let train = data.select_rows(tr)?.centered()?.rescale_columns()?;
            let val = data.select_rows(va)?;
            methods
                .iter()
                .map(|&family| {
                    split_record(split, family, &train, &val, cfg, &split_cfg.lambda1_grid).map_err(|e| {
                        Error::InReplication {
                            rep: split,
                            method: family.label().to_string(),
                            source: Box::new(e),
                        }
                    })
                })
                .collect()
        })
        .collect::<Result<_>>()?;
    let records: Vec<SplitRecord> = per_split.into_iter().flatten().collect();

    let names = data.column_names();
    let summaries = methods
        .iter()
        .map(|family| {
            let rows: Vec<&SplitRecord> = records.iter().filter(|r| r.method == family.label()).collect();
            let m = rows.len() as f64;
            let predictors = (0..data.p())
                .map(|j| {
                    let coefs: Vec<f64> = rows.iter().map(|r| r.coefficients[j]).collect();
                    let s = Summary::of(&coefs);
                    PredictorSummary {
                        name: names[j].clone(),
                        selection_frequency: coefs.iter().filter(|c| **c != 0.0).count() as f64 / m,
                        coef_mean: s.mean,
                        coef_sd: s.sd,
                        t_stat: (s.sd > 0.0).then(|| s.mean / s.sd),
                    }
                })
                .collect();
            let refit: Vec<f64> = rows.iter().filter_map(|r| r.refit_pe).collect();
            SplitMethodSummary {
                method: family.label().to_string(),
                pe: Summary::of(&rows.iter().map(|r| r.pe).collect::<Vec<_>>()),
                refit_pe: (!refit.is_empty()).then(|| Summary::of(&refit)),
                median_size: median(&mut rows.iter().map(|r| r.size as f64).collect::<Vec<_>>()),
                predictors,
            }
        })
        .collect();

    Ok(SplitReport {
        config: split_cfg.clone(),
        path_config: cfg.clone(),
        n_val: n - split_cfg.n_train,
        records,
        summaries,
    })
}

fn split_record(
    split: usize,
    family: PenaltyFamily,
    train: &RegressionData,
    val: &RegressionData,
    cfg: &PathConfig,
    lambda1_grid: &[f64],
) -> Result<SplitRecord> {
    let path = solve_path(train, family, cfg)?;
    let choice = select_by_validation(&path, train, val)?;
    let support = choice.fit.support.clone();
    let (mut lambda1, mut refit_pe) = (None, None);
    if !support.is_empty() {
        for &l1 in lambda1_grid {
            let refitted = ridge_refit(train, &support, l1)?;
            let err = train.predictor(&refitted.beta_refitted).mean_squared_error(val)?;
            if refit_pe.is_none_or(|best| err < best) {
                refit_pe = Some(err);
                lambda1 = Some(l1);
            }
        }
    } else if !lambda1_grid.is_empty() {
        refit_pe = Some(choice.validation_error);
        lambda1 = Some(lambda1_grid[0]);
    }
    Ok(SplitRecord {
        split,
        method: family.label().to_string(),
        lambda: choice.lambda,
        pe: choice.validation_error,
        size: support.len(),
        support,
        coefficients: choice.predictor.coefficients.iter().copied().collect(),
        intercept: choice.predictor.intercept,
        lambda1,
        refit_pe,
    })
}

/// Base columns, squares of the non-binary columns, then all pairwise
/// interactions `i < j`, in that order. A column is binary when it takes at
/// most two distinct values.
pub fn quadratic_expansion(data: &RegressionData) -> Result<RegressionData> {
    if data.is_rescaled() || data.centering().is_some() {
        return Err(Error::InvalidArgument("quadratic expansion expects raw data".into()));
    }
    let (n, p) = (data.n(), data.p());
    let x = data.x();
    let names = data.column_names();
    let binary: Vec<bool> = x
        .column_iter()
        .map(|c| {
            let mut vals: Vec<f64> = c.iter().copied().collect();
            vals.sort_by(f64::total_cmp);
            vals.dedup();
            vals.len() <= 2
        })
        .collect();

    let mut cols: Vec<DVector<f64>> = x.column_iter().map(|c| c.clone_owned()).collect();
    let mut out_names = names.clone();
    for j in (0..p).filter(|&j| !binary[j]) {
        cols.push(x.column(j).component_mul(&x.column(j)));
        out_names.push(format!("{}^2", names[j]));
    }
    for i in 0..p {
        for j in i + 1..p {
            cols.push(x.column(i).component_mul(&x.column(j)));
            out_names.push(format!("{}:{}", names[i], names[j]));
        }
    }
    let expanded = DMatrix::from_columns(&cols);
    debug_assert_eq!(expanded.nrows(), n);
    RegressionData::new(expanded, data.y().clone())?.with_names(out_names)
}
