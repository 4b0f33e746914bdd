//! Regression data, true-model description and the penalized least-squares
//! objective.
//!
//! All solvers work on a design whose columns have been rescaled to L2 norm
//! `sqrt(n)`. The original column norms are kept so that coefficients can be
//! reported on the scale the data was supplied in.

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::penalty::PenaltySpec;

const RESCALE_TOL: f64 = 1e-10;

/// Column means and response mean removed by [`RegressionData::centered`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Centering {
    pub x_means: Vec<f64>,
    pub y_mean: f64,
}

#[derive(Clone, Debug)]
pub struct RegressionData {
    x: DMatrix<f64>,
    y: DVector<f64>,
    column_norms: DVector<f64>,
    is_rescaled: bool,
    centering: Option<Centering>,
    names: Option<Vec<String>>,
}

impl RegressionData {
    pub fn new(x: DMatrix<f64>, y: DVector<f64>) -> Result<Self> {
        let (n, p) = x.shape();
        if n == 0 || p == 0 {
            return Err(Error::Dimension(format!(
                "design must have at least one row and one column, got {n}x{p}"
            )));
        }
        if y.len() != n {
            return Err(Error::Dimension(format!(
                "response has length {} but design has {n} rows",
                y.len()
            )));
        }
        if let Some(idx) = x.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!(
                "design entry ({}, {})",
                idx % n,
                idx / n
            )));
        }
        if let Some(i) = y.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("response entry {i}")));
        }
        let column_norms = DVector::from_iterator(p, x.column_iter().map(|c| c.norm()));
        Ok(Self {
            x,
            y,
            column_norms,
            is_rescaled: false,
            centering: None,
            names: None,
        })
    }

    /// Builds from row-major storage, the layout used by CSV rows and the C API.
    pub fn from_row_major(n: usize, p: usize, x: &[f64], y: &[f64]) -> Result<Self> {
        if x.len() != n * p {
            return Err(Error::Dimension(format!(
                "expected {} design entries for {n}x{p}, got {}",
                n * p,
                x.len()
            )));
        }
        Self::new(
            DMatrix::from_row_slice(n, p, x),
            DVector::from_column_slice(y),
        )
    }

    pub fn with_names(mut self, names: Vec<String>) -> Result<Self> {
        if names.len() != self.p() {
            return Err(Error::Dimension(format!(
                "{} column names for {} columns",
                names.len(),
                self.p()
            )));
        }
        self.names = Some(names);
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn p(&self) -> usize {
        self.x.ncols()
    }

    pub fn x(&self) -> &DMatrix<f64> {
        &self.x
    }

    pub fn y(&self) -> &DVector<f64> {
        &self.y
    }

    pub fn column_norms(&self) -> &DVector<f64> {
        &self.column_norms
    }

    pub fn is_rescaled(&self) -> bool {
        self.is_rescaled
    }

    pub fn centering(&self) -> Option<&Centering> {
        self.centering.as_ref()
    }

    pub fn names(&self) -> Option<&[String]> {
        self.names.as_deref()
    }

    /// Column names, falling back to `x1, x2, ...`.
    pub fn column_names(&self) -> Vec<String> {
        match &self.names {
            Some(n) => n.clone(),
            None => (1..=self.p()).map(|j| format!("x{j}")).collect(),
        }
    }

    /// Removes column means from `X` and the mean from `y`.
    ///
    /// Must be applied before rescaling. The model itself carries no
    /// intercept; the removed means are used to recover one for prediction.
    pub fn centered(mut self) -> Result<Self> {
        if self.is_rescaled {
            return Err(Error::InvalidArgument(
                "centering must precede rescaling".into(),
            ));
        }
        if self.centering.is_some() {
            return Ok(self);
        }
        let n = self.n() as f64;
        let x_means: Vec<f64> = self.x.column_iter().map(|c| c.sum() / n).collect();
        for (mut col, m) in self.x.column_iter_mut().zip(&x_means) {
            col.add_scalar_mut(-m);
        }
        let y_mean = self.y.sum() / n;
        self.y.add_scalar_mut(-y_mean);
        self.column_norms = DVector::from_iterator(self.p(), self.x.column_iter().map(|c| c.norm()));
        self.centering = Some(Centering { x_means, y_mean });
        Ok(self)
    }

    /// Rescales every column to L2 norm `sqrt(n)`, remembering the original norms.
    pub fn rescale_columns(mut self) -> Result<Self> {
        if self.is_rescaled {
            return Ok(self);
        }
        let target = (self.n() as f64).sqrt();
        let norms: Vec<f64> = self.x.column_iter().map(|c| c.norm()).collect();
        if let Some(j) = norms.iter().position(|&v| v == 0.0) {
            return Err(Error::ZeroColumn(j));
        }
        for (mut col, &norm) in self.x.column_iter_mut().zip(&norms) {
            col.scale_mut(target / norm);
        }
        self.column_norms = DVector::from_vec(norms);
        self.is_rescaled = true;
        debug_assert!(self
            .x
            .column_iter()
            .all(|c| ((c.norm() - target) / target).abs() < RESCALE_TOL));
        Ok(self)
    }

    /// Factor mapping a working-scale coefficient to the original column scale.
    fn original_factor(&self, j: usize) -> f64 {
        if self.is_rescaled {
            (self.n() as f64).sqrt() / self.column_norms[j]
        } else {
            1.0
        }
    }

    pub fn to_original_scale(&self, beta: &DVector<f64>) -> DVector<f64> {
        DVector::from_iterator(
            beta.len(),
            beta.iter().enumerate().map(|(j, b)| b * self.original_factor(j)),
        )
    }

    pub fn to_working_scale(&self, beta: &DVector<f64>) -> DVector<f64> {
        DVector::from_iterator(
            beta.len(),
            beta.iter().enumerate().map(|(j, b)| b / self.original_factor(j)),
        )
    }

    /// Prediction rule on the original (uncentered, unscaled) columns for a
    /// working-scale coefficient vector.
    pub fn predictor(&self, beta: &DVector<f64>) -> LinearPredictor {
        let coefficients = self.to_original_scale(beta);
        let intercept = match &self.centering {
            Some(c) => {
                c.y_mean
                    - c.x_means
                        .iter()
                        .zip(coefficients.iter())
                        .map(|(m, b)| m * b)
                        .sum::<f64>()
            }
            None => 0.0,
        };
        LinearPredictor {
            coefficients,
            intercept,
        }
    }

    /// Rows `idx` of this data set, as a fresh unscaled, uncentered data set.
    pub fn select_rows(&self, idx: &[usize]) -> Result<Self> {
        if self.is_rescaled || self.centering.is_some() {
            return Err(Error::InvalidArgument(
                "row selection is only defined on raw data".into(),
            ));
        }
        let x = self.x.select_rows(idx);
        let y = DVector::from_iterator(idx.len(), idx.iter().map(|&i| self.y[i]));
        let mut out = Self::new(x, y)?;
        out.names = self.names.clone();
        Ok(out)
    }

    /// Columns in `support`, as a dense `n x |support|` matrix.
    pub fn columns(&self, support: &[usize]) -> DMatrix<f64> {
        self.x.select_columns(support)
    }

    /// Loads a CSV file; see [`read_csv`].
    pub fn from_csv_path(path: impl AsRef<Path>, response: &ResponseColumn) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        read_csv(file, response)
    }
}

/// Linear prediction rule `x -> intercept + x'coefficients` on the original scale.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearPredictor {
    pub coefficients: DVector<f64>,
    pub intercept: f64,
}

impl LinearPredictor {
    pub fn predict(&self, x: &DMatrix<f64>) -> DVector<f64> {
        let mut out = DVector::from_element(x.nrows(), self.intercept);
        for (j, &b) in self.coefficients.iter().enumerate() {
            if b != 0.0 {
                out.axpy(b, &x.column(j), 1.0);
            }
        }
        out
    }

    /// Mean squared prediction error on raw data.
    pub fn mean_squared_error(&self, data: &RegressionData) -> Result<f64> {
        if data.p() != self.coefficients.len() {
            return Err(Error::Dimension(format!(
                "predictor has {} coefficients, data has {} columns",
                self.coefficients.len(),
                data.p()
            )));
        }
        let resid = data.y() - self.predict(data.x());
        Ok(resid.norm_squared() / data.n() as f64)
    }
}

/// Support of a coefficient vector: indices of exactly-nonzero entries.
pub fn support_of(beta: &DVector<f64>) -> Vec<usize> {
    beta.iter()
        .enumerate()
        .filter(|(_, b)| **b != 0.0)
        .map(|(j, _)| j)
        .collect()
}

/// True coefficient vector and noise level of a simulated model.
#[derive(Clone, Debug, PartialEq)]
pub struct TrueModel {
    pub beta0: DVector<f64>,
    pub s: usize,
    /// Minimum absolute nonzero coefficient; absent when `s = 0`.
    pub b0: Option<f64>,
    pub sigma: f64,
}

impl TrueModel {
    pub fn new(beta0: DVector<f64>, sigma: f64) -> Result<Self> {
        if !(sigma >= 0.0 && sigma.is_finite()) {
            return Err(Error::InvalidArgument(format!("sigma must be >= 0, got {sigma}")));
        }
        let support = support_of(&beta0);
        let b0 = support
            .iter()
            .map(|&j| beta0[j].abs())
            .fold(None, |acc: Option<f64>, v| Some(acc.map_or(v, |a| a.min(v))));
        Ok(Self {
            s: support.len(),
            b0,
            beta0,
            sigma,
        })
    }

    pub fn support(&self) -> Vec<usize> {
        support_of(&self.beta0)
    }

    /// Nonzero entries of `beta0`, in support order.
    pub fn nonzero_coefficients(&self) -> DVector<f64> {
        let supp = self.support();
        DVector::from_iterator(supp.len(), supp.iter().map(|&j| self.beta0[j]))
    }
}

/// `(2n)^{-1} ||y - X beta||^2 + sum_j p_lambda(|beta_j|)`.
pub fn objective(data: &RegressionData, beta: &DVector<f64>, pen: &PenaltySpec) -> Result<f64> {
    if beta.len() != data.p() {
        return Err(Error::Dimension(format!(
            "beta has length {} but design has {} columns",
            beta.len(),
            data.p()
        )));
    }
    pen.validate()?;
    let resid = data.y() - data.x() * beta;
    let loss = resid.norm_squared() / (2.0 * data.n() as f64);
    let penalty: f64 = beta.iter().map(|b| pen.value_unchecked(b.abs())).sum();
    Ok(loss + penalty)
}

/// Which CSV column holds the response.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ResponseColumn {
    Name(String),
    /// Zero-based column index.
    Index(usize),
}

impl std::str::FromStr for ResponseColumn {
    type Err = std::convert::Infallible;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        Ok(match s.parse::<usize>() {
            Ok(i) => ResponseColumn::Index(i),
            Err(_) => ResponseColumn::Name(s.to_string()),
        })
    }
}

/// Reads a numeric CSV table. The first row is treated as a header when any
/// of its cells fails to parse as a number. Every non-response column becomes
/// a covariate. Rows and columns in error messages are 1-based.
pub fn read_csv<R: std::io::Read>(reader: R, response: &ResponseColumn) -> Result<RegressionData> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);

    let mut records = Vec::new();
    for rec in rdr.records() {
        records.push(rec?);
    }
    let Some(first) = records.first() else {
        return Err(Error::Csv {
            row: 1,
            column: 1,
            message: "empty file".into(),
        });
    };
    let width = first.len();
    let has_header = first.iter().any(|c| c.parse::<f64>().is_err());
    let header: Vec<String> = if has_header {
        first.iter().map(str::to_string).collect()
    } else {
        (1..=width).map(|j| format!("x{j}")).collect()
    };

    let response_idx = match response {
        ResponseColumn::Index(i) if *i < width => *i,
        ResponseColumn::Index(i) => {
            return Err(Error::InvalidArgument(format!(
                "response column index {i} out of range for {width} columns"
            )))
        }
        ResponseColumn::Name(name) => header.iter().position(|h| h == name).ok_or_else(|| {
            Error::InvalidArgument(format!("no column named '{name}' in header"))
        })?,
    };
    if width < 2 {
        return Err(Error::Dimension("need a response and at least one covariate".into()));
    }

    let body = if has_header { &records[1..] } else { &records[..] };
    let n = body.len();
    let p = width - 1;
    let mut xs = Vec::with_capacity(n * p);
    let mut ys = Vec::with_capacity(n);
    for (r, rec) in body.iter().enumerate() {
        let row = r + 1 + usize::from(has_header);
        if rec.len() != width {
            return Err(Error::Csv {
                row,
                column: rec.len().min(width) + 1,
                message: format!("expected {width} fields, found {}", rec.len()),
            });
        }
        for (c, cell) in rec.iter().enumerate() {
            let v: f64 = cell.parse().map_err(|_| Error::Csv {
                row,
                column: c + 1,
                message: format!("cannot parse '{cell}' as a number"),
            })?;
            if !v.is_finite() {
                return Err(Error::Csv {
                    row,
                    column: c + 1,
                    message: format!("non-finite value '{cell}'"),
                });
            }
            if c == response_idx {
                ys.push(v);
            } else {
                xs.push(v);
            }
        }
    }
    if n == 0 {
        return Err(Error::Csv {
            row: 2,
            column: 1,
            message: "no data rows".into(),
        });
    }
    let names = header
        .into_iter()
        .enumerate()
        .filter(|(j, _)| *j != response_idx)
        .map(|(_, h)| h)
        .collect();
    RegressionData::from_row_major(n, p, &xs, &ys)?.with_names(names)
}
