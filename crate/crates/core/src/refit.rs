//! Ridge refitting of a selected support and the analytic risk curves of the
//! refitted estimator.
//!
//! With `X0'X0 = P'DP` and `b = P beta_{0,1}`, on the event that the true
//! support was selected the L2 risk and the prediction risk of the ridge
//! refit are, up to a remainder,
//!
//! ```text
//! f(l) = sum_i (l^2 b_i^2 + sigma^2 d_i) / (d_i + l)^2
//! g(l) = sum_i d_i (l^2 b_i^2 + sigma^2 d_i) / (d_i + l)^2      (risk g / n)
//! ```

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{RegressionData, TrueModel};
use crate::error::{Error, Result};
use crate::linalg::ridge_solve;
use crate::rng::{stream, Purpose};
use crate::solver::log_grid;

#[derive(Clone, Debug, PartialEq)]
pub struct RidgeRefit {
    pub support: Vec<usize>,
    pub lambda1: f64,
    /// Full-length coefficients on the working scale, zero off the support.
    pub beta_refitted: DVector<f64>,
}

/// `(X1'X1 + lambda1 I)^{-1} X1'y` on the support columns.
pub fn ridge_refit(data: &RegressionData, support: &[usize], lambda1: f64) -> Result<RidgeRefit> {
    if support.is_empty() {
        return Err(Error::InvalidArgument("refit support is empty".into()));
    }
    if !(lambda1 >= 0.0 && lambda1.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "ridge parameter must be finite and nonnegative, got {lambda1}"
        )));
    }
    if let Some(&j) = support.iter().find(|&&j| j >= data.p()) {
        return Err(Error::Dimension(format!("support index {j} out of range for {} columns", data.p())));
    }
    if support.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidArgument("support must be strictly increasing".into()));
    }
    let coef = ridge_solve(data.x(), data.y(), support, lambda1)?;
    let mut beta = DVector::zeros(data.p());
    for (k, &j) in support.iter().enumerate() {
        beta[j] = coef[k];
    }
    Ok(RidgeRefit {
        support: support.to_vec(),
        lambda1,
        beta_refitted: beta,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RiskTarget {
    L2,
    Prediction,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SpectralModel {
    /// Eigenvalues of `X0'X0`, descending.
    pub d: Vec<f64>,
    /// `P beta_{0,1}` in the eigenvector basis.
    pub b: Vec<f64>,
    /// Rows are the eigenvectors, so that `X0'X0 = P' diag(d) P`.
    pub p: DMatrix<f64>,
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub sigma: f64,
}

impl SpectralModel {
    /// Eigendecomposition of `X0'X0` for the true-support columns `x0`.
    pub fn new(x0: &DMatrix<f64>, beta0_1: &DVector<f64>, sigma: f64) -> Result<Self> {
        if x0.iter().chain(beta0_1.iter()).any(|v| !v.is_finite()) || !sigma.is_finite() {
            return Err(Error::NonFinite("spectral model inputs".into()));
        }
        let s = x0.ncols();
        if beta0_1.len() != s {
            return Err(Error::Dimension(format!(
                "{} coefficients for {s} support columns",
                beta0_1.len()
            )));
        }
        if s > x0.nrows() {
            return Err(Error::Dimension(format!(
                "support size {s} exceeds sample size {}",
                x0.nrows()
            )));
        }
        if !(sigma >= 0.0) {
            return Err(Error::InvalidArgument("sigma must be nonnegative".into()));
        }
        let gram = x0.transpose() * x0;
        let eig = gram.symmetric_eigen();
        let mut order: Vec<usize> = (0..s).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
        let d: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i].max(0.0)).collect();
        let p = DMatrix::from_fn(s, s, |r, c| eig.eigenvectors[(c, order[r])]);
        let b = (&p * beta0_1).iter().copied().collect();
        Self::assemble(d, b, p, sigma)
    }

    /// Model with given eigenvalues and rotated coefficients (identity `P`).
    pub fn from_spectrum(d: Vec<f64>, b: Vec<f64>, sigma: f64) -> Result<Self> {
        if d.len() != b.len() {
            return Err(Error::Dimension("eigenvalue and coefficient lengths differ".into()));
        }
        if d.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) || b.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("eigenvalues must be finite and nonnegative".into()));
        }
        if !(sigma >= 0.0 && sigma.is_finite()) {
            return Err(Error::InvalidArgument("sigma must be nonnegative".into()));
        }
        let mut pairs: Vec<(f64, f64)> = d.into_iter().zip(b).collect();
        pairs.sort_by(|x, y| y.0.total_cmp(&x.0));
        let s = pairs.len();
        let (d, b) = pairs.into_iter().unzip();
        Self::assemble(d, b, DMatrix::identity(s, s), sigma)
    }

    fn assemble(d: Vec<f64>, b: Vec<f64>, p: DMatrix<f64>, sigma: f64) -> Result<Self> {
        let lambda_max = d.first().copied().unwrap_or(0.0);
        let lambda_min = d.last().copied().unwrap_or(0.0);
        Ok(Self {
            d,
            b,
            p,
            lambda_min,
            lambda_max,
            sigma,
        })
    }

    pub fn s(&self) -> usize {
        self.d.len()
    }

    pub fn b_norm_sq(&self) -> f64 {
        self.b.iter().map(|v| v * v).sum()
    }

    /// `s sigma^2 / ||beta0||^2`, the optimum when all eigenvalues coincide.
    pub fn leading_order(&self) -> f64 {
        self.s() as f64 * self.sigma * self.sigma / self.b_norm_sq()
    }

    /// Interval that contains the leading term of the optimal ridge parameter.
    pub fn theoretical_bracket(&self, target: RiskTarget) -> (f64, f64) {
        let ratio = self.lambda_max / self.lambda_min;
        let k = match target {
            RiskTarget::L2 => ratio * ratio,
            RiskTarget::Prediction => ratio,
        };
        (self.leading_order() / k, self.leading_order() * k)
    }

    /// `f(l)`.
    pub fn l2_risk(&self, lambda1: f64) -> f64 {
        let s2 = self.sigma * self.sigma;
        self.d
            .iter()
            .zip(&self.b)
            .map(|(&d, &b)| {
                let den = (d + lambda1) * (d + lambda1);
                (lambda1 * lambda1 * b * b + s2 * d) / den
            })
            .sum()
    }

    /// `g(l)`, not yet divided by `n`.
    pub fn prediction_risk_total(&self, lambda1: f64) -> f64 {
        let s2 = self.sigma * self.sigma;
        self.d
            .iter()
            .zip(&self.b)
            .map(|(&d, &b)| {
                let den = (d + lambda1) * (d + lambda1);
                lambda1 * lambda1 * b * b * d / den + s2 * d * d / den
            })
            .sum()
    }

    /// `f'(l) = sum_i (2 l b_i^2 d_i - 2 sigma^2 d_i) / (d_i + l)^3`.
    pub fn l2_risk_derivative(&self, lambda1: f64) -> f64 {
        let s2 = self.sigma * self.sigma;
        self.d
            .iter()
            .zip(&self.b)
            .map(|(&d, &b)| 2.0 * d * (lambda1 * b * b - s2) / (d + lambda1).powi(3))
            .sum()
    }

    /// `g'(l)`: each summand of `f'` multiplied by `d_i`.
    pub fn prediction_risk_derivative(&self, lambda1: f64) -> f64 {
        let s2 = self.sigma * self.sigma;
        self.d
            .iter()
            .zip(&self.b)
            .map(|(&d, &b)| 2.0 * d * d * (lambda1 * b * b - s2) / (d + lambda1).powi(3))
            .sum()
    }

    fn value(&self, target: RiskTarget, l: f64) -> f64 {
        match target {
            RiskTarget::L2 => self.l2_risk(l),
            RiskTarget::Prediction => self.prediction_risk_total(l),
        }
    }

    fn slope(&self, target: RiskTarget, l: f64) -> f64 {
        match target {
            RiskTarget::L2 => self.l2_risk_derivative(l),
            RiskTarget::Prediction => self.prediction_risk_derivative(l),
        }
    }
}

/// `f(lambda1)`, the leading term of the L2 risk of the refit.
pub fn l2_risk(model: &SpectralModel, lambda1: f64) -> f64 {
    model.l2_risk(lambda1)
}

/// `g(lambda1) / n`, the leading term of the prediction risk of the refit.
pub fn pred_risk(model: &SpectralModel, lambda1: f64, n: usize) -> f64 {
    model.prediction_risk_total(lambda1) / n as f64
}

/// Minimizer of `f` (or `g`) over `[0, inf)`.
///
/// A log-spaced scan locates the basin; the minimizer is then the root of
/// the analytic derivative inside it, found by bisection, with golden-section
/// search on the risk as a fallback when the derivative does not change sign.
pub fn optimal_ridge(model: &SpectralModel, target: RiskTarget) -> Result<f64> {
    if model.s() == 0 {
        return Err(Error::InvalidArgument("optimal ridge needs at least one coefficient".into()));
    }
    if model.sigma == 0.0 {
        // f' >= 0 everywhere: no variance to trade against bias
        return Ok(0.0);
    }
    let weight: f64 = model.d.iter().zip(&model.b).map(|(d, b)| d * b * b).sum();
    if !(weight > 0.0) {
        return Err(Error::InvalidArgument(
            "risk is decreasing for every ridge parameter; no finite minimizer".into(),
        ));
    }
    if model.slope(target, 0.0) >= 0.0 {
        return Ok(0.0);
    }

    let mut hi = model.leading_order().max(f64::MIN_POSITIVE);
    let mut guard = 0;
    while model.slope(target, hi) <= 0.0 {
        hi *= 2.0;
        guard += 1;
        if guard > 2000 || !hi.is_finite() {
            return Err(Error::NonFinite("could not bracket the optimal ridge parameter".into()));
        }
    }
    // keep the minimizer away from the end of the scan
    hi *= 2.0;

    let mut pts = vec![0.0];
    pts.extend(log_grid(hi, hi * 1e-12, 481).into_iter().rev());
    let vals: Vec<f64> = pts.iter().map(|&l| model.value(target, l)).collect();
    let k = (0..pts.len())
        .min_by(|&a, &b| vals[a].total_cmp(&vals[b]))
        .unwrap_or(0);
    let mut a = pts[k.saturating_sub(1)];
    let mut b = pts[(k + 1).min(pts.len() - 1)];

    // bisection on the derivative when it changes sign across the bracket
    if model.slope(target, a) < 0.0 && model.slope(target, b) > 0.0 {
        for _ in 0..400 {
            let mid = 0.5 * (a + b);
            if mid <= a || mid >= b {
                break;
            }
            if model.slope(target, mid) < 0.0 {
                a = mid;
            } else {
                b = mid;
            }
        }
        return Ok(0.5 * (a + b));
    }

    // golden-section search otherwise
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (model.value(target, c), model.value(target, d));
    while (b - a) > 1e-10 * b.abs().max(f64::MIN_POSITIVE) {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = model.value(target, c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = model.value(target, d);
        }
    }
    Ok(0.5 * (a + b))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RiskCurve {
    pub lambda1_grid: Vec<f64>,
    /// `f` values.
    pub l2_risk: Vec<f64>,
    /// `g / n` values.
    pub pred_risk: Vec<f64>,
    pub argmin_l2: f64,
    pub argmin_pred: f64,
}

impl RiskCurve {
    pub fn write_csv<W: std::io::Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(["lambda1", "l2_risk", "pred_risk"])?;
        for ((l, f), g) in self.lambda1_grid.iter().zip(&self.l2_risk).zip(&self.pred_risk) {
            wtr.write_record([l.to_string(), f.to_string(), g.to_string()])?;
        }
        wtr.flush()?;
        Ok(())
    }
}

/// Zero followed by 200 log-spaced points on `[c / 100, 100 c]`,
/// `c = s sigma^2 / ||beta0||^2`.
pub fn default_risk_grid(model: &SpectralModel) -> Vec<f64> {
    let c = model.leading_order();
    let mut grid = vec![0.0];
    if c > 0.0 && c.is_finite() {
        grid.extend(log_grid(100.0 * c, c / 100.0, 200).into_iter().rev());
    }
    grid
}

fn argmin(grid: &[f64], vals: &[f64]) -> f64 {
    let mut best = 0;
    for k in 1..vals.len() {
        if vals[k] < vals[best] {
            best = k;
        }
    }
    grid[best]
}

pub fn risk_curve(model: &SpectralModel, grid: &[f64], n: usize) -> Result<RiskCurve> {
    if grid.is_empty() {
        return Err(Error::InvalidArgument("risk-curve grid is empty".into()));
    }
    if grid.iter().any(|l| !(*l >= 0.0) || !l.is_finite()) {
        return Err(Error::InvalidArgument("risk-curve grid must be nonnegative".into()));
    }
    if grid.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::InvalidArgument("risk-curve grid must be sorted".into()));
    }
    if n == 0 {
        return Err(Error::InvalidArgument("n must be at least 1".into()));
    }
    let l2: Vec<f64> = grid.iter().map(|&l| l2_risk(model, l)).collect();
    let pred: Vec<f64> = grid.iter().map(|&l| pred_risk(model, l, n)).collect();
    Ok(RiskCurve {
        argmin_l2: argmin(grid, &l2),
        argmin_pred: argmin(grid, &pred),
        lambda1_grid: grid.to_vec(),
        l2_risk: l2,
        pred_risk: pred,
    })
}

/// Monte Carlo risk estimate: mean and standard error over replications.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalRisk {
    pub lambda1: f64,
    pub l2_risk: f64,
    pub l2_se: f64,
    pub pred_risk: f64,
    pub pred_se: f64,
    pub reps: usize,
}

/// Empirical squared L2 loss and prediction loss of the ridge refit at
/// every `lambda1` in `grid`, using the same replications for all of them.
///
/// `generator` draws one data set and its true model from the supplied
/// stream; `selector` picks the support to refit. Losses are measured on the
/// original coefficient scale.
pub fn empirical_risk_curve<G, S>(
    generator: G,
    selector: S,
    grid: &[f64],
    reps: usize,
    seed: u64,
) -> Result<Vec<EmpiricalRisk>>
where
    G: Fn(&mut rand_chacha::ChaCha8Rng) -> Result<(RegressionData, TrueModel)> + Sync,
    S: Fn(&RegressionData) -> Result<Vec<usize>> + Sync,
{
    if reps == 0 {
        return Err(Error::InvalidArgument("reps must be at least 1".into()));
    }
    if grid.is_empty() || grid.iter().any(|l| !(*l >= 0.0)) {
        return Err(Error::InvalidArgument("ridge grid must be nonempty and nonnegative".into()));
    }
    let per_rep: Vec<Vec<(f64, f64)>> = (0..reps)
        .into_par_iter()
        .map(|rep| {
            let mut rng = stream(seed, rep as u64, Purpose::Generator);
            let (data, truth) = generator(&mut rng)?;
            let data = data.rescale_columns()?;
            let support = selector(&data)?;
            let beta0_w = data.to_working_scale(&truth.beta0);
            grid.iter()
                .map(|&l| {
                    let beta_w = if support.is_empty() {
                        DVector::zeros(data.p())
                    } else {
                        ridge_refit(&data, &support, l)?.beta_refitted
                    };
                    let l2 = (data.to_original_scale(&beta_w) - &truth.beta0).norm_squared();
                    let pred = (data.x() * (&beta_w - &beta0_w)).norm_squared() / data.n() as f64;
                    Ok((l2, pred))
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(grid
        .iter()
        .enumerate()
        .map(|(k, &l)| {
            let l2: Vec<f64> = per_rep.iter().map(|r| r[k].0).collect();
            let pred: Vec<f64> = per_rep.iter().map(|r| r[k].1).collect();
            let (l2_mean, l2_se) = mean_se(&l2);
            let (pred_mean, pred_se) = mean_se(&pred);
            EmpiricalRisk {
                lambda1: l,
                l2_risk: l2_mean,
                l2_se,
                pred_risk: pred_mean,
                pred_se,
                reps,
            }
        })
        .collect())
}

/// Single-`lambda1` form of [`empirical_risk_curve`].
pub fn empirical_risk<G, S>(generator: G, selector: S, lambda1: f64, reps: usize, seed: u64) -> Result<EmpiricalRisk>
where
    G: Fn(&mut rand_chacha::ChaCha8Rng) -> Result<(RegressionData, TrueModel)> + Sync,
    S: Fn(&RegressionData) -> Result<Vec<usize>> + Sync,
{
    Ok(empirical_risk_curve(generator, selector, &[lambda1], reps, seed)?[0])
}

/// Mean and standard error of the mean (zero for a single value).
pub(crate) fn mean_se(v: &[f64]) -> (f64, f64) {
    let m = v.len() as f64;
    let mean = v.iter().sum::<f64>() / m;
    if v.len() < 2 {
        return (mean, 0.0);
    }
    let var = v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (m - 1.0);
    (mean, (var / m).sqrt())
}
