//! Path-following iterative coordinate algorithm (ICA) for the penalized
//! least-squares objective.
//!
//! Each coordinate is replaced by the closed-form univariate minimizer of the
//! objective along that coordinate, in fixed cyclic order `0..p`. This is a
//! local method: it is not guaranteed to reach the global minimizer. Paths
//! are computed from the largest to the smallest regularization parameter,
//! warm-starting each fit from the previous solution.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::data::{objective, support_of, LinearPredictor, RegressionData};
use crate::error::{Error, Result};
use crate::linalg::min_singular_value_gram;
use crate::penalty::{PenaltyFamily, PenaltySpec, DEFAULT_SICA_SHAPE};

/// Tolerance on `||x_j||^2 / n - 1` accepted as a rescaled column.
const COLUMN_SCALE_TOL: f64 = 1e-8;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LambdaGrid {
    /// Strictly decreasing positive values.
    Explicit { values: Vec<f64> },
    /// `n_lambda` log-spaced values from the smallest lambda giving the zero
    /// fit down to `min_ratio` times that value.
    Auto { n_lambda: usize, min_ratio: f64 },
}

impl Default for LambdaGrid {
    fn default() -> Self {
        LambdaGrid::Auto {
            n_lambda: 100,
            min_ratio: 1e-3,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PathConfig {
    pub lambda_grid: LambdaGrid,
    /// Maximum number of full sweeps per fit.
    pub max_iter: usize,
    /// Convergence threshold on the largest absolute coefficient change in a sweep.
    pub tol: f64,
    /// Cap on the support size; `None` means `floor(n / 2)`.
    pub max_support: Option<usize>,
    /// Final SICA shape parameter.
    pub sica_shape: f64,
    /// Larger SICA shapes fitted first at every lambda to stabilize the solution.
    pub sica_pilot_shapes: Vec<f64>,
}

impl Default for PathConfig {
    fn default() -> Self {
        Self {
            lambda_grid: LambdaGrid::default(),
            max_iter: 500,
            tol: 1e-7,
            max_support: None,
            sica_shape: DEFAULT_SICA_SHAPE,
            sica_pilot_shapes: vec![1.0, 0.1],
        }
    }
}

impl PathConfig {
    pub fn with_grid(values: Vec<f64>) -> Self {
        Self {
            lambda_grid: LambdaGrid::Explicit { values },
            ..Self::default()
        }
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        if !(self.tol > 0.0) {
            return Err(Error::InvalidArgument(format!("tol must be positive, got {}", self.tol)));
        }
        if self.max_iter == 0 {
            return Err(Error::InvalidArgument("max_iter must be at least 1".into()));
        }
        if let Some(m) = self.max_support {
            if m > n {
                return Err(Error::InvalidArgument(format!(
                    "max_support {m} exceeds the sample size {n}"
                )));
            }
        }
        if !(self.sica_shape > 0.0) {
            return Err(Error::InvalidArgument("SICA shape must be positive".into()));
        }
        if self.sica_pilot_shapes.iter().any(|a| !(*a > 0.0))
            || self.sica_pilot_shapes.windows(2).any(|w| w[1] >= w[0])
        {
            return Err(Error::InvalidArgument(
                "SICA pilot shapes must be positive and strictly decreasing".into(),
            ));
        }
        match &self.lambda_grid {
            LambdaGrid::Explicit { values } => {
                if values.is_empty() {
                    return Err(Error::InvalidArgument("lambda grid is empty".into()));
                }
                if values.iter().any(|l| !(*l > 0.0) || !l.is_finite()) {
                    return Err(Error::InvalidArgument("lambda grid must be positive".into()));
                }
                if values.windows(2).any(|w| w[1] >= w[0]) {
                    return Err(Error::InvalidArgument(
                        "lambda grid must be strictly decreasing".into(),
                    ));
                }
            }
            LambdaGrid::Auto { n_lambda, min_ratio } => {
                if *n_lambda == 0 || !(*min_ratio > 0.0 && *min_ratio < 1.0) {
                    return Err(Error::InvalidArgument(
                        "automatic grid needs n_lambda >= 1 and 0 < min_ratio < 1".into(),
                    ));
                }
            }
        }
        Ok(())
    }

    pub fn support_cap(&self, n: usize) -> usize {
        self.max_support.unwrap_or((n / 2).max(1))
    }

    /// Penalty at the final shape for `family`.
    pub fn penalty(&self, family: PenaltyFamily, lambda: f64) -> PenaltySpec {
        PenaltySpec {
            family,
            lambda,
            shape_a: self.sica_shape,
        }
    }

    pub fn resolve_grid(&self, data: &RegressionData, family: PenaltyFamily) -> Result<Vec<f64>> {
        match &self.lambda_grid {
            LambdaGrid::Explicit { values } => Ok(values.clone()),
            LambdaGrid::Auto { n_lambda, min_ratio } => {
                let top = lambda_max(data, &self.penalty(family, 1.0))?;
                Ok(log_grid(top, top * min_ratio, *n_lambda))
            }
        }
    }
}

/// `m` log-spaced values from `hi` down to `lo`.
pub fn log_grid(hi: f64, lo: f64, m: usize) -> Vec<f64> {
    if m == 1 {
        return vec![hi];
    }
    let (lh, ll) = (hi.ln(), lo.ln());
    (0..m)
        .map(|k| (lh + (ll - lh) * k as f64 / (m - 1) as f64).exp())
        .collect()
}

/// `max_j |n^{-1} x_j' y|`.
pub fn max_abs_correlation(data: &RegressionData) -> f64 {
    let n = data.n() as f64;
    data.x()
        .column_iter()
        .map(|c| (c.dot(data.y()) / n).abs())
        .fold(0.0, f64::max)
}

/// Smallest lambda at which every univariate update from zero stays at zero.
/// Equals `max_j |n^{-1} x_j'y|` for the Hard, L0 and Lasso families; found by
/// bisection for SICA, whose threshold is not lambda itself.
pub fn lambda_max(data: &RegressionData, template: &PenaltySpec) -> Result<f64> {
    let zmax = max_abs_correlation(data);
    if !(zmax > 0.0) {
        return Err(Error::InvalidArgument(
            "response is orthogonal to every column; no nontrivial path".into(),
        ));
    }
    match template.family {
        PenaltyFamily::Hard | PenaltyFamily::L0 | PenaltyFamily::Lasso => Ok(zmax),
        PenaltyFamily::Sica => {
            let zero_at = |l: f64| template.with_lambda(l).threshold(zmax) == 0.0;
            let mut hi = zmax;
            while !zero_at(hi) {
                hi *= 2.0;
            }
            let mut lo = 0.0;
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if zero_at(mid) {
                    hi = mid;
                } else {
                    lo = mid;
                }
                if hi - lo <= 1e-14 * hi {
                    break;
                }
            }
            Ok(hi)
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SparseFit {
    pub penalty: PenaltySpec,
    /// Coefficients on the working (rescaled) column scale.
    pub beta: DVector<f64>,
    pub support: Vec<usize>,
    pub objective: f64,
    /// Full sweeps performed.
    pub iterations: usize,
    pub converged: bool,
    /// Smallest singular value of `n^{-1/2} X` restricted to the support.
    pub min_singular_value: Option<f64>,
    /// Updates rejected because they would have grown the support past the cap.
    pub support_cap_events: usize,
}

/// One coordinate update, reported to an observer.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CoordinateUpdate {
    pub sweep: usize,
    pub coordinate: usize,
    pub old: f64,
    pub new: f64,
    pub accepted: bool,
}

pub fn ica_fit(
    data: &RegressionData,
    pen: &PenaltySpec,
    init: &DVector<f64>,
    cfg: &PathConfig,
) -> Result<SparseFit> {
    run_ica(data, pen, init, cfg, None)
}

/// [`ica_fit`] reporting every coordinate whose value would change.
pub fn ica_fit_observed(
    data: &RegressionData,
    pen: &PenaltySpec,
    init: &DVector<f64>,
    cfg: &PathConfig,
    observer: &mut dyn FnMut(&CoordinateUpdate),
) -> Result<SparseFit> {
    run_ica(data, pen, init, cfg, Some(observer))
}

fn check_scaled(data: &RegressionData) -> Result<()> {
    if data.is_rescaled() {
        return Ok(());
    }
    let n = data.n() as f64;
    for (j, c) in data.x().column_iter().enumerate() {
        if (c.norm_squared() / n - 1.0).abs() > COLUMN_SCALE_TOL {
            return Err(Error::InvalidArgument(format!(
                "column {j} does not have norm sqrt(n); rescale the data first"
            )));
        }
    }
    Ok(())
}

fn run_ica(
    data: &RegressionData,
    pen: &PenaltySpec,
    init: &DVector<f64>,
    cfg: &PathConfig,
    mut observer: Option<&mut dyn FnMut(&CoordinateUpdate)>,
) -> Result<SparseFit> {
    pen.validate()?;
    cfg.validate(data.n())?;
    if init.len() != data.p() {
        return Err(Error::Dimension(format!(
            "initial vector has length {} but design has {} columns",
            init.len(),
            data.p()
        )));
    }
    if init.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("initial coefficients".into()));
    }
    check_scaled(data)?;

    let n = data.n();
    let p = data.p();
    let inv_n = 1.0 / n as f64;
    let cap = cfg.support_cap(n);
    let xs = data.x().as_slice();

    let mut beta = init.clone();
    let mut resid = data.y() - data.x() * &beta;
    let mut support_size = beta.iter().filter(|b| **b != 0.0).count();
    let mut cap_events = 0;
    let mut converged = false;
    let mut sweeps = 0;

    while sweeps < cfg.max_iter {
        sweeps += 1;
        let mut max_change: f64 = 0.0;
        for j in 0..p {
            let col = &xs[j * n..(j + 1) * n];
            let old = beta[j];
            let dot: f64 = col.iter().zip(resid.iter()).map(|(a, b)| a * b).sum();
            let z = dot * inv_n + old;
            if !z.is_finite() {
                return Err(Error::NonFinite(format!(
                    "coordinate {j} in sweep {sweeps}"
                )));
            }
            let new = pen.threshold(z);
            if new == old {
                continue;
            }
            let grows = old == 0.0 && new != 0.0;
            let accepted = !(grows && support_size >= cap);
            if let Some(obs) = observer.as_deref_mut() {
                obs(&CoordinateUpdate {
                    sweep: sweeps,
                    coordinate: j,
                    old,
                    new,
                    accepted,
                });
            }
            if !accepted {
                cap_events += 1;
                continue;
            }
            let delta = new - old;
            for (r, a) in resid.iter_mut().zip(col) {
                *r -= delta * a;
            }
            beta[j] = new;
            if grows {
                support_size += 1;
            } else if new == 0.0 {
                support_size -= 1;
            }
            max_change = max_change.max(delta.abs());
        }
        if max_change < cfg.tol {
            converged = true;
            break;
        }
    }

    let support = support_of(&beta);
    let objective = objective(data, &beta, pen)?;
    if !objective.is_finite() {
        return Err(Error::NonFinite("objective".into()));
    }
    Ok(SparseFit {
        penalty: *pen,
        min_singular_value: min_singular_value_gram(data.x(), &support),
        beta,
        support,
        objective,
        iterations: sweeps,
        converged,
        support_cap_events: cap_events,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct PathEntry {
    pub lambda: f64,
    pub fit: SparseFit,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolutionPath {
    pub family: PenaltyFamily,
    /// Ordered by decreasing lambda.
    pub entries: Vec<PathEntry>,
    /// Lambda whose fit hit the support cap; the path stops before it.
    pub truncated_at: Option<f64>,
}

impl SolutionPath {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn to_export(&self, data: &RegressionData) -> PathExport {
        PathExport {
            family: self.family,
            shape_a: self.entries.first().map(|e| e.fit.penalty.shape_a),
            truncated_at: self.truncated_at,
            entries: self
                .entries
                .iter()
                .map(|e| FitExport::new(&e.fit, data, e.lambda))
                .collect(),
        }
    }
}

/// Single fit at `lambda` from `init`. For SICA the pilot shapes are fitted
/// first, each warm-starting the next.
pub fn fit_at(
    data: &RegressionData,
    family: PenaltyFamily,
    lambda: f64,
    init: &DVector<f64>,
    cfg: &PathConfig,
) -> Result<SparseFit> {
    let mut warm = init.clone();
    if family == PenaltyFamily::Sica {
        for &a in &cfg.sica_pilot_shapes {
            warm = ica_fit(data, &PenaltySpec::sica(lambda, a), &warm, cfg)?.beta;
        }
    }
    ica_fit(data, &cfg.penalty(family, lambda), &warm, cfg)
}

pub fn solve_path(data: &RegressionData, family: PenaltyFamily, cfg: &PathConfig) -> Result<SolutionPath> {
    cfg.validate(data.n())?;
    let grid = cfg.resolve_grid(data, family)?;
    let mut entries: Vec<PathEntry> = Vec::with_capacity(grid.len());
    let mut truncated_at = None;
    let mut warm = DVector::zeros(data.p());

    for &lambda in &grid {
        let at = |e: Error| Error::AtLambda {
            lambda,
            source: Box::new(e),
        };
        let fit = fit_at(data, family, lambda, &warm, cfg).map_err(at)?;
        if fit.support_cap_events > 0 {
            truncated_at = Some(lambda);
            break;
        }
        warm = fit.beta.clone();
        entries.push(PathEntry { lambda, fit });
    }
    Ok(SolutionPath {
        family,
        entries,
        truncated_at,
    })
}

#[derive(Clone, Debug)]
pub struct ValidationChoice {
    pub index: usize,
    pub lambda: f64,
    pub fit: SparseFit,
    /// Prediction rule on the original scale.
    pub predictor: LinearPredictor,
    pub validation_error: f64,
    /// Validation error of every path entry, in path order.
    pub errors: Vec<f64>,
}

/// Picks the path entry with the smallest validation mean squared error.
/// `train` supplies the scaling the path was fitted under; `val` is raw data.
/// Ties go to the larger lambda.
pub fn select_by_validation(
    path: &SolutionPath,
    train: &RegressionData,
    val: &RegressionData,
) -> Result<ValidationChoice> {
    if path.is_empty() {
        return Err(Error::EmptyPath);
    }
    if val.p() != train.p() {
        return Err(Error::Dimension(format!(
            "validation data has {} columns, training data {}",
            val.p(),
            train.p()
        )));
    }
    let errors = path
        .entries
        .iter()
        .map(|e| train.predictor(&e.fit.beta).mean_squared_error(val))
        .collect::<Result<Vec<_>>>()?;
    let mut best = 0;
    for (k, &err) in errors.iter().enumerate() {
        if err < errors[best] {
            best = k;
        }
    }
    let entry = &path.entries[best];
    Ok(ValidationChoice {
        index: best,
        lambda: entry.lambda,
        predictor: train.predictor(&entry.fit.beta),
        fit: entry.fit.clone(),
        validation_error: errors[best],
        errors,
    })
}

/// JSON-facing view of a fit with coefficients on the original scale.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitExport {
    pub lambda: f64,
    pub support: Vec<usize>,
    pub beta_nonzero: Vec<f64>,
    pub objective: f64,
    pub min_singular_value: Option<f64>,
    pub iterations: usize,
    pub converged: bool,
}

impl FitExport {
    pub fn new(fit: &SparseFit, data: &RegressionData, lambda: f64) -> Self {
        let original = data.to_original_scale(&fit.beta);
        Self {
            lambda,
            support: fit.support.clone(),
            beta_nonzero: fit.support.iter().map(|&j| original[j]).collect(),
            objective: fit.objective,
            min_singular_value: fit.min_singular_value,
            iterations: fit.iterations,
            converged: fit.converged,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PathExport {
    pub family: PenaltyFamily,
    pub shape_a: Option<f64>,
    pub truncated_at: Option<f64>,
    pub entries: Vec<FitExport>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::ols_on_support;
    use nalgebra::DMatrix;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn gaussian_data(n: usize, p: usize, beta: &[f64], sigma: f64, seed: u64) -> RegressionData {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = DMatrix::from_fn(n, p, |_, _| StandardNormal.sample(&mut rng));
        let b = DVector::from_column_slice(beta);
        let noise = DVector::from_fn(n, |_, _| { let z: f64 = StandardNormal.sample(&mut rng); sigma * z });
        let y = &x * b + noise;
        RegressionData::new(x, y).unwrap().rescale_columns().unwrap()
    }

    #[test]
    fn large_lambda_gives_zero_in_one_sweep() {
        let d = gaussian_data(30, 6, &[1.0, 0.0, -1.0, 0.0, 0.0, 0.5], 0.3, 1);
        let lam = max_abs_correlation(&d) * 1.01;
        for fam in [PenaltyFamily::Hard, PenaltyFamily::L0, PenaltyFamily::Lasso] {
            let fit = ica_fit(&d, &PenaltySpec::new(fam, lam), &DVector::zeros(6), &PathConfig::default()).unwrap();
            assert!(fit.support.is_empty());
            assert_eq!(fit.iterations, 1);
            assert!(fit.converged);
        }
    }

    #[test]
    fn unscaled_data_is_rejected() {
        let x = DMatrix::from_row_slice(2, 1, &[1.0, 5.0]);
        let d = RegressionData::new(x, DVector::from_vec(vec![1.0, 2.0])).unwrap();
        let r = ica_fit(&d, &PenaltySpec::new(PenaltyFamily::Hard, 0.1), &DVector::zeros(1), &PathConfig::default());
        assert!(matches!(r, Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn init_length_mismatch() {
        let d = gaussian_data(10, 3, &[1.0, 0.0, 0.0], 0.1, 2);
        let r = ica_fit(&d, &PenaltySpec::new(PenaltyFamily::Hard, 0.1), &DVector::zeros(4), &PathConfig::default());
        assert!(matches!(r, Err(Error::Dimension(_))));
    }

    #[test]
    fn converged_hard_fit_is_ols_on_its_support() {
        let d = gaussian_data(60, 12, &[1.0, 0.0, 0.0, -0.8, 0.0, 0.0, 0.6, 0.0, 0.0, 0.0, 0.0, 0.0], 0.3, 3);
        let cfg = PathConfig { tol: 1e-12, max_iter: 5000, ..PathConfig::default() };
        let fit = ica_fit(&d, &PenaltySpec::new(PenaltyFamily::Hard, 0.3), &DVector::zeros(12), &cfg).unwrap();
        assert!(fit.converged);
        assert!(!fit.support.is_empty());
        let ols = ols_on_support(d.x(), d.y(), &fit.support).unwrap();
        assert!((ols - &fit.beta).amax() < 1e-6);
    }

    #[test]
    fn support_cap_rejects_growth() {
        let d = gaussian_data(40, 10, &[1.0, 1.0, 1.0, 1.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0], 0.1, 4);
        let cfg = PathConfig { max_support: Some(2), ..PathConfig::default() };
        let fit = ica_fit(&d, &PenaltySpec::new(PenaltyFamily::Hard, 0.05), &DVector::zeros(10), &cfg).unwrap();
        assert!(fit.support.len() <= 2);
        assert!(fit.support_cap_events > 0);
    }

    #[test]
    fn path_starts_at_zero_and_single_grid_matches_fit() {
        let d = gaussian_data(40, 8, &[1.0, 0.0, -0.7, 0.0, 0.0, 0.0, 0.0, 0.4], 0.2, 5);
        let path = solve_path(&d, PenaltyFamily::Hard, &PathConfig::default()).unwrap();
        assert_eq!(path.len(), 100);
        assert!(path.entries[0].fit.support.is_empty());
        assert!(path.entries.windows(2).all(|w| w[0].lambda > w[1].lambda));

        let cfg = PathConfig::with_grid(vec![0.2]);
        let single = solve_path(&d, PenaltyFamily::Hard, &cfg).unwrap();
        let direct = ica_fit(&d, &cfg.penalty(PenaltyFamily::Hard, 0.2), &DVector::zeros(8), &cfg).unwrap();
        assert_eq!(single.len(), 1);
        assert_eq!(single.entries[0].fit, direct);
    }

    #[test]
    fn sica_lambda_max_zeroes_the_fit() {
        let d = gaussian_data(40, 8, &[1.0, 0.0, -0.7, 0.0, 0.0, 0.0, 0.0, 0.4], 0.2, 6);
        let template = PenaltySpec::sica(1.0, 0.01);
        let top = lambda_max(&d, &template).unwrap();
        let at = ica_fit(&d, &template.with_lambda(top), &DVector::zeros(8), &PathConfig::default()).unwrap();
        assert!(at.support.is_empty());
        let below = ica_fit(&d, &template.with_lambda(top * 0.98), &DVector::zeros(8), &PathConfig::default()).unwrap();
        assert!(!below.support.is_empty());
    }

    #[test]
    fn grid_validation() {
        assert!(PathConfig::with_grid(vec![0.3, 0.3]).validate(10).is_err());
        assert!(PathConfig::with_grid(vec![]).validate(10).is_err());
        assert!(PathConfig::with_grid(vec![0.3, -0.1]).validate(10).is_err());
        let cfg = PathConfig { max_support: Some(11), ..PathConfig::default() };
        assert!(cfg.validate(10).is_err());
        let cfg = PathConfig { tol: 0.0, ..PathConfig::default() };
        assert!(cfg.validate(10).is_err());
    }

    #[test]
    fn validation_on_empty_path_errors() {
        let d = gaussian_data(10, 3, &[1.0, 0.0, 0.0], 0.1, 7);
        let path = SolutionPath { family: PenaltyFamily::Hard, entries: vec![], truncated_at: None };
        assert!(matches!(select_by_validation(&path, &d, &d), Err(Error::EmptyPath)));
    }
}
