//! Collinearity and identifiability diagnostics: robust spark bounds, noise
//! event frequencies and an audit of the oracle inequalities for a fit.

use itertools::Itertools;
use nalgebra::{DMatrix, DVector};
use rand::seq::index::sample;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::cmp::Ordering;

use crate::data::{support_of, RegressionData, TrueModel};
use crate::error::{Error, Result};
use crate::linalg::smallest_singular;
use crate::rng::{stream, ErrorFamily, Purpose};
use crate::penalty::{PenaltyFamily, PenaltySpec};
use crate::solver::{lambda_max, log_grid, solve_path, LambdaGrid, PathConfig, SparseFit};

/// Largest number of subsets the exact spark search will enumerate.
pub const SPARK_BUDGET: u64 = 10_000_000;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SparkCertificate {
    pub c: f64,
    pub tau_checked: usize,
    pub min_singular_found: f64,
    pub witness_subset: Vec<usize>,
    /// `min_singular_found >= c`. For the exact search this certifies
    /// `rspark_c(X) > tau_checked`; for the heuristic search it only means
    /// that no violating subset was found.
    pub is_lower_bound_valid: bool,
    pub exhaustive: bool,
}

fn scaled_min_singular(x: &DMatrix<f64>, cols: &[usize]) -> f64 {
    let sub = x.select_columns(cols) / (x.nrows() as f64).sqrt();
    smallest_singular(sub).unwrap_or(f64::INFINITY)
}

fn better(a: &(f64, Vec<usize>), b: &(f64, Vec<usize>)) -> bool {
    match a.0.total_cmp(&b.0) {
        Ordering::Less => true,
        Ordering::Greater => false,
        Ordering::Equal => a.1 < b.1,
    }
}

fn pick(a: (f64, Vec<usize>), b: (f64, Vec<usize>)) -> (f64, Vec<usize>) {
    if better(&b, &a) {
        b
    } else {
        a
    }
}

/// `C(p, k)` as a float, to compare against the budget without overflow.
pub fn n_subsets(p: usize, k: usize) -> f64 {
    if k > p {
        return 0.0;
    }
    let k = k.min(p - k);
    (0..k).fold(1.0, |acc, i| acc * (p - i) as f64 / (i + 1) as f64)
}

fn check_tau(p: usize, tau: usize) -> Result<()> {
    if tau == 0 || tau > p {
        return Err(Error::InvalidArgument(format!(
            "subset size must lie in 1..={p}, got {tau}"
        )));
    }
    Ok(())
}

/// Smallest singular value of `n^{-1/2} X_S` over every subset `S` of size
/// `tau_max`. Adding a column never increases the smallest singular value,
/// so the minimum over all sizes up to `tau_max` is attained at `tau_max`.
pub fn robust_spark_exact(data: &RegressionData, c: f64, tau_max: usize) -> Result<SparkCertificate> {
    if !(c > 0.0 && c.is_finite()) {
        return Err(Error::InvalidArgument(format!("spark bound c must be positive, got {c}")));
    }
    let p = data.p();
    check_tau(p, tau_max)?;
    let count = n_subsets(p, tau_max);
    if count > SPARK_BUDGET as f64 {
        return Err(Error::BudgetExceeded {
            subsets: count,
            budget: SPARK_BUDGET,
        });
    }
    let x = data.x();
    let (min, witness) = (0..=p - tau_max)
        .into_par_iter()
        .map(|first| {
            (first + 1..p)
                .combinations(tau_max - 1)
                .map(|rest| {
                    let mut cols = Vec::with_capacity(tau_max);
                    cols.push(first);
                    cols.extend(rest);
                    (scaled_min_singular(x, &cols), cols)
                })
                .reduce(pick)
                .expect("at least one subset")
        })
        .reduce_with(pick)
        .expect("at least one first index");
    Ok(SparkCertificate {
        c,
        tau_checked: tau_max,
        min_singular_found: min,
        witness_subset: witness,
        is_lower_bound_valid: min >= c,
        exhaustive: true,
    })
}

/// Largest singular value of `n^{-1/2} X_S` over subsets of size `tau`,
/// with a maximizing subset. Exhaustive, under the same budget as the spark
/// search.
pub fn max_sparse_singular_value(data: &RegressionData, tau: usize) -> Result<(f64, Vec<usize>)> {
    let p = data.p();
    check_tau(p, tau)?;
    let count = n_subsets(p, tau);
    if count > SPARK_BUDGET as f64 {
        return Err(Error::BudgetExceeded {
            subsets: count,
            budget: SPARK_BUDGET,
        });
    }
    let x = data.x();
    let sqrt_n = (data.n() as f64).sqrt();
    let (neg, cols) = (0..p)
        .combinations(tau)
        .par_bridge()
        .map(|cols| {
            let sub = x.select_columns(&cols) / sqrt_n;
            let top = sub.singular_values().max();
            (-top, cols)
        })
        .reduce_with(pick)
        .expect("at least one subset");
    Ok((-neg, cols))
}

/// Local search for a subset of size `tau` with a small singular value.
///
/// Each descent starts from a random subset and applies the best improving
/// single-column swap until none improves. `restarts` additional descents are
/// run from fresh random subsets. With `tau = 1` all columns are enumerated.
pub fn robust_spark_heuristic(
    data: &RegressionData,
    c: f64,
    tau: usize,
    restarts: usize,
    seed: u64,
) -> Result<SparkCertificate> {
    if !(c > 0.0 && c.is_finite()) {
        return Err(Error::InvalidArgument(format!("spark bound c must be positive, got {c}")));
    }
    let p = data.p();
    check_tau(p, tau)?;
    if tau > data.n() {
        return Err(Error::InvalidArgument(format!(
            "subset size {tau} exceeds the sample size {}",
            data.n()
        )));
    }
    if tau == 1 {
        let mut cert = robust_spark_exact(data, c, 1)?;
        cert.is_lower_bound_valid = cert.min_singular_found >= c;
        return Ok(cert);
    }
    let x = data.x();
    let (min, witness) = (0..=restarts)
        .into_par_iter()
        .map(|r| {
            let mut rng = stream(seed, r as u64, Purpose::Search);
            let mut cur: Vec<usize> = sample(&mut rng, p, tau).into_vec();
            cur.sort_unstable();
            descend(x, cur)
        })
        .reduce_with(pick)
        .expect("at least one descent");
    Ok(SparkCertificate {
        c,
        tau_checked: tau,
        min_singular_found: min,
        witness_subset: witness,
        is_lower_bound_valid: false,
        exhaustive: false,
    })
}

fn descend(x: &DMatrix<f64>, start: Vec<usize>) -> (f64, Vec<usize>) {
    let p = x.ncols();
    let mut best = (scaled_min_singular(x, &start), start);
    loop {
        let mut step: Option<(f64, Vec<usize>)> = None;
        for k in 0..best.1.len() {
            for j in 0..p {
                if best.1.binary_search(&j).is_ok() {
                    continue;
                }
                let mut cand = best.1.clone();
                cand[k] = j;
                cand.sort_unstable();
                let v = (scaled_min_singular(x, &cand), cand);
                if step.as_ref().is_none_or(|s| better(&v, s)) {
                    step = Some(v);
                }
            }
        }
        match step {
            Some(s) if s.0 < best.0 => best = s,
            _ => return best,
        }
    }
}

/// Constants of the oracle inequalities.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OracleBoundParams {
    /// Robust spark bound.
    pub c: f64,
    /// Constant of the event on all columns; at least `sqrt(10) sigma`.
    pub c2: f64,
    /// Constant of the event on the true columns; at least `sqrt(2) sigma`.
    pub c2_prime: f64,
    /// Minimum signal strength.
    pub b0: f64,
    pub s: usize,
    pub sigma: f64,
    /// `max(n, p)`.
    pub p_tilde: usize,
}

const RELATIVE_SLACK: f64 = 1e-12;

impl OracleBoundParams {
    /// Parameters with `c2 = sqrt(10) sigma` and `c2' = sqrt(2) sigma`.
    pub fn minimal(c: f64, b0: f64, s: usize, sigma: f64, n: usize, p: usize) -> Result<Self> {
        Self::new(c, 10f64.sqrt() * sigma, 2f64.sqrt() * sigma, b0, s, sigma, n, p)
    }

    #[allow(clippy::too_many_arguments)]
    pub fn new(c: f64, c2: f64, c2_prime: f64, b0: f64, s: usize, sigma: f64, n: usize, p: usize) -> Result<Self> {
        let params = Self {
            c,
            c2,
            c2_prime,
            b0,
            s,
            sigma,
            p_tilde: n.max(p),
        };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if !(self.c > 0.0 && self.c.is_finite()) {
            return bad(format!("c must be positive, got {}", self.c));
        }
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return bad(format!("sigma must be nonnegative, got {}", self.sigma));
        }
        if !(self.c2 >= 10f64.sqrt() * self.sigma * (1.0 - RELATIVE_SLACK)) || !self.c2.is_finite() {
            return bad(format!("c2 = {} is below sqrt(10) sigma", self.c2));
        }
        if !(self.c2_prime >= 2f64.sqrt() * self.sigma * (1.0 - RELATIVE_SLACK)) || !self.c2_prime.is_finite() {
            return bad(format!("c2' = {} is below sqrt(2) sigma", self.c2_prime));
        }
        if !(self.b0 >= 0.0 && self.b0.is_finite()) {
            return bad(format!("b0 must be nonnegative, got {}", self.b0));
        }
        if self.p_tilde < 2 {
            return bad("max(n, p) must be at least 2".into());
        }
        Ok(())
    }

    fn check_data(&self, n: usize, p: usize) -> Result<()> {
        if self.p_tilde != n.max(p) {
            return Err(Error::Dimension(format!(
                "p_tilde = {} but max(n, p) = {}",
                self.p_tilde,
                n.max(p)
            )));
        }
        Ok(())
    }

    /// Threshold of the event on all columns, `c2 sqrt(log p~ / n)`.
    pub fn threshold_e(&self, n: usize) -> f64 {
        self.c2 * ((self.p_tilde as f64).ln() / n as f64).sqrt()
    }

    /// Threshold of the event on the true columns, `c2' sqrt(log n / n)`.
    pub fn threshold_e_prime(&self, n: usize) -> f64 {
        self.c2_prime * ((n as f64).ln() / n as f64).sqrt()
    }

    /// Lower bound on the probability of the event on all columns.
    pub fn bound_e(&self) -> f64 {
        if self.sigma == 0.0 {
            return 1.0;
        }
        let pt = self.p_tilde as f64;
        let tail = (2.0 / std::f64::consts::PI).sqrt() * self.sigma / self.c2 / pt.ln().sqrt()
            * pt.powf(1.0 - self.c2 * self.c2 / (2.0 * self.sigma * self.sigma));
        1.0 - tail
    }

    /// Lower bound on the probability of the event on the true columns.
    pub fn bound_e_prime(&self, n: usize) -> f64 {
        if self.sigma == 0.0 || self.s == 0 {
            return 1.0;
        }
        let nf = n as f64;
        let tail = (2.0 / std::f64::consts::PI).sqrt() * self.sigma * self.s as f64 / self.c2_prime / nf.ln().sqrt()
            * nf.powf(-self.c2_prime * self.c2_prime / (2.0 * self.sigma * self.sigma));
        1.0 - tail
    }

    /// Open interval of admissible regularization parameters.
    pub fn lambda_window(&self, n: usize) -> (f64, f64) {
        let lo = self.c2 / self.c * ((2 * self.s + 1) as f64 * (self.p_tilde as f64).ln() / n as f64).sqrt();
        let hi = self.b0 * (self.c * self.c / 2.0).sqrt().min(1.0);
        (lo, hi)
    }

    pub fn prediction_bound(&self, n: usize) -> f64 {
        let nf = n as f64;
        2.0 * self.c2_prime / self.c * (self.s as f64 * nf.ln() / nf).sqrt()
    }

    /// Bound on the Lq estimation loss for `q` in `[1, 2]`.
    pub fn lq_bound(&self, q: f64, n: usize) -> f64 {
        let nf = n as f64;
        2.0 / (self.c * self.c) * self.c2_prime * (self.s as f64).powf(1.0 / q) * (nf.ln() / nf).sqrt()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EventFrequency {
    pub freq_e: f64,
    pub freq_e_prime: f64,
    pub se_e: f64,
    pub se_e_prime: f64,
    pub bound_e: f64,
    pub bound_e_prime: f64,
    pub reps: usize,
}

/// Fraction of noise draws for which `||X'eps / n||_inf` and
/// `||X0'eps / n||_inf` stay below their thresholds.
pub fn event_frequency(
    data: &RegressionData,
    truth: &TrueModel,
    params: &OracleBoundParams,
    family: ErrorFamily,
    reps: usize,
    seed: u64,
) -> Result<EventFrequency> {
    if reps == 0 {
        return Err(Error::InvalidArgument("reps must be at least 1".into()));
    }
    params.validate()?;
    family.validate()?;
    let (n, p) = (data.n(), data.p());
    params.check_data(n, p)?;
    if truth.beta0.len() != p {
        return Err(Error::Dimension(format!("true model has {} coefficients for {p} columns", truth.beta0.len())));
    }
    let support = truth.support();
    let t_e = params.threshold_e(n);
    let t_e0 = params.threshold_e_prime(n);
    let x = data.x();
    let hits: Vec<(bool, bool)> = (0..reps)
        .into_par_iter()
        .map(|rep| {
            let mut rng = stream(seed, rep as u64, Purpose::Noise);
            let eps = DVector::from_vec(family.draw(&mut rng, params.sigma, n)?);
            let score = x.tr_mul(&eps) / n as f64;
            let all = score.amax();
            let on_support = support.iter().map(|&j| score[j].abs()).fold(0.0, f64::max);
            Ok((all <= t_e, on_support <= t_e0))
        })
        .collect::<Result<_>>()?;
    let rate = |k: usize| k as f64 / reps as f64;
    let se = |f: f64| (f * (1.0 - f) / reps as f64).sqrt();
    let freq_e = rate(hits.iter().filter(|h| h.0).count());
    let freq_e_prime = rate(hits.iter().filter(|h| h.1).count());
    Ok(EventFrequency {
        freq_e,
        freq_e_prime,
        se_e: se(freq_e),
        se_e_prime: se(freq_e_prime),
        bound_e: params.bound_e(),
        bound_e_prime: params.bound_e_prime(n),
        reps,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundCheck {
    pub name: String,
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub lambda: f64,
    pub support_recovered: bool,
    pub lambda_admissible: bool,
    pub checks: Vec<BoundCheck>,
}

impl AuditReport {
    fn check(&self, name: &str) -> bool {
        self.checks.iter().any(|c| c.name == name && c.holds)
    }

    /// Support recovery and the prediction, L1, L2 and L-infinity bounds.
    pub fn bounds_hold(&self) -> bool {
        ["support_recovery", "prediction_loss", "l1_loss", "l2_loss", "linf_loss"]
            .iter()
            .all(|n| self.check(n))
    }
}

/// Compares a fit with the true model against the oracle inequalities.
///
/// Losses are computed on the working (rescaled) coefficient scale, where
/// the inequalities are stated; `truth.beta0` is on the original scale of
/// `data` and is converted.
pub fn audit_oracle_bounds(
    fit: &SparseFit,
    truth: &TrueModel,
    params: &OracleBoundParams,
    data: &RegressionData,
) -> Result<AuditReport> {
    params.validate()?;
    let (n, p) = (data.n(), data.p());
    params.check_data(n, p)?;
    if fit.beta.len() != p || truth.beta0.len() != p {
        return Err(Error::Dimension(format!(
            "fit has {} and truth {} coefficients for {p} columns",
            fit.beta.len(),
            truth.beta0.len()
        )));
    }
    let beta0 = data.to_working_scale(&truth.beta0);
    let delta = &fit.beta - &beta0;
    let pred = (data.x() * &delta).norm() / (n as f64).sqrt();
    let l1 = delta.lp_norm(1);
    let l2 = delta.norm();
    let linf = delta.amax();

    let selected = support_of(&fit.beta);
    let truth_support = truth.support();
    let mismatched = selected
        .iter()
        .filter(|j| truth_support.binary_search(j).is_err())
        .count()
        + truth_support
            .iter()
            .filter(|j| selected.binary_search(j).is_err())
            .count();

    let lambda = fit.penalty.lambda;
    let (lo, hi) = params.lambda_window(n);
    let l2_bound = params.lq_bound(2.0, n);
    let entry = |name: &str, lhs: f64, rhs: f64, holds: bool| BoundCheck {
        name: name.to_string(),
        lhs,
        rhs,
        holds,
    };
    let checks = vec![
        entry("support_recovery", mismatched as f64, 0.0, mismatched == 0),
        entry("prediction_loss", pred, params.prediction_bound(n), pred <= params.prediction_bound(n)),
        entry("l1_loss", l1, params.lq_bound(1.0, n), l1 <= params.lq_bound(1.0, n)),
        entry("l2_loss", l2, l2_bound, l2 <= l2_bound),
        entry("linf_loss", linf, l2_bound, linf <= l2_bound),
        entry("lambda_lower", lo, lambda, lo < lambda),
        entry("lambda_upper", lambda, hi, lambda < hi),
    ];
    Ok(AuditReport {
        lambda,
        support_recovered: mismatched == 0,
        lambda_admissible: lo < lambda && lambda < hi,
        checks,
    })
}

/// Monte Carlo setting for auditing the oracle inequalities of the Hard fit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AuditDesign {
    pub n: usize,
    pub p: usize,
    pub s: usize,
    /// Magnitude of every true coefficient; signs alternate.
    pub b0: f64,
    pub sigma: f64,
    /// AR(1) correlation of the Gaussian design columns.
    pub corr_rho: f64,
    /// Supplied robust spark bound.
    pub c: f64,
    /// Defaults to `sqrt(10) sigma`.
    pub c2: Option<f64>,
    /// Defaults to `sqrt(2) sigma`.
    pub c2_prime: Option<f64>,
    /// Defaults to the geometric midpoint of the admissible window.
    pub lambda: Option<f64>,
    /// Grid points on the path from the zero fit down to `lambda`.
    pub n_lambda: usize,
    pub reps: usize,
    pub seed: u64,
}

impl Default for AuditDesign {
    fn default() -> Self {
        Self {
            n: 100,
            p: 200,
            s: 3,
            b0: 0.6,
            sigma: 0.1,
            corr_rho: 0.0,
            c: 0.75,
            c2: None,
            c2_prime: None,
            lambda: None,
            n_lambda: 30,
            reps: 200,
            seed: 0,
        }
    }
}

impl AuditDesign {
    pub fn params(&self) -> Result<OracleBoundParams> {
        OracleBoundParams::new(
            self.c,
            self.c2.unwrap_or(10f64.sqrt() * self.sigma),
            self.c2_prime.unwrap_or(2f64.sqrt() * self.sigma),
            self.b0,
            self.s,
            self.sigma,
            self.n,
            self.p,
        )
    }

    pub fn resolved_lambda(&self) -> Result<f64> {
        match self.lambda {
            Some(l) if l > 0.0 && l.is_finite() => Ok(l),
            Some(l) => Err(Error::InvalidArgument(format!("lambda must be positive, got {l}"))),
            None => {
                let (lo, hi) = self.params()?.lambda_window(self.n);
                if !(lo < hi) {
                    return Err(Error::InvalidArgument(format!(
                        "admissible window ({lo}, {hi}) is empty for c = {}",
                        self.c
                    )));
                }
                Ok((lo * hi).sqrt())
            }
        }
    }

    fn validate(&self) -> Result<()> {
        if self.s == 0 || self.s > self.p || self.n < 2 || self.reps == 0 || self.n_lambda == 0 {
            return Err(Error::InvalidArgument(
                "audit design needs 1 <= s <= p, n >= 2, reps >= 1 and n_lambda >= 1".into(),
            ));
        }
        if !(self.corr_rho > -1.0 && self.corr_rho < 1.0) {
            return Err(Error::InvalidArgument("corr_rho must lie in (-1, 1)".into()));
        }
        if !(self.b0 > 0.0) {
            return Err(Error::InvalidArgument("b0 must be positive".into()));
        }
        self.params().map(|_| ())
    }

    /// Design with columns of norm exactly `sqrt(n)` and its true model.
    pub fn generate(&self, rep: usize) -> Result<(RegressionData, TrueModel)> {
        let (n, p) = (self.n, self.p);
        let mut rng = stream(self.seed, rep as u64, Purpose::TrainDesign);
        let innov = (1.0 - self.corr_rho * self.corr_rho).sqrt();
        let mut x = DMatrix::zeros(n, p);
        for i in 0..n {
            let mut prev = 0.0;
            for j in 0..p {
                let z: f64 = rand_distr::Distribution::sample(&rand_distr::StandardNormal, &mut rng);
                prev = if j == 0 { z } else { self.corr_rho * prev + innov * z };
                x[(i, j)] = prev;
            }
        }
        for mut col in x.column_iter_mut() {
            let norm = col.norm();
            col.scale_mut((n as f64).sqrt() / norm);
        }
        let beta0 = DVector::from_fn(p, |j, _| match j {
            j if j < self.s && j % 2 == 0 => self.b0,
            j if j < self.s => -self.b0,
            _ => 0.0,
        });
        let mut noise = stream(self.seed, rep as u64, Purpose::TrainNoise);
        let eps = ErrorFamily::Gaussian.draw(&mut noise, self.sigma, n)?;
        let y = &x * &beta0 + DVector::from_vec(eps);
        Ok((RegressionData::new(x, y)?.rescale_columns()?, TrueModel::new(beta0, self.sigma)?))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckRate {
    pub name: String,
    pub holds_fraction: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AuditStudy {
    pub design: AuditDesign,
    pub params: OracleBoundParams,
    pub lambda: f64,
    pub lambda_window: (f64, f64),
    pub reps: usize,
    /// Fraction of replications with support recovery and all loss bounds.
    pub all_bounds_rate: f64,
    pub check_rates: Vec<CheckRate>,
    pub reports: Vec<AuditReport>,
}

/// Fits the Hard path from the zero fit down to the audited lambda in every
/// replication and audits the last fit.
pub fn run_audit_study(design: &AuditDesign, cfg: &PathConfig) -> Result<AuditStudy> {
    design.validate()?;
    let params = design.params()?;
    let lambda = design.resolved_lambda()?;
    let reports: Vec<AuditReport> = (0..design.reps)
        .into_par_iter()
        .map(|rep| {
            let (data, truth) = design.generate(rep)?;
            let top = lambda_max(&data, &PenaltySpec::new(PenaltyFamily::Hard, 1.0))?;
            let grid = if top > lambda {
                log_grid(top, lambda, design.n_lambda.max(2))
            } else {
                vec![lambda]
            };
            let path = solve_path(&data, PenaltyFamily::Hard, &PathConfig {
                lambda_grid: LambdaGrid::Explicit { values: grid },
                ..cfg.clone()
            })?;
            let fit = &path.entries.last().ok_or(Error::EmptyPath)?.fit;
            audit_oracle_bounds(fit, &truth, &params, &data)
        })
        .collect::<Result<_>>()?;
    let m = reports.len() as f64;
    let check_rates = reports[0]
        .checks
        .iter()
        .map(|c| CheckRate {
            name: c.name.clone(),
            holds_fraction: reports.iter().filter(|r| r.check(&c.name)).count() as f64 / m,
        })
        .collect();
    Ok(AuditStudy {
        design: design.clone(),
        params,
        lambda,
        lambda_window: params.lambda_window(design.n),
        reps: design.reps,
        all_bounds_rate: reports.iter().filter(|r| r.bounds_hold()).count() as f64 / m,
        check_rates,
        reports,
    })
}
