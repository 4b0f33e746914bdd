//! Monte Carlo harness for the simulation designs: AR(1) Gaussian designs
//! with a repeated strong/weak signal pattern, tuning by a validation sample
//! and evaluation on a large independent test sample.

use nalgebra::{DMatrix, DVector};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

use crate::data::{support_of, RegressionData, TrueModel};
use crate::error::{Error, Result};
use crate::penalty::PenaltyFamily;
use crate::refit::ridge_refit;
use crate::rng::{stream, ErrorFamily, Purpose};
use crate::solver::{log_grid, select_by_validation, solve_path, PathConfig};

/// Rows generated at a time when streaming the test sample.
const TEST_CHUNK: usize = 512;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimDesign {
    pub n: usize,
    pub p: usize,
    pub q_repeats: usize,
    pub beta_strong: Vec<f64>,
    pub beta_weak: Vec<f64>,
    pub sigma: f64,
    pub corr_rho: f64,
    pub error_family: ErrorFamily,
    pub n_val: usize,
    pub n_test: usize,
    pub reps: usize,
    pub seed: u64,
}

impl Default for SimDesign {
    fn default() -> Self {
        Self {
            n: 100,
            p: 1000,
            q_repeats: 3,
            beta_strong: vec![0.6, 0.0, 0.0, -0.6, 0.0, 0.0],
            beta_weak: vec![0.05, 0.0, 0.0, -0.05, 0.0, 0.0],
            sigma: 0.4,
            corr_rho: 0.5,
            error_family: ErrorFamily::Gaussian,
            n_val: 100,
            n_test: 10_000,
            reps: 100,
            seed: 0,
        }
    }
}

impl SimDesign {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if self.n < 2 || self.n_val == 0 || self.n_test == 0 || self.reps == 0 {
            return bad("n >= 2, n_val >= 1, n_test >= 1 and reps >= 1 are required".into());
        }
        let block = self.beta_strong.len() + self.beta_weak.len();
        if block * self.q_repeats > self.p {
            return bad(format!(
                "signal pattern of length {block} repeated {} times exceeds p = {}",
                self.q_repeats, self.p
            ));
        }
        if self.p == 0 {
            return bad("p must be positive".into());
        }
        if self.beta_strong.iter().chain(&self.beta_weak).any(|b| !b.is_finite()) {
            return Err(Error::NonFinite("signal pattern".into()));
        }
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return bad(format!("sigma must be nonnegative, got {}", self.sigma));
        }
        if !(self.corr_rho > -1.0 && self.corr_rho < 1.0) {
            return bad(format!("corr_rho must lie in (-1, 1), got {}", self.corr_rho));
        }
        self.error_family.validate()
    }

    /// `beta0 = (v', ..., v', 0')'` with `v = (beta_strong', beta_weak')'`.
    pub fn beta0(&self) -> DVector<f64> {
        let mut beta = DVector::zeros(self.p);
        let v: Vec<f64> = self.beta_strong.iter().chain(&self.beta_weak).copied().collect();
        for r in 0..self.q_repeats {
            for (k, b) in v.iter().enumerate() {
                beta[r * v.len() + k] = *b;
            }
        }
        beta
    }

    fn indices(&self, strong: bool) -> Vec<usize> {
        let block = self.beta_strong.len() + self.beta_weak.len();
        let (offset, part) = if strong {
            (0, &self.beta_strong)
        } else {
            (self.beta_strong.len(), &self.beta_weak)
        };
        (0..self.q_repeats)
            .flat_map(|r| {
                part.iter()
                    .enumerate()
                    .filter(|(_, b)| **b != 0.0)
                    .map(move |(k, _)| r * block + offset + k)
            })
            .collect()
    }

    pub fn strong_indices(&self) -> Vec<usize> {
        self.indices(true)
    }

    pub fn weak_indices(&self) -> Vec<usize> {
        self.indices(false)
    }

    pub fn truth(&self) -> Result<SimTruth> {
        Ok(SimTruth {
            model: TrueModel::new(self.beta0(), self.sigma)?,
            strong: self.strong_indices(),
            weak: self.weak_indices(),
        })
    }

    /// `s sigma^2 / ||beta0||^2`, the ridge parameter optimal for equal eigenvalues.
    pub fn leading_ridge(&self) -> f64 {
        let b = self.beta0();
        let s = support_of(&b).len();
        if s == 0 {
            return 0.0;
        }
        s as f64 * self.sigma * self.sigma / b.norm_squared()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SimTruth {
    pub model: TrueModel,
    pub strong: Vec<usize>,
    pub weak: Vec<usize>,
}

#[derive(Clone, Debug)]
pub struct SimDataset {
    pub train: RegressionData,
    pub val: RegressionData,
    pub test: RegressionData,
    pub truth: SimTruth,
}

/// Draws rows `x ~ N(0, Sigma)`, `Sigma_ij = rho^|i-j|`, through the AR(1)
/// recursion, with responses `y = x'beta0 + eps`.
struct RowSampler<'a> {
    design: &'a SimDesign,
    nonzero: Vec<(usize, f64)>,
    x_rng: ChaCha8Rng,
    e_rng: ChaCha8Rng,
}

impl<'a> RowSampler<'a> {
    fn new(design: &'a SimDesign, rep: usize, x_purpose: Purpose, e_purpose: Purpose) -> Self {
        let beta0 = design.beta0();
        Self {
            design,
            nonzero: beta0.iter().enumerate().filter(|(_, b)| **b != 0.0).map(|(j, b)| (j, *b)).collect(),
            x_rng: stream(design.seed, rep as u64, x_purpose),
            e_rng: stream(design.seed, rep as u64, e_purpose),
        }
    }

    fn draw(&mut self, rows: usize) -> Result<(DMatrix<f64>, DVector<f64>)> {
        let p = self.design.p;
        let rho = self.design.corr_rho;
        let innov = (1.0 - rho * rho).sqrt();
        let mut x = DMatrix::zeros(rows, p);
        for i in 0..rows {
            let mut prev: f64 = StandardNormal.sample(&mut self.x_rng);
            x[(i, 0)] = prev;
            for j in 1..p {
                let z: f64 = StandardNormal.sample(&mut self.x_rng);
                prev = rho * prev + innov * z;
                x[(i, j)] = prev;
            }
        }
        let eps = self.design.error_family.draw(&mut self.e_rng, self.design.sigma, rows)?;
        let y = DVector::from_fn(rows, |i, _| {
            self.nonzero.iter().map(|&(j, b)| x[(i, j)] * b).sum::<f64>() + eps[i]
        });
        Ok((x, y))
    }
}

fn draw_set(design: &SimDesign, rep: usize, rows: usize, xp: Purpose, ep: Purpose) -> Result<RegressionData> {
    let (x, y) = RowSampler::new(design, rep, xp, ep).draw(rows)?;
    RegressionData::new(x, y)
}

fn draw_train_val(design: &SimDesign, rep: usize) -> Result<(RegressionData, RegressionData)> {
    Ok((
        draw_set(design, rep, design.n, Purpose::TrainDesign, Purpose::TrainNoise)?,
        draw_set(design, rep, design.n_val, Purpose::ValDesign, Purpose::ValNoise)?,
    ))
}

/// Training, validation and test samples of replication `rep`. Deterministic
/// in `(design.seed, rep)`; the test sample is identical to the one streamed
/// by the study runners.
pub fn generate_dataset(design: &SimDesign, rep: usize) -> Result<SimDataset> {
    design.validate()?;
    let (train, val) = draw_train_val(design, rep)?;
    let test = draw_set(design, rep, design.n_test, Purpose::TestDesign, Purpose::TestNoise)?;
    Ok(SimDataset {
        train,
        val,
        test,
        truth: design.truth()?,
    })
}

/// Test mean squared prediction error of every coefficient vector in
/// `candidates` (original scale, no intercept), generating the test sample in
/// chunks.
fn streamed_test_errors(design: &SimDesign, rep: usize, candidates: &[DVector<f64>]) -> Result<Vec<f64>> {
    let sparse: Vec<Vec<(usize, f64)>> = candidates
        .iter()
        .map(|b| b.iter().enumerate().filter(|(_, v)| **v != 0.0).map(|(j, v)| (j, *v)).collect())
        .collect();
    let mut sampler = RowSampler::new(design, rep, Purpose::TestDesign, Purpose::TestNoise);
    let mut sse = vec![0.0; candidates.len()];
    let mut done = 0;
    while done < design.n_test {
        let rows = TEST_CHUNK.min(design.n_test - done);
        let (x, y) = sampler.draw(rows)?;
        for (k, coef) in sparse.iter().enumerate() {
            let mut resid = y.clone();
            for &(j, b) in coef {
                resid.axpy(-b, &x.column(j), 1.0);
            }
            sse[k] += resid.norm_squared();
        }
        done += rows;
    }
    Ok(sse.into_iter().map(|s| s / design.n_test as f64).collect())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Hard,
    L0,
    Sica,
    Lasso,
    /// Least squares on the true support.
    Oracle,
}

impl Method {
    pub fn family(self) -> Option<PenaltyFamily> {
        match self {
            Method::Hard => Some(PenaltyFamily::Hard),
            Method::L0 => Some(PenaltyFamily::L0),
            Method::Sica => Some(PenaltyFamily::Sica),
            Method::Lasso => Some(PenaltyFamily::Lasso),
            Method::Oracle => None,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Method::Oracle => "Oracle",
            m => m.family().map(|f| f.label()).unwrap_or("Oracle"),
        }
    }

    pub fn refit_label(self) -> String {
        format!("{}-L2", self.label())
    }
}

impl From<PenaltyFamily> for Method {
    fn from(f: PenaltyFamily) -> Self {
        match f {
            PenaltyFamily::Hard => Method::Hard,
            PenaltyFamily::L0 => Method::L0,
            PenaltyFamily::Sica => Method::Sica,
            PenaltyFamily::Lasso => Method::Lasso,
        }
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s.eq_ignore_ascii_case("oracle") {
            return Ok(Method::Oracle);
        }
        s.parse::<PenaltyFamily>()
            .map(Method::from)
            .map_err(|_| Error::InvalidArgument(format!("unknown method '{s}'")))
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub rep: usize,
    pub method: String,
    /// Regularization parameter chosen by validation; absent for the oracle.
    pub lambda: Option<f64>,
    /// Ridge parameter of a refitted row at which `pe` was attained.
    pub lambda1: Option<f64>,
    pub pe: f64,
    pub l2_loss: f64,
    pub l1_loss: f64,
    pub linf_loss: f64,
    pub fp: usize,
    pub fn_strong: usize,
    pub fn_weak: usize,
    pub size: usize,
    /// `||y - X beta||_2 / sqrt(n - ||beta||_0)` on the training sample.
    pub sigma_hat: f64,
}

struct Losses {
    l2: f64,
    l1: f64,
    linf: f64,
}

fn losses(beta_hat: &DVector<f64>, beta0: &DVector<f64>) -> Losses {
    let d = beta_hat - beta0;
    Losses {
        l2: d.norm(),
        l1: d.lp_norm(1),
        linf: d.amax(),
    }
}

fn sigma_hat(train: &RegressionData, beta_hat: &DVector<f64>) -> f64 {
    let size = beta_hat.iter().filter(|b| **b != 0.0).count();
    if size >= train.n() {
        return f64::NAN;
    }
    (train.y() - train.x() * beta_hat).norm() / ((train.n() - size) as f64).sqrt()
}

fn metric_row(
    rep: usize,
    method: String,
    beta_hat: &DVector<f64>,
    truth: &SimTruth,
    train: &RegressionData,
    pe: f64,
) -> MetricRow {
    let support = support_of(beta_hat);
    let true_support = truth.model.support();
    let l = losses(beta_hat, &truth.model.beta0);
    let missed = |set: &[usize]| set.iter().filter(|j| support.binary_search(j).is_err()).count();
    MetricRow {
        rep,
        method,
        lambda: None,
        lambda1: None,
        pe,
        l2_loss: l.l2,
        l1_loss: l.l1,
        linf_loss: l.linf,
        fp: support.iter().filter(|j| true_support.binary_search(j).is_err()).count(),
        fn_strong: missed(&truth.strong),
        fn_weak: missed(&truth.weak),
        size: support.len(),
        sigma_hat: sigma_hat(train, beta_hat),
    }
}

/// Metrics of an original-scale coefficient vector. The losses are
/// `||beta_hat - beta0||_q` for `q = 2, 1, inf`; `pe` is the test mean
/// squared prediction error.
pub fn evaluate_fit(
    method: &str,
    beta_hat: &DVector<f64>,
    truth: &SimTruth,
    train: &RegressionData,
    test: &RegressionData,
) -> Result<MetricRow> {
    let p = truth.model.beta0.len();
    if beta_hat.len() != p || test.p() != p || train.p() != p {
        return Err(Error::Dimension(format!(
            "coefficients {}, train {}, test {} columns; expected {p}",
            beta_hat.len(),
            train.p(),
            test.p()
        )));
    }
    let pe = (test.y() - test.x() * beta_hat).norm_squared() / test.n() as f64;
    Ok(metric_row(0, method.to_string(), beta_hat, truth, train, pe))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    pub sd: f64,
}

impl Summary {
    pub fn of(v: &[f64]) -> Self {
        let m = v.len() as f64;
        let mean = v.iter().sum::<f64>() / m;
        let sd = if v.len() > 1 {
            (v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (m - 1.0)).sqrt()
        } else {
            0.0
        };
        Self { mean, sd }
    }

    fn rounded(self) -> Self {
        Self {
            mean: round4(self.mean),
            sd: round4(self.sd),
        }
    }
}

fn round4(v: f64) -> f64 {
    (v * 1e4).round() / 1e4
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MethodAggregate {
    pub method: String,
    pub reps: usize,
    pub pe: Summary,
    pub l2_loss: Summary,
    pub l1_loss: Summary,
    pub linf_loss: Summary,
    pub fp: Summary,
    pub fn_strong: Summary,
    pub fn_weak: Summary,
    pub size: Summary,
    pub sigma_hat: Summary,
}

impl MethodAggregate {
    fn from_rows(method: &str, rows: &[&MetricRow]) -> Self {
        let col = |f: &dyn Fn(&MetricRow) -> f64| Summary::of(&rows.iter().map(|r| f(r)).collect::<Vec<_>>());
        Self {
            method: method.to_string(),
            reps: rows.len(),
            pe: col(&|r| r.pe),
            l2_loss: col(&|r| r.l2_loss),
            l1_loss: col(&|r| r.l1_loss),
            linf_loss: col(&|r| r.linf_loss),
            fp: col(&|r| r.fp as f64),
            fn_strong: col(&|r| r.fn_strong as f64),
            fn_weak: col(&|r| r.fn_weak as f64),
            size: col(&|r| r.size as f64),
            sigma_hat: col(&|r| r.sigma_hat),
        }
    }

    fn rounded(&self) -> Self {
        Self {
            method: self.method.clone(),
            reps: self.reps,
            pe: self.pe.rounded(),
            l2_loss: self.l2_loss.rounded(),
            l1_loss: self.l1_loss.rounded(),
            linf_loss: self.linf_loss.rounded(),
            fp: self.fp.rounded(),
            fn_strong: self.fn_strong.rounded(),
            fn_weak: self.fn_weak.rounded(),
            size: self.size.rounded(),
            sigma_hat: self.sigma_hat.rounded(),
        }
    }
}

/// How the ridge parameter of a refitted estimator is chosen.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RefitTuning {
    /// Each replication and each metric at its own test-risk minimizer.
    #[default]
    TestRiskPerReplication,
    /// One ridge parameter per method and metric, minimizing the mean test
    /// risk over replications.
    PooledTestRisk,
    /// Each replication at the ridge parameter minimizing validation error.
    Validation,
}

impl FromStr for RefitTuning {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "test" | "test_risk_per_replication" | "per_rep" => Ok(RefitTuning::TestRiskPerReplication),
            "pooled" | "pooled_test_risk" => Ok(RefitTuning::PooledTestRisk),
            "validation" | "val" => Ok(RefitTuning::Validation),
            _ => Err(Error::InvalidArgument(format!("unknown refit tuning '{s}'"))),
        }
    }
}

/// Mean empirical risks of a refitted estimator at one ridge parameter.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub method: String,
    pub lambda1: f64,
    pub pe_mean: f64,
    pub pe_se: f64,
    pub l2_mean: f64,
    pub l2_se: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RefitInfo {
    pub tuning: RefitTuning,
    pub lambda1_grid: Vec<f64>,
    pub curves: Vec<CurvePoint>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimReport {
    pub design: SimDesign,
    pub path_config: PathConfig,
    pub methods: Vec<String>,
    /// Ordered by replication, then by method.
    pub rows: Vec<MetricRow>,
    pub aggregates: Vec<MethodAggregate>,
    pub refit: Option<RefitInfo>,
}

impl SimReport {
    pub fn aggregate(&self, method: &str) -> Option<&MethodAggregate> {
        self.aggregates.iter().find(|a| a.method == method)
    }

    pub fn rows_for<'a>(&'a self, method: &'a str) -> impl Iterator<Item = &'a MetricRow> + 'a {
        self.rows.iter().filter(move |r| r.method == method)
    }

    /// Means and standard deviations per method recomputed from `rows`.
    pub fn recompute_aggregates(&self) -> Vec<MethodAggregate> {
        self.methods
            .iter()
            .map(|m| MethodAggregate::from_rows(m, &self.rows_for(m).collect::<Vec<_>>()))
            .collect()
    }

    pub fn write_rows_csv<W: std::io::Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        for r in &self.rows {
            wtr.serialize(r)?;
        }
        wtr.flush()?;
        Ok(())
    }

    pub fn write_curves_csv<W: std::io::Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::WriterBuilder::new().has_headers(false).from_writer(w);
        wtr.write_record(["method", "lambda1", "pe_mean", "pe_se", "l2_mean", "l2_se"])?;
        if let Some(info) = &self.refit {
            for c in &info.curves {
                wtr.serialize(c)?;
            }
        }
        wtr.flush()?;
        Ok(())
    }

    /// Aggregates rounded to four decimals, with the design and solver
    /// settings that produced them.
    pub fn summary_json(&self) -> serde_json::Value {
        serde_json::json!({
            "design": self.design,
            "path_config": self.path_config,
            "refit": self.refit.as_ref().map(|r| serde_json::json!({
                "tuning": r.tuning,
                "lambda1_grid": r.lambda1_grid,
            })),
            "aggregates": self.aggregates.iter().map(|a| a.rounded()).collect::<Vec<_>>(),
        })
    }

    /// Fixed-width table of mean (sd) per method.
    pub fn table(&self) -> String {
        let mut out = format!(
            "{:<10} {:>17} {:>17} {:>17} {:>17} {:>8} {:>8} {:>8} {:>8}\n",
            "method", "PE", "L2-loss", "L1-loss", "Linf-loss", "FP", "FN-s", "FN-w", "sigma"
        );
        for a in &self.aggregates {
            let ms = |s: Summary| format!("{:.4} ({:.4})", s.mean, s.sd);
            out.push_str(&format!(
                "{:<10} {:>17} {:>17} {:>17} {:>17} {:>8.2} {:>8.2} {:>8.2} {:>8.4}\n",
                a.method,
                ms(a.pe),
                ms(a.l2_loss),
                ms(a.l1_loss),
                ms(a.linf_loss),
                a.fp.mean,
                a.fn_strong.mean,
                a.fn_weak.mean,
                a.sigma_hat.mean
            ));
        }
        out
    }
}

/// Zero followed by 40 log-spaced values on `[c / 100, 100 c]`,
/// `c = s sigma^2 / ||beta0||^2`.
pub fn default_lambda1_grid(design: &SimDesign) -> Vec<f64> {
    let c = design.leading_ridge();
    let mut grid = vec![0.0];
    if c > 0.0 {
        grid.extend(log_grid(100.0 * c, c / 100.0, 40).into_iter().rev());
    }
    grid
}

/// Per-replication results of one method.
struct MethodOutcome {
    method: Method,
    lambda: Option<f64>,
    support: Vec<usize>,
    /// Original-scale estimate, followed by the ridge refits in grid order.
    candidates: Vec<DVector<f64>>,
    val_errors: Vec<f64>,
}

struct RepOutcome {
    rows: Vec<MetricRow>,
    /// Per refitted method: `(pe, l2, l1, linf, sigma_hat)` along the grid.
    curves: Vec<Vec<[f64; 5]>>,
}

fn fit_method(
    method: Method,
    train: &RegressionData,
    val: &RegressionData,
    truth: &SimTruth,
    cfg: &PathConfig,
) -> Result<(Option<f64>, DVector<f64>)> {
    match method.family() {
        Some(family) => {
            let path = solve_path(train, family, cfg)?;
            let choice = select_by_validation(&path, train, val)?;
            Ok((Some(choice.lambda), choice.fit.beta))
        }
        None => {
            let support = truth.model.support();
            if support.is_empty() {
                return Ok((None, DVector::zeros(train.p())));
            }
            Ok((None, ridge_refit(train, &support, 0.0)?.beta_refitted))
        }
    }
}

fn run_replication(
    design: &SimDesign,
    rep: usize,
    methods: &[Method],
    cfg: &PathConfig,
    refit: Option<(&[f64], RefitTuning)>,
) -> Result<RepOutcome> {
    let in_rep = |method: &str| {
        let method = method.to_string();
        move |e: Error| Error::InReplication {
            rep,
            method: method.clone(),
            source: Box::new(e),
        }
    };
    let truth = design.truth()?;
    let (train_raw, val) = draw_train_val(design, rep).map_err(in_rep("data"))?;
    let train = train_raw.clone().rescale_columns().map_err(in_rep("data"))?;

    let mut outcomes = Vec::with_capacity(methods.len());
    for &method in methods {
        let wrap = in_rep(method.label());
        let (lambda, beta_w) = fit_method(method, &train, &val, &truth, cfg).map_err(&wrap)?;
        let support = support_of(&beta_w);
        let mut candidates = vec![train.to_original_scale(&beta_w)];
        let mut val_errors = Vec::new();
        if let Some((grid, _)) = refit {
            for &l1 in grid {
                let refitted = if support.is_empty() {
                    DVector::zeros(design.p)
                } else {
                    ridge_refit(&train, &support, l1).map_err(&wrap)?.beta_refitted
                };
                let original = train.to_original_scale(&refitted);
                val_errors.push((val.y() - val.x() * &original).norm_squared() / val.n() as f64);
                candidates.push(original);
            }
        }
        outcomes.push(MethodOutcome {
            method,
            lambda,
            support,
            candidates,
            val_errors,
        });
    }

    let all: Vec<DVector<f64>> = outcomes.iter().flat_map(|o| o.candidates.iter().cloned()).collect();
    let pe = streamed_test_errors(design, rep, &all).map_err(in_rep("test"))?;

    let mut rows = Vec::new();
    let mut curves = Vec::new();
    let mut offset = 0;
    for o in &outcomes {
        let mut row = metric_row(rep, o.method.label().to_string(), &o.candidates[0], &truth, &train_raw, pe[offset]);
        row.lambda = o.lambda;
        debug_assert_eq!(row.size, o.support.len());
        rows.push(row);
        if let Some((grid, tuning)) = refit {
            let curve: Vec<[f64; 5]> = (0..grid.len())
                .map(|k| {
                    let b = &o.candidates[k + 1];
                    let l = losses(b, &truth.model.beta0);
                    [pe[offset + 1 + k], l.l2, l.l1, l.linf, sigma_hat(&train_raw, b)]
                })
                .collect();
            let mut r = metric_row(rep, o.method.refit_label(), &o.candidates[1], &truth, &train_raw, 0.0);
            r.lambda = o.lambda;
            let pick = |metric: usize| match tuning {
                RefitTuning::Validation => argmin(&o.val_errors),
                _ => argmin(&curve.iter().map(|c| c[metric]).collect::<Vec<_>>()),
            };
            apply_choice(&mut r, &curve, grid, [pick(0), pick(1), pick(2), pick(3)]);
            rows.push(r);
            curves.push(curve);
        }
        offset += o.candidates.len();
    }
    Ok(RepOutcome { rows, curves })
}

/// Sets the refit metrics of `row` from `curve`, each metric at its own index.
fn apply_choice(row: &mut MetricRow, curve: &[[f64; 5]], grid: &[f64], idx: [usize; 4]) {
    row.pe = curve[idx[0]][0];
    row.sigma_hat = curve[idx[0]][4];
    row.lambda1 = Some(grid[idx[0]]);
    row.l2_loss = curve[idx[1]][1];
    row.l1_loss = curve[idx[2]][2];
    row.linf_loss = curve[idx[3]][3];
}

/// First index of the smallest value; NaN never wins.
fn argmin(v: &[f64]) -> usize {
    let mut best = 0;
    for (k, x) in v.iter().enumerate() {
        if *x < v[best] || v[best].is_nan() {
            best = k;
        }
    }
    best
}

fn run(
    design: &SimDesign,
    methods: &[Method],
    cfg: &PathConfig,
    refit: Option<(&[f64], RefitTuning)>,
) -> Result<SimReport> {
    design.validate()?;
    cfg.validate(design.n)?;
    if methods.is_empty() {
        return Err(Error::InvalidArgument("no methods requested".into()));
    }
    if let Some((grid, _)) = refit {
        if grid.is_empty() || grid.iter().any(|l| !(*l >= 0.0) || !l.is_finite()) {
            return Err(Error::InvalidArgument("ridge grid must be nonempty and nonnegative".into()));
        }
    }
    let outcomes: Vec<RepOutcome> = (0..design.reps)
        .into_par_iter()
        .map(|rep| run_replication(design, rep, methods, cfg, refit))
        .collect::<Result<_>>()?;

    let mut names = Vec::new();
    for m in methods {
        names.push(m.label().to_string());
        if refit.is_some() {
            names.push(m.refit_label());
        }
    }

    let mut rows: Vec<MetricRow> = outcomes.iter().flat_map(|o| o.rows.iter().cloned()).collect();
    let refit_info = refit.map(|(grid, tuning)| {
        let mut curves = Vec::new();
        for (mi, m) in methods.iter().enumerate() {
            let label = m.refit_label();
            let mean_curve: Vec<[f64; 5]> = (0..grid.len())
                .map(|k| {
                    let mut acc = [0.0; 5];
                    for o in &outcomes {
                        for (a, v) in acc.iter_mut().zip(o.curves[mi][k]) {
                            *a += v;
                        }
                    }
                    acc.map(|a| a / outcomes.len() as f64)
                })
                .collect();
            for (k, &l1) in grid.iter().enumerate() {
                let pes: Vec<f64> = outcomes.iter().map(|o| o.curves[mi][k][0]).collect();
                let l2s: Vec<f64> = outcomes.iter().map(|o| o.curves[mi][k][1]).collect();
                let (pe_mean, pe_se) = crate::refit::mean_se(&pes);
                let (l2_mean, l2_se) = crate::refit::mean_se(&l2s);
                curves.push(CurvePoint {
                    method: label.clone(),
                    lambda1: l1,
                    pe_mean,
                    pe_se,
                    l2_mean,
                    l2_se,
                });
            }
            if tuning == RefitTuning::PooledTestRisk {
                let pick = |metric: usize| argmin(&mean_curve.iter().map(|c| c[metric]).collect::<Vec<_>>());
                let idx = [pick(0), pick(1), pick(2), pick(3)];
                for (rep, o) in outcomes.iter().enumerate() {
                    let row = rows
                        .iter_mut()
                        .find(|r| r.rep == rep && r.method == label)
                        .expect("refit row exists");
                    apply_choice(row, &o.curves[mi], grid, idx);
                }
            }
        }
        RefitInfo {
            tuning,
            lambda1_grid: grid.to_vec(),
            curves,
        }
    });

    let mut report = SimReport {
        design: design.clone(),
        path_config: cfg.clone(),
        methods: names,
        rows: Vec::new(),
        aggregates: Vec::new(),
        refit: refit_info,
    };
    std::mem::swap(&mut report.rows, &mut rows);
    report.aggregates = report.recompute_aggregates();
    Ok(report)
}

/// For every replication and method: fit the path on the training sample,
/// select the regularization parameter by validation error and evaluate on
/// the test sample. The oracle is least squares on the true support.
pub fn run_study(design: &SimDesign, methods: &[Method], cfg: &PathConfig) -> Result<SimReport> {
    run(design, methods, cfg, None)
}

/// [`run_study`] followed by a ridge refit of every selected model at each
/// ridge parameter in `lambda1_grid` (working column scale). Adds a
/// `<method>-L2` row per replication and the mean risk curves.
pub fn run_refit_study(
    design: &SimDesign,
    methods: &[Method],
    cfg: &PathConfig,
    lambda1_grid: &[f64],
    tuning: RefitTuning,
) -> Result<SimReport> {
    run(design, methods, cfg, Some((lambda1_grid, tuning)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_design() -> SimDesign {
        SimDesign {
            n: 40,
            p: 30,
            q_repeats: 1,
            n_val: 40,
            n_test: 1500,
            reps: 3,
            seed: 11,
            ..SimDesign::default()
        }
    }

    #[test]
    fn beta0_pattern_and_index_sets() {
        let d = SimDesign::default();
        let b = d.beta0();
        assert_eq!(support_of(&b), vec![0, 3, 6, 9, 12, 15, 18, 21, 24, 27, 30, 33]);
        assert_eq!(b[12], 0.6);
        assert_eq!(b[21], -0.05);
        assert_eq!(d.strong_indices(), vec![0, 3, 12, 15, 24, 27]);
        assert_eq!(d.weak_indices(), vec![6, 9, 18, 21, 30, 33]);
    }

    #[test]
    fn design_validation() {
        assert!(SimDesign::default().validate().is_ok());
        let bad = SimDesign { p: 20, ..SimDesign::default() };
        assert!(bad.validate().is_err());
        let bad = SimDesign { corr_rho: 1.0, ..SimDesign::default() };
        assert!(bad.validate().is_err());
        let json = serde_json::to_string(&SimDesign::default()).unwrap();
        let back: SimDesign = serde_json::from_str(&json).unwrap();
        assert_eq!(back, SimDesign::default());
        let partial: SimDesign = serde_json::from_str(r#"{"p": 50, "q_repeats": 1}"#).unwrap();
        assert_eq!(partial.n, 100);
    }

    #[test]
    fn noiseless_response_is_exact() {
        let d = SimDesign { sigma: 0.0, ..small_design() };
        let ds = generate_dataset(&d, 0).unwrap();
        let fitted = ds.train.x() * d.beta0();
        assert!((fitted - ds.train.y()).amax() < 1e-12);
    }

    #[test]
    fn streamed_test_matches_materialized() {
        let d = small_design();
        let ds = generate_dataset(&d, 2).unwrap();
        let mut b = d.beta0();
        b[1] = 0.3;
        let streamed = streamed_test_errors(&d, 2, &[d.beta0(), b.clone()]).unwrap();
        for (k, beta) in [d.beta0(), b].iter().enumerate() {
            let direct = (ds.test.y() - ds.test.x() * beta).norm_squared() / d.n_test as f64;
            assert!((streamed[k] - direct).abs() < 1e-12 * direct.max(1.0));
        }
    }

    #[test]
    fn evaluate_fit_counts() {
        let d = small_design();
        let ds = generate_dataset(&d, 0).unwrap();
        let exact = evaluate_fit("x", &d.beta0(), &ds.truth, &ds.train, &ds.test).unwrap();
        assert_eq!((exact.fp, exact.fn_strong, exact.fn_weak), (0, 0, 0));
        assert_eq!(exact.l2_loss, 0.0);
        assert!((exact.pe - 0.16).abs() < 0.02);

        let zero = evaluate_fit("x", &DVector::zeros(d.p), &ds.truth, &ds.train, &ds.test).unwrap();
        assert_eq!((zero.fn_strong, zero.fn_weak, zero.size), (2, 2, 0));

        let mut extra = d.beta0();
        extra[29] = 0.1;
        let one = evaluate_fit("x", &extra, &ds.truth, &ds.train, &ds.test).unwrap();
        assert_eq!(one.fp, 1);
    }

    #[test]
    fn noiseless_oracle_has_zero_losses() {
        let d = SimDesign { sigma: 0.0, reps: 1, ..small_design() };
        let r = run_study(&d, &[Method::Oracle], &PathConfig::default()).unwrap();
        let row = &r.rows[0];
        assert!(row.l2_loss < 1e-10 && row.pe < 1e-20 && row.linf_loss < 1e-10);
    }

    #[test]
    fn aggregates_recompute_exactly() {
        let d = small_design();
        let r = run_study(&d, &[Method::Hard, Method::Oracle], &PathConfig::default()).unwrap();
        assert_eq!(r.rows.len(), 6);
        assert_eq!(r.recompute_aggregates(), r.aggregates);
        assert_eq!(r.rows[0].method, "Hard");
        assert_eq!(r.rows[1].method, "Oracle");
    }

    #[test]
    fn zero_ridge_refit_of_oracle_is_the_oracle() {
        let d = small_design();
        let r = run_refit_study(&d, &[Method::Oracle], &PathConfig::default(), &[0.0], RefitTuning::default()).unwrap();
        let base: Vec<_> = r.rows_for("Oracle").collect();
        let refit: Vec<_> = r.rows_for("Oracle-L2").collect();
        for (a, b) in base.iter().zip(&refit) {
            assert!((a.pe - b.pe).abs() < 1e-12);
            assert!((a.l2_loss - b.l2_loss).abs() < 1e-12);
        }
        let mut buf = Vec::new();
        r.write_curves_csv(&mut buf).unwrap();
        assert!(String::from_utf8(buf).unwrap().starts_with("method,lambda1,pe_mean"));
    }

    #[test]
    fn method_parsing() {
        assert_eq!("oracle".parse::<Method>().unwrap(), Method::Oracle);
        assert_eq!("SICA".parse::<Method>().unwrap(), Method::Sica);
        assert_eq!(Method::Hard.refit_label(), "Hard-L2");
        assert!("ridge".parse::<Method>().is_err());
        assert_eq!("pooled".parse::<RefitTuning>().unwrap(), RefitTuning::PooledTestRisk);
    }
}
