//! Command-line interface of the `threshreg` binary.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use nalgebra::DVector;
use serde_json::{json, Value};

use crate::data::{RegressionData, ResponseColumn};
use crate::diagnostics::{
    robust_spark_exact, robust_spark_heuristic, run_audit_study, AuditDesign,
};
use crate::error::{Error, Result};
use crate::penalty::PenaltyFamily;
use crate::refit::{default_risk_grid, optimal_ridge, ridge_refit, risk_curve, RiskTarget, SpectralModel};
use crate::sim::{default_lambda1_grid, run_refit_study, run_study, Method, RefitTuning, SimDesign, SimReport};
use crate::solver::{fit_at, select_by_validation, solve_path, FitExport, LambdaGrid, PathConfig};
use crate::split::{quadratic_expansion, random_split_study, SplitConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

#[derive(Parser, Debug)]
#[command(name = "threshreg", version, about = "Thresholded sparse regression with L2 refitting")]
struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true, env = "THRESHREG_THREADS")]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Fit one penalty at one lambda.
    Fit(FitArgs),
    /// Fit a regularization path, optionally choosing lambda on validation data.
    Path(PathArgs),
    /// Ridge-refit a given support.
    Refit(RefitArgs),
    /// Analytic risk curves and optimal ridge parameters of a refitted model.
    RiskCurve(RiskCurveArgs),
    /// Robust spark bound of a design matrix.
    Spark(SparkArgs),
    /// Simulation study comparing penalized estimators.
    Simulate(SimArgs),
    /// Simulation study with ridge refitting and empirical risk curves.
    RefitStudy(RefitStudyArgs),
    /// Repeated random train/validation splits of a data set.
    SplitStudy(SplitArgs),
    /// Monte Carlo audit of the oracle inequalities.
    Audit(AuditArgs),
}

#[derive(Args, Debug)]
struct DataArgs {
    /// CSV file with a header row or purely numeric rows.
    #[arg(long)]
    data: PathBuf,
    /// Response column, by header name or 0-based index.
    #[arg(long)]
    response: String,
    /// Fit without centering (no intercept).
    #[arg(long)]
    no_center: bool,
}

impl DataArgs {
    fn load_raw(&self) -> Result<RegressionData> {
        RegressionData::from_csv_path(&self.data, &response_column(&self.response))
    }

    fn load(&self) -> Result<RegressionData> {
        let raw = self.load_raw()?;
        let d = if self.no_center { raw } else { raw.centered()? };
        d.rescale_columns()
    }
}

#[derive(Args, Debug, Clone)]
struct SolverArgs {
    /// Explicit decreasing lambda grid, comma separated.
    #[arg(long, value_delimiter = ',', conflicts_with_all = ["n_lambda", "min_ratio"])]
    lambda_grid: Option<Vec<f64>>,
    /// Number of automatic grid points.
    #[arg(long)]
    n_lambda: Option<usize>,
    /// Smallest automatic grid value as a fraction of the largest.
    #[arg(long)]
    min_ratio: Option<f64>,
    #[arg(long)]
    max_iter: Option<usize>,
    #[arg(long)]
    tol: Option<f64>,
    /// Support size cap (default n/2).
    #[arg(long)]
    max_support: Option<usize>,
    /// SICA shape parameter.
    #[arg(long)]
    shape_a: Option<f64>,
}

impl SolverArgs {
    fn config(&self) -> PathConfig {
        let mut cfg = PathConfig::default();
        if let Some(values) = &self.lambda_grid {
            cfg.lambda_grid = LambdaGrid::Explicit { values: values.clone() };
        } else if let LambdaGrid::Auto { n_lambda, min_ratio } = &mut cfg.lambda_grid {
            *n_lambda = self.n_lambda.unwrap_or(*n_lambda);
            *min_ratio = self.min_ratio.unwrap_or(*min_ratio);
        }
        if let Some(v) = self.max_iter {
            cfg.max_iter = v;
        }
        if let Some(v) = self.tol {
            cfg.tol = v;
        }
        cfg.max_support = self.max_support;
        if let Some(a) = self.shape_a {
            cfg.sica_shape = a;
            cfg.sica_pilot_shapes.retain(|s| *s > a);
        }
        cfg
    }
}

#[derive(Args, Debug)]
struct OutArgs {
    /// Directory for output files; without it the primary output goes to stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct FitArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long)]
    penalty: PenaltyFamily,
    #[arg(long)]
    lambda: f64,
    #[command(flatten)]
    solver: SolverArgs,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Args, Debug)]
struct PathArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long)]
    penalty: PenaltyFamily,
    /// Validation CSV with the same columns; selects lambda by prediction error.
    #[arg(long)]
    val_data: Option<PathBuf>,
    /// Use the automatic grid (the default unless --lambda-grid is given).
    #[arg(long, conflicts_with = "lambda_grid")]
    auto_grid: bool,
    #[command(flatten)]
    solver: SolverArgs,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Args, Debug)]
struct RefitArgs {
    #[command(flatten)]
    data: DataArgs,
    /// 0-based column indices to refit.
    #[arg(long, value_delimiter = ',', required = true)]
    support: Vec<usize>,
    #[arg(long)]
    lambda1: f64,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Args, Debug)]
struct RiskCurveArgs {
    /// JSON file {"d": [...], "b": [...], "sigma": s, "n": n} giving the
    /// eigenvalues of X0'X0 and the rotated coefficients.
    #[arg(long, conflicts_with = "data")]
    spectrum: Option<PathBuf>,
    /// CSV design; X0 is the rescaled support columns.
    #[arg(long, requires_all = ["response", "support", "beta", "sigma"])]
    data: Option<PathBuf>,
    #[arg(long)]
    response: Option<String>,
    #[arg(long, value_delimiter = ',')]
    support: Option<Vec<usize>>,
    /// True coefficients on the support, on the working column scale.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    beta: Option<Vec<f64>>,
    #[arg(long)]
    sigma: Option<f64>,
    /// Explicit nonnegative increasing ridge grid.
    #[arg(long, value_delimiter = ',')]
    grid: Option<Vec<f64>>,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Args, Debug)]
struct SparkArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long)]
    c: f64,
    #[arg(long)]
    tau: usize,
    /// Local search instead of exhaustive enumeration.
    #[arg(long)]
    heuristic: bool,
    #[arg(long, default_value_t = 10)]
    restarts: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Args, Debug)]
struct StudyArgs {
    /// JSON design file; missing fields take their defaults.
    #[arg(long)]
    design: Option<PathBuf>,
    #[arg(long)]
    reps: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    n_test: Option<usize>,
    /// Comma-separated methods among hard, l0, sica, lasso, oracle.
    #[arg(long, value_delimiter = ',', default_value = "lasso,hard,sica,oracle")]
    methods: Vec<Method>,
    #[command(flatten)]
    solver: SolverArgs,
    #[command(flatten)]
    out: OutArgs,
}

impl StudyArgs {
    fn design(&self) -> Result<SimDesign> {
        let mut d: SimDesign = match &self.design {
            Some(p) => serde_json::from_str(&fs::read_to_string(p)?)?,
            None => SimDesign::default(),
        };
        if let Some(r) = self.reps {
            d.reps = r;
        }
        if let Some(s) = self.seed {
            d.seed = s;
        }
        if let Some(t) = self.n_test {
            d.n_test = t;
        }
        Ok(d)
    }
}

#[derive(Args, Debug)]
struct SimArgs {
    #[command(flatten)]
    study: StudyArgs,
}

#[derive(Args, Debug)]
struct RefitStudyArgs {
    #[command(flatten)]
    study: StudyArgs,
    /// Ridge grid on the working column scale (default: 0 and 40 points
    /// around s sigma^2 / ||beta0||^2).
    #[arg(long, value_delimiter = ',')]
    lambda1_grid: Option<Vec<f64>>,
    /// test (per replication), pooled, or validation.
    #[arg(long, default_value = "test")]
    tuning: RefitTuning,
}

#[derive(Args, Debug)]
struct SplitArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long, default_value_t = 100)]
    splits: usize,
    #[arg(long, conflicts_with = "train_frac")]
    n_train: Option<usize>,
    #[arg(long)]
    train_frac: Option<f64>,
    #[arg(long, value_delimiter = ',', default_value = "lasso,hard,sica")]
    methods: Vec<PenaltyFamily>,
    /// Add squares of non-binary columns and all pairwise interactions.
    #[arg(long)]
    expand_quadratic: bool,
    /// Ridge grid for refitting the selected models, chosen on validation.
    #[arg(long, value_delimiter = ',')]
    lambda1_grid: Option<Vec<f64>>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    solver: SolverArgs,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Args, Debug)]
struct AuditArgs {
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    p: Option<usize>,
    #[arg(long)]
    s: Option<usize>,
    #[arg(long)]
    b0: Option<f64>,
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long)]
    rho: Option<f64>,
    /// Supplied robust spark bound.
    #[arg(long)]
    c: Option<f64>,
    #[arg(long)]
    c2: Option<f64>,
    #[arg(long)]
    c2_prime: Option<f64>,
    /// Audited lambda (default: geometric midpoint of the admissible window).
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    reps: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[command(flatten)]
    out: OutArgs,
}

/// Exit code for a library error.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        _ if e.is_numerical() => EXIT_NUMERICAL,
        Error::AtLambda { source, .. } | Error::InReplication { source, .. } => exit_code(source),
        Error::InvalidPenalty(_) | Error::InvalidArgument(_) | Error::BudgetExceeded { .. } => EXIT_USAGE,
        _ => EXIT_DATA,
    }
}

/// Runs the CLI on `args` (including the program name) and returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    if let Some(t) = cli.threads {
        if t == 0 {
            eprintln!("error: --threads must be at least 1");
            return EXIT_USAGE;
        }
        // a global pool can only be installed once per process
        let _ = rayon::ThreadPoolBuilder::new().num_threads(t).build_global();
    }
    let stage = stage_name(&cli.command);
    match dispatch(cli.command) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {stage}: {e}");
            exit_code(&e)
        }
    }
}

fn stage_name(c: &Command) -> &'static str {
    match c {
        Command::Fit(_) => "fit",
        Command::Path(_) => "path",
        Command::Refit(_) => "refit",
        Command::RiskCurve(_) => "risk-curve",
        Command::Spark(_) => "spark",
        Command::Simulate(_) => "simulate",
        Command::RefitStudy(_) => "refit-study",
        Command::SplitStudy(_) => "split-study",
        Command::Audit(_) => "audit",
    }
}

/// Writes `files` into the output directory, or the first of them to stdout
/// when no directory was given. The summary goes to stdout in the first case
/// and stderr in the second.
fn emit(out: &OutArgs, files: &[(&str, String)], summary: &str) -> Result<()> {
    match &out.out {
        Some(dir) => {
            fs::create_dir_all(dir)?;
            for (name, body) in files {
                fs::write(dir.join(name), body)?;
            }
            print!("{summary}");
            for (name, _) in files {
                println!("wrote {}", dir.join(name).display());
            }
        }
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(files[0].1.as_bytes())?;
            eprint!("{summary}");
        }
    }
    Ok(())
}

fn pretty(v: &Value) -> Result<String> {
    Ok(serde_json::to_string_pretty(v)? + "\n")
}

fn csv_string(f: impl FnOnce(&mut Vec<u8>) -> Result<()>) -> Result<String> {
    let mut buf = Vec::new();
    f(&mut buf)?;
    String::from_utf8(buf).map_err(|e| Error::InvalidArgument(e.to_string()))
}

fn dispatch(cmd: Command) -> Result<()> {
    match cmd {
        Command::Fit(a) => cmd_fit(a),
        Command::Path(a) => cmd_path(a),
        Command::Refit(a) => cmd_refit(a),
        Command::RiskCurve(a) => cmd_risk_curve(a),
        Command::Spark(a) => cmd_spark(a),
        Command::Simulate(a) => {
            let design = a.study.design()?;
            let cfg = a.study.solver.config();
            let report = run_study(&design, &a.study.methods, &cfg)?;
            emit_study(&a.study.out, &report)
        }
        Command::RefitStudy(a) => {
            let design = a.study.design()?;
            let cfg = a.study.solver.config();
            let grid = a.lambda1_grid.clone().unwrap_or_else(|| default_lambda1_grid(&design));
            let report = run_refit_study(&design, &a.study.methods, &cfg, &grid, a.tuning)?;
            emit_study(&a.study.out, &report)
        }
        Command::SplitStudy(a) => cmd_split(a),
        Command::Audit(a) => cmd_audit(a),
    }
}

fn response_column(s: &str) -> ResponseColumn {
    match s.parse() {
        Ok(r) => r,
        Err(never) => match never {},
    }
}

fn names_of(data: &RegressionData, support: &[usize]) -> Vec<String> {
    let names = data.column_names();
    support.iter().map(|&j| names[j].clone()).collect()
}

fn cmd_fit(a: FitArgs) -> Result<()> {
    let data = a.data.load()?;
    let cfg = a.solver.config();
    let fit = fit_at(&data, a.penalty, a.lambda, &DVector::zeros(data.p()), &cfg)?;
    let predictor = data.predictor(&fit.beta);
    let export = FitExport::new(&fit, &data, a.lambda);
    let v = json!({
        "settings": {
            "data": a.data.data, "response": a.data.response, "centered": !a.data.no_center,
            "penalty": a.penalty, "lambda": a.lambda, "shape_a": fit.penalty.shape_a, "solver": cfg,
        },
        "fit": export,
        "names": names_of(&data, &fit.support),
        "intercept": predictor.intercept,
        "support_cap_events": fit.support_cap_events,
    });
    let summary = format!(
        "{} fit at lambda = {}: {} nonzero coefficients, objective {:.6}, {} sweeps{}\n",
        a.penalty,
        a.lambda,
        fit.support.len(),
        fit.objective,
        fit.iterations,
        if fit.converged { "" } else { " (not converged)" }
    );
    emit(&a.out, &[("fit.json", pretty(&v)?)], &summary)
}

fn cmd_path(a: PathArgs) -> Result<()> {
    let data = a.data.load()?;
    let cfg = a.solver.config();
    let path = solve_path(&data, a.penalty, &cfg)?;
    if path.is_empty() {
        return Err(Error::EmptyPath);
    }
    let choice = match &a.val_data {
        Some(p) => {
            let val = RegressionData::from_csv_path(p, &response_column(&a.data.response))?;
            Some(select_by_validation(&path, &data, &val)?)
        }
        None => None,
    };
    let mut summary = format!(
        "{} path: {} fits from lambda = {:.6} to {:.6}{}\n",
        a.penalty,
        path.len(),
        path.entries[0].lambda,
        path.entries[path.len() - 1].lambda,
        path.truncated_at
            .map(|l| format!(", stopped at the support cap before lambda = {l:.6}"))
            .unwrap_or_default()
    );
    let selected = choice.as_ref().map(|c| {
        summary.push_str(&format!(
            "validation choice: lambda = {:.6}, {} predictors, error {:.6}\n",
            c.lambda,
            c.fit.support.len(),
            c.validation_error
        ));
        json!({
            "index": c.index, "lambda": c.lambda, "validation_error": c.validation_error,
            "validation_errors": c.errors, "names": names_of(&data, &c.fit.support),
            "intercept": c.predictor.intercept,
        })
    });
    let v = json!({
        "settings": {
            "data": a.data.data, "response": a.data.response, "centered": !a.data.no_center,
            "penalty": a.penalty, "solver": cfg, "val_data": a.val_data,
        },
        "path": path.to_export(&data),
        "selected": selected,
    });
    let table = csv_string(|buf| {
        let mut w = csv::Writer::from_writer(buf);
        w.write_record(["lambda", "size", "objective", "converged", "validation_error"])?;
        for (k, e) in path.entries.iter().enumerate() {
            let ve = choice.as_ref().map(|c| c.errors[k].to_string()).unwrap_or_default();
            w.write_record([
                e.lambda.to_string(),
                e.fit.support.len().to_string(),
                e.fit.objective.to_string(),
                e.fit.converged.to_string(),
                ve,
            ])?;
        }
        w.flush()?;
        Ok(())
    })?;
    emit(&a.out, &[("path.json", pretty(&v)?), ("path.csv", table)], &summary)
}

fn cmd_refit(a: RefitArgs) -> Result<()> {
    let data = a.data.load()?;
    let mut support = a.support.clone();
    support.sort_unstable();
    support.dedup();
    let r = ridge_refit(&data, &support, a.lambda1)?;
    let predictor = data.predictor(&r.beta_refitted);
    let v = json!({
        "settings": {
            "data": a.data.data, "response": a.data.response, "centered": !a.data.no_center,
            "support": support, "lambda1": a.lambda1,
        },
        "names": names_of(&data, &support),
        "coefficients": support.iter().map(|&j| predictor.coefficients[j]).collect::<Vec<_>>(),
        "working_coefficients": support.iter().map(|&j| r.beta_refitted[j]).collect::<Vec<_>>(),
        "intercept": predictor.intercept,
    });
    let summary = format!("ridge refit of {} columns at lambda1 = {}\n", support.len(), a.lambda1);
    emit(&a.out, &[("refit.json", pretty(&v)?)], &summary)
}

#[derive(serde::Deserialize)]
struct SpectrumFile {
    d: Vec<f64>,
    b: Vec<f64>,
    sigma: f64,
    n: usize,
}

fn cmd_risk_curve(a: RiskCurveArgs) -> Result<()> {
    let (model, n) = match (&a.spectrum, &a.data) {
        (Some(p), _) => {
            let s: SpectrumFile = serde_json::from_str(&fs::read_to_string(p)?)?;
            (SpectralModel::from_spectrum(s.d, s.b, s.sigma)?, s.n)
        }
        (None, Some(p)) => {
            let response = response_column(a.response.as_deref().unwrap_or_default());
            let data = RegressionData::from_csv_path(p, &response)?.rescale_columns()?;
            let support = a.support.clone().unwrap_or_default();
            if support.iter().any(|&j| j >= data.p()) {
                return Err(Error::Dimension("support index out of range".into()));
            }
            let beta = DVector::from_vec(a.beta.clone().unwrap_or_default());
            let model = SpectralModel::new(&data.columns(&support), &beta, a.sigma.unwrap_or(0.0))?;
            (model, data.n())
        }
        (None, None) => {
            return Err(Error::InvalidArgument("give either --spectrum or --data".into()));
        }
    };
    let grid = a.grid.clone().unwrap_or_else(|| default_risk_grid(&model));
    let curve = risk_curve(&model, &grid, n)?;
    let opt_l2 = optimal_ridge(&model, RiskTarget::L2)?;
    let opt_pred = optimal_ridge(&model, RiskTarget::Prediction)?;
    let v = json!({
        "settings": { "n": n, "sigma": model.sigma, "grid_points": grid.len() },
        "eigenvalues": model.d,
        "leading_order": model.leading_order(),
        "optimal_l2": opt_l2,
        "optimal_prediction": opt_pred,
        "bracket_l2": model.theoretical_bracket(RiskTarget::L2),
        "bracket_prediction": model.theoretical_bracket(RiskTarget::Prediction),
        "argmin_l2_on_grid": curve.argmin_l2,
        "argmin_prediction_on_grid": curve.argmin_pred,
    });
    let table = csv_string(|buf| curve.write_csv(buf))?;
    let summary = format!(
        "optimal ridge parameter: {opt_l2:.6} (L2 risk), {opt_pred:.6} (prediction risk)\n"
    );
    emit(&a.out, &[("risk_curve.csv", table), ("risk_curve.json", pretty(&v)?)], &summary)
}

fn cmd_spark(a: SparkArgs) -> Result<()> {
    let data = a.data.load_raw()?.rescale_columns()?;
    let cert = if a.heuristic {
        robust_spark_heuristic(&data, a.c, a.tau, a.restarts, a.seed)?
    } else {
        robust_spark_exact(&data, a.c, a.tau)?
    };
    let v = json!({
        "settings": { "data": a.data.data, "c": a.c, "tau": a.tau, "heuristic": a.heuristic,
                      "restarts": a.restarts, "seed": a.seed },
        "certificate": cert,
    });
    let verdict = match (cert.exhaustive, cert.is_lower_bound_valid) {
        (true, true) => format!("certified: rspark_c > {}", cert.tau_checked),
        (true, false) => format!("not certified: rspark_c <= {}", cert.tau_checked),
        (false, _) => "heuristic search: upper bound on the minimum only".to_string(),
    };
    let summary = format!(
        "smallest singular value over {}-column subsets: {:.6} at {:?}; {verdict}\n",
        cert.tau_checked, cert.min_singular_found, cert.witness_subset
    );
    emit(&a.out, &[("spark.json", pretty(&v)?)], &summary)
}

fn emit_study(out: &OutArgs, report: &SimReport) -> Result<()> {
    let rows = csv_string(|buf| report.write_rows_csv(buf))?;
    let mut files = vec![("summary.json", pretty(&report.summary_json())?), ("rows.csv", rows)];
    if report.refit.is_some() {
        files.push(("curves.csv", csv_string(|buf| report.write_curves_csv(buf))?));
    }
    emit(out, &files, &report.table())
}

fn cmd_split(a: SplitArgs) -> Result<()> {
    let mut data = a.data.load_raw()?;
    if a.expand_quadratic {
        data = quadratic_expansion(&data)?;
    }
    let mut split_cfg = match (a.n_train, a.train_frac) {
        (Some(n_train), _) => SplitConfig {
            splits: a.splits,
            n_train,
            seed: a.seed,
            lambda1_grid: Vec::new(),
        },
        (None, frac) => SplitConfig::from_fraction(data.n(), frac.unwrap_or(0.9), a.splits, a.seed)?,
    };
    split_cfg.lambda1_grid = a.lambda1_grid.clone().unwrap_or_default();
    let cfg = a.solver.config();
    let report = random_split_study(&data, &a.methods, &cfg, &split_cfg)?;
    let mut summary = format!("{} splits, {} training / {} validation rows\n", split_cfg.splits, split_cfg.n_train, report.n_val);
    for s in &report.summaries {
        summary.push_str(&format!(
            "{:<6} PE {:.4} ({:.4}), median size {}{}\n",
            s.method,
            s.pe.mean,
            s.pe.sd,
            s.median_size,
            s.refit_pe
                .map(|r| format!(", refitted PE {:.4} ({:.4})", r.mean, r.sd))
                .unwrap_or_default()
        ));
    }
    let v = json!({
        "settings": { "data": a.data.data, "response": a.data.response,
                      "expand_quadratic": a.expand_quadratic, "p": data.p() },
        "config": report.config,
        "path_config": report.path_config,
        "n_val": report.n_val,
        "summaries": report.summaries,
    });
    let records = csv_string(|buf| report.write_records_csv(buf))?;
    emit(&a.out, &[("summary.json", pretty(&v)?), ("splits.csv", records)], &summary)
}

fn cmd_audit(a: AuditArgs) -> Result<()> {
    let d0 = AuditDesign::default();
    let design = AuditDesign {
        n: a.n.unwrap_or(d0.n),
        p: a.p.unwrap_or(d0.p),
        s: a.s.unwrap_or(d0.s),
        b0: a.b0.unwrap_or(d0.b0),
        sigma: a.sigma.unwrap_or(d0.sigma),
        corr_rho: a.rho.unwrap_or(d0.corr_rho),
        c: a.c.unwrap_or(d0.c),
        c2: a.c2,
        c2_prime: a.c2_prime,
        lambda: a.lambda,
        reps: a.reps.unwrap_or(d0.reps),
        seed: a.seed.unwrap_or(d0.seed),
        ..d0
    };
    let study = run_audit_study(&design, &PathConfig::default())?;
    let mut summary = format!(
        "lambda = {:.6} in window ({:.6}, {:.6}); all bounds hold in {:.1}% of {} replications\n",
        study.lambda,
        study.lambda_window.0,
        study.lambda_window.1,
        100.0 * study.all_bounds_rate,
        study.reps
    );
    for c in &study.check_rates {
        summary.push_str(&format!("  {:<18} {:.3}\n", c.name, c.holds_fraction));
    }
    let v = serde_json::to_value(&study)?;
    emit(&a.out, &[("audit.json", pretty(&v)?)], &summary)
}
