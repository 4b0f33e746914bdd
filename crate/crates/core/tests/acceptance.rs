//! Acceptance criteria 1-11. Run with `cargo test --test acceptance`.
//!
//! Every criterion prints one PASS/FAIL line; the process fails if any does.

use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use threshreg::diagnostics::{
    event_frequency, robust_spark_exact, robust_spark_heuristic, run_audit_study, AuditDesign,
    OracleBoundParams,
};
use threshreg::refit::{default_risk_grid, optimal_ridge, ridge_refit, risk_curve, RiskTarget, SpectralModel};
use threshreg::rng::ErrorFamily;
use threshreg::sim::{generate_dataset, run_refit_study, default_lambda1_grid, Method, SimDesign, SimReport};
use threshreg::solver::ica_fit_observed;
use threshreg::{ica_fit, objective, univariate_minimize, PathConfig, PenaltyFamily, PenaltySpec, RegressionData};

struct Outcome {
    pass: bool,
    detail: String,
}

/// Id, runtime budget in seconds, check.
type Criterion = (usize, f64, fn() -> Outcome);

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}

fn gaussian_matrix(rng: &mut ChaCha8Rng, n: usize, p: usize) -> DMatrix<f64> {
    DMatrix::from_fn(n, p, |_, _| gaussian(rng))
}

fn ols(x: &DMatrix<f64>, y: &DVector<f64>) -> DVector<f64> {
    x.clone().svd(true, true).solve(y, 1e-14).unwrap()
}

// Penalty written out independently of the library.
fn pen(family: PenaltyFamily, lambda: f64, a: f64, t: f64) -> f64 {
    let t = t.abs();
    match family {
        PenaltyFamily::Hard => 0.5 * (lambda * lambda - (lambda - t).max(0.0).powi(2)),
        PenaltyFamily::L0 => {
            if t != 0.0 {
                0.5 * lambda * lambda
            } else {
                0.0
            }
        }
        PenaltyFamily::Sica => lambda * (a + 1.0) * t / (a + t),
        PenaltyFamily::Lasso => lambda * t,
    }
}

fn q_value(x: &DMatrix<f64>, y: &DVector<f64>, beta: &DVector<f64>, family: PenaltyFamily, lambda: f64) -> f64 {
    let n = x.nrows() as f64;
    (y - x * beta).norm_squared() / (2.0 * n) + beta.iter().map(|b| pen(family, lambda, 0.0, *b)).sum::<f64>()
}

/// Grid minimizer of `(z - t)^2 / 2 + p(t)`: a 1e-3 scan of the segment
/// between 0 and z, then a 1e-6 scan around each coarse local minimum.
fn grid_minimize(z: f64, family: PenaltyFamily, lambda: f64, a: f64) -> f64 {
    let obj = |t: f64| 0.5 * (z - t) * (z - t) + pen(family, lambda, a, t);
    let (lo, hi) = (z.min(0.0), z.max(0.0));
    let coarse = 1e-3;
    let m = ((hi - lo) / coarse).ceil() as usize;
    let pts: Vec<f64> = (0..=m).map(|k| (lo + k as f64 * coarse).min(hi)).collect();
    let vals: Vec<f64> = pts.iter().map(|&t| obj(t)).collect();
    let mut best = (obj(0.0), 0.0);
    for k in 0..pts.len() {
        let left = if k > 0 { vals[k - 1] } else { f64::INFINITY };
        let right = if k + 1 < pts.len() { vals[k + 1] } else { f64::INFINITY };
        if vals[k] <= left && vals[k] <= right {
            let fine = 1e-6;
            let start = (pts[k] - 2.0 * coarse).max(lo);
            let end = (pts[k] + 2.0 * coarse).min(hi);
            let steps = ((end - start) / fine).round() as usize;
            for i in 0..=steps {
                let t = start + i as f64 * fine;
                let v = obj(t);
                if v < best.0 {
                    best = (v, t);
                }
            }
        }
    }
    best.1
}

fn criterion_1() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let families = [PenaltyFamily::Hard, PenaltyFamily::L0, PenaltyFamily::Sica, PenaltyFamily::Lasso];
    let mut worst: f64 = 0.0;
    let mut failures = 0;
    for k in 0..1000 {
        let family = families[k % 4];
        let z = rng.random_range(-4.0..4.0);
        let lambda = rng.random_range(0.05..2.0);
        let a = 10f64.powf(rng.random_range(-2.0..0.5));
        let spec = if family == PenaltyFamily::Sica {
            PenaltySpec::sica(lambda, a)
        } else {
            PenaltySpec::new(family, lambda)
        };
        let got = univariate_minimize(z, &spec).unwrap().value;
        let want = grid_minimize(z, family, lambda, a);
        let err = (got - want).abs();
        worst = worst.max(err);
        if err > 1e-5 {
            failures += 1;
        }
    }
    outcome(failures == 0, format!("1000 tuples, {failures} mismatches, max |diff| {worst:.2e} (tol 1e-5)"))
}

fn criterion_2() -> Outcome {
    let mut worst: f64 = 0.0;
    for inst in 0..50u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(200 + inst);
        let n = rng.random_range(4..=64);
        let q = gaussian_matrix(&mut rng, n, n).qr().q();
        let x = q * (n as f64).sqrt();
        let beta0 = DVector::from_fn(n, |j, _| if j % 3 == 0 { 1.5 * (j as f64 % 2.0 - 0.5) } else { 0.0 });
        let y = &x * &beta0 + DVector::from_fn(n, |_, _| 0.5 * gaussian(&mut rng));
        let lambda = rng.random_range(0.1..1.0);
        let data = RegressionData::new(x.clone(), y.clone()).unwrap();
        // with n = p the default cap of n/2 could bind
        let cfg = PathConfig { max_support: Some(n), ..PathConfig::default() };
        let fit = ica_fit(&data, &PenaltySpec::new(PenaltyFamily::Hard, lambda), &DVector::zeros(n), &cfg).unwrap();
        let z = x.tr_mul(&y) / n as f64;
        for j in 0..n {
            let want = if z[j].abs() > lambda { z[j] } else { 0.0 };
            worst = worst.max((fit.beta[j] - want).abs());
        }
    }
    outcome(worst <= 1e-10, format!("50 orthonormal designs, max |diff| {worst:.2e} (tol 1e-10)"))
}

fn exhaustive_minimum(x: &DMatrix<f64>, y: &DVector<f64>, lambda: f64) -> f64 {
    let p = x.ncols();
    let mut best = y.norm_squared() / (2.0 * x.nrows() as f64);
    for mask in 1u32..(1 << p) {
        let cols: Vec<usize> = (0..p).filter(|j| mask & (1 << j) != 0).collect();
        let coef = ols(&x.select_columns(&cols), y);
        let mut beta = DVector::zeros(p);
        for (k, &j) in cols.iter().enumerate() {
            beta[j] = coef[k];
        }
        best = best.min(q_value(x, y, &beta, PenaltyFamily::Hard, lambda));
    }
    best
}

fn criterion_3() -> Outcome {
    let cfg = PathConfig::default();
    let (n, p) = (20, 8);
    let (mut agree, mut below) = (0, 0);
    let mut worst_below: f64 = 0.0;
    for inst in 0..25u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(300 + inst);
        let raw = gaussian_matrix(&mut rng, n, p);
        let mut beta0 = DVector::zeros(p);
        for j in [1, 4, 6] {
            beta0[j] = rng.random_range(0.6..1.5) * if rng.random_bool(0.5) { 1.0 } else { -1.0 };
        }
        let y = &raw * &beta0 + DVector::from_fn(n, |_, _| 0.5 * gaussian(&mut rng));
        let data = RegressionData::new(raw, y.clone()).unwrap().rescale_columns().unwrap();
        let lambda = rng.random_range(0.2..0.6);
        let fit = ica_fit(&data, &PenaltySpec::new(PenaltyFamily::Hard, lambda), &DVector::zeros(p), &cfg).unwrap();
        let q_fit = q_value(data.x(), &y, &fit.beta, PenaltyFamily::Hard, lambda);
        let q_min = exhaustive_minimum(data.x(), &y, lambda);
        if (q_fit - q_min).abs() <= 1e-8 {
            agree += 1;
        }
        if q_fit < q_min - 1e-8 {
            below += 1;
            worst_below = worst_below.max(q_min - q_fit);
        }
    }
    outcome(
        agree as f64 >= 0.8 * 25.0 && below == 0,
        format!("{agree}/25 at the exhaustive minimum (need 20), {below} below it"),
    )
}

fn criterion_4() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let s = rng.random_range(1..=20);
        let sigma = rng.random_range(0.05..2.0);
        let d = rng.random_range(1.0..500.0);
        let b: Vec<f64> = (0..s).map(|_| rng.random_range(-2.0..2.0)).collect();
        let norm2: f64 = b.iter().map(|v| v * v).sum();
        let want = s as f64 * sigma * sigma / norm2;
        let model = SpectralModel::from_spectrum(vec![d; s], b, sigma).unwrap();
        for target in [RiskTarget::L2, RiskTarget::Prediction] {
            let got = optimal_ridge(&model, target).unwrap();
            worst = worst.max((got - want).abs() / want);
        }
    }
    outcome(worst <= 1e-8, format!("100 models, max relative error {worst:.2e} (tol 1e-8)"))
}

fn unequal_models() -> Vec<(SpectralModel, usize)> {
    (0..20u64)
        .map(|k| {
            let mut rng = ChaCha8Rng::seed_from_u64(500 + k);
            let n = 100;
            let s = rng.random_range(2..=8);
            let rho: f64 = rng.random_range(0.2..0.8);
            let z = gaussian_matrix(&mut rng, n, s);
            let mut x = z.clone();
            for j in 1..s {
                let prev = x.column(j - 1).clone_owned();
                x.set_column(j, &(prev * rho + z.column(j) * (1.0 - rho * rho).sqrt()));
            }
            let beta = DVector::from_fn(s, |_, _| rng.random_range(0.2..1.5));
            let sigma = rng.random_range(0.3..1.5);
            (SpectralModel::new(&x, &beta, sigma).unwrap(), n)
        })
        .collect()
}

fn criterion_5() -> Outcome {
    let mut ok = 0;
    for (model, n) in unequal_models() {
        let grid = default_risk_grid(&model);
        let curve = risk_curve(&model, &grid, n).unwrap();
        let interior = |v: &[f64]| {
            let (k, m) = v.iter().enumerate().fold((0, f64::INFINITY), |b, (i, &x)| if x < b.1 { (i, x) } else { b });
            k > 0 && k + 1 < v.len() && m < v[0] && m < v[v.len() - 1]
        };
        if interior(&curve.l2_risk) && interior(&curve.pred_risk) {
            ok += 1;
        }
    }
    outcome(ok == 20, format!("{ok}/20 models with interior minima of both risks"))
}

fn criterion_6() -> Outcome {
    let mut ok = 0;
    let mut detail = String::new();
    for (model, _) in unequal_models() {
        let d = &model.d;
        let (dmax, dmin) = (d[0], d[d.len() - 1]);
        let norm2: f64 = model.b.iter().map(|v| v * v).sum();
        let lead = d.len() as f64 * model.sigma * model.sigma / norm2;
        let r = dmax / dmin;
        let l2 = optimal_ridge(&model, RiskTarget::L2).unwrap();
        let pr = optimal_ridge(&model, RiskTarget::Prediction).unwrap();
        let in_l2 = l2 >= lead / (r * r) / 1.5 && l2 <= 1.5 * lead * r * r;
        let in_pr = pr >= lead / r / 1.5 && pr <= 1.5 * lead * r;
        if in_l2 && in_pr {
            ok += 1;
        } else if detail.is_empty() {
            detail = format!("; first miss: lead {lead:.4}, ratio {r:.3}, opt {l2:.4} / {pr:.4}");
        }
    }
    outcome(ok == 20, format!("{ok}/20 optima inside their brackets{detail}"))
}

fn table_study() -> SimReport {
    let design = SimDesign {
        reps: 50,
        seed: 42,
        ..SimDesign::default()
    };
    let grid = default_lambda1_grid(&design);
    run_refit_study(
        &design,
        &[Method::Hard, Method::Lasso, Method::Oracle],
        &PathConfig::default(),
        &grid,
        Default::default(),
    )
    .unwrap()
}

fn criterion_7(report: &SimReport) -> Outcome {
    let hard = report.aggregate("Hard").unwrap();
    let lasso = report.aggregate("Lasso").unwrap();
    let half = 3.0 * (0.0086 / 50f64.sqrt() + 0.002);
    let pe_ok = (hard.pe.mean - 0.1862).abs() <= half;
    let pass = pe_ok && hard.fp.mean <= 0.5 && hard.fn_strong.mean == 0.0 && lasso.fp.mean >= 20.0;
    outcome(
        pass,
        format!(
            "Hard PE {:.4} in [{:.4}, {:.4}], Hard FP {:.2} (<= 0.5), Hard FN-strong {:.2} (= 0), Lasso FP {:.2} (>= 20)",
            hard.pe.mean,
            0.1862 - half,
            0.1862 + half,
            hard.fp.mean,
            hard.fn_strong.mean,
            lasso.fp.mean
        ),
    )
}

fn criterion_8(report: &SimReport) -> Outcome {
    let paired = |base: &str, refit: &str, metric: fn(&threshreg::sim::MetricRow) -> f64| {
        let a: Vec<f64> = report.rows_for(base).map(metric).collect();
        let b: Vec<f64> = report.rows_for(refit).map(metric).collect();
        assert_eq!(a.len(), b.len());
        let wins = a.iter().zip(&b).filter(|(x, y)| **y <= **x * (1.0 + 1e-12)).count();
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        (mean(&a), mean(&b), wins as f64 / a.len() as f64)
    };
    let (hard, hard_l2, f1) = paired("Hard", "Hard-L2", |r| r.pe);
    let (orc, orc_l2, f2) = paired("Oracle", "Oracle-L2", |r| r.l2_loss);
    let pass = hard_l2 <= hard && orc_l2 <= orc && f1 >= 0.8 && f2 >= 0.8;
    outcome(
        pass,
        format!(
            "Hard-L2 PE {hard_l2:.4} <= Hard PE {hard:.4} in {:.0}% of reps; Oracle-L2 L2 {orc_l2:.4} <= Oracle L2 {orc:.4} in {:.0}%",
            100.0 * f1,
            100.0 * f2
        ),
    )
}

fn criterion_9() -> Outcome {
    let design = SimDesign {
        n_test: 1,
        n_val: 1,
        ..SimDesign::default()
    };
    let ds = generate_dataset(&design, 0).unwrap();
    let (n, p, sigma) = (100, 1000, 0.4);
    let params = OracleBoundParams::minimal(0.5, 0.05, 12, sigma, n, p).unwrap();
    let ev = event_frequency(&ds.train, &ds.truth.model, &params, ErrorFamily::Gaussian, 1000, 9).unwrap();
    // bound written out directly
    let pt = 1000f64;
    let c2 = 10f64.sqrt() * sigma;
    let bound = 1.0
        - (2.0 / std::f64::consts::PI).sqrt() / c2 * sigma / pt.ln().sqrt() * pt.powf(1.0 - c2 * c2 / (2.0 * sigma * sigma));
    let pass = ev.freq_e >= bound && (ev.bound_e - bound).abs() < 1e-15;
    outcome(pass, format!("P(E) = {:.4} over 1000 draws, bound {bound:.12}", ev.freq_e))
}

fn criterion_10() -> Outcome {
    let study = run_audit_study(&AuditDesign::default(), &PathConfig::default()).unwrap();
    let rate = study.all_bounds_rate;
    outcome(
        rate >= 0.95 && study.reps == 200,
        format!(
            "support recovery and all loss bounds in {:.1}% of {} reps at lambda {:.4} (window {:.4}, {:.4})",
            100.0 * rate,
            study.reps,
            study.lambda,
            study.lambda_window.0,
            study.lambda_window.1
        ),
    )
}

fn small_study(threads: usize) -> String {
    let design = SimDesign {
        p: 200,
        reps: 4,
        n_test: 500,
        seed: 11,
        ..SimDesign::default()
    };
    let grid = default_lambda1_grid(&design);
    let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
    pool.install(|| {
        let report = run_refit_study(
            &design,
            &[Method::Hard, Method::Sica, Method::Lasso, Method::Oracle],
            &PathConfig::default(),
            &grid,
            Default::default(),
        )
        .unwrap();
        let audit = run_audit_study(&AuditDesign { reps: 8, ..AuditDesign::default() }, &PathConfig::default()).unwrap();
        let data = generate_dataset(&design, 0).unwrap().train;
        let spark = robust_spark_heuristic(&data, 0.1, 3, 5, 1).unwrap();
        let mut buf = Vec::new();
        report.write_rows_csv(&mut buf).unwrap();
        report.write_curves_csv(&mut buf).unwrap();
        format!(
            "{}{}{}{}",
            String::from_utf8(buf).unwrap(),
            report.summary_json(),
            serde_json::to_string(&audit).unwrap(),
            serde_json::to_string(&spark).unwrap()
        )
    })
}

fn criterion_11() -> Outcome {
    let mut notes = Vec::new();
    let mut pass = true;

    // determinism across thread counts
    let one = small_study(1);
    let det = one == small_study(4) && one == small_study(2);
    pass &= det;
    notes.push(format!("determinism {}", if det { "ok" } else { "FAILED" }));

    // objective never increases along coordinate updates
    let cfg = PathConfig::default();
    let mut worst_rise: f64 = 0.0;
    for k in 0..40u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(1100 + k);
        let (n, p) = (30, 60);
        let raw = gaussian_matrix(&mut rng, n, p);
        let y = raw.column(0) * 1.2 - raw.column(5) * 0.8 + DVector::from_fn(n, |_, _| 0.3 * gaussian(&mut rng));
        let data = RegressionData::new(raw, y).unwrap().rescale_columns().unwrap();
        let family = [PenaltyFamily::Hard, PenaltyFamily::L0, PenaltyFamily::Sica, PenaltyFamily::Lasso][k as usize % 4];
        let lambda = rng.random_range(0.05..0.5);
        let spec = if family == PenaltyFamily::Sica {
            PenaltySpec::sica(lambda, 0.1)
        } else {
            PenaltySpec::new(family, lambda)
        };
        let init = DVector::from_fn(p, |_, _| 0.2 * gaussian(&mut rng));
        let mut beta = init.clone();
        let mut last = objective(&data, &beta, &spec).unwrap();
        ica_fit_observed(&data, &spec, &init, &cfg, &mut |u| {
            if u.accepted {
                beta[u.coordinate] = u.new;
                let q = objective(&data, &beta, &spec).unwrap();
                worst_rise = worst_rise.max((q - last) / last.abs().max(1.0));
                last = q;
            }
        })
        .unwrap();
    }
    let mono = worst_rise <= 1e-12;
    pass &= mono;
    notes.push(format!("Q-monotone (max rise {worst_rise:.1e})"));

    // on-support OLS identity for Hard fits and for the unpenalized refit
    let mut worst_ols: f64 = 0.0;
    for k in 0..20u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(1200 + k);
        let (n, p) = (50, 40);
        let raw = gaussian_matrix(&mut rng, n, p);
        let y = raw.column(2) * 1.0 - raw.column(7) * 1.0 + raw.column(9) * 0.8
            + DVector::from_fn(n, |_, _| 0.3 * gaussian(&mut rng));
        let data = RegressionData::new(raw, y.clone()).unwrap().rescale_columns().unwrap();
        let fit = ica_fit(&data, &PenaltySpec::new(PenaltyFamily::Hard, 0.3), &DVector::zeros(p), &cfg).unwrap();
        let x0 = data.x().select_columns(&fit.support);
        let want = ols(&x0, &y);
        let refit = ridge_refit(&data, &fit.support, 0.0).unwrap();
        for (i, &j) in fit.support.iter().enumerate() {
            worst_ols = worst_ols.max((fit.beta[j] - want[i]).abs()).max((refit.beta_refitted[j] - want[i]).abs());
        }
    }
    let ols_ok = worst_ols <= 1e-6;
    pass &= ols_ok;
    notes.push(format!("on-support OLS (max diff {worst_ols:.1e})"));

    // analytic derivatives against central differences
    let mut worst_fd: f64 = 0.0;
    for (model, _) in unequal_models() {
        for &l in &[0.01, 0.3, 1.0, 5.0, 40.0] {
            let h = 1e-5 * l;
            let fd_f = (model.l2_risk(l + h) - model.l2_risk(l - h)) / (2.0 * h);
            let fd_g = (model.prediction_risk_total(l + h) - model.prediction_risk_total(l - h)) / (2.0 * h);
            // errors relative to the sum of absolute summands, which stays
            // meaningful where the derivative crosses zero
            let scale = |power: i32| -> f64 {
                model.d.iter().zip(&model.b)
                    .map(|(&d, &b)| (2.0 * d.powi(power) * (l * b * b - model.sigma.powi(2))).abs() / (d + l).powi(3))
                    .sum()
            };
            worst_fd = worst_fd
                .max((model.l2_risk_derivative(l) - fd_f).abs() / scale(1))
                .max((model.prediction_risk_derivative(l) - fd_g).abs() / scale(2));
        }
    }
    let fd_ok = worst_fd <= 1e-5;
    pass &= fd_ok;
    notes.push(format!("f'/g' vs differences (max rel {worst_fd:.1e})"));

    // exhaustive and heuristic spark searches agree on small designs
    let mut spark_ok = 0;
    for k in 0..10u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(1300 + k);
        let (n, p) = (30, 10);
        let mut raw = gaussian_matrix(&mut rng, n, p);
        let mix = raw.column(0) * 0.9 + raw.column(1) * 0.4;
        raw.set_column(3, &mix);
        let data = RegressionData::new(raw, DVector::zeros(n)).unwrap().rescale_columns().unwrap();
        let tau = 2 + (k as usize % 3);
        let exact = robust_spark_exact(&data, 0.3, tau).unwrap();
        let heur = robust_spark_heuristic(&data, 0.3, tau, 20, k).unwrap();
        if (exact.min_singular_found - heur.min_singular_found).abs() <= 1e-10 {
            spark_ok += 1;
        }
    }
    pass &= spark_ok == 10;
    notes.push(format!("spark exact = heuristic {spark_ok}/10"));

    outcome(pass, notes.join(", "))
}

fn main() {
    // run only when selected by name or when no filter is given
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    if !filter.is_empty() && !filter.iter().any(|f| "acceptance".contains(f.as_str()) || f.starts_with("criterion")) {
        return;
    }
    let mut failed = Vec::new();
    let criteria: [Criterion; 6] = [
        (1, 10.0, criterion_1),
        (2, 5.0, criterion_2),
        (3, 30.0, criterion_3),
        (4, 1.0, criterion_4),
        (5, 1.0, criterion_5),
        (6, 1.0, criterion_6),
    ];
    let mut run = |id: usize, budget: f64, f: &mut dyn FnMut() -> Outcome| {
        let start = Instant::now();
        let o = f();
        let secs = start.elapsed().as_secs_f64();
        let label = if o.pass { "PASS" } else { "FAIL" };
        println!("criterion {id:>2}: {label}  {}  [{secs:.1} s, budget {budget} s]", o.detail);
        if !o.pass {
            failed.push(id);
        }
    };
    for (id, budget, f) in criteria {
        run(id, budget, &mut { f });
    }
    let start = Instant::now();
    let study = table_study();
    println!("(criteria 7-8 share one 50-replication study: {:.1} s)", start.elapsed().as_secs_f64());
    run(7, 1200.0, &mut || criterion_7(&study));
    run(8, 1200.0, &mut || criterion_8(&study));
    run(9, 60.0, &mut criterion_9);
    run(10, 300.0, &mut criterion_10);
    run(11, 120.0, &mut criterion_11);
    if failed.is_empty() {
        println!("acceptance: all 11 criteria passed");
    } else {
        println!("acceptance: failed criteria {failed:?}");
        std::process::exit(1);
    }
}
