//! Penalty functions and their closed-form univariate thresholding rules.
//!
//! Each family `p_lambda(t)` is defined for `t >= 0`. The univariate rule
//! returns the global minimizer of `0.5 (z - b)^2 + p_lambda(|b|)` over `b`,
//! which is exactly the coordinate update used by the path solver once the
//! design columns have norm `sqrt(n)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_SICA_SHAPE: f64 = 1e-2;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PenaltyFamily {
    /// `0.5 [lambda^2 - (lambda - t)_+^2]`
    Hard,
    /// `0.5 lambda^2 1{t != 0}`
    L0,
    /// `lambda (a + 1) t / (a + t)`
    Sica,
    /// `lambda t`
    Lasso,
}

impl PenaltyFamily {
    pub fn label(self) -> &'static str {
        match self {
            PenaltyFamily::Hard => "Hard",
            PenaltyFamily::L0 => "L0",
            PenaltyFamily::Sica => "SICA",
            PenaltyFamily::Lasso => "Lasso",
        }
    }
}

impl std::str::FromStr for PenaltyFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "hard" => Ok(PenaltyFamily::Hard),
            "l0" => Ok(PenaltyFamily::L0),
            "sica" => Ok(PenaltyFamily::Sica),
            "lasso" | "l1" => Ok(PenaltyFamily::Lasso),
            other => Err(Error::InvalidPenalty(format!("unknown penalty family '{other}'"))),
        }
    }
}

impl std::fmt::Display for PenaltyFamily {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PenaltySpec {
    pub family: PenaltyFamily,
    pub lambda: f64,
    /// SICA shape parameter `a`; ignored by the other families.
    pub shape_a: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThresholdResult {
    pub value: f64,
    /// Output is zero while the input was not.
    pub was_thresholded: bool,
}

impl PenaltySpec {
    pub fn new(family: PenaltyFamily, lambda: f64) -> Self {
        Self {
            family,
            lambda,
            shape_a: DEFAULT_SICA_SHAPE,
        }
    }

    pub fn sica(lambda: f64, shape_a: f64) -> Self {
        Self {
            family: PenaltyFamily::Sica,
            lambda,
            shape_a,
        }
    }

    pub fn with_lambda(self, lambda: f64) -> Self {
        Self { lambda, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::InvalidPenalty(format!(
                "lambda must be a finite nonnegative number, got {}",
                self.lambda
            )));
        }
        if self.family == PenaltyFamily::Sica && !(self.shape_a > 0.0 && self.shape_a.is_finite()) {
            return Err(Error::InvalidPenalty(format!(
                "SICA shape parameter must be positive, got {}",
                self.shape_a
            )));
        }
        Ok(())
    }

    /// Penalty at `t >= 0` without validation.
    #[inline]
    pub(crate) fn value_unchecked(&self, t: f64) -> f64 {
        let l = self.lambda;
        match self.family {
            PenaltyFamily::Hard => {
                let gap = (l - t).max(0.0);
                0.5 * (l * l - gap * gap)
            }
            PenaltyFamily::L0 => {
                if t != 0.0 {
                    0.5 * l * l
                } else {
                    0.0
                }
            }
            PenaltyFamily::Sica => {
                let a = self.shape_a;
                l * (a + 1.0) * t / (a + t)
            }
            PenaltyFamily::Lasso => l * t,
        }
    }

    /// Right derivative `p'_lambda(t)` for `t >= 0`.
    pub fn derivative(&self, t: f64) -> f64 {
        let l = self.lambda;
        match self.family {
            PenaltyFamily::Hard => (l - t).max(0.0),
            // flat away from the jump at zero
            PenaltyFamily::L0 => 0.0,
            PenaltyFamily::Sica => {
                let a = self.shape_a;
                l * a * (a + 1.0) / ((a + t) * (a + t))
            }
            PenaltyFamily::Lasso => l,
        }
    }

    /// Global minimizer of `0.5 (z - b)^2 + p(|b|)`, assuming a valid spec.
    #[inline]
    pub(crate) fn threshold(&self, z: f64) -> f64 {
        let l = self.lambda;
        match self.family {
            // ties at |z| = lambda go to zero
            PenaltyFamily::Hard | PenaltyFamily::L0 => {
                if z.abs() > l {
                    z
                } else {
                    0.0
                }
            }
            PenaltyFamily::Lasso => z.signum() * (z.abs() - l).max(0.0),
            PenaltyFamily::Sica => sica_threshold(z, l, self.shape_a),
        }
    }
}

/// Penalty value at `t`.
pub fn penalty_value(pen: &PenaltySpec, t: f64) -> Result<f64> {
    pen.validate()?;
    if !(t >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "penalty argument must be nonnegative, got {t}"
        )));
    }
    Ok(pen.value_unchecked(t))
}

pub fn univariate_minimize(z: f64, pen: &PenaltySpec) -> Result<ThresholdResult> {
    pen.validate()?;
    if !z.is_finite() {
        return Err(Error::NonFinite(format!("univariate input z = {z}")));
    }
    let value = pen.threshold(z);
    Ok(ThresholdResult {
        value,
        was_thresholded: value == 0.0 && z != 0.0,
    })
}

/// Largest difference quotient `-(p'(t2) - p'(t1)) / (t2 - t1)` over grid pairs.
///
/// Any pair's quotient is a gap-weighted average of the quotients of the
/// adjacent pairs between them, so scanning adjacent pairs suffices.
pub fn max_concavity(pen: &PenaltySpec, grid: &[f64]) -> Result<f64> {
    pen.validate()?;
    if grid.len() < 2 {
        return Err(Error::InvalidArgument(
            "concavity grid needs at least two points".into(),
        ));
    }
    if grid.iter().any(|&t| !(t > 0.0) || !t.is_finite()) {
        return Err(Error::InvalidArgument("concavity grid must be positive".into()));
    }
    if grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidArgument(
            "concavity grid must be strictly increasing".into(),
        ));
    }
    let kappa = grid
        .windows(2)
        .map(|w| -(pen.derivative(w[1]) - pen.derivative(w[0])) / (w[1] - w[0]))
        .fold(0.0_f64, f64::max);
    Ok(kappa)
}

/// Univariate SICA objective `0.5 (z - b)^2 + lambda (a+1)|b| / (a + |b|)`.
fn sica_objective(z: f64, b: f64, lambda: f64, a: f64) -> f64 {
    let t = b.abs();
    0.5 * (z - b) * (z - b) + lambda * (a + 1.0) * t / (a + t)
}

/// SICA thresholding rule.
///
/// For `z > 0` the minimizer is `0` or a stationary point `b > 0` of
/// `(b - z)(a + b)^2 + lambda a (a + 1) = 0`. With `u = a + b` this is the
/// cubic `u^3 - (a + z) u^2 + lambda a (a + 1) = 0`, solved in closed form
/// and polished by Newton steps; the candidate with the lowest objective wins
/// and ties go to zero.
fn sica_threshold(z: f64, lambda: f64, a: f64) -> f64 {
    if z == 0.0 || lambda == 0.0 {
        return z;
    }
    let sign = z.signum();
    let za = z.abs();
    let c2 = -(a + za);
    let c0 = lambda * a * (a + 1.0);

    let mut best = 0.0;
    let mut best_val = sica_objective(za, 0.0, lambda, a);
    for u in cubic_real_roots(c2, 0.0, c0) {
        let u = polish_root(u, c2, c0);
        let b = u - a;
        if b > 0.0 && b <= za {
            let v = sica_objective(za, b, lambda, a);
            if v < best_val {
                best_val = v;
                best = b;
            }
        }
    }
    sign * best
}

/// Real roots of `u^3 + c2 u^2 + c1 u + c0`.
fn cubic_real_roots(c2: f64, c1: f64, c0: f64) -> Vec<f64> {
    // depressed form u = t - c2/3: t^3 + p t + q
    let shift = c2 / 3.0;
    let p = c1 - c2 * c2 / 3.0;
    let q = 2.0 * c2 * c2 * c2 / 27.0 - c2 * c1 / 3.0 + c0;
    let disc = (q / 2.0).powi(2) + (p / 3.0).powi(3);
    if p == 0.0 && q == 0.0 {
        return vec![-shift];
    }
    if disc > 0.0 {
        let sq = disc.sqrt();
        let t = (-q / 2.0 + sq).cbrt() + (-q / 2.0 - sq).cbrt();
        vec![t - shift]
    } else {
        // three real roots (some possibly repeated)
        let r = (-p / 3.0).sqrt();
        let arg = (-q / 2.0 / (r * r * r)).clamp(-1.0, 1.0);
        let phi = arg.acos();
        (0..3)
            .map(|k| 2.0 * r * ((phi - 2.0 * std::f64::consts::PI * k as f64) / 3.0).cos() - shift)
            .collect()
    }
}

/// A few Newton steps on `u^3 + c2 u^2 + c0`, keeping the better iterate.
fn polish_root(mut u: f64, c2: f64, c0: f64) -> f64 {
    let f = |u: f64| (u + c2) * u * u + c0;
    for _ in 0..4 {
        let fu = f(u);
        let d = 3.0 * u * u + 2.0 * c2 * u;
        if d == 0.0 || !fu.is_finite() {
            break;
        }
        let next = u - fu / d;
        if f(next).abs() < fu.abs() {
            u = next;
        } else {
            break;
        }
    }
    u
}
