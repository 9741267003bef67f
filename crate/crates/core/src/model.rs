//! The model function `g` in log-space.
//!
//! A [`GModel`] is a strictly decreasing `C^1` function on `[0, 1]` with
//! `g(0) = 1` and `g(1) = 0`, stored through its logarithm `ln g` and its
//! logarithmic derivative `g'/g`. Large Mallows or k-card-minimum parameters
//! make `g` itself underflow near `1`; every consumer works with differences
//! of `ln g` instead.

use std::fmt;
use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::numeric::{ln_1m_exp, ln_expm1};

/// Evaluators accept `x` in `[0, 1 - DOMAIN_CLAMP]`; callers clamp.
pub const DOMAIN_CLAMP: f64 = 1e-12;

pub type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Family identity and parameters of a model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "family", rename_all = "lowercase")]
pub enum Family {
    Uniform,
    Mallows { beta: f64 },
    Kcm { k: u32 },
    Custom,
}

#[derive(Clone)]
enum Kind {
    Uniform,
    Mallows { beta: f64, log_norm: f64 },
    Kcm { k: f64 },
    Custom { log_g: ScalarFn, dlog_g: ScalarFn },
}

#[derive(Clone)]
pub struct GModel {
    name: String,
    family: Family,
    gamma: Option<f64>,
    kind: Kind,
}

impl fmt::Debug for GModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("GModel")
            .field("name", &self.name)
            .field("family", &self.family)
            .field("gamma", &self.gamma)
            .finish()
    }
}

/// `g(x) = 1 - x`; the law of the permutation is uniform on `S_n`.
pub fn make_uniform() -> GModel {
    GModel {
        name: "uniform".into(),
        family: Family::Uniform,
        gamma: None,
        kind: Kind::Uniform,
    }
}

/// Mallows model with `q = e^{-beta/n}`:
/// `g(x) = (e^{beta(1-x)} - 1) / (e^beta - 1)`, and `g(x) = 1 - x` at `beta = 0`.
pub fn make_mallows(beta: f64) -> Result<GModel> {
    if !beta.is_finite() {
        return Err(Error::InvalidParameter(format!("beta must be finite, got {beta}")));
    }
    let kind = if beta == 0.0 {
        Kind::Uniform
    } else {
        Kind::Mallows {
            beta,
            log_norm: mallows_log_shape(beta, 1.0),
        }
    };
    Ok(GModel {
        name: "mallows".into(),
        family: Family::Mallows { beta },
        gamma: Some(beta),
        kind,
    })
}

/// k-card-minimum model, `g(x) = (1 - x)^k`.
pub fn make_kcm(k: u32) -> Result<GModel> {
    if k == 0 {
        return Err(Error::InvalidParameter("k must be at least 1".into()));
    }
    Ok(GModel {
        name: "kcm".into(),
        family: Family::Kcm { k },
        gamma: Some(k as f64),
        kind: Kind::Kcm { k: k as f64 },
    })
}

/// `ln |e^{beta t} - 1|` up to the additive constant shared by numerator and
/// denominator of the Mallows `g`, for `t = 1 - x`.
///
/// For `beta > 0` this is `beta t + ln(1 - e^{-beta t})`; for `beta < 0` it is
/// `ln(1 - e^{beta t})`.
fn mallows_log_shape(beta: f64, t: f64) -> f64 {
    if t <= 0.0 {
        return f64::NEG_INFINITY;
    }
    if beta > 0.0 {
        beta * t + ln_1m_exp(beta * t)
    } else {
        ln_1m_exp(-beta * t)
    }
}

impl GModel {
    /// A user-supplied model given by closed-form `ln g` and `g'/g`.
    pub fn custom(
        name: impl Into<String>,
        log_g: impl Fn(f64) -> f64 + Send + Sync + 'static,
        dlog_g: impl Fn(f64) -> f64 + Send + Sync + 'static,
        gamma: Option<f64>,
    ) -> Self {
        GModel {
            name: name.into(),
            family: Family::Custom,
            gamma,
            kind: Kind::Custom {
                log_g: Arc::new(log_g),
                dlog_g: Arc::new(dlog_g),
            },
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    /// Name with parameters, e.g. `mallows(beta=20)`.
    pub fn label(&self) -> String {
        match self.family {
            Family::Mallows { beta } => format!("{}(beta={beta})", self.name),
            Family::Kcm { k } => format!("{}(k={k})", self.name),
            Family::Uniform | Family::Custom => self.name.clone(),
        }
    }

    pub fn family(&self) -> Family {
        self.family
    }

    /// Scaling `gamma` of the family instance (`beta` for Mallows, `k` for kCM).
    pub fn gamma(&self) -> Option<f64> {
        self.gamma
    }

    /// `ln g(x)`. Returns `-inf` for `x >= 1`.
    pub fn log_g(&self, x: f64) -> f64 {
        if x >= 1.0 {
            return f64::NEG_INFINITY;
        }
        match &self.kind {
            Kind::Uniform => (-x).ln_1p(),
            Kind::Mallows { beta, log_norm } => mallows_log_shape(*beta, 1.0 - x) - log_norm,
            Kind::Kcm { k } => k * (-x).ln_1p(),
            Kind::Custom { log_g, .. } => log_g(x),
        }
    }

    /// `g'(x) / g(x)`.
    pub fn dlog_g(&self, x: f64) -> f64 {
        match &self.kind {
            Kind::Uniform => -1.0 / (1.0 - x),
            // -beta / (1 - e^{-beta (1-x)}), valid for either sign of beta
            Kind::Mallows { beta, .. } => beta / (-beta * (1.0 - x)).exp_m1(),
            Kind::Kcm { k } => -k / (1.0 - x),
            Kind::Custom { dlog_g, .. } => dlog_g(x),
        }
    }

    /// `g(x)`; may underflow to zero near `1` for steep models.
    pub fn g(&self, x: f64) -> f64 {
        self.log_g(x).exp()
    }

    /// `ln u(x)` with `u(x) = \int_0^x dz / g(z)` when the family has an
    /// elementary antiderivative. Used to cross-check quadrature.
    pub fn closed_form_log_u(&self, x: f64) -> Option<f64> {
        if x <= 0.0 {
            return Some(f64::NEG_INFINITY);
        }
        match &self.kind {
            // u = -ln(1-x)
            Kind::Uniform => Some((-(-x).ln_1p()).ln()),
            Kind::Kcm { k } if *k == 1.0 => Some((-(-x).ln_1p()).ln()),
            // u = ((1-x)^{1-k} - 1) / (k-1)
            Kind::Kcm { k } => Some(ln_expm1(-(k - 1.0) * (-x).ln_1p()) - (k - 1.0).ln()),
            // u = (1 - e^{-beta})/beta * e^{beta} * [ln(1-e^{-beta}) - ln(1-e^{-beta(1-x)})]  (beta > 0)
            // u = (1 - e^{-b})/b * [ln(e^b - 1) - ln(e^{b(1-x)} - 1)]                     (b = -beta > 0)
            Kind::Mallows { beta, .. } => {
                let b = beta.abs();
                let diff = if *beta > 0.0 {
                    ln_1m_exp(b) - ln_1m_exp(b * (1.0 - x))
                } else {
                    ln_expm1(b) - ln_expm1(b * (1.0 - x))
                };
                let prefactor = ln_1m_exp(b) - b.ln() + if *beta > 0.0 { b } else { 0.0 };
                Some(prefactor + diff.ln())
            }
            Kind::Custom { .. } => None,
        }
    }
}

/// Outcome of checking the defining hypotheses of `g` on a grid.
#[derive(Debug, Clone, Default, Serialize)]
pub struct ValidationReport {
    pub failures: Vec<String>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.failures.is_empty()
    }
}

/// Checks a model on the grid `{j / grid_points}` clipped to `[0, 1 - DOMAIN_CLAMP]`.
///
/// Failures are collected, not raised: an empty list means the model passed.
pub fn validate_model(m: &GModel, grid_points: usize) -> Result<ValidationReport> {
    if grid_points < 2 {
        return Err(Error::InvalidParameter("grid_points must be at least 2".into()));
    }
    let mut failures = Vec::new();
    let xs: Vec<f64> = (0..grid_points)
        .map(|j| (j as f64 / grid_points as f64).min(1.0 - DOMAIN_CLAMP))
        .collect();

    let at0 = m.log_g(0.0);
    if at0.abs() > 1e-12 {
        failures.push(format!("log_g(0) = {at0}, expected 0"));
    }

    let mut prev = f64::INFINITY;
    let mut decreasing = true;
    for &x in &xs {
        let v = m.log_g(x);
        if !v.is_finite() || v > 0.0 {
            failures.push(format!("log_g({x}) = {v} outside (-inf, 0]"));
        }
        if v >= prev && decreasing {
            decreasing = false;
            failures.push(format!("not decreasing: log_g({x}) = {v} >= {prev}"));
        }
        prev = v;

        let d = m.dlog_g(x);
        if !(d < 0.0) || !d.is_finite() {
            failures.push(format!("dlog_g({x}) = {d}, expected finite and negative"));
        }
    }

    // finite-difference consistency away from the singular endpoint
    let h = 1e-6;
    for &x in xs.iter().filter(|&&x| x <= 1.0 - 1e-3) {
        let fd = if x < h {
            (-3.0 * m.log_g(x) + 4.0 * m.log_g(x + h) - m.log_g(x + 2.0 * h)) / (2.0 * h)
        } else {
            (m.log_g(x + h) - m.log_g(x - h)) / (2.0 * h)
        };
        let d = m.dlog_g(x);
        let rel = (fd - d).abs() / d.abs().max(1e-300);
        if rel > 1e-5 {
            failures.push(format!(
                "dlog_g({x}) = {d} disagrees with finite difference {fd} (rel {rel:.2e})"
            ));
            break;
        }
    }

    if !(m.log_g(1.0 - 1e-6) < m.log_g(0.5)) {
        failures.push("log_g does not decay toward 1".into());
    }
    Ok(ValidationReport { failures })
}
