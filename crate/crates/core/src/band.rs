//! Band structure around the diagonal.
//!
//! With `U = (X + Y)/2` and `V = gamma (X - Y)/2` for `(X, Y)` drawn from the
//! permuton, the joint density of `(U, V)` is
//! `h(s, t) = (2/gamma) f(s + t/gamma, s - t/gamma)`. As the family parameter
//! grows, `h(s, .)` approaches the logistic density with scale `1/psi(s)`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{make_kcm, make_mallows, GModel};
use crate::permutation::Permutation;
use crate::permuton::{build_evaluator, PermutonEvaluator, DEFAULT_DELTA_TAIL, DEFAULT_PANELS};
use crate::stats::ks_distance;

/// `psi_alpha(s) = -g'(s) / (gamma g(s))`.
pub fn psi_alpha(m: &GModel, s: f64) -> Result<f64> {
    match m.gamma() {
        Some(gamma) if gamma > 0.0 => Ok(-m.dlog_g(s) / gamma),
        _ => Err(Error::InvalidModel(format!(
            "model {} has no positive scaling gamma",
            m.name()
        ))),
    }
}

/// `2 psi / (e^{psi t} + e^{-psi t})^2`.
pub fn logistic_limit_pdf(psi: f64, t: f64) -> f64 {
    let e = (-2.0 * (psi * t).abs()).exp();
    2.0 * psi * e / ((1.0 + e) * (1.0 + e))
}

/// `1 / (1 + e^{-2t})`.
pub fn logistic_cdf(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-2.0 * t).exp())
    } else {
        let e = (2.0 * t).exp();
        e / (1.0 + e)
    }
}

/// `h(s, t) = (2/gamma) f(s + t/gamma, s - t/gamma)`.
pub fn h_alpha(ev: &PermutonEvaluator, gamma: f64, s: f64, t: f64) -> Result<f64> {
    if !(gamma > 0.0) {
        return Err(Error::InvalidParameter(format!("gamma must be positive, got {gamma}")));
    }
    let (x, y) = (s + t / gamma, s - t / gamma);
    let hi = ev.x_max();
    for (what, v) in [("s + t/gamma", x), ("s - t/gamma", y)] {
        if !(0.0..=hi).contains(&v) {
            return Err(Error::out_of_range(what, v, 0.0, hi));
        }
    }
    Ok(2.0 / gamma * ev.f_density(x, y))
}

/// The two built-in families indexed by their scaling parameter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum BandFamily {
    Mallows,
    Kcm,
}

impl BandFamily {
    pub fn model(self, alpha: f64) -> Result<GModel> {
        match self {
            BandFamily::Mallows => make_mallows(alpha),
            BandFamily::Kcm => {
                if alpha.fract() != 0.0 || alpha < 1.0 || alpha > u32::MAX as f64 {
                    return Err(Error::InvalidParameter(format!("kcm needs a positive integer k, got {alpha}")));
                }
                make_kcm(alpha as u32)
            }
        }
    }

    /// Limit of `psi_alpha`: `1` for Mallows, `1/(1-s)` for kCM.
    pub fn limit_psi(self, s: f64) -> f64 {
        match self {
            BandFamily::Mallows => 1.0,
            BandFamily::Kcm => 1.0 / (1.0 - s),
        }
    }
}

impl std::str::FromStr for BandFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mallows" => Ok(Self::Mallows),
            "kcm" => Ok(Self::Kcm),
            other => Err(Error::InvalidParameter(format!("unknown family {other:?}"))),
        }
    }
}

/// `h` and its logistic limit tabulated on an `s x t` grid (row-major in `s`).
#[derive(Debug, Clone, Serialize)]
pub struct BandProfile {
    pub alpha: f64,
    pub gamma: f64,
    pub s_grid: Vec<f64>,
    pub t_grid: Vec<f64>,
    pub h_values: Vec<f64>,
    pub limit_values: Vec<f64>,
}

impl BandProfile {
    pub fn compute(
        ev: &PermutonEvaluator,
        alpha: f64,
        gamma: f64,
        psi: impl Fn(f64) -> f64,
        s_grid: &[f64],
        t_grid: &[f64],
    ) -> Result<Self> {
        let mut h_values = Vec::with_capacity(s_grid.len() * t_grid.len());
        let mut limit_values = Vec::with_capacity(h_values.capacity());
        for &s in s_grid {
            let p = psi(s);
            for &t in t_grid {
                h_values.push(h_alpha(ev, gamma, s, t)?);
                limit_values.push(logistic_limit_pdf(p, t));
            }
        }
        Ok(Self {
            alpha,
            gamma,
            s_grid: s_grid.to_vec(),
            t_grid: t_grid.to_vec(),
            h_values,
            limit_values,
        })
    }

    pub fn abs_errors(&self) -> impl Iterator<Item = f64> + '_ {
        self.h_values.iter().zip(&self.limit_values).map(|(h, l)| (h - l).abs())
    }
}

/// Sup-norm distance between `h_alpha` and its limit for one `alpha`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct SweepPoint {
    pub alpha: f64,
    pub sup_abs_err: f64,
    /// `sup |h - limit| / psi(s)`: the error relative to the limit peak scale.
    pub sup_rel_err: f64,
}

pub fn band_error_sweep(family: BandFamily, alphas: &[f64], s_grid: &[f64], t_grid: &[f64]) -> Result<Vec<SweepPoint>> {
    band_error_sweep_profiles(family, alphas, s_grid, t_grid)
        .map(|v| v.into_iter().map(|(point, _)| point).collect())
}

/// Like [`band_error_sweep`], also returning the profile behind each point.
pub fn band_error_sweep_profiles(
    family: BandFamily,
    alphas: &[f64],
    s_grid: &[f64],
    t_grid: &[f64],
) -> Result<Vec<(SweepPoint, BandProfile)>> {
    alphas
        .iter()
        .map(|&alpha| {
            let m = family.model(alpha)?;
            let gamma = m.gamma().unwrap_or(alpha);
            let ev = build_evaluator(&m, DEFAULT_PANELS, DEFAULT_DELTA_TAIL)?;
            let profile = BandProfile::compute(&ev, alpha, gamma, |s| family.limit_psi(s), s_grid, t_grid)?;
            let nt = t_grid.len();
            let mut sup_abs: f64 = 0.0;
            let mut sup_rel: f64 = 0.0;
            for (idx, err) in profile.abs_errors().enumerate() {
                sup_abs = sup_abs.max(err);
                sup_rel = sup_rel.max(err / family.limit_psi(s_grid[idx / nt]));
            }
            Ok((
                SweepPoint {
                    alpha,
                    sup_abs_err: sup_abs,
                    sup_rel_err: sup_rel,
                },
                profile,
            ))
        })
        .collect()
}

/// Equal-width histogram with out-of-range counts kept separately.
#[derive(Debug, Clone, Serialize)]
pub struct Histogram {
    pub lo: f64,
    pub hi: f64,
    pub counts: Vec<u64>,
    pub below: u64,
    pub above: u64,
}

impl Histogram {
    pub fn new(lo: f64, hi: f64, bins: usize, samples: &[f64]) -> Self {
        let mut counts = vec![0u64; bins];
        let (mut below, mut above) = (0, 0);
        let width = (hi - lo) / bins as f64;
        for &w in samples {
            if w < lo {
                below += 1;
            } else if w >= hi {
                above += 1;
            } else {
                counts[(((w - lo) / width) as usize).min(bins - 1)] += 1;
            }
        }
        Self {
            lo,
            hi,
            counts,
            below,
            above,
        }
    }

    pub fn bin_edges(&self, b: usize) -> (f64, f64) {
        let width = (self.hi - self.lo) / self.counts.len() as f64;
        (self.lo + b as f64 * width, self.lo + (b + 1) as f64 * width)
    }
}

/// Rescaled cross-diagonal displacements of a sampled permutation.
#[derive(Debug, Clone, Serialize)]
pub struct EmpiricalBand {
    pub samples: usize,
    pub histogram: Histogram,
    /// KS distance between the rescaled displacements and the logistic law.
    pub ks: f64,
}

/// Half-width of the histogram range in rescaled units.
pub const HISTOGRAM_RANGE: f64 = 5.0;

/// For every `i` with `u_i = (i/n + sigma(i)/n)/2` in `[a, b]`, rescales
/// `v_i = gamma (i/n - sigma(i)/n)/2` to `w_i = psi(u_i) v_i` and compares
/// the `w_i` with the logistic law.
pub fn band_profile_empirical(
    sigma: &Permutation,
    gamma: f64,
    psi: impl Fn(f64) -> f64,
    window: (f64, f64),
    bins: usize,
) -> Result<EmpiricalBand> {
    let (a, b) = window;
    if !(0.0 < a && a < b && b < 1.0) {
        return Err(Error::InvalidParameter(format!("window must satisfy 0 < a < b < 1, got [{a}, {b}]")));
    }
    if bins == 0 {
        return Err(Error::InvalidParameter("bins must be positive".into()));
    }
    let n = sigma.len() as f64;
    let mut ws: Vec<f64> = sigma
        .values()
        .iter()
        .enumerate()
        .filter_map(|(idx, &v)| {
            let x = (idx + 1) as f64 / n;
            let y = v as f64 / n;
            let u = 0.5 * (x + y);
            (a..=b).contains(&u).then(|| psi(u) * gamma * 0.5 * (x - y))
        })
        .collect();
    if ws.is_empty() {
        return Err(Error::InvalidParameter(format!("no points with u in [{a}, {b}]")));
    }
    ws.sort_by(f64::total_cmp);
    let ks = ks_distance(&ws, logistic_cdf)?;
    Ok(EmpiricalBand {
        samples: ws.len(),
        histogram: Histogram::new(-HISTOGRAM_RANGE, HISTOGRAM_RANGE, bins, &ws),
        ks,
    })
}

/// KS distance of `{(i/n + sigma(i)/n)/2}` against the uniform law on `[0, 1]`.
pub fn u_marginal_ks(sigma: &Permutation) -> f64 {
    let n = sigma.len() as f64;
    let mut us: Vec<f64> = sigma
        .values()
        .iter()
        .enumerate()
        .map(|(idx, &v)| 0.5 * ((idx + 1) as f64 + v as f64) / n)
        .collect();
    us.sort_by(f64::total_cmp);
    ks_distance(&us, |u| u.clamp(0.0, 1.0)).expect("nonempty permutation")
}
