//! The limiting permuton of a model.
//!
//! Everything is driven by `u(x) = \int_0^x dz / g(z)`: the union-cdf is
//! `V(x, y) = u^{-1}(u(x) + u(y))`, the cdf is `F = x + y - V`, and the
//! density is `f = -g'(V) g(V) / (g(x) g(y))`.
//!
//! `u` grows like `exp(gamma x)` for steep models and overflows `f64` well
//! before `x = 1`, so it is tabulated as `ln u` on a mesh graded toward `1`
//! and refined until `ln g` varies by at most [`MAX_PANEL_LOG_VARIATION`]
//! across each panel. Between nodes `ln u` is completed by a 16-point
//! Gauss–Legendre integral from the left node, so no interpolation error
//! enters `V`.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{Family, GModel};
use crate::numeric::{gauss16, log_add_exp, log_sub_exp, solve_increasing, GaussLegendre};
use crate::rng::RngStream;

pub const DEFAULT_PANELS: usize = 64;
pub const DEFAULT_DELTA_TAIL: f64 = 1e-9;
/// Geometric grading ratio of `1 - x` between consecutive base nodes near 1.
pub const GRADING_RATIO: f64 = 0.9;
pub const MAX_PANEL_LOG_VARIATION: f64 = 0.5;
const RICHARDSON_RTOL: f64 = 1e-13;
const ROOT_XTOL: f64 = 1e-15;

/// `u(x)` together with whether `x` was clamped to the tail cutoff.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UValue {
    pub value: f64,
    pub saturated: bool,
}

#[derive(Debug, Clone)]
pub struct PermutonEvaluator {
    model: GModel,
    xs: Vec<f64>,
    log_u: Vec<f64>,
    /// `dx / d(ln u) = g(x) u(x)` at the nodes, for Hermite starting guesses.
    slope: Vec<f64>,
    delta_tail: f64,
    closed_form_rel_err: Option<f64>,
}

/// Integral of `1/g` over `[a, b]` in log-space, by a single 16-point rule.
fn log_panel_integral(m: &GModel, a: f64, b: f64) -> f64 {
    if b <= a {
        return f64::NEG_INFINITY;
    }
    // 1/g is increasing, so its maximum on the panel is at b
    let shift = -m.log_g(b);
    let s = gauss16().integrate(a, b, |z| (-m.log_g(z) - shift).exp());
    shift + s.ln()
}

fn base_mesh(panels: usize, x_max: f64) -> Vec<f64> {
    let mut xs: Vec<f64> = (0..=panels).map(|j| 0.5 * j as f64 / panels as f64).collect();
    let mut gap = 0.5 * GRADING_RATIO;
    while 1.0 - gap < x_max {
        xs.push(1.0 - gap);
        gap *= GRADING_RATIO;
    }
    if *xs.last().unwrap() < x_max {
        xs.push(x_max);
    }
    xs
}

/// Splits `[a, b]` until `ln g` varies by at most `MAX_PANEL_LOG_VARIATION`
/// and halving the panel does not change the 16-point value.
fn refine_panel(m: &GModel, a: f64, b: f64, out: &mut Vec<(f64, f64, f64)>) {
    let mut stack = vec![(a, b, 0u32)];
    while let Some((a, b, depth)) = stack.pop() {
        let mid = 0.5 * (a + b);
        let whole = log_panel_integral(m, a, b);
        let accept = if depth >= 60 || mid <= a || mid >= b {
            true
        } else if (m.log_g(a) - m.log_g(b)).abs() > MAX_PANEL_LOG_VARIATION {
            false
        } else {
            let halves = log_add_exp(log_panel_integral(m, a, mid), log_panel_integral(m, mid, b));
            // near 1 the nodes themselves carry relative error ~ eps |g'/g|,
            // and a log-integral of size L is only known to ~ eps L
            let noise = 16.0 * f64::EPSILON * (1.0 + b * m.dlog_g(b).abs() + whole.abs());
            (whole - halves).abs() <= RICHARDSON_RTOL.max(noise)
        };
        if accept {
            out.push((a, b, whole));
        } else {
            // right half pushed first so panels come out left to right
            stack.push((mid, b, depth + 1));
            stack.push((a, mid, depth + 1));
        }
    }
}

/// Tabulates `ln u` for `m` on `panels` uniform base panels over `[0, 1/2]`
/// followed by geometric grading toward `1 - delta_tail`.
pub fn build_evaluator(m: &GModel, panels: usize, delta_tail: f64) -> Result<PermutonEvaluator> {
    if panels < 16 {
        return Err(Error::InvalidParameter(format!("panel count must be at least 16, got {panels}")));
    }
    if !(delta_tail > 0.0 && delta_tail <= 1e-6) {
        return Err(Error::InvalidParameter(format!(
            "delta_tail must be in (0, 1e-6], got {delta_tail}"
        )));
    }
    let x_max = 1.0 - delta_tail;
    let base = base_mesh(panels, x_max);
    let mut refined = Vec::with_capacity(base.len() * 2);
    for w in base.windows(2) {
        refine_panel(m, w[0], w[1], &mut refined);
    }

    let mut xs = Vec::with_capacity(refined.len() + 1);
    let mut log_u = Vec::with_capacity(refined.len() + 1);
    xs.push(0.0);
    log_u.push(f64::NEG_INFINITY);
    for &(_, b, piece) in &refined {
        let prev = *log_u.last().unwrap();
        let next = log_add_exp(prev, piece);
        if !(next > prev) || !next.is_finite() {
            return Err(Error::InvalidModel(format!(
                "u is not strictly increasing at x = {b} (ln u: {prev} -> {next})"
            )));
        }
        xs.push(b);
        log_u.push(next);
    }

    let closed_form_rel_err = m.closed_form_log_u(0.5).map(|_| {
        xs.iter()
            .zip(&log_u)
            .filter(|(&x, _)| x >= 1e-3)
            .filter_map(|(&x, &lu)| m.closed_form_log_u(x).map(|c| (lu - c).exp_m1().abs()))
            .fold(0.0, f64::max)
    });

    let slope = xs.iter().zip(&log_u).map(|(&x, &lu)| (m.log_g(x) + lu).exp()).collect();

    Ok(PermutonEvaluator {
        model: m.clone(),
        xs,
        log_u,
        slope,
        delta_tail,
        closed_form_rel_err,
    })
}

impl PermutonEvaluator {
    pub fn new(m: &GModel) -> Result<Self> {
        build_evaluator(m, DEFAULT_PANELS, DEFAULT_DELTA_TAIL)
    }

    pub fn model(&self) -> &GModel {
        &self.model
    }

    pub fn delta_tail(&self) -> f64 {
        self.delta_tail
    }

    pub fn x_max(&self) -> f64 {
        *self.xs.last().unwrap()
    }

    pub fn mesh(&self) -> &[f64] {
        &self.xs
    }

    /// Largest relative disagreement between the tabulated and the
    /// closed-form `u` on mesh nodes `x >= 1e-3`, when a closed form exists.
    pub fn closed_form_rel_err(&self) -> Option<f64> {
        self.closed_form_rel_err
    }

    fn panel_of(&self, x: f64) -> usize {
        (self.xs.partition_point(|&v| v <= x) - 1).min(self.xs.len() - 2)
    }

    fn log_u_in_panel(&self, j: usize, x: f64) -> f64 {
        let a = self.xs[j];
        if x <= a {
            return self.log_u[j];
        }
        log_add_exp(self.log_u[j], log_panel_integral(&self.model, a, x))
    }

    /// `ln u(x)`, with `x` clamped to `[0, 1 - delta_tail]`.
    pub fn log_u_of(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return f64::NEG_INFINITY;
        }
        let x = x.min(self.x_max());
        self.log_u_in_panel(self.panel_of(x), x)
    }

    pub fn u_of(&self, x: f64) -> UValue {
        UValue {
            value: self.log_u_of(x).exp(),
            saturated: x > self.x_max(),
        }
    }

    /// `ln \int_a^b dz/g(z)` for `0 <= a <= b <= 1 - delta_tail`.
    pub fn log_u_between(&self, a: f64, b: f64) -> f64 {
        if b <= a {
            return f64::NEG_INFINITY;
        }
        let (ja, jb) = (self.panel_of(a), self.panel_of(b));
        if ja == jb {
            log_panel_integral(&self.model, a, b)
        } else {
            log_sub_exp(self.log_u_of(b), self.log_u_of(a))
        }
    }

    /// Solves `ln u(x) = level`. Levels beyond `ln u(1 - delta_tail)` map to `1`.
    pub fn inv_log_u(&self, level: f64) -> f64 {
        if level == f64::NEG_INFINITY {
            return 0.0;
        }
        let top = *self.log_u.last().unwrap();
        if level >= top {
            return if level == top { self.x_max() } else { 1.0 };
        }
        let j = self.log_u.partition_point(|&v| v <= level) - 1;
        let (a, b) = (self.xs[j], self.xs[j + 1]);
        let guess = if j == 0 {
            // u(x) ~ x near 0
            level.exp()
        } else {
            let h = self.log_u[j + 1] - self.log_u[j];
            let t = (level - self.log_u[j]) / h;
            let (t2, t3) = (t * t, t * t * t);
            (2.0 * t3 - 3.0 * t2 + 1.0) * a
                + (t3 - 2.0 * t2 + t) * h * self.slope[j]
                + (3.0 * t2 - 2.0 * t3) * b
                + (t3 - t2) * h * self.slope[j + 1]
        };
        solve_increasing(
            |x| {
                let lu = self.log_u_in_panel(j, x);
                (lu - level, (-self.model.log_g(x) - lu).exp())
            },
            a,
            b,
            guess,
            ROOT_XTOL,
        )
    }

    /// `u^{-1}(v)` for `v >= 0`; saturates to `1`.
    pub fn u_inv(&self, v: f64) -> f64 {
        if v <= 0.0 {
            return 0.0;
        }
        self.inv_log_u(v.ln())
    }

    /// Union-cdf `V(x, y) = P(X <= x or Y <= y)`.
    pub fn v_of(&self, x: f64, y: f64) -> f64 {
        if x >= 1.0 || y >= 1.0 {
            return 1.0;
        }
        if x <= 0.0 {
            return y.max(0.0);
        }
        if y <= 0.0 {
            return x;
        }
        self.inv_log_u(log_add_exp(self.log_u_of(x), self.log_u_of(y)))
    }

    /// Joint cdf `F(x, y) = x + y - V(x, y)`.
    pub fn f_cdf(&self, x: f64, y: f64) -> f64 {
        if x <= 0.0 || y <= 0.0 {
            return 0.0;
        }
        if x >= 1.0 {
            return y.min(1.0);
        }
        if y >= 1.0 {
            return x;
        }
        (x + y - self.v_of(x, y)).clamp(0.0, x.min(y))
    }

    /// Joint density `-g'(V) g(V) / (g(x) g(y))`, evaluated in log-space.
    pub fn f_density(&self, x: f64, y: f64) -> f64 {
        let v = self.v_of(x, y);
        if v >= 1.0 {
            return 0.0;
        }
        self.density_at(x, y, v)
    }

    fn density_at(&self, x: f64, y: f64, v: f64) -> f64 {
        let m = &self.model;
        let lv = m.log_g(v);
        let w = -m.dlog_g(v) * (2.0 * lv - m.log_g(x) - m.log_g(y)).exp();
        w.max(0.0)
    }

    /// One draw `(X, Y)` from the permuton: `X` uniform, then `Y` from the
    /// conditional cdf `1 - g(V(X, y)) / g(X)`.
    pub fn sample_point(&self, rng: &mut RngStream) -> (f64, f64) {
        let m = &self.model;
        let x_max = self.x_max();
        let floor = m.log_g(x_max);
        loop {
            let x = rng.open01() * x_max;
            let log_tail = (-rng.open01()).ln_1p();
            let lg_x = m.log_g(x);
            let target = log_tail + lg_x;
            if target <= floor {
                // beyond the tail cutoff
                continue;
            }
            let guess = x + log_tail / m.dlog_g(x);
            let v = solve_increasing(
                |z| (target - m.log_g(z), -m.dlog_g(z)),
                x,
                x_max,
                guess,
                ROOT_XTOL,
            );
            let y = self.inv_log_u(self.log_u_between(x, v));
            return (x, y);
        }
    }

    /// Grid of `(x, y, V, F, f)` on `{(a/(G+1), b/(G+1))}`, `a, b = 1..=G`.
    pub fn table(&self, grid: usize) -> Vec<[f64; 5]> {
        let h = 1.0 / (grid as f64 + 1.0);
        (1..=grid)
            .flat_map(|a| (1..=grid).map(move |b| (a as f64 * h, b as f64 * h)))
            .map(|(x, y)| {
                let v = self.v_of(x, y);
                let dens = if v >= 1.0 { 0.0 } else { self.density_at(x, y, v) };
                [x, y, v, (x + y - v).max(0.0), dens]
            })
            .collect()
    }
}

/// The closed forms of `V` for the Mallows and k-card-minimum families.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ClosedFormKind {
    Mallows { beta: f64 },
    Kcm { k: u32 },
}

impl ClosedFormKind {
    pub fn for_model(m: &GModel) -> Option<Self> {
        match m.family() {
            Family::Mallows { beta } => Some(Self::Mallows { beta }),
            Family::Kcm { k } => Some(Self::Kcm { k }),
            Family::Uniform => Some(Self::Kcm { k: 1 }),
            Family::Custom => None,
        }
    }
}

/// Evaluates the closed-form union-cdf for `x, y` in `[0, 1)`.
///
/// Mallows with `beta != 0`:
/// `V = (1/beta) ln((e^{beta(x+1)} + e^{beta(y+1)} - e^{beta(x+y)} - e^beta) / (e^beta - 1))`,
/// rewritten so that every term is positive and no exponential overflows.
/// kCM with `k >= 2`: `V = 1 - ((1-x)^{1-k} + (1-y)^{1-k} - 1)^{1/(1-k)}`.
/// Both reduce to `x + y - xy` in the uniform case.
pub fn closed_form_v(kind: ClosedFormKind, x: f64, y: f64) -> f64 {
    use crate::numeric::ln_1m_exp;
    match kind {
        ClosedFormKind::Mallows { beta } if beta == 0.0 => x + y - x * y,
        ClosedFormKind::Kcm { k: 1 } => x + y - x * y,
        ClosedFormKind::Mallows { beta } if beta > 0.0 => {
            // V = 1 + (1/beta) ln[(e^{-b(1-x)}(1-e^{-b(1-y)}) + e^{-b(1-y)}(1-e^{-b y})) / (1-e^{-b})]
            let b = beta;
            let t1 = -b * (1.0 - x) + ln_1m_exp(b * (1.0 - y));
            let t2 = -b * (1.0 - y) + ln_1m_exp(b * y);
            1.0 + (log_add_exp(t1, t2) - ln_1m_exp(b)) / b
        }
        ClosedFormKind::Mallows { beta } => {
            // b = -beta: V = -(1/b) ln[e^{-b} + (e^{-bx}-e^{-b})(e^{-by}-e^{-b})/(1-e^{-b})]
            let b = -beta;
            let tx = -b * x + ln_1m_exp(b * (1.0 - x));
            let ty = -b * y + ln_1m_exp(b * (1.0 - y));
            -log_add_exp(-b, tx + ty - ln_1m_exp(b)) / b
        }
        ClosedFormKind::Kcm { k } => {
            let p = k as f64 - 1.0;
            // (1-x)^{-p} + (1-y)^{-p} - 1 in log-space
            let lx = -p * (-x).ln_1p();
            let ly = -p * (-y).ln_1p();
            let hi = lx.max(ly);
            let s = hi + ((lx - hi).exp() + (ly - hi).exp() - (-hi).exp()).ln();
            -(-s / p).exp_m1()
        }
    }
}

/// Inversion density `2 \int_0^1 u(s) g(s) ds` with a bound on the part of
/// the integral beyond the tail cutoff.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct InversionDensity {
    pub value: f64,
    pub tail_bound: f64,
}

pub fn inversion_density_integral(ev: &PermutonEvaluator) -> InversionDensity {
    let m = &ev.model;
    let rule = gauss16();
    let mut total = 0.0;
    for j in 0..ev.xs.len() - 1 {
        total += rule.integrate(ev.xs[j], ev.xs[j + 1], |s| {
            (ev.log_u_in_panel(j, s) + m.log_g(s)).exp()
        });
    }
    let x_max = ev.x_max();
    let edge = (ev.log_u_of(x_max) + m.log_g(x_max)).exp();
    InversionDensity {
        value: 2.0 * total,
        tail_bound: 2.0 * ev.delta_tail * edge,
    }
}

/// Tensor-product check of the density: total mass and the two marginal
/// cdfs, which must equal the identity for a permuton.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct MassReport {
    pub total: f64,
    pub max_x_marginal_err: f64,
    pub max_y_marginal_err: f64,
}

/// Panel edges on `[0, 1]`: uniform on `[0, 1/2]`, then geometric toward 1
/// with ratio `0.8`, then a final panel to `1`.
pub fn graded_panels(panels: usize) -> Vec<f64> {
    assert!(panels >= 8);
    let geometric = (panels * 9 / 20).max(4);
    let uniform = panels - geometric;
    let mut edges: Vec<f64> = (0..=uniform).map(|j| 0.5 * j as f64 / uniform as f64).collect();
    let mut gap = 0.5;
    for _ in 0..geometric - 1 {
        gap *= 0.8;
        edges.push(1.0 - gap);
    }
    edges.push(1.0);
    edges
}

pub fn tensor_mass(ev: &PermutonEvaluator, panels: usize, order: usize) -> MassReport {
    let rule = GaussLegendre::new(order);
    let edges = graded_panels(panels);
    let pts: Vec<(f64, f64)> = edges.windows(2).flat_map(|w| rule.points(w[0], w[1]).collect::<Vec<_>>()).collect();
    let log_u: Vec<f64> = pts.iter().map(|&(x, _)| ev.log_u_of(x)).collect();
    let m = pts.len();

    // f is symmetric and both axes share the nodes: evaluate the lower
    // triangle only; nodes past the tail cutoff carry mass O(delta_tail)
    // and are dropped
    let x_max = ev.x_max();
    let lower: Vec<Vec<f64>> = (0..m)
        .into_par_iter()
        .map(|i| {
            let x = pts[i].0;
            (0..=i)
                .map(|j| {
                    if x > x_max {
                        return 0.0;
                    }
                    let v = ev.inv_log_u(log_add_exp(log_u[i], log_u[j]));
                    if v >= 1.0 {
                        0.0
                    } else {
                        ev.density_at(x, pts[j].0, v)
                    }
                })
                .collect()
        })
        .collect();
    let at = |i: usize, j: usize| if j <= i { lower[i][j] } else { lower[j][i] };

    let mut row_mass = vec![0.0; m];
    let mut col_mass = vec![0.0; m];
    for i in 0..m {
        for j in 0..m {
            let w = pts[i].1 * pts[j].1 * at(i, j);
            row_mass[i] += w;
            col_mass[j] += w;
        }
    }
    let marginal_err = |mass: &[f64]| {
        let mut cum = 0.0;
        let mut err: f64 = 0.0;
        for (i, &r) in mass.iter().enumerate() {
            cum += r;
            if (i + 1) % order == 0 {
                err = err.max((cum - edges[(i + 1) / order]).abs());
            }
        }
        err
    };
    MassReport {
        total: row_mass.iter().sum(),
        max_x_marginal_err: marginal_err(&row_mass),
        max_y_marginal_err: marginal_err(&col_mass),
    }
}
