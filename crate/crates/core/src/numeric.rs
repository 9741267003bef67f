//! Small numerical kernels shared by the model, permuton and band code:
//! log-space arithmetic, Gauss–Legendre rules and a bracketed Newton solver.

use std::sync::OnceLock;

/// `ln(1 - e^{-t})` for `t > 0`, accurate for both small and large `t`.
pub fn ln_1m_exp(t: f64) -> f64 {
    if t <= 0.0 {
        return f64::NEG_INFINITY;
    }
    if t < std::f64::consts::LN_2 {
        (-(-t).exp_m1()).ln()
    } else {
        (-(-t).exp()).ln_1p()
    }
}

/// `ln(e^t - 1)` for `t > 0`.
pub fn ln_expm1(t: f64) -> f64 {
    t + ln_1m_exp(t)
}

/// `ln(e^a + e^b)`, symmetric in its arguments bit-for-bit.
pub fn log_add_exp(a: f64, b: f64) -> f64 {
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    if lo == f64::NEG_INFINITY {
        return hi;
    }
    hi + (lo - hi).exp().ln_1p()
}

/// `ln(e^a - e^b)` for `a >= b`. Returns `-inf` when `a == b`.
pub fn log_sub_exp(a: f64, b: f64) -> f64 {
    debug_assert!(a >= b || a.is_nan());
    if b == f64::NEG_INFINITY {
        return a;
    }
    a + ln_1m_exp(a - b)
}

/// Gauss–Legendre nodes and weights on [-1, 1].
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussLegendre {
    pub fn new(order: usize) -> Self {
        assert!(order >= 1);
        let n = order;
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        for i in 0..n.div_ceil(2) {
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre(n, x);
            if d != 0.0 {
                dp = d;
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        if n % 2 == 1 {
            nodes[n / 2] = 0.0;
        }
        Self { nodes, weights }
    }

    /// Integrates `f` over `[a, b]`.
    pub fn integrate(&self, a: f64, b: f64, mut f: impl FnMut(f64) -> f64) -> f64 {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&t, &w)| w * f(mid + half * t))
            .sum::<f64>()
            * half
    }

    /// Maps the rule onto `[a, b]`, yielding `(x, weight)` pairs.
    pub fn points(&self, a: f64, b: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(move |(&t, &w)| (mid + half * t, w * half))
    }
}

fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// The fixed 16-point rule used for panel quadrature.
pub fn gauss16() -> &'static GaussLegendre {
    static RULE: OnceLock<GaussLegendre> = OnceLock::new();
    RULE.get_or_init(|| GaussLegendre::new(16))
}

/// Finds the root of an increasing function on `[lo, hi]` by Newton steps
/// safeguarded with bisection. `f` returns `(value, derivative)`; the
/// caller guarantees `f(lo) <= 0 <= f(hi)`.
pub fn solve_increasing(
    mut f: impl FnMut(f64) -> (f64, f64),
    mut lo: f64,
    mut hi: f64,
    guess: f64,
    xtol: f64,
) -> f64 {
    let mut x = if guess > lo && guess < hi {
        guess
    } else {
        0.5 * (lo + hi)
    };
    for _ in 0..200 {
        let (v, d) = f(x);
        if v == 0.0 {
            return x;
        }
        if v < 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        let step = v / d;
        if step.abs() <= xtol {
            // converged; the step may land on a bracket end by rounding
            return (x - step).clamp(lo, hi);
        }
        let mut next = x - step;
        if !(next > lo && next < hi) || !next.is_finite() {
            next = 0.5 * (lo + hi);
        }
        if (next - x).abs() <= xtol || hi - lo <= xtol {
            return next;
        }
        x = next;
    }
    x
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ln_1m_exp_matches_naive_in_safe_range() {
        for &t in &[0.01, 0.5, 1.0, 3.0, 10.0] {
            let naive = (1.0 - (-t as f64).exp()).ln();
            assert!((ln_1m_exp(t) - naive).abs() < 1e-13 * naive.abs().max(1.0));
        }
        // small t: ln(1 - e^{-t}) ~ ln t
        assert!((ln_1m_exp(1e-12) - (1e-12f64).ln()).abs() < 1e-11);
    }

    #[test]
    fn log_add_exp_is_symmetric() {
        let (a, b) = (-3.7, 12.25);
        assert_eq!(log_add_exp(a, b), log_add_exp(b, a));
        assert!((log_add_exp(0.0, 0.0) - std::f64::consts::LN_2).abs() < 1e-15);
        assert_eq!(log_add_exp(f64::NEG_INFINITY, 2.0), 2.0);
    }

    #[test]
    fn log_sub_exp_basic() {
        let v = log_sub_exp(2.0f64.ln(), 0.0);
        assert!(v.abs() < 1e-15);
        assert_eq!(log_sub_exp(1.0, 1.0), f64::NEG_INFINITY);
    }

    #[test]
    fn gauss16_integrates_polynomials_exactly() {
        let rule = gauss16();
        let s: f64 = rule.weights.iter().sum();
        assert!((s - 2.0).abs() < 1e-14);
        // degree 31 is the highest exact degree
        let v = rule.integrate(0.0, 1.0, |x| x.powi(31));
        assert!((v - 1.0 / 32.0).abs() < 1e-15);
        let v = rule.integrate(0.0, std::f64::consts::PI, f64::sin);
        assert!((v - 2.0).abs() < 1e-14);
    }

    #[test]
    fn odd_order_rule() {
        let rule = GaussLegendre::new(5);
        let v = rule.integrate(-1.0, 1.0, |x| x.powi(8));
        assert!((v - 2.0 / 9.0).abs() < 1e-14);
    }

    #[test]
    fn solver_finds_cube_root() {
        let r = solve_increasing(|x| (x * x * x - 2.0, 3.0 * x * x), 0.0, 2.0, 1.0, 1e-15);
        assert!((r - 2f64.cbrt()).abs() < 1e-14);
        // a bad derivative still converges through bisection
        let r = solve_increasing(|x| (x - 0.3, 1e-30), 0.0, 1.0, 0.9, 1e-14);
        assert!((r - 0.3).abs() < 1e-13);
    }
}
