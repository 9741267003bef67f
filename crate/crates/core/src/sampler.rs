//! Card-picking samplers.
//!
//! The old deck holds cards `1..=n`. At step `i` the picker draws a position
//! `C` in `1..=n-i+1` from the remaining deck (counted from the bottom),
//! and `sigma(i)` is the label on that card. For a model `g` the position law
//! has tail `P(C >= l) = g((i-1+l-1)/n) / g((i-1)/n)`, which is what
//! [`StepSampler`] inverts by binary search.

use crate::deck::FenwickDeck;
use crate::error::{Error, Result};
use crate::model::GModel;
use crate::permutation::Permutation;
use crate::rng::RngStream;

fn check_step(n: usize, i: usize) -> Result<usize> {
    if n == 0 {
        return Err(Error::InvalidParameter("n must be positive".into()));
    }
    if i == 0 || i > n {
        return Err(Error::out_of_range("step i", i as f64, 1.0, n as f64));
    }
    Ok(n - i + 1)
}

/// `e^{a} - e^{b}` for `a >= b`, written to keep relative accuracy when the
/// two are close.
#[inline]
fn exp_diff(a: f64, b: f64) -> f64 {
    if b == f64::NEG_INFINITY {
        return a.exp();
    }
    a.exp() * -(b - a).exp_m1()
}

/// Probability that step `i` of an `n`-card run picks position `l`.
pub fn step_mass(m: &GModel, n: usize, i: usize, l: usize) -> Result<f64> {
    let support = check_step(n, i)?;
    if l == 0 || l > support {
        return Err(Error::out_of_range("position l", l as f64, 1.0, support as f64));
    }
    let nf = n as f64;
    let base = m.log_g((i - 1) as f64 / nf);
    let upper = m.log_g((i - 1 + l - 1) as f64 / nf) - base;
    let lower = if i - 1 + l == n {
        f64::NEG_INFINITY
    } else {
        m.log_g((i - 1 + l) as f64 / nf) - base
    };
    Ok(exp_diff(upper, lower))
}

/// Truncated geometric mass `(q^{l-1} - q^l) / (1 - q^{n-i+1})` of the
/// `(n, q)`-Mallows position draw at step `i`.
pub fn mallows_step_mass(q: f64, n: usize, i: usize, l: usize) -> Result<f64> {
    if !(q > 0.0) || q == 1.0 || !q.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "q must be positive, finite and different from 1, got {q}"
        )));
    }
    let support = check_step(n, i)?;
    if l == 0 || l > support {
        return Err(Error::out_of_range("position l", l as f64, 1.0, support as f64));
    }
    let lq = q.ln();
    let s = support as f64;
    let k = (l - 1) as f64;
    Ok(if lq < 0.0 {
        (k * lq).exp() * lq.exp_m1() / (s * lq).exp_m1()
    } else {
        // divide through by q^support to keep every power <= 1
        ((k - s) * lq).exp() * (-lq).exp_m1() / (-s * lq).exp_m1() * lq.exp()
    })
}

/// Smallest `l` in `1..=support` with `tail_log(l) <= threshold`, where
/// `tail_log` is nonincreasing and `tail_log(support) = -inf`.
#[inline]
fn first_at_or_below(support: usize, threshold: f64, mut tail_log: impl FnMut(usize) -> f64) -> usize {
    let (mut lo, mut hi) = (1usize, support);
    while lo < hi {
        let mid = lo + (hi - lo) / 2;
        if tail_log(mid) <= threshold {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    lo
}

/// Draws the position `l` for step `i`, evaluating `ln g` on the fly
/// (`O(log n)` evaluations).
pub fn sample_step(m: &GModel, n: usize, i: usize, rng: &mut RngStream) -> Result<usize> {
    let support = check_step(n, i)?;
    let threshold = (-rng.open01()).ln_1p();
    let nf = n as f64;
    let base = m.log_g((i - 1) as f64 / nf);
    Ok(first_at_or_below(support, threshold, |l| {
        if i - 1 + l >= n {
            f64::NEG_INFINITY
        } else {
            m.log_g((i - 1 + l) as f64 / nf) - base
        }
    }))
}

/// Step sampler with `ln g(j/n)` precomputed for `j = 0..=n`; `g(1) = 0` is
/// stored as `-inf` rather than evaluated.
#[derive(Debug, Clone)]
pub struct StepSampler {
    n: usize,
    log_g: Vec<f64>,
}

impl StepSampler {
    pub fn new(m: &GModel, n: usize) -> Self {
        let nf = n as f64;
        let mut log_g: Vec<f64> = (0..n).map(|j| m.log_g(j as f64 / nf)).collect();
        log_g.push(f64::NEG_INFINITY);
        Self { n, log_g }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Draws `l` for step `i` (one-based); `i` must be in `1..=n`.
    #[inline]
    pub fn sample_step(&self, i: usize, rng: &mut RngStream) -> usize {
        let threshold = (-rng.open01()).ln_1p();
        let base = self.log_g[i - 1];
        // tail for position l lives at log_g[i - 1 + l]
        let tail = &self.log_g[i..=self.n];
        tail.partition_point(|&v| v - base > threshold) + 1
    }

    pub fn step_mass(&self, i: usize, l: usize) -> f64 {
        let base = self.log_g[i - 1];
        exp_diff(self.log_g[i + l - 2] - base, self.log_g[i - 1 + l] - base)
    }

    pub fn sample(&self, rng: &mut RngStream) -> Permutation {
        let mut deck = FenwickDeck::new(self.n);
        let sigma = (1..=self.n)
            .map(|i| deck.select_remove_unchecked(self.sample_step(i, rng)))
            .collect();
        Permutation::from_raw(sigma)
    }
}

/// Samples `sigma ~ PERM(g, n)` in `O(n log n)`.
pub fn sample_permutation(m: &GModel, n: usize, rng: &mut RngStream) -> Result<Permutation> {
    if n == 0 {
        return Err(Error::InvalidParameter("n must be positive".into()));
    }
    Ok(StepSampler::new(m, n).sample(rng))
}

/// The k-card-minimum model taken literally: each step draws `k` uniform
/// positions among the remaining cards and keeps the lowest.
pub fn sample_kcm_oracle(k: u32, n: usize, rng: &mut RngStream) -> Result<Permutation> {
    if k == 0 || n == 0 {
        return Err(Error::InvalidParameter("k and n must be positive".into()));
    }
    let mut deck = FenwickDeck::new(n);
    let sigma = (1..=n)
        .map(|i| {
            let support = n - i + 1;
            let c = (0..k).map(|_| rng.uniform_index(support)).min().unwrap_or(1);
            deck.select_remove_unchecked(c)
        })
        .collect();
    Ok(Permutation::from_raw(sigma))
}

/// The `(n, q)`-Mallows model through truncated geometric position draws,
/// `P(C = l) = (q^{l-1} - q^l) / (1 - q^{n-i+1})`, inverted in closed form.
pub fn sample_mallows_oracle(q: f64, n: usize, rng: &mut RngStream) -> Result<Permutation> {
    if !(q > 0.0) || q == 1.0 || !q.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "q must be positive, finite and different from 1, got {q}"
        )));
    }
    if n == 0 {
        return Err(Error::InvalidParameter("n must be positive".into()));
    }
    let lq = q.ln();
    let mut deck = FenwickDeck::new(n);
    let sigma = (1..=n)
        .map(|i| {
            let support = n - i + 1;
            let w = rng.open01();
            // C = ceil(ln T / ln q), T = (1 - w) + w q^support
            let log_t = crate::numeric::log_add_exp((-w).ln_1p(), w.ln() + support as f64 * lq);
            let c = (log_t / lq).ceil().clamp(1.0, support as f64) as usize;
            deck.select_remove_unchecked(c)
        })
        .collect();
    Ok(Permutation::from_raw(sigma))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{make_kcm, make_mallows, make_uniform};

    #[test]
    fn uniform_step_mass_is_flat() {
        let m = make_uniform();
        for i in 1..=10 {
            for l in 1..=(10 - i + 1) {
                let p = step_mass(&m, 10, i, l).unwrap();
                assert!((p - 1.0 / (10 - i + 1) as f64).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn step_mass_rejects_bad_indices() {
        let m = make_uniform();
        assert!(step_mass(&m, 5, 0, 1).is_err());
        assert!(step_mass(&m, 5, 6, 1).is_err());
        assert!(step_mass(&m, 5, 2, 5).is_err());
        assert!(step_mass(&m, 5, 2, 0).is_err());
        assert!(step_mass(&m, 0, 1, 1).is_err());
    }

    #[test]
    fn step_mass_sums_to_one() {
        let models = [
            make_uniform(),
            make_mallows(5.0).unwrap(),
            make_mallows(-5.0).unwrap(),
            make_mallows(200.0).unwrap(),
            make_kcm(3).unwrap(),
            make_kcm(200).unwrap(),
        ];
        for m in &models {
            for n in [1usize, 2, 7, 100, 1000] {
                for i in [1, n / 2 + 1, n] {
                    let s: f64 = (1..=n - i + 1).map(|l| step_mass(m, n, i, l).unwrap()).sum();
                    assert!((s - 1.0).abs() < 1e-12, "{} n={n} i={i}: {s}", m.name());
                }
            }
        }
    }

    #[test]
    fn precomputed_and_direct_step_mass_agree() {
        let m = make_mallows(3.0).unwrap();
        let s = StepSampler::new(&m, 20);
        for i in 1..=20 {
            for l in 1..=(20 - i + 1) {
                assert_eq!(s.step_mass(i, l), step_mass(&m, 20, i, l).unwrap());
            }
        }
    }

    #[test]
    fn single_support_point() {
        let m = make_kcm(4).unwrap();
        let mut rng = RngStream::new(1, 0);
        for n in 1..6 {
            assert_eq!(sample_step(&m, n, n, &mut rng).unwrap(), 1);
        }
    }

    #[test]
    fn kcm2_first_step_probability() {
        let m = make_kcm(2).unwrap();
        assert!((step_mass(&m, 2, 1, 1).unwrap() - 0.75).abs() < 1e-15);
        let mut rng = RngStream::new(3, 0);
        let draws = 200_000;
        let ones = (0..draws).filter(|_| sample_step(&m, 2, 1, &mut rng).unwrap() == 1).count();
        let p = ones as f64 / draws as f64;
        assert!((p - 0.75).abs() < 4.0 * (0.75f64 * 0.25 / draws as f64).sqrt());
    }

    #[test]
    fn uniform_step_frequencies() {
        let m = make_uniform();
        let sampler = StepSampler::new(&m, 10);
        let mut rng = RngStream::new(11, 0);
        let draws = 1_000_000;
        let mut counts = [0usize; 10];
        for _ in 0..draws {
            counts[sampler.sample_step(1, &mut rng) - 1] += 1;
        }
        for c in counts {
            assert!((c as f64 / draws as f64 - 0.1).abs() < 4e-3);
        }
    }

    #[test]
    fn on_the_fly_and_precomputed_steps_draw_identically() {
        let m = make_mallows(7.0).unwrap();
        let s = StepSampler::new(&m, 64);
        let mut a = RngStream::new(5, 2);
        let mut b = RngStream::new(5, 2);
        for i in 1..=64 {
            assert_eq!(s.sample_step(i, &mut a), sample_step(&m, 64, i, &mut b).unwrap());
        }
    }

    #[test]
    fn tiny_permutations() {
        let mut rng = RngStream::new(0, 0);
        let m = make_kcm(2).unwrap();
        assert_eq!(sample_permutation(&m, 1, &mut rng).unwrap().values(), &[1]);
        assert!(sample_permutation(&m, 0, &mut rng).is_err());
    }

    #[test]
    fn samples_are_deterministic() {
        let m = make_mallows(10.0).unwrap();
        let a = sample_permutation(&m, 1000, &mut RngStream::new(42, 9)).unwrap();
        let b = sample_permutation(&m, 1000, &mut RngStream::new(42, 9)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn oracle_preconditions() {
        let mut rng = RngStream::new(0, 0);
        assert!(sample_mallows_oracle(1.0, 5, &mut rng).is_err());
        assert!(sample_mallows_oracle(0.0, 5, &mut rng).is_err());
        assert!(sample_mallows_oracle(-0.5, 5, &mut rng).is_err());
        assert!(sample_kcm_oracle(0, 5, &mut rng).is_err());
        assert!(sample_mallows_oracle(0.5, 5, &mut rng).is_ok());
    }

    #[test]
    fn mallows_oracle_first_step() {
        // n=2, q=0.5: P(C=1) = (1 - 0.5) / (1 - 0.25) = 2/3
        let mut rng = RngStream::new(8, 0);
        let draws = 300_000;
        let ids = (0..draws)
            .filter(|_| sample_mallows_oracle(0.5, 2, &mut rng).unwrap().values() == [1, 2])
            .count();
        let p = ids as f64 / draws as f64;
        assert!((p - 2.0 / 3.0).abs() < 4.0 * (2.0 / 9.0 / draws as f64).sqrt());
        // q > 1 reverses the preference
        let ids = (0..draws)
            .filter(|_| sample_mallows_oracle(2.0, 2, &mut rng).unwrap().values() == [1, 2])
            .count();
        let p = ids as f64 / draws as f64;
        assert!((p - 1.0 / 3.0).abs() < 4.0 * (2.0 / 9.0 / draws as f64).sqrt());
    }

    #[test]
    fn kcm_oracle_n2() {
        let mut rng = RngStream::new(9, 0);
        let draws = 300_000;
        let ids = (0..draws)
            .filter(|_| sample_kcm_oracle(2, 2, &mut rng).unwrap().values() == [1, 2])
            .count();
        let p = ids as f64 / draws as f64;
        assert!((p - 0.75).abs() < 4.0 * (0.1875 / draws as f64).sqrt());
    }
}
