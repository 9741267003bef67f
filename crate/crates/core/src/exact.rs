//! Exact small-`n` laws.
//!
//! For a permutation `pi`, step `i` must pick the deck position
//! `l = pi(i) - #{t < i : pi(t) < pi(i)}`, so
//! `P(pi) = prod_i [g(a_i/n) - g((a_i+1)/n)] / g((i-1)/n)` with
//! `a_i = (i-1) + (l-1)` an exact integer.

use serde::Serialize;

use crate::deck::{CountTree, FenwickDeck};
use crate::error::{Error, Result};
use crate::model::GModel;
use crate::numeric::ln_1m_exp;
use crate::permutation::{factorial, Permutation};
use crate::rng::RngStream;
use crate::sampler::{step_mass, StepSampler};

/// Largest `n` accepted by [`exact_probability`].
pub const MAX_EXACT_N: usize = 10_000;
/// Largest `n` accepted by full enumeration of `S_n`.
pub const MAX_ENUMERATION_N: usize = 8;
/// Largest `n` accepted by [`tv_distance_empirical`].
pub const MAX_TV_N: usize = 7;

/// `ln P(pi)` from the product form, accumulated in log space.
pub fn exact_log_probability(m: &GModel, pi: &Permutation) -> Result<f64> {
    let n = pi.len();
    if n > MAX_EXACT_N {
        return Err(Error::InstanceTooLarge(format!("exact probability needs n <= {MAX_EXACT_N}, got {n}")));
    }
    let nf = n as f64;
    let mut seen = CountTree::new(n);
    let mut total = 0.0;
    for (idx, &v) in pi.values().iter().enumerate() {
        let below = seen.count_le(v as usize);
        seen.insert(v as usize);
        let a = idx + v as usize - 1 - below;
        let head = m.log_g(a as f64 / nf);
        let body = if a + 1 == n {
            head
        } else {
            // ln(g(a/n) - g((a+1)/n))
            head + ln_1m_exp(head - m.log_g((a + 1) as f64 / nf))
        };
        total += body - m.log_g(idx as f64 / nf);
    }
    Ok(total)
}

/// `P(pi)` under `PERM(g, n)`.
pub fn exact_probability(m: &GModel, pi: &Permutation) -> Result<f64> {
    exact_log_probability(m, pi).map(f64::exp)
}

/// `P(pi)` by replaying `pi` through the deck and multiplying the step masses.
pub fn chain_rule_probability(m: &GModel, pi: &Permutation) -> Result<f64> {
    let n = pi.len();
    if n > MAX_EXACT_N {
        return Err(Error::InstanceTooLarge(format!("exact probability needs n <= {MAX_EXACT_N}, got {n}")));
    }
    let mut deck = FenwickDeck::new(n);
    let mut p = 1.0;
    for (idx, &v) in pi.values().iter().enumerate() {
        let l = deck.rank(v as usize);
        deck.select_remove(l)?;
        p *= step_mass(m, n, idx + 1, l)?;
    }
    Ok(p)
}

/// The full law on `S_n`, indexed by lexicographic rank.
#[derive(Debug, Clone, Serialize)]
pub struct Distribution {
    pub n: usize,
    pub probs: Vec<f64>,
}

impl Distribution {
    pub fn prob(&self, pi: &Permutation) -> f64 {
        self.probs[pi.rank()]
    }

    pub fn sum(&self) -> f64 {
        self.probs.iter().sum()
    }

    /// The most probable permutation (lowest rank on ties).
    pub fn mode(&self) -> Permutation {
        let best = self
            .probs
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |best, (r, &p)| if p > best.1 { (r, p) } else { best });
        Permutation::unrank(self.n, best.0)
    }

    pub fn iter(&self) -> impl Iterator<Item = (Permutation, f64)> + '_ {
        Permutation::all(self.n).zip(self.probs.iter().copied())
    }
}

fn check_enumeration(n: usize, cap: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::InvalidParameter("n must be positive".into()));
    }
    if n > cap {
        return Err(Error::InstanceTooLarge(format!("enumerating S_{n} needs n <= {cap}")));
    }
    Ok(())
}

pub fn enumerate_distribution(m: &GModel, n: usize) -> Result<Distribution> {
    check_enumeration(n, MAX_ENUMERATION_N)?;
    let probs = Permutation::all(n)
        .map(|pi| exact_probability(m, &pi))
        .collect::<Result<Vec<_>>>()?;
    Ok(Distribution { n, probs })
}

/// `max |P(pi) - P(pi^{-1})|` over `S_n`.
pub fn check_inverse_symmetry(m: &GModel, n: usize) -> Result<f64> {
    let dist = enumerate_distribution(m, n)?;
    Ok(dist
        .iter()
        .map(|(pi, p)| (p - dist.prob(&pi.inverse())).abs())
        .fold(0.0, f64::max))
}

/// Total variation distance between empirical rank counts and an exact law.
pub fn tv_distance(dist: &Distribution, counts: &[u64]) -> f64 {
    let total: u64 = counts.iter().sum();
    0.5 * dist
        .probs
        .iter()
        .zip(counts)
        .map(|(&p, &c)| (c as f64 / total as f64 - p).abs())
        .sum::<f64>()
}

/// Rank counts of `samples` draws from `draw`.
pub fn rank_counts(n: usize, samples: usize, mut draw: impl FnMut() -> Permutation) -> Vec<u64> {
    let mut counts = vec![0u64; factorial(n)];
    for _ in 0..samples {
        counts[draw().rank()] += 1;
    }
    counts
}

/// TV distance between `samples` draws of the card sampler and the exact law.
pub fn tv_distance_empirical(m: &GModel, n: usize, samples: usize, rng: &mut RngStream) -> Result<f64> {
    check_enumeration(n, MAX_TV_N)?;
    if samples == 0 {
        return Err(Error::InvalidParameter("samples must be positive".into()));
    }
    let dist = enumerate_distribution(m, n)?;
    let sampler = StepSampler::new(m, n);
    let counts = rank_counts(n, samples, || sampler.sample(rng));
    Ok(tv_distance(&dist, &counts))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{make_kcm, make_mallows, make_uniform};
    use proptest::prelude::*;

    fn builtins() -> Vec<GModel> {
        vec![
            make_uniform(),
            make_mallows(1.0).unwrap(),
            make_mallows(-3.0).unwrap(),
            make_kcm(2).unwrap(),
            make_kcm(7).unwrap(),
        ]
    }

    #[test]
    fn single_card() {
        for m in builtins() {
            assert_eq!(exact_probability(&m, &Permutation::identity(1)).unwrap(), 1.0);
        }
    }

    #[test]
    fn uniform_is_flat() {
        let m = make_uniform();
        for n in 1..=MAX_ENUMERATION_N {
            let inv = 1.0 / factorial(n) as f64;
            for (_, p) in enumerate_distribution(&m, n).unwrap().iter() {
                assert!((p - inv).abs() < 1e-13 * inv, "n={n}");
            }
        }
    }

    #[test]
    fn kcm2_two_cards() {
        let m = make_kcm(2).unwrap();
        let p = exact_probability(&m, &Permutation::identity(2)).unwrap();
        assert!((p - 0.75).abs() < 1e-15);
    }

    #[test]
    fn normalization_and_mode() {
        for m in builtins() {
            for n in 1..=MAX_ENUMERATION_N {
                let s = enumerate_distribution(&m, n).unwrap().sum();
                assert!((s - 1.0).abs() < 1e-12, "{} n={n}: {s}", m.name());
            }
        }
        let d = enumerate_distribution(&make_kcm(2).unwrap(), 3).unwrap();
        assert_eq!(d.mode(), Permutation::identity(3));
        let d = enumerate_distribution(&make_uniform(), 2).unwrap();
        assert_eq!(d.probs, vec![0.5, 0.5]);
        assert!(enumerate_distribution(&make_uniform(), 9).is_err());
    }

    #[test]
    fn inverse_symmetry() {
        for m in builtins() {
            for n in 1..=MAX_ENUMERATION_N {
                let d = check_inverse_symmetry(&m, n).unwrap();
                assert!(d < 1e-13, "{} n={n}: {d}", m.name());
            }
        }
    }

    #[test]
    fn tv_shrinks_with_samples() {
        let m = make_kcm(2).unwrap();
        let median = |samples: usize| {
            let mut v: Vec<f64> = (0..5)
                .map(|seed| tv_distance_empirical(&m, 4, samples, &mut RngStream::new(seed, 0)).unwrap())
                .collect();
            v.sort_by(f64::total_cmp);
            v[2]
        };
        let (a, b, c) = (median(10_000), median(100_000), median(1_000_000));
        assert!(a > b && b > c, "{a} {b} {c}");
        assert!(c < 0.01);
    }

    #[test]
    fn uniform_three_cards_tv() {
        let tv = tv_distance_empirical(&make_uniform(), 3, 600_000, &mut RngStream::new(2, 0)).unwrap();
        assert!(tv < 0.005, "{tv}");
    }

    proptest! {
        #[test]
        fn chain_rule_agrees(perm in (1usize..=8).prop_flat_map(|n| Just((1..=n as u32).collect::<Vec<_>>()).prop_shuffle()), which in 0usize..5) {
            let m = &builtins()[which];
            let pi = Permutation::new(perm).unwrap();
            let a = exact_probability(m, &pi).unwrap();
            let b = chain_rule_probability(m, &pi).unwrap();
            prop_assert!((a - b).abs() <= 1e-13 * a.max(b), "{} vs {}", a, b);
        }

        // rounding grows with the number of factors; both routes stay within
        // a few ulps per factor
        #[test]
        fn chain_rule_agrees_long(perm in Just((1..=80u32).collect::<Vec<_>>()).prop_shuffle(), which in 0usize..5) {
            let m = &builtins()[which];
            let pi = Permutation::new(perm).unwrap();
            let a = exact_log_probability(m, &pi).unwrap();
            let b = chain_rule_probability(m, &pi).unwrap().ln();
            prop_assert!((a - b).abs() <= 1e-15 * 80.0 * a.abs().max(1.0), "{} vs {}", a, b);
        }
    }
}
