use rand::seq::index;
use serde::Serialize;

use crate::deck::CountTree;
use crate::error::{Error, Result};
use crate::permutation::{factorial, Permutation};
use crate::permuton::PermutonEvaluator;
use crate::rng::RngStream;

/// Exact enumeration is refused above this many `k`-tuples.
pub const EXACT_ENUMERATION_CAP: u128 = 100_000_000;

/// A pattern `tau` in `S_k`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Pattern {
    tau: Permutation,
}

impl Pattern {
    pub fn new(values: Vec<u32>) -> Result<Self> {
        Ok(Self {
            tau: Permutation::new(values)?,
        })
    }

    /// The inversion pattern `(2, 1)`.
    pub fn inversion() -> Self {
        Self {
            tau: Permutation::reversal(2),
        }
    }

    pub fn k(&self) -> usize {
        self.tau.len()
    }

    pub fn values(&self) -> &[u32] {
        self.tau.values()
    }

    fn rank(&self) -> usize {
        self.tau.rank()
    }
}

impl std::str::FromStr for Pattern {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let values = s
            .split(',')
            .map(|t| {
                t.trim()
                    .parse::<u32>()
                    .map_err(|_| Error::InvalidParameter(format!("bad pattern entry {t:?}")))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(values)
    }
}

/// Monte Carlo estimate with its binomial standard error.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct Estimate {
    pub estimate: f64,
    pub stderr: f64,
    pub samples: usize,
}

impl Estimate {
    fn from_hits(hits: usize, samples: usize) -> Self {
        let p = hits as f64 / samples as f64;
        Self {
            estimate: p,
            stderr: (p * (1.0 - p) / samples as f64).sqrt(),
            samples,
        }
    }
}

/// Number of pairs `s < t` with `sigma(s) > sigma(t)`, in `O(n log n)`.
pub fn count_inversions(sigma: &Permutation) -> u64 {
    let mut seen = CountTree::new(sigma.len());
    let mut inv = 0u64;
    for (t, &v) in sigma.values().iter().enumerate() {
        inv += (t - seen.count_le(v as usize)) as u64;
        seen.insert(v as usize);
    }
    inv
}

fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1u128, |acc, i| acc * (n - i) as u128 / (i + 1) as u128)
}

/// Lexicographic rank in `S_k` of the relative order of `values`.
fn pattern_rank(values: &[u32]) -> usize {
    let k = values.len();
    let mut rank = 0usize;
    for i in 0..k {
        let smaller_after = values[i + 1..].iter().filter(|&&v| v < values[i]).count();
        rank = rank * (k - i) + smaller_after;
    }
    rank
}

fn check_exact(n: usize, k: usize) -> Result<u128> {
    if k == 0 || k > n {
        return Err(Error::InvalidParameter(format!("pattern size {k} must be in 1..={n}")));
    }
    let total = binomial(n, k);
    if total > EXACT_ENUMERATION_CAP {
        return Err(Error::InstanceTooLarge(format!(
            "C({n}, {k}) = {total} exceeds the exact enumeration cap {EXACT_ENUMERATION_CAP}"
        )));
    }
    Ok(total)
}

/// Occurrence counts of every pattern in `S_k`, indexed by lexicographic rank.
pub fn pattern_counts_exact(sigma: &Permutation, k: usize) -> Result<Vec<u64>> {
    check_exact(sigma.len(), k)?;
    let n = sigma.len();
    let vals = sigma.values();
    let mut counts = vec![0u64; factorial(k)];
    let mut idx: Vec<usize> = (0..k).collect();
    let mut buf = vec![0u32; k];
    loop {
        for (b, &i) in buf.iter_mut().zip(&idx) {
            *b = vals[i];
        }
        counts[pattern_rank(&buf)] += 1;
        // next combination
        let mut p = k;
        while p > 0 && idx[p - 1] == n - k + p - 1 {
            p -= 1;
        }
        if p == 0 {
            break;
        }
        idx[p - 1] += 1;
        for q in p..k {
            idx[q] = idx[q - 1] + 1;
        }
    }
    Ok(counts)
}

/// Number of `k`-tuples of positions whose values realize `tau`.
pub fn pattern_count_exact(sigma: &Permutation, tau: &Pattern) -> Result<u64> {
    let n = sigma.len();
    let k = tau.k();
    check_exact(n, k)?;
    if k == 2 {
        let inv = count_inversions(sigma);
        return Ok(if tau.values() == [2, 1] {
            inv
        } else {
            binomial(n, 2) as u64 - inv
        });
    }
    Ok(pattern_counts_exact(sigma, k)?[tau.rank()])
}

/// `t(tau, sigma)`: fraction of increasing `k`-tuples of positions realizing `tau`.
pub fn pattern_density_exact(sigma: &Permutation, tau: &Pattern) -> Result<f64> {
    let total = check_exact(sigma.len(), tau.k())?;
    Ok(pattern_count_exact(sigma, tau)? as f64 / total as f64)
}

/// Unbiased estimate of `t(tau, sigma)` from uniformly random `k`-subsets.
pub fn pattern_density_mc(sigma: &Permutation, tau: &Pattern, samples: usize, rng: &mut RngStream) -> Result<Estimate> {
    let n = sigma.len();
    let k = tau.k();
    if k == 0 || k > n || samples == 0 {
        return Err(Error::InvalidParameter(format!(
            "need 1 <= k <= n and samples >= 1 (k={k}, n={n}, samples={samples})"
        )));
    }
    let target = tau.rank();
    let vals = sigma.values();
    let mut buf = vec![0u32; k];
    let mut positions = Vec::with_capacity(k);
    let mut hits = 0usize;
    for _ in 0..samples {
        positions.clear();
        positions.extend(index::sample(rng, n, k).into_iter());
        positions.sort_unstable();
        for (b, &i) in buf.iter_mut().zip(&positions) {
            *b = vals[i];
        }
        if pattern_rank(&buf) == target {
            hits += 1;
        }
    }
    Ok(Estimate::from_hits(hits, samples))
}

/// Unbiased estimate of `t(tau, mu_g)` from `k` i.i.d. permuton points per
/// trial; trials with coordinate ties are redrawn.
pub fn permuton_pattern_density_mc(
    ev: &PermutonEvaluator,
    tau: &Pattern,
    samples: usize,
    rng: &mut RngStream,
) -> Result<Estimate> {
    if samples == 0 {
        return Err(Error::InvalidParameter("samples must be positive".into()));
    }
    let k = tau.k();
    let target = tau.rank();
    let mut pts = vec![(0.0f64, 0.0f64); k];
    let mut ys = vec![0u32; k];
    let mut hits = 0usize;
    for _ in 0..samples {
        loop {
            for p in pts.iter_mut() {
                *p = ev.sample_point(rng);
            }
            pts.sort_by(|a, b| a.0.total_cmp(&b.0));
            let x_tie = pts.windows(2).any(|w| w[0].0 == w[1].0);
            let mut order: Vec<usize> = (0..k).collect();
            order.sort_by(|&a, &b| pts[a].1.total_cmp(&pts[b].1));
            let y_tie = order.windows(2).any(|w| pts[w[0]].1 == pts[w[1]].1);
            if x_tie || y_tie {
                continue;
            }
            for (r, &i) in order.iter().enumerate() {
                ys[i] = r as u32 + 1;
            }
            break;
        }
        if pattern_rank(&ys) == target {
            hits += 1;
        }
    }
    Ok(Estimate::from_hits(hits, samples))
}
