use crate::error::{Error, Result};
use crate::permutation::Permutation;
use crate::permuton::PermutonEvaluator;

fn check_lattice(sigma: &Permutation, i: usize, j: usize) -> Result<()> {
    let n = sigma.len();
    if i > n {
        return Err(Error::out_of_range("i", i as f64, 0.0, n as f64));
    }
    if j > n {
        return Err(Error::out_of_range("j", j as f64, 0.0, n as f64));
    }
    Ok(())
}

/// `F_sigma(i/n, j/n) = #{t <= i : sigma(t) <= j} / n`, in `O(i)`.
pub fn empirical_f(sigma: &Permutation, i: usize, j: usize) -> Result<f64> {
    check_lattice(sigma, i, j)?;
    let count = sigma.values()[..i].iter().filter(|&&v| v as usize <= j).count();
    Ok(count as f64 / sigma.len() as f64)
}

/// `V_sigma(i/n, j/n) = i/n + j/n - F_sigma(i/n, j/n)`.
pub fn empirical_v(sigma: &Permutation, i: usize, j: usize) -> Result<f64> {
    check_lattice(sigma, i, j)?;
    let n = sigma.len();
    let count = sigma.values()[..i].iter().filter(|&&v| v as usize <= j).count();
    Ok((i + j - count) as f64 / n as f64)
}

/// Integer counts `#{t <= rows[a] : sigma(t) <= cols[b]}` on a sub-lattice.
///
/// Built in `O(n log G + G^2)` by bucketing each point and taking 2-D prefix
/// sums, so the full `n x n` lattice is never materialized.
#[derive(Debug, Clone)]
pub struct GridCdf {
    n: usize,
    rows: Vec<usize>,
    cols: Vec<usize>,
    counts: Vec<u32>,
}

impl GridCdf {
    /// `rows` and `cols` must be nondecreasing lattice indices in `0..=n`.
    pub fn new(sigma: &Permutation, rows: Vec<usize>, cols: Vec<usize>) -> Result<Self> {
        let n = sigma.len();
        for w in [&rows, &cols] {
            if w.windows(2).any(|p| p[0] > p[1]) || w.iter().any(|&v| v > n) {
                return Err(Error::InvalidParameter(
                    "grid indices must be nondecreasing and at most n".into(),
                ));
            }
        }
        let (g_r, g_c) = (rows.len(), cols.len());
        let mut counts = vec![0u32; g_r * g_c];
        for (t, &v) in sigma.values().iter().enumerate() {
            let a = rows.partition_point(|&r| r < t + 1);
            let b = cols.partition_point(|&c| c < v as usize);
            if a < g_r && b < g_c {
                counts[a * g_c + b] += 1;
            }
        }
        for a in 0..g_r {
            for b in 0..g_c {
                let mut s = counts[a * g_c + b];
                if a > 0 {
                    s += counts[(a - 1) * g_c + b];
                }
                if b > 0 {
                    s += counts[a * g_c + b - 1];
                }
                if a > 0 && b > 0 {
                    s -= counts[(a - 1) * g_c + b - 1];
                }
                counts[a * g_c + b] = s;
            }
        }
        Ok(Self { n, rows, cols, counts })
    }

    /// Every lattice point `0..=n` in both directions; `O(n^2)` memory.
    pub fn full(sigma: &Permutation) -> Self {
        let n = sigma.len();
        Self::new(sigma, (0..=n).collect(), (0..=n).collect()).expect("full lattice is valid")
    }

    pub fn rows(&self) -> &[usize] {
        &self.rows
    }

    pub fn cols(&self) -> &[usize] {
        &self.cols
    }

    pub fn count(&self, a: usize, b: usize) -> u32 {
        self.counts[a * self.cols.len() + b]
    }

    /// `F_sigma(rows[a]/n, cols[b]/n)`.
    pub fn f(&self, a: usize, b: usize) -> f64 {
        self.count(a, b) as f64 / self.n as f64
    }

    /// `V_sigma(rows[a]/n, cols[b]/n)`.
    pub fn v(&self, a: usize, b: usize) -> f64 {
        (self.rows[a] + self.cols[b] - self.count(a, b) as usize) as f64 / self.n as f64
    }
}

/// Limit cdf values `F_g(a/G, b/G)` for `a, b = 1..=G`, reusable across
/// replicas and sizes.
#[derive(Debug, Clone)]
pub struct LlnReference {
    grid: usize,
    values: Vec<f64>,
}

impl LlnReference {
    pub fn new(ev: &PermutonEvaluator, grid: usize) -> Result<Self> {
        if grid < 2 {
            return Err(Error::InvalidParameter("grid must be at least 2".into()));
        }
        let g = grid as f64;
        let values = (1..=grid)
            .flat_map(|a| (1..=grid).map(move |b| (a as f64 / g, b as f64 / g)))
            .map(|(x, y)| ev.f_cdf(x, y))
            .collect();
        Ok(Self { grid, values })
    }

    pub fn grid(&self) -> usize {
        self.grid
    }

    /// `max |F_sigma(ceil(n x)/n, ceil(n y)/n) - F_g(x, y)|` over the grid.
    pub fn distance(&self, sigma: &Permutation) -> f64 {
        let n = sigma.len();
        let g = self.grid;
        let lattice: Vec<usize> = (1..=g).map(|a| (n * a).div_ceil(g)).collect();
        let cdf = GridCdf::new(sigma, lattice.clone(), lattice).expect("lattice within range");
        let mut worst: f64 = 0.0;
        for a in 0..g {
            for b in 0..g {
                worst = worst.max((cdf.f(a, b) - self.values[a * g + b]).abs());
            }
        }
        worst
    }
}

/// Distance between `F_sigma` and the limit cdf on a `G x G` grid.
pub fn lln_distance(sigma: &Permutation, ev: &PermutonEvaluator, grid: usize) -> Result<f64> {
    Ok(LlnReference::new(ev, grid)?.distance(sigma))
}

/// `Z = sqrt(n) (V_sigma(i/n, j/n) - V_g(i/n, j/n))`.
pub fn scaled_fluctuation(sigma: &Permutation, ev: &PermutonEvaluator, i: usize, j: usize) -> Result<f64> {
    let v_emp = empirical_v(sigma, i, j)?;
    let n = sigma.len() as f64;
    let v_lim = ev.v_of(i as f64 / n, j as f64 / n);
    Ok(n.sqrt() * (v_emp - v_lim))
}

/// `max |Z_{i,j}|` over lattice points `i = ceil(a x_cap n / G)`, `j = ceil(b n / G)`.
pub fn max_abs_fluctuation(sigma: &Permutation, ev: &PermutonEvaluator, grid: usize, x_cap: f64) -> Result<f64> {
    if grid < 1 || !(x_cap > 0.0 && x_cap <= 1.0) {
        return Err(Error::InvalidParameter("grid must be positive and x_cap in (0, 1]".into()));
    }
    let n = sigma.len();
    let nf = n as f64;
    let rows: Vec<usize> = (1..=grid)
        .map(|a| ((a as f64 * x_cap * nf / grid as f64).floor() as usize).min(n))
        .collect();
    let cols: Vec<usize> = (1..=grid).map(|b| (n * b).div_ceil(grid)).collect();
    let cdf = GridCdf::new(sigma, rows.clone(), cols.clone())?;
    let mut worst: f64 = 0.0;
    for (a, &i) in rows.iter().enumerate() {
        for (b, &j) in cols.iter().enumerate() {
            let z = nf.sqrt() * (cdf.v(a, b) - ev.v_of(i as f64 / nf, j as f64 / nf));
            worst = worst.max(z.abs());
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{make_kcm, make_uniform};
    use proptest::prelude::*;

    fn p(v: &[u32]) -> Permutation {
        Permutation::new(v.to_vec()).unwrap()
    }

    #[test]
    fn small_examples() {
        let id = Permutation::identity(7);
        for i in 0..=7 {
            assert_eq!(empirical_f(&id, i, i).unwrap(), i as f64 / 7.0);
            assert_eq!(empirical_v(&id, i, i).unwrap(), i as f64 / 7.0);
        }
        let s = p(&[2, 1, 3]);
        assert_eq!(empirical_f(&s, 1, 1).unwrap(), 0.0);
        for j in 0..=3 {
            assert_eq!(empirical_f(&s, 3, j).unwrap(), j as f64 / 3.0);
            assert_eq!(empirical_v(&s, 0, j).unwrap(), j as f64 / 3.0);
        }
        assert_eq!(empirical_v(&p(&[2, 1]), 1, 1).unwrap(), 1.0);
        assert!(empirical_f(&s, 4, 0).is_err());
        assert!(empirical_v(&s, 0, 4).is_err());
    }

    #[test]
    fn identity_against_uniform_limit() {
        let ev = PermutonEvaluator::new(&make_uniform()).unwrap();
        let d = lln_distance(&Permutation::identity(100), &ev, 50).unwrap();
        // max |min(x,y) - xy| = 1/4 at (1/2, 1/2)
        assert!((d - 0.25).abs() < 1e-9, "{d}");
        assert!(lln_distance(&Permutation::identity(10), &ev, 1).is_err());
    }

    #[test]
    fn off_lattice_grid_moves_distance_by_at_most_two_over_n() {
        let ev = PermutonEvaluator::new(&make_kcm(2).unwrap()).unwrap();
        let m = make_kcm(2).unwrap();
        let sigma = crate::sampler::sample_permutation(&m, 300, &mut crate::rng::RngStream::new(2, 0)).unwrap();
        // G = 30 divides n (aligned), G = 37 does not
        let aligned = lln_distance(&sigma, &ev, 30).unwrap();
        let off = lln_distance(&sigma, &ev, 37).unwrap();
        let n = 300.0;
        // each grid's value is within 2/n of the sup over all lattice points,
        // which both underestimate; compare against the full lattice
        let full = GridCdf::full(&sigma);
        let mut sup: f64 = 0.0;
        for i in 0..=300 {
            for j in 0..=300 {
                sup = sup.max((full.f(i, j) - ev.f_cdf(i as f64 / n, j as f64 / n)).abs());
            }
        }
        assert!(aligned <= sup + 1e-12);
        assert!(off <= sup + 2.0 / n);
    }

    #[test]
    fn fluctuation_vanishes_on_boundary_rows() {
        let m = make_kcm(2).unwrap();
        let ev = PermutonEvaluator::new(&m).unwrap();
        let sigma = crate::sampler::sample_permutation(&m, 500, &mut crate::rng::RngStream::new(4, 0)).unwrap();
        for j in [0, 17, 250, 500] {
            assert_eq!(scaled_fluctuation(&sigma, &ev, 0, j).unwrap(), 0.0);
        }
        for i in [0, 3, 333, 500] {
            assert_eq!(scaled_fluctuation(&sigma, &ev, i, 500).unwrap(), 0.0);
        }
    }

    proptest! {
        #[test]
        fn grid_cdf_matches_direct_counts(perm in Just((1..=40u32).collect::<Vec<_>>()).prop_shuffle(),
                                          rows in proptest::collection::vec(0usize..=40, 1..6),
                                          cols in proptest::collection::vec(0usize..=40, 1..6)) {
            let sigma = Permutation::new(perm).unwrap();
            let mut rows = rows; rows.sort();
            let mut cols = cols; cols.sort();
            let g = GridCdf::new(&sigma, rows.clone(), cols.clone()).unwrap();
            for (a, &i) in rows.iter().enumerate() {
                for (b, &j) in cols.iter().enumerate() {
                    prop_assert_eq!(g.f(a, b), empirical_f(&sigma, i, j).unwrap());
                    prop_assert!((g.v(a, b) - empirical_v(&sigma, i, j).unwrap()).abs() < 1e-15);
                }
            }
        }

        #[test]
        fn boundary_marginals_are_exact(perm in Just((1..=25u32).collect::<Vec<_>>()).prop_shuffle()) {
            let sigma = Permutation::new(perm).unwrap();
            let g = GridCdf::full(&sigma);
            for k in 0..=25 {
                prop_assert_eq!(g.count(k, 25) as usize, k);
                prop_assert_eq!(g.count(25, k) as usize, k);
                prop_assert_eq!(g.count(0, k), 0);
                prop_assert_eq!(g.v(0, k), k as f64 / 25.0);
                prop_assert_eq!(g.v(k, 25), 1.0);
            }
        }
    }
}
