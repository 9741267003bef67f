use std::fmt;

use crate::error::{Error, Result};

/// A bijection of `[n]` stored with one-based values `sigma(1..=n)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Permutation {
    sigma: Vec<u32>,
}

impl Permutation {
    /// Validates that `values` is a one-based bijection.
    pub fn new(values: Vec<u32>) -> Result<Self> {
        let n = values.len();
        if n == 0 {
            return Err(Error::InvalidParameter("permutation must be nonempty".into()));
        }
        let mut seen = vec![false; n];
        for &v in &values {
            let idx = v as usize;
            if idx == 0 || idx > n || seen[idx - 1] {
                return Err(Error::InvalidParameter(format!(
                    "not a bijection of [{n}]: offending value {v}"
                )));
            }
            seen[idx - 1] = true;
        }
        Ok(Self { sigma: values })
    }

    pub(crate) fn from_raw(sigma: Vec<u32>) -> Self {
        debug_assert!(Self::new(sigma.clone()).is_ok());
        Self { sigma }
    }

    pub fn identity(n: usize) -> Self {
        Self {
            sigma: (1..=n as u32).collect(),
        }
    }

    pub fn reversal(n: usize) -> Self {
        Self {
            sigma: (1..=n as u32).rev().collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.sigma.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sigma.is_empty()
    }

    /// `sigma(i)` for one-based `i`.
    pub fn at(&self, i: usize) -> u32 {
        self.sigma[i - 1]
    }

    pub fn values(&self) -> &[u32] {
        &self.sigma
    }

    pub fn inverse(&self) -> Self {
        let mut inv = vec![0u32; self.sigma.len()];
        for (i, &v) in self.sigma.iter().enumerate() {
            inv[v as usize - 1] = i as u32 + 1;
        }
        Self { sigma: inv }
    }

    pub fn is_involution(&self) -> bool {
        self.sigma
            .iter()
            .enumerate()
            .all(|(i, &v)| self.sigma[v as usize - 1] as usize == i + 1)
    }

    /// Lexicographic rank in `0..n!` (Lehmer code). Intended for small `n`.
    pub fn rank(&self) -> usize {
        let n = self.sigma.len();
        let mut rank = 0usize;
        for i in 0..n {
            let smaller_after = self.sigma[i + 1..]
                .iter()
                .filter(|&&v| v < self.sigma[i])
                .count();
            rank = rank * (n - i) + smaller_after;
        }
        rank
    }

    /// Inverse of [`rank`](Self::rank).
    pub fn unrank(n: usize, mut rank: usize) -> Self {
        let mut digits = vec![0usize; n];
        for i in (0..n).rev() {
            let base = n - i;
            digits[i] = rank % base;
            rank /= base;
        }
        let mut pool: Vec<u32> = (1..=n as u32).collect();
        let sigma = digits.into_iter().map(|d| pool.remove(d)).collect();
        Self { sigma }
    }

    /// Advances to the lexicographically next permutation; `false` at the last one.
    pub fn next_lexicographic(&mut self) -> bool {
        let s = &mut self.sigma;
        let n = s.len();
        if n < 2 {
            return false;
        }
        let mut i = n - 1;
        while i > 0 && s[i - 1] >= s[i] {
            i -= 1;
        }
        if i == 0 {
            return false;
        }
        let mut j = n - 1;
        while s[j] <= s[i - 1] {
            j -= 1;
        }
        s.swap(i - 1, j);
        s[i..].reverse();
        true
    }

    /// All permutations of `[n]` in lexicographic order.
    pub fn all(n: usize) -> impl Iterator<Item = Permutation> {
        let mut current = Some(Self::identity(n));
        std::iter::from_fn(move || {
            let out = current.take()?;
            let mut next = out.clone();
            if next.next_lexicographic() {
                current = Some(next);
            }
            Some(out)
        })
    }
}

impl fmt::Display for Permutation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for v in &self.sigma {
            if !first {
                f.write_str(" ")?;
            }
            write!(f, "{v}")?;
            first = false;
        }
        Ok(())
    }
}

pub(crate) fn factorial(n: usize) -> usize {
    (1..=n).product()
}
