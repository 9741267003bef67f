use crate::error::{Error, Result};

/// The remaining old deck `{1..=n}` minus removed cards, as a Fenwick tree of
/// 0/1 counts. Selection of the `c`-th smallest remaining card uses binary
/// lifting, so both `select_remove` and `rank` are `O(log n)`.
#[derive(Debug, Clone)]
pub struct FenwickDeck {
    tree: Vec<u32>,
    n: usize,
    remaining: usize,
    top_bit: usize,
}

impl FenwickDeck {
    /// A full deck with cards `1..=n`.
    pub fn new(n: usize) -> Self {
        // all-ones array: node i covers lowbit(i) cards
        let tree = (0..=n).map(|i| (i & i.wrapping_neg()) as u32).collect();
        let top_bit = if n == 0 { 0 } else { 1 << (usize::BITS - 1 - n.leading_zeros()) };
        Self {
            tree,
            n,
            remaining: n,
            top_bit,
        }
    }

    pub fn capacity(&self) -> usize {
        self.n
    }

    pub fn remaining(&self) -> usize {
        self.remaining
    }

    /// Removes and returns the `c`-th smallest remaining card (one-based).
    pub fn select_remove(&mut self, c: usize) -> Result<u32> {
        if c == 0 || c > self.remaining {
            return Err(Error::out_of_range("card index", c as f64, 1.0, self.remaining as f64));
        }
        Ok(self.select_remove_unchecked(c))
    }

    #[inline]
    pub(crate) fn select_remove_unchecked(&mut self, c: usize) -> u32 {
        debug_assert!(c >= 1 && c <= self.remaining);
        // largest position with prefix count < c
        let mut pos = 0usize;
        let mut left = c as u32;
        let mut step = self.top_bit;
        while step > 0 {
            let next = pos + step;
            if next <= self.n && self.tree[next] < left {
                pos = next;
                left -= self.tree[next];
            }
            step >>= 1;
        }
        let card = pos + 1;
        let mut i = card;
        while i <= self.n {
            self.tree[i] -= 1;
            i += i & i.wrapping_neg();
        }
        self.remaining -= 1;
        card as u32
    }

    /// Number of remaining cards with label `<= card`.
    pub fn rank(&self, card: usize) -> usize {
        let mut i = card.min(self.n);
        let mut s = 0usize;
        while i > 0 {
            s += self.tree[i] as usize;
            i &= i - 1;
        }
        s
    }
}

/// Fenwick tree of counts over values `1..=n`, used to count how many
/// already-seen values lie below a threshold.
#[derive(Debug, Clone)]
pub(crate) struct CountTree {
    tree: Vec<u32>,
}

impl CountTree {
    pub(crate) fn new(n: usize) -> Self {
        Self { tree: vec![0; n + 1] }
    }

    pub(crate) fn insert(&mut self, value: usize) {
        let mut i = value;
        while i < self.tree.len() {
            self.tree[i] += 1;
            i += i & i.wrapping_neg();
        }
    }

    /// Number of inserted values `<= value`.
    pub(crate) fn count_le(&self, value: usize) -> usize {
        let mut i = value.min(self.tree.len() - 1);
        let mut s = 0usize;
        while i > 0 {
            s += self.tree[i] as usize;
            i &= i - 1;
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn fresh_deck_selects_in_order() {
        let mut d = FenwickDeck::new(5);
        assert_eq!(d.select_remove(3).unwrap(), 3);
        assert_eq!(d.select_remove(3).unwrap(), 4);
        assert_eq!(d.remaining(), 3);
        assert_eq!(d.rank(5), 3);
    }

    #[test]
    fn rejects_out_of_range() {
        let mut d = FenwickDeck::new(3);
        assert!(d.select_remove(0).is_err());
        assert!(d.select_remove(4).is_err());
        d.select_remove(1).unwrap();
        assert!(d.select_remove(3).is_err());
    }

    #[test]
    fn exhaustive_n8_matches_naive_list() {
        // every sequence of choices c_i in 1..=remaining, i.e. all 8! paths
        fn walk(deck: &FenwickDeck, naive: &[u32]) {
            for c in 1..=naive.len() {
                let mut d = deck.clone();
                let mut list = naive.to_vec();
                assert_eq!(d.select_remove(c).unwrap(), list.remove(c - 1));
                assert_eq!(d.remaining(), list.len());
                walk(&d, &list);
            }
        }
        walk(&FenwickDeck::new(8), &(1..=8).collect::<Vec<_>>());
    }

    proptest! {
        #[test]
        fn matches_naive_reference(n in 1usize..300, seed in any::<u64>()) {
            let mut rng = crate::rng::RngStream::new(seed, 0);
            let mut deck = FenwickDeck::new(n);
            let mut list: Vec<u32> = (1..=n as u32).collect();
            while !list.is_empty() {
                let c = rng.uniform_index(list.len());
                let probe = rng.uniform_index(n);
                prop_assert_eq!(deck.rank(probe), list.iter().filter(|&&v| v as usize <= probe).count());
                prop_assert_eq!(deck.select_remove(c).unwrap(), list.remove(c - 1));
            }
        }
    }
}
