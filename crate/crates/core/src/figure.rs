//! Permutation-matrix heatmaps and band-width profiles.

use std::io::Write;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::permutation::Permutation;

/// Point counts of `(i/n, sigma(i)/n)` on a `bins x bins` grid. Cell
/// `(row, col)` covers `y` bin `row` and `x` bin `col`, with row 0 at the
/// bottom.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct BinMatrix {
    pub bins: usize,
    pub counts: Vec<u32>,
}

impl BinMatrix {
    pub fn get(&self, row: usize, col: usize) -> u32 {
        self.counts[row * self.bins + col]
    }

    pub fn max(&self) -> u32 {
        self.counts.iter().copied().max().unwrap_or(0)
    }

    /// Plain (P2) greymap, top row first so the origin lands bottom-left.
    /// Each `comments` line is written as a `#` comment after the magic.
    pub fn write_pgm(&self, mut w: impl Write, comments: &[String]) -> std::io::Result<()> {
        writeln!(w, "P2")?;
        writeln!(w, "# origin bottom-left; x = i/n to the right, y = sigma(i)/n upward")?;
        writeln!(w, "# grey = round(255 * count / max count)")?;
        for c in comments {
            writeln!(w, "# {c}")?;
        }
        writeln!(w, "{} {}", self.bins, self.bins)?;
        writeln!(w, "255")?;
        let max = self.max().max(1) as f64;
        for row in (0..self.bins).rev() {
            let line: Vec<String> = (0..self.bins)
                .map(|col| ((255.0 * self.get(row, col) as f64 / max).round() as u32).to_string())
                .collect();
            writeln!(w, "{}", line.join(" "))?;
        }
        Ok(())
    }

    /// Counts as CSV, one line per `y` bin starting from the bottom.
    pub fn write_csv(&self, mut w: impl Write, comments: &[String]) -> std::io::Result<()> {
        for c in comments {
            writeln!(w, "# {c}")?;
        }
        for row in 0..self.bins {
            let line: Vec<String> = (0..self.bins).map(|col| self.get(row, col).to_string()).collect();
            writeln!(w, "{}", line.join(","))?;
        }
        Ok(())
    }
}

/// Bins the points of `sigma`; position `i` goes to bin `ceil(i B / n) - 1`.
pub fn bin_matrix(sigma: &Permutation, bins: usize) -> Result<BinMatrix> {
    if bins == 0 {
        return Err(Error::InvalidParameter("bin count must be positive".into()));
    }
    let n = sigma.len();
    let bin = |i: usize| (i * bins).div_ceil(n) - 1;
    let mut counts = vec![0u32; bins * bins];
    for (idx, &v) in sigma.values().iter().enumerate() {
        counts[bin(v as usize) * bins + bin(idx + 1)] += 1;
    }
    Ok(BinMatrix { bins, counts })
}

/// Spread of the displacements `sigma(i) - i` over positions with `i/n` in
/// `[lo, hi)`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct BandWidth {
    pub lo: f64,
    pub hi: f64,
    pub points: usize,
    /// Inter-decile range of `sigma(i) - i`.
    pub width: f64,
}

fn quantile(sorted: &[i64], p: f64) -> f64 {
    let h = p * (sorted.len() - 1) as f64;
    let (k, frac) = (h.floor() as usize, h.fract());
    let next = sorted[(k + 1).min(sorted.len() - 1)];
    sorted[k] as f64 + frac * (next - sorted[k]) as f64
}

pub fn band_width_profile(sigma: &Permutation, windows: &[(f64, f64)]) -> Result<Vec<BandWidth>> {
    let n = sigma.len();
    windows
        .iter()
        .map(|&(lo, hi)| {
            let mut d: Vec<i64> = sigma
                .values()
                .iter()
                .enumerate()
                .filter(|(idx, _)| {
                    let x = (idx + 1) as f64 / n as f64;
                    lo <= x && x < hi
                })
                .map(|(idx, &v)| v as i64 - (idx + 1) as i64)
                .collect();
            if d.is_empty() {
                return Err(Error::InvalidParameter(format!("window [{lo}, {hi}) holds no positions")));
            }
            d.sort_unstable();
            Ok(BandWidth {
                lo,
                hi,
                points: d.len(),
                width: quantile(&d, 0.9) - quantile(&d, 0.1),
            })
        })
        .collect()
}

/// Windows `[a, a + step)` for `a = start, start + step, ...` below `end`.
pub fn default_windows(start: f64, end: f64, step: f64) -> Vec<(f64, f64)> {
    let count = ((end - start) / step).round() as usize;
    // snap edges so that e.g. 0.1 + 0.2 lands on 0.3
    let edge = |k: usize| ((start + k as f64 * step) * 1e12).round() / 1e12;
    (0..count).map(|k| (edge(k), edge(k + 1))).collect()
}

/// Ratio of each width to the mean width, as `(min, max)`.
pub fn flatness(profile: &[BandWidth]) -> (f64, f64) {
    let mean = profile.iter().map(|b| b.width).sum::<f64>() / profile.len() as f64;
    profile.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), b| {
        (lo.min(b.width / mean), hi.max(b.width / mean))
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_fills_the_diagonal() {
        let m = bin_matrix(&Permutation::identity(1000), 16).unwrap();
        for r in 0..16 {
            for c in 0..16 {
                assert_eq!(m.get(r, c) > 0, r == c);
            }
        }
        assert_eq!(m.counts.iter().sum::<u32>(), 1000);
    }

    #[test]
    fn reversal_is_antidiagonal_and_bottom_left_origin() {
        let m = bin_matrix(&Permutation::reversal(8), 4).unwrap();
        assert_eq!(m.get(3, 0), 2);
        assert_eq!(m.get(0, 3), 2);
        let mut buf = Vec::new();
        m.write_pgm(&mut buf, &["seed=0".into()]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let rows: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).skip(3).collect();
        assert_eq!(rows[0], "255 0 0 0");
        assert_eq!(rows[3], "0 0 0 255");
        assert!(text.contains("# seed=0"));
    }

    #[test]
    fn more_bins_than_points() {
        let m = bin_matrix(&Permutation::identity(3), 10).unwrap();
        assert_eq!(m.counts.iter().sum::<u32>(), 3);
        assert!(bin_matrix(&Permutation::identity(3), 0).is_err());
    }

    #[test]
    fn csv_shape() {
        let m = bin_matrix(&Permutation::identity(4), 2).unwrap();
        let mut buf = Vec::new();
        m.write_csv(&mut buf, &[]).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "2,0\n0,2\n");
    }

    #[test]
    fn identity_has_zero_width() {
        let p = band_width_profile(&Permutation::identity(100), &default_windows(0.1, 0.9, 0.2)).unwrap();
        assert_eq!(p.len(), 4);
        assert!(p.iter().all(|b| b.width == 0.0 && b.points == 20));
    }

    #[test]
    fn quantiles_interpolate() {
        assert_eq!(quantile(&[0, 10], 0.1), 1.0);
        assert_eq!(quantile(&[5], 0.9), 5.0);
    }
}
