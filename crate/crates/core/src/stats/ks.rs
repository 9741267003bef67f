use crate::error::{Error, Result};

/// Kolmogorov–Smirnov statistic `sup |F_m - F|` of sorted samples against a
/// continuous reference cdf. Both one-sided gaps at every sample point are
/// included, so ties in the sample are handled.
pub fn ks_distance(sorted: &[f64], cdf: impl Fn(f64) -> f64) -> Result<f64> {
    if sorted.is_empty() {
        return Err(Error::InvalidParameter("KS distance needs at least one sample".into()));
    }
    debug_assert!(sorted.windows(2).all(|w| w[0] <= w[1]), "samples must be sorted");
    let m = sorted.len() as f64;
    let d = sorted.iter().enumerate().fold(0.0f64, |d, (i, &x)| {
        let f = cdf(x);
        d.max((i + 1) as f64 / m - f).max(f - i as f64 / m)
    });
    Ok(d)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngStream;

    #[test]
    fn single_sample_at_median() {
        assert_eq!(ks_distance(&[0.5], |x| x).unwrap(), 0.5);
    }

    #[test]
    fn midpoint_quantiles() {
        let m = 1000;
        let xs: Vec<f64> = (1..=m).map(|i| (i as f64 - 0.5) / m as f64).collect();
        let d = ks_distance(&xs, |x| x).unwrap();
        assert!((d - 0.5 / m as f64).abs() < 1e-15);
    }

    #[test]
    fn uniform_draws_pass_kolmogorov_bound() {
        let m = 10_000;
        let mut fails = 0;
        for seed in 0..20 {
            let mut rng = RngStream::new(seed, 0);
            let mut xs: Vec<f64> = (0..m).map(|_| rng.open01()).collect();
            xs.sort_by(f64::total_cmp);
            if ks_distance(&xs, |x| x).unwrap() >= 1.63 / (m as f64).sqrt() {
                fails += 1;
            }
        }
        assert!(fails <= 1);
    }

    #[test]
    fn point_mass_against_continuous() {
        let xs = vec![0.0; 10];
        let d = ks_distance(&xs, |t| 1.0 / (1.0 + (-2.0 * t).exp())).unwrap();
        assert!((d - 0.5).abs() < 1e-15);
        assert!(ks_distance(&[], |x| x).is_err());
    }
}
