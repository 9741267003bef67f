//! The single table of experiment defaults and the record type every
//! experiment emits.

use serde::Serialize;

/// Bumped whenever a value below changes.
pub const DEFAULTS_VERSION: u32 = 1;

pub const SEED: u64 = 0;
pub const MATRIX_BINS: usize = 512;
pub const LLN_GRID: usize = 50;
pub const LLN_REPLICAS: usize = 20;
pub const LLN_NS: [usize; 3] = [1_000, 10_000, 100_000];
pub const LLN_TOLERANCE: f64 = 0.01;
pub const BAND_ALPHAS: [f64; 3] = [50.0, 100.0, 200.0];
pub const BAND_S_RANGE: (f64, f64) = (0.1, 0.7);
pub const BAND_S_POINTS: usize = 13;
pub const BAND_T_RANGE: f64 = 3.0;
pub const BAND_T_POINTS: usize = 61;
pub const BAND_MALLOWS_TOLERANCE: f64 = 0.05;
pub const BAND_WINDOW: (f64, f64) = (0.1, 0.9);
pub const BAND_BINS: usize = 50;
pub const BAND_EMPIRICAL_N: usize = 1_000_000;
pub const BAND_EMPIRICAL_ALPHA: f64 = 200.0;
pub const BAND_KS_MALLOWS: f64 = 0.02;
pub const BAND_KS_KCM: f64 = 0.03;
pub const BAND_KS_U_MARGINAL: f64 = 0.02;
pub const VERIFY_N: usize = 5;
pub const VERIFY_SAMPLES: usize = 1_000_000;
pub const VERIFY_SUM_TOLERANCE: f64 = 1e-12;
pub const VERIFY_SYMMETRY_TOLERANCE: f64 = 1e-13;
pub const VERIFY_TV_TOLERANCE: f64 = 0.01;
pub const ORACLE_GRID: usize = 99;
pub const ORACLE_TOLERANCE: f64 = 1e-6;
pub const MASS_PANELS: usize = 200;
pub const MASS_ORDER: usize = 4;
pub const MASS_TOLERANCE: f64 = 1e-4;
pub const INVERSION_TOLERANCE: f64 = 1e-6;
pub const INVERSION_SAMPLE_N: usize = 100_000;
pub const INVERSION_SAMPLE_TOLERANCE: f64 = 0.01;
pub const FIGURE_N: usize = 10_000;
pub const FIGURE_WINDOWS: (f64, f64, f64) = (0.15, 0.85, 0.1);
pub const FIGURE_FLATNESS: f64 = 0.25;
pub const BENCH_NS: [usize; 2] = [100_000, 1_000_000];
pub const BENCH_BUDGET_SECONDS: f64 = 5.0;

#[derive(Debug, Clone, Serialize)]
pub struct DefaultEntry {
    pub key: &'static str,
    pub value: String,
    pub meaning: &'static str,
}

fn entry(key: &'static str, value: impl std::fmt::Debug, meaning: &'static str) -> DefaultEntry {
    DefaultEntry {
        key,
        value: format!("{value:?}"),
        meaning,
    }
}

/// Every default, in the order `--show-defaults` prints them.
pub fn table() -> Vec<DefaultEntry> {
    vec![
        entry("version", DEFAULTS_VERSION, "defaults table revision"),
        entry("seed", SEED, "base seed; replica r uses stream r"),
        entry("matrix.bins", MATRIX_BINS, "heatmap bins per axis"),
        entry("lln.grid", LLN_GRID, "analysis grid G for the cdf distance"),
        entry("lln.replicas", LLN_REPLICAS, "replicas per n"),
        entry("lln.ns", LLN_NS, "sizes for the decreasing-median check"),
        entry("lln.tolerance", LLN_TOLERANCE, "median distance bound at the largest n"),
        entry("band.alphas", BAND_ALPHAS, "family parameters for the analytic sweep"),
        entry("band.s_range", BAND_S_RANGE, "s range of the analytic sweep"),
        entry("band.s_points", BAND_S_POINTS, "s grid points"),
        entry("band.t_range", BAND_T_RANGE, "|t| bound of the analytic sweep"),
        entry("band.t_points", BAND_T_POINTS, "t grid points"),
        entry("band.mallows_tolerance", BAND_MALLOWS_TOLERANCE, "sup error bound at the largest alpha (mallows)"),
        entry("band.window", BAND_WINDOW, "u window of the empirical check"),
        entry("band.bins", BAND_BINS, "histogram bins on [-5, 5]"),
        entry("band.empirical_n", BAND_EMPIRICAL_N, "permutation size of the empirical check"),
        entry("band.empirical_alpha", BAND_EMPIRICAL_ALPHA, "family parameter of the empirical check"),
        entry("band.ks_mallows", BAND_KS_MALLOWS, "KS bound, mallows (calibrated)"),
        entry("band.ks_kcm", BAND_KS_KCM, "KS bound, kcm (calibrated)"),
        entry("band.ks_u_marginal", BAND_KS_U_MARGINAL, "KS bound of the U marginal vs uniform"),
        entry("verify.n", VERIFY_N, "permutation size for exact checks"),
        entry("verify.samples", VERIFY_SAMPLES, "sampler draws for the TV check"),
        entry("verify.sum_tolerance", VERIFY_SUM_TOLERANCE, "normalization tolerance"),
        entry("verify.symmetry_tolerance", VERIFY_SYMMETRY_TOLERANCE, "P(pi) vs P(pi^-1) tolerance"),
        entry("verify.tv_tolerance", VERIFY_TV_TOLERANCE, "sampler vs exact law TV bound"),
        entry("permuton.oracle_grid", ORACLE_GRID, "grid points per axis on [0, 0.99]"),
        entry("permuton.oracle_tolerance", ORACLE_TOLERANCE, "numeric vs closed-form V"),
        entry("permuton.mass_panels", MASS_PANELS, "tensor panels per axis for the density mass"),
        entry("permuton.mass_order", MASS_ORDER, "Gauss-Legendre order per panel"),
        entry("permuton.mass_tolerance", MASS_TOLERANCE, "mass and marginal tolerance"),
        entry("pattern.inversion_tolerance", INVERSION_TOLERANCE, "integral vs 1/(k+1)"),
        entry("pattern.sample_n", INVERSION_SAMPLE_N, "permutation size of the sampled inversion check"),
        entry("pattern.sample_tolerance", INVERSION_SAMPLE_TOLERANCE, "sampled inversion density vs 1/(k+1)"),
        entry("figure.n", FIGURE_N, "permutation size for band-width profiles"),
        entry("figure.windows", FIGURE_WINDOWS, "(start, end, step) of the i/n windows"),
        entry("figure.flatness", FIGURE_FLATNESS, "allowed relative spread of a flat profile"),
        entry("bench.ns", BENCH_NS, "sizes timed by bench"),
        entry("bench.budget_seconds", BENCH_BUDGET_SECONDS, "time budget at the largest n"),
    ]
}

/// One line of an experiment report.
#[derive(Debug, Clone, Serialize)]
pub struct Record {
    pub model: String,
    pub n: Option<usize>,
    pub seed: Option<u64>,
    pub statistic: String,
    pub value: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl Record {
    /// A record that passes when `value < tolerance`.
    pub fn below(model: impl Into<String>, statistic: impl Into<String>, value: f64, tolerance: f64) -> Self {
        Self {
            model: model.into(),
            n: None,
            seed: None,
            statistic: statistic.into(),
            value,
            tolerance,
            pass: value < tolerance,
        }
    }

    /// A record for a yes/no property; `value` is 1 when it holds.
    pub fn holds(model: impl Into<String>, statistic: impl Into<String>, ok: bool) -> Self {
        Self {
            model: model.into(),
            n: None,
            seed: None,
            statistic: statistic.into(),
            value: if ok { 1.0 } else { 0.0 },
            tolerance: 1.0,
            pass: ok,
        }
    }

    pub fn with_n(mut self, n: usize) -> Self {
        self.n = Some(n);
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = Some(seed);
        self
    }
}
