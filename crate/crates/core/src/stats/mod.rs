//! Statistics of sampled permutations and of permutons.

mod empirical;
mod ks;
mod pattern;

pub use empirical::{
    empirical_f, empirical_v, lln_distance, max_abs_fluctuation, scaled_fluctuation, GridCdf, LlnReference,
};
pub use ks::ks_distance;
pub use pattern::{
    count_inversions, pattern_count_exact, pattern_counts_exact, pattern_density_exact, pattern_density_mc,
    permuton_pattern_density_mc, Estimate, Pattern, EXACT_ENUMERATION_CAP,
};
