//! Exact dyadic-grid machinery for Walsh-Fourier analysis on `[0,1)`.
//!
//! Everything here works on step functions sampled at resolution `2^-res`
//! with `res <= 12`. The crate provides:
//!
//! * dyadic intervals, Haar projections and martingale averages ([`dyadic`]),
//! * Walsh functions, tiles, Walsh packets and a fast Walsh-Hadamard
//!   transform with an exact integer mode ([`walsh`]),
//! * Muckenhoupt `A_p` weights and the dyadic maximal/sharp operators
//!   ([`weights`]),
//! * bitiles, trees, the tree square function, and the size/density
//!   functionals of time-frequency analysis ([`phase_plane`]),
//! * size- and density-driven tree selection with level decompositions
//!   ([`selection`]),
//! * r-variation norms, jump counting and stopped martingale transforms
//!   ([`variation`]),
//! * the variational Carleson operator, its linearization, bilinear form,
//!   and major-subset construction ([`carleson`]).
//!
//! All operations are pure functions on immutable values; everything is
//! safe to share across threads.

pub mod calibration;
pub mod carleson;
pub mod dyadic;
pub mod error;
pub mod generate;
pub mod phase_plane;
pub mod selection;
pub mod variation;
pub mod walsh;
pub mod weights;

pub use carleson::{
    bilinear_form, carleson_variation, linearize, major_subsets, partial_sum_variation_field,
    tree_ratio, MajorSubsets, OperatorInstance, Variant,
};
pub use dyadic::{
    conditional_expectation, delta_project, haar, inner, lp_norm_weighted, CellSet,
    DyadicFunction, DyadicInterval, MAX_RES,
};
pub use error::{Error, Result};
pub use phase_plane::{
    bitile_less, counting_function, density, parse_bitiles, size, size_lp, size_weak1,
    split_tree, tree_square_function, write_bitiles, Bitile, Linearization, Tree,
    MAX_PHASE_PLANE_RES,
};
pub use selection::{
    compare_decompositions, level_decomposition, select_by_density, select_by_size,
    DecompositionMode, DecompositionReport, Forest, LevelRow,
};
pub use variation::{
    jump_count, jump_ratio, lepingle_ratio, martingale_variation_field, r_variation,
    stopping_transform, StoppingTime,
};
pub use walsh::{
    fwht, fwht_i64, haar_factorization, inverse_fwht, packet, partial_sum, tile_less, walsh,
    Tile, WalshCoefficients,
};
pub use weights::{
    ap_characteristic, maximal_dyadic, maximal_l2, maximal_weighted, power_weight, sharp_dyadic,
    Weight,
};
