//! Computational analytic number theory around multiplicatively closed
//! prime sets.
//!
//! The crate provides:
//!
//! - a segmented smallest-prime-factor sieve and bulk factorization
//!   ([`PrimeTable`], [`Factorization`]),
//! - prime-set descriptions with exact membership semantics, including
//!   seeded random sets ([`PrimeSet`], [`MaterializedSet`]),
//! - truncated Dirichlet series and procyclic zeta ledgers over such sets
//!   ([`log_weil_partial`], [`zeta_s_truncated`], [`CheckpointLedger`]),
//! - counts of primes with exponent-bounded shifted factorizations and the
//!   associated density constants ([`count_u_f`], [`lambda_f`]),
//! - least primes in arithmetic progressions and weighted progression
//!   sums ([`least_prime`], [`bv_weighted_sum`], [`b_delta`]),
//! - a seeded random model of sparse prime sets with closed-form moments
//!   and Monte Carlo experiments ([`DeltaModel`]).
//!
//! Everything is deterministic: random sets are driven by a counter-based
//! hash keyed on `(seed, prime)`, and bulk sums accumulate in increasing
//! order of the summation index with compensated addition, so results do
//! not depend on scheduling or thread count.
//!
//! The crate is `no_std`-compatible (`alloc` is required); float
//! transcendentals come from `libm` so that results are identical with and
//! without the standard library.

#![cfg_attr(not(test), no_std)]
#![forbid(unsafe_code)]

extern crate alloc;

mod error;
mod kahan;
mod ledger;
mod mirsky;
mod primes;
mod progressions;
mod random;
mod runner;
mod series;
mod sets;
mod stream;

pub use error::{Error, Result};
pub use ledger::{estimate_abscissa, AbscissaEstimate, Checkpoint, CheckpointLedger, LedgerBuilder};
pub use mirsky::{
    count_u_f, harmonic_u_f, is_f_bounded, lambda_f, mirsky_report, mu_f, parse_f_spec,
    ExponentBound, HarmonicReport, LambdaEstimate, MirskyReport, MirskyRow,
};
pub use primes::{
    for_each_prime, is_prime_u64, log_integral, log_integral_grid, Factorization, PrimeTable,
};
pub use progressions::{
    b_delta, bv_weighted_sum, least_prime, linnik_scan, pi_progression, BDeltaEstimate,
    BvStrategy, LinnikReport, LinnikRow,
};
pub use random::{
    abscissa_experiment, expected_i, expected_r, expected_rr, expected_x,
    expected_y_product_bound, expected_y_truncated, moment_grid_experiment, variance_experiment,
    x_t, y_s, AbscissaReport, AbscissaRun, DeltaModel, MomentConfigResult, MomentGridReport,
    MonteCarloSummary, VarianceReport, VarianceRow,
};
pub use runner::{Runner, Serial};
pub use series::{
    hom_count, log_weil_lambda_form, log_weil_partial, mu2_series_truncated, s_weighted_sum,
    weil_terms, zeta_em, zeta_s_euler_truncated, zeta_s_truncated, GroupKind, WeilTerm,
};
pub use sets::{
    count_s_numbers, parse_set_spec, s_decompose, s_part, s_radical, MaterializedSet, PrimeSet,
    SPartDecomposition, SetKind,
};
pub use stream::{stream_u64, unit_f64};
