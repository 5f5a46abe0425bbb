//! Small execution helpers shared by the oracles, benches and the CLI.

/// Order-preserving map over owned items, data-parallel when the `parallel`
/// feature is enabled and plain sequential otherwise.
///
/// Results arrive in input order either way, so callers observe identical
/// output regardless of the feature flag or thread schedule.
#[cfg(feature = "parallel")]
pub fn par_map<T, U, F>(items: Vec<T>, f: F) -> Vec<U>
where
    T: Send,
    U: Send,
    F: Fn(T) -> U + Sync + Send,
{
    use rayon::prelude::*;
    items.into_par_iter().map(f).collect()
}

/// Order-preserving map over owned items, data-parallel when the `parallel`
/// feature is enabled and plain sequential otherwise.
#[cfg(not(feature = "parallel"))]
pub fn par_map<T, U, F>(items: Vec<T>, f: F) -> Vec<U>
where
    T: Send,
    U: Send,
    F: Fn(T) -> U + Sync + Send,
{
    items.into_iter().map(f).collect()
}

/// Always-sequential counterpart of [`par_map`], used by benchmarks to
/// compare the two execution strategies and by the oracles' `_sequential`
/// entry points.
pub fn seq_map<T, U, F>(items: Vec<T>, f: F) -> Vec<U>
where
    F: Fn(T) -> U,
{
    items.into_iter().map(f).collect()
}

use crate::scalar::Scalar;

/// Renders a nonnegative value with exactly six decimal places, rounding
/// half away from zero: `floor(x * 10^6 + 1/2)` scaled back. In exact mode
/// the rounding decision is made in rational arithmetic, so the printed
/// digits are the true rounding of the exact value.
pub fn format_fixed6<S: Scalar>(x: &S) -> String {
    debug_assert!(*x >= S::zero(), "fixed-point rendering expects x >= 0");
    let scaled = x.clone() * S::from_i64(1_000_000) + S::from_ratio(1, 2);
    let units = scaled.floor_u64();
    format!("{}.{:06}", units / 1_000_000, units % 1_000_000)
}

/// Renders a nonnegative value truncated (not rounded) to six decimal
/// places: `floor(x * 10^6)` scaled back.
pub fn format_fixed6_trunc<S: Scalar>(x: &S) -> String {
    debug_assert!(*x >= S::zero(), "fixed-point rendering expects x >= 0");
    let scaled = x.clone() * S::from_i64(1_000_000);
    let units = scaled.floor_u64();
    format!("{}.{:06}", units / 1_000_000, units % 1_000_000)
}
