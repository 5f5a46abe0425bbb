//! Exact distribution theory and Stein-method approximation bounds for the
//! (k1, k2)-runs statistic over Bernoulli trials.
//!
//! The statistic `M` counts occurrences of the composite pattern "exactly
//! `k1` consecutive failures followed by exactly `k2` consecutive successes,
//! closed by a failure" in `n` trials. This crate computes its law by four
//! independent routes (exhaustive enumeration, Markov-chain embedding, a
//! four-term recursion, and a combinatorial closed form), its waiting-time
//! law, and explicit total-variation bounds against Poisson, pseudo-binomial
//! and negative-binomial targets obtained by perturbing discrete-Gibbs Stein
//! operators.
//!
//! # Arithmetic modes
//!
//! Everything is generic over [`scalar::Scalar`], instantiated with `f64`
//! (fast) or [`num_rational::BigRational`] (exact). In exact mode
//! independent routes agree *identically*, which is how the test suite pins
//! down every formula; closed forms accumulate huge alternating terms, so
//! for `n` beyond about 40 exact mode is also the numerically sane choice.
//!
//! # Quick tour
//!
//! ```
//! use kruns::params::{RunsPattern, TrialParams};
//! use kruns::distributions::pmf_row;
//!
//! // P(M = m) for 10 fair trials and the pattern "failure, success, failure".
//! let params = TrialParams::from_p(0.5f64).unwrap();
//! let pattern = RunsPattern::new(1, 1).unwrap();
//! let pmf = pmf_row(10, &params, pattern);
//! assert!((pmf.total_mass() - 1.0).abs() < 1e-12);
//! ```
//!
//! Bound computations live in [`stein`], ground-truth engines in [`oracle`],
//! and the Markov embedding in [`embedding`]. The `parallel` feature
//! (default on) runs enumeration, sampling and grid evaluation via rayon;
//! disabling it yields bit-identical results on one core.

pub mod consts;
pub mod distributions;
pub mod embedding;
pub mod error;
pub mod oracle;
pub mod params;
pub mod poly;
pub mod scalar;
pub mod series;
pub mod stein;
pub mod util;

pub use error::{Error, Result};
pub use params::{RunsPattern, TrialParams};
pub use scalar::{Mode, Scalar};
