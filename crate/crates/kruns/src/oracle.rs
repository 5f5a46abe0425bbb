//! Ground-truth engines: exhaustive enumeration of all `2^n` Bernoulli
//! sequences, Monte Carlo sampling for larger `n`, exact total-variation
//! computation, and the bound-verification pipeline built on them.
//!
//! Two independent codings of the occurrence count — a window scan and a
//! literal product-of-indicators evaluation — are kept deliberately separate
//! and asserted equal on every enumerated sequence, so a defect in either
//! reading of the pattern definition cannot go unnoticed.

use crate::distributions::{Pmf, TruncatedPmf};
use crate::error::{Error, Result};
use crate::params::{RunsPattern, TrialParams};
use crate::scalar::Scalar;
use crate::stein::{gibbs_table, BoundReport};
use crate::util::{par_map, seq_map};

/// Hard cap for exhaustive enumeration (`2^22` sequences).
pub const ENUMERATION_MAX_N: usize = 22;

/// Trials per Monte Carlo block; blocks are independently seeded so the
/// estimate is identical whether blocks run in parallel or sequentially.
const MC_BLOCK: u64 = 65_536;

/// Exact PMF from exhaustive enumeration, with the inputs echoed back.
#[derive(Debug, Clone)]
pub struct EnumerationResult<S: Scalar> {
    pub pmf: Pmf<S>,
    pub n: usize,
    pub pattern: RunsPattern,
    pub params: TrialParams<S>,
    pub sequence_count: u64,
}

/// Empirical PMF from Monte Carlo sampling.
#[derive(Debug, Clone)]
pub struct SampleEstimate {
    pub pmf_estimate: Pmf<f64>,
    /// Binomial standard error per support point.
    pub std_errors: Vec<f64>,
    pub trials: u64,
    pub seed: u64,
}

/// Occurrence count by window scan: a closing failure at (0-based) position
/// `j >= k` ends an occurrence when the `k` preceding positions hold exactly
/// `k1` failures then `k2` successes, and the window either starts the
/// sequence or is preceded by a success (which makes the failure run exact
/// on the left).
pub fn count_occurrences_scan(bits: &[bool], pattern: RunsPattern) -> usize {
    let k1 = pattern.k1();
    let k = pattern.k();
    let n = bits.len();
    let mut count = 0usize;
    for j in k..n {
        if bits[j] {
            continue; // no closing failure
        }
        let start = j - k;
        if start > 0 && !bits[start - 1] {
            continue; // failure run would extend further left
        }
        let failures_ok = bits[start..start + k1].iter().all(|&b| !b);
        let successes_ok = bits[start + k1..start + k].iter().all(|&b| b);
        if failures_ok && successes_ok {
            count += 1;
        }
    }
    count
}

/// Occurrence count by literal evaluation of the defining indicators
/// (1-based trials `eta_1..eta_n`, `bits[i] = eta_{i+1}`):
///
/// * boundary, `l = k+1`:
///   `[prod_{i=1}^{k1} (1-eta_i) prod_{j=1}^{k2} eta_{j+k1}] (1-eta_{k+1})`;
/// * interior, `k+2 <= l <= n`:
///   `eta_{l-k-1} [prod_{i=1}^{k1} (1-eta_{i+l-k-1})
///    prod_{j=1}^{k2} eta_{j+l-k2-1}] (1-eta_l)`.
pub fn count_occurrences_indicators(bits: &[bool], pattern: RunsPattern) -> usize {
    let k1 = pattern.k1();
    let k2 = pattern.k2();
    let k = pattern.k();
    let n = bits.len();
    let eta = |i: usize| -> usize { usize::from(bits[i - 1]) }; // 1-based
    let mut count = 0usize;
    if n >= k + 1 {
        let mut ind = 1 - eta(k + 1);
        for i in 1..=k1 {
            ind *= 1 - eta(i);
        }
        for j in 1..=k2 {
            ind *= eta(j + k1);
        }
        count += ind;
    }
    for l in (k + 2)..=n {
        let mut ind = eta(l - k - 1) * (1 - eta(l));
        for i in 1..=k1 {
            ind *= 1 - eta(i + l - k - 1);
        }
        for j in 1..=k2 {
            ind *= eta(j + l - k2 - 1);
        }
        count += ind;
    }
    count
}

/// Joint histogram over (occurrence count, success count) for a range of
/// sequence codes; entry `[m][s]` counts sequences with `M = m` and `s`
/// successes. Bit `i` of a code is trial `i` (set = success).
fn histogram_block(
    n: usize,
    pattern: RunsPattern,
    from: u64,
    to: u64,
) -> Vec<Vec<u64>> {
    let m_max = pattern.support_max(n);
    let mut counts = vec![vec![0u64; n + 1]; m_max + 1];
    let mut bits = vec![false; n];
    for code in from..to {
        for (i, b) in bits.iter_mut().enumerate() {
            *b = (code >> i) & 1 == 1;
        }
        let m = count_occurrences_scan(&bits, pattern);
        debug_assert_eq!(
            m,
            count_occurrences_indicators(&bits, pattern),
            "scan and indicator codings disagree on code {code:#b}"
        );
        counts[m][code.count_ones() as usize] += 1;
    }
    counts
}

fn merge_histograms(mut acc: Vec<Vec<u64>>, other: Vec<Vec<u64>>) -> Vec<Vec<u64>> {
    for (row_a, row_o) in acc.iter_mut().zip(other) {
        for (a, o) in row_a.iter_mut().zip(row_o) {
            *a += o;
        }
    }
    acc
}

fn pmf_from_histogram<S: Scalar>(
    counts: &[Vec<u64>],
    n: usize,
    params: &TrialParams<S>,
) -> Pmf<S> {
    // Weight a (m, successes) cell once instead of re-deriving per sequence:
    // every sequence with s successes has probability p^s q^{n-s}.
    let mut p_pow = vec![S::one()];
    let mut q_pow = vec![S::one()];
    for i in 0..n {
        p_pow.push(p_pow[i].clone() * params.p().clone());
        q_pow.push(q_pow[i].clone() * params.q().clone());
    }
    let probs = counts
        .iter()
        .map(|row| {
            row.iter().enumerate().fold(S::zero(), |acc, (s, &c)| {
                if c == 0 {
                    acc
                } else {
                    acc + S::from_u64(c) * p_pow[s].clone() * q_pow[n - s].clone()
                }
            })
        })
        .collect();
    Pmf::from_parts(n, probs)
}

fn enumeration_blocks(n: usize) -> Vec<(u64, u64)> {
    let total: u64 = 1u64 << n;
    // A few hundred blocks balances parallelism against merge overhead.
    let block = (total / 256).max(4096).min(total.max(1));
    let mut ranges = Vec::new();
    let mut from = 0u64;
    while from < total {
        let to = (from + block).min(total);
        ranges.push((from, to));
        from = to;
    }
    ranges
}

fn brute_force_impl<S: Scalar>(
    n: usize,
    params: &TrialParams<S>,
    pattern: RunsPattern,
    parallel: bool,
) -> Result<EnumerationResult<S>> {
    if n > ENUMERATION_MAX_N {
        return Err(Error::EnumerationTooLarge {
            n,
            max: ENUMERATION_MAX_N,
        });
    }
    let ranges = enumeration_blocks(n);
    let worker = |(from, to): (u64, u64)| histogram_block(n, pattern, from, to);
    let histograms = if parallel {
        par_map(ranges, worker)
    } else {
        seq_map(ranges, worker)
    };
    let m_max = pattern.support_max(n);
    let counts = histograms.into_iter().fold(
        vec![vec![0u64; n + 1]; m_max + 1],
        merge_histograms,
    );
    Ok(EnumerationResult {
        pmf: pmf_from_histogram(&counts, n, params),
        n,
        pattern,
        params: params.clone(),
        sequence_count: 1u64 << n,
    })
}

/// Exact PMF of `M_n` by enumerating all `2^n` sequences (data-parallel when
/// the `parallel` feature is on; the result is identical either way).
pub fn brute_force_pmf<S: Scalar>(
    n: usize,
    params: &TrialParams<S>,
    pattern: RunsPattern,
) -> Result<EnumerationResult<S>> {
    brute_force_impl(n, params, pattern, true)
}

/// Always-sequential variant of [`brute_force_pmf`] (for benchmarking the
/// parallel speedup and asserting bit-identical results).
pub fn brute_force_pmf_sequential<S: Scalar>(
    n: usize,
    params: &TrialParams<S>,
    pattern: RunsPattern,
) -> Result<EnumerationResult<S>> {
    brute_force_impl(n, params, pattern, false)
}

/// SplitMix64: the 64-bit counter-based generator with the standard
/// constants — increment `0x9E3779B97F4A7C15`, finalizer multipliers
/// `0xBF58476D1CE4E5B9` and `0x94D049BB133111EB`, shifts 30/27/31.
///
/// Chosen for cross-language reproducibility: the whole generator is five
/// lines and widely implemented, so a seed documented here yields the same
/// stream anywhere.
#[derive(Debug, Clone)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub const GAMMA: u64 = 0x9E3779B97F4A7C15;

    pub fn new(seed: u64) -> Self {
        Self { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(Self::GAMMA);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
        z ^ (z >> 31)
    }

    /// Uniform in `[0, 1)` with 53 random bits.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }
}

/// Deterministic per-block seed: one SplitMix64 step of
/// `seed + (block_index + 1) * GAMMA`, so block streams are decorrelated and
/// independent of execution order.
fn block_seed(seed: u64, block_index: u64) -> u64 {
    SplitMix64::new(seed.wrapping_add((block_index + 1).wrapping_mul(SplitMix64::GAMMA)))
        .next_u64()
}

fn mc_histogram_block(
    n: usize,
    p: f64,
    pattern: RunsPattern,
    seed: u64,
    block_index: u64,
    trials: u64,
) -> Vec<u64> {
    let mut rng = SplitMix64::new(block_seed(seed, block_index));
    let mut counts = vec![0u64; pattern.support_max(n) + 1];
    let mut bits = vec![false; n];
    for _ in 0..trials {
        for b in bits.iter_mut() {
            *b = rng.next_f64() < p;
        }
        counts[count_occurrences_scan(&bits, pattern)] += 1;
    }
    counts
}

fn monte_carlo_impl(
    n: usize,
    trials: u64,
    seed: u64,
    params: &TrialParams<f64>,
    pattern: RunsPattern,
    parallel: bool,
) -> SampleEstimate {
    assert!(trials >= 1, "at least one trial required");
    let p = *params.p();
    let full_blocks = trials / MC_BLOCK;
    let remainder = trials % MC_BLOCK;
    let mut plan: Vec<(u64, u64)> = (0..full_blocks).map(|b| (b, MC_BLOCK)).collect();
    if remainder > 0 {
        plan.push((full_blocks, remainder));
    }
    let worker = |(index, count): (u64, u64)| {
        mc_histogram_block(n, p, pattern, seed, index, count)
    };
    let histograms = if parallel {
        par_map(plan, worker)
    } else {
        seq_map(plan, worker)
    };
    let mut counts = vec![0u64; pattern.support_max(n) + 1];
    for h in histograms {
        for (a, o) in counts.iter_mut().zip(h) {
            *a += o;
        }
    }
    let t = trials as f64;
    let probs: Vec<f64> = counts.iter().map(|&c| c as f64 / t).collect();
    let std_errors = probs
        .iter()
        .map(|&ph| (ph * (1.0 - ph) / t).sqrt())
        .collect();
    SampleEstimate {
        pmf_estimate: Pmf::from_parts(n, probs),
        std_errors,
        trials,
        seed,
    }
}

/// Empirical PMF of `M_n` from `trials` simulated sequences.
///
/// Deterministic under a fixed seed: trials are processed in blocks of
/// 65 536, each with its own SplitMix64 stream derived from the seed and the
/// block index, so the estimate does not depend on whether blocks run in
/// parallel.
pub fn monte_carlo_pmf(
    n: usize,
    trials: u64,
    seed: u64,
    params: &TrialParams<f64>,
    pattern: RunsPattern,
) -> SampleEstimate {
    monte_carlo_impl(n, trials, seed, params, pattern, true)
}

/// Always-sequential variant of [`monte_carlo_pmf`] (bit-identical results).
pub fn monte_carlo_pmf_sequential(
    n: usize,
    trials: u64,
    seed: u64,
    params: &TrialParams<f64>,
    pattern: RunsPattern,
) -> SampleEstimate {
    monte_carlo_impl(n, trials, seed, params, pattern, false)
}

/// Total variation distance `1/2 sum_m |a_m - b_m|` plus both truncation
/// tails, making the result an upper bound on the true distance whenever the
/// tails bound the neglected mass.
pub fn exact_tv<S: Scalar>(a: &TruncatedPmf<S>, b: &TruncatedPmf<S>) -> S {
    let len = a.len().max(b.len());
    let mut acc = S::zero();
    for m in 0..len {
        acc = acc + (a.prob(m) - b.prob(m)).abs();
    }
    acc / S::from_u64(2) + a.tail() + b.tail()
}

/// Margin `bound - d_TV(target, M_n)` of an applicable bound report, with
/// the distance computed against the exhaustive PMF. The bound theorems
/// assert this is nonnegative.
///
/// Refuses reports that are inapplicable or carry no numeric bound, and `n`
/// beyond exhaustive reach.
pub fn verify_bound(
    report: &BoundReport<f64>,
    n: usize,
    params: &TrialParams<f64>,
    pattern: RunsPattern,
) -> Result<f64> {
    assert_eq!(report.n, n, "report was computed for a different n");
    if !report.is_applicable() {
        return Err(Error::BoundUnavailable {
            reason: format!("report inapplicable: {}", report.notes),
        });
    }
    let bound = report.bound.ok_or_else(|| Error::BoundUnavailable {
        reason: format!("report carries no numeric bound: {}", report.notes),
    })?;
    let matched = report.matched.as_ref().expect("applicable implies matched");
    let enumeration = brute_force_pmf(n, params, pattern)?;
    let target = gibbs_table(&matched.gibbs_spec(), 1e-15)?;
    let distance = exact_tv(&target, &TruncatedPmf::from(&enumeration.pmf));
    Ok(bound - distance)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distributions::pmf_row;
    use num_rational::BigRational;

    type R = BigRational;

    fn rat(n: i64, d: i64) -> R {
        <R as Scalar>::from_ratio(n, d)
    }

    fn pat(k1: usize, k2: usize) -> RunsPattern {
        RunsPattern::new(k1, k2).unwrap()
    }

    #[test]
    fn hand_checked_sequences() {
        let pattern = pat(1, 1);
        // 010 (F, S, F) completes one occurrence at the boundary.
        assert_eq!(count_occurrences_scan(&[false, true, false], pattern), 1);
        assert_eq!(
            count_occurrences_indicators(&[false, true, false], pattern),
            1
        );
        // 01010: occurrences closing at positions 2 and 4 share a failure.
        let bits = [false, true, false, true, false];
        assert_eq!(count_occurrences_scan(&bits, pattern), 2);
        // 0010: the leading failure run has length 2, not exactly 1.
        assert_eq!(count_occurrences_scan(&[false, false, true, false], pattern), 0);
        // Interior occurrence needs a preceding success: 1010.
        assert_eq!(count_occurrences_scan(&[true, false, true, false], pattern), 1);
        let p212 = pat(2, 1);
        // For (k1, k2) = (2, 1) the same 0010 is a boundary occurrence.
        assert_eq!(count_occurrences_scan(&[false, false, true, false], p212), 1);
    }

    #[test]
    fn codings_agree_exhaustively() {
        for (k1, k2) in [(1, 1), (1, 2), (2, 1), (2, 3)] {
            let pattern = pat(k1, k2);
            for n in 0..=12usize {
                let mut bits = vec![false; n];
                for code in 0u64..(1 << n) {
                    for (i, b) in bits.iter_mut().enumerate() {
                        *b = (code >> i) & 1 == 1;
                    }
                    assert_eq!(
                        count_occurrences_scan(&bits, pattern),
                        count_occurrences_indicators(&bits, pattern),
                        "({k1},{k2}) n={n} code={code:#b}"
                    );
                }
            }
        }
    }

    #[test]
    fn enumeration_matches_recursion_exactly() {
        let params = TrialParams::from_p(rat(3, 10)).unwrap();
        for (k1, k2) in [(1, 1), (2, 1)] {
            let pattern = pat(k1, k2);
            for n in [0usize, 3, 7, 10] {
                let enumerated = brute_force_pmf(n, &params, pattern).unwrap();
                assert_eq!(enumerated.sequence_count, 1u64 << n);
                let recursed = pmf_row(n, &params, pattern);
                assert_eq!(enumerated.pmf.probs(), recursed.probs(), "({k1},{k2}) n={n}");
                assert_eq!(enumerated.pmf.total_mass(), rat(1, 1));
            }
        }
    }

    #[test]
    fn enumeration_hand_value_and_cap() {
        let params = TrialParams::from_p(rat(1, 2)).unwrap();
        let result = brute_force_pmf(3, &params, pat(1, 1)).unwrap();
        assert_eq!(result.pmf.prob(1), rat(1, 8));
        assert_eq!(result.pmf.prob(0), rat(7, 8));
        assert!(matches!(
            brute_force_pmf(23, &params, pat(1, 1)),
            Err(Error::EnumerationTooLarge { .. })
        ));
    }

    #[test]
    fn parallel_and_sequential_agree_bit_for_bit() {
        let params = TrialParams::from_p(0.37f64).unwrap();
        let pattern = pat(2, 1);
        let a = brute_force_pmf(14, &params, pattern).unwrap();
        let b = brute_force_pmf_sequential(14, &params, pattern).unwrap();
        assert_eq!(a.pmf.probs(), b.pmf.probs());
        let mc_a = monte_carlo_pmf(20, 200_000, 42, &params, pattern);
        let mc_b = monte_carlo_pmf_sequential(20, 200_000, 42, &params, pattern);
        assert_eq!(mc_a.pmf_estimate.probs(), mc_b.pmf_estimate.probs());
    }

    #[test]
    fn splitmix_reference_vector() {
        // First outputs from seed 0 of the standard SplitMix64.
        let mut rng = SplitMix64::new(0);
        assert_eq!(rng.next_u64(), 0xE220A8397B1DCDAF);
        assert_eq!(rng.next_u64(), 0x6E789E6AA1B965F4);
        assert_eq!(rng.next_u64(), 0x06C45D188009454F);
    }

    #[test]
    fn monte_carlo_is_deterministic_and_consistent() {
        let params = TrialParams::from_p(0.5f64).unwrap();
        let pattern = pat(1, 1);
        let est1 = monte_carlo_pmf(12, 150_000, 7, &params, pattern);
        let est2 = monte_carlo_pmf(12, 150_000, 7, &params, pattern);
        assert_eq!(est1.pmf_estimate.probs(), est2.pmf_estimate.probs());
        let total: f64 = est1.pmf_estimate.probs().iter().sum();
        assert!((total - 1.0).abs() < 1e-12);
        // 4-sigma agreement with the exact law.
        let exact = pmf_row(12, &params, pattern);
        for m in 0..=exact.support_max() {
            let err = est1.std_errors[m].max(1e-9);
            let dev = (est1.pmf_estimate.prob(m) - exact.prob(m)).abs();
            assert!(dev < 4.0 * err, "m={m}: dev {dev} vs 4 sigma {}", 4.0 * err);
        }
        // trials = 1 gives a point mass.
        let single = monte_carlo_pmf(12, 1, 3, &params, pattern);
        let mass: f64 = single.pmf_estimate.probs().iter().sum();
        assert_eq!(mass, 1.0);
        assert!(single.pmf_estimate.probs().iter().any(|&x| x == 1.0));
    }

    #[test]
    fn tv_basics() {
        let a = TruncatedPmf::new(vec![rat(1, 2), rat(1, 2)], rat(0, 1));
        assert_eq!(exact_tv(&a, &a), rat(0, 1));
        let b = TruncatedPmf::new(vec![rat(0, 1), rat(0, 1), rat(1, 1)], rat(0, 1));
        // Supports {0,1} vs {2} are disjoint.
        assert_eq!(exact_tv(&a, &b), rat(1, 1));
    }

    #[test]
    fn verify_bound_full_pipeline() {
        let params = TrialParams::from_p(0.5f64).unwrap();
        let pattern = pat(1, 1);
        let report = crate::stein::bound_poisson_one(12, &params, pattern);
        let margin = verify_bound(&report, 12, &params, pattern).unwrap();
        assert!(margin >= 0.0, "margin {margin}");
        // Inapplicable reports refuse.
        let gated = crate::stein::bound_poisson_one(5, &params, pat(3, 4));
        assert!(matches!(
            verify_bound(&gated, 5, &params, pat(3, 4)),
            Err(Error::BoundUnavailable { .. })
        ));
    }
}
