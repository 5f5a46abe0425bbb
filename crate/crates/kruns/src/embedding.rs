//! Markov-chain embedding of the trial sequence.
//!
//! The chain tracks progress through the pattern with `k1 + k2 + 2` states:
//! "exactly i failures seen" for `i = 0..=k1`, an overshoot state `k1+`
//! (more than `k1` consecutive failures, which can no longer open a window
//! until a success resets it), and "`k1` failures then `j` successes" for
//! `j = 1..=k2`. Transitions that complete an occurrence (the closing
//! failure after the full success block) are split into a separate matrix so
//! a level-augmented product measures the occurrence count exactly.

use crate::distributions::Pmf;
use crate::params::{RunsPattern, TrialParams};
use crate::poly::Poly;
use crate::scalar::Scalar;
use crate::series::series_div;

/// Transition structure `(A, B)` of the embedded chain: `A` holds the
/// within-level transitions, `B` the occurrence-completing ones, and every
/// row of `A + B` sums to one.
#[derive(Debug, Clone)]
pub struct EmbeddingChain<S: Scalar> {
    state_labels: Vec<String>,
    pi0: Vec<S>,
    a: Vec<Vec<S>>,
    b: Vec<Vec<S>>,
    pattern: RunsPattern,
}

impl<S: Scalar> EmbeddingChain<S> {
    pub fn state_count(&self) -> usize {
        self.state_labels.len()
    }

    /// Human-readable progress labels, in state order.
    pub fn state_labels(&self) -> &[String] {
        &self.state_labels
    }

    pub fn initial_distribution(&self) -> &[S] {
        &self.pi0
    }

    pub fn a(&self) -> &[Vec<S>] {
        &self.a
    }

    pub fn b(&self) -> &[Vec<S>] {
        &self.b
    }

    pub fn pattern(&self) -> RunsPattern {
        self.pattern
    }

    /// Row sums of `A + B`; all exactly one for an unperturbed chain built
    /// from coupled parameters.
    pub fn row_sums(&self) -> Vec<S> {
        self.a
            .iter()
            .zip(&self.b)
            .map(|(ra, rb)| {
                ra.iter()
                    .chain(rb)
                    .fold(S::zero(), |acc, x| acc + x.clone())
            })
            .collect()
    }

    /// Adds `amount` to the stay-at-start entry `A[0][0]`, deliberately
    /// breaking stochasticity so downstream conservation checks must fail.
    #[doc(hidden)]
    pub fn perturb_for_testing(&mut self, amount: &S) {
        self.a[0][0] = self.a[0][0].clone() + amount.clone();
    }
}

/// Builds the embedded chain for the given parameters and pattern.
pub fn build_chain<S: Scalar>(
    params: &TrialParams<S>,
    pattern: RunsPattern,
) -> EmbeddingChain<S> {
    let k1 = pattern.k1();
    let k2 = pattern.k2();
    let m = k1 + k2 + 2;
    let p = params.p().clone();
    let q = params.q().clone();
    let overshoot = k1 + 1; // index of the `k1+` state
    let mut labels = Vec::with_capacity(m);
    for i in 0..=k1 {
        labels.push(format!("{i}"));
    }
    labels.push(format!("{k1}+"));
    for j in 1..=k2 {
        labels.push(format!("{}", k1 + j));
    }

    let mut a = vec![vec![S::zero(); m]; m];
    let mut b = vec![vec![S::zero(); m]; m];
    // No progress: a success keeps us at zero failures, a failure starts the
    // block.
    a[0][0] = p.clone();
    a[0][1] = q.clone();
    // Partial failure blocks: a success resets, a failure extends.
    for i in 1..k1 {
        a[i][0] = p.clone();
        a[i][i + 1] = q.clone();
    }
    // Exactly k1 failures: one more failure overshoots, a success starts the
    // success block.
    a[k1][overshoot] = q.clone();
    a[k1][overshoot + 1] = p.clone();
    // Overshoot: failures keep it dead, a success returns to "zero failures"
    // (a new block must be preceded by that success).
    a[overshoot][0] = p.clone();
    a[overshoot][overshoot] = q.clone();
    // Partial success blocks: a failure aborts the pattern but opens a fresh
    // failure block, a success extends.
    for j in 1..k2 {
        a[overshoot + j][1] = q.clone();
        a[overshoot + j][overshoot + j + 1] = p.clone();
    }
    // Full pattern pending its closing failure: a success spoils exactness of
    // the success block, a failure completes an occurrence and doubles as the
    // first failure of the next potential block.
    let last = m - 1;
    a[last][0] = p;
    b[last][1] = q;

    let mut pi0 = vec![S::zero(); m];
    pi0[0] = S::one();
    EmbeddingChain {
        state_labels: labels,
        pi0,
        a,
        b,
        pattern,
    }
}

/// PMF of `M_n` by propagating the level-augmented distribution `n` steps.
///
/// Levels index the occurrence count; only `0..=floor(n/k)` are allocated,
/// since `B` can fire at most once per `k` steps.
pub fn pmf_embedding<S: Scalar>(chain: &EmbeddingChain<S>, n: usize) -> Pmf<S> {
    let states = chain.state_count();
    let max_level = chain.pattern.support_max(n);
    let mut dist: Vec<Vec<S>> = vec![vec![S::zero(); states]; max_level + 1];
    dist[0].clone_from_slice(&chain.pi0);
    for step in 0..n {
        // After `step` steps at most floor(step/k) occurrences exist, so the
        // completion transitions below never outgrow the allocation.
        let reach = chain.pattern.support_max(step);
        let mut next: Vec<Vec<S>> = vec![vec![S::zero(); states]; max_level + 1];
        for level in 0..=reach {
            for i in 0..states {
                let mass = dist[level][i].clone();
                if mass.is_zero() {
                    continue;
                }
                for j in 0..states {
                    if !chain.a[i][j].is_zero() {
                        next[level][j] =
                            next[level][j].clone() + mass.clone() * chain.a[i][j].clone();
                    }
                    if !chain.b[i][j].is_zero() {
                        next[level + 1][j] =
                            next[level + 1][j].clone() + mass.clone() * chain.b[i][j].clone();
                    }
                }
            }
        }
        dist = next;
    }
    let probs = dist
        .into_iter()
        .map(|row| row.into_iter().fold(S::zero(), |acc, x| acc + x))
        .collect();
    Pmf::from_parts(n, probs)
}

/// Maximum deviation, over `n = 0..=n_max`, between the coefficient of
/// `z^n` in the double generating function
///
/// `Phi(t, z) = (1 + a z^k (1 - qz)(1 - t))
///            / (1 - (p+q) z + a z^k (1 - t)(1 - qz)(1 - pz))`
///
/// and the PGF value `phi_n(t)` computed from the embedded chain. A zero (or
/// double-rounding-small) return certifies the two representations agree.
///
/// For coupled parameters the linear term is the familiar `1 - z`; keeping
/// `p + q` literal extends the identity to decoupled parameters, where the
/// chain propagates total weight `(p+q)^n` instead of probability mass.
pub fn dgf_check<S: Scalar>(
    params: &TrialParams<S>,
    pattern: RunsPattern,
    n_max: usize,
    t: &S,
) -> S {
    let k = pattern.k();
    let a = crate::consts::a_of_p(params, pattern);
    let one_minus_t = S::one() - t.clone();
    let c = a * one_minus_t; // a(p) (1 - t)

    let mut num = Poly::zero();
    num.add_term(0, S::one());
    num.add_term(k, c.clone());
    num.add_term(k + 1, -(c.clone() * params.q().clone()));

    // Denominator multiplies out (1 - qz)(1 - pz) while keeping p + q
    // literal, so decoupled parameters flow through unchanged.
    let p_plus_q = params.p().clone() + params.q().clone();
    let qp = params.q().clone() * params.p().clone();
    let mut den = Poly::zero();
    den.add_term(0, S::one());
    den.add_term(1, -p_plus_q.clone());
    den.add_term(k, c.clone());
    den.add_term(k + 1, -(c.clone() * p_plus_q));
    den.add_term(k + 2, c * qp);

    let num_v: Vec<S> = (0..=k + 1).map(|i| num.coeff(i)).collect();
    let den_v: Vec<S> = (0..=k + 2).map(|i| den.coeff(i)).collect();
    let series = series_div(&num_v, &den_v, n_max + 1)
        .expect("denominator has unit constant term");

    let chain = build_chain(params, pattern);
    let mut max_dev = S::zero();
    for (n, coeff) in series.iter().enumerate() {
        let pmf = pmf_embedding(&chain, n);
        let phi = pmf
            .probs()
            .iter()
            .enumerate()
            .fold(S::zero(), |acc, (m, p)| acc + t.powu(m) * p.clone());
        let dev = (coeff.clone() - phi).abs();
        if dev > max_dev {
            max_dev = dev;
        }
    }
    max_dev
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
    fn chain_shape_and_row_sums() {
        let params = TrialParams::from_p(rat(2, 7)).unwrap();
        for (k1, k2) in [(1, 1), (2, 3), (3, 1)] {
            let chain = build_chain(&params, pat(k1, k2));
            assert_eq!(chain.state_count(), k1 + k2 + 2);
            for sum in chain.row_sums() {
                assert_eq!(sum, rat(1, 1), "({k1},{k2})");
            }
        }
    }

    #[test]
    fn smallest_chain_matches_hand_matrix() {
        let p = rat(1, 2);
        let params = TrialParams::from_p(p).unwrap();
        let chain = build_chain(&params, pat(1, 1));
        let h = rat(1, 2);
        let z = rat(0, 1);
        assert_eq!(chain.a()[0], vec![h.clone(), h.clone(), z.clone(), z.clone()]);
        assert_eq!(chain.a()[1], vec![z.clone(), z.clone(), h.clone(), h.clone()]);
        assert_eq!(chain.a()[2], vec![h.clone(), z.clone(), h.clone(), z.clone()]);
        assert_eq!(chain.a()[3], vec![h.clone(), z.clone(), z.clone(), z.clone()]);
        let b = chain.b();
        for (i, row) in b.iter().enumerate() {
            for (j, x) in row.iter().enumerate() {
                if (i, j) == (3, 1) {
                    assert_eq!(*x, h);
                } else {
                    assert!(x.is_zero());
                }
            }
        }
        assert_eq!(chain.state_labels(), &["0", "1", "1+", "2"]);
    }

    #[test]
    fn embedding_matches_recursion() {
        let params = TrialParams::from_p(rat(3, 10)).unwrap();
        for (k1, k2) in [(1, 1), (1, 2), (2, 1), (2, 2)] {
            let pattern = pat(k1, k2);
            let chain = build_chain(&params, pattern);
            for n in 0..=12usize {
                let via_chain = pmf_embedding(&chain, n);
                let via_recursion = pmf_row(n, &params, pattern);
                assert_eq!(
                    via_chain.probs(),
                    via_recursion.probs(),
                    "({k1},{k2}) n={n}"
                );
            }
        }
    }

    #[test]
    fn mass_conservation_and_perturbation() {
        let params = TrialParams::from_p(rat(2, 5)).unwrap();
        let pattern = pat(2, 1);
        let mut chain = build_chain(&params, pattern);
        for n in [0usize, 1, 7, 12] {
            assert_eq!(pmf_embedding(&chain, n).total_mass(), rat(1, 1));
        }
        chain.perturb_for_testing(&rat(1, 1_000_000));
        let total = pmf_embedding(&chain, 12).total_mass();
        assert!(total != rat(1, 1), "perturbed chain must leak mass");
    }

    #[test]
    fn dgf_check_is_zero_exactly() {
        let params = TrialParams::from_p(rat(2, 7)).unwrap();
        for (k1, k2) in [(1, 1), (2, 2)] {
            let dev = dgf_check(&params, pat(k1, k2), 14, &rat(1, 3));
            assert_eq!(dev, rat(0, 1), "({k1},{k2})");
        }
        // Decoupled parameters: p + q deliberately not 1.
        let decoupled = TrialParams::decoupled(rat(89, 100), rat(11, 100)).unwrap();
        assert!(decoupled.is_coupled());
        let truly_off = TrialParams::decoupled(rat(89, 100), rat(2, 10)).unwrap();
        assert!(!truly_off.is_coupled());
        let dev = dgf_check(&truly_off, pat(1, 2), 10, &rat(1, 2));
        assert_eq!(dev, rat(0, 1));
    }

    #[test]
    fn dgf_check_double_is_tiny() {
        let params = TrialParams::from_p(0.3f64).unwrap();
        let dev = dgf_check(&params, pat(2, 1), 40, &0.7f64);
        assert!(dev.abs() < 1e-12, "deviation {dev}");
    }
}
