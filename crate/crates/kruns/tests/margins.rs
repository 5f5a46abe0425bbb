//! Ground-truth validation of the bound machinery: Monte Carlo determinism
//! and coverage, bound margins against the exhaustively-enumerated law, and
//! the dual total-variation routes.

use kruns::distributions::{tv_consecutive, tv_consecutive_expansion};
use kruns::oracle::{monte_carlo_pmf, monte_carlo_pmf_sequential, verify_bound};
use kruns::params::TrialParams;
use kruns::scalar::Scalar;
use kruns::stein::{
    bound_nb_one, bound_nb_two, bound_pb_one, bound_pb_two, bound_poisson_one,
    BoundConvention, BoundReport, C7Policy,
};
use kruns::RunsPattern;
use num_rational::BigRational;

type R = BigRational;

fn rat(num: i64, den: i64) -> R {
    <R as Scalar>::from_ratio(num, den)
}

#[test]
fn monte_carlo_is_deterministic_and_parallel_agnostic() {
    let params = TrialParams::from_p(0.42f64).unwrap();
    let pattern = RunsPattern::new(1, 2).unwrap();
    let n = 25;
    // Three full blocks plus a partial one.
    let trials = 3 * 65_536 + 1_234;
    let a = monte_carlo_pmf(n, trials, 7, &params, pattern);
    let b = monte_carlo_pmf(n, trials, 7, &params, pattern);
    let seq = monte_carlo_pmf_sequential(n, trials, 7, &params, pattern);
    assert_eq!(a.trials, trials);
    for m in 0..a.pmf_estimate.probs().len() {
        assert_eq!(a.pmf_estimate.prob(m).to_bits(), b.pmf_estimate.prob(m).to_bits());
        assert_eq!(a.pmf_estimate.prob(m).to_bits(), seq.pmf_estimate.prob(m).to_bits());
        assert_eq!(a.std_errors[m].to_bits(), seq.std_errors[m].to_bits());
    }
    let other = monte_carlo_pmf(n, trials, 8, &params, pattern);
    let moved = (0..a.pmf_estimate.probs().len())
        .any(|m| a.pmf_estimate.prob(m) != other.pmf_estimate.prob(m));
    assert!(moved, "changing the seed must change the sample");
}

#[test]
fn monte_carlo_covers_the_exact_law() {
    let params = TrialParams::from_p(0.4f64).unwrap();
    let pattern = RunsPattern::new(1, 2).unwrap();
    let n = 18;
    let trials = 1u64 << 17;
    let exact = kruns::oracle::brute_force_pmf(n, &params, pattern).unwrap().pmf;
    let est = monte_carlo_pmf(n, trials, 0x6B72756E73, &params, pattern);
    for m in 0..=exact.support_max() {
        let diff = (est.pmf_estimate.prob(m) - exact.prob(m)).abs();
        let slack = 4.0 * est.std_errors[m] + 6.0 / trials as f64;
        assert!(
            diff <= slack,
            "m = {m}: |{} - {}| = {diff} > {slack}",
            est.pmf_estimate.prob(m),
            exact.prob(m)
        );
    }
}

fn all_reports(n: usize, params: &TrialParams<f64>, pattern: RunsPattern) -> Vec<BoundReport<f64>> {
    vec![
        bound_poisson_one(n, params, pattern),
        bound_pb_one(n, params, pattern, None),
        bound_nb_one(n, params, pattern, None),
        bound_pb_two(n, params, pattern, BoundConvention::Theorem),
        bound_nb_two(n, params, pattern, BoundConvention::Theorem, C7Policy::ExtrapolateC6),
    ]
}

#[test]
fn every_applicable_bound_dominates_the_true_distance() {
    let mut checked = 0usize;
    let mut sub_unit = 0usize;
    for (k1, k2) in [(1usize, 1usize), (1, 2), (2, 1), (2, 2)] {
        let pattern = RunsPattern::new(k1, k2).unwrap();
        for p in [0.05f64, 0.08, 0.2, 0.4, 0.6] {
            let params = TrialParams::from_p(p).unwrap();
            for n in [12usize, 16, 20] {
                for report in all_reports(n, &params, pattern) {
                    if !report.is_applicable() || report.bound.is_none() {
                        continue;
                    }
                    let margin = verify_bound(&report, n, &params, pattern).unwrap();
                    assert!(
                        margin >= 0.0,
                        "negative margin {margin} for {} ({k1},{k2}) n = {n} p = {p}",
                        report.family
                    );
                    checked += 1;
                    if report.bound.unwrap() < 1.0 {
                        sub_unit += 1;
                    }
                }
            }
        }
    }
    assert!(checked >= 100, "only {checked} reports were applicable");
    assert!(sub_unit >= 10, "only {sub_unit} bounds below 1 — grid too coarse");
}

#[test]
fn shift_distance_routes_agree_exactly() {
    for (k1, k2) in [(1usize, 1usize), (2, 1)] {
        let pattern = RunsPattern::new(k1, k2).unwrap();
        for p in [rat(1, 2), rat(1, 3)] {
            let params = TrialParams::from_p(p.clone()).unwrap();
            for n in [6usize, 11, 17] {
                let direct = tv_consecutive(n, &params, pattern);
                let expansion = tv_consecutive_expansion(n, &params, pattern);
                assert_eq!(direct, expansion, "({k1},{k2}), p = {p}, n = {n}");
            }
        }
    }
}

#[test]
fn inapplicable_reports_refuse_verification() {
    let params = TrialParams::from_p(0.5f64).unwrap();
    let pattern = RunsPattern::new(2, 2).unwrap();
    // n below the 5k threshold: the two-parameter bounds must gate out.
    let report = bound_pb_two(12, &params, pattern, BoundConvention::Theorem);
    if !report.is_applicable() {
        assert!(verify_bound(&report, 12, &params, pattern).is_err());
    } else {
        // If applicable here, the sign gate must instead trip for the twin.
        let twin = bound_nb_two(
            12,
            &params,
            pattern,
            BoundConvention::Theorem,
            C7Policy::Blocked,
        );
        assert!(!twin.is_applicable());
        assert!(verify_bound(&twin, 12, &params, pattern).is_err());
    }
}
