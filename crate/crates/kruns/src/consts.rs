//! Closed-form constants and coefficient families used by the moment
//! identities and the approximation bounds.
//!
//! Everything here is a polynomial or power-ratio expression in `n`, `k`,
//! `p`, `q`; the heavy lifting is bookkeeping, and each item carries a small
//! pinned-value test so a silent transcription error cannot survive.

use crate::error::{Error, Result};
use crate::params::{RunsPattern, TrialParams};
use crate::poly::Poly;
use crate::scalar::Scalar;
use num_bigint::BigInt;
use num_integer::binomial as int_binomial;
use num_traits::One;

/// Occurrence weight `a(p) = q^{k1} * p^{k2}`: the probability weight of one
/// aligned copy of the pattern (failures first, then successes).
pub fn a_of_p<S: Scalar>(params: &TrialParams<S>, pattern: RunsPattern) -> S {
    params.q().powu(pattern.k1()) * params.p().powu(pattern.k2())
}

/// Multinomial coefficient `total! / (parts[0]! * parts[1]! * ...)`.
///
/// Callers must pass parts summing to `total`; the closed-form expansions in
/// this crate construct their arguments that way by definition, so the check
/// is a debug assertion.
pub(crate) fn multinomial(total: usize, parts: &[usize]) -> BigInt {
    debug_assert_eq!(parts.iter().sum::<usize>(), total, "multinomial parts must sum to total");
    let mut rem = total;
    let mut acc = BigInt::one();
    for &part in parts {
        acc *= int_binomial(BigInt::from(rem), BigInt::from(part));
        rem -= part;
    }
    acc
}

/// Binomial coefficient `C(n, r)` as a big integer (zero when `r > n`).
pub(crate) fn binom(n: usize, r: usize) -> BigInt {
    int_binomial(BigInt::from(n), BigInt::from(r))
}

/// Expected value of `M_n` in closed form: `q * (1 + (n-k-1) p) * a(p)`.
///
/// Valid for `n >= k + 1`; for `n <= k` the statistic is identically zero
/// and this function returns zero accordingly.
pub fn mean_m<S: Scalar>(n: usize, params: &TrialParams<S>, pattern: RunsPattern) -> S {
    let k = pattern.k();
    if n <= k {
        return S::zero();
    }
    let a = a_of_p(params, pattern);
    let drift = S::one() + S::from_i64(n as i64 - k as i64 - 1) * params.p().clone();
    params.q().clone() * drift * a
}

/// The variance defect `s_{n,k}`: `Var(M_n) = E(M_n) - s_{n,k}`.
///
/// Its sign decides which two-parameter approximation family is admissible
/// (pseudo-binomial needs `s_{n,k} > 0`, negative binomial needs
/// `s_{n,k} < 0`).
pub fn s_nk<S: Scalar>(n: usize, params: &TrialParams<S>, pattern: RunsPattern) -> S {
    let k = pattern.k() as i64;
    let n = n as i64;
    let p = params.p().clone();
    let q = params.q().clone();
    let a = a_of_p(params, pattern);
    let qp = q.clone() * p.clone();
    let t1 = S::from_i64(n * (2 * k + 3) - (3 * k + 5) * (k + 1)) * qp.clone() * qp;
    let t2 = S::from_i64(2 * (k + 1)) * q.clone().powu(3);
    let t3 = S::from_i64(2 * n - 2 * k + 1) * q.clone() * q.clone();
    let t4 = S::from_i64(2 * (n - 2 * k)) * q;
    (t1 - t2 + t3 - t4) * a.clone() * a
}

/// Variance of `M_n` in closed form: `mean - s_{n,k}`.
///
/// Exact for `n >= 2k + 2`. For `k < n <= 2k + 1` the true variance picks up
/// boundary-overlap corrections that the closed form omits, and this
/// function still returns the uncorrected formula — callers on small `n`
/// should compute moments from the PMF instead. (The bound theorems only
/// consume it through the two-parameter matching, which requires
/// `n >= 5k >= 2k + 2`.)
pub fn var_m<S: Scalar>(n: usize, params: &TrialParams<S>, pattern: RunsPattern) -> S {
    if n <= pattern.k() {
        return S::zero();
    }
    mean_m(n, params, pattern) - s_nk(n, params, pattern)
}

/// The pair `(delta, delta_1)` of smoothing constants entering every bound:
/// `delta = 2 + q + (1 + q + qp)(k+1)` and
/// `delta_1 = (2 + q + (1 + q + qp)(2k+1))(k+1)`.
pub fn delta_consts<S: Scalar>(params: &TrialParams<S>, pattern: RunsPattern) -> (S, S) {
    let k = pattern.k() as i64;
    let p = params.p().clone();
    let q = params.q().clone();
    let qp = q.clone() * p;
    let base = |width: i64| {
        S::from_i64(2) + q.clone() + (S::one() + q.clone() + qp.clone()) * S::from_i64(width)
    };
    let delta = base(k + 1);
    let delta1 = base(2 * k + 1) * S::from_i64(k + 1);
    (delta, delta1)
}

/// `(k+1)^e1 / (k+2)^e2` with signed exponents.
fn kpow<S: Scalar>(k: usize, e1: i64, e2: i64) -> S {
    S::pow_ratio(k as u64 + 1, e1, k as u64 + 2, e2)
}

/// The six structural constants `c^(1)..c^(6)` appearing in the bounds.
///
/// They depend only on `(n, k)`. Indices outside `1..=6` are rejected. The
/// formulas are meaningful once the power exponents are nonnegative, which
/// the bound preconditions (`n >= 3k`, `n >= 5k`) guarantee; smaller `n`
/// still evaluates (the power ratios handle signed exponents) but the result
/// is then a formal value.
///
/// Positivity holds for indices 1..=5 on the relevant `n` ranges; `c^(6)` can
/// be negative even when `n >= 5k` (for example `n = 50`, `k = 7`), so callers
/// must treat all six as signed quantities.
pub fn c_const<S: Scalar>(index: usize, n: usize, pattern: RunsPattern) -> Result<S> {
    let k = pattern.k() as i64;
    let ku = pattern.k();
    let n = n as i64;
    let value = match index {
        1 => S::from_i64(n - 2 * k - 2) + kpow::<S>(ku, n - k, n - k - 1),
        2 => S::from_i64(n - 3 * k) + S::from_i64(k) * kpow::<S>(ku, n - 2 * k, n - 2 * k),
        3 => {
            S::from_i64(n - 5 * k)
                + S::from_i64(k * (n * k + 6 * k + 4 - k * k))
                    * kpow::<S>(ku, n - 3 * k - 1, n - 3 * k + 1)
        }
        4 => {
            S::from_i64(n * (3 * k + 1) - (11 * k * k + 9 * k + 2))
                + S::from_i64(2 * n * k + k * k + 7 * k + 2) * kpow::<S>(ku, n - 2 * k, n - 2 * k)
        }
        5 => {
            S::from_i64((n - 2 * k - 2) * (k + 1)) + kpow::<S>(ku, n - k + 1, n - k - 1)
        }
        6 => {
            S::from_i64(n * (k * k + 3 * k + 20) - (17 * k * k * k + 63 * k * k + 72 * k + 24))
                + S::from_i64(2) * S::from_i64(n + 3 * k + 6) * kpow::<S>(ku, n - k + 1, n - k - 1)
        }
        other => return Err(Error::UnsupportedConstantIndex { index: other }),
    };
    Ok(value)
}

/// The coefficient triples `(a_i, b_i(.), d_i)` driving the derivative
/// expansion of the probability generating function:
///
/// * `a = (1, -1, qp)`,
/// * `d = (n-k-2, n-k-1, n-k-2)` (upper summation limits; may be negative
///   for tiny `n`, in which case the corresponding sums are empty),
/// * `b_1(v) = v + 1`, `b_3(v) = v`, and `b_2(v) = v + 1 - q` except at the
///   special point `v = k + 1` where `b_2(k+1) = -q (k + 2)`.
pub struct SequenceConstants<S: Scalar> {
    a_coeffs: [S; 3],
    d_limits: [i64; 3],
    q: S,
    k: usize,
}

impl<S: Scalar> SequenceConstants<S> {
    pub fn new(n: usize, params: &TrialParams<S>, pattern: RunsPattern) -> Self {
        let n = n as i64;
        let k = pattern.k() as i64;
        let qp = params.q().clone() * params.p().clone();
        Self {
            a_coeffs: [S::one(), -S::one(), qp],
            d_limits: [n - k - 2, n - k - 1, n - k - 2],
            q: params.q().clone(),
            k: pattern.k(),
        }
    }

    /// `a_i` for `i` in `1..=3`.
    pub fn a(&self, i: usize) -> S {
        self.a_coeffs[i - 1].clone()
    }

    /// Upper summation limit `d_i` for `i` in `1..=3`.
    pub fn d(&self, i: usize) -> i64 {
        self.d_limits[i - 1]
    }

    /// `b_i(v)` for `i` in `1..=3`.
    pub fn b(&self, i: usize, v: i64) -> S {
        match i {
            1 => S::from_i64(v + 1),
            2 => {
                if v == self.k as i64 + 1 {
                    -(self.q.clone() * S::from_i64(self.k as i64 + 2))
                } else {
                    S::from_i64(v + 1) - self.q.clone()
                }
            }
            3 => S::from_i64(v),
            _ => unreachable!("sequence index must be 1..=3"),
        }
    }
}

/// The smoothing polynomial `C_s` expressed in the variable
/// `y = a(p) (t - 1)`: entry `j` of the returned polynomial multiplies `y^j`.
///
/// `C_s(t) = sum_{l=0}^{floor(s/k)} sum_{m=0}^{floor((s-lk)/(k+1))}
///    multinom(s - l(k-1) - mk; s - lk - m(k+1), l, m)
///    * (k+1)^{s - lk - m(k+1)} / (k+2)^{s - l(k-1) - mk + 1}
///    * (-1)^m * 2^l * y^{l+m}`.
pub fn poly_c<S: Scalar>(s: usize, pattern: RunsPattern) -> Poly<S> {
    let k = pattern.k();
    let mut out = Poly::zero();
    for l in 0..=s / k {
        let rem_l = s - l * k;
        for m in 0..=rem_l / (k + 1) {
            let m1 = rem_l - m * (k + 1);
            let top = s - l * (k - 1) - m * k;
            let mut count = multinomial(top, &[m1, l, m]);
            count <<= l; // times 2^l
            if m % 2 == 1 {
                count = -count;
            }
            let ratio = kpow::<S>(k, m1 as i64, top as i64 + 1);
            out.add_term(l + m, S::from_bigint(&count) * ratio);
        }
    }
    out
}

/// Coefficient of `t^m` in `C_s(t)`: the same polynomial as [`poly_c`] after
/// substituting `y = a(p)(t-1)` and expanding in powers of `t`.
///
/// `B_s(m) = sum_l sum_r multinom(s - l(k-1) - rk; s - lk - r(k+1), l, r)
///    * C(l+r, m) * (k+1)^{s - lk - r(k+1)} / (k+2)^{s - l(k-1) - rk + 1}
///    * (-1)^{l-m} * 2^l * a(p)^{l+r}`,
///
/// where the `l` sum starts at `max(0, m(k+1) - s)` (below that the inner
/// range is empty) and the `r` sum runs over `max(0, m-l) ..= (s-lk)/(k+1)`.
/// For `m > floor(s/k)` the coefficient is zero and that value is returned.
pub fn coeff_b<S: Scalar>(
    s: usize,
    m: usize,
    params: &TrialParams<S>,
    pattern: RunsPattern,
) -> S {
    let k = pattern.k();
    if m > s / k {
        return S::zero();
    }
    let a = a_of_p(params, pattern);
    let l_min = (m * (k + 1)).saturating_sub(s);
    let mut total = S::zero();
    for l in l_min..=s / k {
        let rem_l = s - l * k;
        let r_min = m.saturating_sub(l);
        for r in r_min..=rem_l / (k + 1) {
            let m1 = rem_l - r * (k + 1);
            let top = s - l * (k - 1) - r * k;
            let mut count = multinomial(top, &[m1, l, r]) * binom(l + r, m);
            count <<= l; // times 2^l
            if (l + m) % 2 == 1 {
                count = -count; // (-1)^{l-m}
            }
            let ratio = kpow::<S>(k, m1 as i64, top as i64 + 1);
            total = total + S::from_bigint(&count) * ratio * a.powu(l + r);
        }
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_rational::BigRational;

    type R = BigRational;

    fn rat(n: i64, d: i64) -> R {
        <R as Scalar>::from_ratio(n, d)
    }

    fn pattern(k1: usize, k2: usize) -> RunsPattern {
        RunsPattern::new(k1, k2).unwrap()
    }

    #[test]
    fn occurrence_weight_matches_definition() {
        let params = TrialParams::from_p(rat(1, 2)).unwrap();
        assert_eq!(a_of_p(&params, pattern(1, 1)), rat(1, 4));
        let params = TrialParams::decoupled(rat(89, 100), rat(11, 100)).unwrap();
        // q^3 p^4 = 11^3 * 89^4 / 100^7
        let expect = rat(11, 100).powu(3) * rat(89, 100).powu(4);
        assert_eq!(a_of_p(&params, pattern(3, 4)), expect);
    }

    #[test]
    fn multinomial_small_cases() {
        assert_eq!(multinomial(4, &[2, 1, 1]), BigInt::from(12));
        assert_eq!(multinomial(2, &[1, 1, 0, 0]), BigInt::from(2));
        assert_eq!(multinomial(0, &[0, 0, 0]), BigInt::from(1));
        assert_eq!(binom(3, 5), BigInt::from(0));
    }

    #[test]
    fn mean_at_minimal_n_is_q_times_a() {
        // With n = k + 1 the only possible occurrence is the boundary one.
        let params = TrialParams::from_p(rat(1, 2)).unwrap();
        let pat = pattern(1, 1);
        let a = a_of_p(&params, pat);
        assert_eq!(mean_m(3, &params, pat), rat(1, 2) * a);
        assert_eq!(mean_m(2, &params, pat), rat(0, 1));
    }

    #[test]
    fn c1_at_n_equals_2k_plus_2() {
        // c1(2k+2, k) = 0 + (k+1)^{k+2} / (k+2)^{k+1}.
        let pat = pattern(1, 1); // k = 2
        let got: R = c_const(1, 6, pat).unwrap();
        assert_eq!(got, rat(81, 64) * rat(1, 1)); // 3^4 / 4^3
    }

    #[test]
    fn pinned_c_values_for_k7_n50() {
        // c1(50,7) = 34 + 8^43 / 9^42, c2(50,7) = 29 + 7 (8/9)^36.
        let pat = pattern(3, 4);
        let c1: R = c_const(1, 50, pat).unwrap();
        let expect1 = rat(34, 1)
            + <R as Scalar>::pow_ratio(8, 43, 9, 42);
        assert_eq!(c1, expect1);
        assert!((c1.to_f64() - 34.056_843_923_224_51).abs() < 1e-12);
        let c2: R = c_const(2, 50, pat).unwrap();
        let expect2 = rat(29, 1) + rat(7, 1) * <R as Scalar>::pow_ratio(8, 36, 9, 36);
        assert_eq!(c2, expect2);
        assert!((c2.to_f64() - 29.100_834_054_859_405).abs() < 1e-12);
        let c6: R = c_const(6, 50, pat).unwrap();
        assert!(c6 < rat(0, 1), "c6(50, 7) is negative: {}", c6.to_f64());
        assert!((c6.to_f64() + 4_875.968_286_587_399).abs() < 1e-9);
        assert!(c_const::<R>(7, 50, pat).is_err());
        assert!(c_const::<R>(0, 50, pat).is_err());
    }

    #[test]
    fn c5_is_k_plus_1_times_c1() {
        let pat = pattern(2, 3); // k = 5
        for n in [15usize, 26, 40] {
            let c1: R = c_const(1, n, pat).unwrap();
            let c5: R = c_const(5, n, pat).unwrap();
            assert_eq!(c5, rat(6, 1) * c1);
        }
    }

    #[test]
    fn positivity_on_bound_ranges() {
        for (k1, k2) in [(1, 1), (1, 2), (2, 1), (2, 2), (3, 4), (2, 3)] {
            let pat = pattern(k1, k2);
            let k = pat.k();
            for n in (3 * k)..=(6 * k + 5) {
                for i in 1..=5 {
                    if i == 3 && n < 5 * k {
                        continue; // c3 belongs to the n >= 5k bounds
                    }
                    let c: f64 = c_const(i, n, pat).unwrap();
                    assert!(c > 0.0, "c{i}({n}, {k}) = {c} not positive");
                }
            }
        }
    }

    #[test]
    fn delta_pinned_value() {
        // q = 0.11, k = 7: delta = 2 + q + (1 + q + qp)(k+1).
        let params =
            TrialParams::decoupled(rat(89, 100), rat(11, 100)).unwrap();
        let (delta, delta1) = delta_consts(&params, pattern(3, 4));
        assert_eq!(delta, rat(2, 1) + rat(11, 100) + (rat(1, 1) + rat(11, 100) + rat(979, 10_000)) * rat(8, 1));
        assert!((delta.to_f64() - 11.7732).abs() < 1e-10);
        let qp = rat(11, 100) * rat(89, 100);
        let expect1 = (rat(2, 1) + rat(11, 100) + (rat(1, 1) + rat(11, 100) + qp) * rat(15, 1))
            * rat(8, 1);
        assert_eq!(delta1, expect1);
    }

    #[test]
    fn sequence_constants_shape() {
        let params = TrialParams::from_p(rat(2, 5)).unwrap();
        let pat = pattern(1, 2); // k = 3
        let sc = SequenceConstants::new(12, &params, pat);
        assert_eq!(sc.a(1), rat(1, 1));
        assert_eq!(sc.a(2), rat(-1, 1));
        assert_eq!(sc.a(3), rat(3, 5) * rat(2, 5));
        assert_eq!(sc.d(1), 12 - 3 - 2);
        assert_eq!(sc.d(2), 12 - 3 - 1);
        assert_eq!(sc.d(3), 12 - 3 - 2);
        assert_eq!(sc.b(1, 9), rat(10, 1));
        assert_eq!(sc.b(3, 9), rat(9, 1));
        assert_eq!(sc.b(2, 9), rat(10, 1) - rat(3, 5));
        // Special point v = k + 1 = 4.
        assert_eq!(sc.b(2, 4), -(rat(3, 5) * rat(5, 1)));
    }

    #[test]
    fn b_coefficients_trivial_values() {
        let params = TrialParams::from_p(rat(1, 3)).unwrap();
        for (k1, k2) in [(1, 1), (1, 2), (2, 2)] {
            let pat = pattern(k1, k2);
            let k = pat.k() as i64;
            // B_0(0) = 1 / (k+2)
            let b00: R = coeff_b(0, 0, &params, pat);
            assert_eq!(b00, rat(1, k + 2));
            // B_1(0) = (k+1) / (k+2)^2 for k >= 2
            let b10: R = coeff_b(1, 0, &params, pat);
            assert_eq!(b10, rat(k + 1, (k + 2) * (k + 2)));
            // B_k(1) = 2 a / (k+2)^2
            let a = a_of_p(&params, pat);
            let bk1: R = coeff_b(pat.k(), 1, &params, pat);
            assert_eq!(bk1, rat(2, (k + 2) * (k + 2)) * a);
            // Soft zero above the degree bound.
            let high: R = coeff_b(3, pat.k() * 4, &params, pat);
            assert!(high.is_zero());
        }
    }

    #[test]
    fn y_basis_and_t_basis_agree() {
        // Substituting y = a (t - 1) into poly_c must reproduce coeff_b.
        let params = TrialParams::from_p(rat(3, 7)).unwrap();
        for (k1, k2) in [(1, 1), (1, 2), (2, 1)] {
            let pat = pattern(k1, k2);
            let a = a_of_p(&params, pat);
            for s in 0..=9usize {
                let cs: Poly<R> = poly_c(s, pat);
                for t_num in [0i64, 1, 2, 5] {
                    let t = rat(t_num, 3);
                    let y = a.clone() * (t.clone() - rat(1, 1));
                    let via_y = cs.eval(&y);
                    let mut via_t = <R as Scalar>::zero();
                    let mut tm = <R as Scalar>::one();
                    for m in 0..=s / pat.k() {
                        via_t = via_t + coeff_b(s, m, &params, pat) * tm.clone();
                        tm = tm * t.clone();
                    }
                    assert_eq!(via_y, via_t, "s = {s}, t = {t_num}/3, pattern ({k1},{k2})");
                }
            }
        }
    }
}
