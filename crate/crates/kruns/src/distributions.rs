//! Distribution of the runs statistic `M_n`: recursions, closed forms, star
//! tables, the total-variation distance of the unit shift, and the
//! waiting-time law of the r-th occurrence.
//!
//! The statistic counts occurrences of the composite pattern "exactly `k1`
//! failures followed by exactly `k2` successes, closed by a failure", where
//! exactness at the left edge means the window is preceded by a success or
//! starts the sequence. Occurrences can share the closing failure with the
//! next window's leading failure, so `M_n` ranges over `0..=floor(n/k)` with
//! `k = k1 + k2`.

use crate::consts::{a_of_p, binom, multinomial};
use crate::error::{Error, Result};
use crate::params::{RunsPattern, TrialParams};
use crate::poly::Poly;
use crate::scalar::Scalar;

/// Largest magnitude of a negative entry tolerated (and clamped to zero) in
/// double mode; anything more negative indicates a logic defect upstream and
/// is left visible.
const NEGATIVE_CLAMP: f64 = 1e-14;

/// Probability mass function of `M_n` on `0..=floor(n/k)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Pmf<S: Scalar> {
    n: usize,
    probs: Vec<S>,
}

impl<S: Scalar> Pmf<S> {
    pub(crate) fn from_parts(n: usize, mut probs: Vec<S>) -> Self {
        if !S::EXACT {
            for p in probs.iter_mut() {
                if *p < S::zero() && p.abs().to_f64() <= NEGATIVE_CLAMP {
                    *p = S::zero();
                }
            }
        }
        Self { n, probs }
    }

    /// The trial count this law describes.
    pub fn n(&self) -> usize {
        self.n
    }

    /// Largest support point stored, `floor(n/k)`.
    pub fn support_max(&self) -> usize {
        self.probs.len() - 1
    }

    /// `P(M = m)`, zero beyond the stored support.
    pub fn prob(&self, m: usize) -> S {
        self.probs.get(m).cloned().unwrap_or_else(S::zero)
    }

    pub fn probs(&self) -> &[S] {
        &self.probs
    }

    pub fn total_mass(&self) -> S {
        self.probs
            .iter()
            .fold(S::zero(), |acc, p| acc + p.clone())
    }

    /// Raw moment `E[M^j]` (with the convention `0^0 = 1`).
    pub fn moment(&self, j: usize) -> S {
        let mut acc = S::zero();
        for (m, p) in self.probs.iter().enumerate() {
            let weight = if j == 0 {
                S::one()
            } else {
                S::from_u64(m as u64).powu(j)
            };
            acc = acc + weight * p.clone();
        }
        acc
    }

    pub fn mean(&self) -> S {
        self.moment(1)
    }

    /// `d_TV(M, M + 1) = 1/2 * sum_m |P(M = m) - P(M = m - 1)|`.
    pub fn tv_to_unit_shift(&self) -> S {
        let mut acc = S::zero();
        for m in 0..=self.probs.len() {
            let here = self.prob(m);
            let below = if m == 0 { S::zero() } else { self.prob(m - 1) };
            acc = acc + (here - below).abs();
        }
        acc / S::from_u64(2)
    }

    pub fn to_f64(&self) -> Pmf<f64> {
        Pmf {
            n: self.n,
            probs: self.probs.iter().map(Scalar::to_f64).collect(),
        }
    }
}

/// All rows `P(M_v = m)` for `v = 0..=n`; the recursion consumes earlier rows
/// and bound computations index them freely (out-of-range reads are zero).
#[derive(Debug, Clone)]
pub struct PmfTable<S: Scalar> {
    k: usize,
    rows: Vec<Vec<S>>,
}

impl<S: Scalar> PmfTable<S> {
    pub fn n_max(&self) -> usize {
        self.rows.len() - 1
    }

    pub fn row(&self, v: usize) -> &[S] {
        &self.rows[v]
    }

    pub fn row_pmf(&self, v: usize) -> Pmf<S> {
        Pmf::from_parts(v, self.rows[v].clone())
    }

    /// `p_{m,v}` with the zero conventions: `m < 0`, `m` beyond the support
    /// of row `v`, or `v < 0` all contribute nothing.
    pub fn prob(&self, m: i64, v: i64) -> S {
        if m < 0 || v < 0 || v as usize >= self.rows.len() {
            return S::zero();
        }
        self.rows[v as usize]
            .get(m as usize)
            .cloned()
            .unwrap_or_else(S::zero)
    }

    fn k(&self) -> usize {
        self.k
    }
}

/// Full PMF table of `M` for trial counts `0..=n` via the four-term recursion
///
/// `p_{m,v} = p_{m,v-1} - a(p) [ (p_{m,v-k} - p_{m-1,v-k})
///                             - (p_{m,v-k-1} - p_{m-1,v-k-1})
///                             + qp (p_{m,v-k-2} - p_{m-1,v-k-2}) ]`
///
/// for `v >= k+2`, with base rows: point mass at zero for `v <= k`, and
/// `(1 - q a(p), q a(p))` at `v = k+1`.
pub fn pmf_recursive<S: Scalar>(
    n: usize,
    params: &TrialParams<S>,
    pattern: RunsPattern,
) -> PmfTable<S> {
    let k = pattern.k();
    let a = a_of_p(params, pattern);
    let qp = params.q().clone() * params.p().clone();
    let mut table = PmfTable {
        k,
        rows: Vec::with_capacity(n + 1),
    };
    for v in 0..=n {
        let len = pattern.support_max(v) + 1;
        let row = if v <= k {
            let mut row = vec![S::zero(); len];
            row[0] = S::one();
            row
        } else if v == k + 1 {
            vec![
                S::one() - params.q().clone() * a.clone(),
                params.q().clone() * a.clone(),
            ]
        } else {
            let v = v as i64;
            let ki = k as i64;
            let diff = |m: i64, col: i64| table.prob(m, col) - table.prob(m - 1, col);
            (0..len as i64)
                .map(|m| {
                    table.prob(m, v - 1)
                        - a.clone()
                            * (diff(m, v - ki) - diff(m, v - ki - 1)
                                + qp.clone() * diff(m, v - ki - 2))
                })
                .collect()
        };
        table.rows.push(row);
    }
    table
}

/// Convenience: just the final row of [`pmf_recursive`].
pub fn pmf_row<S: Scalar>(n: usize, params: &TrialParams<S>, pattern: RunsPattern) -> Pmf<S> {
    pmf_recursive(n, params, pattern).row_pmf(n)
}

/// Probability generating function `phi_n(t) = E[t^{M_n}]` as a polynomial,
/// via `phi_v = phi_{v-1} + a(p)(t-1)[phi_{v-k} - phi_{v-k-1} + qp phi_{v-k-2}]`
/// with `phi_v = 1` for `v <= k` and `phi_{k+1} = 1 + q a(p) (t-1)`.
pub fn pgf_recursive<S: Scalar>(
    n: usize,
    params: &TrialParams<S>,
    pattern: RunsPattern,
) -> Poly<S> {
    let k = pattern.k();
    let a = a_of_p(params, pattern);
    let qp = params.q().clone() * params.p().clone();
    // a(p) * (t - 1)
    let a_t_minus_1 = Poly::from_coeffs(vec![-a.clone(), a.clone()]);
    let mut rows: Vec<Poly<S>> = Vec::with_capacity(n + 1);
    for v in 0..=n {
        let poly = if v <= k {
            Poly::constant(S::one())
        } else if v == k + 1 {
            Poly::constant(S::one()).add(&a_t_minus_1.scale(params.q()))
        } else {
            let bracket = rows[v - k]
                .sub(&rows[v - k - 1])
                .add(&rows[v - k - 2].scale(&qp));
            rows[v - 1].add(&a_t_minus_1.mul(&bracket))
        };
        rows.push(poly);
    }
    rows.pop().expect("rows nonempty for v in 0..=n")
}

/// Raw moments `mu_{v,j} = E[(M_v)^j]` for all `v <= n`, `j <= j_max`, via
///
/// `mu_{v,j} = mu_{v-1,j} + a(p) sum_{l=0}^{j-1} C(j,l)
///            [mu_{v-k,l} - mu_{v-k-1,l} + qp mu_{v-k-2,l}]`
///
/// with `mu_{v,0} = 1` throughout, `mu_{v,j} = 0` for `v <= k`, and
/// `mu_{k+1,j} = q a(p)` for every `j >= 1`.
pub fn moments_recursive<S: Scalar>(
    n: usize,
    j_max: usize,
    params: &TrialParams<S>,
    pattern: RunsPattern,
) -> Vec<Vec<S>> {
    let k = pattern.k();
    let a = a_of_p(params, pattern);
    let qp = params.q().clone() * params.p().clone();
    let mut table: Vec<Vec<S>> = Vec::with_capacity(n + 1);
    // mu[v][l] with the convention mu_{v,0} = 1; rows v < 0 are all zero
    // except that same convention, handled by `moment_at`.
    let moment_at = |table: &Vec<Vec<S>>, v: i64, l: usize| -> S {
        if l == 0 {
            return S::one();
        }
        if v < 0 {
            return S::zero();
        }
        table[v as usize][l].clone()
    };
    for v in 0..=n {
        let mut row = vec![S::zero(); j_max + 1];
        row[0] = S::one();
        if v == k + 1 {
            for j in 1..=j_max {
                row[j] = params.q().clone() * a.clone();
            }
        } else if v >= k + 2 {
            let vi = v as i64;
            let ki = k as i64;
            for j in 1..=j_max {
                let mut sum = S::zero();
                for l in 0..j {
                    let c = S::from_bigint(&binom(j, l));
                    let combo = moment_at(&table, vi - ki, l)
                        - moment_at(&table, vi - ki - 1, l)
                        + qp.clone() * moment_at(&table, vi - ki - 2, l);
                    sum = sum + c * combo;
                }
                row[j] = table[v - 1][j].clone() + a.clone() * sum;
            }
        }
        table.push(row);
    }
    table
}

/// The auxiliary power sum `psi_v` of the closed PGF, expressed in
/// `y = a(p)(t - 1)`:
///
/// `psi_v(t) = sum_{l,r,s} multinom(v - l(k-1) - rk - s(k+1);
///     v - lk - r(k+1) - s(k+2), l, r, s) * (-1)^r * (qp)^s * y^{l+r+s}`.
fn psi<S: Scalar>(v: usize, params: &TrialParams<S>, pattern: RunsPattern, y: &S) -> S {
    let k = pattern.k();
    let qp = params.q().clone() * params.p().clone();
    let mut total = S::zero();
    for l in 0..=v / k {
        let rem_l = v - l * k;
        for r in 0..=rem_l / (k + 1) {
            let rem_r = rem_l - r * (k + 1);
            for s in 0..=rem_r / (k + 2) {
                let m1 = rem_r - s * (k + 2);
                let top = v - l * (k - 1) - r * k - s * (k + 1);
                let mut count = multinomial(top, &[m1, l, r, s]);
                if r % 2 == 1 {
                    count = -count;
                }
                total = total
                    + S::from_bigint(&count) * qp.powu(s) * y.powu(l + r + s);
            }
        }
    }
    total
}

/// Closed-form evaluation of the PGF:
/// `phi_n(t) = psi_n - a(p)(t-1) [ psi_{n-k} - q psi_{n-k-1} ]`.
///
/// Double mode accumulates alternating big terms for large `n`; prefer exact
/// mode beyond n of about 40 (the dual-route tests quantify this).
pub fn pgf_closed<S: Scalar>(
    n: usize,
    params: &TrialParams<S>,
    pattern: RunsPattern,
    t: &S,
) -> S {
    let k = pattern.k();
    if n <= k {
        return S::one();
    }
    let a = a_of_p(params, pattern);
    let y = a * (t.clone() - S::one());
    let head = psi(n, params, pattern, &y);
    let tail = psi(n - k, params, pattern, &y)
        - params.q().clone() * psi(n - k - 1, params, pattern, &y);
    head - y * tail
}

/// The generalized closed-form kernel `p~_{m,v,i}`; `i = 0` is the plain
/// kernel of the closed PMF, `i = 1, 2` appear in the expansion of the
/// shift total-variation distance.
///
/// `p~_{m,v,i} = sum_{l,u,w} multinom(v - l(k-1) - uk - w(k+1);
///     v - lk - u(k+1) - w(k+2), l, u, w) * C(l+u+w+i, m)
///     * (-1)^{l-m-w} * a(p)^{l+u+w} * (qp)^w`,
///
/// zero whenever `v < 0` or `m < 0`.
pub fn p_tilde<S: Scalar>(
    m: i64,
    v: i64,
    i: usize,
    params: &TrialParams<S>,
    pattern: RunsPattern,
) -> S {
    if m < 0 || v < 0 {
        return S::zero();
    }
    let (m, v) = (m as usize, v as usize);
    let k = pattern.k();
    let a = a_of_p(params, pattern);
    let qp = params.q().clone() * params.p().clone();
    let mut total = S::zero();
    for l in 0..=v / k {
        let rem_l = v - l * k;
        for u in 0..=rem_l / (k + 1) {
            let rem_u = rem_l - u * (k + 1);
            for w in 0..=rem_u / (k + 2) {
                let m1 = rem_u - w * (k + 2);
                let top = v - l * (k - 1) - u * k - w * (k + 1);
                let mut count = multinomial(top, &[m1, l, u, w]) * binom(l + u + w + i, m);
                if (l + m + w) % 2 == 1 {
                    count = -count; // (-1)^{l - m - w}
                }
                total = total + S::from_bigint(&count) * a.powu(l + u + w) * qp.powu(w);
            }
        }
    }
    total
}

/// Closed-form PMF:
/// `p_{m,n} = p~_{m,n} + a(p) [ (p~_{m,n-k} - p~_{m-1,n-k})
///                            - q (p~_{m,n-k-1} - p~_{m-1,n-k-1}) ]`
/// with `p~ = p~_{.,.,0}`.
pub fn pmf_closed<S: Scalar>(
    m: usize,
    n: usize,
    params: &TrialParams<S>,
    pattern: RunsPattern,
) -> S {
    let a = a_of_p(params, pattern);
    let mi = m as i64;
    let ni = n as i64;
    let ki = pattern.k() as i64;
    let tilde = |m: i64, v: i64| p_tilde(m, v, 0, params, pattern);
    let first = tilde(mi, ni - ki) - tilde(mi - 1, ni - ki);
    let second = tilde(mi, ni - ki - 1) - tilde(mi - 1, ni - ki - 1);
    tilde(mi, ni) + a * (first - params.q().clone() * second)
}

/// The two star tables anchored at a fixed `n`, for `1 <= l <= l_max`.
///
/// `p*_{m,n,l}` satisfies the reduction identity
/// `p_{m,n} = p_{m,n-l} - a(p) (p*_{m,n,l} - p*_{m-1,n,l})`, and
/// `p**` applies the same construction one level up. Rows `m` run over
/// `0..=floor(n/k) + 1` so the identity's `m-1` shift stays in range.
#[derive(Debug, Clone)]
pub struct StarTables<S: Scalar> {
    n: usize,
    l_max: usize,
    // star[l - 1][m], l = 1..=k + l_max + 1 internally (the double-star
    // construction consumes the extra columns); only 1..=l_max is public.
    star: Vec<Vec<S>>,
    star_star: Vec<Vec<S>>,
}

impl<S: Scalar> StarTables<S> {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn l_max(&self) -> usize {
        self.l_max
    }

    /// `p*_{m,n,l}` for `1 <= l <= l_max` (zero for `m` out of range).
    pub fn p_star(&self, m: i64, l: usize) -> S {
        assert!((1..=self.l_max).contains(&l), "l out of requested range");
        star_get(&self.star, m, l)
    }

    /// `p**_{m,n,l}` for `1 <= l <= l_max` (zero for `m` out of range).
    pub fn p_star_star(&self, m: i64, l: usize) -> S {
        assert!((1..=self.l_max).contains(&l), "l out of requested range");
        star_get(&self.star_star, m, l)
    }
}

fn star_get<S: Scalar>(rows: &[Vec<S>], m: i64, l: usize) -> S {
    if m < 0 {
        return S::zero();
    }
    rows[l - 1].get(m as usize).cloned().unwrap_or_else(S::zero)
}

/// Builds both star tables from a PMF table reaching at least `n`.
///
/// `p*_{m,n,l} = p_{m,n-k} - p_{m,n-k-l}
///   + sum_{u=0}^{l-1} [ qp p_{m,n-k-u-2}
///                       - p_{m,n-k-u}   * [u = n-k]
///                       + q p_{m,n-k-u-1} * [u = n-k-1] ]`
///
/// and `p**` is the same expression with `p_{m,n-k-x}` replaced by
/// `p*_{m,n,k+x}` throughout (the second index becomes the star level).
/// Terms whose trial count goes negative contribute zero.
pub fn star_tables<S: Scalar>(
    table: &PmfTable<S>,
    n: usize,
    l_max: usize,
    params: &TrialParams<S>,
    pattern: RunsPattern,
) -> StarTables<S> {
    assert!(l_max >= 1, "l_max must be at least 1");
    assert!(table.n_max() >= n, "PMF table must reach n");
    assert_eq!(table.k(), pattern.k(), "table and pattern disagree on k");
    let k = pattern.k() as i64;
    let ni = n as i64;
    let qp = params.q().clone() * params.p().clone();
    let q = params.q().clone();
    let m_rows = pattern.support_max(n) + 2;
    let internal_l = k as usize + l_max + 1;

    // p at level x means p_{m, n - k - x}; the double-star pass swaps in
    // p*_{m, n, k + x} for the same x.
    let build = |levels: usize, level: &dyn Fn(i64, i64) -> S| -> Vec<Vec<S>> {
        let mut rows = Vec::with_capacity(levels);
        for l in 1..=levels as i64 {
            let mut row = Vec::with_capacity(m_rows);
            for m in 0..m_rows as i64 {
                let mut acc = level(m, 0) - level(m, l);
                for u in 0..l {
                    acc = acc + qp.clone() * level(m, u + 2);
                    if u == ni - k {
                        acc = acc - level(m, u);
                    }
                    if u == ni - k - 1 {
                        acc = acc + q.clone() * level(m, u + 1);
                    }
                }
                row.push(acc);
            }
            rows.push(row);
        }
        rows
    };

    // The double-star rows for l <= l_max consume star levels up to
    // k + l_max + 1, so the star pass builds that far before trimming.
    let from_pmf = |m: i64, x: i64| table.prob(m, ni - k - x);
    let star = build(internal_l, &from_pmf);
    let from_star = |m: i64, x: i64| {
        let l = k + x;
        if l < 1 {
            // p*_{m,n,l} is defined for l >= 1; the x = 0 anchor is l = k >= 1.
            return S::zero();
        }
        star_get(&star, m, l as usize)
    };
    let star_star = build(l_max, &from_star);

    StarTables {
        n,
        l_max,
        star: star.into_iter().take(l_max).collect::<Vec<_>>(),
        star_star,
    }
}

/// `d_TV(M_n, M_n + 1)`, computed directly from the PMF.
pub fn tv_consecutive<S: Scalar>(
    n: usize,
    params: &TrialParams<S>,
    pattern: RunsPattern,
) -> S {
    pmf_row(n, params, pattern).tv_to_unit_shift()
}

/// `d_TV(M_n, M_n + 1)` via the closed-form expansion
/// `1/2 sum_m | p~_{m,n,1} + a(p) (p~_{m,n-k,2} - q p~_{m,n-k-1,2}) |`
/// — the verification route for [`tv_consecutive`].
pub fn tv_consecutive_expansion<S: Scalar>(
    n: usize,
    params: &TrialParams<S>,
    pattern: RunsPattern,
) -> S {
    let a = a_of_p(params, pattern);
    let ni = n as i64;
    let ki = pattern.k() as i64;
    let mut acc = S::zero();
    for m in 0..=(pattern.support_max(n) + 1) as i64 {
        let term = p_tilde(m, ni, 1, params, pattern)
            + a.clone()
                * (p_tilde(m, ni - ki, 2, params, pattern)
                    - params.q().clone() * p_tilde(m, ni - ki - 1, 2, params, pattern));
        acc = acc + term.abs();
    }
    acc / S::from_u64(2)
}

/// A PMF on `0..probs.len()` together with an upper bound on the total
/// variation error committed by ignoring everything beyond it.
///
/// Finite laws carry `tail = 0`; truncations of unbounded laws carry the
/// neglected (relative) mass, which [`crate::oracle::exact_tv`] adds to the
/// distance so every reported total variation value is an upper bound.
#[derive(Debug, Clone, PartialEq)]
pub struct TruncatedPmf<S: Scalar> {
    probs: Vec<S>,
    tail: S,
}

impl<S: Scalar> TruncatedPmf<S> {
    pub fn new(probs: Vec<S>, tail: S) -> Self {
        Self { probs, tail }
    }

    pub fn probs(&self) -> &[S] {
        &self.probs
    }

    pub fn tail(&self) -> S {
        self.tail.clone()
    }

    pub fn prob(&self, m: usize) -> S {
        self.probs.get(m).cloned().unwrap_or_else(S::zero)
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }
}

impl<S: Scalar> From<&Pmf<S>> for TruncatedPmf<S> {
    fn from(pmf: &Pmf<S>) -> Self {
        Self {
            probs: pmf.probs().to_vec(),
            tail: S::zero(),
        }
    }
}

/// Waiting-time law of the r-th occurrence: `f_r(m) = P(T_r = m)`.
#[derive(Debug, Clone, PartialEq)]
pub struct WaitingPmf<S: Scalar> {
    r: usize,
    probs: Vec<S>,
}

impl<S: Scalar> WaitingPmf<S> {
    pub fn r(&self) -> usize {
        self.r
    }

    pub fn m_max(&self) -> usize {
        self.probs.len() - 1
    }

    pub fn prob(&self, m: usize) -> S {
        self.probs.get(m).cloned().unwrap_or_else(S::zero)
    }

    pub fn probs(&self) -> &[S] {
        &self.probs
    }

    /// `P(T_r <= n)`, which by duality equals `P(M_n >= r)`.
    pub fn cdf(&self, n: usize) -> S {
        self.probs
            .iter()
            .take(n + 1)
            .fold(S::zero(), |acc, f| acc + f.clone())
    }
}

/// Corrected waiting-time PGF
/// `M_r(t) = (qt / (1 - pt)) *
///   ( a(p) t^k (1-qt)(1-pt) / (1 - t + a(p) t^k (1-qt)(1-pt)) )^r`,
/// satisfying `M_r(1) = 1`.
pub fn waiting_pgf<S: Scalar>(
    r: usize,
    params: &TrialParams<S>,
    pattern: RunsPattern,
    t: &S,
) -> Result<S> {
    if r == 0 {
        // T_0 = 0 by convention: the zeroth occurrence needs no trials.
        return Ok(S::one());
    }
    let core = waiting_core(params, pattern, t)?;
    let lead_den = S::one() - params.p().clone() * t.clone();
    if lead_den.is_zero() {
        return Err(Error::EvaluationAtPole {
            context: "waiting-time PGF at t = 1/p",
        });
    }
    Ok(params.q().clone() * t.clone() / lead_den * core.powu(r))
}

/// The uncorrected variant of the waiting-time PGF (missing the `qt`
/// normalization of the leading geometric factor): `core^r / (1 - pt)`.
///
/// It fails the PGF normalization requirement — at `t = 1` it evaluates to
/// `1/q` instead of `1` — and is retained only so tests can pin why the
/// corrected form is used.
pub fn waiting_pgf_uncorrected<S: Scalar>(
    r: usize,
    params: &TrialParams<S>,
    pattern: RunsPattern,
    t: &S,
) -> Result<S> {
    let core = waiting_core(params, pattern, t)?;
    let lead_den = S::one() - params.p().clone() * t.clone();
    if lead_den.is_zero() {
        return Err(Error::EvaluationAtPole {
            context: "waiting-time PGF at t = 1/p",
        });
    }
    Ok(core.powu(r) / lead_den)
}

fn waiting_core<S: Scalar>(
    params: &TrialParams<S>,
    pattern: RunsPattern,
    t: &S,
) -> Result<S> {
    let a = a_of_p(params, pattern);
    let num = a
        * t.powu(pattern.k())
        * (S::one() - params.q().clone() * t.clone())
        * (S::one() - params.p().clone() * t.clone());
    let den = S::one() - t.clone() + num.clone();
    if den.is_zero() {
        return Err(Error::EvaluationAtPole {
            context: "waiting-time PGF core denominator",
        });
    }
    Ok(num / den)
}

/// Waiting-time PMF `f_r(m)` for `m <= m_max` from the displayed recursions:
///
/// * `f_1(k+1) = q a(p)`, `f_1(k+2) = qp a(p)`, and for `m >= k+3`
///   `f_1(m) = f_1(m-1) - a(p)[f_1(m-k) - f_1(m-k-1) + qp f_1(m-k-2)]`
///   (the two base values override the recursion on their own indices);
/// * for `r >= 2` and `m >= rk + 1`
///   `f_r(m) = f_r(m-1) + a(p)[ f_{r-1}(m-k) - f_r(m-k)
///            - f_{r-1}(m-k-1) + f_r(m-k-1)
///            + qp (f_{r-1}(m-k-2) - f_r(m-k-2)) ]`;
/// * `f_r(m) = 0` for `m <= rk`, and `f_0(m)` is the point mass at 0.
pub fn waiting_pmf<S: Scalar>(
    r: usize,
    m_max: usize,
    params: &TrialParams<S>,
    pattern: RunsPattern,
) -> WaitingPmf<S> {
    assert!(r >= 1, "waiting_pmf requires r >= 1");
    let k = pattern.k();
    let a = a_of_p(params, pattern);
    let qp = params.q().clone() * params.p().clone();
    let zero_row = || vec![S::zero(); m_max + 1];
    let get = |row: &Vec<S>, m: i64| -> S {
        if m < 0 {
            S::zero()
        } else {
            row.get(m as usize).cloned().unwrap_or_else(S::zero)
        }
    };
    // f_0 is the point mass at zero.
    let mut prev = zero_row();
    prev[0] = S::one();
    let mut current = zero_row();
    for level in 1..=r {
        current = zero_row();
        if level == 1 {
            if k + 1 <= m_max {
                current[k + 1] = params.q().clone() * a.clone();
            }
            if k + 2 <= m_max {
                current[k + 2] = qp.clone() * a.clone();
            }
            for m in (k + 3)..=m_max {
                let mi = m as i64;
                let ki = k as i64;
                current[m] = get(&current, mi - 1)
                    - a.clone()
                        * (get(&current, mi - ki) - get(&current, mi - ki - 1)
                            + qp.clone() * get(&current, mi - ki - 2));
            }
        } else {
            let start = level * k + 1;
            for m in start..=m_max {
                let mi = m as i64;
                let ki = k as i64;
                let mix = |offset: i64| -> S {
                    get(&prev, mi - ki - offset) - get(&current, mi - ki - offset)
                };
                current[m] = get(&current, mi - 1)
                    + a.clone() * (mix(0) - mix(1) + qp.clone() * mix(2));
            }
        }
        if level < r {
            prev = std::mem::take(&mut current);
        }
    }
    WaitingPmf {
        r,
        probs: current,
    }
}

/// Raw waiting-time moments `mu~_{r,j} = E[T_r^j]` for all occurrence indices
/// up to `r` and orders up to `j_max`, returned as `table[r][j]`.
///
/// The displayed recursion is implicit (the unknown appears on both sides);
/// isolating the `l = j` term, whose coefficient is `a(p) q p`, yields the
/// explicit solves implemented here:
///
/// * `mu~_{1,j} = [ sum_{l<j} C(j,l)(1 - a h_{j-l}) mu~_{1,l}
///                + q a ((k+1)^j - q (k+2)^j) ] / (a q p)`,
/// * `mu~_{r,j} = mu~_{r-1,j} + [ sum_{l<j} C(j,l)( mu~_{r,l}
///                + a h_{j-l} (mu~_{r-1,l} - mu~_{r,l}) ) ] / (a q p)`,
///
/// with `h_i = k^i - (k+1)^i + qp (k+2)^i` and `mu~_{0,j} = [j = 0]`.
/// The displayed side condition "l >= 1" is read as `j >= 1` (the recursion
/// is vacuous at `j = 0`, where every raw moment is 1).
pub fn waiting_moments<S: Scalar>(
    r: usize,
    j_max: usize,
    params: &TrialParams<S>,
    pattern: RunsPattern,
) -> Result<Vec<Vec<S>>> {
    assert!(r >= 1, "waiting_moments requires r >= 1");
    let k = pattern.k() as u64;
    let a = a_of_p(params, pattern);
    let qp = params.q().clone() * params.p().clone();
    let divisor = a.clone() * qp.clone();
    if divisor.is_zero() {
        return Err(Error::DegenerateMomentSolve);
    }
    let h = |i: usize| -> S {
        S::from_u64(k).powu(i) - S::from_u64(k + 1).powu(i)
            + qp.clone() * S::from_u64(k + 2).powu(i)
    };
    let mut table: Vec<Vec<S>> = Vec::with_capacity(r + 1);
    let mut row0 = vec![S::zero(); j_max + 1];
    row0[0] = S::one();
    table.push(row0);
    for level in 1..=r {
        let mut row = vec![S::zero(); j_max + 1];
        row[0] = S::one();
        for j in 1..=j_max {
            let mut sum = S::zero();
            for l in 0..j {
                let c = S::from_bigint(&binom(j, l));
                if level == 1 {
                    sum = sum + c * (S::one() - a.clone() * h(j - l)) * row[l].clone();
                } else {
                    let prev = &table[level - 1];
                    sum = sum
                        + c * (row[l].clone()
                            + a.clone() * h(j - l) * (prev[l].clone() - row[l].clone()));
                }
            }
            row[j] = if level == 1 {
                let forcing = params.q().clone()
                    * a.clone()
                    * (S::from_u64(k + 1).powu(j)
                        - params.q().clone() * S::from_u64(k + 2).powu(j));
                (sum + forcing) / divisor.clone()
            } else {
                table[level - 1][j].clone() + sum / divisor.clone()
            };
        }
        table.push(row);
    }
    Ok(table)
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_rational::BigRational;

    type R = BigRational;

    fn rat(n: i64, d: i64) -> R {
        <R as Scalar>::from_ratio(n, d)
    }

    fn half_params() -> TrialParams<R> {
        TrialParams::from_p(rat(1, 2)).unwrap()
    }

    fn pat(k1: usize, k2: usize) -> RunsPattern {
        RunsPattern::new(k1, k2).unwrap()
    }

    #[test]
    fn pmf_base_rows() {
        let params = half_params();
        let table = pmf_recursive(5, &params, pat(1, 1));
        // Rows 0..=k are the point mass at zero.
        assert_eq!(table.row(0), &[rat(1, 1)]);
        assert_eq!(table.row(2), &[rat(1, 1), rat(0, 1)]);
        // Row k+1 = (1 - q a, q a) with a = qp = 1/4, q a = 1/8.
        assert_eq!(table.row(3), &[rat(7, 8), rat(1, 8)]);
        // P(M = 1 | n = 3) = 1/8: only the sequence 010 completes.
        assert_eq!(table.prob(1, 3), rat(1, 8));
        // Every row sums to one.
        for v in 0..=5 {
            assert_eq!(table.row_pmf(v).total_mass(), rat(1, 1));
        }
    }

    #[test]
    fn pgf_and_pmf_agree() {
        let params = TrialParams::from_p(rat(2, 7)).unwrap();
        for (k1, k2) in [(1, 1), (1, 2), (2, 1)] {
            let pattern = pat(k1, k2);
            for n in 0..=12usize {
                let poly = pgf_recursive(n, &params, pattern);
                let row = pmf_row(n, &params, pattern);
                assert_eq!(poly.eval(&rat(1, 1)), rat(1, 1), "normalization n={n}");
                for m in 0..=row.support_max() {
                    assert_eq!(poly.coeff(m), row.prob(m), "n={n} m={m}");
                }
            }
        }
    }

    #[test]
    fn closed_pgf_matches_recursive() {
        let params = TrialParams::from_p(rat(2, 5)).unwrap();
        let pattern = pat(2, 1);
        for n in 0..=14usize {
            let poly = pgf_recursive(n, &params, pattern);
            for t_num in [-1i64, 0, 1, 2] {
                let t = rat(t_num, 3);
                assert_eq!(
                    pgf_closed(n, &params, pattern, &t),
                    poly.eval(&t),
                    "n={n}, t={t_num}/3"
                );
            }
        }
    }

    #[test]
    fn closed_pmf_matches_recursive() {
        let params = TrialParams::from_p(rat(3, 10)).unwrap();
        for (k1, k2) in [(1, 1), (1, 2), (2, 2)] {
            let pattern = pat(k1, k2);
            for n in 0..=12usize {
                let row = pmf_row(n, &params, pattern);
                for m in 0..=row.support_max() {
                    assert_eq!(
                        pmf_closed(m, n, &params, pattern),
                        row.prob(m),
                        "({k1},{k2}) n={n} m={m}"
                    );
                }
            }
        }
    }

    #[test]
    fn moments_match_pmf() {
        let params = TrialParams::from_p(rat(1, 3)).unwrap();
        let pattern = pat(1, 2);
        let table = moments_recursive(13, 4, &params, pattern);
        for n in 0..=13usize {
            let row = pmf_row(n, &params, pattern);
            for j in 0..=4usize {
                assert_eq!(table[n][j], row.moment(j), "n={n} j={j}");
            }
        }
    }

    #[test]
    fn star_identity_holds() {
        let params = TrialParams::from_p(rat(1, 2)).unwrap();
        for (k1, k2) in [(1, 1), (1, 2), (2, 1)] {
            let pattern = pat(k1, k2);
            let k = pattern.k();
            let a = a_of_p(&params, pattern);
            for n in [3usize, 5, 8, 11] {
                let l_max = (3 * k).min(n);
                let table = pmf_recursive(n, &params, pattern);
                let stars = star_tables(&table, n, l_max, &params, pattern);
                for l in 1..=l_max {
                    for m in 0..=(pattern.support_max(n) + 1) as i64 {
                        let lhs = table.prob(m, n as i64);
                        let rhs = table.prob(m, n as i64 - l as i64)
                            - a.clone()
                                * (stars.p_star(m, l) - stars.p_star(m - 1, l));
                        assert_eq!(lhs, rhs, "({k1},{k2}) n={n} l={l} m={m}");
                    }
                }
            }
        }
    }

    #[test]
    fn tv_routes_agree_exactly() {
        let params = TrialParams::from_p(rat(2, 5)).unwrap();
        for (k1, k2) in [(1, 1), (2, 1)] {
            let pattern = pat(k1, k2);
            for n in 0..=14usize {
                let direct = tv_consecutive(n, &params, pattern);
                let expansion = tv_consecutive_expansion(n, &params, pattern);
                assert_eq!(direct, expansion, "({k1},{k2}) n={n}");
            }
        }
    }

    #[test]
    fn tv_trivial_values() {
        let params = half_params();
        let pattern = pat(1, 1);
        // n <= k: point mass at 0 against point mass at 1.
        assert_eq!(tv_consecutive(2, &params, pattern), rat(1, 1));
        // n = k+1 with q a = 1/8 <= 1/2: distance 1 - q a.
        assert_eq!(tv_consecutive(3, &params, pattern), rat(7, 8));
    }

    #[test]
    fn waiting_pmf_bases_and_duality() {
        let params = half_params();
        let pattern = pat(1, 1);
        let k = pattern.k();
        let a = a_of_p(&params, pattern);
        let f1 = waiting_pmf(1, 30, &params, pattern);
        assert_eq!(f1.prob(k + 1), params.q().clone() * a.clone());
        assert_eq!(
            f1.prob(k + 2),
            params.q().clone() * params.p().clone() * a.clone()
        );
        for m in 0..=k {
            assert!(f1.prob(m).is_zero());
        }
        // Duality: P(T_r <= n) = P(M_n >= r).
        for r in 1..=2usize {
            let fr = waiting_pmf(r, 20, &params, pattern);
            for n in 0..=20usize {
                let row = pmf_row(n, &params, pattern);
                let tail = (r..=row.support_max())
                    .fold(<R as Scalar>::zero(), |acc, m| acc + row.prob(m));
                assert_eq!(fr.cdf(n), tail, "r={r} n={n}");
            }
        }
    }

    #[test]
    fn waiting_pgf_normalization_and_pole() {
        let params = half_params();
        let pattern = pat(1, 1);
        for r in 1..=5usize {
            assert_eq!(
                waiting_pgf(r, &params, pattern, &rat(1, 1)).unwrap(),
                rat(1, 1)
            );
            // The uncorrected form misses normalization by exactly 1/q.
            assert_eq!(
                waiting_pgf_uncorrected(r, &params, pattern, &rat(1, 1)).unwrap(),
                rat(2, 1)
            );
        }
        assert_eq!(waiting_pgf(3, &params, pattern, &rat(0, 1)).unwrap(), rat(0, 1));
        // t = 1/p = 2 is the pole of the leading factor.
        assert!(matches!(
            waiting_pgf(1, &params, pattern, &rat(2, 1)),
            Err(Error::EvaluationAtPole { .. })
        ));
    }

    #[test]
    fn waiting_pgf_matches_series() {
        // Compare M_r(t) against the truncated series sum of f_r with a
        // crude geometric tail estimate.
        let params = TrialParams::from_p(0.5f64).unwrap();
        let pattern = pat(1, 1);
        let t = 0.5f64;
        for r in 1..=3usize {
            let m_max = 220usize;
            let f = waiting_pmf(r, m_max, &params, pattern);
            let partial: f64 = f
                .probs()
                .iter()
                .enumerate()
                .map(|(m, p)| p * t.powi(m as i32))
                .sum();
            let direct = waiting_pgf(r, &params, pattern, &t).unwrap();
            // Tail of the series is at most t^{m_max} (probabilities <= 1).
            assert!((direct - partial).abs() < t.powi(m_max as i32 - 1) + 1e-12);
        }
    }

    #[test]
    fn waiting_moments_pinned_and_series_checked() {
        let params = half_params();
        let pattern = pat(1, 1);
        let table = waiting_moments(3, 2, &params, pattern).unwrap();
        // mu~_{0,j} = [j = 0].
        assert_eq!(table[0], vec![rat(1, 1), rat(0, 1), rat(0, 1)]);
        // Pinned closed-form value: E[T_1] = 18 for k1 = k2 = 1, p = 1/2.
        assert_eq!(table[1][1], rat(18, 1));
        // Monotonicity in r for the first moment.
        assert!(table[1][1] < table[2][1]);
        assert!(table[2][1] < table[3][1]);
        // Series cross-check in double precision.
        let params_f = TrialParams::from_p(0.5f64).unwrap();
        let f1 = waiting_pmf(1, 2_000, &params_f, pattern);
        let series_mean: f64 = f1
            .probs()
            .iter()
            .enumerate()
            .map(|(m, p)| m as f64 * p)
            .sum();
        assert!((series_mean - 18.0).abs() < 1e-9);
    }
}
