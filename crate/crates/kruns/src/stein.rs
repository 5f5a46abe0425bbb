//! Discrete Gibbs measures, Stein operators, the perturbed operator for the
//! runs statistic, moment matching, and the five explicit total-variation
//! bounds.
//!
//! The target laws (Poisson, pseudo-binomial, negative binomial) are all
//! discrete Gibbs measures `gamma(m) ∝ e^{U(m)} w^m / m!` whose mass ratios
//! are affine: `gamma(m+1)/gamma(m) = w (ratio_a + ratio_b m) / (m+1)`. The
//! Stein operator of such a law is `A g(m) = w (ratio_a + ratio_b m) g(m+1)
//! - m g(m)`; the operator of the runs statistic is this plus a perturbation
//! `U` built from shifted-trial-count PMFs, and the bound theorems control
//! the total variation distance by the size of that perturbation.

use crate::consts::{a_of_p, c_const, coeff_b, delta_consts, mean_m, s_nk, SequenceConstants};
use crate::distributions::{tv_consecutive, PmfTable, TruncatedPmf};
use crate::error::{Error, Result};
use crate::params::{RunsPattern, TrialParams};
use crate::scalar::Scalar;

/// A discrete Gibbs measure in ratio form.
///
/// `beta` is the derived normalizing constant of the weights built
/// multiplicatively from the ratio encoding with seed 1 at `m = 0`; it is
/// transcendental for the usual targets, so exact-mode specs carry `None`
/// and double-mode consumers compute it on demand (see [`gibbs_table`]).
#[derive(Debug, Clone, PartialEq)]
pub struct GibbsSpec<S: Scalar> {
    pub w: S,
    pub ratio_a: S,
    pub ratio_b: S,
    /// Last support point for truncated laws, `None` when unbounded.
    pub support_end: Option<usize>,
    pub beta: Option<S>,
}

/// One of the three approximating laws, with its matched parameters.
///
/// The stored `p`/`q` pairs are genuinely complementary (`q = 1 - p`);
/// decoupling is a concept of the trial parameters only.
#[derive(Debug, Clone, PartialEq)]
pub enum TargetFamily<S: Scalar> {
    Poisson { lambda: S },
    PseudoBinomial { alpha: S, p: S, q: S },
    NegativeBinomial { alpha: S, p: S, q: S },
}

impl<S: Scalar> TargetFamily<S> {
    pub fn family_name(&self) -> &'static str {
        match self {
            TargetFamily::Poisson { .. } => "poisson",
            TargetFamily::PseudoBinomial { .. } => "pseudo-binomial",
            TargetFamily::NegativeBinomial { .. } => "negative-binomial",
        }
    }

    /// Mean of the (untruncated-form) law; this is the quantity the matching
    /// equations set equal to the mean of `M`.
    pub fn mean(&self) -> S {
        match self {
            TargetFamily::Poisson { lambda } => lambda.clone(),
            TargetFamily::PseudoBinomial { alpha, p, .. } => alpha.clone() * p.clone(),
            TargetFamily::NegativeBinomial { alpha, p, q } => {
                alpha.clone() * q.clone() / p.clone()
            }
        }
    }

    /// The ratio-form Gibbs specification of the law:
    ///
    /// * Poisson(λ): `w = λ`, ratio `1 + 0·m`, unbounded;
    /// * pseudo-binomial(α̌, p̌): `w = p̌/q̌`, ratio `α̌ - m`, support `0..=⌊α̌⌋`;
    /// * negative binomial(α̂, p̂): `w = q̂`, ratio `α̂ + m`, unbounded.
    pub fn gibbs_spec(&self) -> GibbsSpec<S> {
        match self {
            TargetFamily::Poisson { lambda } => GibbsSpec {
                w: lambda.clone(),
                ratio_a: S::one(),
                ratio_b: S::zero(),
                support_end: None,
                beta: None,
            },
            TargetFamily::PseudoBinomial { alpha, p, q } => GibbsSpec {
                w: p.clone() / q.clone(),
                ratio_a: alpha.clone(),
                ratio_b: -S::one(),
                support_end: Some(alpha.floor_u64() as usize),
                beta: None,
            },
            TargetFamily::NegativeBinomial { alpha, q, .. } => GibbsSpec {
                w: q.clone(),
                ratio_a: alpha.clone(),
                ratio_b: S::one(),
                support_end: None,
                beta: None,
            },
        }
    }

    pub fn describe(&self) -> String {
        match self {
            TargetFamily::Poisson { lambda } => {
                format!("Poisson(lambda={:.6})", lambda.to_f64())
            }
            TargetFamily::PseudoBinomial { alpha, p, .. } => format!(
                "PseudoBinomial(alpha={:.6}, p={:.6})",
                alpha.to_f64(),
                p.to_f64()
            ),
            TargetFamily::NegativeBinomial { alpha, p, .. } => format!(
                "NegativeBinomial(alpha={:.6}, p={:.6})",
                alpha.to_f64(),
                p.to_f64()
            ),
        }
    }

    pub fn to_f64(&self) -> TargetFamily<f64> {
        match self {
            TargetFamily::Poisson { lambda } => TargetFamily::Poisson {
                lambda: lambda.to_f64(),
            },
            TargetFamily::PseudoBinomial { alpha, p, q } => TargetFamily::PseudoBinomial {
                alpha: alpha.to_f64(),
                p: p.to_f64(),
                q: q.to_f64(),
            },
            TargetFamily::NegativeBinomial { alpha, p, q } => TargetFamily::NegativeBinomial {
                alpha: alpha.to_f64(),
                p: p.to_f64(),
                q: q.to_f64(),
            },
        }
    }
}

/// Iteration cap for normalizing unbounded Gibbs measures; reaching it means
/// the ratio encoding does not describe a normalizable law.
const GIBBS_MAX_SUPPORT: usize = 4_000_000;

/// Unnormalized ratio-built weights plus a bound on the neglected
/// unnormalized tail mass.
fn gibbs_weights(spec: &GibbsSpec<f64>, tail_eps: f64) -> Result<(Vec<f64>, f64)> {
    let invalid = |detail: String| Error::InvalidGibbsSpec { detail };
    if !(spec.w > 0.0) {
        return Err(invalid(format!("w = {} must be positive", spec.w)));
    }
    let mut weights = vec![1.0f64];
    if let Some(end) = spec.support_end {
        for j in 0..end {
            let ratio = spec.w * (spec.ratio_a + spec.ratio_b * j as f64) / (j + 1) as f64;
            if ratio < 0.0 {
                return Err(invalid(format!("negative mass ratio at m = {j}")));
            }
            let next = weights[j] * ratio;
            weights.push(next);
        }
        return Ok((weights, 0.0));
    }
    // Unbounded support: extend until a geometric tail bound certifies the
    // neglected mass is below tail_eps relative to the partial sum. The
    // ratios are monotone toward their limit w * ratio_b, so the maximum of
    // the next ratio and that limit dominates all later ratios.
    let mut partial = 1.0f64;
    for j in 0..GIBBS_MAX_SUPPORT {
        let ratio = spec.w * (spec.ratio_a + spec.ratio_b * j as f64) / (j + 1) as f64;
        if ratio < 0.0 {
            return Err(invalid(format!("negative mass ratio at m = {j}")));
        }
        let next = weights[j] * ratio;
        weights.push(next);
        partial += next;
        let ratio_next = spec.w * (spec.ratio_a + spec.ratio_b * (j + 1) as f64) / (j + 2) as f64;
        let rho = ratio_next.max(spec.w * spec.ratio_b);
        if rho < 1.0 {
            let tail = next * rho / (1.0 - rho);
            if tail <= tail_eps * partial {
                return Ok((weights, tail));
            }
        }
    }
    Err(invalid(
        "mass ratios do not decay; the measure is not normalizable".into(),
    ))
}

/// `gamma(m)` for a double-precision Gibbs specification, built
/// multiplicatively from the ratio encoding and normalized so the masses sum
/// to one. A negative ratio inside the support is an invalid-spec error.
pub fn gibbs_pmf(spec: &GibbsSpec<f64>, m: usize) -> Result<f64> {
    if let Some(end) = spec.support_end {
        if m > end {
            return Ok(0.0);
        }
    }
    let (weights, _tail) = gibbs_weights(spec, 1e-16)?;
    let beta = match spec.beta {
        Some(b) => b,
        None => weights.iter().sum(),
    };
    Ok(weights.get(m).copied().unwrap_or(0.0) / beta)
}

/// The derived normalizing constant `beta` (sum of the ratio-built weights).
pub fn gibbs_normalizer(spec: &GibbsSpec<f64>) -> Result<f64> {
    let (weights, tail) = gibbs_weights(spec, 1e-16)?;
    Ok(weights.iter().sum::<f64>() + tail)
}

impl GibbsSpec<f64> {
    /// Returns the spec with its `beta` field populated.
    pub fn normalized(mut self) -> Result<Self> {
        self.beta = Some(gibbs_normalizer(&self)?);
        Ok(self)
    }
}

/// Normalized table of the law with an explicit truncation-tail bound
/// (zero for truncated families, below `tail_eps` for unbounded ones).
pub fn gibbs_table(spec: &GibbsSpec<f64>, tail_eps: f64) -> Result<TruncatedPmf<f64>> {
    let (weights, tail) = gibbs_weights(spec, tail_eps)?;
    let total: f64 = weights.iter().sum::<f64>() + tail;
    let probs = weights.iter().map(|w| w / total).collect();
    Ok(TruncatedPmf::new(probs, tail / total))
}

/// The Gibbs-measure Stein operator applied at `m`:
/// `w (ratio_a + ratio_b m) g(m+1) - m g(m)`.
pub fn stein_apply<S: Scalar>(spec: &GibbsSpec<S>, g: &dyn Fn(usize) -> S, m: usize) -> S {
    let m_s = S::from_u64(m as u64);
    spec.w.clone() * (spec.ratio_a.clone() + spec.ratio_b.clone() * m_s.clone()) * g(m + 1)
        - m_s * g(m)
}

/// Expectation of the perturbation part `U g(M_n)`:
///
/// `E[U g(M)] = -ratio_a w E[g(M+1)]
///   + a(p) sum_i a_i sum_{s=0}^{d_i} b_i(n-s) sum_l B_s(l)
///       sum_m g(m+l+1) p_{m, n-k-s-i+1}
///   - w ratio_b a(p) sum_i a_i sum_s b_i(n-s) sum_l B_s(l)
///       sum_m g(m+l+2) p_{m, n-k-s-i+1}`.
///
/// Adding `E[A_gamma g(M)]` for the same spec gives the Stein-identity
/// residual, which is identically zero — for arbitrary `(w, ratio_a,
/// ratio_b)`, not just matched ones — so the numerical residual measures
/// implementation fidelity only.
///
/// `table` must be a PMF table for the same parameters and pattern reaching
/// at least `n` (the shifted trial counts `n-k-s-i+1` stay within `0..=n`).
pub fn perturbed_expectation<S: Scalar>(
    g: &dyn Fn(usize) -> S,
    n: usize,
    params: &TrialParams<S>,
    pattern: RunsPattern,
    spec: &GibbsSpec<S>,
    table: &PmfTable<S>,
) -> S {
    let k = pattern.k();
    assert!(n >= k + 2, "perturbed expectation requires n >= k + 2");
    assert!(table.n_max() >= n, "PMF table must reach n");
    let a = a_of_p(params, pattern);
    let sc = SequenceConstants::new(n, params, pattern);

    let mut e_g_shift = S::zero();
    for (m, pm) in table.row(n).iter().enumerate() {
        e_g_shift = e_g_shift + g(m + 1) * pm.clone();
    }
    let term1 = -(spec.ratio_a.clone() * spec.w.clone() * e_g_shift);

    let mut triple_shift1 = S::zero();
    let mut triple_shift2 = S::zero();
    for i in 1..=3usize {
        let ai = sc.a(i);
        let di = sc.d(i);
        if di < 0 {
            continue;
        }
        for s in 0..=di as usize {
            let bi = sc.b(i, (n - s) as i64);
            let col = n + 1 - k - s - i; // >= 0 because s <= d_i
            let row = table.row(col);
            for l in 0..=s / k {
                let bsl = coeff_b(s, l, params, pattern);
                if bsl.is_zero() {
                    continue;
                }
                let mut sum1 = S::zero();
                let mut sum2 = S::zero();
                for (m, pm) in row.iter().enumerate() {
                    sum1 = sum1 + g(m + l + 1) * pm.clone();
                    sum2 = sum2 + g(m + l + 2) * pm.clone();
                }
                let weight = ai.clone() * bi.clone() * bsl;
                triple_shift1 = triple_shift1 + weight.clone() * sum1;
                triple_shift2 = triple_shift2 + weight * sum2;
            }
        }
    }
    term1 + a.clone() * triple_shift1
        - spec.w.clone() * spec.ratio_b.clone() * a * triple_shift2
}

/// One-parameter Poisson matching: `lambda = q[1 + (n-k-1)p] a(p)`, the mean
/// of `M_n`.
pub fn match_poisson<S: Scalar>(
    n: usize,
    params: &TrialParams<S>,
    pattern: RunsPattern,
) -> S {
    mean_m(n, params, pattern)
}

/// Which of the two remaining families a matching call targets.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DiscreteFamily {
    PseudoBinomial,
    NegativeBinomial,
}

impl DiscreteFamily {
    pub fn name(self) -> &'static str {
        match self {
            DiscreteFamily::PseudoBinomial => "pseudo-binomial",
            DiscreteFamily::NegativeBinomial => "negative-binomial",
        }
    }
}

/// The free choice in one-parameter matching: fix the shape parameter and
/// solve for the success probability, or the reverse.
#[derive(Debug, Clone, PartialEq)]
pub enum OneParamFix<S: Scalar> {
    Alpha(S),
    SuccessProb(S),
}

/// Default one-parameter convention: `alpha` fixed to `n - k`.
pub fn default_one_param_fix<S: Scalar>(n: usize, pattern: RunsPattern) -> OneParamFix<S> {
    OneParamFix::Alpha(S::from_u64((n.saturating_sub(pattern.k())) as u64))
}

/// One-parameter matching: sets the family mean equal to the mean of `M_n`
/// with one parameter supplied by the caller (`None` = library default,
/// `alpha = n - k`).
pub fn match_one_parameter<S: Scalar>(
    n: usize,
    params: &TrialParams<S>,
    pattern: RunsPattern,
    family: DiscreteFamily,
    fix: Option<OneParamFix<S>>,
) -> Result<TargetFamily<S>> {
    let lambda = mean_m(n, params, pattern);
    let fix = fix.unwrap_or_else(|| default_one_param_fix(n, pattern));
    let in_open_unit = |x: &S| *x > S::zero() && *x < S::one();
    match (family, fix) {
        (DiscreteFamily::PseudoBinomial, OneParamFix::Alpha(alpha)) => {
            if !(alpha > S::zero()) {
                return Err(Error::MatchedParameterOutOfRange {
                    name: "alpha",
                    value: format!("{}", alpha.to_f64()),
                    range: "(0, inf)",
                });
            }
            let p = lambda / alpha.clone();
            if !in_open_unit(&p) {
                return Err(Error::MatchedParameterOutOfRange {
                    name: "p",
                    value: format!("{}", p.to_f64()),
                    range: "(0, 1)",
                });
            }
            let q = S::one() - p.clone();
            Ok(TargetFamily::PseudoBinomial { alpha, p, q })
        }
        (DiscreteFamily::PseudoBinomial, OneParamFix::SuccessProb(p)) => {
            if !in_open_unit(&p) {
                return Err(Error::MatchedParameterOutOfRange {
                    name: "p",
                    value: format!("{}", p.to_f64()),
                    range: "(0, 1)",
                });
            }
            let alpha = lambda / p.clone();
            let q = S::one() - p.clone();
            Ok(TargetFamily::PseudoBinomial { alpha, p, q })
        }
        (DiscreteFamily::NegativeBinomial, OneParamFix::Alpha(alpha)) => {
            if !(alpha > S::zero()) {
                return Err(Error::MatchedParameterOutOfRange {
                    name: "alpha",
                    value: format!("{}", alpha.to_f64()),
                    range: "(0, inf)",
                });
            }
            let denom = alpha.clone() + lambda.clone();
            let p = alpha.clone() / denom.clone();
            let q = lambda / denom;
            Ok(TargetFamily::NegativeBinomial { alpha, p, q })
        }
        (DiscreteFamily::NegativeBinomial, OneParamFix::SuccessProb(p)) => {
            if !in_open_unit(&p) {
                return Err(Error::MatchedParameterOutOfRange {
                    name: "p",
                    value: format!("{}", p.to_f64()),
                    range: "(0, 1)",
                });
            }
            let q = S::one() - p.clone();
            let alpha = lambda * p.clone() / q.clone();
            Ok(TargetFamily::NegativeBinomial { alpha, p, q })
        }
    }
}

/// Two-parameter matching: mean and variance both matched to `M_n`.
///
/// Writing `s = s_nk` (mean minus variance), the pseudo-binomial solution is
/// `alpha = lambda^2 / s`, `p = s / lambda`, requiring `s > 0`; the negative
/// binomial solution is `alpha = -lambda^2 / s`, `p = lambda / (lambda - s)`,
/// requiring `s < 0`. The wrong sign is the inapplicable case rendered as ×
/// in bound tables.
pub fn match_two_parameter<S: Scalar>(
    n: usize,
    params: &TrialParams<S>,
    pattern: RunsPattern,
    family: DiscreteFamily,
) -> Result<TargetFamily<S>> {
    let lambda = mean_m(n, params, pattern);
    let s = s_nk(n, params, pattern);
    let snk_str = || format!("{}", s.to_f64());
    match family {
        DiscreteFamily::PseudoBinomial => {
            if !(s > S::zero()) {
                return Err(Error::MatchingInapplicable {
                    family: family.name(),
                    requirement: "s_nk > 0",
                    snk: snk_str(),
                });
            }
            let alpha = lambda.clone() * lambda.clone() / s.clone();
            let p = s / lambda;
            if !(p < S::one()) {
                return Err(Error::MatchedParameterOutOfRange {
                    name: "p",
                    value: format!("{}", p.to_f64()),
                    range: "(0, 1)",
                });
            }
            let q = S::one() - p.clone();
            Ok(TargetFamily::PseudoBinomial { alpha, p, q })
        }
        DiscreteFamily::NegativeBinomial => {
            if !(s < S::zero()) {
                return Err(Error::MatchingInapplicable {
                    family: family.name(),
                    requirement: "s_nk < 0",
                    snk: snk_str(),
                });
            }
            let alpha = -(lambda.clone() * lambda.clone()) / s.clone();
            let gap = lambda.clone() - s.clone(); // lambda - s > 0
            let p = lambda / gap.clone();
            let q = -s / gap;
            Ok(TargetFamily::NegativeBinomial { alpha, p, q })
        }
    }
}

/// Denominator convention for the two-parameter bounds.
///
/// The theorem statements divide by `floor(alpha) p q` (pseudo-binomial) or
/// `alpha q` (negative binomial); the bound table is reproduced by dividing
/// by the matched mean instead. Both conventions are recorded in the report.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundConvention {
    /// Verbatim theorem denominator.
    Theorem,
    /// Matched-mean denominator (reproduces the published bound table).
    TableMean,
}

/// Handling of the constant `c7`, which the source leaves undefined.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum C7Policy {
    /// Refuse to produce a number (default).
    Blocked,
    /// Substitute `c6` for `c7`, clearly tagged as an assumption.
    ExtrapolateC6,
}

/// Outcome of a bound computation.
///
/// `bound` is `None` whenever any precondition fails (never silently zero);
/// the `notes` string records the conventions and assumptions in play.
#[derive(Debug, Clone)]
pub struct BoundReport<S: Scalar> {
    pub family: &'static str,
    pub parameter_count: usize,
    pub n: usize,
    pub pattern: RunsPattern,
    pub matched: Option<TargetFamily<S>>,
    pub bound: Option<S>,
    pub n_condition_ok: bool,
    pub snk_sign_ok: bool,
    pub notes: String,
}

impl<S: Scalar> BoundReport<S> {
    /// True when every precondition holds and parameters were matched; the
    /// bound may still be withheld (`None`) by an explicit policy, which the
    /// notes then explain.
    pub fn is_applicable(&self) -> bool {
        self.n_condition_ok && self.snk_sign_ok && self.matched.is_some()
    }

    pub fn to_f64(&self) -> BoundReport<f64> {
        BoundReport {
            family: self.family,
            parameter_count: self.parameter_count,
            n: self.n,
            pattern: self.pattern,
            matched: self.matched.as_ref().map(TargetFamily::to_f64),
            bound: self.bound.as_ref().map(Scalar::to_f64),
            n_condition_ok: self.n_condition_ok,
            snk_sign_ok: self.snk_sign_ok,
            notes: self.notes.clone(),
        }
    }
}

fn push_note(notes: &mut String, note: &str) {
    if !notes.is_empty() {
        notes.push_str("; ");
    }
    notes.push_str(note);
}

fn describe_fix<S: Scalar>(fix: &Option<OneParamFix<S>>, n: usize, pattern: RunsPattern) -> String {
    match fix {
        None => format!(
            "alpha fixed to n-k = {} (library default)",
            n.saturating_sub(pattern.k())
        ),
        Some(OneParamFix::Alpha(a)) => format!("alpha fixed to {} (caller)", a.to_f64()),
        Some(OneParamFix::SuccessProb(p)) => {
            format!("success probability fixed to {} (caller)", p.to_f64())
        }
    }
}

/// One-parameter Poisson bound (theorem hypothesis `n >= 3k`):
///
/// `(2+qp) a(p) / (q[1 + (n-k-1)p]) * { (n-k) delta + qp (k+1) c1 + c2 }`.
pub fn bound_poisson_one<S: Scalar>(
    n: usize,
    params: &TrialParams<S>,
    pattern: RunsPattern,
) -> BoundReport<S> {
    let k = pattern.k();
    let n_ok = n >= 3 * k;
    let mut notes = String::from("one-parameter Poisson matching: lambda = mean of M");
    let mut report = BoundReport {
        family: "poisson",
        parameter_count: 1,
        n,
        pattern,
        matched: None,
        bound: None,
        n_condition_ok: n_ok,
        snk_sign_ok: true,
        notes: String::new(),
    };
    if !n_ok {
        push_note(&mut notes, "inapplicable: requires n >= 3k");
        report.notes = notes;
        return report;
    }
    let lambda = match_poisson(n, params, pattern);
    report.matched = Some(TargetFamily::Poisson {
        lambda: lambda.clone(),
    });
    let a = a_of_p(params, pattern);
    let qp = params.q().clone() * params.p().clone();
    let (delta, _) = delta_consts(params, pattern);
    let c1 = c_const(1, n, pattern).expect("index 1 is supported");
    let c2 = c_const(2, n, pattern).expect("index 2 is supported");
    // q [1 + (n-k-1) p] = lambda / a(p)
    let mean_bracket = params.q().clone()
        * (S::one() + S::from_u64((n - k - 1) as u64) * params.p().clone());
    let body = S::from_u64((n - k) as u64) * delta
        + qp.clone() * S::from_u64((k + 1) as u64) * c1
        + c2;
    let bound = (S::from_u64(2) + qp) * a * body / mean_bracket;
    report.bound = Some(bound);
    report.notes = notes;
    report
}

/// One-parameter pseudo-binomial bound (theorem hypothesis `n >= 3k`):
///
/// `(2+qp) a(p) / (floor(alpha) p q) * { (n-k)(p + delta a(p))
///    + (qp (k+1) c1 + c2) a(p) }`
/// where `(alpha, p, q)` are the matched pseudo-binomial parameters.
pub fn bound_pb_one<S: Scalar>(
    n: usize,
    params: &TrialParams<S>,
    pattern: RunsPattern,
    fix: Option<OneParamFix<S>>,
) -> BoundReport<S> {
    let k = pattern.k();
    let n_ok = n >= 3 * k;
    let mut notes = describe_fix(&fix, n, pattern);
    let mut report = BoundReport {
        family: "pseudo-binomial",
        parameter_count: 1,
        n,
        pattern,
        matched: None,
        bound: None,
        n_condition_ok: n_ok,
        snk_sign_ok: true,
        notes: String::new(),
    };
    if !n_ok {
        push_note(&mut notes, "inapplicable: requires n >= 3k");
        report.notes = notes;
        return report;
    }
    let matched = match match_one_parameter(n, params, pattern, DiscreteFamily::PseudoBinomial, fix)
    {
        Ok(m) => m,
        Err(e) => {
            push_note(&mut notes, &format!("inapplicable: {e}"));
            report.notes = notes;
            return report;
        }
    };
    let (alpha, p_hat, q_hat) = match &matched {
        TargetFamily::PseudoBinomial { alpha, p, q } => (alpha.clone(), p.clone(), q.clone()),
        _ => unreachable!("matched family is pseudo-binomial"),
    };
    report.matched = Some(matched);
    let floor_alpha = alpha.floor_u64();
    if floor_alpha == 0 {
        push_note(&mut notes, "inapplicable: floor(alpha) = 0 (zero denominator)");
        report.notes = notes;
        return report;
    }
    let a = a_of_p(params, pattern);
    let qp = params.q().clone() * params.p().clone();
    let (delta, _) = delta_consts(params, pattern);
    let c1 = c_const(1, n, pattern).expect("index 1 is supported");
    let c2 = c_const(2, n, pattern).expect("index 2 is supported");
    let den = S::from_u64(floor_alpha) * p_hat.clone() * q_hat.clone();
    let body = S::from_u64((n - k) as u64) * (p_hat + delta * a.clone())
        + (qp.clone() * S::from_u64((k + 1) as u64) * c1 + c2) * a.clone();
    report.bound = Some((S::from_u64(2) + qp) * a * body / den);
    report.notes = notes;
    report
}

/// One-parameter negative-binomial bound (theorem hypothesis `n >= 3k`):
///
/// `(2+qp) a(p) / (alpha q) * { (n-k)(q + delta p a(p))
///    + (qp (k+1) c1 + c2) p a(p) }`
/// where `(alpha, p, q)` are the matched negative-binomial parameters.
pub fn bound_nb_one<S: Scalar>(
    n: usize,
    params: &TrialParams<S>,
    pattern: RunsPattern,
    fix: Option<OneParamFix<S>>,
) -> BoundReport<S> {
    let k = pattern.k();
    let n_ok = n >= 3 * k;
    let mut notes = describe_fix(&fix, n, pattern);
    let mut report = BoundReport {
        family: "negative-binomial",
        parameter_count: 1,
        n,
        pattern,
        matched: None,
        bound: None,
        n_condition_ok: n_ok,
        snk_sign_ok: true,
        notes: String::new(),
    };
    if !n_ok {
        push_note(&mut notes, "inapplicable: requires n >= 3k");
        report.notes = notes;
        return report;
    }
    let matched =
        match match_one_parameter(n, params, pattern, DiscreteFamily::NegativeBinomial, fix) {
            Ok(m) => m,
            Err(e) => {
                push_note(&mut notes, &format!("inapplicable: {e}"));
                report.notes = notes;
                return report;
            }
        };
    let (alpha, p_hat, q_hat) = match &matched {
        TargetFamily::NegativeBinomial { alpha, p, q } => (alpha.clone(), p.clone(), q.clone()),
        _ => unreachable!("matched family is negative-binomial"),
    };
    report.matched = Some(matched);
    let den = alpha * q_hat.clone();
    if den.is_zero() {
        push_note(&mut notes, "inapplicable: alpha * q = 0 (zero denominator)");
        report.notes = notes;
        return report;
    }
    let a = a_of_p(params, pattern);
    let qp = params.q().clone() * params.p().clone();
    let (delta, _) = delta_consts(params, pattern);
    let c1 = c_const(1, n, pattern).expect("index 1 is supported");
    let c2 = c_const(2, n, pattern).expect("index 2 is supported");
    let body = S::from_u64((n - k) as u64) * (q_hat + delta * p_hat.clone() * a.clone())
        + (qp.clone() * S::from_u64((k + 1) as u64) * c1 + c2) * p_hat * a.clone();
    report.bound = Some((S::from_u64(2) + qp) * a * body / den);
    report.notes = notes;
    report
}

/// Two-parameter pseudo-binomial bound (theorem hypotheses `n >= 5k` and
/// `s_nk > 0`):
///
/// `2 (2+qp) a(p)^2 / den * { (4(n-k) delta_1 + (qp + 2 delta) c2 + c3 + c4
///    + (q^2 p^2 / 2) c6) a(p) + ((n-k) delta + c2 + c5) p } *
///    d_TV(M_{n-3k-3}, M_{n-3k-3} + 1)`
///
/// with `den = floor(alpha) p q` under [`BoundConvention::Theorem`] and
/// `den = alpha p` (the matched mean) under [`BoundConvention::TableMean`].
pub fn bound_pb_two<S: Scalar>(
    n: usize,
    params: &TrialParams<S>,
    pattern: RunsPattern,
    convention: BoundConvention,
) -> BoundReport<S> {
    let k = pattern.k();
    let n_ok = n >= 5 * k;
    let s = s_nk(n, params, pattern);
    let snk_ok = s > S::zero();
    let mut notes = String::from("two-parameter matching (mean and variance)");
    let mut report = BoundReport {
        family: "pseudo-binomial",
        parameter_count: 2,
        n,
        pattern,
        matched: None,
        bound: None,
        n_condition_ok: n_ok,
        snk_sign_ok: snk_ok,
        notes: String::new(),
    };
    if !n_ok {
        push_note(&mut notes, "inapplicable: requires n >= 5k");
    }
    if !snk_ok {
        push_note(&mut notes, "inapplicable: requires s_nk > 0");
    }
    if !(n_ok && snk_ok) {
        report.notes = notes;
        return report;
    }
    let matched = match match_two_parameter(n, params, pattern, DiscreteFamily::PseudoBinomial) {
        Ok(m) => m,
        Err(e) => {
            push_note(&mut notes, &format!("inapplicable: {e}"));
            report.notes = notes;
            return report;
        }
    };
    let (alpha, p_hat, q_hat) = match &matched {
        TargetFamily::PseudoBinomial { alpha, p, q } => (alpha.clone(), p.clone(), q.clone()),
        _ => unreachable!("matched family is pseudo-binomial"),
    };
    report.matched = Some(matched);
    let den = match convention {
        BoundConvention::Theorem => {
            let floor_alpha = alpha.floor_u64();
            if floor_alpha == 0 {
                push_note(&mut notes, "inapplicable: floor(alpha) = 0 (zero denominator)");
                report.notes = notes;
                return report;
            }
            push_note(&mut notes, "denominator floor(alpha) p q (theorem)");
            S::from_u64(floor_alpha) * p_hat.clone() * q_hat.clone()
        }
        BoundConvention::TableMean => {
            push_note(&mut notes, "denominator alpha p = matched mean (table convention)");
            alpha.clone() * p_hat.clone()
        }
    };
    let a = a_of_p(params, pattern);
    let qp = params.q().clone() * params.p().clone();
    let (delta, delta1) = delta_consts(params, pattern);
    let c = |i: usize| c_const::<S>(i, n, pattern).expect("indices 1..=6 are supported");
    let tv = tv_consecutive(n - 3 * k - 3, params, pattern);
    let body = (S::from_u64(4) * S::from_u64((n - k) as u64) * delta1
        + (qp.clone() + S::from_u64(2) * delta.clone()) * c(2)
        + c(3)
        + c(4)
        + qp.clone() * qp.clone() / S::from_u64(2) * c(6))
        * a.clone()
        + (S::from_u64((n - k) as u64) * delta + c(2) + c(5)) * p_hat;
    let bound =
        S::from_u64(2) * (S::from_u64(2) + qp) * a.clone() * a / den * body * tv;
    report.bound = Some(bound);
    report.notes = notes;
    report
}

/// Two-parameter negative-binomial bound (theorem hypotheses `n >= 5k` and
/// `s_nk < 0`):
///
/// `2 (2+qp) a(p)^2 / den * { (4(n-k) delta_1 + (2 delta + qp) c3 + c4
///    + qp c5 + (q^2 p^2 / 2) c7) p a(p) + ((n-k) delta + c3 + qp c6) q } *
///    d_TV(M_{n-3k-2}, M_{n-3k-2} + 1)`
///
/// with `den = alpha q` (theorem) or the matched mean (table convention).
/// `c7` has no definition in the source; under the default
/// [`C7Policy::Blocked`] the report carries no number and its notes read
/// "formula incomplete per source", while [`C7Policy::ExtrapolateC6`]
/// substitutes `c6` and tags the result as an assumption.
pub fn bound_nb_two<S: Scalar>(
    n: usize,
    params: &TrialParams<S>,
    pattern: RunsPattern,
    convention: BoundConvention,
    c7_policy: C7Policy,
) -> BoundReport<S> {
    let k = pattern.k();
    let n_ok = n >= 5 * k;
    let s = s_nk(n, params, pattern);
    let snk_ok = s < S::zero();
    let mut notes = String::from("two-parameter matching (mean and variance)");
    let mut report = BoundReport {
        family: "negative-binomial",
        parameter_count: 2,
        n,
        pattern,
        matched: None,
        bound: None,
        n_condition_ok: n_ok,
        snk_sign_ok: snk_ok,
        notes: String::new(),
    };
    if !n_ok {
        push_note(&mut notes, "inapplicable: requires n >= 5k");
    }
    if !snk_ok {
        push_note(&mut notes, "inapplicable: requires s_nk < 0");
    }
    if !(n_ok && snk_ok) {
        report.notes = notes;
        return report;
    }
    let matched = match match_two_parameter(n, params, pattern, DiscreteFamily::NegativeBinomial) {
        Ok(m) => m,
        Err(e) => {
            push_note(&mut notes, &format!("inapplicable: {e}"));
            report.notes = notes;
            return report;
        }
    };
    let (alpha, p_hat, q_hat) = match &matched {
        TargetFamily::NegativeBinomial { alpha, p, q } => (alpha.clone(), p.clone(), q.clone()),
        _ => unreachable!("matched family is negative-binomial"),
    };
    report.matched = Some(matched);
    if let C7Policy::Blocked = c7_policy {
        push_note(&mut notes, "formula incomplete per source");
        report.notes = notes;
        return report;
    }
    push_note(&mut notes, "c7 := c6 extrapolation (assumption)");
    let den = match convention {
        BoundConvention::Theorem => {
            push_note(&mut notes, "denominator alpha q (theorem)");
            alpha.clone() * q_hat.clone()
        }
        BoundConvention::TableMean => {
            push_note(&mut notes, "denominator = matched mean (table convention)");
            alpha.clone() * q_hat.clone() / p_hat.clone()
        }
    };
    let a = a_of_p(params, pattern);
    let qp = params.q().clone() * params.p().clone();
    let (delta, delta1) = delta_consts(params, pattern);
    let c = |i: usize| c_const::<S>(i, n, pattern).expect("indices 1..=6 are supported");
    let c7 = c(6);
    let tv = tv_consecutive(n - 3 * k - 2, params, pattern);
    let body = (S::from_u64(4) * S::from_u64((n - k) as u64) * delta1
        + (S::from_u64(2) * delta.clone() + qp.clone()) * c(3)
        + c(4)
        + qp.clone() * c(5)
        + qp.clone() * qp.clone() / S::from_u64(2) * c7)
        * p_hat
        * a.clone()
        + (S::from_u64((n - k) as u64) * delta + c(3) + qp.clone() * c(6)) * q_hat;
    let bound =
        S::from_u64(2) * (S::from_u64(2) + qp) * a.clone() * a / den * body * tv;
    report.bound = Some(bound);
    report.notes = notes;
    report
}
