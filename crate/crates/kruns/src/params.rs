//! Trial parameters and the run pattern.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Success/failure probabilities of the underlying Bernoulli trials.
///
/// Every formula in this crate is written literally in terms of both `p` and
/// `q` and never substitutes `q = 1 - p` internally. With the ordinary
/// constructors the two are coupled as `q = 1 - p`; [`TrialParams::decoupled`]
/// instead fixes them independently, which evaluates each closed-form
/// expression as a polynomial in two free variables. The decoupled form exists
/// to reproduce published bound tables whose columns vary `q` while holding
/// `p` fixed; see the README for the convention.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialParams<S: Scalar> {
    p: S,
    q: S,
    coupled: bool,
}

fn check_open_unit<S: Scalar>(name: &'static str, value: &S) -> Result<()> {
    if *value <= S::zero() || *value >= S::one() {
        return Err(Error::ProbabilityOutOfRange {
            name,
            value: format!("{:?}", value.to_f64()),
        });
    }
    Ok(())
}

impl<S: Scalar> TrialParams<S> {
    /// Coupled parameters from the success probability: `q = 1 - p`.
    pub fn from_p(p: S) -> Result<Self> {
        check_open_unit("p", &p)?;
        let q = S::one() - p.clone();
        Ok(Self { p, q, coupled: true })
    }

    /// Coupled parameters from the failure probability: `p = 1 - q`.
    pub fn from_q(q: S) -> Result<Self> {
        check_open_unit("q", &q)?;
        let p = S::one() - q.clone();
        Ok(Self { p, q, coupled: true })
    }

    /// Independent `(p, q)` coefficients, not required to sum to one.
    ///
    /// The result is only a probability model when `p + q = 1`; otherwise the
    /// computed quantities are formal evaluations of the same expressions,
    /// which is exactly what table-reproduction conventions call for.
    pub fn decoupled(p: S, q: S) -> Result<Self> {
        check_open_unit("p", &p)?;
        check_open_unit("q", &q)?;
        let coupled = (p.clone() + q.clone() - S::one()).is_zero();
        Ok(Self { p, q, coupled })
    }

    pub fn p(&self) -> &S {
        &self.p
    }

    pub fn q(&self) -> &S {
        &self.q
    }

    /// True when `p + q = 1`, i.e. the parameters describe a genuine
    /// Bernoulli trial and all distributions computed from them normalize.
    pub fn is_coupled(&self) -> bool {
        self.coupled
    }

    /// Convert to double precision (for mixed-mode oracles and reporting).
    pub fn to_f64(&self) -> TrialParams<f64> {
        TrialParams {
            p: self.p.to_f64(),
            q: self.q.to_f64(),
            coupled: self.coupled,
        }
    }
}

/// The run pattern: `k1` consecutive failures followed by `k2` consecutive
/// successes (the trailing failure that closes an occurrence is part of the
/// counting rule, not of the pattern length).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct RunsPattern {
    k1: usize,
    k2: usize,
}

impl RunsPattern {
    pub fn new(k1: usize, k2: usize) -> Result<Self> {
        if k1 == 0 || k2 == 0 {
            return Err(Error::InvalidPattern { k1, k2 });
        }
        Ok(Self { k1, k2 })
    }

    pub fn k1(&self) -> usize {
        self.k1
    }

    pub fn k2(&self) -> usize {
        self.k2
    }

    /// Total pattern length `k = k1 + k2`.
    pub fn k(&self) -> usize {
        self.k1 + self.k2
    }

    /// Largest number of occurrences possible in `n` trials: `floor(n / k)`.
    pub fn support_max(&self, n: usize) -> usize {
        n / self.k()
    }
}
