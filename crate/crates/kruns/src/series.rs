//! Formal power-series division.
//!
//! Several quantities in this crate have two independent derivations: a
//! recursion and a closed generating function. The generating-function routes
//! all reduce to extracting initial coefficients of a rational function, which
//! is what this module provides. It is deliberately the dumbest correct
//! algorithm (long division), because it serves as the oracle against which
//! the cleverer recursions are checked.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// First `len` coefficients of the formal power series `num(z) / den(z)`.
///
/// Requires `den` to have a nonzero constant term. Uses the long-division
/// recurrence `out[i] = (num[i] - sum_{j>=1} den[j] * out[i-j]) / den[0]`.
pub fn series_div<S: Scalar>(num: &[S], den: &[S], len: usize) -> Result<Vec<S>> {
    let lead = den.first().cloned().unwrap_or_else(S::zero);
    if lead.is_zero() {
        return Err(Error::SeriesNonUnitDenominator);
    }
    let mut out: Vec<S> = Vec::with_capacity(len);
    for i in 0..len {
        let mut acc = num.get(i).cloned().unwrap_or_else(S::zero);
        let j_max = i.min(den.len().saturating_sub(1));
        for j in 1..=j_max {
            acc = acc - den[j].clone() * out[i - j].clone();
        }
        out.push(acc / lead.clone());
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::Scalar;
    use num_rational::BigRational;

    #[test]
    fn geometric_series() {
        // 1 / (1 - z) = 1 + z + z^2 + ...
        let num = vec![1.0f64];
        let den = vec![1.0, -1.0];
        assert_eq!(series_div(&num, &den, 5).unwrap(), vec![1.0; 5]);
    }

    #[test]
    fn rational_series_matches_hand_expansion() {
        // (1 + z) / (1 - 2 z^2) = (1 + z) * (1 + 2 z^2 + 4 z^4 + ...)
        let one = <BigRational as Scalar>::one;
        let num = vec![one(), one()];
        let den = vec![one(), Scalar::zero(), <BigRational as Scalar>::from_i64(-2)];
        let got = series_div(&num, &den, 6).unwrap();
        let expect: Vec<BigRational> = [1, 1, 2, 2, 4, 4]
            .iter()
            .map(|&c| <BigRational as Scalar>::from_i64(c))
            .collect();
        assert_eq!(got, expect);
    }

    #[test]
    fn zero_constant_term_is_rejected() {
        let num = vec![1.0f64];
        let den = vec![0.0, 1.0];
        assert!(series_div(&num, &den, 3).is_err());
    }
}
