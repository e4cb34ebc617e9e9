//! P-values for windowed statistics.
//!
//! Normal windows are scored through the standardized sum `Z = S / sqrt(k)`;
//! Poisson and binomial windows use the raw count `S` and a randomized
//! probability integral transform so that the p-value is exactly uniform
//! under the null.

use crate::error::{Error, Result};
use crate::real::Real;
use crate::score::PValue;

/// Standardized windowed sum `S / sqrt(k)`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct NormalStat<T>(pub T);

/// Standard normal distribution function, via `erfc`.
#[inline]
pub fn std_normal_cdf<T: Real>(x: T) -> T {
    T::lit(0.5) * (-x * T::FRAC_1_SQRT_2()).erfc()
}

/// `2 Φ(-|z|)`, clamped into `[p_floor, 1]`.
#[inline]
pub fn normal_two_sided<T: Real>(z: NormalStat<T>) -> PValue<T> {
    PValue::clamped((z.0.abs() * T::FRAC_1_SQRT_2()).erfc())
}

/// `Φ(-z)`, clamped into `[p_floor, 1]`.
#[inline]
pub fn normal_one_sided<T: Real>(z: NormalStat<T>) -> PValue<T> {
    PValue::clamped(std_normal_cdf(-z.0))
}

/// Null law of a windowed count.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DiscreteNullSpec {
    /// `Poisson(mean)`, with `mean = k Δ0` for a window of length `k`.
    Poisson { mean: f64 },
    /// `Binomial(trials, success_prob)`, with `trials = k n0`.
    Binomial { trials: u64, success_prob: f64 },
}

/// Probability masses around an observed count: `P(X < s)`, `P(X = s)`,
/// `P(X > s)`. Both tails are summed directly so that neither loses precision
/// to cancellation against 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tails {
    pub below: f64,
    pub at: f64,
    pub above: f64,
}

impl Tails {
    /// `P(X < s)`.
    pub fn lo(&self) -> f64 {
        self.below
    }

    /// `P(X <= s)`.
    pub fn hi(&self) -> f64 {
        self.below + self.at
    }
}

impl DiscreteNullSpec {
    pub fn poisson(mean: f64) -> Result<Self> {
        let spec = Self::Poisson { mean };
        spec.validate()?;
        Ok(spec)
    }

    pub fn binomial(trials: u64, success_prob: f64) -> Result<Self> {
        let spec = Self::Binomial { trials, success_prob };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            Self::Poisson { mean } if mean >= 0.0 && mean.is_finite() => Ok(()),
            Self::Poisson { mean } => Err(Error::Domain(format!("poisson mean {mean}"))),
            Self::Binomial { trials, success_prob }
                if trials > 0 && success_prob > 0.0 && success_prob < 1.0 =>
            {
                Ok(())
            }
            Self::Binomial { trials, success_prob } => Err(Error::Domain(format!(
                "binomial trials {trials}, success probability {success_prob}"
            ))),
        }
    }

    /// Log probability mass at `j`, `-inf` outside the support.
    pub fn ln_pmf(&self, j: u64) -> f64 {
        match *self {
            Self::Poisson { mean } => {
                if mean == 0.0 {
                    return if j == 0 { 0.0 } else { f64::NEG_INFINITY };
                }
                let jf = j as f64;
                -mean + jf * mean.ln() - libm::lgamma(jf + 1.0)
            }
            Self::Binomial { trials, success_prob } => {
                if j > trials {
                    return f64::NEG_INFINITY;
                }
                let (n, jf) = (trials as f64, j as f64);
                libm::lgamma(n + 1.0) - libm::lgamma(jf + 1.0) - libm::lgamma(n - jf + 1.0)
                    + jf * success_prob.ln()
                    + (n - jf) * (-success_prob).ln_1p()
            }
        }
    }

    pub fn mean(&self) -> f64 {
        match *self {
            Self::Poisson { mean } => mean,
            Self::Binomial { trials, success_prob } => trials as f64 * success_prob,
        }
    }

    /// Tail masses at the observed count `s`, by direct summation of the
    /// mass function.
    pub fn tails(&self, s: u64) -> Tails {
        let at = self.ln_pmf(s).exp();
        let below: f64 = (0..s).map(|j| self.ln_pmf(j).exp()).sum();
        let support_end = match *self {
            Self::Poisson { .. } => u64::MAX,
            Self::Binomial { trials, .. } => trials,
        };
        let mode = self.mean().floor() as u64;
        let mut above = 0.0;
        let mut j = s + 1;
        while j <= support_end {
            let term = self.ln_pmf(j).exp();
            above += term;
            // past the mode the masses decrease geometrically
            if j > mode && term <= above * 1e-18 {
                break;
            }
            if j > mode && term == 0.0 {
                break;
            }
            j += 1;
        }
        Tails { below, at, above }
    }
}

/// Two-sided randomized p-value `2 min(φ, 1 - φ)` with
/// `φ = P(X < s) + u P(X = s)`.
///
/// `u` must come from the caller's random source; nothing is drawn here.
pub fn discrete_pvalue(observed_sum: u64, null: &DiscreteNullSpec, u: f64) -> PValue<f64> {
    randomized_from_tails(&null.tails(observed_sum), u)
}

/// Same as [`discrete_pvalue`] for precomputed tails.
#[inline]
pub fn randomized_from_tails(tails: &Tails, u: f64) -> PValue<f64> {
    let phi = tails.below + u * tails.at;
    let upper = tails.above + (1.0 - u) * tails.at;
    PValue::clamped(2.0 * phi.min(upper))
}

/// The randomized transform `φ` itself, uniform on (0, 1) under the null.
#[inline]
pub fn randomized_pit(tails: &Tails, u: f64) -> f64 {
    tails.below + u * tails.at
}
