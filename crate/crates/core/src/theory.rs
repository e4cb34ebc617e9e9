//! Closed-form detection-boundary constants and delay bounds.
//!
//! Asymptotics are in `N → ∞` with `log γ ~ N^ζ` and a fraction `ε ~ N^-β`
//! of affected streams.

use crate::error::{Error, Result};
use crate::real::Real;

/// Sparsity/ARL exponents and the scale of the problem.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegimeParams<T> {
    pub beta: T,
    pub zeta: T,
    pub delta: T,
    pub num_streams: usize,
    /// Size of a fixed affected subset.
    pub subset_size: Option<usize>,
}

/// Which asymptotic regime a `(β, ζ)` pair falls in.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    /// `β < (1-ζ)/2`: delay tends to one.
    Dense,
    /// `(1-ζ)/2 < β < 1-ζ`: delay grows like `log N`.
    Moderate,
    /// `β > 1-ζ`: delay over a fixed subset of size `V` grows like `N^ζ`.
    Extreme,
}

impl<T: Real> RegimeParams<T> {
    pub fn validate(&self) -> Result<()> {
        if !(self.beta > T::zero() && self.beta < T::one()) {
            return Err(Error::Domain(format!("beta must lie in (0, 1), got {}", self.beta)));
        }
        if !(self.zeta > T::zero() && self.zeta <= T::one()) {
            return Err(Error::Domain(format!("zeta must lie in (0, 1], got {}", self.zeta)));
        }
        if self.delta == T::zero() || !self.delta.is_finite() {
            return Err(Error::Domain("delta must be finite and non-zero".into()));
        }
        if self.num_streams < 2 {
            return Err(Error::Domain("need at least 2 streams".into()));
        }
        Ok(())
    }

    /// Classifies `(β, ζ)`. The boundaries `β = (1-ζ)/2` and `β = 1-ζ` are
    /// rejected.
    pub fn regime(&self) -> Result<Regime> {
        self.validate()?;
        let lower = (T::one() - self.zeta) / T::lit(2.0);
        let upper = T::one() - self.zeta;
        if self.beta < lower {
            Ok(Regime::Dense)
        } else if self.beta > lower && self.beta < upper {
            Ok(Regime::Moderate)
        } else if self.beta > upper {
            Ok(Regime::Extreme)
        } else {
            Err(Error::Domain(format!(
                "beta = {} sits on a regime boundary for zeta = {}",
                self.beta, self.zeta
            )))
        }
    }

    fn n(&self) -> T {
        T::from_usize(self.num_streams).expect("stream count representable")
    }

    fn extreme_bound(&self) -> Result<T> {
        let v = self
            .subset_size
            .filter(|&v| v > 0)
            .ok_or_else(|| Error::Domain("the extreme regime needs a subset size V >= 1".into()))?;
        let v = T::from_usize(v).expect("subset size representable");
        Ok(T::lit(2.0) / (self.delta * self.delta) / v * self.n().powf(self.zeta))
    }
}

/// Detection-boundary constant `ρ_Z(β, ζ)` for `(1-ζ)/2 < β <= 1-ζ`.
pub fn rho_z<T: Real>(beta: T, zeta: T) -> Result<T> {
    let room = T::one() - zeta;
    let lower = room / T::lit(2.0);
    if !(beta > lower && beta <= room) {
        return Err(Error::Domain(format!(
            "rho_z needs (1-zeta)/2 < beta <= 1-zeta, got beta = {beta}, zeta = {zeta}"
        )));
    }
    if beta <= T::lit(0.75) * room {
        Ok(beta - lower)
    } else {
        let d = room.sqrt() - (room - beta).sqrt();
        Ok(d * d)
    }
}

/// Lower bound on the detection delay of any rule with `ARL >= γ`:
/// `2 Δ^-2 ρ_Z(β, ζ) log N` in the moderate regime and `2 Δ^-2 V^-1 N^ζ` in
/// the extreme regime.
pub fn delay_lower_bound<T: Real>(params: &RegimeParams<T>, regime: Regime) -> Result<T> {
    let actual = params.regime()?;
    if actual != regime {
        return Err(Error::Domain(format!("parameters are in the {actual:?} regime, not {regime:?}")));
    }
    match regime {
        Regime::Moderate => {
            let rho = rho_z(params.beta, params.zeta)?;
            Ok(T::lit(2.0) / (params.delta * params.delta) * rho * params.n().ln())
        }
        Regime::Extreme => params.extreme_bound(),
        Regime::Dense => Err(Error::Domain("no lower bound is stated for the dense regime".into())),
    }
}

/// Asymptotic delay of the sparsity likelihood rule: one in the dense regime,
/// the lower bounds elsewhere.
pub fn asymptotic_delay<T: Real>(params: &RegimeParams<T>, regime: Regime) -> Result<T> {
    let actual = params.regime()?;
    if actual != regime {
        return Err(Error::Domain(format!("parameters are in the {actual:?} regime, not {regime:?}")));
    }
    match regime {
        Regime::Dense => Ok(T::one()),
        _ => delay_lower_bound(params, regime),
    }
}

/// `log(4γ² + 2γ)`: a threshold at this level guarantees `ARL >= γ` for the
/// sparsity likelihood rule.
pub fn threshold_upper_bound<T: Real>(gamma: T) -> Result<T> {
    if !(gamma > T::zero()) || !gamma.is_finite() {
        return Err(Error::Domain(format!("gamma must be positive, got {gamma}")));
    }
    Ok((T::lit(4.0) * gamma * gamma + T::lit(2.0) * gamma).ln())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn regime(beta: f64, zeta: f64, delta: f64, n: usize, v: Option<usize>) -> RegimeParams<f64> {
        RegimeParams { beta, zeta, delta, num_streams: n, subset_size: v }
    }

    #[test]
    fn rho_z_examples() {
        assert!((rho_z(0.35_f64, 0.4).unwrap() - 0.05).abs() < 1e-15);
        let a = rho_z(0.45_f64, 0.4).unwrap();
        let b = {
            let d = 0.6_f64.sqrt() - 0.15_f64.sqrt();
            d * d
        };
        assert!((a - 0.15).abs() < 1e-15 && (b - 0.15).abs() < 1e-15);
        assert!((rho_z(0.5_f64, 0.4).unwrap() - 0.210_102_051_443_364_38).abs() < 1e-15);
        assert!(rho_z(0.3, 0.4).is_err());
        assert!(rho_z(0.61, 0.4).is_err());
    }

    #[test]
    fn rho_z_continuity_on_grid() {
        for i in 1..=19 {
            let zeta = 0.05 * i as f64;
            let room = 1.0 - zeta;
            let knot = 0.75 * room;
            let left = knot - room / 2.0;
            let d = room.sqrt() - (room - knot).sqrt();
            assert!((left - d * d).abs() < 1e-12, "zeta={zeta}");
            assert!((rho_z(knot, zeta).unwrap() - d * d).abs() < 1e-12);
        }
    }

    #[test]
    fn rho_z_reduces_to_classical_constant() {
        for beta in [0.55, 0.6, 0.7, 0.75, 0.8, 0.9, 1.0] {
            let classic = if beta <= 0.75 {
                beta - 0.5
            } else {
                let d = 1.0 - (1.0_f64 - beta).sqrt();
                d * d
            };
            assert!((rho_z(beta, 0.0).unwrap() - classic).abs() < 1e-15);
        }
    }

    #[test]
    fn bounds() {
        let p = regime(0.7, 0.5, 1.0, 100, Some(2));
        assert_eq!(p.regime().unwrap(), Regime::Extreme);
        assert!((delay_lower_bound(&p, Regime::Extreme).unwrap() - 10.0).abs() < 1e-12);

        let p = regime(0.35, 0.4, 1.0, 100, None);
        assert!((delay_lower_bound(&p, Regime::Moderate).unwrap() - 0.460_517_018_598_809_1).abs() < 1e-12);
        assert!(delay_lower_bound(&p, Regime::Extreme).is_err());

        let doubled = RegimeParams { delta: 2.0, ..p };
        let ratio = delay_lower_bound(&p, Regime::Moderate).unwrap()
            / delay_lower_bound(&doubled, Regime::Moderate).unwrap();
        assert!((ratio - 4.0).abs() < 1e-12);
        let p = regime(0.7, 0.5, 1.0, 100, Some(2));
        let q = RegimeParams { delta: 2.0, ..p };
        let ratio = delay_lower_bound(&p, Regime::Extreme).unwrap()
            / delay_lower_bound(&q, Regime::Extreme).unwrap();
        assert!((ratio - 4.0).abs() < 1e-12);
    }

    #[test]
    fn boundaries_rejected() {
        assert!(regime(0.5, 0.5, 1.0, 100, Some(2)).regime().is_err());
        assert!(regime(0.25, 0.5, 1.0, 100, Some(2)).regime().is_err());
        assert!(regime(0.3, 0.0, 1.0, 100, None).regime().is_err());
        assert!(regime(0.3, 0.5, 0.0, 100, None).regime().is_err());
    }

    #[test]
    fn asymptotic_delays() {
        let p = regime(0.02, 0.9, 1.0, 100, None);
        assert_eq!(asymptotic_delay(&p, Regime::Dense).unwrap(), 1.0);
        // zeta = 1 leaves no room below 1 - zeta
        for beta in [0.05, 0.3, 0.9] {
            let p = regime(beta, 1.0, 1.0, 100, Some(2));
            assert_eq!(p.regime().unwrap(), Regime::Extreme);
            assert!(asymptotic_delay(&p, Regime::Dense).is_err());
        }
        let p = regime(0.35, 0.4, 1.5, 1000, None);
        assert_eq!(
            asymptotic_delay(&p, Regime::Moderate).unwrap(),
            delay_lower_bound(&p, Regime::Moderate).unwrap()
        );
        let p = regime(0.8, 0.4, 1.5, 1000, Some(3));
        assert_eq!(
            asymptotic_delay(&p, Regime::Extreme).unwrap(),
            delay_lower_bound(&p, Regime::Extreme).unwrap()
        );
    }

    #[test]
    fn threshold_bound() {
        assert!((threshold_upper_bound(5000.0_f64).unwrap() - 18.42).abs() < 0.005);
        assert!((threshold_upper_bound(0.5_f64).unwrap() - 2.0_f64.ln()).abs() < 1e-15);
        assert!(threshold_upper_bound(5000.0_f64).unwrap() > 7.160);
        assert!(threshold_upper_bound(0.0_f64).is_err());
    }
}
