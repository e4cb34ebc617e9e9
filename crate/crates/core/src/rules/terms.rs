//! Per-stream terms of the competitor rules, evaluated in log space when the
//! exponent is large.

/// `λ = 2(√2 - 1)`, which makes `λ E[exp((Z⁺)²/4)] = 1` for standard normal `Z`.
pub const MLR_LAMBDA: f64 = 2.0 * (std::f64::consts::SQRT_2 - 1.0);

const LOG_SPACE_ABOVE: f64 = 700.0;

/// `log(1 - ε0 + ε0 exp((z⁺)²/2))`.
#[inline]
pub fn xs_term(z: f64, epsilon0: f64) -> f64 {
    let zp = z.max(0.0);
    let x = 0.5 * zp * zp;
    if x > LOG_SPACE_ABOVE {
        x + (epsilon0 + (1.0 - epsilon0) * (-x).exp()).ln()
    } else {
        (epsilon0 * x.exp_m1()).ln_1p()
    }
}

/// `log(1 + ε0 (λ exp(y) - 1))` for `λ > 0`, `ε0 ∈ (0, 1]`.
#[inline]
fn detectability(y: f64, epsilon0: f64, lambda: f64) -> f64 {
    if y > LOG_SPACE_ABOVE {
        y + (epsilon0 * lambda).ln() + ((1.0 - epsilon0) / (epsilon0 * lambda) * (-y).exp()).ln_1p()
    } else {
        (epsilon0 * (lambda * y.exp() - 1.0)).ln_1p()
    }
}

/// Modified MLR term `log(1 + ε0 (λ exp((z⁺)²/4) - 1))`, `λ = 2(√2 - 1)`.
#[inline]
pub fn mlr_term(z: f64, epsilon0: f64) -> f64 {
    let zp = z.max(0.0);
    detectability(0.25 * zp * zp, epsilon0, MLR_LAMBDA)
}

/// `1 / E[exp(W/2)]` for `W` the stationary null law of the CUSUM recursion
/// `W ← (W + Δ0 X - Δ0²/2)⁺`, so that `λ_M exp(R/2)` has unit mean in steady
/// state. Spitzer's identity gives
/// `log E[exp(W/2)] = Σ_n n⁻¹ (exp(-n Δ0²/8)/2 - Q(√n Δ0/2))`.
pub fn mei_lambda(delta0: f64) -> f64 {
    let d2 = delta0 * delta0;
    let mut sum = 0.0;
    for n in 1..=10_000_000u32 {
        let n = f64::from(n);
        let term = (0.5 * (-n * d2 / 8.0).exp() - 0.5 * libm::erfc((n * d2 / 8.0).sqrt())) / n;
        sum += term;
        if term.abs() < 1e-18 * sum.abs() {
            break;
        }
    }
    (-sum).exp()
}

/// `g_M(x) = log(1 + ε0 (λ_M exp(x/2) - 1))` applied to a CUSUM score.
#[inline]
pub fn mei_eps_term(r: f64, epsilon0: f64, lambda_m: f64) -> f64 {
    detectability(0.5 * r, epsilon0, lambda_m)
}
