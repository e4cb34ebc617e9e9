//! CUSUM recursion shared by the Mei-type rules.

use super::terms::mei_eps_term;

/// Per-stream CUSUM scores `R_t^n >= 0`, starting from zero.
#[derive(Debug, Clone, PartialEq)]
pub struct CusumState {
    scores: Vec<f64>,
}

impl CusumState {
    pub fn new(num_streams: usize) -> Self {
        Self { scores: vec![0.0; num_streams] }
    }

    pub fn scores(&self) -> &[f64] {
        &self.scores
    }

    pub fn reset(&mut self) {
        self.scores.fill(0.0);
    }
}

/// Advances `R_t = (R_{t-1} + Δ0 x_t - Δ0²/2)⁺` on every stream and returns
/// `Σ_n R_t^n`.
///
/// Panics if `x` and the state disagree on the number of streams.
pub fn mei_step(state: &mut CusumState, x: &[f64], delta0: f64) -> f64 {
    assert_eq!(x.len(), state.scores.len(), "observation length");
    let drift = 0.5 * delta0 * delta0;
    let mut total = 0.0;
    for (r, &xn) in state.scores.iter_mut().zip(x) {
        *r = (*r + delta0 * xn - drift).max(0.0);
        total += *r;
    }
    total
}

/// `Σ_n g_M(R_t^n)`.
pub fn mei_eps_statistic(state: &CusumState, epsilon0: f64, lambda_m: f64) -> f64 {
    state.scores.iter().map(|&r| mei_eps_term(r, epsilon0, lambda_m)).sum()
}

/// `max_{0 < s <= t} (Δ0 S_st - k Δ0²/2)⁺` for one stream's full history,
/// by enumeration over `s`.
pub fn mei_brute_force(history: &[f64], delta0: f64) -> f64 {
    let t = history.len();
    let mut best = 0.0_f64;
    let mut sum = 0.0;
    for s in (0..t).rev() {
        sum += history[s];
        let k = (t - s) as f64;
        best = best.max(delta0 * sum - k * delta0 * delta0 / 2.0);
    }
    best
}
