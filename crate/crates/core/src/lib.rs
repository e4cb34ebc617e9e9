//! Sequential detection of sparse changes across many parallel streams.
//!
//! Each stream contributes a p-value computed over a recent window; the
//! sparsity likelihood score combines them so that a change confined to a
//! few streams and one spread over many are both detected quickly.
//!
//! The scoring math is generic over [`Real`]; the aliases below fix it to
//! `f64`, which is what the engine and the simulations use.

pub mod error;
pub mod experiment;
pub mod models;
pub mod montecarlo;
pub mod pvalue;
pub mod real;
pub mod rules;
pub mod score;
pub mod theory;
pub mod window;

pub use error::{Error, Result};
pub use models::{ChangeScenario, Family, ScenarioSource, SeededSource, Subset};
pub use montecarlo::{
    calibrate_threshold, estimate_arl, estimate_delay, null_tail_check, ArlEstimate, ArlEstimator,
    CalibrationResult, DelayResult, TailCheck,
};
pub use pvalue::{discrete_pvalue, DiscreteNullSpec};
pub use real::Real;
pub use rules::{run_rule, CountNull, Detector, Rule, RuleConfig, RuleKind, RunOutcome, StopDecision};
pub use score::default_lambda2;
pub use theory::Regime;
pub use window::{ObservationBuffer, WindowSet};

pub type PValue = score::PValue<f64>;
pub type SparsityParams = score::SparsityParams<f64>;
pub type NormalStat = pvalue::NormalStat<f64>;
pub type RegimeParams = theory::RegimeParams<f64>;

/// Single precision variants of the scoring types.
pub mod f32 {
    pub type PValue = crate::score::PValue<f32>;
    pub type SparsityParams = crate::score::SparsityParams<f32>;
    pub type NormalStat = crate::pvalue::NormalStat<f32>;
    pub type RegimeParams = crate::theory::RegimeParams<f32>;
}
