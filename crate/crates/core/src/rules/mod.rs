//! Stopping rules.
//!
//! Every rule exposes a per-step detection statistic; the rule stops at the
//! first time the statistic is `>=` the threshold. Windowed rules maximize a
//! sum of per-stream terms over the admissible window lengths, the CUSUM
//! rules sum transformed per-stream CUSUM scores.

mod cusum;
mod detector;
mod screen;
mod terms;

use std::fmt;

use crate::error::{Error, Result};
use crate::score::SparsityParams;
use crate::window::WindowSet;

pub use cusum::{mei_brute_force, mei_eps_statistic, mei_step, CusumState};
pub use detector::{run_rule, DataSource, Detector, Rule, RunOutcome};
pub use terms::{mei_eps_term, mei_lambda, mlr_term, xs_term, MLR_LAMBDA};

/// Identifies a stopping rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RuleKind {
    /// Sparsity likelihood rule on two-sided p-values.
    SlTwoSided,
    /// Sparsity likelihood rule on one-sided (upper tail) p-values.
    SlOneSided,
    /// Mixture likelihood ratio with positive-part thresholding.
    Xs,
    /// Sum of CUSUM statistics.
    Mei,
    /// Sum of CUSUM statistics after a detectability transform.
    MeiEps,
    /// Modified mixture likelihood ratio.
    ModifiedMlr,
}

impl RuleKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::SlTwoSided => "sl_two_sided",
            Self::SlOneSided => "sl_one_sided",
            Self::Xs => "xs",
            Self::Mei => "mei",
            Self::MeiEps => "mei_eps",
            Self::ModifiedMlr => "modified_mlr",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Ok(match s {
            "sl_two_sided" | "sl" => Self::SlTwoSided,
            "sl_one_sided" | "sl1" => Self::SlOneSided,
            "xs" => Self::Xs,
            "mei" => Self::Mei,
            "mei_eps" => Self::MeiEps,
            "modified_mlr" | "s" => Self::ModifiedMlr,
            other => return Err(Error::Config(format!("unknown rule '{other}'"))),
        })
    }

    pub fn is_windowed(self) -> bool {
        !matches!(self, Self::Mei | Self::MeiEps)
    }

    pub fn is_sl(self) -> bool {
        matches!(self, Self::SlTwoSided | Self::SlOneSided)
    }
}

impl fmt::Display for RuleKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Per-step null law of a count stream. A window of length `k` is compared
/// against `Poisson(k Δ0)` or `Binomial(k n0, p0)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CountNull {
    Poisson { mean: f64 },
    Binomial { trials: u64, success_prob: f64 },
}

impl CountNull {
    pub fn for_window(&self, k: usize) -> crate::pvalue::DiscreteNullSpec {
        use crate::pvalue::DiscreteNullSpec;
        match *self {
            Self::Poisson { mean } => DiscreteNullSpec::Poisson { mean: mean * k as f64 },
            Self::Binomial { trials, success_prob } => {
                DiscreteNullSpec::Binomial { trials: trials * k as u64, success_prob }
            }
        }
    }

    fn validate(&self) -> Result<()> {
        self.for_window(1).validate()
    }
}

/// Parameters of a stopping rule.
#[derive(Debug, Clone, PartialEq)]
pub struct RuleConfig {
    pub kind: RuleKind,
    pub num_streams: usize,
    pub sparsity: Option<SparsityParams<f64>>,
    pub epsilon0: Option<f64>,
    pub delta0: Option<f64>,
    pub lambda_m: Option<f64>,
    pub windows: Option<WindowSet>,
    /// Discrete null law; when set, an SL rule scores window counts with
    /// randomized two-sided p-values.
    pub count_null: Option<CountNull>,
}

impl RuleConfig {
    fn bare(kind: RuleKind, num_streams: usize) -> Self {
        Self {
            kind,
            num_streams,
            sparsity: None,
            epsilon0: None,
            delta0: None,
            lambda_m: None,
            windows: None,
            count_null: None,
        }
    }

    pub fn sl_two_sided(sparsity: SparsityParams<f64>, windows: WindowSet) -> Self {
        Self {
            sparsity: Some(sparsity),
            windows: Some(windows),
            ..Self::bare(RuleKind::SlTwoSided, sparsity.num_streams())
        }
    }

    pub fn sl_one_sided(sparsity: SparsityParams<f64>, windows: WindowSet) -> Self {
        Self {
            sparsity: Some(sparsity),
            windows: Some(windows),
            ..Self::bare(RuleKind::SlOneSided, sparsity.num_streams())
        }
    }

    /// Two-sided SL rule on counts with randomized p-values.
    pub fn sl_counts(sparsity: SparsityParams<f64>, windows: WindowSet, null: CountNull) -> Self {
        Self { count_null: Some(null), ..Self::sl_two_sided(sparsity, windows) }
    }

    pub fn xs(num_streams: usize, epsilon0: f64, windows: WindowSet) -> Self {
        Self {
            epsilon0: Some(epsilon0),
            windows: Some(windows),
            ..Self::bare(RuleKind::Xs, num_streams)
        }
    }

    pub fn mei(num_streams: usize, delta0: f64) -> Self {
        Self { delta0: Some(delta0), ..Self::bare(RuleKind::Mei, num_streams) }
    }

    pub fn mei_eps(num_streams: usize, delta0: f64, epsilon0: f64, lambda_m: f64) -> Self {
        Self {
            delta0: Some(delta0),
            epsilon0: Some(epsilon0),
            lambda_m: Some(lambda_m),
            ..Self::bare(RuleKind::MeiEps, num_streams)
        }
    }

    pub fn modified_mlr(num_streams: usize, epsilon0: f64, windows: WindowSet) -> Self {
        Self {
            epsilon0: Some(epsilon0),
            windows: Some(windows),
            ..Self::bare(RuleKind::ModifiedMlr, num_streams)
        }
    }

    /// Checks that the fields required by `kind` are present and in range.
    pub fn validate(&self) -> Result<()> {
        let missing = |what: &str| Error::Config(format!("rule {} needs {what}", self.kind));
        if self.num_streams == 0 {
            return Err(Error::Config("num_streams must be positive".into()));
        }
        if self.kind.is_windowed() && self.windows.is_none() {
            return Err(missing("a window set"));
        }
        if self.kind.is_sl() {
            let sp = self.sparsity.as_ref().ok_or_else(|| missing("sparsity parameters"))?;
            if sp.num_streams() != self.num_streams {
                return Err(Error::Config("sparsity parameters disagree on N".into()));
            }
        }
        if let Some(null) = &self.count_null {
            if self.kind != RuleKind::SlTwoSided {
                return Err(Error::Config("count models are scored by the two-sided SL rule".into()));
            }
            null.validate()?;
        }
        if matches!(self.kind, RuleKind::Xs | RuleKind::MeiEps | RuleKind::ModifiedMlr) {
            let eps = self.epsilon0.ok_or_else(|| missing("epsilon0"))?;
            if !(eps > 0.0 && eps <= 1.0) {
                return Err(Error::Config(format!("epsilon0 must lie in (0, 1], got {eps}")));
            }
        }
        if matches!(self.kind, RuleKind::Mei | RuleKind::MeiEps) {
            let d = self.delta0.ok_or_else(|| missing("delta0"))?;
            if !(d > 0.0) || !d.is_finite() {
                return Err(Error::Config(format!("delta0 must be positive, got {d}")));
            }
        }
        if self.kind == RuleKind::MeiEps {
            let l = self.lambda_m.ok_or_else(|| missing("lambda_m"))?;
            if !(l > 0.0) || !l.is_finite() {
                return Err(Error::Config(format!("lambda_m must be positive, got {l}")));
            }
        }
        Ok(())
    }

    /// Short parameter summary used in reports.
    pub fn describe(&self) -> String {
        let mut parts = Vec::new();
        if let Some(sp) = &self.sparsity {
            parts.push(format!("lambda1={}", sp.lambda1()));
            parts.push(format!("lambda2={:.4}", sp.lambda2()));
        }
        if let Some(e) = self.epsilon0 {
            parts.push(format!("epsilon0={e}"));
        }
        if let Some(d) = self.delta0 {
            parts.push(format!("delta0={d}"));
        }
        if let Some(l) = self.lambda_m {
            parts.push(format!("lambda_m={l:.6}"));
        }
        parts.join(";")
    }
}

/// Statistic at one time step and the resulting decision.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StopDecision {
    pub statistic: f64,
    pub stopped: bool,
    /// Smallest window length attaining the maximum, for windowed rules.
    pub best_window: Option<usize>,
}

impl StopDecision {
    pub fn new(statistic: f64, best_window: Option<usize>, threshold: f64) -> Self {
        Self { statistic, stopped: statistic >= threshold, best_window }
    }
}

/// Maximum of a windowed statistic over the admissible window lengths.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WindowMax {
    pub statistic: f64,
    pub best_window: usize,
}

pub use detector::{modified_mlr_statistic, sl_statistic, xs_statistic};
