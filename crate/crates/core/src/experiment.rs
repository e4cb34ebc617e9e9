//! Experiment configuration, the reference table pipelines and report
//! rendering used by the command-line tool.
//!
//! A configuration is a flat `key = value` file; command-line flags are
//! applied on top of it through the same [`ExperimentConfig::set`] path.

use std::fmt::Write as _;
use std::path::PathBuf;

use crate::error::{Error, Result};
use crate::models::{ChangeScenario, Family};
use crate::montecarlo::{self, ArlEstimator, DELAY_HORIZON};
use crate::rules::{mei_lambda, CountNull, Rule, RuleConfig, RuleKind};
use crate::score::{default_lambda2, SparsityParams};
use crate::theory::{self, RegimeParams};
use crate::window::WindowSet;

/// Model family names accepted by `model`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelKind {
    Normal,
    Poisson,
    Binomial,
}

impl ModelKind {
    fn parse(s: &str) -> Result<Self> {
        match s {
            "normal" => Ok(Self::Normal),
            "poisson" => Ok(Self::Poisson),
            "binomial" => Ok(Self::Binomial),
            other => Err(Error::Config(format!("unknown model '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Text,
}

impl Format {
    fn parse(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(Self::Csv),
            "text" => Ok(Self::Text),
            other => Err(Error::Config(format!("unknown format '{other}' (csv or text)"))),
        }
    }
}

/// Everything a calibrate or delay run needs.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub rule: RuleKind,
    pub lambda1: f64,
    /// `None` means the default for `gamma`.
    pub lambda2: Option<f64>,
    pub epsilon0: Option<f64>,
    pub delta0: f64,
    /// `None` means [`mei_lambda`] of `delta0`.
    pub lambda_m: Option<f64>,
    pub model: ModelKind,
    /// Post-change normal mean.
    pub shift: f64,
    pub poisson_rate0: f64,
    pub poisson_rate1: f64,
    pub binomial_trials: u64,
    pub binomial_p0: f64,
    pub binomial_p1: f64,
    pub n_streams: usize,
    pub window_k1: usize,
    /// `None` gives the contiguous set `{1..k1}`.
    pub window_r: Option<f64>,
    pub window_cap: Option<usize>,
    pub gamma: f64,
    pub threshold: Option<f64>,
    pub trials: usize,
    pub horizon: Option<u64>,
    pub seed: u64,
    pub subset_sizes: Vec<usize>,
    pub tolerance: f64,
    pub bracket_lo: Option<f64>,
    pub bracket_hi: Option<f64>,
    pub out: Option<PathBuf>,
    pub format: Format,
    pub workers: Option<usize>,
}

pub const DEFAULT_SEED: u64 = 20_240_601;
pub const DEFAULT_SUBSET_SIZES: [usize; 7] = [1, 3, 5, 10, 30, 50, 100];

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            rule: RuleKind::SlOneSided,
            lambda1: 1.0,
            lambda2: None,
            epsilon0: None,
            delta0: 1.0,
            lambda_m: None,
            model: ModelKind::Normal,
            shift: 1.0,
            poisson_rate0: 0.015,
            poisson_rate1: 0.3,
            binomial_trials: 5,
            binomial_p0: 0.001,
            binomial_p1: 0.05,
            n_streams: 100,
            window_k1: 200,
            window_r: None,
            window_cap: None,
            gamma: 5000.0,
            threshold: None,
            trials: montecarlo::DEFAULT_TRIALS,
            horizon: None,
            seed: DEFAULT_SEED,
            subset_sizes: DEFAULT_SUBSET_SIZES.to_vec(),
            tolerance: 0.05,
            bracket_lo: None,
            bracket_hi: None,
            out: None,
            format: Format::Text,
            workers: None,
        }
    }
}

fn parse_num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value.trim().parse().map_err(|_| Error::Config(format!("{key}: cannot parse '{value}'")))
}

impl ExperimentConfig {
    /// Sets one key. Dashes and underscores are interchangeable.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let key = key.trim().replace('-', "_");
        let v = value.trim();
        match key.as_str() {
            "rule" => self.rule = RuleKind::parse(v)?,
            "lambda1" => self.lambda1 = parse_num(&key, v)?,
            "lambda2" => self.lambda2 = Some(parse_num(&key, v)?),
            "epsilon0" => self.epsilon0 = Some(parse_num(&key, v)?),
            "delta0" => self.delta0 = parse_num(&key, v)?,
            "lambda_m" => self.lambda_m = Some(parse_num(&key, v)?),
            "model" => self.model = ModelKind::parse(v)?,
            "shift" => self.shift = parse_num(&key, v)?,
            "poisson_rate0" => self.poisson_rate0 = parse_num(&key, v)?,
            "poisson_rate1" => self.poisson_rate1 = parse_num(&key, v)?,
            "binomial_trials" => self.binomial_trials = parse_num(&key, v)?,
            "binomial_p0" => self.binomial_p0 = parse_num(&key, v)?,
            "binomial_p1" => self.binomial_p1 = parse_num(&key, v)?,
            "n_streams" => self.n_streams = parse_num(&key, v)?,
            "window_k1" => self.window_k1 = parse_num(&key, v)?,
            "window_r" => self.window_r = Some(parse_num(&key, v)?),
            "window_cap" => self.window_cap = Some(parse_num(&key, v)?),
            "gamma" => self.gamma = parse_num(&key, v)?,
            "threshold" => self.threshold = Some(parse_num(&key, v)?),
            "trials" => self.trials = parse_num(&key, v)?,
            "horizon" => self.horizon = Some(parse_num(&key, v)?),
            "seed" => self.seed = parse_num(&key, v)?,
            "subset_sizes" => {
                self.subset_sizes =
                    v.split(',').filter(|s| !s.trim().is_empty()).map(|s| parse_num(&key, s)).collect::<Result<_>>()?
            }
            "tolerance" => self.tolerance = parse_num(&key, v)?,
            "bracket_lo" => self.bracket_lo = Some(parse_num(&key, v)?),
            "bracket_hi" => self.bracket_hi = Some(parse_num(&key, v)?),
            "out" => self.out = Some(PathBuf::from(v)),
            "format" => self.format = Format::parse(v)?,
            "workers" => self.workers = Some(parse_num(&key, v)?),
            _ => return Err(Error::Config(format!("unknown key '{key}'"))),
        }
        Ok(())
    }

    /// Applies a `key = value` file; `#` starts a comment.
    pub fn apply_file_contents(&mut self, text: &str) -> Result<()> {
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key = value", lineno + 1)))?;
            self.set(k, v).map_err(|e| Error::Config(format!("line {}: {e}", lineno + 1)))?;
        }
        Ok(())
    }

    pub fn family(&self) -> Family {
        match self.model {
            ModelKind::Normal => Family::Normal { delta: self.shift },
            ModelKind::Poisson => Family::Poisson { delta0: self.poisson_rate0, delta1: self.poisson_rate1 },
            ModelKind::Binomial => {
                Family::Binomial { n0: self.binomial_trials, p0: self.binomial_p0, p1: self.binomial_p1 }
            }
        }
    }

    pub fn windows(&self) -> Result<WindowSet> {
        let cap = self.window_cap.unwrap_or(self.window_k1);
        match self.window_r {
            Some(r) => WindowSet::build(self.window_k1, r, cap),
            None => WindowSet::contiguous(cap.min(self.window_k1)),
        }
    }

    pub fn lambda2_value(&self) -> Result<f64> {
        match self.lambda2 {
            Some(l) => Ok(l),
            None => default_lambda2(self.gamma),
        }
    }

    /// Builds and validates the rule against the model.
    pub fn rule_config(&self) -> Result<RuleConfig> {
        let n = self.n_streams;
        let eps = || self.epsilon0.ok_or_else(|| Error::Config(format!("rule {} needs epsilon0", self.rule)));
        let counts = match self.model {
            ModelKind::Normal => None,
            ModelKind::Poisson => Some(CountNull::Poisson { mean: self.poisson_rate0 }),
            ModelKind::Binomial => {
                Some(CountNull::Binomial { trials: self.binomial_trials, success_prob: self.binomial_p0 })
            }
        };
        let config = match (self.rule, counts) {
            (RuleKind::SlTwoSided, Some(null)) => {
                RuleConfig::sl_counts(SparsityParams::new(n, self.lambda1, self.lambda2_value()?)?, self.windows()?, null)
            }
            (_, Some(_)) => {
                return Err(Error::Config(format!(
                    "model {:?} is only scored by the two-sided SL rule ('sl')",
                    self.model
                )))
            }
            (RuleKind::SlTwoSided, None) => {
                RuleConfig::sl_two_sided(SparsityParams::new(n, self.lambda1, self.lambda2_value()?)?, self.windows()?)
            }
            (RuleKind::SlOneSided, None) => {
                RuleConfig::sl_one_sided(SparsityParams::new(n, self.lambda1, self.lambda2_value()?)?, self.windows()?)
            }
            (RuleKind::Xs, None) => RuleConfig::xs(n, eps()?, self.windows()?),
            (RuleKind::ModifiedMlr, None) => RuleConfig::modified_mlr(n, eps()?, self.windows()?),
            (RuleKind::Mei, None) => RuleConfig::mei(n, self.delta0),
            (RuleKind::MeiEps, None) => RuleConfig::mei_eps(n, self.delta0, eps()?, self.lambda_m.unwrap_or_else(|| mei_lambda(self.delta0))),
        };
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        self.rule_config()?;
        ChangeScenario::null(self.n_streams, self.family()).validate()?;
        if self.trials == 0 {
            return Err(Error::Config("trials must be positive".into()));
        }
        if !(self.gamma > 1.0) || !self.gamma.is_finite() {
            return Err(Error::Config(format!("gamma must exceed 1, got {}", self.gamma)));
        }
        if !(self.tolerance > 0.0 && self.tolerance < 1.0) {
            return Err(Error::Config("tolerance must lie in (0, 1)".into()));
        }
        if self.horizon == Some(0) {
            return Err(Error::Config("horizon must be positive".into()));
        }
        if self.workers == Some(0) {
            return Err(Error::Config("workers must be positive".into()));
        }
        Ok(())
    }

    /// Subset sizes matter only for delay runs.
    fn validate_subsets(&self) -> Result<()> {
        if self.subset_sizes.is_empty() {
            return Err(Error::Config("no subset sizes given".into()));
        }
        for &v in &self.subset_sizes {
            if v == 0 || v > self.n_streams {
                return Err(Error::Config(format!("subset size {v} outside 1..={}", self.n_streams)));
            }
        }
        Ok(())
    }

    /// Default calibration interval for the rule.
    pub fn bracket(&self) -> Result<(f64, f64)> {
        let n = self.n_streams as f64;
        let hi = match self.rule {
            RuleKind::SlOneSided | RuleKind::SlTwoSided => theory::threshold_upper_bound(self.gamma)?,
            _ => 4.0 * n,
        };
        Ok((self.bracket_lo.unwrap_or(-n), self.bracket_hi.unwrap_or(hi)))
    }

    fn model_label(&self) -> String {
        match self.family() {
            Family::Normal { delta } => format!("normal(shift={delta})"),
            Family::Poisson { delta0, delta1 } => format!("poisson(rate0={delta0};rate1={delta1})"),
            Family::Binomial { n0, p0, p1 } => format!("binomial(n0={n0};p0={p0};p1={p1})"),
        }
    }
}

/// One output line. Empty optional fields render as empty CSV cells.
#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub rule: String,
    pub params: String,
    pub model: String,
    pub subset_size: Option<usize>,
    pub threshold: Option<f64>,
    pub metric: String,
    pub value: f64,
    pub std_error: Option<f64>,
    pub trials: Option<usize>,
    pub seed: Option<u64>,
    /// Failure annotation; a failed cell has `value = NaN`.
    pub note: Option<String>,
}

/// Rows of one command, rendered as CSV or aligned text.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Report {
    pub title: String,
    pub rows: Vec<Row>,
}

pub const CSV_HEADER: &str = "rule,params,model,subset_size,threshold,metric,value,std_error,trials,seed";

/// Formats with 6 significant digits, trailing zeros removed, switching to
/// exponent notation outside `[1e-4, 1e6)`.
pub fn sig6(x: f64) -> String {
    if x.is_nan() {
        return "NaN".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    let sci = format!("{x:.5e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent form");
    let exp: i32 = exp.parse().expect("integer exponent");
    let trim = |s: &str| -> String {
        if s.contains('.') {
            s.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            s.to_string()
        }
    };
    if !(-4..6).contains(&exp) {
        format!("{}e{exp}", trim(mantissa))
    } else {
        trim(&format!("{x:.*}", (5 - exp) as usize))
    }
}

impl Report {
    pub fn new(title: impl Into<String>) -> Self {
        Self { title: title.into(), rows: Vec::new() }
    }

    pub fn failures(&self) -> usize {
        self.rows.iter().filter(|r| r.note.is_some()).count()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(CSV_HEADER);
        out.push('\n');
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{}",
                r.rule,
                r.params,
                r.model,
                r.subset_size.map(|v| v.to_string()).unwrap_or_default(),
                r.threshold.map(sig6).unwrap_or_default(),
                r.metric,
                sig6(r.value),
                r.std_error.map(sig6).unwrap_or_default(),
                r.trials.map(|v| v.to_string()).unwrap_or_default(),
                r.seed.map(|v| v.to_string()).unwrap_or_default(),
            );
        }
        out
    }

    pub fn to_text(&self) -> String {
        let header = ["rule", "params", "model", "#N", "threshold", "metric", "value"];
        let cells: Vec<[String; 7]> = self
            .rows
            .iter()
            .map(|r| {
                let value = match (&r.note, r.std_error) {
                    (Some(note), _) => format!("FAILED: {note}"),
                    (None, Some(se)) if se.is_finite() => format!("{} ± {}", sig6(r.value), sig6(se)),
                    (None, _) => sig6(r.value),
                };
                [
                    r.rule.clone(),
                    r.params.clone(),
                    r.model.clone(),
                    r.subset_size.map(|v| v.to_string()).unwrap_or_default(),
                    r.threshold.map(sig6).unwrap_or_default(),
                    r.metric.clone(),
                    value,
                ]
            })
            .collect();
        let mut widths = header.map(|h| h.chars().count());
        for row in &cells {
            for (w, c) in widths.iter_mut().zip(row) {
                *w = (*w).max(c.chars().count());
            }
        }
        let line = |out: &mut String, row: &[&str]| {
            let parts: Vec<String> =
                row.iter().zip(widths).map(|(c, w)| format!("{c:<w$}")).collect();
            let _ = writeln!(out, "{}", parts.join("  ").trim_end());
        };
        let mut out = String::new();
        if !self.title.is_empty() {
            let _ = writeln!(out, "{}", self.title);
        }
        line(&mut out, &header);
        for row in &cells {
            line(&mut out, &row.iter().map(String::as_str).collect::<Vec<_>>());
        }
        out
    }
}

struct RowBase {
    rule: String,
    params: String,
    model: String,
    trials: usize,
    seed: u64,
}

impl RowBase {
    fn new(config: &ExperimentConfig, rule: &RuleConfig) -> Self {
        Self {
            rule: rule.kind.name().to_string(),
            params: rule.describe(),
            model: config.model_label(),
            trials: config.trials,
            seed: config.seed,
        }
    }

    fn row(&self, subset: Option<usize>, threshold: Option<f64>, metric: &str, value: f64, se: Option<f64>) -> Row {
        Row {
            rule: self.rule.clone(),
            params: self.params.clone(),
            model: self.model.clone(),
            subset_size: subset,
            threshold,
            metric: metric.to_string(),
            value,
            std_error: se,
            trials: Some(self.trials),
            seed: Some(self.seed),
            note: None,
        }
    }

    fn failed(&self, subset: Option<usize>, threshold: Option<f64>, metric: &str, err: &Error) -> Row {
        Row { note: Some(err.to_string()), ..self.row(subset, threshold, metric, f64::NAN, None) }
    }
}

fn arl_horizon(config: &ExperimentConfig) -> u64 {
    config.horizon.unwrap_or_else(|| montecarlo::arl_horizon(config.gamma))
}

fn estimator(config: &ExperimentConfig, rule: &Rule) -> Result<ArlEstimator> {
    Ok(ArlEstimator::new(rule.clone(), config.family(), config.trials, arl_horizon(config), config.seed)?
        .with_workers(config.workers))
}

fn push_arl(rows: &mut Vec<Row>, base: &RowBase, est: &mut ArlEstimator, threshold: f64) {
    match est.estimate(threshold) {
        Ok(e) => {
            rows.push(base.row(None, Some(threshold), "arl", e.arl, Some(e.std_error)));
            if e.censored > 0 {
                rows.push(base.row(None, Some(threshold), "censored", e.censored as f64, None));
            }
        }
        Err(err) => rows.push(base.failed(None, Some(threshold), "arl", &err)),
    }
}

/// Calibrates the configured rule; on success also reports the ARL of
/// `extra_thresholds` on the same trials. Returns the calibrated threshold.
fn calibrate_rows(config: &ExperimentConfig, extra_thresholds: &[f64], rows: &mut Vec<Row>) -> Result<Option<f64>> {
    let rule_config = config.rule_config()?;
    let base = RowBase::new(config, &rule_config);
    let rule = Rule::new(rule_config)?;
    let mut est = estimator(config, &rule)?;
    let (lo, hi) = config.bracket()?;
    let calibrated = match est.calibrate(config.gamma, config.tolerance, lo, hi) {
        Ok(c) => {
            rows.push(base.row(None, Some(c.threshold), "threshold", c.threshold, None));
            rows.push(base.row(None, Some(c.threshold), "arl", c.estimated_arl, Some(c.std_error)));
            Some(c.threshold)
        }
        Err(err) => {
            rows.push(base.failed(None, None, "threshold", &err));
            None
        }
    };
    for &c in extra_thresholds {
        push_arl(rows, &base, &mut est, c);
    }
    Ok(calibrated)
}

fn delay_rows(config: &ExperimentConfig, threshold: f64, rows: &mut Vec<Row>) -> Result<()> {
    config.validate_subsets()?;
    let rule_config = config.rule_config()?;
    let base = RowBase::new(config, &rule_config);
    let rule = Rule::new(rule_config)?;
    let horizon = config.horizon.unwrap_or(DELAY_HORIZON);
    for &v in &config.subset_sizes {
        let scenario = ChangeScenario::first_streams(config.n_streams, v, config.family());
        match montecarlo::estimate_delay(&rule, threshold, &scenario, config.trials, horizon, config.seed, config.workers)
        {
            Ok(d) => {
                rows.push(base.row(Some(v), Some(threshold), "delay", d.mean_delay, Some(d.std_error)));
                if d.censored > 0 {
                    rows.push(base.row(Some(v), Some(threshold), "censored", d.censored as f64, None));
                }
            }
            Err(err) => rows.push(base.failed(Some(v), Some(threshold), "delay", &err)),
        }
    }
    Ok(())
}

/// Calibrates the configured rule to `gamma`.
pub fn run_calibrate(config: &ExperimentConfig) -> Result<Report> {
    config.validate()?;
    let mut report = Report::new(format!("calibration to ARL {}", sig6(config.gamma)));
    calibrate_rows(config, &[], &mut report.rows)?;
    Ok(report)
}

/// Estimated ARL of the configured rule at `threshold`.
pub fn run_arl(config: &ExperimentConfig) -> Result<Report> {
    config.validate()?;
    let threshold = config.threshold.ok_or_else(|| Error::Config("threshold is required".into()))?;
    let rule_config = config.rule_config()?;
    let base = RowBase::new(config, &rule_config);
    let mut est = estimator(config, &Rule::new(rule_config)?)?;
    let mut report = Report::new("average run length");
    push_arl(&mut report.rows, &base, &mut est, threshold);
    Ok(report)
}

/// Mean detection delays at each configured subset size.
pub fn run_delay(config: &ExperimentConfig) -> Result<Report> {
    config.validate()?;
    let threshold = config.threshold.ok_or_else(|| Error::Config("threshold is required".into()))?;
    let mut report = Report::new("detection delay, change at time 1");
    delay_rows(config, threshold, &mut report.rows)?;
    Ok(report)
}

/// Reference SL parameters and thresholds at N = 100, γ = 5000.
pub const SL_LAMBDA2: [f64; 9] = [0.2, 0.4, 0.6, 0.8, 1.0, 1.2, 1.4, 1.6, 1.8];
pub const SL_THRESHOLDS: [f64; 10] = [6.400, 6.430, 6.475, 6.560, 6.650, 6.760, 6.860, 6.960, 7.060, 7.160];
/// Competitor thresholds at N = 100, γ = 5000.
pub const MEI_THRESHOLD: f64 = 88.5;
pub const MEI_EPS_THRESHOLDS: [(f64, f64); 2] = [(0.1, 3.48), (0.3, 5.02)];
pub const MLR_THRESHOLDS: [(f64, f64); 2] = [(0.1, 4.25), (0.3, 6.30)];
pub const XS_EPSILONS: [f64; 2] = [1.0, 0.1];
/// Reference threshold for both count models.
pub const COUNT_THRESHOLD: f64 = 9.1;

fn sl_variants(base: &ExperimentConfig) -> Vec<(ExperimentConfig, f64)> {
    let mut out: Vec<_> = SL_LAMBDA2
        .iter()
        .zip(SL_THRESHOLDS)
        .map(|(&l, c)| (ExperimentConfig { rule: RuleKind::SlOneSided, lambda2: Some(l), ..base.clone() }, c))
        .collect();
    out.push((ExperimentConfig { rule: RuleKind::SlOneSided, lambda2: None, ..base.clone() }, SL_THRESHOLDS[9]));
    out
}

fn competitor(base: &ExperimentConfig, rule: RuleKind, epsilon0: Option<f64>) -> ExperimentConfig {
    ExperimentConfig { rule, epsilon0, model: ModelKind::Normal, ..base.clone() }
}

/// Competitors with fixed thresholds, then the two headline SL rules.
fn fixed_competitors(base: &ExperimentConfig) -> Vec<(ExperimentConfig, f64)> {
    let mut out = vec![(competitor(base, RuleKind::Mei, None), MEI_THRESHOLD)];
    out.extend(MEI_EPS_THRESHOLDS.iter().map(|&(e, c)| (competitor(base, RuleKind::MeiEps, Some(e)), c)));
    out.extend(MLR_THRESHOLDS.iter().map(|&(e, c)| (competitor(base, RuleKind::ModifiedMlr, Some(e)), c)));
    out.push((ExperimentConfig { lambda2: Some(1.0), ..competitor(base, RuleKind::SlOneSided, None) }, SL_THRESHOLDS[4]));
    out.push((ExperimentConfig { lambda2: None, ..competitor(base, RuleKind::SlOneSided, None) }, SL_THRESHOLDS[9]));
    out
}

fn count_models(base: &ExperimentConfig) -> [ExperimentConfig; 2] {
    [ModelKind::Poisson, ModelKind::Binomial]
        .map(|model| ExperimentConfig { rule: RuleKind::SlTwoSided, model, lambda2: None, ..base.clone() })
}

/// Runs reference table `id` (1 to 6) with the trials, seed, workers and
/// subset sizes of `base`; other fields take the reference settings.
pub fn run_table(id: u32, base: &ExperimentConfig) -> Result<Report> {
    let base = ExperimentConfig {
        n_streams: 100,
        window_k1: 200,
        window_r: None,
        window_cap: None,
        gamma: 5000.0,
        lambda1: 1.0,
        delta0: 1.0,
        lambda_m: None,
        shift: 1.0,
        threshold: None,
        bracket_lo: None,
        bracket_hi: None,
        ..base.clone()
    };
    base.validate()?;
    if matches!(id, 2 | 4 | 6) {
        base.validate_subsets()?;
    }
    let mut report = Report::new(format!("table {id}"));
    let rows = &mut report.rows;
    match id {
        1 => {
            for (config, _) in sl_variants(&base) {
                calibrate_rows(&config, &[], rows)?;
            }
        }
        2 => {
            for (config, c) in sl_variants(&base) {
                delay_rows(&config, c, rows)?;
            }
        }
        3 => {
            let bound = theory::threshold_upper_bound(base.gamma)?;
            for (config, c) in fixed_competitors(&base) {
                let rule_config = config.rule_config()?;
                let row_base = RowBase::new(&config, &rule_config);
                if rule_config.kind.is_sl() || rule_config.kind == RuleKind::ModifiedMlr {
                    rows.push(Row { trials: None, seed: None, ..row_base.row(None, Some(c), "threshold_bound", bound, None) });
                }
                let mut est = estimator(&config, &Rule::new(rule_config)?)?;
                push_arl(rows, &row_base, &mut est, c);
            }
        }
        4 => {
            for eps in XS_EPSILONS {
                let config = competitor(&base, RuleKind::Xs, Some(eps));
                match calibrate_rows(&config, &[], rows)? {
                    Some(c) => delay_rows(&config, c, rows)?,
                    None => {
                        let rc = config.rule_config()?;
                        let row_base = RowBase::new(&config, &rc);
                        let err = Error::Calibration("no calibrated threshold".into());
                        rows.extend(config.subset_sizes.iter().map(|&v| row_base.failed(Some(v), None, "delay", &err)));
                    }
                }
            }
            for (config, c) in fixed_competitors(&base) {
                delay_rows(&config, c, rows)?;
            }
        }
        5 => {
            for config in count_models(&base) {
                calibrate_rows(&config, &[COUNT_THRESHOLD], rows)?;
            }
        }
        6 => {
            for config in count_models(&base) {
                delay_rows(&config, COUNT_THRESHOLD, rows)?;
            }
        }
        _ => return Err(Error::Config(format!("table id must be 1 to 6, got {id}"))),
    }
    Ok(report)
}

/// Regime classification and closed-form bounds.
pub fn run_bounds(beta: f64, zeta: f64, delta: f64, n_streams: usize, subset_size: Option<usize>) -> Result<Report> {
    let params = RegimeParams { beta, zeta, delta, num_streams: n_streams, subset_size };
    let regime = params.regime()?;
    let label = match regime {
        theory::Regime::Dense => "dense",
        theory::Regime::Moderate => "moderate",
        theory::Regime::Extreme => "extreme",
    };
    let base = Row {
        rule: "theory".into(),
        params: format!("beta={beta};zeta={zeta};delta={delta};regime={label}"),
        model: "normal".into(),
        subset_size,
        threshold: None,
        metric: String::new(),
        value: f64::NAN,
        std_error: None,
        trials: None,
        seed: None,
        note: None,
    };
    let mut report = Report::new(format!("regime: {label}"));
    if regime != theory::Regime::Dense {
        let b = theory::delay_lower_bound(&params, regime)?;
        report.rows.push(Row { metric: "delay_lower_bound".into(), value: b, ..base.clone() });
        if regime == theory::Regime::Moderate {
            let rho = theory::rho_z(beta, zeta)?;
            report.rows.push(Row { metric: "rho_z".into(), value: rho, ..base.clone() });
        }
    }
    let a = theory::asymptotic_delay(&params, regime)?;
    report.rows.push(Row { metric: "asymptotic_delay".into(), value: a, ..base });
    Ok(report)
}
