//! Average run length, threshold calibration and detection delay by
//! simulation.
//!
//! Trials are seeded from `(master_seed, trial_index)` and reduced in trial
//! order, so results do not depend on the worker count. Calibration uses
//! common random numbers: every candidate threshold is scored on the same
//! null trajectories, which makes each trial's stopping time a step function
//! of the threshold and the search deterministic.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::models::{ChangeScenario, Family, ScenarioSource, SeededSource};
use crate::rules::{run_rule, DataSource, Detector, Rule};
use crate::score::{aggregate_score, PValue, SparsityParams};

/// Default number of Monte Carlo trials.
pub const DEFAULT_TRIALS: usize = 500;
/// Default censoring horizon for delay runs.
pub const DELAY_HORIZON: u64 = 10_000;

/// Default censoring horizon for ARL runs at target `gamma`.
pub fn arl_horizon(gamma: f64) -> u64 {
    (30.0 * gamma).ceil() as u64
}

/// Runs `f` on a pool of `workers` threads (all cores when `None`).
pub fn with_workers<R: Send>(workers: Option<usize>, f: impl FnOnce() -> R + Send) -> Result<R> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(w) = workers {
        builder = builder.num_threads(w.max(1));
    }
    let pool = builder.build().map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    Ok(pool.install(f))
}

fn mean_and_se(values: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let n = values.clone().count() as f64;
    let mean = values.clone().sum::<f64>() / n;
    if n < 2.0 {
        return (mean, f64::NAN);
    }
    let var = values.map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Estimated average run length at a fixed threshold.
#[derive(Debug, Clone, PartialEq)]
pub struct ArlEstimate {
    pub threshold: f64,
    pub arl: f64,
    pub std_error: f64,
    pub trials: usize,
    /// Trials that reached the horizon; they count as the horizon in `arl`.
    pub censored: usize,
    pub horizon: u64,
    pub master_seed: u64,
}

/// A threshold calibrated to a target average run length.
#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationResult {
    pub threshold: f64,
    pub estimated_arl: f64,
    pub std_error: f64,
    pub trials: usize,
    pub master_seed: u64,
    pub censored_count: usize,
    pub target_gamma: f64,
    /// Thresholds evaluated by the search.
    pub iterations: usize,
}

/// Mean detection delay for a change at `ν = 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct DelayResult {
    pub rule: String,
    pub subset_size: usize,
    pub threshold: f64,
    pub mean_delay: f64,
    pub std_error: f64,
    pub trials: usize,
    pub censored: usize,
    pub master_seed: u64,
}

/// Null trajectory of one trial, extended on demand. Keeps every record
/// (time, value) of the running maximum of the statistic, so the stopping
/// time at any threshold below the current record is known exactly.
struct TrialPath {
    detector: Detector,
    source: ScenarioSource,
    obs: Vec<f64>,
    uniforms: Vec<f64>,
    records: Vec<(u64, f64)>,
}

impl TrialPath {
    fn best(&self) -> f64 {
        self.records.last().map_or(f64::NEG_INFINITY, |r| r.1)
    }

    fn time(&self) -> u64 {
        self.detector.time()
    }

    fn stop_time(&self, threshold: f64) -> Option<u64> {
        let i = self.records.partition_point(|r| r.1 < threshold);
        self.records.get(i).map(|r| r.0)
    }

    /// Steps until the record reaches `threshold` or time reaches `limit`.
    fn extend(&mut self, threshold: f64, limit: u64) -> Result<()> {
        while self.best() < threshold && self.time() < limit {
            self.source.next_observation(&mut self.obs);
            self.detector.push(&self.obs)?;
            let need = self.detector.uniforms_needed();
            self.uniforms.resize(need, 0.0);
            self.source.fill_uniforms(&mut self.uniforms);
            let best = self.best();
            if let Some((v, _)) = self.detector.statistic_if_at_least(best, &self.uniforms)? {
                if v > best {
                    self.records.push((self.time(), v));
                }
            }
        }
        Ok(())
    }
}

enum ArlVerdict {
    /// The band's upper edge is already exceeded by the simulated time.
    Above,
    Exact(ArlEstimate),
}

/// Average run length machinery over a fixed set of seeded null trials.
pub struct ArlEstimator {
    rule: Rule,
    paths: Vec<TrialPath>,
    horizon: u64,
    master_seed: u64,
    workers: Option<usize>,
}

impl ArlEstimator {
    /// Prepares `trials` null trajectories of `family` for `rule`.
    pub fn new(rule: Rule, family: Family, trials: usize, horizon: u64, master_seed: u64) -> Result<Self> {
        if trials == 0 {
            return Err(Error::Config("need at least one trial".into()));
        }
        if horizon == 0 {
            return Err(Error::Config("horizon must be positive".into()));
        }
        let n = rule.num_streams();
        let scenario = ChangeScenario::null(n, family);
        let paths = (0..trials as u64)
            .map(|i| {
                Ok(TrialPath {
                    detector: rule.detector(),
                    source: ScenarioSource::new(&scenario, SeededSource::new(master_seed, i))?,
                    obs: vec![0.0; n],
                    uniforms: Vec::new(),
                    records: Vec::new(),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { rule, paths, horizon, master_seed, workers: None })
    }

    /// Worker threads used for trial extension; does not affect results.
    pub fn with_workers(mut self, workers: Option<usize>) -> Self {
        self.workers = workers;
        self
    }

    pub fn rule(&self) -> &Rule {
        &self.rule
    }

    pub fn trials(&self) -> usize {
        self.paths.len()
    }

    fn extend_all(&mut self, threshold: f64, limit: u64) -> Result<()> {
        let limit = limit.min(self.horizon);
        let paths = &mut self.paths;
        with_workers(self.workers, || {
            paths.par_iter_mut().map(|p| p.extend(threshold, limit)).collect::<Result<Vec<_>>>()
        })??;
        Ok(())
    }

    fn summarize(&self, threshold: f64) -> ArlEstimate {
        let times = self.paths.iter().map(|p| p.stop_time(threshold).unwrap_or(self.horizon) as f64);
        let censored = self.paths.iter().filter(|p| p.stop_time(threshold).is_none()).count();
        let (arl, std_error) = mean_and_se(times);
        ArlEstimate {
            threshold,
            arl,
            std_error,
            trials: self.paths.len(),
            censored,
            horizon: self.horizon,
            master_seed: self.master_seed,
        }
    }

    /// ARL at `threshold`, censored trials counted at the horizon.
    pub fn estimate(&mut self, threshold: f64) -> Result<ArlEstimate> {
        self.extend_all(threshold, self.horizon)?;
        Ok(self.summarize(threshold))
    }

    /// Like [`estimate`](Self::estimate), but gives up with `Above` as soon
    /// as the simulated time alone puts the mean above `cap`.
    fn verdict(&mut self, threshold: f64, cap: f64, step: u64) -> Result<ArlVerdict> {
        let n = self.paths.len() as f64;
        let mut limit = 0;
        loop {
            limit = (limit + step).min(self.horizon);
            self.extend_all(threshold, limit)?;
            let lower: u64 = self.paths.iter().map(|p| p.stop_time(threshold).unwrap_or(p.time())).sum();
            if lower as f64 / n > cap {
                return Ok(ArlVerdict::Above);
            }
            let resolved = self.paths.iter().all(|p| p.stop_time(threshold).is_some() || p.time() >= self.horizon);
            if resolved {
                return Ok(ArlVerdict::Exact(self.summarize(threshold)));
            }
        }
    }

    /// Bisection on the threshold over `[lo, hi]` until the estimated ARL is
    /// within `target (1 ± tolerance)`.
    pub fn calibrate(&mut self, target: f64, tolerance: f64, lo: f64, hi: f64) -> Result<CalibrationResult> {
        if !(target > 1.0) {
            return Err(Error::Config(format!("target ARL must exceed 1, got {target}")));
        }
        if !(tolerance > 0.0 && tolerance < 1.0) {
            return Err(Error::Config(format!("tolerance must lie in (0, 1), got {tolerance}")));
        }
        if !(lo < hi) {
            return Err(Error::Config(format!("empty bracket [{lo}, {hi}]")));
        }
        let (band_lo, band_hi) = (target * (1.0 - tolerance), target * (1.0 + tolerance));
        let step = ((target / 8.0).ceil() as u64).max(1);
        let mut iterations = 0;
        let accept = |est: ArlEstimate, iterations: usize| {
            if est.censored > 0 {
                return Err(Error::Censored { censored: est.censored, trials: est.trials, horizon: est.horizon });
            }
            Ok(CalibrationResult {
                threshold: est.threshold,
                estimated_arl: est.arl,
                std_error: est.std_error,
                trials: est.trials,
                master_seed: est.master_seed,
                censored_count: est.censored,
                target_gamma: target,
                iterations,
            })
        };

        // the upper end must overshoot, the lower end undershoot
        iterations += 1;
        match self.verdict(hi, band_hi, step)? {
            ArlVerdict::Above => {}
            ArlVerdict::Exact(e) if e.arl > band_hi => {}
            ArlVerdict::Exact(e) if e.arl >= band_lo => return accept(e, iterations),
            ArlVerdict::Exact(_) => return Err(Error::NonBracketing { lo, hi, target }),
        }
        iterations += 1;
        match self.verdict(lo, band_hi, step)? {
            ArlVerdict::Exact(e) if e.arl < band_lo => {}
            ArlVerdict::Exact(e) if e.arl <= band_hi => return accept(e, iterations),
            _ => return Err(Error::NonBracketing { lo, hi, target }),
        }

        let (mut lo, mut hi) = (lo, hi);
        while hi - lo > 1e-9 * (1.0 + hi.abs()) {
            let mid = 0.5 * (lo + hi);
            iterations += 1;
            match self.verdict(mid, band_hi, step)? {
                ArlVerdict::Above => hi = mid,
                ArlVerdict::Exact(e) if e.arl > band_hi => hi = mid,
                ArlVerdict::Exact(e) if e.arl < band_lo => lo = mid,
                ArlVerdict::Exact(e) => return accept(e, iterations),
            }
        }
        Err(Error::Calibration(format!(
            "ARL jumps across [{band_lo:.1}, {band_hi:.1}] near threshold {lo}; raise the tolerance or the trial count"
        )))
    }
}

/// Mean stopping time under no change, by independent seeded runs.
pub fn estimate_arl(
    rule: &Rule,
    family: Family,
    threshold: f64,
    trials: usize,
    horizon: u64,
    master_seed: u64,
    workers: Option<usize>,
) -> Result<ArlEstimate> {
    if trials == 0 {
        return Err(Error::Config("need at least one trial".into()));
    }
    let scenario = ChangeScenario::null(rule.num_streams(), family);
    let outcomes = with_workers(workers, || {
        (0..trials as u64)
            .into_par_iter()
            .map(|i| {
                let mut src = ScenarioSource::new(&scenario, SeededSource::new(master_seed, i))?;
                run_rule(rule, threshold, &mut src, horizon)
            })
            .collect::<Result<Vec<_>>>()
    })??;
    let (arl, std_error) = mean_and_se(outcomes.iter().map(|o| o.stop_time as f64));
    Ok(ArlEstimate {
        threshold,
        arl,
        std_error,
        trials,
        censored: outcomes.iter().filter(|o| o.censored).count(),
        horizon,
        master_seed,
    })
}

/// Calibrates a threshold over `[lo, hi]` to the target ARL with
/// `trials` null trials and a horizon of 30 γ.
#[allow(clippy::too_many_arguments)]
pub fn calibrate_threshold(
    rule: &Rule,
    family: Family,
    target_gamma: f64,
    trials: usize,
    tolerance: f64,
    bracket: (f64, f64),
    master_seed: u64,
    workers: Option<usize>,
) -> Result<CalibrationResult> {
    let mut est = ArlEstimator::new(rule.clone(), family, trials, arl_horizon(target_gamma), master_seed)?
        .with_workers(workers);
    est.calibrate(target_gamma, tolerance, bracket.0, bracket.1)
}

/// Mean stopping time when the change happens at `ν = 1`.
pub fn estimate_delay(
    rule: &Rule,
    threshold: f64,
    scenario: &ChangeScenario,
    trials: usize,
    horizon: u64,
    master_seed: u64,
    workers: Option<usize>,
) -> Result<DelayResult> {
    if scenario.change_time != Some(1) {
        return Err(Error::Config("delay runs need the change at time 1".into()));
    }
    if trials == 0 {
        return Err(Error::Config("need at least one trial".into()));
    }
    let subset_size = match &scenario.subset {
        crate::models::Subset::Fixed(idx) => idx.len(),
        crate::models::Subset::Bernoulli { .. } => 0,
    };
    let outcomes = with_workers(workers, || {
        (0..trials as u64)
            .into_par_iter()
            .map(|i| {
                let mut src = ScenarioSource::new(scenario, SeededSource::new(master_seed, i))?;
                run_rule(rule, threshold, &mut src, horizon)
            })
            .collect::<Result<Vec<_>>>()
    })??;
    let (mean_delay, std_error) = mean_and_se(outcomes.iter().map(|o| o.stop_time as f64));
    Ok(DelayResult {
        rule: rule.config().kind.name().to_string(),
        subset_size,
        threshold,
        mean_delay,
        std_error,
        trials,
        censored: outcomes.iter().filter(|o| o.censored).count(),
        master_seed,
    })
}

/// Empirical `P(aggregate_score >= c)` for independent uniform p-values.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TailCheck {
    pub threshold: f64,
    pub fraction: f64,
    /// `exp(-c)`.
    pub bound: f64,
    /// Binomial standard error of a proportion equal to the bound.
    pub std_error: f64,
    pub trials: usize,
}

impl TailCheck {
    /// Whether `fraction <= bound + sigmas * std_error`.
    pub fn holds(&self, sigmas: f64) -> bool {
        self.fraction <= self.bound + sigmas * self.std_error
    }
}

const TAIL_BLOCK: usize = 1024;

/// Fraction of `trials` uniform p-vectors whose aggregate score reaches `c`.
pub fn null_tail_check(
    params: &SparsityParams<f64>,
    c: f64,
    trials: usize,
    master_seed: u64,
    workers: Option<usize>,
) -> Result<TailCheck> {
    use rand::Rng;
    if trials == 0 {
        return Err(Error::Config("need at least one trial".into()));
    }
    let n = params.num_streams();
    let blocks = trials.div_ceil(TAIL_BLOCK);
    let hits: usize = with_workers(workers, || {
        (0..blocks)
            .into_par_iter()
            .map(|b| {
                let mut rng = SeededSource::new(master_seed, b as u64).data_rng();
                let count = TAIL_BLOCK.min(trials - b * TAIL_BLOCK);
                let mut pvec = vec![PValue::clamped(1.0); n];
                (0..count)
                    .filter(|_| {
                        for p in pvec.iter_mut() {
                            *p = PValue::clamped(1.0 - rng.random::<f64>());
                        }
                        aggregate_score(params, &pvec).expect("length") >= c
                    })
                    .count()
            })
            .sum()
    })?;
    let bound = (-c).exp().min(1.0);
    Ok(TailCheck {
        threshold: c,
        fraction: hits as f64 / trials as f64,
        bound,
        std_error: (bound * (1.0 - bound) / trials as f64).sqrt(),
        trials,
    })
}
