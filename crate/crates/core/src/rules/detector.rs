use std::sync::Arc;

use crate::error::{Error, Result};
use crate::pvalue::{randomized_from_tails, DiscreteNullSpec, Tails};
use crate::score::{stream_score, SparsityParams};
use crate::window::{ObservationBuffer, WindowSet};

use super::cusum::{mei_eps_statistic, mei_step, CusumState};
use super::screen::{PScreen, ZScreen, ZTerm};
use super::{RuleConfig, RuleKind, StopDecision, WindowMax};

/// Counts above this are scored from freshly summed tails instead of the cache.
const TAIL_CACHE_LEN: usize = 64;

/// Yields one observation per stream per step, plus the auxiliary uniforms
/// that randomized p-values consume.
pub trait DataSource {
    fn next_observation(&mut self, out: &mut [f64]);
    fn fill_uniforms(&mut self, out: &mut [f64]);
}

#[derive(Debug)]
enum Eval {
    Z(ZScreen),
    /// `tails[s * L + i]` caches the null tails of count `s` in window `i` of
    /// `L`; small counts dominate, so count-major keeps the hot part small.
    Counts { params: SparsityParams<f64>, screen: PScreen, nulls: Vec<DiscreteNullSpec>, tails: Vec<Tails> },
    Cusum,
}

#[derive(Debug)]
struct Prepared {
    config: RuleConfig,
    windows: Option<WindowSet>,
    contiguous: bool,
    inv_sqrt: Vec<f64>,
    inv_sqrt_rev: Vec<f64>,
    eval: Eval,
}

/// A validated rule with its screening tables built. Cheap to clone and
/// shared across trials.
#[derive(Debug, Clone)]
pub struct Rule {
    inner: Arc<Prepared>,
}

fn z_term(config: &RuleConfig) -> Option<ZTerm> {
    match config.kind {
        RuleKind::SlOneSided => Some(ZTerm::SlOneSided(config.sparsity?)),
        RuleKind::SlTwoSided => Some(ZTerm::SlTwoSided(config.sparsity?)),
        RuleKind::Xs => Some(ZTerm::Xs(config.epsilon0?)),
        RuleKind::ModifiedMlr => Some(ZTerm::Mlr(config.epsilon0?)),
        RuleKind::Mei | RuleKind::MeiEps => None,
    }
}

impl Rule {
    pub fn new(config: RuleConfig) -> Result<Self> {
        config.validate()?;
        let windows = config.windows.clone();
        let (contiguous, inv_sqrt) = match &windows {
            Some(w) => (
                w.lengths().iter().enumerate().all(|(i, &k)| k == i + 1),
                w.lengths().iter().map(|&k| 1.0 / (k as f64).sqrt()).collect(),
            ),
            None => (false, Vec::new()),
        };
        let eval = match (&config.count_null, z_term(&config)) {
            (Some(null), _) => {
                let params = config.sparsity.expect("validated");
                let w = windows.as_ref().expect("validated");
                let nulls: Vec<_> = w.lengths().iter().map(|&k| null.for_window(k)).collect();
                let tails = (0..TAIL_CACHE_LEN as u64).flat_map(|s| nulls.iter().map(move |spec| spec.tails(s))).collect();
                Eval::Counts { params, screen: PScreen::new(params), nulls, tails }
            }
            (None, Some(term)) => Eval::Z(ZScreen::new(term)),
            (None, None) => Eval::Cusum,
        };
        let inv_sqrt_rev = inv_sqrt.iter().rev().copied().collect();
        Ok(Self { inner: Arc::new(Prepared { config, windows, contiguous, inv_sqrt, inv_sqrt_rev, eval }) })
    }

    pub fn config(&self) -> &RuleConfig {
        &self.inner.config
    }

    pub fn num_streams(&self) -> usize {
        self.inner.config.num_streams
    }

    pub fn detector(&self) -> Detector {
        let p = &self.inner;
        let n = p.config.num_streams;
        let buffer = p
            .windows
            .as_ref()
            .map(|w| ObservationBuffer::new(n, w.max_len()).expect("validated sizes"));
        let bounds = vec![0.0; p.windows.as_ref().map_or(0, |w| w.len())];
        Detector {
            rule: Arc::clone(p),
            buffer,
            cusum: CusumState::new(n),
            cusum_total: 0.0,
            scratch: bounds.clone(),
            bounds,
            time: 0,
        }
    }
}

/// Running state of one rule on one data stream.
#[derive(Debug, Clone)]
pub struct Detector {
    rule: Arc<Prepared>,
    buffer: Option<ObservationBuffer>,
    cusum: CusumState,
    cusum_total: f64,
    bounds: Vec<f64>,
    scratch: Vec<f64>,
    time: u64,
}

impl Detector {
    pub fn time(&self) -> u64 {
        self.time
    }

    pub fn buffer(&self) -> Option<&ObservationBuffer> {
        self.buffer.as_ref()
    }

    pub fn cusum(&self) -> &CusumState {
        &self.cusum
    }

    pub fn reset(&mut self) {
        if let Some(b) = &mut self.buffer {
            b.reset();
        }
        self.cusum.reset();
        self.cusum_total = 0.0;
        self.time = 0;
    }

    pub fn push(&mut self, x: &[f64]) -> Result<()> {
        let n = self.rule.config.num_streams;
        if x.len() != n {
            return Err(Error::LengthMismatch { expected: n, got: x.len() });
        }
        match &mut self.buffer {
            Some(b) => b.push(x)?,
            None => {
                let delta0 = self.rule.config.delta0.expect("validated");
                self.cusum_total = mei_step(&mut self.cusum, x, delta0);
            }
        }
        self.time += 1;
        Ok(())
    }

    fn admissible(&self) -> usize {
        self.rule.windows.as_ref().map_or(0, |w| w.admissible(self.time))
    }

    /// Number of uniforms the current evaluation consumes: one per
    /// (stream, admissible window) for count models, none otherwise.
    pub fn uniforms_needed(&self) -> usize {
        match self.rule.eval {
            Eval::Counts { .. } => self.rule.config.num_streams * self.admissible(),
            _ => 0,
        }
    }

    fn check_uniforms(&self, uniforms: &[f64]) -> Result<()> {
        let need = self.uniforms_needed();
        if uniforms.len() < need {
            return Err(Error::LengthMismatch { expected: need, got: uniforms.len() });
        }
        Ok(())
    }

    /// Exact statistic of window index `i`.
    fn exact_window(&self, i: usize, uniforms: &[f64]) -> f64 {
        let buffer = self.buffer.as_ref().expect("windowed rule");
        let k = self.rule.windows.as_ref().expect("windowed rule").lengths()[i];
        let n_streams = self.rule.config.num_streams;
        match &self.rule.eval {
            Eval::Z(screen) => {
                let root = (k as f64).sqrt();
                let term = screen.term();
                (0..n_streams).fold(0.0, |acc, n| acc + term.eval(buffer.window_sum(n, k) / root))
            }
            Eval::Counts { params, nulls, tails, .. } => {
                let adm = self.admissible();
                (0..n_streams).fold(0.0, |acc, n| {
                    let s = count(buffer.window_sum(n, k));
                    let t = cached_tails(tails, nulls, i, s);
                    acc + stream_score(params, randomized_from_tails(&t, uniforms[n * adm + i]))
                })
            }
            Eval::Cusum => unreachable!(),
        }
    }

    fn cusum_statistic(&self) -> f64 {
        let c = &self.rule.config;
        match c.kind {
            RuleKind::Mei => self.cusum_total,
            _ => mei_eps_statistic(&self.cusum, c.epsilon0.expect("validated"), c.lambda_m.expect("validated")),
        }
    }

    /// Exact statistic at the current time, evaluating every admissible
    /// window. Before the first observation the statistic is `-inf`.
    pub fn statistic(&self, uniforms: &[f64]) -> Result<(f64, Option<usize>)> {
        if let Eval::Cusum = self.rule.eval {
            return Ok((self.cusum_statistic(), None));
        }
        self.check_uniforms(uniforms)?;
        let lengths = self.rule.windows.as_ref().expect("windowed").lengths();
        let mut best = (f64::NEG_INFINITY, None);
        for i in 0..self.admissible() {
            let v = self.exact_window(i, uniforms);
            if v > best.0 {
                best = (v, Some(lengths[i]));
            }
        }
        Ok(best)
    }

    /// Returns the exact statistic if it is at least `level`, `None`
    /// otherwise. Windows whose bounded sum stays below `level` are skipped.
    pub fn statistic_if_at_least(&mut self, level: f64, uniforms: &[f64]) -> Result<Option<(f64, Option<usize>)>> {
        if let Eval::Cusum = self.rule.eval {
            let s = self.cusum_statistic();
            return Ok((s >= level).then_some((s, None)));
        }
        self.check_uniforms(uniforms)?;
        let adm = self.admissible();
        self.fill_bounds(adm, uniforms);
        let lengths = self.rule.windows.as_ref().expect("windowed").lengths();
        let mut best: Option<(f64, Option<usize>)> = None;
        for i in 0..adm {
            if self.bounds[i] < level {
                continue;
            }
            let v = self.exact_window(i, uniforms);
            if v >= level && best.is_none_or(|(b, _)| v > b) {
                best = Some((v, Some(lengths[i])));
            }
        }
        Ok(best)
    }

    fn fill_bounds(&mut self, adm: usize, uniforms: &[f64]) {
        let buffer = self.buffer.as_ref().expect("windowed rule");
        let rule = &*self.rule;
        let lengths = rule.windows.as_ref().expect("windowed").lengths();
        let cap = buffer.capacity();
        let bounds = &mut self.bounds[..adm];
        bounds.fill(0.0);
        match &rule.eval {
            Eval::Z(screen) => {
                let scratch = &mut self.scratch[..adm];
                if rule.contiguous {
                    // oldest first, so scratch[j] belongs to window adm - j
                    scratch.fill(0.0);
                    let scale = &rule.inv_sqrt_rev[cap - adm..];
                    for n in 0..rule.config.num_streams {
                        let view = buffer.prefix_view(n);
                        screen.accumulate(view[cap], &view[cap - adm..cap], scale, scratch);
                    }
                    for (b, &v) in bounds.iter_mut().zip(scratch.iter().rev()) {
                        *b = v;
                    }
                } else {
                    for n in 0..rule.config.num_streams {
                        let view = buffer.prefix_view(n);
                        for (s, &k) in scratch.iter_mut().zip(lengths) {
                            *s = view[cap - k];
                        }
                        screen.accumulate(view[cap], scratch, &rule.inv_sqrt[..adm], bounds);
                    }
                }
            }
            Eval::Counts { screen, nulls, tails, .. } => {
                for n in 0..rule.config.num_streams {
                    let view = buffer.prefix_view(n);
                    let last = view[cap];
                    let u = &uniforms[n * adm..(n + 1) * adm];
                    for (i, ((b, &k), &u)) in bounds.iter_mut().zip(lengths).zip(u).enumerate() {
                        let s = count(last - view[cap - k]);
                        let t = cached_tails(tails, nulls, i, s);
                        *b += screen.bound_raw(randomized_raw(&t, u));
                    }
                }
            }
            Eval::Cusum => unreachable!(),
        }
    }
}

/// Window sums of count data are exact integers; this also avoids a libm
/// call for `round` on targets without SSE4.1.
#[inline(always)]
fn count(sum: f64) -> u64 {
    // through i64: a single conversion instruction on x86-64
    (sum + 0.5) as i64 as u64
}

#[inline(always)]
fn cached_tails(cache: &[Tails], nulls: &[DiscreteNullSpec], window: usize, s: u64) -> Tails {
    if s < TAIL_CACHE_LEN as u64 {
        cache[s as usize * nulls.len() + window]
    } else {
        nulls[window].tails(s)
    }
}

/// Unclamped randomized two-sided p-value; see [`randomized_from_tails`].
#[inline(always)]
fn randomized_raw(t: &Tails, u: f64) -> f64 {
    let phi = t.below + u * t.at;
    let upper = t.above + (1.0 - u) * t.at;
    2.0 * phi.min(upper)
}

/// Result of driving a rule to its stopping time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunOutcome {
    /// Stopping time, or the horizon when censored.
    pub stop_time: u64,
    pub censored: bool,
    /// Statistic at the stopping time; `NaN` when censored.
    pub statistic: f64,
    pub best_window: Option<usize>,
}

impl RunOutcome {
    pub fn decision(&self, threshold: f64) -> StopDecision {
        StopDecision::new(self.statistic, self.best_window, threshold)
    }
}

/// Runs `rule` on `source` until its statistic reaches `threshold` or the
/// horizon is exhausted.
pub fn run_rule(rule: &Rule, threshold: f64, source: &mut impl DataSource, horizon: u64) -> Result<RunOutcome> {
    if threshold.is_nan() {
        return Err(Error::Config("threshold is NaN".into()));
    }
    let mut det = rule.detector();
    let mut obs = vec![0.0; rule.num_streams()];
    let mut uniforms = Vec::new();
    for t in 1..=horizon {
        source.next_observation(&mut obs);
        det.push(&obs)?;
        let need = det.uniforms_needed();
        uniforms.resize(need, 0.0);
        source.fill_uniforms(&mut uniforms);
        if let Some((statistic, best_window)) = det.statistic_if_at_least(threshold, &uniforms)? {
            return Ok(RunOutcome { stop_time: t, censored: false, statistic, best_window });
        }
    }
    Ok(RunOutcome { stop_time: horizon, censored: true, statistic: f64::NAN, best_window: None })
}

fn windowed_max(config: &RuleConfig, buffer: &ObservationBuffer, per_window: impl Fn(usize) -> f64) -> Result<WindowMax> {
    config.validate()?;
    if buffer.num_streams() != config.num_streams {
        return Err(Error::LengthMismatch { expected: config.num_streams, got: buffer.num_streams() });
    }
    let windows = config.windows.as_ref().expect("validated");
    let mut best: Option<WindowMax> = None;
    for &k in windows.lengths() {
        if !buffer.available(k) {
            continue;
        }
        let v = per_window(k);
        if best.is_none_or(|b| v > b.statistic) {
            best = Some(WindowMax { statistic: v, best_window: k });
        }
    }
    best.ok_or(Error::WindowUnavailable { k: 1, time: buffer.time(), capacity: buffer.capacity() })
}

/// SL statistic: the largest aggregate score over admissible windows.
///
/// Normal models use one- or two-sided p-values of `S/sqrt(k)` according to
/// `config.kind`; count models use randomized p-values of the raw window
/// sums, reading `uniforms[n * A + i]` for stream `n` and the `i`-th of the
/// `A` admissible windows.
pub fn sl_statistic(config: &RuleConfig, buffer: &ObservationBuffer, uniforms: &[f64]) -> Result<WindowMax> {
    use crate::pvalue::{normal_one_sided, normal_two_sided};
    use crate::score::aggregate_score;

    if !config.kind.is_sl() {
        return Err(Error::Config(format!("{} is not an SL rule", config.kind)));
    }
    let params = config.sparsity.ok_or_else(|| Error::Config("missing sparsity parameters".into()))?;
    let windows = config.windows.as_ref().ok_or_else(|| Error::Config("missing windows".into()))?;
    let adm = windows.lengths().iter().filter(|&&k| buffer.available(k)).count();
    if config.count_null.is_some() && uniforms.len() < config.num_streams * adm {
        return Err(Error::LengthMismatch { expected: config.num_streams * adm, got: uniforms.len() });
    }
    let index: std::collections::HashMap<usize, usize> =
        windows.lengths().iter().enumerate().map(|(i, &k)| (k, i)).collect();
    windowed_max(config, buffer, |k| {
        let pvec: Vec<_> = match &config.count_null {
            Some(null) => {
                let spec = null.for_window(k);
                let i = index[&k];
                buffer
                    .window_sums(k)
                    .expect("available")
                    .iter()
                    .enumerate()
                    .map(|(n, &s)| crate::pvalue::discrete_pvalue(count(s), &spec, uniforms[n * adm + i]))
                    .collect()
            }
            None => {
                let zs = buffer.window_zscores(k).expect("available");
                match config.kind {
                    RuleKind::SlOneSided => zs.into_iter().map(normal_one_sided).collect(),
                    _ => zs.into_iter().map(normal_two_sided).collect(),
                }
            }
        };
        aggregate_score(&params, &pvec).expect("length checked")
    })
}

/// Mixture likelihood ratio statistic with positive-part thresholding.
pub fn xs_statistic(config: &RuleConfig, buffer: &ObservationBuffer) -> Result<WindowMax> {
    if config.kind != RuleKind::Xs {
        return Err(Error::Config(format!("{} is not the xs rule", config.kind)));
    }
    let eps = config.epsilon0.ok_or_else(|| Error::Config("missing epsilon0".into()))?;
    windowed_max(config, buffer, |k| {
        let zs = buffer.window_zscores(k).expect("available");
        zs.iter().map(|z| super::terms::xs_term(z.0, eps)).sum()
    })
}

/// Modified mixture likelihood ratio statistic.
pub fn modified_mlr_statistic(config: &RuleConfig, buffer: &ObservationBuffer) -> Result<WindowMax> {
    if config.kind != RuleKind::ModifiedMlr {
        return Err(Error::Config(format!("{} is not the modified MLR rule", config.kind)));
    }
    let eps = config.epsilon0.ok_or_else(|| Error::Config("missing epsilon0".into()))?;
    windowed_max(config, buffer, |k| {
        let zs = buffer.window_zscores(k).expect("available");
        zs.iter().map(|z| super::terms::mlr_term(z.0, eps)).sum()
    })
}
