//! Window sets and per-stream windowed sums.

use crate::error::{Error, Result};
use crate::pvalue::NormalStat;

/// Window lengths `{1, ..., k1} ∪ {⌊r^j k1⌋ : j >= 1}`, truncated at `cap`.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowSet {
    base: usize,
    ratio: f64,
    cap: usize,
    lengths: Vec<usize>,
}

impl WindowSet {
    /// Builds the window set. `cap < k1` is allowed and yields `{1, ..., cap}`.
    pub fn build(k1: usize, r: f64, cap: usize) -> Result<Self> {
        if k1 < 1 {
            return Err(Error::Config(format!("window base k1 must be >= 1, got {k1}")));
        }
        if !(r > 1.0) || !r.is_finite() {
            return Err(Error::Config(format!("window ratio r must be > 1, got {r}")));
        }
        if cap < 1 {
            return Err(Error::Config("window cap must be >= 1".into()));
        }
        let mut lengths: Vec<usize> = (1..=k1.min(cap)).collect();
        let mut j = 1;
        loop {
            let v = (r.powi(j) * k1 as f64).floor();
            if v > cap as f64 {
                break;
            }
            let v = v as usize;
            if v > *lengths.last().expect("non-empty") {
                lengths.push(v);
            }
            j += 1;
        }
        Ok(Self { base: k1, ratio: r, cap, lengths })
    }

    /// `{1, ..., cap}`.
    pub fn contiguous(cap: usize) -> Result<Self> {
        Self::build(cap, 2.0, cap)
    }

    pub fn base(&self) -> usize {
        self.base
    }

    pub fn ratio(&self) -> f64 {
        self.ratio
    }

    pub fn cap(&self) -> usize {
        self.cap
    }

    pub fn lengths(&self) -> &[usize] {
        &self.lengths
    }

    /// Largest retained length; the ring capacity needed to serve the set.
    pub fn max_len(&self) -> usize {
        *self.lengths.last().expect("window set is non-empty")
    }

    pub fn len(&self) -> usize {
        self.lengths.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lengths.is_empty()
    }

    /// Number of leading lengths usable at time `t` (those with `k <= t`).
    #[inline]
    pub fn admissible(&self, t: u64) -> usize {
        self.lengths.partition_point(|&k| (k as u64) <= t)
    }
}

const REBASE_PERIOD: u64 = 1 << 16;

/// Ring of running prefix sums for `N` streams.
///
/// Each stream keeps the last `capacity + 1` prefix sums `P_{t-capacity}, ..., P_t`,
/// stored twice back to back so the live window is always one contiguous
/// slice. A windowed sum is `P_t - P_{t-k}`. Every 2^16 pushes the stored
/// prefixes are re-based on the oldest retained value so their magnitude
/// stays bounded over long runs.
#[derive(Debug, Clone)]
pub struct ObservationBuffer {
    num_streams: usize,
    capacity: usize,
    slots: usize,
    prefix: Vec<f64>,
    write: usize,
    time: u64,
}

impl ObservationBuffer {
    pub fn new(num_streams: usize, capacity: usize) -> Result<Self> {
        if num_streams == 0 || capacity == 0 {
            return Err(Error::Config("buffer needs at least one stream and capacity >= 1".into()));
        }
        let slots = capacity + 1;
        Ok(Self {
            num_streams,
            capacity,
            slots,
            prefix: vec![0.0; num_streams * 2 * slots],
            write: 0,
            time: 0,
        })
    }

    pub fn num_streams(&self) -> usize {
        self.num_streams
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn time(&self) -> u64 {
        self.time
    }

    /// Clears all state back to time 0.
    pub fn reset(&mut self) {
        self.prefix.fill(0.0);
        self.write = 0;
        self.time = 0;
    }

    /// Appends one observation per stream.
    pub fn push(&mut self, x: &[f64]) -> Result<()> {
        if x.len() != self.num_streams {
            return Err(Error::LengthMismatch { expected: self.num_streams, got: x.len() });
        }
        let slots = self.slots;
        let last = self.write;
        let next = if last + 1 == slots { 0 } else { last + 1 };
        for (n, &xn) in x.iter().enumerate() {
            let ring = &mut self.prefix[n * 2 * slots..(n + 1) * 2 * slots];
            let value = ring[last] + xn;
            ring[next] = value;
            ring[next + slots] = value;
        }
        self.write = next;
        self.time += 1;
        if self.time % REBASE_PERIOD == 0 {
            self.rebase();
        }
        Ok(())
    }

    fn rebase(&mut self) {
        let slots = self.slots;
        let oldest = if self.write + 1 == slots { 0 } else { self.write + 1 };
        for ring in self.prefix.chunks_exact_mut(2 * slots) {
            let base = ring[oldest];
            ring.iter_mut().for_each(|v| *v -= base);
        }
    }

    /// Prefix sums `P_{t-capacity}, ..., P_t` of stream `n`; element
    /// `capacity - k` is `P_{t-k}`.
    #[inline]
    pub(crate) fn prefix_view(&self, n: usize) -> &[f64] {
        let start = n * 2 * self.slots + self.write + 1;
        &self.prefix[start..start + self.slots]
    }

    /// Whether a window of length `k` is fully observed.
    #[inline]
    pub fn available(&self, k: usize) -> bool {
        k >= 1 && k <= self.capacity && (k as u64) <= self.time
    }

    fn check(&self, k: usize) -> Result<()> {
        if self.available(k) {
            Ok(())
        } else {
            Err(Error::WindowUnavailable { k, time: self.time, capacity: self.capacity })
        }
    }

    /// Sum of the last `k` observations of stream `n`. `k` must be available.
    #[inline]
    pub fn window_sum(&self, n: usize, k: usize) -> f64 {
        debug_assert!(self.available(k));
        let view = self.prefix_view(n);
        view[self.capacity] - view[self.capacity - k]
    }

    /// Windowed sums `S_n` of every stream over the last `k` steps.
    pub fn window_sums_into(&self, k: usize, out: &mut [f64]) -> Result<()> {
        self.check(k)?;
        if out.len() != self.num_streams {
            return Err(Error::LengthMismatch { expected: self.num_streams, got: out.len() });
        }
        for (n, o) in out.iter_mut().enumerate() {
            *o = self.window_sum(n, k);
        }
        Ok(())
    }

    pub fn window_sums(&self, k: usize) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.num_streams];
        self.window_sums_into(k, &mut out)?;
        Ok(out)
    }

    /// `S_n / sqrt(k)` for every stream.
    pub fn window_zscores_into(&self, k: usize, out: &mut [NormalStat<f64>]) -> Result<()> {
        self.check(k)?;
        if out.len() != self.num_streams {
            return Err(Error::LengthMismatch { expected: self.num_streams, got: out.len() });
        }
        let root = (k as f64).sqrt();
        for (n, o) in out.iter_mut().enumerate() {
            *o = NormalStat(self.window_sum(n, k) / root);
        }
        Ok(())
    }

    pub fn window_zscores(&self, k: usize) -> Result<Vec<NormalStat<f64>>> {
        let mut out = vec![NormalStat(0.0); self.num_streams];
        self.window_zscores_into(k, &mut out)?;
        Ok(out)
    }
}
