//! Upper-bound tables for screening windows.
//!
//! Evaluating a windowed rule exactly costs one normal tail probability and a
//! logarithm per (stream, window) pair. Most windows sit far below the level
//! of interest, so each per-stream term is first replaced by a tabulated upper
//! bound; only windows whose bounded sum reaches the level are evaluated
//! exactly. The screened maximum is therefore identical to the exact one
//! whenever it reaches the level.

use crate::score::{stream_score, PValue, SparsityParams};

use super::terms::{mlr_term, xs_term};

const Z_SPAN: f64 = 10.0;
const Z_CELLS_PER_UNIT: f64 = 128.0;

#[inline]
fn pad(v: f64) -> f64 {
    v + 1e-9 + 1e-12 * v.abs()
}

/// A per-stream term as a function of the standardized windowed sum. Every
/// variant is non-decreasing in `z` (in `|z|` for the two-sided score).
#[derive(Debug, Clone, Copy)]
pub(crate) enum ZTerm {
    SlOneSided(SparsityParams<f64>),
    SlTwoSided(SparsityParams<f64>),
    Xs(f64),
    Mlr(f64),
}

impl ZTerm {
    #[inline]
    pub(crate) fn eval(&self, z: f64) -> f64 {
        use crate::pvalue::{normal_one_sided, normal_two_sided, NormalStat};
        match self {
            Self::SlOneSided(p) => stream_score(p, normal_one_sided(NormalStat(z))),
            Self::SlTwoSided(p) => stream_score(p, normal_two_sided(NormalStat(z))),
            Self::Xs(eps) => xs_term(z, *eps),
            Self::Mlr(eps) => mlr_term(z, *eps),
        }
    }

    fn symmetric(&self) -> bool {
        matches!(self, Self::SlTwoSided(_))
    }
}

/// Piecewise-constant upper envelope of a [`ZTerm`] on a uniform grid. The
/// last cell is a guard holding `+inf`; values beyond the grid land there
/// and are evaluated exactly.
#[derive(Debug, Clone)]
pub(crate) struct ZScreen {
    term: ZTerm,
    symmetric: bool,
    lo: f64,
    top: f64,
    table: Vec<f64>,
}

impl ZScreen {
    pub(crate) fn new(term: ZTerm) -> Self {
        let symmetric = term.symmetric();
        let lo = if symmetric { 0.0 } else { -Z_SPAN };
        let cells = ((Z_SPAN - lo) * Z_CELLS_PER_UNIT) as usize;
        let width = 1.0 / Z_CELLS_PER_UNIT;
        let mut table: Vec<f64> = (0..cells).map(|i| pad(term.eval(lo + (i + 1) as f64 * width))).collect();
        table.push(f64::INFINITY);
        Self { term, symmetric, lo, top: cells as f64, table }
    }

    #[inline]
    pub(crate) fn term(&self) -> &ZTerm {
        &self.term
    }

    #[cfg(test)]
    pub(crate) fn bound(&self, z: f64) -> f64 {
        let z = if self.symmetric { z.abs() } else { z };
        let x = ((z - self.lo) * Z_CELLS_PER_UNIT).max(0.0).min(self.top);
        let b = self.table[x as usize];
        if b == f64::INFINITY {
            pad(self.term.eval(z))
        } else {
            b
        }
    }

    /// Adds to `out[i]` a bound on the term at `(last - prev[i]) * scale[i]`.
    /// Off-grid values add `+inf`, which forces an exact evaluation.
    #[inline]
    pub(crate) fn accumulate(&self, last: f64, prev: &[f64], scale: &[f64], out: &mut [f64]) {
        const CHUNK: usize = 64;
        let mut cells = [0i32; CHUNK];
        for ((p, s), o) in prev.chunks(CHUNK).zip(scale.chunks(CHUNK)).zip(out.chunks_mut(CHUNK)) {
            let cells = &mut cells[..p.len()];
            if self.symmetric {
                self.cells(cells, p, s, |z: f64| z.abs(), last);
            } else {
                self.cells(cells, p, s, |z| z, last);
            }
            for (o, &c) in o.iter_mut().zip(cells.iter()) {
                *o += self.table[c as usize];
            }
        }
    }

    #[inline(always)]
    fn cells(&self, cells: &mut [i32], prev: &[f64], scale: &[f64], fold: impl Fn(f64) -> f64, last: f64) {
        for ((c, &pv), &sv) in cells.iter_mut().zip(prev).zip(scale) {
            let x = (fold((last - pv) * sv) - self.lo) * Z_CELLS_PER_UNIT;
            // NaN fails both comparisons and lands in cell 0
            let x = if x > 0.0 { x } else { 0.0 };
            let x = if x < self.top { x } else { self.top };
            // SAFETY: x is finite and within [0, top], and top fits in i32
            *c = unsafe { x.to_int_unchecked::<i32>() };
        }
    }
}

const P_MANTISSA_BITS: u32 = 6;
const P_SHIFT: u32 = 52 - P_MANTISSA_BITS;
const P_MIN_EXP: u64 = 64;

/// Upper envelope of the per-stream SL score as a function of the p-value,
/// bucketed on the leading bits of the IEEE representation (monotone in `p`
/// for non-negative `p`). Buckets have relative width 2^-6 on `[2^-64, 1]`;
/// cell 0 takes everything smaller and holds the largest possible score.
#[derive(Debug, Clone)]
pub(crate) struct PScreen {
    base: u64,
    last: u64,
    table: Vec<f64>,
}

impl PScreen {
    pub(crate) fn new(params: SparsityParams<f64>) -> Self {
        let base = (1023 - P_MIN_EXP) << P_MANTISSA_BITS;
        let top = 1.0_f64.to_bits() >> P_SHIFT;
        let mut table = vec![pad(stream_score(&params, PValue::clamped(0.0)))];
        // smallest p in each bucket gives the largest score
        table.extend((base..=top).map(|key| pad(stream_score(&params, PValue::clamped(f64::from_bits(key << P_SHIFT))))));
        Self { base, last: (table.len() - 1) as u64, table }
    }

    /// Bound for a raw p-value in `[0, 1]`.
    #[inline(always)]
    pub(crate) fn bound_raw(&self, p: f64) -> f64 {
        let key = p.abs().to_bits() >> P_SHIFT;
        let idx = (key + 1).saturating_sub(self.base).min(self.last);
        self.table[idx as usize]
    }

    #[cfg(test)]
    pub(crate) fn bound(&self, p: PValue<f64>) -> f64 {
        self.bound_raw(p.get())
    }
}
