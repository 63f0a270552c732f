//! Gray-code enumeration of the canonical half-cube `{x : x_0 = +1}`.
//!
//! State `t` in `0..2^(n-1)` is the vector with `x_0 = +1` and
//! `x_{j+1} = -1` exactly when bit `j` of `gray(t) = t ^ (t >> 1)` is set.
//! Consecutive states differ in one coordinate, so the inner product is
//! maintained with one addition per state.
//!
//! The low `k` Gray bits are folded into a precomputed table of partial
//! sums. Within the block of states sharing the high bits `u`, the low
//! patterns appear in reflected or direct Gray order depending on the
//! parity of `u`, so two tables are kept and the visit order (and with it
//! the first-found tie-break) matches plain sequential Gray enumeration.

use crate::model::SignVector;
use crate::par;
use crate::wide::Lane;

const LOW_BITS: u32 = 10;
const MAX_BLOCKS_LOG2: u32 = 6;

#[inline]
pub(crate) fn gray(t: u64) -> u64 {
    t ^ (t >> 1)
}

/// Decodes state `t` of an `n`-coordinate enumeration.
pub(crate) fn state_vector(n: usize, t: u64) -> SignVector {
    let code = gray(t);
    SignVector::from_fn(n, |i| i == 0 || (code >> (i - 1)) & 1 == 0)
}

pub(crate) struct GrayLayout<L: Lane> {
    low_bits: u32,
    high_bits: u32,
    /// Inner product of the all-plus vector.
    base: L,
    /// Low-pattern partial sums in visit order, for even / odd high index.
    tables: [Vec<L>; 2],
    /// `-2 q` for each high coordinate.
    high_delta: Vec<L>,
}

impl<L: Lane> GrayLayout<L> {
    pub fn new(values: &[L]) -> Self {
        let n = values.len();
        let free = n.saturating_sub(1) as u32;
        let low_bits = free.min(LOW_BITS);
        let high_bits = free - low_bits;
        let base = values.iter().fold(L::ZERO, |a, &v| a + v);
        let delta = |i: usize| -(values[i].double());
        let table_for = |flip_top: bool| -> Vec<L> {
            if low_bits == 0 {
                return vec![L::ZERO];
            }
            (0..1u64 << low_bits)
                .map(|l| {
                    let mut code = gray(l);
                    if flip_top {
                        code ^= 1 << (low_bits - 1);
                    }
                    (0..low_bits as usize)
                        .filter(|j| (code >> j) & 1 == 1)
                        .fold(L::ZERO, |a, j| a + delta(j + 1))
                })
                .collect()
        };
        let tables = [table_for(false), table_for(true)];
        let high_delta = (0..high_bits as usize)
            .map(|j| delta(j + 1 + low_bits as usize))
            .collect();
        GrayLayout {
            low_bits,
            high_bits,
            base,
            tables,
            high_delta,
        }
    }

    pub fn states(&self) -> u64 {
        1u64 << (self.low_bits + self.high_bits)
    }

    fn high_sum(&self, u: u64) -> L {
        let code = gray(u);
        (0..self.high_bits as usize)
            .filter(|j| (code >> j) & 1 == 1)
            .fold(self.base, |a, j| a + self.high_delta[j])
    }

    fn block_ranges(&self) -> Vec<(u64, u64)> {
        let blocks_log2 = self.high_bits.min(MAX_BLOCKS_LOG2);
        let per = 1u64 << (self.high_bits - blocks_log2);
        (0..1u64 << blocks_log2)
            .map(|b| (b * per, (b + 1) * per))
            .collect()
    }

    /// Visits high indices `lo..hi`, handing `(u, s_u, table)` to `visit`.
    /// Returns early when `visit` returns `false`.
    fn walk(&self, lo: u64, hi: u64, mut visit: impl FnMut(u64, L, &[L]) -> bool) {
        let mut s = self.high_sum(lo);
        let mut code = gray(lo);
        for u in lo..hi {
            if u != lo {
                let j = u.trailing_zeros() as usize;
                code ^= 1 << j;
                if (code >> j) & 1 == 1 {
                    s += self.high_delta[j];
                } else {
                    s -= self.high_delta[j];
                }
            }
            if !visit(u, s, &self.tables[(u & 1) as usize]) {
                return;
            }
        }
    }

    /// First state (in Gray order) of minimal `|s|`: `(|s|, t)`.
    pub fn argmin(&self) -> (L, u64) {
        let blocks = self.block_ranges();
        let per_block = par::map_indexed(blocks.len() as u64, |b| {
            let (lo, hi) = blocks[b as usize];
            let mut best: Option<(L, u64)> = None;
            self.walk(lo, hi, |u, s, table| {
                let m = table.iter().map(|&v| (s + v).abs()).min().expect("non-empty table");
                if best.is_none_or(|(b, _)| m < b) {
                    let l = table
                        .iter()
                        .position(|&v| (s + v).abs() == m)
                        .expect("minimum is attained");
                    best = Some((m, (u << self.low_bits) | l as u64));
                }
                true
            });
            best.expect("non-empty block")
        });
        per_block
            .into_iter()
            .reduce(|a, b| if b.0 < a.0 { b } else { a })
            .expect("at least one block")
    }

    /// States with `|s| <= threshold` in Gray order, stopping once more than
    /// `limit` have been found.
    pub fn collect_within(&self, threshold: L, limit: usize) -> Vec<u64> {
        let blocks = self.block_ranges();
        let per_block = par::map_indexed(blocks.len() as u64, |b| {
            let (lo, hi) = blocks[b as usize];
            let mut found = Vec::new();
            self.walk(lo, hi, |u, s, table| {
                if table.iter().any(|&v| (s + v).abs() <= threshold) {
                    for (l, &v) in table.iter().enumerate() {
                        if (s + v).abs() <= threshold {
                            found.push((u << self.low_bits) | l as u64);
                        }
                    }
                }
                found.len() <= limit
            });
            found
        });
        let mut out = Vec::new();
        for block in per_block {
            out.extend(block);
            if out.len() > limit {
                break;
            }
        }
        out
    }
}
