//! Meet-in-the-middle over signed subset sums.
//!
//! The coordinates are split into a left and a right half; every signed
//! sum of each half is tabulated (pattern bit set = `+1`), and the cross
//! sums are queried against the sorted right table.

use crate::wide::Lane;

/// All `2^len` signed sums of `values`, indexed by sign pattern.
pub(crate) fn signed_sums<L: Lane>(values: &[L]) -> Vec<L> {
    let mut sums = Vec::with_capacity(1 << values.len());
    sums.push(values.iter().fold(L::ZERO, |a, &v| a - v));
    for (i, &v) in values.iter().enumerate() {
        let twice = v.double();
        for p in 0..(1usize << i) {
            let s = sums[p] + twice;
            sums.push(s);
        }
    }
    sums
}

fn split<L: Lane>(values: &[L]) -> (&[L], &[L]) {
    values.split_at(values.len() / 2)
}

/// Number of sign vectors `x` with `lo <= offset + <v, x> <= hi`.
pub(crate) fn count_in_window<L: Lane>(values: &[L], offset: L, lo: L, hi: L) -> u64 {
    if lo > hi {
        return 0;
    }
    let (left, right) = split(values);
    let mut ls = signed_sums(left);
    let mut rs = signed_sums(right);
    ls.sort_unstable();
    rs.sort_unstable();
    // For ascending l the admissible right window [lo - off - l, hi - off - l]
    // slides down, so both edges move monotonically.
    let mut start = rs.len();
    let mut end = rs.len();
    let mut count = 0u64;
    for &l in &ls {
        let base = offset + l;
        while end > 0 && rs[end - 1] + base > hi {
            end -= 1;
        }
        while start > 0 && rs[start - 1] + base >= lo {
            start -= 1;
        }
        count += (end.max(start) - start) as u64;
    }
    count
}

/// Whether some sign vector puts `offset + <v, x>` inside `[lo, hi]`.
pub(crate) fn exists_in_window<L: Lane>(values: &[L], offset: L, lo: L, hi: L) -> bool {
    if lo > hi {
        return false;
    }
    let (left, right) = split(values);
    let ls = signed_sums(left);
    let mut rs = signed_sums(right);
    rs.sort_unstable();
    ls.iter().any(|&l| {
        let need = lo - offset - l;
        let idx = rs.partition_point(|&r| r < need);
        idx < rs.len() && rs[idx] + offset + l <= hi
    })
}

/// Minimizes `|offset + <v, x>|` over all sign vectors.
///
/// Returns `(min |.|, pattern)` with pattern bit `i` set meaning `x_i = +1`.
/// Ties go to the smallest left pattern, then the smallest right pattern.
pub(crate) fn minimize<L: Lane>(values: &[L], offset: L) -> (L, u64) {
    let (left, right) = split(values);
    let shift = left.len();
    let ls = signed_sums(left);
    let mut rs: Vec<(L, u64)> = signed_sums(right)
        .into_iter()
        .enumerate()
        .map(|(p, s)| (s, p as u64))
        .collect();
    rs.sort_unstable();
    // Smallest pattern first within each run of equal sums.
    let mut best: Option<(L, u64, u64)> = None;
    for (lp, &l) in ls.iter().enumerate() {
        let target = -(offset + l);
        let idx = rs.partition_point(|&(r, _)| r < target);
        let mut consider = |i: usize| {
            let (r, rp) = rs[i];
            let v = (offset + l + r).abs();
            let key = (v, lp as u64, rp);
            if best.is_none_or(|b| key < b) {
                best = Some(key);
            }
        };
        if idx < rs.len() {
            consider(idx);
        }
        if idx > 0 {
            // First element of the run of equal sums just below the target.
            let below = rs[idx - 1].0;
            let first = rs[..idx].partition_point(|&(r, _)| r < below);
            consider(first);
        }
    }
    let (v, lp, rp) = best.expect("non-empty sum tables");
    (v, lp | (rp << shift))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn brute(values: &[i64], offset: i64) -> Vec<i64> {
        (0..1u64 << values.len())
            .map(|p| {
                offset
                    + values
                        .iter()
                        .enumerate()
                        .map(|(i, v)| if (p >> i) & 1 == 1 { *v } else { -*v })
                        .sum::<i64>()
            })
            .collect()
    }

    #[test]
    fn signed_sums_indexing() {
        let v = [1i64, 2, 4];
        assert_eq!(signed_sums(&v), brute(&v, 0));
    }

    #[test]
    fn queries_match_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..300 {
            let n = rng.random_range(1..13);
            let values: Vec<i64> = (0..n).map(|_| rng.random_range(-50..=50)).collect();
            let offset = rng.random_range(-30..=30);
            let lo = rng.random_range(-40..=10);
            let hi = lo + rng.random_range(-2..=30);
            let all = brute(&values, offset);
            let count = all.iter().filter(|&&s| lo <= s && s <= hi).count() as u64;
            assert_eq!(count_in_window(&values, offset, lo, hi), count);
            assert_eq!(exists_in_window(&values, offset, lo, hi), count > 0);
            let (m, p) = minimize(&values, offset);
            assert_eq!(m, all.iter().map(|s| s.abs()).min().unwrap());
            assert_eq!(all[p as usize].abs(), m);
        }
    }
}
