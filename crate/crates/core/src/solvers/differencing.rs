//! Polynomial-time baselines: adjacent-pair greedy and Karmarkar-Karp.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use crate::model::SignVector;
use crate::wide::Wide;

/// `+1` for nonnegative values, `-1` otherwise; maps magnitude orientation
/// back to a coordinate sign.
#[inline]
fn value_sign(q: Wide) -> bool {
    !q.is_negative()
}

/// Two-phase greedy. Returns the sign vector and `|<g, x>|`.
///
/// Phase 1 sorts by magnitude (descending, stable) and pairs neighbours,
/// the larger of each pair opposite the smaller. Phase 2 places the pair
/// differences largest-first on the lighter side of the running total.
pub(crate) fn greedy_adjacent(values: &[Wide]) -> (SignVector, Wide) {
    let n = values.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by_key(|&i| Reverse(values[i].abs()));

    // (difference, index of the larger member, optional smaller member)
    let mut groups: Vec<(Wide, usize, Option<usize>)> = order
        .chunks(2)
        .map(|pair| match *pair {
            [a, b] => (values[a].abs() - values[b].abs(), a, Some(b)),
            [a] => (values[a].abs(), a, None),
            _ => unreachable!("chunks of two"),
        })
        .collect();
    groups.sort_by_key(|g| Reverse(g.0));

    let mut plus = vec![false; n];
    let mut total = Wide::ZERO;
    for (d, big, small) in groups {
        let side = total <= Wide::ZERO;
        if side {
            total += d;
        } else {
            total -= d;
        }
        plus[big] = side == value_sign(values[big]);
        if let Some(s) = small {
            plus[s] = !side == value_sign(values[s]);
        }
    }
    (SignVector::from_fn(n, |i| plus[i]), total.abs())
}

/// Largest differencing method.
///
/// Magnitudes sit in a max-heap (equal magnitudes pop in insertion order).
/// Each step replaces the two largest `a >= b` with a new node `a - b`
/// whose children are recorded with orientation "same" for `a` and
/// "opposite" for `b`. Orienting the resulting tree from the root yields
/// the partition.
pub(crate) fn karmarkar_karp(values: &[Wide]) -> (SignVector, Wide, u64) {
    let n = values.len();
    // parent[node] = (parent id, opposite orientation)
    let mut parent: Vec<Option<(usize, bool)>> = vec![None; 2 * n - 1];
    let mut heap: BinaryHeap<(Wide, Reverse<usize>)> = values
        .iter()
        .enumerate()
        .map(|(i, q)| (q.abs(), Reverse(i)))
        .collect();
    let mut next = n;
    let mut steps = 0u64;
    let root_value = loop {
        let (a, Reverse(ia)) = heap.pop().expect("heap never empties");
        let Some((b, Reverse(ib))) = heap.pop() else {
            break a;
        };
        parent[ia] = Some((next, false));
        parent[ib] = Some((next, true));
        heap.push((a - b, Reverse(next)));
        next += 1;
        steps += 1;
    };

    // Parents are created after their children, so a reverse sweep sees
    // every parent orientation before its children.
    let mut orient = vec![true; next];
    for node in (0..next).rev() {
        if let Some((p, opposite)) = parent[node] {
            orient[node] = orient[p] != opposite;
        }
    }
    let x = SignVector::from_fn(n, |i| orient[i] == value_sign(values[i]));
    (x, root_value, steps)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{inner, Instance};

    fn w(v: &[i64]) -> Vec<Wide> {
        v.iter().map(|&x| Wide::from(x)).collect()
    }

    #[test]
    fn greedy_hand_trace() {
        let (x, d) = greedy_adjacent(&w(&[8, 7, 6, 5, 4]));
        assert_eq!(d, Wide::from(2));
        let g = Instance::from_ints(0, &[8, 7, 6, 5, 4]).unwrap();
        assert_eq!(inner(&g, &x).unwrap().abs(), d);
    }

    #[test]
    fn kk_hand_trace() {
        let (x, d, steps) = karmarkar_karp(&w(&[4, 5, 6, 7, 8]));
        assert_eq!(d, Wide::from(2));
        assert_eq!(steps, 4);
        let g = Instance::from_ints(0, &[4, 5, 6, 7, 8]).unwrap();
        assert_eq!(inner(&g, &x).unwrap(), d);
    }

    #[test]
    fn equal_pair_and_singletons() {
        assert_eq!(greedy_adjacent(&w(&[9, 9])).1, Wide::ZERO);
        assert_eq!(karmarkar_karp(&w(&[9, 9])).1, Wide::ZERO);
        assert_eq!(karmarkar_karp(&w(&[-3])).1, Wide::from(3));
        assert_eq!(greedy_adjacent(&w(&[-3])).1, Wide::from(3));
    }

    #[test]
    fn negative_values_are_oriented() {
        let vals = [-8i64, 7, -6, 5, -4, 0];
        let g = Instance::from_ints(0, &vals).unwrap();
        let (x, d, _) = karmarkar_karp(&w(&vals));
        assert_eq!(inner(&g, &x).unwrap(), d);
        let (x, d) = greedy_adjacent(&w(&vals));
        assert_eq!(inner(&g, &x).unwrap().abs(), d);
    }
}
