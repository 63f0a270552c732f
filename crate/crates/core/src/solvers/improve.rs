//! Best corner of the hypercube inside an open Euclidean ball.

use crate::model::{inner, Instance, SignVector};
use crate::wide::Wide;

pub(crate) struct BallSearch {
    /// `argmin |<g, x'>|` over corners with `||z - x'|| < r`, if any.
    pub best: Option<(SignVector, Wide)>,
    pub visited: u64,
}

/// Depth-first search over corners near `z` (already clipped).
///
/// Each coordinate either takes its nearest sign (cost `(1 - |z_i|)^2`, with
/// `sign(0) = -1`) or the other one (cost `(1 + |z_i|)^2`). Coordinates are
/// visited in decreasing order of their minimum cost and a branch is cut as
/// soon as its partial cost plus the cheapest completion reaches `r^2`.
pub(crate) fn best_corner_in_ball(g: &Instance, z: &[f64], r: f64) -> BallSearch {
    let n = z.len();
    let near_plus: Vec<bool> = z.iter().map(|&v| v > 0.0).collect();
    let near_cost: Vec<f64> = z
        .iter()
        .zip(&near_plus)
        .map(|(&v, &p)| {
            let s = if p { 1.0 } else { -1.0 };
            (v - s) * (v - s)
        })
        .collect();
    let far_cost: Vec<f64> = z
        .iter()
        .zip(&near_plus)
        .map(|(&v, &p)| {
            let s = if p { -1.0 } else { 1.0 };
            (v - s) * (v - s)
        })
        .collect();

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| near_cost[b].total_cmp(&near_cost[a]).then(a.cmp(&b)));
    let mut rest = vec![0.0; n + 1];
    for k in (0..n).rev() {
        rest[k] = rest[k + 1] + near_cost[order[k]];
    }
    let r2 = r * r;
    let mut search = BallSearch {
        best: None,
        visited: 0,
    };
    if rest[0] >= r2 {
        return search;
    }

    let mut x = SignVector::from_fn(n, |i| near_plus[i]);
    let s = inner(g, &x).expect("dimensions agree");
    let twice: Vec<Wide> = g.values().iter().map(|&q| q + q).collect();

    struct Ctx<'a> {
        order: &'a [usize],
        near_cost: &'a [f64],
        far_cost: &'a [f64],
        rest: &'a [f64],
        twice: &'a [Wide],
        r2: f64,
    }

    fn dfs(ctx: &Ctx, k: usize, partial: f64, x: &mut SignVector, s: Wide, out: &mut BallSearch) {
        if k == ctx.order.len() {
            out.visited += 1;
            let d = s.abs();
            let better = match &out.best {
                None => true,
                Some((bx, bd)) => d < *bd || (d == *bd && x.lex_cmp(bx).is_lt()),
            };
            if better {
                out.best = Some((x.clone(), d));
            }
            return;
        }
        let i = ctx.order[k];
        let keep = partial + ctx.near_cost[i];
        if keep + ctx.rest[k + 1] < ctx.r2 {
            dfs(ctx, k + 1, keep, x, s, out);
        }
        let flip = partial + ctx.far_cost[i];
        if flip + ctx.rest[k + 1] < ctx.r2 {
            let s2 = if x.is_plus(i) { s - ctx.twice[i] } else { s + ctx.twice[i] };
            x.flip(i);
            dfs(ctx, k + 1, flip, x, s2, out);
            x.flip(i);
        }
    }

    let ctx = Ctx {
        order: &order,
        near_cost: &near_cost,
        far_cost: &far_cost,
        rest: &rest,
        twice: &twice,
        r2,
    };
    dfs(&ctx, 0, 0.0, &mut x, s, &mut search);
    search
}
