//! Partitioning algorithms.
//!
//! Exact routes: Gray-code brute force, explicit solution listing, and
//! meet-in-the-middle counting / minimization. Heuristics: adjacent-pair
//! greedy, Karmarkar-Karp, the restricted hybrid (Karmarkar-Karp on all but
//! the first `j` coordinates, exact search on those `j`), and the local
//! improvement wrapper that picks the best corner near a real-valued output.

mod differencing;
pub(crate) mod gray;
pub(crate) mod improve;
pub(crate) mod mitm;

use std::fmt;
use std::str::FromStr;
use std::time::{Duration, Instant};

use crate::caps::Caps;
use crate::error::{NppError, Result};
use crate::lowdeg::{clip, round_deterministic};
use crate::model::{energy_of, inner, EnergyLevel, Instance, SignVector};
use crate::wide::{Lane, Wide};
use crate::with_lane;

/// Solver output. `disc_q` is `|<g, x>|` in units of `2^-B`.
#[derive(Debug, Clone)]
pub struct SolveResult {
    pub x: SignVector,
    pub disc_q: Wide,
    pub energy: f64,
    /// Objective evaluations (states, heap steps or visited corners).
    pub work: u64,
    pub elapsed: Duration,
}

impl SolveResult {
    fn new(g: &Instance, x: SignVector, disc_q: Wide, work: u64, started: Instant) -> Self {
        debug_assert_eq!(inner(g, &x).map(|s| s.abs()).ok(), Some(disc_q));
        SolveResult {
            energy: energy_of(disc_q, g.scale_bits()),
            x,
            disc_q,
            work,
            elapsed: started.elapsed(),
        }
    }
}

fn lane_values<L: Lane>(g: &Instance) -> Vec<L> {
    g.values().iter().map(|&v| L::from_wide(v)).collect()
}

/// Exact optimum by Gray-code enumeration of the `2^(n-1)` vectors with
/// `x_0 = +1`. Ties keep the first optimum in Gray order.
pub fn brute_force(g: &Instance, caps: &Caps) -> Result<SolveResult> {
    caps.check_gray(g.n(), "brute force")?;
    let started = Instant::now();
    let (disc, t, states) = with_lane!(g.lane(), L => {
        let layout = gray::GrayLayout::<L>::new(&lane_values::<L>(g));
        let (m, t) = layout.argmin();
        (m.to_wide(), t, layout.states())
    });
    let x = gray::state_vector(g.n(), t);
    Ok(SolveResult::new(g, x, disc, states, started))
}

/// All `x` with `x_0 = +1` in `S(E; g)`, in Gray order. More than `cap`
/// solutions is reported as [`NppError::CapExceeded`], never truncated.
pub fn enumerate_solutions(
    g: &Instance,
    lvl: EnergyLevel,
    cap: usize,
    caps: &Caps,
) -> Result<Vec<SignVector>> {
    if cap == 0 {
        return Err(NppError::param("cap", "must be at least 1"));
    }
    caps.check_enum(g.n())?;
    let threshold = g.threshold(lvl);
    let states = with_lane!(g.lane(), L => {
        let layout = gray::GrayLayout::<L>::new(&lane_values::<L>(g));
        layout.collect_within(L::from_wide(threshold), cap)
    });
    if states.len() > cap {
        return Err(NppError::CapExceeded(format!(
            "more than {cap} solutions in the canonical half-cube"
        )));
    }
    Ok(states
        .into_iter()
        .map(|t| gray::state_vector(g.n(), t))
        .collect())
}

/// Exact `|S(E; g)|` over the full cube (antipodes included).
pub fn count_solutions_mitm(g: &Instance, lvl: EnergyLevel, caps: &Caps) -> Result<u64> {
    caps.check_mitm(g.n())?;
    if g.n() > 63 {
        return Err(NppError::CapExceeded("solution counts above 2^63".into()));
    }
    let threshold = g.threshold(lvl);
    Ok(with_lane!(g.lane(), L => {
        let t = L::from_wide(threshold);
        mitm::count_in_window(&lane_values::<L>(g), L::ZERO, -t, t)
    }))
}

/// Exact optimum by meet-in-the-middle with `x_0 = +1` fixed.
pub fn mitm_optimum(g: &Instance, caps: &Caps) -> Result<SolveResult> {
    caps.check_mitm(g.n().saturating_sub(1))?;
    let started = Instant::now();
    let n = g.n();
    let (disc, pattern) = with_lane!(g.lane(), L => {
        let vals = lane_values::<L>(g);
        let (m, p) = mitm::minimize(&vals[1..], vals[0]);
        (m.to_wide(), p)
    });
    let x = SignVector::from_fn(n, |i| i == 0 || (pattern >> (i - 1)) & 1 == 1);
    let half = (n - 1) / 2;
    let work = (1u64 << half) + (1u64 << (n - 1 - half));
    Ok(SolveResult::new(g, x, disc, work, started))
}

/// Sort-and-pair greedy followed by largest-first balancing.
pub fn greedy_adjacent(g: &Instance) -> SolveResult {
    let started = Instant::now();
    let (x, disc) = differencing::greedy_adjacent(g.values());
    SolveResult::new(g, x, disc, g.n() as u64, started)
}

/// Largest differencing method with constraint-tree reconstruction.
pub fn karmarkar_karp(g: &Instance) -> SolveResult {
    let started = Instant::now();
    let (x, disc, steps) = differencing::karmarkar_karp(g.values());
    SolveResult::new(g, x, disc, steps, started)
}

/// Smallest and largest accepted `j_size` for [`restricted_hybrid`].
pub const HYBRID_MIN_J: usize = 4;
pub const HYBRID_MAX_J: usize = 30;

/// Karmarkar-Karp on the coordinates after the first `j_size`, then an
/// exact meet-in-the-middle search over the first `j_size` signs given the
/// fixed remainder. `j_size = n` degenerates to exact search.
pub fn restricted_hybrid(g: &Instance, j_size: usize) -> Result<SolveResult> {
    let n = g.n();
    if !(HYBRID_MIN_J..=HYBRID_MAX_J).contains(&j_size) || j_size > n {
        return Err(NppError::param(
            "j_size",
            format!("{j_size} must lie in {HYBRID_MIN_J}..={} for n = {n}", HYBRID_MAX_J.min(n)),
        ));
    }
    let started = Instant::now();
    let (tail_plus, tail_sum, kk_steps) = if j_size < n {
        let (x, _, steps) = differencing::karmarkar_karp(&g.values()[j_size..]);
        let s = crate::model::inner_unchecked(&g.values()[j_size..], &x);
        ((0..n - j_size).map(|i| x.is_plus(i)).collect(), s, steps)
    } else {
        (Vec::new(), Wide::ZERO, 0)
    };
    let (disc, pattern) = with_lane!(g.lane(), L => {
        let vals = lane_values::<L>(g);
        let (m, p) = mitm::minimize(&vals[..j_size], L::from_wide(tail_sum));
        (m.to_wide(), p)
    });
    let x = SignVector::from_fn(n, |i| {
        if i < j_size {
            (pattern >> i) & 1 == 1
        } else {
            tail_plus[i - j_size]
        }
    });
    Ok(SolveResult::new(g, x, disc, kk_steps + (1u64 << j_size), started))
}

/// Outcome of the local improvement wrapper.
#[derive(Debug, Clone)]
pub enum Improved {
    /// Best corner strictly inside the ball.
    Corner(SolveResult),
    /// No corner within `r`: the clipped point itself.
    Interior { z: Vec<f64>, visited: u64 },
}

impl Improved {
    pub fn corner(&self) -> Option<&SolveResult> {
        match self {
            Improved::Corner(r) => Some(r),
            Improved::Interior { .. } => None,
        }
    }

    /// The output as a point of `[-1, 1]^n`.
    pub fn point(&self) -> Vec<f64> {
        match self {
            Improved::Corner(r) => r.x.to_f64(),
            Improved::Interior { z, .. } => z.clone(),
        }
    }
}

/// Clips `y` into the cube and returns the corner of least discrepancy
/// with `||clip(y) - x'|| < r` (ties lexicographic, `-1 < +1`), or the
/// clipped point when the open ball holds no corner.
pub fn local_improve(g: &Instance, y: &[f64], r: f64) -> Result<Improved> {
    if y.len() != g.n() {
        return Err(NppError::DimensionMismatch {
            expected: g.n(),
            got: y.len(),
        });
    }
    if r.is_nan() || r < 0.0 {
        return Err(NppError::param("r", format!("{r} must be nonnegative")));
    }
    let started = Instant::now();
    let z = clip(y);
    let search = improve::best_corner_in_ball(g, &z, r);
    Ok(match search.best {
        Some((x, disc)) => Improved::Corner(SolveResult::new(g, x, disc, search.visited, started)),
        None => Improved::Interior {
            z,
            visited: search.visited,
        },
    })
}

/// A solver selectable by name: `bf`, `mitm`, `greedy`, `kk`, `hybrid:<j>`,
/// `improve:<r>`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Solver {
    BruteForce,
    Mitm,
    Greedy,
    KarmarkarKarp,
    Hybrid(usize),
    /// Local improvement of the identity algorithm `A(g) = g`; an empty
    /// ball falls back to `sign(clip(g))`.
    Improve(f64),
}

impl Solver {
    pub fn solve(&self, g: &Instance, caps: &Caps) -> Result<SolveResult> {
        match *self {
            Solver::BruteForce => brute_force(g, caps),
            Solver::Mitm => mitm_optimum(g, caps),
            Solver::Greedy => Ok(greedy_adjacent(g)),
            Solver::KarmarkarKarp => Ok(karmarkar_karp(g)),
            Solver::Hybrid(j) => restricted_hybrid(g, j),
            Solver::Improve(r) => {
                let started = Instant::now();
                match local_improve(g, &g.to_f64(), r)? {
                    Improved::Corner(res) => Ok(res),
                    Improved::Interior { z, visited } => {
                        let x = round_deterministic(&z);
                        let disc = inner(g, &x)?.abs();
                        Ok(SolveResult::new(g, x, disc, visited, started))
                    }
                }
            }
        }
    }

    /// Whether the solver returns a global optimum.
    pub fn is_exact(&self) -> bool {
        matches!(self, Solver::BruteForce | Solver::Mitm)
    }
}

impl FromStr for Solver {
    type Err = NppError;

    fn from_str(s: &str) -> Result<Self> {
        let bad = |reason: String| NppError::param("solver", reason);
        match s {
            "bf" => return Ok(Solver::BruteForce),
            "mitm" => return Ok(Solver::Mitm),
            "greedy" => return Ok(Solver::Greedy),
            "kk" => return Ok(Solver::KarmarkarKarp),
            _ => {}
        }
        if let Some(j) = s.strip_prefix("hybrid:") {
            let j: usize = j
                .parse()
                .map_err(|_| bad(format!("hybrid size {j:?} is not an integer")))?;
            if !(HYBRID_MIN_J..=HYBRID_MAX_J).contains(&j) {
                return Err(bad(format!("hybrid size {j} outside {HYBRID_MIN_J}..={HYBRID_MAX_J}")));
            }
            return Ok(Solver::Hybrid(j));
        }
        if let Some(r) = s.strip_prefix("improve:") {
            let r: f64 = r
                .parse()
                .map_err(|_| bad(format!("radius {r:?} is not a number")))?;
            if !(r.is_finite() && r >= 0.0) {
                return Err(bad(format!("radius {r} must be finite and nonnegative")));
            }
            return Ok(Solver::Improve(r));
        }
        Err(bad(format!(
            "unknown solver {s:?} (expected bf, mitm, greedy, kk, hybrid:<j>, improve:<r>)"
        )))
    }
}

impl fmt::Display for Solver {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Solver::BruteForce => f.write_str("bf"),
            Solver::Mitm => f.write_str("mitm"),
            Solver::Greedy => f.write_str("greedy"),
            Solver::KarmarkarKarp => f.write_str("kk"),
            Solver::Hybrid(j) => write!(f, "hybrid:{j}"),
            Solver::Improve(r) => write!(f, "improve:{r}"),
        }
    }
}

#[cfg(test)]
mod tests;
