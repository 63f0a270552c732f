//! Landscape quantities as experiments: the eta chooser, entropy and ball
//! bounds, the small-ball bound, and Monte Carlo trials for conditional
//! obstruction, solution repulsion and rounding hardness.

use std::collections::HashSet;
use std::time::Instant;

use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::caps::Caps;
use crate::error::{NppError, Result};
use crate::instances::{coupled_pair, sample_instance, CouplingMode};
use crate::lowdeg::{clip, round_via_resampling, JuntaAlgorithm};
use crate::model::{inner, is_solution, Dist, EnergyLevel, Instance, SignVector};
use crate::rng::{self, purpose};
use crate::solvers::{enumerate_solutions, local_improve, mitm, Solver};
use crate::stats::EstimateCI;
use crate::wide::{Lane, Wide};
use crate::with_lane;

/// Constants of the eta chooser.
pub const ETA_C: f64 = 8.0;
pub const ETA_C_PRIME: f64 = 16.0;

/// Largest solution set the direct repulsion route will hold in memory.
pub const REPEL_SOLUTION_CAP: usize = 1 << 24;

/// Standard binary entropy in bits, `h(0) = h(1) = 0`.
pub fn binary_entropy(p: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&p) {
        return Err(NppError::param("p", format!("{p} is outside [0, 1]")));
    }
    let term = |x: f64| if x == 0.0 { 0.0 } else { -x * x.log2() };
    Ok(term(p) + term(1.0 - p))
}

/// Hamming-ball size and its entropy bounds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BallCount {
    /// `sum_{j <= k} C(n, j)`, exact.
    pub exact: Wide,
    /// `2^(n h(k / n))`.
    pub bound: f64,
    /// `2^(2 n p log2(1 / p))` with `p = k / n`.
    pub weak_bound: f64,
}

pub fn binomial(n: u32, k: u32) -> Wide {
    if k > n {
        return Wide::ZERO;
    }
    let k = k.min(n - k);
    let mut c = Wide::ONE;
    for j in 0..k {
        c = c * Wide::from(n - j) / Wide::from(j + 1);
    }
    c
}

pub fn ball_count(n: u32, k: u32) -> Result<BallCount> {
    if k > n {
        return Err(NppError::param("k", format!("{k} exceeds n = {n}")));
    }
    if n > 240 {
        return Err(NppError::param("n", "exact ball counts are limited to n <= 240"));
    }
    let mut exact = Wide::ZERO;
    let mut c = Wide::ONE;
    for j in 0..=k {
        exact += c;
        c = c * Wide::from(n - j) / Wide::from(j + 1);
    }
    let (bound, weak_bound) = if n == 0 {
        (1.0, 1.0)
    } else {
        let p = k as f64 / n as f64;
        let weak = if k == 0 { 0.0 } else { 2.0 * p * (1.0 / p).log2() };
        (
            (n as f64 * binary_entropy(p)?).exp2(),
            (n as f64 * weak).exp2(),
        )
    };
    Ok(BallCount {
        exact,
        bound,
        weak_bound,
    })
}

/// `eta = E / (C' n log2(C n / E))` with `C = 8`, `C' = 16`.
///
/// Also certifies `0 < eta < 1/2` and `2 eta log2(1 / eta) < E / (4n)`;
/// a failed certificate is an internal error.
pub fn eta_for(e: f64, n: usize) -> Result<f64> {
    let nf = n as f64;
    if !(e >= 1.0 && e <= nf) {
        return Err(NppError::param("energy", format!("{e} must lie in [1, n = {n}]")));
    }
    let eta = e / (ETA_C_PRIME * nf * (ETA_C * nf / e).log2());
    if !(eta > 0.0 && eta < 0.5) {
        return Err(NppError::Internal(format!("eta {eta} outside (0, 1/2)")));
    }
    if 2.0 * eta * (1.0 / eta).log2() >= e / (4.0 * nf) {
        return Err(NppError::Internal(format!(
            "eta certificate fails at E = {e}, n = {n}"
        )));
    }
    Ok(eta)
}

/// `floor(eta n)`: the flip count of the Euclidean radius `2 sqrt(eta n)`.
pub fn ball_flips_for(eta: f64, n: usize) -> usize {
    (eta * n as f64).floor() as usize
}

/// `2^(1 - E) / sqrt(2 pi sigma^2)`, an upper bound on `P(|Z| <= 2^-E)` for
/// `Z ~ N(mu, sigma^2)` and any `mu`.
pub fn small_ball_bound(e: f64, sigma_sq: f64) -> Result<f64> {
    if sigma_sq.is_nan() || sigma_sq <= 0.0 {
        return Err(NppError::param("sigma_sq", format!("{sigma_sq} must be positive")));
    }
    Ok((1.0 - e).exp2() / (2.0 * std::f64::consts::PI * sigma_sq).sqrt())
}

/// Monte Carlo frequency of `|Z| <= 2^-E` for `Z ~ N(mean, sigma_sq)`.
pub fn small_ball_frequency(e: f64, sigma_sq: f64, mean: f64, samples: u64, seed: u64) -> Result<EstimateCI> {
    if sigma_sq.is_nan() || sigma_sq <= 0.0 {
        return Err(NppError::param("sigma_sq", format!("{sigma_sq} must be positive")));
    }
    let normal = Normal::new(mean, sigma_sq.sqrt())
        .map_err(|err| NppError::param("sigma_sq", err.to_string()))?;
    let mut rng = rng::stream(seed, &[purpose::TRIAL]);
    let radius = (-e).exp2();
    let hits = (0..samples)
        .filter(|_| normal.sample(&mut rng).abs() <= radius)
        .count() as u64;
    EstimateCI::wilson(hits, samples)
}

/// `eps = 2^(-E/2)`.
pub fn eps_ldp(e: u32) -> f64 {
    (-(e as f64) / 2.0).exp2()
}

/// `eps = log2(n / D) / n`.
pub fn eps_lcd(n: usize, degree: usize) -> Result<f64> {
    if degree == 0 || degree >= n {
        return Err(NppError::param("degree", format!("{degree} must lie in 1..{n}")));
    }
    Ok((n as f64 / degree as f64).log2() / n as f64)
}

fn ball_work(n: usize, k_max: usize) -> u128 {
    let mut total = 0u128;
    let mut c = 1u128;
    for j in 0..=k_max.min(n) {
        total = total.saturating_add(c);
        c = c.saturating_mul((n - j) as u128) / (j as u128 + 1);
    }
    total
}

fn check_ball(n: usize, k_max: usize, caps: &Caps) -> Result<()> {
    let work = ball_work(n, k_max);
    if work > caps.ball_work as u128 {
        return Err(NppError::CapExceeded(format!(
            "Hamming ball of radius {k_max} at n = {n} has {work} points, cap is {}",
            caps.ball_work
        )));
    }
    Ok(())
}

/// Smallest `k <= k_max` such that some `x'` exactly `k` flips from `x`
/// lies in `S(E; g)`.
pub fn nearest_solution_flips(
    g: &Instance,
    lvl: EnergyLevel,
    x: &SignVector,
    k_max: usize,
    caps: &Caps,
) -> Result<Option<usize>> {
    let s = inner(g, x)?;
    let n = g.n();
    let k_max = k_max.min(n);
    check_ball(n, k_max, caps)?;
    let t = g.threshold(lvl);
    // Flipping coordinate i moves the sum by -2 x_i q_i.
    let delta: Vec<Wide> = g
        .values()
        .iter()
        .enumerate()
        .map(|(i, &q)| if x.is_plus(i) { -(q + q) } else { q + q })
        .collect();

    fn hit(delta: &[Wide], start: usize, left: usize, s: Wide, t: Wide) -> bool {
        if left == 0 {
            return s.abs() <= t;
        }
        (start..=delta.len() - left).any(|i| hit(delta, i + 1, left - 1, s + delta[i], t))
    }
    Ok((0..=k_max).find(|&k| hit(&delta, 0, k, s, t)))
}

/// Parameters of a conditional-obstruction experiment at one energy level.
#[derive(Debug, Clone, PartialEq)]
pub struct ObstructionParams {
    pub n: usize,
    pub scale_bits: u32,
    pub dist: Dist,
    pub energy: EnergyLevel,
    pub eps: f64,
    pub eta: f64,
    pub mode: CouplingMode,
    pub solver: Solver,
    /// `floor(eta n)`.
    pub ball_flips: usize,
    pub trials: u64,
    pub seed: u64,
}

impl ObstructionParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.eta > 0.0 && self.eta < 0.5) {
            return Err(NppError::param("eta", format!("{} must lie in (0, 1/2)", self.eta)));
        }
        if self.ball_flips != ball_flips_for(self.eta, self.n) {
            return Err(NppError::param("ball_flips", "must equal floor(eta n)"));
        }
        if !(0.0..=1.0).contains(&self.eps) {
            return Err(NppError::param("eps", format!("{} is outside [0, 1]", self.eps)));
        }
        if self.trials == 0 {
            return Err(NppError::param("trials", "must be at least 1"));
        }
        self.energy.check_margin(self.scale_bits)
    }

    /// Whether two parameter sets sample identical `(g, g', x, x')` per trial.
    fn shares_samples(&self, other: &Self) -> bool {
        self.n == other.n
            && self.scale_bits == other.scale_bits
            && self.dist == other.dist
            && self.eps == other.eps
            && self.mode == other.mode
            && self.solver == other.solver
            && self.seed == other.seed
    }
}

/// The event flags of one obstruction trial.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial: u64,
    /// `g != g'`
    pub s_diff: bool,
    /// `x in S(E; g)`
    pub s_solve_g: bool,
    /// `x' in S(E; g')`
    pub s_solve_gp: bool,
    /// `||x - x'|| <= 2 sqrt(eta n)`
    pub s_stable: bool,
    /// No solution of `g'` within `2 sqrt(eta n)` of `x`.
    pub s_cond: bool,
    pub nearest_flips: Option<usize>,
    pub elapsed_ms: f64,
}

/// Seeds of trial `t`: instance `derive(seed, [TRIAL, t])`, coupling
/// `derive(that, [PAIR_COUPLING])`.
pub fn trial_seed(seed: u64, t: u64) -> u64 {
    rng::derive(seed, &[purpose::TRIAL, t])
}

pub fn obstruction_trial(p: &ObstructionParams, t: u64, caps: &Caps) -> Result<TrialRecord> {
    Ok(obstruction_trial_levels(std::slice::from_ref(p), t, caps)?[0])
}

/// One trial evaluated at several energy levels that share the sampled
/// instances and solver outputs (all parameters except energy, eta and
/// ball_flips must agree).
pub fn obstruction_trial_levels(ps: &[ObstructionParams], t: u64, caps: &Caps) -> Result<Vec<TrialRecord>> {
    let Some(p) = ps.first() else {
        return Ok(Vec::new());
    };
    if let Some(q) = ps.iter().find(|q| !p.shares_samples(q)) {
        return Err(NppError::param(
            "levels",
            format!("parameter sets differ beyond the energy level: {q:?}"),
        ));
    }
    for q in ps {
        q.validate()?;
    }
    let started = Instant::now();
    let ts = trial_seed(p.seed, t);
    let g = sample_instance(p.n, p.dist, p.scale_bits, ts)?;
    let x = p.solver.solve(&g, caps)?.x;
    let pair = coupled_pair(&g, p.mode, p.eps, rng::derive(ts, &[purpose::PAIR_COUPLING]))?;
    let gp = pair.g_prime;
    let s_diff = g.values() != gp.values();
    let xp = p.solver.solve(&gp, caps)?.x;
    let h = x.hamming(&xp);
    let mut out = Vec::with_capacity(ps.len());
    for q in ps {
        let nearest = nearest_solution_flips(&gp, q.energy, &x, q.ball_flips, caps)?;
        out.push(TrialRecord {
            trial: t,
            s_diff,
            s_solve_g: is_solution(&g, &x, q.energy)?,
            s_solve_gp: is_solution(&gp, &xp, q.energy)?,
            s_stable: h <= q.ball_flips,
            s_cond: nearest.is_none(),
            nearest_flips: nearest,
            elapsed_ms: 0.0,
        });
    }
    let ms = started.elapsed().as_secs_f64() * 1e3;
    for r in &mut out {
        r.elapsed_ms = ms;
    }
    Ok(out)
}

/// Wilson estimate of `P(event | condition)` over `records`.
pub fn aggregate<R>(
    records: &[R],
    event: impl Fn(&R) -> bool,
    condition: impl Fn(&R) -> bool,
) -> Result<EstimateCI> {
    let (mut hits, mut total) = (0u64, 0u64);
    for r in records.iter().filter(|r| condition(r)) {
        total += 1;
        hits += event(r) as u64;
    }
    if total == 0 {
        return Err(NppError::param("condition", "no trials satisfy the condition"));
    }
    EstimateCI::wilson(hits, total)
}

/// Leading exponent `-E + 2 eta log2(1/eta) n` of the obstruction bound.
pub fn obstruction_exponent(e: u32, eta: f64, n: usize) -> f64 {
    -(e as f64) + 2.0 * eta * (1.0 / eta).log2() * n as f64
}

/// `c = log2(p) - exponent`, the additive constant that makes `p` meet the
/// bound; `None` when `p = 0`.
pub fn measured_constant(p: f64, exponent: f64) -> Option<f64> {
    (p > 0.0).then(|| p.log2() - exponent)
}

/// `c` in `freq <= 2^(-E + c k log2 n)`; `None` when `freq = 0`.
pub fn repel_constant(freq: f64, e: u32, k: usize, n: usize) -> Option<f64> {
    (freq > 0.0).then(|| (freq.log2() + e as f64) / (k as f64 * (n as f64).log2()))
}

/// How [`repel_trial`] decides.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RepelRoute {
    /// List `S(E; g)` and look for a partner of every solution.
    Direct,
    /// For each candidate flip set, search for a completion by
    /// meet-in-the-middle.
    Mitm,
}

/// Flip sets `J` (`1 <= |J| <= k`) admitting signs with `|<g_J, x_J>| <= T`,
/// each with the smallest such `|<g_J, x_J>|`. Every pair of solutions
/// within `k` flips differs on such a set.
fn repel_candidates(g: &Instance, t: Wide, k: usize) -> Vec<(Vec<usize>, Wide)> {
    let vals = g.values();
    let n = vals.len();
    let mut out = Vec::new();
    let mut set = Vec::new();

    // Signed sums with the first member fixed to +1.
    fn rec(
        vals: &[Wide],
        start: usize,
        k: usize,
        set: &mut Vec<usize>,
        sums: &[Wide],
        t: Wide,
        out: &mut Vec<(Vec<usize>, Wide)>,
    ) {
        for i in start..vals.len() {
            let next: Vec<Wide> = if set.is_empty() {
                vec![vals[i]]
            } else {
                sums.iter().flat_map(|&s| [s + vals[i], s - vals[i]]).collect()
            };
            set.push(i);
            if let Some(best) = next.iter().map(|s| s.abs()).min().filter(|&m| m <= t) {
                out.push((set.clone(), best));
            }
            if set.len() < k {
                rec(vals, i + 1, k, set, &next, t, out);
            }
            set.pop();
        }
    }
    if n > 0 && k > 0 {
        rec(vals, 0, k, &mut set, &[], t, &mut out);
    }
    out
}

/// Whether two distinct solutions of `S(E; g)` lie within `k` flips.
pub fn repel_trial(g: &Instance, lvl: EnergyLevel, k: usize, caps: &Caps) -> Result<bool> {
    let route = if g.n() <= 30 { RepelRoute::Direct } else { RepelRoute::Mitm };
    repel_trial_with(g, lvl, k, route, caps)
}

pub fn repel_trial_with(g: &Instance, lvl: EnergyLevel, k: usize, route: RepelRoute, caps: &Caps) -> Result<bool> {
    let n = g.n();
    let k = k.min(n);
    check_ball(n, k, caps)?;
    let t = g.threshold(lvl);
    let candidates = repel_candidates(g, t, k);
    if candidates.is_empty() {
        return Ok(false);
    }
    match route {
        RepelRoute::Direct => {
            let half = enumerate_solutions(g, lvl, REPEL_SOLUTION_CAP, caps)?;
            let all: HashSet<SignVector> = half
                .iter()
                .flat_map(|x| [x.clone(), x.negate()])
                .collect();
            Ok(all.iter().any(|x| {
                candidates.iter().any(|(set, _)| {
                    let mut y = x.clone();
                    for &i in set {
                        y.flip(i);
                    }
                    all.contains(&y)
                })
            }))
        }
        RepelRoute::Mitm => {
            caps.check_mitm(n)?;
            // x and x' = x flipped on J are both solutions iff the
            // completion c = <g_rest, x_rest> satisfies |c| <= T - |sigma|.
            // Every sign pattern on J with |sigma| <= T is tried.
            for (set, _) in &candidates {
                let rest: Vec<Wide> = (0..n)
                    .filter(|i| !set.contains(i))
                    .map(|i| g.values()[i])
                    .collect();
                let on: Vec<Wide> = set.iter().map(|&i| g.values()[i]).collect();
                let sigmas = crate::solvers::mitm::signed_sums(&on);
                for sigma in sigmas {
                    let slack = t - sigma.abs();
                    if slack < Wide::ZERO {
                        continue;
                    }
                    let found = if rest.is_empty() {
                        true
                    } else {
                        with_lane!(g.lane(), L => {
                            let r: Vec<L> = rest.iter().map(|&v| L::from_wide(v)).collect();
                            let s = L::from_wide(slack);
                            mitm::exists_in_window(&r, L::ZERO, -s, s)
                        })
                    };
                    if found {
                        return Ok(true);
                    }
                }
            }
            Ok(false)
        }
    }
}

/// Outcome of one rounding-hardness trial.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RoundingRecord {
    /// Resampling-rounded output lies in `S(E; g)`.
    pub tilde_in_s: bool,
    /// Local-improvement output is a corner in `S(E; g)`.
    pub hat_in_s: bool,
    /// The improvement ball held no corner.
    pub hat_interior: bool,
    /// Number of resampled coordinates.
    pub resampled: usize,
}

pub fn rounding_hardness_trial(
    a: &JuntaAlgorithm,
    g: &Instance,
    lvl: EnergyLevel,
    r: f64,
    seed: u64,
) -> Result<RoundingRecord> {
    let y = a.eval(g)?;
    let (x_tilde, resampled) = round_via_resampling(&clip(&y), seed);
    let improved = local_improve(g, &y, r)?;
    let hat_in_s = match improved.corner() {
        Some(c) => is_solution(g, &c.x, lvl)?,
        None => false,
    };
    Ok(RoundingRecord {
        tilde_in_s: is_solution(g, &x_tilde, lvl)?,
        hat_in_s,
        hat_interior: improved.corner().is_none(),
        resampled,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solvers::{brute_force, count_solutions_mitm};

    fn inst(vals: &[i64]) -> Instance {
        Instance::from_ints(0, vals).unwrap()
    }

    fn x(s: &str) -> SignVector {
        SignVector::parse(s).unwrap()
    }

    #[test]
    fn entropy_examples() {
        assert_eq!(binary_entropy(0.5).unwrap(), 1.0);
        assert_eq!(binary_entropy(0.0).unwrap(), 0.0);
        assert_eq!(binary_entropy(1.0).unwrap(), 0.0);
        assert!((binary_entropy(0.25).unwrap() - 0.811278).abs() < 1e-6);
        for i in 0..=100 {
            let p = i as f64 / 100.0;
            let d = binary_entropy(p).unwrap() - binary_entropy(1.0 - p).unwrap();
            assert!(d.abs() < 1e-15);
        }
        assert!(binary_entropy(-0.1).is_err());
        assert!(binary_entropy(1.1).is_err());
    }

    #[test]
    fn ball_count_examples() {
        let b = ball_count(10, 5).unwrap();
        assert_eq!(b.exact, Wide::from(638));
        assert_eq!(b.bound, 1024.0);
        let z = ball_count(7, 0).unwrap();
        assert_eq!(z.exact, Wide::ONE);
        assert_eq!(z.bound, 1.0);
        assert_eq!(ball_count(20, 20).unwrap().exact, Wide::from(1u64 << 20));
        assert!(ball_count(3, 4).is_err());
        assert_eq!(binomial(30, 15), Wide::from(155_117_520));
    }

    #[test]
    fn ball_bounds_hold_exhaustively() {
        for n in 1..=30u32 {
            for k in 0..=n / 2 {
                let b = ball_count(n, k).unwrap();
                let exact = crate::wide::to_f64_scaled(b.exact, 0);
                assert!(exact <= b.bound, "n={n} k={k}");
                assert!(b.bound <= b.weak_bound * (1.0 + 1e-12) || k == 0, "n={n} k={k}");
            }
        }
    }

    #[test]
    fn eta_examples() {
        assert!((eta_for(50.0, 50).unwrap() - 1.0 / 48.0).abs() < 1e-15);
        let eta = 1.0 / 48.0;
        assert!((2.0 * eta * (1.0f64 / eta).log2() - 0.2327).abs() < 1e-4);
        assert!((eta_for(32.0, 64).unwrap() - 1.0 / 128.0).abs() < 1e-15);
        assert!(eta_for(0.5, 10).is_err());
        assert!(eta_for(11.0, 10).is_err());
    }

    #[test]
    fn small_ball_examples() {
        let b = small_ball_bound(3.0, 1.0).unwrap();
        assert!((b - 0.09974).abs() < 1e-5);
        let mut last = f64::INFINITY;
        for e in 0..60 {
            let v = small_ball_bound(e as f64, 1.0).unwrap();
            assert!(v < last);
            last = v;
        }
        let mut last = f64::INFINITY;
        for s in 1..100 {
            let v = small_ball_bound(4.0, s as f64 * 0.1).unwrap();
            assert!(v < last);
            last = v;
        }
        assert!(small_ball_bound(1.0, 0.0).is_err());
        let f = small_ball_frequency(3.0, 1.0, 0.0, 200_000, 1).unwrap();
        assert!((f.point - 0.0995).abs() < 0.003, "{f:?}");
    }

    #[test]
    fn eps_presets() {
        assert_eq!(eps_ldp(4), 0.25);
        assert_eq!(eps_lcd(64, 4).unwrap(), 4.0 / 64.0);
        assert!(eps_lcd(4, 4).is_err());
    }

    #[test]
    fn nearest_flip_examples() {
        let c = Caps::default();
        let lvl = EnergyLevel::new(1);
        let g = inst(&[1, 2, 3, 4]);
        assert_eq!(nearest_solution_flips(&g, lvl, &x("+--+"), 3, &c).unwrap(), Some(0));
        assert_eq!(nearest_solution_flips(&g, lvl, &x("++++"), 4, &c).unwrap(), Some(2));
        assert_eq!(nearest_solution_flips(&g, lvl, &x("++++"), 1, &c).unwrap(), None);
        let odd = inst(&[1, 2, 4]);
        for bits in 0..8u64 {
            let y = SignVector::from_fn(3, |i| (bits >> i) & 1 == 1);
            assert_eq!(nearest_solution_flips(&odd, lvl, &y, 3, &c).unwrap(), None);
        }
        let big = sample_instance(100, Dist::Gaussian, 32, 1).unwrap();
        assert!(matches!(
            nearest_solution_flips(&big, lvl, &SignVector::all_plus(100), 8, &c),
            Err(NppError::CapExceeded(_))
        ));
    }

    #[test]
    fn nearest_flips_match_exhaustive() {
        let c = Caps::default();
        for t in 0..100 {
            let g = sample_instance(10, Dist::Gaussian, 20, t).unwrap();
            let lvl = EnergyLevel::new(3 + (t % 5) as u32);
            let x0 = g.signs();
            let want = (0..1u64 << 10)
                .map(|b| SignVector::from_fn(10, |i| (b >> i) & 1 == 1))
                .filter(|y| is_solution(&g, y, lvl).unwrap())
                .map(|y| y.hamming(&x0))
                .min();
            for k_max in [0, 2, 5, 10] {
                let got = nearest_solution_flips(&g, lvl, &x0, k_max, &c).unwrap();
                assert_eq!(got, want.filter(|&w| w <= k_max));
            }
        }
    }

    fn params(e: u32, eps: f64, flips_eta: f64) -> ObstructionParams {
        ObstructionParams {
            n: 12,
            scale_bits: 40,
            dist: Dist::Gaussian,
            energy: EnergyLevel::new(e),
            eps,
            eta: flips_eta,
            mode: CouplingMode::Resampled,
            solver: Solver::BruteForce,
            ball_flips: ball_flips_for(flips_eta, 12),
            trials: 1,
            seed: 5,
        }
    }

    #[test]
    fn obstruction_trial_edge_cases() {
        let c = Caps::default();
        for t in 0..20 {
            let r = obstruction_trial(&params(8, 0.0, 0.1), t, &c).unwrap();
            assert!(!r.s_diff);
            assert!(r.s_stable);
            assert_eq!(r.s_solve_g, r.s_solve_gp);
            // x is a solution of g' = g exactly when flips 0 suffices.
            assert_eq!(r.s_cond, !r.s_solve_g || r.nearest_flips.is_none());
        }
        // A ball covering the cube always holds a solution if one exists.
        for t in 0..20 {
            let r = obstruction_trial(&params(2, 0.5, 0.499), t, &c).unwrap();
            if r.s_solve_gp {
                assert!(!r.s_cond);
            }
            if r.s_cond {
                assert!(r.nearest_flips.is_none());
            }
        }
    }

    #[test]
    fn obstruction_levels_share_samples() {
        let c = Caps::default();
        let ps: Vec<_> = [4, 8, 12].iter().map(|&e| params(e, 0.3, 0.2)).collect();
        for t in 0..10 {
            let joint = obstruction_trial_levels(&ps, t, &c).unwrap();
            for (p, r) in ps.iter().zip(&joint) {
                let single = obstruction_trial(p, t, &c).unwrap();
                assert_eq!(
                    (single.s_diff, single.s_solve_g, single.s_solve_gp, single.s_stable, single.s_cond, single.nearest_flips),
                    (r.s_diff, r.s_solve_g, r.s_solve_gp, r.s_stable, r.s_cond, r.nearest_flips)
                );
            }
        }
        let mut bad = ps.clone();
        bad[1].eps = 0.1;
        assert!(obstruction_trial_levels(&bad, 0, &c).is_err());
        let mut off = params(8, 0.3, 0.2);
        off.ball_flips += 1;
        assert!(obstruction_trial(&off, 0, &c).is_err());
        let mut tight = params(8, 0.3, 0.2);
        tight.scale_bits = 17;
        assert!(matches!(obstruction_trial(&tight, 0, &c), Err(NppError::MarginViolation { .. })));
    }

    #[test]
    fn aggregate_examples() {
        let recs: Vec<bool> = vec![false; 100];
        let e = aggregate(&recs, |r| *r, |_| true).unwrap();
        assert_eq!(e.point, 0.0);
        assert!((e.hi - 0.0370).abs() < 1e-4);
        let e = aggregate(&recs, |r| !*r, |_| true).unwrap();
        assert!((e.lo - 0.9630).abs() < 1e-4);
        let half: Vec<bool> = (0..100).map(|i| i % 2 == 0).collect();
        let e = aggregate(&half, |r| *r, |_| true).unwrap();
        assert!(((e.lo + e.hi) / 2.0 - 0.5).abs() < 1e-12);
        assert!(aggregate(&half, |r| *r, |_| false).is_err());
    }

    #[test]
    fn repel_examples() {
        let c = Caps::default();
        let lvl = EnergyLevel::new(1);
        for route in [RepelRoute::Direct, RepelRoute::Mitm] {
            assert!(!repel_trial_with(&inst(&[1, 1, 2, 4]), lvl, 2, route, &c).unwrap());
            assert!(repel_trial_with(&inst(&[1, 1, 2, 4]), lvl, 4, route, &c).unwrap());
            for k in 0..=3 {
                assert!(!repel_trial_with(&inst(&[1, 2, 4]), lvl, k, route, &c).unwrap());
            }
        }
    }

    fn repel_oracle(g: &Instance, lvl: EnergyLevel, k: usize) -> bool {
        let n = g.n();
        let sols: Vec<SignVector> = (0..1u64 << n)
            .map(|b| SignVector::from_fn(n, |i| (b >> i) & 1 == 1))
            .filter(|y| is_solution(g, y, lvl).unwrap())
            .collect();
        sols.iter()
            .any(|a| sols.iter().any(|b| a != b && a.hamming(b) <= k))
    }

    #[test]
    fn repel_routes_match_oracle() {
        let c = Caps::default();
        for t in 0..150 {
            let n = 4 + (t % 9) as usize;
            let g = sample_instance(n, Dist::Gaussian, 20, 900 + t).unwrap();
            let lvl = EnergyLevel::new(1 + (t % 6) as u32);
            let k = 1 + (t % 3) as usize;
            let want = repel_oracle(&g, lvl, k);
            assert_eq!(repel_trial_with(&g, lvl, k, RepelRoute::Direct, &c).unwrap(), want, "t={t}");
            assert_eq!(repel_trial_with(&g, lvl, k, RepelRoute::Mitm, &c).unwrap(), want, "t={t}");
        }
    }

    #[test]
    fn rounding_trial_examples() {
        let g = sample_instance(12, Dist::Gaussian, 32, 3).unwrap();
        let lvl = EnergyLevel::new(2);
        let sign = JuntaAlgorithm::sliding_sign_product(12, 1).unwrap();
        for s in 0..20 {
            let r = rounding_hardness_trial(&sign, &g, lvl, 0.5, s).unwrap();
            assert_eq!(r.resampled, 0);
            assert_eq!(r.tilde_in_s, is_solution(&g, &g.signs(), lvl).unwrap());
        }
        let opt = brute_force(&g, &Caps::default()).unwrap();
        let r = rounding_hardness_trial(&sign, &g, lvl, 2.0 * 12f64.sqrt() + 0.01, 0).unwrap();
        assert_eq!(r.hat_in_s, opt.energy >= 2.0);
    }

    #[test]
    fn zero_algorithm_rounds_uniformly() {
        let g = sample_instance(12, Dist::Gaussian, 32, 4).unwrap();
        let lvl = EnergyLevel::new(3);
        let frac = count_solutions_mitm(&g, lvl, &Caps::default()).unwrap() as f64 / 4096.0;
        let zero = JuntaAlgorithm::zero(12);
        let recs: Vec<RoundingRecord> = (0..20_000)
            .map(|s| rounding_hardness_trial(&zero, &g, lvl, 0.1, s).unwrap())
            .collect();
        let est = aggregate(&recs, |r| r.tilde_in_s, |_| true).unwrap();
        let sigma = (frac * (1.0 - frac) / 20_000.0).sqrt();
        assert!((est.point - frac).abs() <= 4.0 * sigma + 1e-12, "{est:?} vs {frac}");
        assert!(recs.iter().all(|r| r.resampled == 12 && r.hat_interior));
    }
}
