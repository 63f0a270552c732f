//! Low coordinate degree algorithms (juntas), their stability under coupled
//! inputs, and the rounding schemes that turn real outputs into sign vectors.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{NppError, Result};
use crate::instances::{coupled_pair, sample_instance, CouplingMode};
use crate::model::{Dist, Instance, SignVector};
use crate::par;
use crate::rng::{self, purpose};
use crate::solvers::local_improve;
use crate::stats::MeanCI;
use crate::wide::Wide;

/// Scale used when stability trials sample their own instances.
pub const STABILITY_SCALE_BITS: u32 = 32;

#[derive(Debug, Clone, PartialEq)]
pub enum JuntaKind {
    /// Output `i` is the product of `sign(g_j)` over block `i`.
    SignProduct,
    /// Output `i` is `tables[i][pattern]`, where bit `k` of the pattern is
    /// set when `g` is positive at the `k`-th member of block `i`.
    Table(Vec<Vec<f64>>),
}

/// Coordinate-degree-`D` algorithm: output `i` depends only on the inputs
/// in `blocks[i]`, and every block has at most `D` members.
#[derive(Debug, Clone, PartialEq)]
pub struct JuntaAlgorithm {
    n: usize,
    degree: usize,
    blocks: Vec<Vec<usize>>,
    kind: JuntaKind,
}

impl JuntaAlgorithm {
    pub fn new(n: usize, degree: usize, blocks: Vec<Vec<usize>>, kind: JuntaKind) -> Result<Self> {
        if blocks.len() != n {
            return Err(NppError::DimensionMismatch {
                expected: n,
                got: blocks.len(),
            });
        }
        for block in &blocks {
            if block.len() > degree {
                return Err(NppError::param(
                    "blocks",
                    format!("block of size {} exceeds degree {degree}", block.len()),
                ));
            }
            if let Some(&i) = block.iter().find(|&&i| i >= n) {
                return Err(NppError::IndexOutOfRange { index: i, n });
            }
            let mut sorted = block.clone();
            sorted.sort_unstable();
            sorted.dedup();
            if sorted.len() != block.len() {
                return Err(NppError::param("blocks", "repeated coordinate in a block"));
            }
        }
        if let JuntaKind::Table(tables) = &kind {
            if tables.len() != n {
                return Err(NppError::param("tables", "one table per output required"));
            }
            for (t, b) in tables.iter().zip(&blocks) {
                if t.len() != 1 << b.len() {
                    return Err(NppError::param(
                        "tables",
                        format!("table needs {} entries for a block of {}", 1 << b.len(), b.len()),
                    ));
                }
                if t.iter().any(|v| !v.is_finite()) {
                    return Err(NppError::param("tables", "entries must be finite"));
                }
            }
        }
        Ok(JuntaAlgorithm {
            n,
            degree,
            blocks,
            kind,
        })
    }

    /// Sign products over cyclic windows `{i, i+1, ..., i+D-1}`.
    pub fn sliding_sign_product(n: usize, degree: usize) -> Result<Self> {
        if degree == 0 || degree > n {
            return Err(NppError::param("degree", format!("{degree} must be in 1..={n}")));
        }
        Self::new(n, degree, sliding_blocks(n, degree), JuntaKind::SignProduct)
    }

    /// `a` times the sliding sign product, as explicit tables.
    pub fn scaled_sign_product(n: usize, degree: usize, a: f64) -> Result<Self> {
        if degree == 0 || degree > n {
            return Err(NppError::param("degree", format!("{degree} must be in 1..={n}")));
        }
        let table: Vec<f64> = (0..1usize << degree)
            .map(|p| {
                let minus = degree as u32 - p.count_ones();
                if minus.is_multiple_of(2) {
                    a
                } else {
                    -a
                }
            })
            .collect();
        Self::new(
            n,
            degree,
            sliding_blocks(n, degree),
            JuntaKind::Table(vec![table; n]),
        )
    }

    /// The constant zero algorithm (degree 0).
    pub fn zero(n: usize) -> Self {
        JuntaAlgorithm {
            n,
            degree: 0,
            blocks: vec![Vec::new(); n],
            kind: JuntaKind::Table(vec![vec![0.0]; n]),
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn blocks(&self) -> &[Vec<usize>] {
        &self.blocks
    }

    pub fn kind(&self) -> &JuntaKind {
        &self.kind
    }

    pub fn eval(&self, g: &Instance) -> Result<Vec<f64>> {
        if g.n() != self.n {
            return Err(NppError::DimensionMismatch {
                expected: self.n,
                got: g.n(),
            });
        }
        let positive: Vec<bool> = g.values().iter().map(|&q| q > Wide::ZERO).collect();
        Ok(self
            .blocks
            .iter()
            .enumerate()
            .map(|(i, block)| match &self.kind {
                JuntaKind::SignProduct => {
                    let minus = block.iter().filter(|&&j| !positive[j]).count();
                    if minus % 2 == 0 {
                        1.0
                    } else {
                        -1.0
                    }
                }
                JuntaKind::Table(tables) => {
                    let pattern = block
                        .iter()
                        .enumerate()
                        .fold(0usize, |p, (k, &j)| p | ((positive[j] as usize) << k));
                    tables[i][pattern]
                }
            })
            .collect())
    }

    pub fn to_spec(&self) -> JuntaSpec {
        let (kind, tables) = match &self.kind {
            JuntaKind::SignProduct => ("sign_product".to_string(), None),
            JuntaKind::Table(t) => ("table".to_string(), Some(t.clone())),
        };
        JuntaSpec {
            n: self.n,
            degree: self.degree,
            kind,
            blocks: self.blocks.clone(),
            tables,
        }
    }

    pub fn from_spec(spec: &JuntaSpec) -> Result<Self> {
        let kind = match (spec.kind.as_str(), &spec.tables) {
            ("sign_product", None) => JuntaKind::SignProduct,
            ("sign_product", Some(_)) => {
                return Err(NppError::param("tables", "sign_product juntas take no tables"))
            }
            ("table", Some(t)) => JuntaKind::Table(t.clone()),
            ("table", None) => return Err(NppError::param("tables", "table juntas need tables")),
            (other, _) => {
                return Err(NppError::param("kind", format!("unknown junta kind {other:?}")))
            }
        };
        Self::new(spec.n, spec.degree, spec.blocks.clone(), kind)
    }
}

fn sliding_blocks(n: usize, degree: usize) -> Vec<Vec<usize>> {
    (0..n)
        .map(|i| (0..degree).map(|k| (i + k) % n).collect())
        .collect()
}

/// JSON form of a junta (0-based block indices).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JuntaSpec {
    pub n: usize,
    pub degree: usize,
    pub kind: String,
    pub blocks: Vec<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tables: Option<Vec<Vec<f64>>>,
}

/// One coupled evaluation of an algorithm.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StabilitySample {
    /// `||A(g) - A(g')||^2`
    pub sq_dist: f64,
    /// `<A(g), A(g')>`
    pub inner: f64,
    /// `||A(g)||^2`
    pub norm_sq: f64,
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn check_eps(eps: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&eps) {
        return Err(NppError::param("eps", format!("{eps} is outside [0, 1]")));
    }
    Ok(())
}

fn sample_coupled(n: usize, eps: f64, mode: CouplingMode, seed: u64) -> Result<(Instance, Instance)> {
    let g = sample_instance(n, Dist::Gaussian, STABILITY_SCALE_BITS, seed)?;
    let pair = coupled_pair(&g, mode, eps, rng::derive(seed, &[purpose::PAIR_COUPLING]))?;
    Ok((pair.g, pair.g_prime))
}

/// Draws a Gaussian pair `(g, g')` and evaluates `A` on both.
pub fn stability_trial(
    a: &JuntaAlgorithm,
    eps: f64,
    mode: CouplingMode,
    seed: u64,
) -> Result<StabilitySample> {
    check_eps(eps)?;
    let (g, gp) = sample_coupled(a.n(), eps, mode, seed)?;
    let y = a.eval(&g)?;
    let yp = a.eval(&gp)?;
    Ok(StabilitySample {
        sq_dist: sq_dist(&y, &yp),
        inner: dot(&y, &yp),
        norm_sq: dot(&y, &y),
    })
}

/// Empirical stability of `A` against the `2 C D eps N` bound.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    pub eps: f64,
    pub mode: CouplingMode,
    pub trials: u64,
    pub mean_sq_dist: MeanCI,
    pub mean_inner: MeanCI,
    /// `2 C D eps N` with the measured `C`.
    pub bound_14: f64,
    /// Measured `C = E||A(g)||^2 / N`.
    pub c_norm: f64,
}

/// `2 C D eps N`.
pub fn stability_bound(c_norm: f64, d: usize, eps: f64, n: usize) -> f64 {
    2.0 * c_norm * d as f64 * eps * n as f64
}

/// Per-trial seeds are `derive(seed, [TRIAL, t])`.
pub fn stability_samples(
    a: &JuntaAlgorithm,
    eps: f64,
    mode: CouplingMode,
    trials: u64,
    seed: u64,
) -> Result<Vec<StabilitySample>> {
    check_eps(eps)?;
    par::try_map_indexed(trials, |t| {
        stability_trial(a, eps, mode, rng::derive(seed, &[purpose::TRIAL, t]))
    })
}

pub fn stability_report(
    a: &JuntaAlgorithm,
    eps: f64,
    mode: CouplingMode,
    samples: &[StabilitySample],
) -> Result<StabilityReport> {
    if samples.is_empty() {
        return Err(NppError::param("trials", "must be at least 1"));
    }
    let sq: Vec<f64> = samples.iter().map(|s| s.sq_dist).collect();
    let inn: Vec<f64> = samples.iter().map(|s| s.inner).collect();
    let norms: Vec<f64> = samples.iter().map(|s| s.norm_sq).collect();
    let c_norm = MeanCI::from_samples(&norms).mean / a.n() as f64;
    Ok(StabilityReport {
        eps,
        mode,
        trials: samples.len() as u64,
        mean_sq_dist: MeanCI::from_samples(&sq),
        mean_inner: MeanCI::from_samples(&inn),
        bound_14: stability_bound(c_norm, a.degree(), eps, a.n()),
        c_norm,
    })
}

/// `||A^_r(g) - A^_r(g')||^2` for the clip-then-best-corner wrapper.
pub fn wrapper_stability_trial(
    a: &JuntaAlgorithm,
    eps: f64,
    mode: CouplingMode,
    r: f64,
    seed: u64,
) -> Result<StabilitySample> {
    check_eps(eps)?;
    let (g, gp) = sample_coupled(a.n(), eps, mode, seed)?;
    let y = local_improve(&g, &a.eval(&g)?, r)?.point();
    let yp = local_improve(&gp, &a.eval(&gp)?, r)?.point();
    Ok(StabilitySample {
        sq_dist: sq_dist(&y, &yp),
        inner: dot(&y, &yp),
        norm_sq: dot(&y, &y),
    })
}

/// Coordinatewise clamp into `[-1, 1]`.
pub fn clip(y: &[f64]) -> Vec<f64> {
    y.iter().map(|&v| v.clamp(-1.0, 1.0)).collect()
}

/// Entrywise sign with `sign(0) = -1`.
pub fn round_deterministic(y: &[f64]) -> SignVector {
    SignVector::from_fn(y.len(), |i| y[i] > 0.0)
}

/// `x_i = sign(clip(y)_i - U_i)` with `U_i` uniform on `[-1, 1]`.
pub fn round_randomized(y: &[f64], seed: u64) -> SignVector {
    let z = clip(y);
    let mut rng = rng::stream(seed, &[purpose::ROUNDING]);
    SignVector::from_fn(z.len(), |i| {
        let u: f64 = rng.random_range(-1.0..1.0);
        z[i] - u > 0.0
    })
}

/// `p_i = |z_i - sign(z_i)| / 2` for `z = clip(y)`.
pub fn flip_probs(y: &[f64]) -> Vec<f64> {
    clip(y)
        .iter()
        .map(|&z| {
            let s = if z > 0.0 { 1.0 } else { -1.0 };
            (z - s).abs() / 2.0
        })
        .collect()
}

/// Rounding by resampling: with probability `2 p_i` coordinate `i` is
/// replaced by a fair random sign, otherwise it keeps `sign(y_i)`.
/// Returns the rounded vector and the number of resampled coordinates.
pub fn round_via_resampling(y: &[f64], seed: u64) -> (SignVector, usize) {
    let p = flip_probs(y);
    let sign = round_deterministic(&clip(y));
    let mut rng = rng::stream(seed, &[purpose::ROUNDING]);
    let mut resampled = 0;
    let x = SignVector::from_fn(p.len(), |i| {
        let redraw = rng.random::<f64>() < 2.0 * p[i];
        let coin = rng.random::<bool>();
        if redraw {
            resampled += 1;
            coin
        } else {
            sign.is_plus(i)
        }
    });
    (x, resampled)
}

/// `P(x_i = +1)` under [`round_randomized`]: `P(U < z_i) = (z_i + 1) / 2`.
pub fn randomized_plus_probs(y: &[f64]) -> Vec<f64> {
    clip(y).iter().map(|&z| (z + 1.0) / 2.0).collect()
}

/// `P(x_i = +1)` under [`round_via_resampling`]:
/// `2 p_i / 2 + (1 - 2 p_i) [sign(z_i) = +1]`.
pub fn resampling_plus_probs(y: &[f64]) -> Vec<f64> {
    let z = clip(y);
    flip_probs(y)
        .iter()
        .zip(&z)
        .map(|(&p, &zi)| {
            let keep_plus = if zi > 0.0 { 1.0 } else { 0.0 };
            2.0 * p * 0.5 + (1.0 - 2.0 * p) * keep_plus
        })
        .collect()
}

/// Probability of the outcome `x` under independent coordinates with the
/// given `P(x_i = +1)`.
pub fn outcome_prob(plus_probs: &[f64], x: &SignVector) -> f64 {
    plus_probs
        .iter()
        .enumerate()
        .map(|(i, &p)| if x.is_plus(i) { p } else { 1.0 - p })
        .product()
}

/// Total variation between two product laws on `{-1, +1}^n` by exhaustive
/// enumeration (`n <= 20`).
pub fn product_law_tv(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    assert!(a.len() <= 20, "exhaustive comparison limited to n <= 20");
    let n = a.len();
    let half_l1: f64 = (0..1u64 << n)
        .map(|bits| {
            let x = SignVector::from_fn(n, |i| (bits >> i) & 1 == 1);
            (outcome_prob(a, &x) - outcome_prob(b, &x)).abs()
        })
        .sum();
    half_l1 / 2.0
}
