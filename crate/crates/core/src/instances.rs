//! Seeded instance sampling and coupled instance pairs.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{NppError, Result};
use crate::model::{CoordinateSet, Dist, Instance};
use crate::rng::{self, purpose};
use crate::wide::{self, Wide};

/// Smallest scale accepted by [`sample_instance`].
pub const MIN_SAMPLE_SCALE_BITS: u32 = 16;

/// Fixed-point precision of the correlated-pair coefficients `p` and `sqrt(1 - p^2)`.
pub const COUPLING_FRAC_BITS: u32 = 60;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CouplingMode {
    Correlated,
    Resampled,
}

impl CouplingMode {
    pub fn as_str(self) -> &'static str {
        match self {
            CouplingMode::Correlated => "correlated",
            CouplingMode::Resampled => "resampled",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "correlated" => Ok(CouplingMode::Correlated),
            "resampled" => Ok(CouplingMode::Resampled),
            other => Err(NppError::param(
                "mode",
                format!("unknown coupling mode {other:?}"),
            )),
        }
    }
}

/// A coupled pair `(g, g')` with `p = 1 - epsilon`.
#[derive(Debug, Clone, PartialEq)]
pub struct PairSample {
    pub g: Instance,
    pub g_prime: Instance,
    pub mode: CouplingMode,
    pub epsilon: f64,
    /// Coordinates copied verbatim from `g` (resampled mode only).
    pub kept: Option<CoordinateSet>,
    pub seed: u64,
}

impl PairSample {
    /// `g != g'`, compared exactly.
    pub fn differs(&self) -> bool {
        self.g.values() != self.g_prime.values()
    }
}

/// Draws `n` entries from `dist`, quantized to scale `2^-scale_bits`.
///
/// Gaussian entries are binary64 standard normals rounded to the grid.
/// `uniform_pm1` entries are exactly uniform over the `2^(B+1) + 1` grid
/// points of `[-1, 1]`.
pub fn sample_instance(n: usize, dist: Dist, scale_bits: u32, seed: u64) -> Result<Instance> {
    if n == 0 {
        return Err(NppError::param("n", "must be at least 1"));
    }
    if scale_bits < MIN_SAMPLE_SCALE_BITS {
        return Err(NppError::param(
            "scale_bits",
            format!("sampling needs scale_bits >= {MIN_SAMPLE_SCALE_BITS}, got {scale_bits}"),
        ));
    }
    if scale_bits > crate::model::MAX_SCALE_BITS {
        return Err(NppError::param(
            "scale_bits",
            format!("{scale_bits} exceeds {}", crate::model::MAX_SCALE_BITS),
        ));
    }
    let mut rng = rng::stream(seed, &[purpose::INSTANCE]);
    let values = match dist {
        Dist::Gaussian => (0..n)
            .map(|_| {
                let z: f64 = rng.sample(StandardNormal);
                wide::quantize_f64(z, scale_bits)
            })
            .collect::<Result<Vec<_>>>()?,
        Dist::UniformPm1 => (0..n)
            .map(|_| uniform_grid_point(&mut rng, scale_bits))
            .collect(),
    };
    Instance::new(scale_bits, values, dist, seed)
}

/// Uniform integer in `[-2^B, 2^B]` by rejection from `B + 2` random bits.
fn uniform_grid_point<R: Rng>(rng: &mut R, scale_bits: u32) -> Wide {
    let bits = scale_bits + 2;
    let limit = (Wide::ONE << (scale_bits + 1)) + Wide::ONE;
    loop {
        let hi: u128 = rng.random();
        let lo: u128 = rng.random();
        let raw = Wide::from_words(hi as i128, lo as i128);
        let r = if bits >= 255 {
            raw & ((Wide::ONE << 254) - Wide::ONE)
        } else {
            raw & ((Wide::ONE << bits) - Wide::ONE)
        };
        if r < limit {
            return r - (Wide::ONE << scale_bits);
        }
    }
}

fn check_epsilon(epsilon: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&epsilon) {
        return Err(NppError::param(
            "epsilon",
            format!("{epsilon} is outside [0, 1]"),
        ));
    }
    Ok(())
}

fn coupling_coefficients(epsilon: f64) -> (Wide, Wide) {
    let p = 1.0 - epsilon;
    let c = (1.0 - p * p).max(0.0).sqrt();
    let scale = (1u64 << COUPLING_FRAC_BITS) as f64;
    (
        Wide::from((p * scale).round() as u64),
        Wide::from((c * scale).round() as u64),
    )
}

/// `(1 - epsilon)`-correlated pair: `g' = p g + sqrt(1 - p^2) g~`.
///
/// The coefficients are held as 60-bit fixed-point numbers and the
/// combination is evaluated exactly before a single rounding back to the
/// instance grid, so each entry of `g'` is within `2^-(B+1)` of the real
/// combination. `g~` is an independent draw from `g`'s distribution.
pub fn correlated_pair(g: &Instance, epsilon: f64, seed: u64) -> Result<PairSample> {
    check_epsilon(epsilon)?;
    let fresh = sample_instance(
        g.n(),
        g.dist(),
        g.scale_bits(),
        rng::derive(seed, &[purpose::PAIR_FRESH]),
    )?;
    let (p, c) = coupling_coefficients(epsilon);
    let values = g
        .values()
        .iter()
        .zip(fresh.values())
        .map(|(&q, &t)| wide::round_shift_right(p * q + c * t, COUPLING_FRAC_BITS))
        .collect();
    let g_prime = Instance::new(g.scale_bits(), values, g.dist(), seed)?;
    Ok(PairSample {
        g: g.clone(),
        g_prime,
        mode: CouplingMode::Correlated,
        epsilon,
        kept: None,
        seed,
    })
}

/// `(1 - epsilon)`-resampled pair: each coordinate is kept with probability
/// `1 - epsilon`, otherwise redrawn from `g`'s distribution.
pub fn resampled_pair(g: &Instance, epsilon: f64, seed: u64) -> Result<PairSample> {
    check_epsilon(epsilon)?;
    let p = 1.0 - epsilon;
    let mut coins = rng::stream(seed, &[purpose::PAIR_COUPLING]);
    let kept = CoordinateSet::from_fn(g.n(), |_| coins.random::<f64>() < p);
    let fresh = sample_instance(
        g.n(),
        g.dist(),
        g.scale_bits(),
        rng::derive(seed, &[purpose::PAIR_FRESH]),
    )?;
    let values = (0..g.n())
        .map(|i| {
            if kept.contains(i) {
                g.values()[i]
            } else {
                fresh.values()[i]
            }
        })
        .collect();
    let g_prime = Instance::new(g.scale_bits(), values, g.dist(), seed)?;
    Ok(PairSample {
        g: g.clone(),
        g_prime,
        mode: CouplingMode::Resampled,
        epsilon,
        kept: Some(kept),
        seed,
    })
}

pub fn coupled_pair(g: &Instance, mode: CouplingMode, epsilon: f64, seed: u64) -> Result<PairSample> {
    match mode {
        CouplingMode::Correlated => correlated_pair(g, epsilon, seed),
        CouplingMode::Resampled => resampled_pair(g, epsilon, seed),
    }
}

/// `P(g = g')` for a `(1 - epsilon)`-resampled pair: `(1 - epsilon)^n`.
pub fn equality_prob(n: usize, epsilon: f64) -> f64 {
    (1.0 - epsilon).powi(n as i32)
}
