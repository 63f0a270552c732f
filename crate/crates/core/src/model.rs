//! Exact instance model: fixed-point instances, packed sign vectors and the
//! discrepancy / energy / solution-set predicates.
//!
//! Coordinates are 0-based throughout the Rust API.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{NppError, Result};
use crate::wide::{self, ceil_log2, LaneWidth, Wide};

/// Largest accepted `scale_bits`. Correlated pairs multiply values by 61-bit
/// fixed-point coefficients, which must stay inside the 256-bit accumulator.
pub const MAX_SCALE_BITS: u32 = 180;

/// Required headroom between the energy level and the quantization scale.
pub const ENERGY_MARGIN_BITS: u32 = 10;

/// Entry distribution an instance was sampled from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Dist {
    Gaussian,
    UniformPm1,
}

impl Dist {
    pub fn as_str(self) -> &'static str {
        match self {
            Dist::Gaussian => "gaussian",
            Dist::UniformPm1 => "uniform_pm1",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "gaussian" => Ok(Dist::Gaussian),
            "uniform_pm1" => Ok(Dist::UniformPm1),
            other => Err(NppError::param(
                "dist",
                format!("unsupported distribution {other:?} (expected gaussian or uniform_pm1)"),
            )),
        }
    }
}

/// An NPP input: `g_i = values[i] * 2^-scale_bits`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Instance {
    scale_bits: u32,
    values: Vec<Wide>,
    dist: Dist,
    seed: u64,
    lane: LaneWidth,
}

impl Instance {
    pub fn new(scale_bits: u32, values: Vec<Wide>, dist: Dist, seed: u64) -> Result<Self> {
        let n = values.len();
        if n == 0 {
            return Err(NppError::param("n", "an instance needs at least one value"));
        }
        if scale_bits > MAX_SCALE_BITS {
            return Err(NppError::param(
                "scale_bits",
                format!("{scale_bits} exceeds the maximum {MAX_SCALE_BITS}"),
            ));
        }
        let acc_need = scale_bits + 8 + ceil_log2(n as u64) + 1;
        if acc_need > wide::ACCUMULATOR_BITS - 1 {
            return Err(NppError::param(
                "n",
                format!("n = {n} at scale_bits = {scale_bits} needs a {acc_need}-bit accumulator"),
            ));
        }
        let bound = wide::pow2(scale_bits + 8);
        if let Some(i) = values.iter().position(|v| v.abs() >= bound) {
            return Err(NppError::param(
                "values",
                format!("|q_{i}| must be below 2^(scale_bits + 8)"),
            ));
        }
        let lane = LaneWidth::for_values(&values);
        Ok(Instance {
            scale_bits,
            values,
            dist,
            seed,
            lane,
        })
    }

    /// Small integer instance, handy for fixtures. Tagged gaussian, seed 0.
    pub fn from_ints(scale_bits: u32, values: &[i64]) -> Result<Self> {
        Self::new(
            scale_bits,
            values.iter().map(|&v| Wide::from(v)).collect(),
            Dist::Gaussian,
            0,
        )
    }

    pub fn n(&self) -> usize {
        self.values.len()
    }

    pub fn scale_bits(&self) -> u32 {
        self.scale_bits
    }

    pub fn values(&self) -> &[Wide] {
        &self.values
    }

    pub fn dist(&self) -> Dist {
        self.dist
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Kernel lane wide enough for every signed partial sum of this instance.
    pub fn lane(&self) -> LaneWidth {
        self.lane
    }

    /// `sum |q_i|`, an upper bound on every `|<g, x>|`.
    pub fn l1(&self) -> Wide {
        self.values.iter().fold(Wide::ZERO, |acc, v| acc + v.abs())
    }

    pub fn to_f64(&self) -> Vec<f64> {
        self.values
            .iter()
            .map(|&q| wide::to_f64_scaled(q, self.scale_bits))
            .collect()
    }

    /// Entrywise sign with `sign(0) = -1`.
    pub fn signs(&self) -> SignVector {
        SignVector::from_fn(self.n(), |i| self.values[i] > Wide::ZERO)
    }

    /// Fails unless `lvl.e + 10 <= scale_bits`.
    pub fn check_margin(&self, lvl: EnergyLevel) -> Result<()> {
        lvl.check_margin(self.scale_bits)
    }

    /// Exact threshold `floor(2^(B - E))`, clamped to `sum |q_i|` so it fits
    /// the instance lane without changing any membership decision.
    pub fn threshold(&self, lvl: EnergyLevel) -> Wide {
        let l1 = self.l1();
        let k = self.scale_bits as i64 - lvl.e as i64;
        if k < 0 {
            return Wide::ZERO;
        }
        if k as u32 >= wide::bit_length(l1) {
            return l1;
        }
        wide::pow2(k as u32)
    }

    fn check_dim(&self, n: usize) -> Result<()> {
        if self.n() != n {
            return Err(NppError::DimensionMismatch {
                expected: self.n(),
                got: n,
            });
        }
        Ok(())
    }
}

fn words_for(n: usize) -> usize {
    n.div_ceil(64)
}

/// A point of the hypercube, bit `i` set meaning `x_i = +1`.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SignVector {
    n: usize,
    words: Vec<u64>,
}

impl SignVector {
    pub fn all_plus(n: usize) -> Self {
        Self::from_fn(n, |_| true)
    }

    pub fn all_minus(n: usize) -> Self {
        SignVector {
            n,
            words: vec![0; words_for(n)],
        }
    }

    pub fn from_fn(n: usize, mut plus: impl FnMut(usize) -> bool) -> Self {
        let mut v = Self::all_minus(n);
        for i in 0..n {
            if plus(i) {
                v.words[i / 64] |= 1 << (i % 64);
            }
        }
        v
    }

    /// From `+1 / -1` entries; anything positive counts as `+1`.
    pub fn from_signs(signs: &[i8]) -> Self {
        Self::from_fn(signs.len(), |i| signs[i] > 0)
    }

    /// Parses a string of `+` / `-` characters.
    pub fn parse(s: &str) -> Result<Self> {
        let chars: Vec<char> = s.chars().collect();
        if let Some(c) = chars.iter().find(|c| **c != '+' && **c != '-') {
            return Err(NppError::Parse(format!("invalid sign character {c:?}")));
        }
        Ok(Self::from_fn(chars.len(), |i| chars[i] == '+'))
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn words(&self) -> &[u64] {
        &self.words
    }

    #[inline]
    pub fn is_plus(&self, i: usize) -> bool {
        (self.words[i / 64] >> (i % 64)) & 1 == 1
    }

    #[inline]
    pub fn sign(&self, i: usize) -> i8 {
        if self.is_plus(i) {
            1
        } else {
            -1
        }
    }

    #[inline]
    pub fn flip(&mut self, i: usize) {
        self.words[i / 64] ^= 1 << (i % 64);
    }

    pub fn flipped(&self, i: usize) -> Self {
        let mut v = self.clone();
        v.flip(i);
        v
    }

    pub fn negate(&self) -> Self {
        let mut v = self.clone();
        for w in &mut v.words {
            *w = !*w;
        }
        v.clear_padding();
        v
    }

    fn clear_padding(&mut self) {
        let rem = self.n % 64;
        if rem != 0 {
            if let Some(last) = self.words.last_mut() {
                *last &= (1u64 << rem) - 1;
            }
        }
    }

    /// Number of coordinates where the vectors differ; `||x - y||^2 = 4h`.
    pub fn hamming(&self, other: &Self) -> usize {
        debug_assert_eq!(self.n, other.n);
        self.words
            .iter()
            .zip(&other.words)
            .map(|(a, b)| (a ^ b).count_ones() as usize)
            .sum()
    }

    pub fn to_f64(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.sign(i) as f64).collect()
    }

    pub fn iter(&self) -> impl Iterator<Item = i8> + '_ {
        (0..self.n).map(|i| self.sign(i))
    }

    /// Lexicographic order on `(x_0, x_1, ...)` with `-1 < +1`.
    pub fn lex_cmp(&self, other: &Self) -> std::cmp::Ordering {
        for i in 0..self.n.min(other.n) {
            let c = self.sign(i).cmp(&other.sign(i));
            if c.is_ne() {
                return c;
            }
        }
        self.n.cmp(&other.n)
    }
}

impl fmt::Display for SignVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for i in 0..self.n {
            f.write_str(if self.is_plus(i) { "+" } else { "-" })?;
        }
        Ok(())
    }
}

impl fmt::Debug for SignVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "SignVector({self})")
    }
}

/// Integer energy level `E`; the solution threshold is `2^-E`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct EnergyLevel {
    pub e: u32,
}

impl EnergyLevel {
    pub fn new(e: u32) -> Self {
        EnergyLevel { e }
    }

    /// Level that additionally satisfies the margin rule for `scale_bits`.
    pub fn checked(e: u32, scale_bits: u32) -> Result<Self> {
        let lvl = EnergyLevel { e };
        lvl.check_margin(scale_bits)?;
        Ok(lvl)
    }

    pub fn check_margin(self, scale_bits: u32) -> Result<()> {
        if self.e + ENERGY_MARGIN_BITS > scale_bits {
            return Err(NppError::MarginViolation {
                energy: self.e,
                scale_bits,
                margin: ENERGY_MARGIN_BITS,
            });
        }
        Ok(())
    }
}

/// A subset of the coordinates `0..n`.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct CoordinateSet {
    n: usize,
    words: Vec<u64>,
}

impl CoordinateSet {
    pub fn empty(n: usize) -> Self {
        CoordinateSet {
            n,
            words: vec![0; words_for(n)],
        }
    }

    pub fn full(n: usize) -> Self {
        Self::empty(n).complement()
    }

    pub fn from_indices(n: usize, indices: &[usize]) -> Result<Self> {
        let mut s = Self::empty(n);
        for &i in indices {
            if i >= n {
                return Err(NppError::IndexOutOfRange { index: i, n });
            }
            s.insert(i);
        }
        Ok(s)
    }

    pub fn from_fn(n: usize, mut member: impl FnMut(usize) -> bool) -> Self {
        let mut s = Self::empty(n);
        for i in 0..n {
            if member(i) {
                s.insert(i);
            }
        }
        s
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn contains(&self, i: usize) -> bool {
        i < self.n && (self.words[i / 64] >> (i % 64)) & 1 == 1
    }

    pub fn insert(&mut self, i: usize) {
        self.words[i / 64] |= 1 << (i % 64);
    }

    pub fn len(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn complement(&self) -> Self {
        let mut c = CoordinateSet {
            n: self.n,
            words: self.words.iter().map(|w| !w).collect(),
        };
        let rem = self.n % 64;
        if rem != 0 {
            if let Some(last) = c.words.last_mut() {
                *last &= (1u64 << rem) - 1;
            }
        }
        c
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.n).filter(move |&i| self.contains(i))
    }

    pub fn indices(&self) -> Vec<usize> {
        self.iter().collect()
    }

    /// Lowercase hex of the bitmask, most significant word first.
    pub fn to_hex(&self) -> String {
        let mut s = String::new();
        for w in self.words.iter().rev() {
            s.push_str(&format!("{w:016x}"));
        }
        if s.is_empty() {
            s.push('0');
        }
        s
    }

    pub fn from_hex(n: usize, hex: &str) -> Result<Self> {
        let mut s = Self::empty(n);
        let digits: Vec<u32> = hex
            .chars()
            .map(|c| c.to_digit(16).ok_or_else(|| NppError::Parse(format!("bad hex {c:?}"))))
            .collect::<Result<_>>()?;
        for (pos, d) in digits.iter().rev().enumerate() {
            for b in 0..4 {
                if (d >> b) & 1 == 1 {
                    let i = pos * 4 + b;
                    if i >= n {
                        return Err(NppError::IndexOutOfRange { index: i, n });
                    }
                    s.insert(i);
                }
            }
        }
        Ok(s)
    }
}

impl fmt::Debug for CoordinateSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.iter()).finish()
    }
}

/// Exact `s = sum_i x_i q_i`, so that `<g, x> = s * 2^-B`.
pub fn inner(g: &Instance, x: &SignVector) -> Result<Wide> {
    g.check_dim(x.n())?;
    Ok(inner_unchecked(g.values(), x))
}

pub(crate) fn inner_unchecked(values: &[Wide], x: &SignVector) -> Wide {
    values.iter().enumerate().fold(Wide::ZERO, |acc, (i, &q)| {
        if x.is_plus(i) {
            acc + q
        } else {
            acc - q
        }
    })
}

/// Energy from an exact inner product: `B - log2 |s|`, `+inf` when `s = 0`.
pub fn energy_of(s: Wide, scale_bits: u32) -> f64 {
    if s == Wide::ZERO {
        f64::INFINITY
    } else {
        scale_bits as f64 - wide::log2_abs(s)
    }
}

/// `E(x; g) = -log2 |<g, x>|`, reported as binary64 with `+inf` for perfect partitions.
pub fn energy(g: &Instance, x: &SignVector) -> Result<f64> {
    Ok(energy_of(inner(g, x)?, g.scale_bits()))
}

/// Exact membership test `|<g, x>| <= 2^-E`.
///
/// The integer comparison is exact at every level; the margin rule is
/// enforced where instances are sampled, see [`Instance::check_margin`].
pub fn is_solution(g: &Instance, x: &SignVector, lvl: EnergyLevel) -> Result<bool> {
    let s = inner(g, x)?;
    Ok(s.abs() <= g.threshold(lvl))
}

/// Inner product after flipping coordinate `i` of `x`, given `s = <g, x>`.
pub fn flip_delta(g: &Instance, s: Wide, x: &SignVector, i: usize) -> Result<Wide> {
    g.check_dim(x.n())?;
    if i >= g.n() {
        return Err(NppError::IndexOutOfRange { index: i, n: g.n() });
    }
    let twice = g.values()[i] + g.values()[i];
    Ok(if x.is_plus(i) { s - twice } else { s + twice })
}

/// Zeroes the coordinates outside `set`.
pub fn restrict(g: &Instance, set: &CoordinateSet) -> Result<Instance> {
    g.check_dim(set.n())?;
    let values = g
        .values()
        .iter()
        .enumerate()
        .map(|(i, &q)| if set.contains(i) { q } else { Wide::ZERO })
        .collect();
    Instance::new(g.scale_bits(), values, g.dist(), g.seed())
}
