//! Wide fixed-point integers and the narrow "lanes" the hot kernels run in.
//!
//! Instance values are stored as 256-bit signed integers. Enumeration kernels
//! are generic over [`Lane`] and are instantiated at the narrowest machine
//! width that provably cannot overflow for the instance at hand (see
//! [`LaneWidth::for_values`]).

use std::fmt::Debug;
use std::ops::{Add, AddAssign, Neg, Sub, SubAssign};

use crate::error::{NppError, Result};

/// Canonical wide integer used for instance values and reported discrepancies.
pub type Wide = ethnum::I256;

/// Total accumulator width in bits. An instance is accepted only when
/// `scale_bits + 8 + ceil(log2 n) + 1 <= ACCUMULATOR_BITS - 1`.
pub const ACCUMULATOR_BITS: u32 = 256;

/// Integer types the enumeration kernels can run in.
pub trait Lane:
    Copy
    + Ord
    + Debug
    + Send
    + Sync
    + Add<Output = Self>
    + Sub<Output = Self>
    + Neg<Output = Self>
    + AddAssign
    + SubAssign
    + 'static
{
    const ZERO: Self;
    const BITS: u32;
    /// Truncating conversion; callers guarantee the value fits.
    fn from_wide(w: Wide) -> Self;
    fn to_wide(self) -> Wide;
    fn abs(self) -> Self;
    fn double(self) -> Self {
        self + self
    }
}

impl Lane for i64 {
    const ZERO: Self = 0;
    const BITS: u32 = 64;
    #[inline]
    fn from_wide(w: Wide) -> Self {
        w.as_i64()
    }
    #[inline]
    fn to_wide(self) -> Wide {
        Wide::from(self)
    }
    #[inline]
    fn abs(self) -> Self {
        i64::abs(self)
    }
}

impl Lane for i128 {
    const ZERO: Self = 0;
    const BITS: u32 = 128;
    #[inline]
    fn from_wide(w: Wide) -> Self {
        w.as_i128()
    }
    #[inline]
    fn to_wide(self) -> Wide {
        Wide::new(self)
    }
    #[inline]
    fn abs(self) -> Self {
        i128::abs(self)
    }
}

impl Lane for Wide {
    const ZERO: Self = Wide::ZERO;
    const BITS: u32 = 256;
    #[inline]
    fn from_wide(w: Wide) -> Self {
        w
    }
    #[inline]
    fn to_wide(self) -> Wide {
        self
    }
    #[inline]
    fn abs(self) -> Self {
        Wide::abs(self)
    }
}

/// Which [`Lane`] a kernel is instantiated with.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LaneWidth {
    W64,
    W128,
    W256,
}

impl LaneWidth {
    /// Narrowest lane able to hold every partial signed sum of `values`
    /// with two bits of headroom (doubled flip deltas, threshold offsets).
    pub fn for_values(values: &[Wide]) -> Self {
        let max_bits = values.iter().map(|v| bit_length(*v)).max().unwrap_or(0);
        let need = max_bits + ceil_log2(values.len().max(1) as u64) + 2;
        if need < 63 {
            LaneWidth::W64
        } else if need < 127 {
            LaneWidth::W128
        } else {
            LaneWidth::W256
        }
    }
}

/// Runs `$body` with the type alias `$lane` bound to the chosen lane type.
#[macro_export]
#[doc(hidden)]
macro_rules! with_lane {
    ($width:expr, $lane:ident => $body:expr) => {
        match $width {
            $crate::wide::LaneWidth::W64 => {
                #[allow(dead_code)]
                type $lane = i64;
                $body
            }
            $crate::wide::LaneWidth::W128 => {
                #[allow(dead_code)]
                type $lane = i128;
                $body
            }
            $crate::wide::LaneWidth::W256 => {
                #[allow(dead_code)]
                type $lane = $crate::wide::Wide;
                $body
            }
        }
    };
}

/// Number of significant bits of `|v|` (0 for zero).
pub fn bit_length(v: Wide) -> u32 {
    let a = v.unsigned_abs();
    256 - a.leading_zeros()
}

pub fn ceil_log2(x: u64) -> u32 {
    if x <= 1 {
        0
    } else {
        64 - (x - 1).leading_zeros()
    }
}

/// `2^k` as a wide integer. Panics if `k >= 255`.
pub fn pow2(k: u32) -> Wide {
    assert!(k < 255, "2^{k} does not fit the accumulator");
    Wide::ONE << k
}

/// log2 |v| from the exact bit length plus a 53-bit mantissa.
/// Returns `-inf` for zero.
pub fn log2_abs(v: Wide) -> f64 {
    let a = v.unsigned_abs();
    let len = 256 - a.leading_zeros();
    if len == 0 {
        return f64::NEG_INFINITY;
    }
    if len <= 53 {
        return (a.as_u64() as f64).log2();
    }
    let shift = len - 53;
    let mantissa = (a >> shift).as_u64() as f64;
    mantissa.log2() + shift as f64
}

/// Rounds `v * 2^scale_bits` to the nearest integer (ties away from zero),
/// exactly. Non-finite input is rejected.
pub fn quantize_f64(v: f64, scale_bits: u32) -> Result<Wide> {
    if !v.is_finite() {
        return Err(NppError::param("value", format!("{v} is not finite")));
    }
    if v == 0.0 {
        return Ok(Wide::ZERO);
    }
    let bits = v.to_bits();
    let negative = (bits >> 63) != 0;
    let biased = ((bits >> 52) & 0x7ff) as i64;
    let frac = bits & ((1u64 << 52) - 1);
    let (mantissa, exp) = if biased == 0 {
        (frac, -1074i64)
    } else {
        (frac | (1u64 << 52), biased - 1075)
    };
    let e = exp + scale_bits as i64;
    let magnitude = if e >= 0 {
        if e as u32 + 53 >= 255 {
            return Err(NppError::param(
                "value",
                format!("{v} at scale 2^-{scale_bits} overflows the accumulator"),
            ));
        }
        Wide::from(mantissa) << (e as u32)
    } else {
        let k = (-e) as u32;
        if k > 60 {
            Wide::ZERO
        } else {
            let m = mantissa as u128;
            Wide::new(((m + (1u128 << (k - 1))) >> k) as i128)
        }
    };
    Ok(if negative { -magnitude } else { magnitude })
}

/// Approximate `q * 2^-scale_bits` as binary64.
pub fn to_f64_scaled(q: Wide, scale_bits: u32) -> f64 {
    let len = bit_length(q);
    let approx = if len <= 63 {
        q.as_i64() as f64
    } else {
        let shift = len - 60;
        let top = (q.unsigned_abs() >> shift).as_u64() as f64;
        let sign = if q.is_negative() { -1.0 } else { 1.0 };
        return sign * top * 2f64.powi(shift as i32 - scale_bits as i32);
    };
    approx * 2f64.powi(-(scale_bits as i32))
}

/// Divides by `2^k` rounding to nearest, ties away from zero.
pub fn round_shift_right(v: Wide, k: u32) -> Wide {
    if k == 0 {
        return v;
    }
    let half = Wide::ONE << (k - 1);
    let mag = (v.abs() + half) >> k;
    if v.is_negative() {
        -mag
    } else {
        mag
    }
}

/// Minimal-length two's-complement hex, most significant byte first.
///
/// `0 -> "00"`, `1 -> "01"`, `-1 -> "ff"`, `128 -> "0080"`, `-128 -> "80"`.
pub fn to_hex(v: Wide) -> String {
    let bytes = v.to_be_bytes();
    let mut start = 0;
    while start < bytes.len() - 1 {
        let (b, next) = (bytes[start], bytes[start + 1]);
        let redundant = (b == 0x00 && next & 0x80 == 0) || (b == 0xff && next & 0x80 != 0);
        if !redundant {
            break;
        }
        start += 1;
    }
    let mut s = String::with_capacity(2 * (bytes.len() - start));
    for b in &bytes[start..] {
        s.push_str(&format!("{b:02x}"));
    }
    s
}

/// Inverse of [`to_hex`]. Accepts any digit count up to 64; the top bit of
/// the first digit is the sign bit.
pub fn from_hex(s: &str) -> Result<Wide> {
    if s.is_empty() || s.len() > 64 {
        return Err(NppError::Parse(format!(
            "hex value must have 1..=64 digits, got {:?}",
            s
        )));
    }
    let mut digits = Vec::with_capacity(64);
    for c in s.chars() {
        let d = c
            .to_digit(16)
            .ok_or_else(|| NppError::Parse(format!("invalid hex digit {c:?} in {s:?}")))?;
        digits.push(d as u8);
    }
    let fill = if digits[0] & 0x8 != 0 { 0xf } else { 0x0 };
    let mut full = vec![fill; 64 - digits.len()];
    full.extend_from_slice(&digits);
    let mut bytes = [0u8; 32];
    for (i, b) in bytes.iter_mut().enumerate() {
        *b = (full[2 * i] << 4) | full[2 * i + 1];
    }
    Ok(Wide::from_be_bytes(bytes))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn hex_examples() {
        assert_eq!(to_hex(Wide::ZERO), "00");
        assert_eq!(to_hex(Wide::ONE), "01");
        assert_eq!(to_hex(-Wide::ONE), "ff");
        assert_eq!(to_hex(Wide::from(128)), "0080");
        assert_eq!(to_hex(Wide::from(-128)), "80");
        assert_eq!(to_hex(Wide::from(255)), "00ff");
        assert_eq!(from_hex("f").unwrap(), -Wide::ONE);
        assert_eq!(from_hex("7").unwrap(), Wide::from(7));
        assert!(from_hex("").is_err());
        assert!(from_hex("zz").is_err());
    }

    #[test]
    fn quantize_is_exact_rounding() {
        assert_eq!(quantize_f64(0.5, 0).unwrap(), Wide::ONE);
        assert_eq!(quantize_f64(-0.5, 0).unwrap(), -Wide::ONE);
        assert_eq!(quantize_f64(0.49, 0).unwrap(), Wide::ZERO);
        assert_eq!(quantize_f64(1.0, 128).unwrap(), pow2(128));
        assert_eq!(quantize_f64(-0.75, 2).unwrap(), Wide::from(-3));
        assert!(quantize_f64(f64::NAN, 4).is_err());
    }

    #[test]
    fn log2_of_powers_is_exact() {
        for k in 0..200 {
            assert_eq!(log2_abs(pow2(k)), k as f64);
        }
        assert_eq!(log2_abs(Wide::ZERO), f64::NEG_INFINITY);
        assert!((log2_abs(Wide::from(10)) - 10f64.log2()).abs() < 1e-15);
    }

    #[test]
    fn lane_selection() {
        let small = vec![Wide::from(1i64 << 40); 64];
        assert_eq!(LaneWidth::for_values(&small), LaneWidth::W64);
        let mid = vec![pow2(80); 64];
        assert_eq!(LaneWidth::for_values(&mid), LaneWidth::W128);
        let big = vec![pow2(136); 64];
        assert_eq!(LaneWidth::for_values(&big), LaneWidth::W256);
    }

    #[test]
    fn shift_rounding() {
        assert_eq!(round_shift_right(Wide::from(5), 1), Wide::from(3));
        assert_eq!(round_shift_right(Wide::from(-5), 1), Wide::from(-3));
        assert_eq!(round_shift_right(Wide::from(4), 2), Wide::from(1));
        assert_eq!(round_shift_right(Wide::from(1), 2), Wide::ZERO);
    }

    proptest! {
        #[test]
        fn hex_round_trips(hi in any::<i128>(), lo in any::<i128>()) {
            let v = Wide::from_words(hi, lo);
            prop_assert_eq!(from_hex(&to_hex(v)).unwrap(), v);
        }

        #[test]
        fn scaled_conversion_tracks_value(x in -100.0f64..100.0, b in 16u32..120) {
            let q = quantize_f64(x, b).unwrap();
            let back = to_f64_scaled(q, b);
            prop_assert!((back - x).abs() <= 2f64.powi(-(b as i32) - 1) + 1e-15 * x.abs());
        }
    }
}
