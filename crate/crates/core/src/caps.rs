//! Enumeration work caps.

use crate::error::{NppError, Result};

/// Environment variable overriding every cap with `2^bits` work units.
pub const CAP_BITS_ENV: &str = "NPPLAB_CAP_BITS";

/// Hard limits on the exponential kernels.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Caps {
    /// Brute force visits `2^(n-1)` states; requires `n - 1 <= gray_state_bits`.
    pub gray_state_bits: u32,
    /// Explicit solution listing; requires `n - 1 <= enum_state_bits`.
    pub enum_state_bits: u32,
    /// Meet-in-the-middle tables hold `2^ceil(n/2)` sums; requires `ceil(n/2) <= mitm_half_bits`.
    pub mitm_half_bits: u32,
    /// Hamming-ball searches visit at most this many points.
    pub ball_work: u64,
}

impl Default for Caps {
    fn default() -> Self {
        Caps {
            gray_state_bits: 33,
            enum_state_bits: 29,
            mitm_half_bits: 22,
            ball_work: 10_000_000,
        }
    }
}

impl Caps {
    /// Defaults, or uniform `2^b` caps when `NPPLAB_CAP_BITS=b` is set.
    pub fn from_env() -> Result<Self> {
        match std::env::var(CAP_BITS_ENV) {
            Ok(raw) => {
                let bits: u32 = raw.trim().parse().map_err(|_| {
                    NppError::param("NPPLAB_CAP_BITS", format!("{raw:?} is not an integer"))
                })?;
                if !(1..=40).contains(&bits) {
                    return Err(NppError::param("NPPLAB_CAP_BITS", "must be in 1..=40"));
                }
                Ok(Self::uniform(bits))
            }
            Err(_) => Ok(Self::default()),
        }
    }

    pub fn uniform(bits: u32) -> Self {
        Caps {
            gray_state_bits: bits,
            enum_state_bits: bits,
            mitm_half_bits: bits,
            ball_work: 1u64 << bits,
        }
    }

    pub(crate) fn check_gray(&self, n: usize, what: &str) -> Result<()> {
        if n.saturating_sub(1) as u64 > self.gray_state_bits as u64 {
            return Err(NppError::CapExceeded(format!(
                "{what} at n = {n} exceeds the cap n <= {}",
                self.gray_state_bits + 1
            )));
        }
        Ok(())
    }

    pub(crate) fn check_enum(&self, n: usize) -> Result<()> {
        if n.saturating_sub(1) as u64 > self.enum_state_bits as u64 {
            return Err(NppError::CapExceeded(format!(
                "solution enumeration at n = {n} exceeds the cap n <= {}",
                self.enum_state_bits + 1
            )));
        }
        Ok(())
    }

    pub(crate) fn check_mitm(&self, n: usize) -> Result<()> {
        if n.div_ceil(2) as u64 > self.mitm_half_bits as u64 {
            return Err(NppError::CapExceeded(format!(
                "meet-in-the-middle at n = {n} needs 2^{} sums per half, cap is 2^{}",
                n.div_ceil(2),
                self.mitm_half_bits
            )));
        }
        Ok(())
    }
}
