//! Secure aggregation by Shamir secret sharing over a prime field.
//!
//! Each client fixed-point encodes its update, splits every coordinate into
//! `N_s` shares and seals each share bundle with AES-CTR for the share holder
//! that will receive it. Holders add the bundles they receive index-wise, and
//! any `t` summed bundles reconstruct the sum of all client updates.

mod channel;
mod fixed;
mod shamir;

pub use channel::{aes_block_encrypt, aes_open, aes_seal, SealedBundle, SmcSession};
pub use fixed::{fixed_decode, fixed_encode, FixedPointVector};
pub use shamir::{shamir_reconstruct, shamir_split, smc_aggregate, sum_bundles, ShareBundle};

use crate::error::{Error, Result};
use crate::modarith;

/// The Mersenne prime 2^61 − 1.
pub const MERSENNE_61: u64 = (1 << 61) - 1;

#[derive(Clone, Debug, PartialEq)]
pub struct SmcConfig {
    pub num_shares: usize,
    pub threshold: usize,
    pub prime: u64,
    pub frac_bits: u32,
    /// Integer bits allowed before the fraction; `|v| < 2^value_bits`.
    pub value_bits: u32,
    pub aes_key_bits: usize,
}

impl Default for SmcConfig {
    fn default() -> Self {
        Self::with_shares(7)
    }
}

impl SmcConfig {
    /// Defaults with `num_shares` holders and a majority threshold
    /// `⌈(N_s + 1) / 2⌉`.
    pub fn with_shares(num_shares: usize) -> Self {
        Self {
            num_shares,
            threshold: (num_shares + 2) / 2,
            prime: MERSENNE_61,
            frac_bits: 20,
            value_bits: 20,
            aes_key_bits: 128,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_shares == 0 {
            return Err(Error::Config("smc.num_shares must be at least 1".into()));
        }
        if self.threshold == 0 || self.threshold > self.num_shares {
            return Err(Error::Config(format!(
                "smc.threshold must satisfy 1 <= t <= smc.num_shares, got t={} with num_shares={}",
                self.threshold, self.num_shares
            )));
        }
        if self.prime >= 1 << 62 || !modarith::is_prime(self.prime) {
            return Err(Error::Config(format!("smc prime {} must be a prime below 2^62", self.prime)));
        }
        if self.num_shares as u64 >= self.prime {
            return Err(Error::Config("smc.num_shares must be smaller than the field prime".into()));
        }
        let bits = self.frac_bits + self.value_bits;
        if bits >= 62 || (1u64 << bits) >= self.prime / 2 {
            return Err(Error::Config(format!(
                "smc.frac_bits + value_bits = {bits} leaves no headroom below p/2"
            )));
        }
        if ![128, 192, 256].contains(&self.aes_key_bits) {
            return Err(Error::Config(format!(
                "smc.aes_key_bits must be 128, 192 or 256, got {}",
                self.aes_key_bits
            )));
        }
        Ok(())
    }
}
