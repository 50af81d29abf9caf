use super::SmcConfig;
use crate::error::{Error, Result};

/// Field encoding of a real vector with `frac_bits` fractional bits.
/// Negative values occupy the upper half of the field.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FixedPointVector {
    pub raw: Vec<u64>,
    pub frac_bits: u32,
}

pub fn fixed_encode(values: &[f64], cfg: &SmcConfig) -> Result<FixedPointVector> {
    let limit = (1u64 << cfg.value_bits) as f64;
    let scale = (1u64 << cfg.frac_bits) as f64;
    let raw = values
        .iter()
        .enumerate()
        .map(|(index, &value)| {
            if !(value.abs() < limit) {
                return Err(Error::Range { index, value });
            }
            let scaled = (value * scale).round();
            let magnitude = scaled.abs() as u64;
            Ok(if scaled < 0.0 && magnitude != 0 {
                cfg.prime - magnitude
            } else {
                magnitude
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(FixedPointVector { raw, frac_bits: cfg.frac_bits })
}

/// Inverse of [`fixed_encode`]; elements above `p/2` decode as negative.
pub fn fixed_decode(encoded: &FixedPointVector, cfg: &SmcConfig) -> Vec<f64> {
    let scale = (1u64 << encoded.frac_bits) as f64;
    let half = cfg.prime / 2;
    encoded
        .raw
        .iter()
        .map(|&r| {
            if r > half {
                -((cfg.prime - r) as f64) / scale
            } else {
                r as f64 / scale
            }
        })
        .collect()
}
