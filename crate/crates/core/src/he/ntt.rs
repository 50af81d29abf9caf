//! Negacyclic number-theoretic transform over `Z_p[X]/(X^n + 1)`.

use crate::error::{Error, Result};
use crate::modarith::{add_mod, inv_mod, mul_mod, pow_mod, sub_mod, is_prime};

/// Precomputed twiddles for one NTT-friendly prime `p ≡ 1 (mod 2n)`.
#[derive(Clone, Debug)]
pub struct NttTable {
    pub p: u64,
    n: usize,
    psi_rev: Vec<u64>,
    psi_rev_shoup: Vec<u64>,
    psi_inv_rev: Vec<u64>,
    psi_inv_rev_shoup: Vec<u64>,
    n_inv: u64,
    n_inv_shoup: u64,
}

#[inline]
fn shoup(w: u64, p: u64) -> u64 {
    (((w as u128) << 64) / p as u128) as u64
}

/// `a · w mod p` given `w_shoup = ⌊w · 2^64 / p⌋`; needs `p < 2^63`.
#[inline]
fn mul_shoup(a: u64, w: u64, w_shoup: u64, p: u64) -> u64 {
    let q = ((a as u128 * w_shoup as u128) >> 64) as u64;
    let r = a.wrapping_mul(w).wrapping_sub(q.wrapping_mul(p));
    if r >= p {
        r - p
    } else {
        r
    }
}

fn bit_reverse(x: usize, bits: u32) -> usize {
    if bits == 0 {
        0
    } else {
        x.reverse_bits() >> (usize::BITS - bits)
    }
}

/// A primitive `2n`-th root of unity modulo `p`.
fn primitive_root_2n(p: u64, n: usize) -> Result<u64> {
    let two_n = 2 * n as u64;
    if (p - 1) % two_n != 0 {
        return Err(Error::Config(format!("prime {p} is not 1 mod {two_n}")));
    }
    for g in 2..p.min(10_000) {
        let psi = pow_mod(g, (p - 1) / two_n, p);
        if pow_mod(psi, n as u64, p) == p - 1 {
            return Ok(psi);
        }
    }
    Err(Error::Config(format!("no primitive {two_n}-th root found mod {p}")))
}

impl NttTable {
    pub fn new(p: u64, n: usize) -> Result<Self> {
        if !n.is_power_of_two() || n < 2 {
            return Err(Error::Config(format!("ring degree {n} must be a power of two >= 2")));
        }
        if p >= 1 << 62 || !is_prime(p) {
            return Err(Error::Config(format!("modulus {p} must be a prime below 2^62")));
        }
        let psi = primitive_root_2n(p, n)?;
        let psi_inv = inv_mod(psi, p);
        let bits = n.trailing_zeros();
        let mut psi_rev = vec![0; n];
        let mut psi_inv_rev = vec![0; n];
        let (mut pw, mut pw_inv) = (1u64, 1u64);
        for i in 0..n {
            let r = bit_reverse(i, bits);
            psi_rev[r] = pw;
            psi_inv_rev[r] = pw_inv;
            pw = mul_mod(pw, psi, p);
            pw_inv = mul_mod(pw_inv, psi_inv, p);
        }
        let n_inv = inv_mod(n as u64, p);
        Ok(Self {
            p,
            n,
            psi_rev_shoup: psi_rev.iter().map(|&w| shoup(w, p)).collect(),
            psi_inv_rev_shoup: psi_inv_rev.iter().map(|&w| shoup(w, p)).collect(),
            psi_rev,
            psi_inv_rev,
            n_inv,
            n_inv_shoup: shoup(n_inv, p),
        })
    }

    /// In-place forward transform (Cooley-Tukey, bit-reversed output).
    pub fn forward(&self, a: &mut [u64]) {
        debug_assert_eq!(a.len(), self.n);
        let p = self.p;
        let mut t = self.n;
        let mut m = 1;
        while m < self.n {
            t /= 2;
            for i in 0..m {
                let (w, ws) = (self.psi_rev[m + i], self.psi_rev_shoup[m + i]);
                let start = 2 * i * t;
                for j in start..start + t {
                    let u = a[j];
                    let v = mul_shoup(a[j + t], w, ws, p);
                    a[j] = add_mod(u, v, p);
                    a[j + t] = sub_mod(u, v, p);
                }
            }
            m *= 2;
        }
    }

    /// In-place inverse transform (Gentleman-Sande), including the `1/n`.
    pub fn inverse(&self, a: &mut [u64]) {
        debug_assert_eq!(a.len(), self.n);
        let p = self.p;
        let mut t = 1;
        let mut m = self.n;
        while m > 1 {
            let h = m / 2;
            let mut start = 0;
            for i in 0..h {
                let (w, ws) = (self.psi_inv_rev[h + i], self.psi_inv_rev_shoup[h + i]);
                for j in start..start + t {
                    let u = a[j];
                    let v = a[j + t];
                    a[j] = add_mod(u, v, p);
                    a[j + t] = mul_shoup(sub_mod(u, v, p), w, ws, p);
                }
                start += 2 * t;
            }
            t *= 2;
            m = h;
        }
        for x in a.iter_mut() {
            *x = mul_shoup(*x, self.n_inv, self.n_inv_shoup, p);
        }
    }
}

/// Distinct primes `p ≡ 1 (mod 2n)` with the requested bit lengths, each the
/// largest such prime below `2^bits` not already taken.
pub fn generate_primes(bit_sizes: &[u32], n: usize) -> Result<Vec<u64>> {
    let step = 2 * n as u64;
    let mut chosen: Vec<u64> = Vec::with_capacity(bit_sizes.len());
    for &bits in bit_sizes {
        if !(bits >= 2 && bits <= 61) {
            return Err(Error::Config(format!("he.chain_bits entries must lie in [2, 61], got {bits}")));
        }
        let top = 1u64 << bits;
        let floor = 1u64 << (bits - 1);
        // largest k with k·2n + 1 < 2^bits
        let mut candidate = ((top - 2) / step) * step + 1;
        loop {
            if candidate < floor || candidate < step {
                return Err(Error::Config(format!(
                    "not enough {bits}-bit primes congruent to 1 mod {step}"
                )));
            }
            if !chosen.contains(&candidate) && is_prime(candidate) {
                chosen.push(candidate);
                break;
            }
            candidate -= step;
        }
    }
    Ok(chosen)
}

#[cfg(test)]
/// Reference negacyclic product, `O(n²)`.
pub(crate) fn schoolbook_negacyclic(a: &[u64], b: &[u64], p: u64) -> Vec<u64> {
    let n = a.len();
    let mut out = vec![0u64; n];
    for i in 0..n {
        for j in 0..n {
            let prod = mul_mod(a[i], b[j], p);
            let k = i + j;
            if k < n {
                out[k] = add_mod(out[k], prod, p);
            } else {
                out[k - n] = sub_mod(out[k - n], prod, p);
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngStream;

    #[test]
    fn primes_have_requested_shape() {
        for n in [1024, 4096, 16384] {
            let primes = generate_primes(&[60, 40, 40, 60], n).unwrap();
            assert_eq!(primes.len(), 4);
            for (p, bits) in primes.iter().zip([60, 40, 40, 60]) {
                assert!(is_prime(*p));
                assert_eq!(p % (2 * n as u64), 1);
                assert_eq!(64 - p.leading_zeros(), bits);
            }
            assert_ne!(primes[0], primes[3]);
            assert_ne!(primes[1], primes[2]);
        }
    }

    #[test]
    fn roundtrip_is_identity() {
        let table = NttTable::new(generate_primes(&[50], 64).unwrap()[0], 64).unwrap();
        let mut rng = RngStream::new(1, "ntt");
        let original: Vec<u64> = (0..64).map(|_| rng.below_u64(table.p)).collect();
        let mut a = original.clone();
        table.forward(&mut a);
        assert_ne!(a, original);
        table.inverse(&mut a);
        assert_eq!(a, original);
    }

    #[test]
    fn pointwise_product_matches_schoolbook() {
        let mut rng = RngStream::new(2, "ntt-mul");
        for (n, bits) in [(8, 17), (64, 40), (1024, 60)] {
            let p = generate_primes(&[bits], n).unwrap()[0];
            let table = NttTable::new(p, n).unwrap();
            let a: Vec<u64> = (0..n).map(|_| rng.below_u64(p)).collect();
            let b: Vec<u64> = (0..n).map(|_| rng.below_u64(p)).collect();
            let expected = schoolbook_negacyclic(&a, &b, p);
            let (mut fa, mut fb) = (a.clone(), b.clone());
            table.forward(&mut fa);
            table.forward(&mut fb);
            let mut prod: Vec<u64> = fa.iter().zip(&fb).map(|(&x, &y)| mul_mod(x, y, p)).collect();
            table.inverse(&mut prod);
            assert_eq!(prod, expected, "n = {n}");
        }
    }

    #[test]
    fn x_to_the_n_is_minus_one() {
        let n = 16;
        let p = generate_primes(&[30], n).unwrap()[0];
        let mut x = vec![0u64; n];
        x[n - 1] = 1;
        let mut x2 = vec![0u64; n];
        x2[1] = 1;
        // X^(n-1) · X = X^n = −1
        assert_eq!(schoolbook_negacyclic(&x, &x2, p)[0], p - 1);
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(NttTable::new(17, 12).is_err());
        assert!(NttTable::new(15, 4).is_err());
        assert!(NttTable::new(13, 8).is_err());
        assert!(generate_primes(&[70], 4096).is_err());
    }
}
