//! Desk-scale CKKS over `Z_Q[X]/(X^n + 1)` in RNS form.
//!
//! The coefficient modulus chain lists prime bit sizes. All but the last are
//! data primes `q_0 … q_L` and a fresh ciphertext lives at level `L`. The
//! last prime is the special modulus `P` used only during key switching.
//! Ciphertext polynomials are kept in NTT form.

mod encoding;
mod ntt;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::modarith::{add_mod, inv_mod, mul_mod, sub_mod};
use crate::rng::RngStream;
use encoding::Encoder;
pub use ntt::{generate_primes, NttTable};

#[derive(Clone, Debug, PartialEq)]
pub struct CkksParams {
    pub poly_degree: usize,
    pub coeff_modulus_bits: Vec<u32>,
    pub scale: f64,
    /// Standard deviation of the rounded-Gaussian error. Zero disables noise
    /// and is meant for tests only.
    pub error_std: f64,
}

impl Default for CkksParams {
    fn default() -> Self {
        Self::with_degree(4096)
    }
}

impl CkksParams {
    pub fn with_degree(poly_degree: usize) -> Self {
        Self {
            poly_degree,
            coeff_modulus_bits: vec![60, 40, 40, 60],
            scale: 2f64.powi(40),
            error_std: 3.2,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.poly_degree;
        if !n.is_power_of_two() || n < 4 {
            return Err(Error::Config(format!("he.poly_degree must be a power of two >= 4, got {n}")));
        }
        if self.coeff_modulus_bits.len() < 2 {
            return Err(Error::Config(
                "he.chain_bits needs at least one data prime and the special prime".into(),
            ));
        }
        if !(self.scale >= 1.0 && self.scale.log2().fract() == 0.0) {
            return Err(Error::Config(format!("he.scale must be a power of two, got {}", self.scale)));
        }
        let data_bits: u32 = self.coeff_modulus_bits[..self.coeff_modulus_bits.len() - 1].iter().sum();
        if self.scale.log2() >= data_bits as f64 {
            return Err(Error::Config("he.scale must be below the product of the data moduli".into()));
        }
        if !(self.error_std >= 0.0 && self.error_std.is_finite()) {
            return Err(Error::Config(format!("he.error_std must be nonnegative, got {}", self.error_std)));
        }
        Ok(())
    }
}

/// Integer polynomial together with the scale its slots were encoded at.
#[derive(Clone, Debug, PartialEq)]
pub struct Plaintext {
    pub coeffs: Vec<i64>,
    pub scale: f64,
}

/// Residues of one polynomial modulo a prefix of the chain (and possibly the
/// special prime), each in NTT form.
#[derive(Clone, Debug, PartialEq)]
pub struct RnsPoly {
    residues: Vec<Vec<u64>>,
}

impl RnsPoly {
    pub fn residues(&self) -> &[Vec<u64>] {
        &self.residues
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Ciphertext {
    pub c0: RnsPoly,
    pub c1: RnsPoly,
    pub level: usize,
    pub scale: f64,
}

#[derive(Clone, Debug)]
pub struct SecretKey {
    ternary: Vec<i64>,
    /// `s` over every data prime followed by the special prime.
    ntt: RnsPoly,
}

impl SecretKey {
    pub fn coefficients(&self) -> &[i64] {
        &self.ternary
    }
}

#[derive(Clone, Debug)]
pub struct PublicKey {
    pub b: RnsPoly,
    pub a: RnsPoly,
}

/// One key-switching pair per data prime, defined over data primes and `P`.
#[derive(Clone, Debug)]
pub struct RelinKey {
    b: Vec<RnsPoly>,
    a: Vec<RnsPoly>,
}

#[derive(Clone, Debug)]
pub struct KeyPair {
    pub secret: SecretKey,
    pub public: PublicKey,
    pub relin: RelinKey,
}

#[derive(Clone, Debug)]
pub struct CkksContext {
    params: CkksParams,
    /// Data primes followed by the special prime.
    tables: Vec<NttTable>,
    encoder: Encoder,
}

impl CkksContext {
    pub fn new(params: CkksParams) -> Result<Self> {
        params.validate()?;
        let primes = generate_primes(&params.coeff_modulus_bits, params.poly_degree)?;
        let tables = primes
            .iter()
            .map(|&p| NttTable::new(p, params.poly_degree))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            encoder: Encoder::new(params.poly_degree),
            params,
            tables,
        })
    }

    pub fn params(&self) -> &CkksParams {
        &self.params
    }

    pub fn slots(&self) -> usize {
        self.params.poly_degree / 2
    }

    /// Highest data level; fresh ciphertexts start here.
    pub fn max_level(&self) -> usize {
        self.tables.len() - 2
    }

    pub fn data_primes(&self) -> Vec<u64> {
        self.tables[..self.tables.len() - 1].iter().map(|t| t.p).collect()
    }

    pub fn special_prime(&self) -> u64 {
        self.tables[self.tables.len() - 1].p
    }

    fn special(&self) -> usize {
        self.tables.len() - 1
    }

    fn n(&self) -> usize {
        self.params.poly_degree
    }

    pub fn encode(&self, z: &[Complex64], scale: f64) -> Result<Plaintext> {
        self.encoder.encode(z, scale)
    }

    pub fn encode_real(&self, z: &[f64]) -> Result<Plaintext> {
        let complex: Vec<Complex64> = z.iter().map(|&x| Complex64::new(x, 0.0)).collect();
        self.encode(&complex, self.params.scale)
    }

    pub fn decode(&self, pt: &Plaintext) -> Vec<Complex64> {
        self.encoder.decode(pt)
    }

    pub fn decode_real(&self, pt: &Plaintext) -> Vec<f64> {
        self.decode(pt).into_iter().map(|c| c.re).collect()
    }

    fn level_indices(&self, level: usize) -> Vec<usize> {
        (0..=level).collect()
    }

    fn with_special(&self, level: usize) -> Vec<usize> {
        let mut idx = self.level_indices(level);
        idx.push(self.special());
        idx
    }

    fn from_signed(&self, coeffs: &[i64], indices: &[usize]) -> RnsPoly {
        RnsPoly {
            residues: indices
                .iter()
                .map(|&i| {
                    let t = &self.tables[i];
                    let mut r: Vec<u64> = coeffs.iter().map(|&c| reduce_signed(c, t.p)).collect();
                    t.forward(&mut r);
                    r
                })
                .collect(),
        }
    }

    fn sample_ternary(&self, rng: &mut RngStream) -> Vec<i64> {
        (0..self.n()).map(|_| rng.below(3) as i64 - 1).collect()
    }

    fn sample_error(&self, rng: &mut RngStream) -> Vec<i64> {
        if self.params.error_std == 0.0 {
            return vec![0; self.n()];
        }
        (0..self.n())
            .map(|_| (rng.gaussian() * self.params.error_std).round() as i64)
            .collect()
    }

    /// Uniform residues; uniform in NTT form is uniform in coefficient form.
    fn sample_uniform(&self, indices: &[usize], rng: &mut RngStream) -> RnsPoly {
        RnsPoly {
            residues: indices
                .iter()
                .map(|&i| (0..self.n()).map(|_| rng.below_u64(self.tables[i].p)).collect())
                .collect(),
        }
    }

    fn primes_of(&self, indices: &[usize]) -> Vec<u64> {
        indices.iter().map(|&i| self.tables[i].p).collect()
    }

    pub fn keygen(&self, rng: &mut RngStream) -> KeyPair {
        let ternary = self.sample_ternary(rng);
        self.keygen_from_secret(ternary, rng)
    }

    /// Key material for an externally supplied ternary secret.
    pub fn keygen_from_secret(&self, ternary: Vec<i64>, rng: &mut RngStream) -> KeyPair {
        let all = self.with_special(self.max_level());
        let s = self.from_signed(&ternary, &all);

        let top = self.level_indices(self.max_level());
        let a = self.sample_uniform(&top, rng);
        let e = self.from_signed(&self.sample_error(rng), &top);
        let primes = self.primes_of(&top);
        let b = poly_add(&poly_neg(&poly_mul(&a, &s, &primes), &primes), &e, &primes);
        let public = PublicKey { b, a };

        let primes_all = self.primes_of(&all);
        let s2 = poly_mul(&s, &s, &primes_all);
        let p_special = self.special_prime();
        let mut relin_b = Vec::new();
        let mut relin_a = Vec::new();
        for j in 0..=self.max_level() {
            let a_j = self.sample_uniform(&all, rng);
            let e_j = self.from_signed(&self.sample_error(rng), &all);
            let mut b_j = poly_add(&poly_neg(&poly_mul(&a_j, &s, &primes_all), &primes_all), &e_j, &primes_all);
            // add P · g_j · s², which is (P mod q_j)·s² at q_j and zero elsewhere
            let q_j = primes_all[j];
            let factor = p_special % q_j;
            for (x, &y) in b_j.residues[j].iter_mut().zip(&s2.residues[j]) {
                *x = add_mod(*x, mul_mod(factor, y, q_j), q_j);
            }
            relin_b.push(b_j);
            relin_a.push(a_j);
        }
        KeyPair {
            secret: SecretKey { ternary, ntt: s },
            public,
            relin: RelinKey { b: relin_b, a: relin_a },
        }
    }

    /// Rebuilds a decryption key from its ternary coefficients, for example
    /// after reconstructing them from secret shares.
    pub fn secret_from_coefficients(&self, ternary: Vec<i64>) -> Result<SecretKey> {
        if ternary.len() != self.n() {
            return Err(Error::DimensionMismatch { expected: self.n(), actual: ternary.len() });
        }
        if let Some(&bad) = ternary.iter().find(|c| !(-1..=1).contains(*c)) {
            return Err(Error::InvalidInput(format!("secret coefficient {bad} is not ternary")));
        }
        let ntt = self.from_signed(&ternary, &self.with_special(self.max_level()));
        Ok(SecretKey { ternary, ntt })
    }

    pub fn encrypt(&self, pt: &Plaintext, pk: &PublicKey, rng: &mut RngStream) -> Ciphertext {
        let level = self.max_level();
        let idx = self.level_indices(level);
        let primes = self.primes_of(&idx);
        let u = self.from_signed(&self.sample_ternary(rng), &idx);
        let e0 = self.from_signed(&self.sample_error(rng), &idx);
        let e1 = self.from_signed(&self.sample_error(rng), &idx);
        let m = self.from_signed(&pt.coeffs, &idx);
        let c0 = poly_add(&poly_add(&poly_mul(&pk.b, &u, &primes), &e0, &primes), &m, &primes);
        let c1 = poly_add(&poly_mul(&pk.a, &u, &primes), &e1, &primes);
        Ciphertext { c0, c1, level, scale: pt.scale }
    }

    /// Decrypts using the `q_0` residue only, so the noisy message must have
    /// coefficients below `q_0 / 2` in magnitude.
    pub fn decrypt(&self, ct: &Ciphertext, sk: &SecretKey) -> Plaintext {
        let t = &self.tables[0];
        let p = t.p;
        let mut m: Vec<u64> = ct.c0.residues[0]
            .iter()
            .zip(&ct.c1.residues[0])
            .zip(&sk.ntt.residues[0])
            .map(|((&c0, &c1), &s)| add_mod(c0, mul_mod(c1, s, p), p))
            .collect();
        t.inverse(&mut m);
        Plaintext {
            coeffs: m.iter().map(|&x| centered(x, p)).collect(),
            scale: ct.scale,
        }
    }

    pub fn he_add(&self, a: &Ciphertext, b: &Ciphertext) -> Result<Ciphertext> {
        check_aligned(a, b)?;
        let primes = self.primes_of(&self.level_indices(a.level));
        Ok(Ciphertext {
            c0: poly_add(&a.c0, &b.c0, &primes),
            c1: poly_add(&a.c1, &b.c1, &primes),
            level: a.level,
            scale: a.scale,
        })
    }

    /// Slot-wise product followed by relinearization and one rescale.
    pub fn he_mul_rescale(&self, a: &Ciphertext, b: &Ciphertext, rlk: &RelinKey) -> Result<Ciphertext> {
        if a.level != b.level {
            return Err(Error::Alignment(format!("levels {} and {} differ", a.level, b.level)));
        }
        if a.level == 0 {
            return Err(Error::Depth { level: 0 });
        }
        let level = a.level;
        let primes = self.primes_of(&self.level_indices(level));
        let d0 = poly_mul(&a.c0, &b.c0, &primes);
        let d1 = poly_add(&poly_mul(&a.c0, &b.c1, &primes), &poly_mul(&a.c1, &b.c0, &primes), &primes);
        let d2 = poly_mul(&a.c1, &b.c1, &primes);
        let (k0, k1) = self.key_switch(&d2, level, rlk);
        let ct = Ciphertext {
            c0: poly_add(&d0, &k0, &primes),
            c1: poly_add(&d1, &k1, &primes),
            level,
            scale: a.scale * b.scale,
        };
        Ok(self.rescale(&ct))
    }

    /// Returns `(k0, k1)` with `k0 + k1·s ≈ d2·s²` at `level`.
    fn key_switch(&self, d2: &RnsPoly, level: usize, rlk: &RelinKey) -> (RnsPoly, RnsPoly) {
        let n = self.n();
        let targets = self.with_special(level);
        let mut acc0 = vec![vec![0u64; n]; targets.len()];
        let mut acc1 = vec![vec![0u64; n]; targets.len()];
        for j in 0..=level {
            let mut digit = d2.residues[j].clone();
            self.tables[j].inverse(&mut digit);
            for (slot, &ti) in targets.iter().enumerate() {
                let t = &self.tables[ti];
                let mut lifted: Vec<u64> = digit.iter().map(|&x| x % t.p).collect();
                t.forward(&mut lifted);
                let (kb, ka) = (&rlk.b[j].residues[ti], &rlk.a[j].residues[ti]);
                for i in 0..n {
                    acc0[slot][i] = add_mod(acc0[slot][i], mul_mod(lifted[i], kb[i], t.p), t.p);
                    acc1[slot][i] = add_mod(acc1[slot][i], mul_mod(lifted[i], ka[i], t.p), t.p);
                }
            }
        }
        (self.mod_down(acc0, level), self.mod_down(acc1, level))
    }

    /// Divides a polynomial over `q_0..q_level, P` by `P` with rounding.
    fn mod_down(&self, mut residues: Vec<Vec<u64>>, level: usize) -> RnsPoly {
        let special = self.special();
        let p_special = self.tables[special].p;
        let mut last = residues.pop().expect("special residue present");
        self.tables[special].inverse(&mut last);
        let centered_last: Vec<i64> = last.iter().map(|&x| centered(x, p_special)).collect();
        for (i, r) in residues.iter_mut().enumerate().take(level + 1) {
            self.divide_out(r, &centered_last, i, p_special);
        }
        RnsPoly { residues }
    }

    /// `r ← (r − t) · divisor⁻¹ mod q_i` where `t` is the centered remainder.
    fn divide_out(&self, r: &mut [u64], remainder: &[i64], i: usize, divisor: u64) {
        let t = &self.tables[i];
        let q = t.p;
        let mut rem: Vec<u64> = remainder.iter().map(|&x| reduce_signed(x, q)).collect();
        t.forward(&mut rem);
        let inv = inv_mod(divisor % q, q);
        for (x, &y) in r.iter_mut().zip(&rem) {
            *x = mul_mod(sub_mod(*x, y, q), inv, q);
        }
    }

    /// Drops the top prime, dividing the message and scale by it.
    pub fn rescale(&self, ct: &Ciphertext) -> Ciphertext {
        let level = ct.level;
        let q_top = self.tables[level].p;
        let rescale_poly = |poly: &RnsPoly| {
            let mut residues = poly.residues[..level].to_vec();
            let mut top = poly.residues[level].clone();
            self.tables[level].inverse(&mut top);
            let rem: Vec<i64> = top.iter().map(|&x| centered(x, q_top)).collect();
            for (i, r) in residues.iter_mut().enumerate() {
                self.divide_out(r, &rem, i, q_top);
            }
            RnsPoly { residues }
        };
        Ciphertext {
            c0: rescale_poly(&ct.c0),
            c1: rescale_poly(&ct.c1),
            level: level - 1,
            scale: ct.scale / q_top as f64,
        }
    }

    /// Packs `values` into consecutive `n/2`-slot chunks.
    pub fn encrypt_values(&self, values: &[f64], pk: &PublicKey, rng: &mut RngStream) -> Result<Vec<Ciphertext>> {
        values
            .chunks(self.slots())
            .map(|chunk| Ok(self.encrypt(&self.encode_real(chunk)?, pk, rng)))
            .collect()
    }

    pub fn decrypt_values(&self, cts: &[Ciphertext], sk: &SecretKey, len: usize) -> Result<Vec<f64>> {
        let needed = len.div_ceil(self.slots());
        if cts.len() != needed {
            return Err(Error::DimensionMismatch { expected: needed, actual: cts.len() });
        }
        let mut out = Vec::with_capacity(len);
        for ct in cts {
            out.extend(self.decode_real(&self.decrypt(ct, sk)));
        }
        out.truncate(len);
        Ok(out)
    }

    /// Chunk-wise homomorphic sum of several packed vectors.
    pub fn sum_packed(&self, packed: &[Vec<Ciphertext>]) -> Result<Vec<Ciphertext>> {
        let first = packed
            .first()
            .ok_or_else(|| Error::InvalidInput("no ciphertexts to sum".into()))?;
        let mut total = first.clone();
        for other in &packed[1..] {
            if other.len() != total.len() {
                return Err(Error::DimensionMismatch { expected: total.len(), actual: other.len() });
            }
            for (acc, ct) in total.iter_mut().zip(other) {
                *acc = self.he_add(acc, ct)?;
            }
        }
        Ok(total)
    }
}

fn check_aligned(a: &Ciphertext, b: &Ciphertext) -> Result<()> {
    if a.level != b.level {
        return Err(Error::Alignment(format!("levels {} and {} differ", a.level, b.level)));
    }
    if ((a.scale - b.scale) / a.scale).abs() > 1e-9 {
        return Err(Error::Alignment(format!("scales {:e} and {:e} differ", a.scale, b.scale)));
    }
    Ok(())
}

fn reduce_signed(x: i64, p: u64) -> u64 {
    x.rem_euclid(p as i64) as u64
}

fn centered(x: u64, p: u64) -> i64 {
    if x > p / 2 {
        x as i64 - p as i64
    } else {
        x as i64
    }
}

fn zip_residues(a: &RnsPoly, b: &RnsPoly, primes: &[u64], f: impl Fn(u64, u64, u64) -> u64) -> RnsPoly {
    RnsPoly {
        residues: a
            .residues
            .iter()
            .zip(&b.residues)
            .zip(primes)
            .map(|((ra, rb), &p)| ra.iter().zip(rb).map(|(&x, &y)| f(x, y, p)).collect())
            .collect(),
    }
}

fn poly_add(a: &RnsPoly, b: &RnsPoly, primes: &[u64]) -> RnsPoly {
    zip_residues(a, b, primes, add_mod)
}

fn poly_mul(a: &RnsPoly, b: &RnsPoly, primes: &[u64]) -> RnsPoly {
    zip_residues(a, b, primes, mul_mod)
}

fn poly_neg(a: &RnsPoly, primes: &[u64]) -> RnsPoly {
    RnsPoly {
        residues: a
            .residues
            .iter()
            .zip(primes)
            .map(|(r, &p)| r.iter().map(|&x| sub_mod(0, x, p)).collect())
            .collect(),
    }
}
