use aes::cipher::{BlockEncrypt, KeyInit, KeyIvInit, StreamCipher};
use aes::{Aes128, Aes192, Aes256};
use sha2::{Digest, Sha256};

use super::{fixed_encode, shamir_split, smc_aggregate, ShareBundle, SmcConfig};
use crate::error::{Error, Result};
use crate::rng::RngStream;
use rand::RngCore;

const CHECKSUM_LEN: usize = 8;

fn checksum(message: &[u8]) -> [u8; CHECKSUM_LEN] {
    let digest = Sha256::digest(message);
    digest[..CHECKSUM_LEN].try_into().expect("digest is 32 bytes")
}

fn apply_ctr(key: &[u8], nonce: &[u8; 16], data: &mut [u8]) -> Result<()> {
    match key.len() {
        16 => ctr::Ctr128BE::<Aes128>::new(key.into(), nonce.into()).apply_keystream(data),
        24 => ctr::Ctr128BE::<Aes192>::new(key.into(), nonce.into()).apply_keystream(data),
        32 => ctr::Ctr128BE::<Aes256>::new(key.into(), nonce.into()).apply_keystream(data),
        n => return Err(Error::Config(format!("AES key must be 16, 24 or 32 bytes, got {n}"))),
    }
    Ok(())
}

/// AES-CTR encryption of `message` followed by an encrypted 8-byte SHA-256
/// checksum, so the output is `message.len() + 8` bytes.
pub fn aes_seal(message: &[u8], key: &[u8], nonce: &[u8; 16]) -> Result<Vec<u8>> {
    let mut out = Vec::with_capacity(message.len() + CHECKSUM_LEN);
    out.extend_from_slice(message);
    out.extend_from_slice(&checksum(message));
    apply_ctr(key, nonce, &mut out)?;
    Ok(out)
}

pub fn aes_open(sealed: &[u8], key: &[u8], nonce: &[u8; 16]) -> Result<Vec<u8>> {
    if sealed.len() < CHECKSUM_LEN {
        return Err(Error::Authenticity("sealed payload shorter than its checksum".into()));
    }
    let mut plain = sealed.to_vec();
    apply_ctr(key, nonce, &mut plain)?;
    let tag = plain.split_off(plain.len() - CHECKSUM_LEN);
    if tag != checksum(&plain) {
        return Err(Error::Authenticity("checksum mismatch (wrong key or corrupted payload)".into()));
    }
    Ok(plain)
}

/// The raw block cipher on one 16-byte block.
pub fn aes_block_encrypt(key: &[u8], block: &[u8; 16]) -> Result<[u8; 16]> {
    let mut b = (*block).into();
    match key.len() {
        16 => Aes128::new(key.into()).encrypt_block(&mut b),
        24 => Aes192::new(key.into()).encrypt_block(&mut b),
        32 => Aes256::new(key.into()).encrypt_block(&mut b),
        n => return Err(Error::Config(format!("AES key must be 16, 24 or 32 bytes, got {n}"))),
    }
    Ok(b.into())
}

/// A share bundle in transit to its holder.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SealedBundle {
    pub share_index: u64,
    pub nonce: [u8; 16],
    pub ciphertext: Vec<u8>,
}

/// One round's share holders and the symmetric keys clients use to reach them.
#[derive(Clone, Debug)]
pub struct SmcSession {
    cfg: SmcConfig,
    holder_keys: Vec<Vec<u8>>,
}

impl SmcSession {
    pub fn new(cfg: SmcConfig, rng: &mut RngStream) -> Result<Self> {
        cfg.validate()?;
        let holder_keys = (0..cfg.num_shares)
            .map(|_| {
                let mut key = vec![0u8; cfg.aes_key_bits / 8];
                rng.fill_bytes(&mut key);
                key
            })
            .collect();
        Ok(Self { cfg, holder_keys })
    }

    pub fn config(&self) -> &SmcConfig {
        &self.cfg
    }

    /// Client side: encode, split and seal one bundle per holder.
    pub fn share(&self, values: &[f64], rng: &mut RngStream) -> Result<Vec<SealedBundle>> {
        let encoded = fixed_encode(values, &self.cfg)?;
        shamir_split(&encoded.raw, &self.cfg, rng)
            .into_iter()
            .map(|bundle| {
                let mut nonce = [0u8; 16];
                rng.fill_bytes(&mut nonce);
                let payload: Vec<u8> = bundle.values.iter().flat_map(|v| v.to_le_bytes()).collect();
                let key = &self.holder_keys[bundle.share_index as usize - 1];
                Ok(SealedBundle {
                    share_index: bundle.share_index,
                    nonce,
                    ciphertext: aes_seal(&payload, key, &nonce)?,
                })
            })
            .collect()
    }

    /// Holder side: decrypt and parse one bundle.
    pub fn open(&self, sealed: &SealedBundle) -> Result<ShareBundle> {
        let key = usize::try_from(sealed.share_index)
            .ok()
            .and_then(|i| i.checked_sub(1))
            .and_then(|i| self.holder_keys.get(i))
            .ok_or_else(|| Error::Protocol(format!("no holder for share index {}", sealed.share_index)))?;
        let payload = aes_open(&sealed.ciphertext, key, &sealed.nonce)?;
        if payload.len() % 8 != 0 {
            return Err(Error::Protocol("share payload is not a whole number of field elements".into()));
        }
        let values = payload
            .chunks_exact(8)
            .map(|c| u64::from_le_bytes(c.try_into().expect("chunk of 8")))
            .collect();
        Ok(ShareBundle { share_index: sealed.share_index, values })
    }

    /// Opens every client's bundles, sums index-wise and reconstructs.
    pub fn aggregate(&self, per_client: &[Vec<SealedBundle>]) -> Result<Vec<f64>> {
        let opened = per_client
            .iter()
            .map(|set| set.iter().map(|b| self.open(b)).collect::<Result<Vec<_>>>())
            .collect::<Result<Vec<_>>>()?;
        smc_aggregate(&opened, &self.cfg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn hex(s: &str) -> Vec<u8> {
        (0..s.len()).step_by(2).map(|i| u8::from_str_radix(&s[i..i + 2], 16).unwrap()).collect()
    }

    fn block(s: &str) -> [u8; 16] {
        hex(s).try_into().unwrap()
    }

    #[test]
    fn block_cipher_known_answers() {
        let pt = block("00112233445566778899aabbccddeeff");
        let cases = [
            ("000102030405060708090a0b0c0d0e0f", "69c4e0d86a7b0430d8cdb78070b4c55a"),
            ("000102030405060708090a0b0c0d0e0f1011121314151617", "dda97ca4864cdfe06eaf70a0ec0d7191"),
            (
                "000102030405060708090a0b0c0d0e0f101112131415161718191a1b1c1d1e1f",
                "8ea2b7ca516745bfeafc49904b496089",
            ),
        ];
        for (key, ct) in cases {
            assert_eq!(aes_block_encrypt(&hex(key), &pt).unwrap(), block(ct));
        }
    }

    #[test]
    fn ctr_known_answer() {
        let key = hex("2b7e151628aed2a6abf7158809cf4f3c");
        let iv = block("f0f1f2f3f4f5f6f7f8f9fafbfcfdfeff");
        let sealed = aes_seal(&hex("6bc1bee22e409f96e93d7e117393172a"), &key, &iv).unwrap();
        assert_eq!(&sealed[..16], &hex("874d6191b620e3261bef6864990db6ce")[..]);
    }

    #[test]
    fn empty_message_carries_only_the_checksum() {
        let key = [7u8; 16];
        let sealed = aes_seal(&[], &key, &[0; 16]).unwrap();
        assert_eq!(sealed.len(), 8);
        assert!(aes_open(&sealed, &key, &[0; 16]).unwrap().is_empty());
    }

    #[test]
    fn wrong_key_fails_authenticity() {
        let sealed = aes_seal(b"gradient shares", &[1u8; 24], &[3; 16]).unwrap();
        assert_eq!(aes_open(&sealed, &[1u8; 24], &[3; 16]).unwrap(), b"gradient shares");
        assert!(matches!(aes_open(&sealed, &[2u8; 24], &[3; 16]), Err(Error::Authenticity(_))));
    }

    #[test]
    fn distinct_nonces_give_distinct_ciphertexts() {
        let key = [9u8; 32];
        let a = aes_seal(b"same", &key, &[0; 16]).unwrap();
        let b = aes_seal(b"same", &key, &[1; 16]).unwrap();
        assert_ne!(a, b);
        assert_eq!(aes_open(&a, &key, &[0; 16]).unwrap(), aes_open(&b, &key, &[1; 16]).unwrap());
    }

    #[test]
    fn bad_key_length_is_config_error() {
        assert!(matches!(aes_seal(b"x", &[0; 10], &[0; 16]), Err(Error::Config(_))));
    }

    #[test]
    fn session_aggregates_sealed_shares() {
        let mut rng = RngStream::new(8, "session");
        let session = SmcSession::new(SmcConfig::default(), &mut rng).unwrap();
        let vectors: Vec<Vec<f64>> = (0..5)
            .map(|_| (0..10).map(|_| rng.uniform() * 2.0 - 1.0).collect())
            .collect();
        let sealed: Vec<Vec<SealedBundle>> = vectors.iter().map(|v| session.share(v, &mut rng).unwrap()).collect();
        let sum = session.aggregate(&sealed).unwrap();
        for i in 0..10 {
            let want: f64 = vectors.iter().map(|v| v[i]).sum();
            assert!((sum[i] - want).abs() <= 5.0 * 2f64.powi(-21));
        }
    }
}
