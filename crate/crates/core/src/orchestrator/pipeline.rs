//! Privacy pipelines: which stages a round's updates pass through, and the
//! server-side aggregation that undoes them.

use std::fmt;
use std::ops::Range;
use std::str::FromStr;

use crate::dp::{apply_dp_stage, server_noise, DpConfig, DpPlacement};
use crate::error::{Error, Result};
use crate::he::{CkksContext, CkksParams, KeyPair};
use crate::rng::RngStream;
use crate::smc::{
    fixed_decode, fixed_encode, shamir_reconstruct, FixedPointVector, shamir_split, ShareBundle, SmcConfig, SmcSession,
};
use crate::update::{Payload, Update};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Stage {
    DpLocal,
    DpGlobal,
    Masking,
    He,
    Smc,
}

impl Stage {
    pub fn name(self) -> &'static str {
        match self {
            Stage::DpLocal => "dp_local",
            Stage::DpGlobal => "dp_global",
            Stage::Masking => "masking",
            Stage::He => "he",
            Stage::Smc => "smc",
        }
    }
}

/// An ordered, validated stage list.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct PrivacyPipeline {
    stages: Vec<Stage>,
}

const ALLOWED: [&str; 11] = [
    "none", "ldp", "gdp", "masking", "he", "smc", "ldp+he", "gdp+he", "ldp+smc", "gdp+smc", "he+smc",
];

impl PrivacyPipeline {
    pub fn stages(&self) -> &[Stage] {
        &self.stages
    }

    pub fn has(&self, stage: Stage) -> bool {
        self.stages.contains(&stage)
    }

    pub fn dp_placement(&self) -> Option<DpPlacement> {
        self.stages.iter().find_map(|s| match s {
            Stage::DpLocal => Some(DpPlacement::Local),
            Stage::DpGlobal => Some(DpPlacement::Global),
            Stage::Masking => Some(DpPlacement::Masking),
            _ => None,
        })
    }

    pub fn uses_dp(&self) -> bool {
        self.dp_placement().is_some()
    }

    pub fn uses_he(&self) -> bool {
        self.has(Stage::He)
    }

    pub fn uses_smc(&self) -> bool {
        self.has(Stage::Smc)
    }
}

impl FromStr for PrivacyPipeline {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().to_ascii_lowercase();
        if !ALLOWED.contains(&s.as_str()) {
            return Err(Error::Config(format!(
                "privacy.pipeline must be one of {}, got {s:?}",
                ALLOWED.join(", ")
            )));
        }
        let stages = s
            .split('+')
            .filter_map(|part| match part {
                "ldp" => Some(Stage::DpLocal),
                "gdp" => Some(Stage::DpGlobal),
                "masking" => Some(Stage::Masking),
                "he" => Some(Stage::He),
                "smc" => Some(Stage::Smc),
                _ => None,
            })
            .collect();
        Ok(Self { stages })
    }
}

impl fmt::Display for PrivacyPipeline {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.stages.is_empty() {
            return f.write_str("none");
        }
        let parts: Vec<&str> = self
            .stages
            .iter()
            .map(|s| match s {
                Stage::DpLocal => "ldp",
                Stage::DpGlobal => "gdp",
                Stage::Masking => "masking",
                Stage::He => "he",
                Stage::Smc => "smc",
            })
            .collect();
        f.write_str(&parts.join("+"))
    }
}

/// Per-run cryptographic material.
///
/// With HE and SMC together, the CKKS secret key never exists in one place
/// after setup: its coefficients are Shamir-shared across the holders, and
/// `t` of them pool their shares to decrypt the aggregate.
pub struct PipelineKeys {
    he: Option<(CkksContext, KeyPair)>,
    key_shares: Option<(SmcConfig, Vec<ShareBundle>)>,
    smc: Option<SmcConfig>,
}

impl PipelineKeys {
    pub fn setup(
        pipeline: &PrivacyPipeline,
        he: &CkksParams,
        smc: &SmcConfig,
        rng: &mut RngStream,
    ) -> Result<Self> {
        let mut keys = Self { he: None, key_shares: None, smc: None };
        if pipeline.uses_he() {
            let ctx = CkksContext::new(he.clone())?;
            let pair = ctx.keygen(&mut rng.derive("he:keygen"));
            if pipeline.uses_smc() {
                let secret: Vec<f64> = pair.secret.coefficients().iter().map(|&c| c as f64).collect();
                let encoded = fixed_encode(&secret, smc)?;
                let shares = shamir_split(&encoded.raw, smc, &mut rng.derive("he:key_shares"));
                keys.key_shares = Some((smc.clone(), shares));
            }
            keys.he = Some((ctx, pair));
        } else if pipeline.uses_smc() {
            keys.smc = Some(smc.clone());
        }
        Ok(keys)
    }

    pub fn ckks(&self) -> Option<&CkksContext> {
        self.he.as_ref().map(|(c, _)| c)
    }
}

/// Inputs of one secure aggregation.
pub struct AggregationInput<'a> {
    pub pipeline: &'a PrivacyPipeline,
    pub dp: &'a DpConfig,
    pub layers: &'a [Range<usize>],
    pub keys: &'a PipelineKeys,
    pub dim: usize,
}

/// Runs every client update through the pipeline and returns the server's
/// view of `Σ Δ_k`, including any global DP noise. Client order is fixed by
/// ascending `client_id`.
pub fn secure_sum(mut updates: Vec<Update>, input: &AggregationInput<'_>, rng: &RngStream) -> Result<Vec<f64>> {
    if updates.is_empty() {
        return Err(Error::InvalidInput("no client updates to aggregate".into()));
    }
    updates.sort_by_key(|u| u.client_id);
    for u in &updates {
        let len = u.as_plain()?.len();
        if len != input.dim {
            return Err(Error::DimensionMismatch { expected: input.dim, actual: len });
        }
    }
    if input.pipeline.uses_dp() {
        updates = apply_dp_stage(updates, input.dp, input.layers, &rng.derive("dp"))?;
    }
    let noise_pending = updates.iter().any(|u| u.global_noise_pending);

    let mut sum = if let Some((ctx, pair)) = &input.keys.he {
        check_he_range(ctx, &updates)?;
        for u in &mut updates {
            let mut enc_rng = rng.derive(format!("he:encrypt:{}", u.client_id));
            let cts = ctx.encrypt_values(u.as_plain()?, &pair.public, &mut enc_rng)?;
            u.payload = Payload::Encrypted(cts);
        }
        let packed: Vec<_> = updates
            .iter()
            .map(|u| match &u.payload {
                Payload::Encrypted(c) => Ok(c.clone()),
                _ => Err(Error::PipelineOrder(format!("client {} update is not encrypted", u.client_id))),
            })
            .collect::<Result<_>>()?;
        let total = ctx.sum_packed(&packed)?;
        let secret = match &input.keys.key_shares {
            Some((smc, shares)) => {
                let pooled = &shares[..smc.threshold];
                let raw = shamir_reconstruct(pooled, smc)?;
                let coeffs = fixed_decode(&FixedPointVector { raw, frac_bits: smc.frac_bits }, smc)
                    .into_iter()
                    .map(|c| c.round() as i64)
                    .collect();
                ctx.secret_from_coefficients(coeffs)?
            }
            None => pair.secret.clone(),
        };
        ctx.decrypt_values(&total, &secret, input.dim)?
    } else if let Some(smc) = &input.keys.smc {
        let session = SmcSession::new(smc.clone(), &mut rng.derive("smc:session"))?;
        for u in &mut updates {
            let mut share_rng = rng.derive(format!("smc:share:{}", u.client_id));
            let sealed = session.share(u.as_plain()?, &mut share_rng)?;
            u.payload = Payload::Shared(sealed);
        }
        let per_client: Vec<_> = updates
            .iter()
            .map(|u| match &u.payload {
                Payload::Shared(s) => Ok(s.clone()),
                _ => Err(Error::PipelineOrder(format!("client {} update is not shared", u.client_id))),
            })
            .collect::<Result<_>>()?;
        session.aggregate(&per_client)?
    } else {
        let mut sum = vec![0.0; input.dim];
        for u in &updates {
            for (s, v) in sum.iter_mut().zip(u.as_plain()?) {
                *s += v;
            }
        }
        sum
    };

    if noise_pending {
        server_noise(&mut sum, input.dp, &mut rng.derive("dp:server"));
    }
    Ok(sum)
}

/// Rejects sums that could wrap around the first ciphertext modulus.
fn check_he_range(ctx: &CkksContext, updates: &[Update]) -> Result<()> {
    let q0 = ctx.data_primes()[0] as f64;
    let limit = q0 / 2.0 / ctx.params().scale / 4.0;
    let mut bound = 0.0;
    for u in updates {
        bound += u.as_plain()?.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    }
    if !(bound < limit) {
        return Err(Error::Capacity(format!(
            "encrypted sum bound {bound:.3e} exceeds the CKKS plaintext range {limit:.3e}"
        )));
    }
    Ok(())
}
