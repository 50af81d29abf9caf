use crate::error::{Error, Result};
use crate::rng::RngStream;
use crate::smc::{fixed_decode, fixed_encode, shamir_reconstruct, shamir_split, FixedPointVector, ShareBundle, SmcConfig};

/// Share-reconstruction attack success rate. Each trial shares a random
/// secret in `(−8, 8)`; the adversary holds `compromised` random bundles and
/// forges uniform values for any missing up to the threshold. A trial
/// succeeds when the reconstruction decodes within `eps_tol` of the secret.
pub fn sra_success(cfg: &SmcConfig, compromised: usize, trials: usize, eps_tol: f64, rng: &mut RngStream) -> Result<f64> {
    cfg.validate()?;
    if compromised > cfg.num_shares {
        return Err(Error::InvalidInput(format!(
            "cannot compromise {compromised} of {} share holders",
            cfg.num_shares
        )));
    }
    if trials == 0 {
        return Err(Error::InvalidInput("sra_success needs at least one trial".into()));
    }
    let mut successes = 0usize;
    for _ in 0..trials {
        let secret = rng.uniform() * 16.0 - 8.0;
        let encoded = fixed_encode(&[secret], cfg)?;
        let mut bundles = shamir_split(&encoded.raw, cfg, rng);
        rng.shuffle(&mut bundles);
        let (leaked, rest) = bundles.split_at(compromised);
        let mut view: Vec<ShareBundle> = leaked.to_vec();
        for honest in rest.iter().take(cfg.threshold.saturating_sub(compromised)) {
            view.push(ShareBundle {
                share_index: honest.share_index,
                values: vec![rng.below_u64(cfg.prime)],
            });
        }
        let raw = shamir_reconstruct(&view, cfg)?;
        let guess = fixed_decode(&FixedPointVector { raw, frac_bits: cfg.frac_bits }, cfg)[0];
        if (guess - secret).abs() < eps_tol {
            successes += 1;
        }
    }
    Ok(successes as f64 / trials as f64)
}
