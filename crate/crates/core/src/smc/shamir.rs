use super::{fixed_decode, FixedPointVector, SmcConfig};
use crate::error::{Error, Result};
use crate::modarith::{add_mod, inv_mod, mul_mod, sub_mod};
use crate::rng::RngStream;

/// Evaluations of every coordinate's sharing polynomial at `x = share_index`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ShareBundle {
    pub share_index: u64,
    pub values: Vec<u64>,
}

/// Shares each field element with a fresh random polynomial of degree `t − 1`.
/// Bundle `j` (1-based) holds the evaluations at `x = j`.
pub fn shamir_split(secret: &[u64], cfg: &SmcConfig, rng: &mut RngStream) -> Vec<ShareBundle> {
    let p = cfg.prime;
    let mut bundles: Vec<ShareBundle> = (1..=cfg.num_shares as u64)
        .map(|share_index| ShareBundle {
            share_index,
            values: Vec::with_capacity(secret.len()),
        })
        .collect();
    let mut coeffs = vec![0u64; cfg.threshold];
    for &s in secret {
        coeffs[0] = s % p;
        for c in coeffs.iter_mut().skip(1) {
            *c = rng.below_u64(p);
        }
        for bundle in &mut bundles {
            let x = bundle.share_index;
            let y = coeffs.iter().rev().fold(0, |acc, &c| add_mod(mul_mod(acc, x, p), c, p));
            bundle.values.push(y);
        }
    }
    bundles
}

/// Lagrange interpolation at zero through every supplied bundle.
pub fn shamir_reconstruct(bundles: &[ShareBundle], cfg: &SmcConfig) -> Result<Vec<u64>> {
    if bundles.len() < cfg.threshold {
        return Err(Error::InsufficientShares {
            needed: cfg.threshold,
            got: bundles.len(),
        });
    }
    let p = cfg.prime;
    let xs: Vec<u64> = bundles.iter().map(|b| b.share_index % p).collect();
    for (i, &x) in xs.iter().enumerate() {
        if x == 0 || xs[..i].contains(&x) {
            return Err(Error::Protocol(format!("share index {x} is zero or repeated")));
        }
    }
    let len = bundles[0].values.len();
    if bundles.iter().any(|b| b.values.len() != len) {
        return Err(Error::Protocol("share bundles have different lengths".into()));
    }
    let lambdas: Vec<u64> = xs
        .iter()
        .enumerate()
        .map(|(j, &xj)| {
            let (num, den) = xs.iter().enumerate().filter(|&(m, _)| m != j).fold(
                (1u64, 1u64),
                |(num, den), (_, &xm)| (mul_mod(num, xm, p), mul_mod(den, sub_mod(xm, xj, p), p)),
            );
            mul_mod(num, inv_mod(den, p), p)
        })
        .collect();
    Ok((0..len)
        .map(|i| {
            bundles
                .iter()
                .zip(&lambdas)
                .fold(0, |acc, (b, &l)| add_mod(acc, mul_mod(b.values[i], l, p), p))
        })
        .collect())
}

/// Index-wise field sum of several clients' bundle sets. Every set must list
/// the same share indices in the same order.
pub fn sum_bundles(per_client: &[Vec<ShareBundle>], cfg: &SmcConfig) -> Result<Vec<ShareBundle>> {
    let first = per_client
        .first()
        .ok_or_else(|| Error::Protocol("no client share sets to aggregate".into()))?;
    let mut total = first.clone();
    for set in &per_client[1..] {
        if set.len() != total.len() {
            return Err(Error::Protocol(format!(
                "client sent {} bundles, expected {}",
                set.len(),
                total.len()
            )));
        }
        for (acc, b) in total.iter_mut().zip(set) {
            if acc.share_index != b.share_index || acc.values.len() != b.values.len() {
                return Err(Error::Protocol(format!(
                    "share index {} misaligned with {}",
                    b.share_index, acc.share_index
                )));
            }
            for (a, &v) in acc.values.iter_mut().zip(&b.values) {
                *a = add_mod(*a, v, cfg.prime);
            }
        }
    }
    Ok(total)
}

/// Sums share sets, reconstructs and fixed-point decodes the aggregate.
pub fn smc_aggregate(per_client: &[Vec<ShareBundle>], cfg: &SmcConfig) -> Result<Vec<f64>> {
    let summed = sum_bundles(per_client, cfg)?;
    let raw = shamir_reconstruct(&summed, cfg)?;
    Ok(fixed_decode(&FixedPointVector { raw, frac_bits: cfg.frac_bits }, cfg))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::smc::fixed_encode;
    use proptest::prelude::*;

    fn subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
        if k == 0 {
            return vec![vec![]];
        }
        if n < k {
            return vec![];
        }
        let mut with_last = subsets(n - 1, k - 1);
        with_last.iter_mut().for_each(|s| s.push(n - 1));
        let mut out = subsets(n - 1, k);
        out.extend(with_last);
        out
    }

    fn random_secret(len: usize, cfg: &SmcConfig, rng: &mut RngStream) -> Vec<u64> {
        (0..len).map(|_| rng.below_u64(cfg.prime)).collect()
    }

    #[test]
    fn threshold_one_copies_the_secret() {
        let cfg = SmcConfig { threshold: 1, ..SmcConfig::default() };
        let secret = vec![1, 2, 3];
        for b in shamir_split(&secret, &cfg, &mut RngStream::new(0, "t1")) {
            assert_eq!(b.values, secret);
        }
    }

    #[test]
    fn every_threshold_subset_reconstructs() {
        let mut rng = RngStream::new(1, "subsets");
        for n in [3, 5, 7, 9] {
            let cfg = SmcConfig::with_shares(n);
            let secret = random_secret(16, &cfg, &mut rng);
            let bundles = shamir_split(&secret, &cfg, &mut rng);
            let all = subsets(n, cfg.threshold);
            assert_eq!(all.len(), (1..=cfg.threshold).fold(1, |acc, i| acc * (n + 1 - i) / i));
            for subset in all {
                let picked: Vec<ShareBundle> = subset.iter().map(|&i| bundles[i].clone()).collect();
                assert_eq!(shamir_reconstruct(&picked, &cfg).unwrap(), secret);
            }
            assert_eq!(shamir_reconstruct(&bundles, &cfg).unwrap(), secret);
        }
    }

    #[test]
    fn below_threshold_is_an_error() {
        let cfg = SmcConfig::default();
        let bundles = shamir_split(&[7], &cfg, &mut RngStream::new(2, "few"));
        let err = shamir_reconstruct(&bundles[..3], &cfg).unwrap_err();
        assert!(matches!(err, Error::InsufficientShares { needed: 4, got: 3 }));
    }

    #[test]
    fn duplicated_index_is_a_protocol_error() {
        let cfg = SmcConfig::default();
        let mut bundles = shamir_split(&[7], &cfg, &mut RngStream::new(2, "dup"));
        bundles[1].share_index = 1;
        assert!(matches!(shamir_reconstruct(&bundles, &cfg), Err(Error::Protocol(_))));
    }

    /// With t − 1 honest shares and one uniformly forged share, the value at
    /// zero should be uniform over the field. Bucket into 16 bins by the top
    /// bits and compare against the chi-square critical value (15 dof, 0.001).
    #[test]
    fn forged_share_gives_uniform_reconstruction() {
        let cfg = SmcConfig::default();
        let mut rng = RngStream::new(3, "forge");
        let mut bins = [0usize; 16];
        let trials = 10_000;
        for _ in 0..trials {
            let mut bundles = shamir_split(&[42], &cfg, &mut rng);
            bundles.truncate(cfg.threshold);
            bundles[cfg.threshold - 1].values[0] = rng.below_u64(cfg.prime);
            let v = shamir_reconstruct(&bundles, &cfg).unwrap()[0];
            bins[((v as u128 * 16) / cfg.prime as u128) as usize] += 1;
        }
        let expected = trials as f64 / 16.0;
        let chi2: f64 = bins.iter().map(|&o| (o as f64 - expected).powi(2) / expected).sum();
        assert!(chi2 < 37.70, "chi2 = {chi2}, bins = {bins:?}");
    }

    #[test]
    fn single_share_marginal_is_uniform() {
        let cfg = SmcConfig::default();
        let mut rng = RngStream::new(4, "marginal");
        let mut bins = [0usize; 16];
        for _ in 0..10_000 {
            let v = shamir_split(&[0], &cfg, &mut rng)[2].values[0];
            bins[((v as u128 * 16) / cfg.prime as u128) as usize] += 1;
        }
        let chi2: f64 = bins.iter().map(|&o| (o as f64 - 625.0).powi(2) / 625.0).sum();
        assert!(chi2 < 37.70, "chi2 = {chi2}");
    }

    #[test]
    fn aggregate_single_client_and_cancellation() {
        let cfg = SmcConfig::default();
        let mut rng = RngStream::new(5, "agg");
        let u = vec![0.25, -3.5, 1e-3];
        let one = shamir_split(&fixed_encode(&u, &cfg).unwrap().raw, &cfg, &mut rng);
        let back = smc_aggregate(&[one], &cfg).unwrap();
        for (a, b) in u.iter().zip(&back) {
            assert!((a - b).abs() <= 2f64.powi(-21));
        }
        let neg: Vec<f64> = u.iter().map(|x| -x).collect();
        let sets: Vec<Vec<ShareBundle>> = [&u, &neg]
            .iter()
            .map(|v| shamir_split(&fixed_encode(v, &cfg).unwrap().raw, &cfg, &mut rng))
            .collect();
        for x in smc_aggregate(&sets, &cfg).unwrap() {
            assert!(x.abs() <= 2.0 * 2f64.powi(-21));
        }
    }

    #[test]
    fn misaligned_sets_are_rejected() {
        let cfg = SmcConfig::default();
        let mut rng = RngStream::new(6, "align");
        let a = shamir_split(&[1, 2], &cfg, &mut rng);
        let mut b = shamir_split(&[3, 4], &cfg, &mut rng);
        b.swap(0, 1);
        assert!(matches!(sum_bundles(&[a.clone(), b], &cfg), Err(Error::Protocol(_))));
        assert!(matches!(sum_bundles(&[a.clone(), a[..3].to_vec()], &cfg), Err(Error::Protocol(_))));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn aggregate_matches_float_sum(seed in any::<u64>(), clients in 1usize..8, len in 1usize..20) {
            let cfg = SmcConfig::default();
            let mut rng = RngStream::new(seed, "prop");
            let vectors: Vec<Vec<f64>> = (0..clients)
                .map(|_| (0..len).map(|_| rng.uniform() * 20.0 - 10.0).collect())
                .collect();
            let sets: Vec<Vec<ShareBundle>> = vectors
                .iter()
                .map(|v| shamir_split(&fixed_encode(v, &cfg).unwrap().raw, &cfg, &mut rng))
                .collect();
            let got = smc_aggregate(&sets, &cfg).unwrap();
            for i in 0..len {
                let want: f64 = vectors.iter().map(|v| v[i]).sum();
                prop_assert!((got[i] - want).abs() <= clients as f64 * 2f64.powi(-21) + 1e-12);
            }
        }

        #[test]
        fn sum_then_reconstruct_equals_reconstruct_then_sum(seed in any::<u64>(), clients in 1usize..50) {
            let cfg = SmcConfig::with_shares(5);
            let mut rng = RngStream::new(seed, "homo");
            let secrets: Vec<Vec<u64>> = (0..clients).map(|_| random_secret(3, &cfg, &mut rng)).collect();
            let sets: Vec<Vec<ShareBundle>> = secrets.iter().map(|s| shamir_split(s, &cfg, &mut rng)).collect();
            let summed = shamir_reconstruct(&sum_bundles(&sets, &cfg).unwrap(), &cfg).unwrap();
            let mut separately = vec![0u64; 3];
            for set in &sets {
                let r = shamir_reconstruct(&set[1..4], &cfg).unwrap();
                for (acc, v) in separately.iter_mut().zip(r) {
                    *acc = add_mod(*acc, v, cfg.prime);
                }
            }
            prop_assert_eq!(summed, separately);
        }
    }
}
