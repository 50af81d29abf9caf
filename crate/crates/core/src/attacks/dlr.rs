use crate::error::Result;
use crate::numerics::{loss_and_grad, Architecture, Batch, ModelParams};

/// Mean absolute per-parameter change in the client gradient at `model` when
/// the canary record is added to `shard`.
pub fn dlr_canary(
    model: &ModelParams,
    arch: &Architecture,
    shard: &Batch,
    canary: &[f64],
    canary_label: usize,
) -> Result<f64> {
    let (_, without) = loss_and_grad(model, arch, shard)?;
    let mut with_canary = shard.clone();
    with_canary.push(canary, canary_label);
    let (_, with) = loss_and_grad(model, arch, &with_canary)?;
    let l1: f64 = with.values.iter().zip(&without.values).map(|(a, b)| (a - b).abs()).sum();
    Ok(l1 / model.dim() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngStream;

    fn batch(n: usize, width: usize, rng: &mut RngStream) -> Batch {
        let features = (0..n * width).map(|_| rng.gaussian()).collect();
        Batch::new(features, width, (0..n).map(|_| rng.below(3)).collect()).unwrap()
    }

    #[test]
    fn nonnegative_and_zero_for_uninformative_probe() {
        let mut rng = RngStream::new(1, "dlr");
        let arch = Architecture::Mlp { inputs: 4, hidden: 3, classes: 3 };
        let model = arch.init(&mut rng);
        let shard = batch(12, 4, &mut rng);
        assert!(dlr_canary(&model, &arch, &shard, shard.row(0), 1).unwrap() >= 0.0);
        // a single-record shard whose canary duplicates it leaves the mean gradient unchanged
        let one = shard.select(&[3]);
        assert_eq!(dlr_canary(&model, &arch, &one, one.row(0), one.labels[0]).unwrap(), 0.0);
    }

    #[test]
    fn duplicated_shard_leverage() {
        // shard D doubled to 2n points plus canary x_j: the mean gradient
        // moves by (g_j − ḡ) / (2n + 1)
        let mut rng = RngStream::new(2, "lev");
        let arch = Architecture::Mlp { inputs: 3, hidden: 4, classes: 3 };
        let model = arch.init(&mut rng);
        let base = batch(6, 3, &mut rng);
        let doubled = base.concat(&base);
        let j = 4;
        let per_sample: Vec<Vec<f64>> = (0..base.len())
            .map(|i| loss_and_grad(&model, &arch, &base.select(&[i])).unwrap().1.values)
            .collect();
        let d = model.dim();
        let mean: Vec<f64> = (0..d).map(|p| per_sample.iter().map(|g| g[p]).sum::<f64>() / 6.0).collect();
        let oracle = (0..d).map(|p| (per_sample[j][p] - mean[p]).abs()).sum::<f64>() / 13.0 / d as f64;
        let got = dlr_canary(&model, &arch, &doubled, base.row(j), base.labels[j]).unwrap();
        assert!((got - oracle).abs() < 1e-12 * oracle.max(1.0), "{got} vs {oracle}");
    }

    #[test]
    fn zero_features_leave_only_bias_terms() {
        // with x = 0 the weight gradient vanishes and the bias gradient is
        // softmax(b) − mean one-hot, so DLR = Σ_c |ȳ⁻_c − ȳ⁺_c| / d
        let arch = Architecture::LogisticRegression { inputs: 2, classes: 3 };
        let mut model = arch.zeros();
        model.values[6..].copy_from_slice(&[0.3, -0.2, 0.5]);
        let shard = Batch::new(vec![0.0; 10], 2, vec![0, 0, 1, 2, 2]).unwrap();
        let before: [f64; 3] = [2.0 / 5.0, 1.0 / 5.0, 2.0 / 5.0];
        let after = [2.0 / 6.0, 2.0 / 6.0, 2.0 / 6.0];
        let oracle = before.iter().zip(after).map(|(a, b)| (a - b).abs()).sum::<f64>() / 9.0;
        let got = dlr_canary(&model, &arch, &shard, &[0.0, 0.0], 1).unwrap();
        assert!((got - oracle).abs() < 1e-15);
    }
}
