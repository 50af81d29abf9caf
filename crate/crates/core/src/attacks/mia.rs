use crate::error::{Error, Result};
use crate::numerics::{per_sample_loss, Architecture, Batch, ModelParams};

/// Softmax probability of each sample's true label.
pub fn true_label_confidence(model: &ModelParams, arch: &Architecture, batch: &Batch) -> Result<Vec<f64>> {
    Ok(per_sample_loss(model, arch, batch)?.into_iter().map(|l| (-l).exp()).collect())
}

/// `(1/2N) Σ_i (p_in,i − p_out,i)` over paired member and non-member sets.
pub fn msr_confidence_gap(
    model: &ModelParams,
    arch: &Architecture,
    held_in: &Batch,
    held_out: &Batch,
) -> Result<f64> {
    if held_in.len() != held_out.len() || held_in.is_empty() {
        return Err(Error::InvalidInput(format!(
            "member and non-member sets must be equal and nonempty, got {} and {}",
            held_in.len(),
            held_out.len()
        )));
    }
    let p_in = true_label_confidence(model, arch, held_in)?;
    let p_out = true_label_confidence(model, arch, held_out)?;
    let gap: f64 = p_in.iter().zip(&p_out).map(|(a, b)| a - b).sum();
    Ok(gap / (2 * held_in.len()) as f64)
}

/// Accuracy of the rule "member iff confidence > τ".
pub fn msr_threshold_classifier(in_conf: &[f64], out_conf: &[f64], tau: f64) -> f64 {
    let total = in_conf.len() + out_conf.len();
    if total == 0 {
        return 0.0;
    }
    let hits = in_conf.iter().filter(|&&c| c > tau).count() + out_conf.iter().filter(|&&c| c <= tau).count();
    hits as f64 / total as f64
}

/// Threshold maximizing [`msr_threshold_classifier`] over every distinct
/// observed confidence (plus "never member"). Ties keep the smallest `τ`.
pub fn best_threshold(in_conf: &[f64], out_conf: &[f64]) -> (f64, f64) {
    let mut candidates: Vec<f64> = in_conf.iter().chain(out_conf).copied().collect();
    candidates.push(f64::NEG_INFINITY);
    candidates.push(f64::INFINITY);
    candidates.sort_by(f64::total_cmp);
    candidates.dedup();

    let mut ins = in_conf.to_vec();
    let mut outs = out_conf.to_vec();
    ins.sort_by(f64::total_cmp);
    outs.sort_by(f64::total_cmp);
    let total = (ins.len() + outs.len()).max(1) as f64;
    let (mut i, mut o) = (0, 0);
    let mut best = (f64::NEG_INFINITY, -1.0);
    for tau in candidates {
        // members above τ and non-members at or below τ
        while i < ins.len() && ins[i] <= tau {
            i += 1;
        }
        while o < outs.len() && outs[o] <= tau {
            o += 1;
        }
        let rate = ((ins.len() - i) + o) as f64 / total;
        if rate > best.1 {
            best = (tau, rate);
        }
    }
    best
}

/// Threshold attack with `τ` fitted on even-indexed samples and scored on
/// the odd-indexed ones.
pub fn msr_calibrated(model: &ModelParams, arch: &Architecture, held_in: &Batch, held_out: &Batch) -> Result<f64> {
    if held_in.len() < 2 || held_out.len() < 2 {
        return Err(Error::InvalidInput("threshold attack needs at least two samples per side".into()));
    }
    let p_in = true_label_confidence(model, arch, held_in)?;
    let p_out = true_label_confidence(model, arch, held_out)?;
    let split = |v: &[f64], parity: usize| -> Vec<f64> { v.iter().skip(parity).step_by(2).copied().collect() };
    let (tau, _) = best_threshold(&split(&p_in, 0), &split(&p_out, 0));
    Ok(msr_threshold_classifier(&split(&p_in, 1), &split(&p_out, 1), tau))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{local_train, TrainSchedule};
    use crate::rng::RngStream;

    fn random_batch(n: usize, width: usize, classes: usize, rng: &mut RngStream) -> Batch {
        let features = (0..n * width).map(|_| rng.gaussian()).collect();
        Batch::new(features, width, (0..n).map(|_| rng.below(classes)).collect()).unwrap()
    }

    #[test]
    fn identical_sets_give_zero_gap() {
        let mut rng = RngStream::new(1, "mia");
        let arch = Architecture::Mlp { inputs: 3, hidden: 4, classes: 2 };
        let model = arch.init(&mut rng);
        let b = random_batch(10, 3, 2, &mut rng);
        assert_eq!(msr_confidence_gap(&model, &arch, &b, &b).unwrap(), 0.0);
    }

    #[test]
    fn zero_model_gap_is_exactly_zero() {
        let mut rng = RngStream::new(2, "mia");
        let arch = Architecture::LogisticRegression { inputs: 3, classes: 4 };
        let (a, b) = (random_batch(7, 3, 4, &mut rng), random_batch(7, 3, 4, &mut rng));
        assert_eq!(msr_confidence_gap(&arch.zeros(), &arch, &a, &b).unwrap(), 0.0);
    }

    #[test]
    fn extreme_model_gap_is_half() {
        // logits ±1000 push the softmax to exactly 0/1 in f64
        let arch = Architecture::LogisticRegression { inputs: 1, classes: 2 };
        let model = ModelParams::from_values(vec![-1000.0, 1000.0, 0.0, 0.0], arch.param_shapes()).unwrap();
        let held_in = Batch::new(vec![1.0; 4], 1, vec![1; 4]).unwrap();
        let held_out = Batch::new(vec![1.0; 4], 1, vec![0; 4]).unwrap();
        assert_eq!(msr_confidence_gap(&model, &arch, &held_in, &held_out).unwrap(), 0.5);
    }

    #[test]
    fn gap_matches_direct_formula_on_overfit_model() {
        let mut rng = RngStream::new(3, "overfit");
        let arch = Architecture::LogisticRegression { inputs: 5, classes: 3 };
        let held_in = random_batch(20, 5, 3, &mut rng);
        let held_out = random_batch(20, 5, 3, &mut rng);
        let schedule = TrainSchedule { epochs: 200, lr: 0.5, batch_size: 20 };
        let model = local_train(&arch.zeros(), &arch, &held_in, &schedule, &mut rng, 0).unwrap();
        // hand-rolled logits z = xW + b and softmax
        let probs = |b: &Batch| -> Vec<f64> {
            (0..b.len())
                .map(|i| {
                    let x = b.row(i);
                    let z: Vec<f64> = (0..3)
                        .map(|c| (0..5).map(|j| x[j] * model.values[j * 3 + c]).sum::<f64>() + model.values[15 + c])
                        .collect();
                    let denom: f64 = z.iter().map(|v| v.exp()).sum();
                    z[b.labels[i]].exp() / denom
                })
                .collect()
        };
        let (pi, po) = (probs(&held_in), probs(&held_out));
        let oracle = (0..20).map(|i| pi[i] - po[i]).sum::<f64>() / 40.0;
        let got = msr_confidence_gap(&model, &arch, &held_in, &held_out).unwrap();
        assert!(got > 0.05, "model should be overfit, gap {got}");
        assert!((got - oracle).abs() < 1e-12, "{got} {oracle}");
    }

    #[test]
    fn size_mismatch_is_rejected() {
        let arch = Architecture::LogisticRegression { inputs: 1, classes: 2 };
        let a = Batch::new(vec![0.0; 2], 1, vec![0, 1]).unwrap();
        let b = Batch::new(vec![0.0], 1, vec![0]).unwrap();
        assert!(msr_confidence_gap(&arch.zeros(), &arch, &a, &b).is_err());
    }

    #[test]
    fn threshold_classifier_examples() {
        let ins = [0.9, 0.8, 0.7];
        let outs = [0.3, 0.2, 0.1];
        assert_eq!(msr_threshold_classifier(&ins, &outs, 1.0), 0.5);
        assert_eq!(msr_threshold_classifier(&ins, &outs, 0.5), 1.0);
        assert_eq!(best_threshold(&ins, &outs).1, 1.0);
    }

    #[test]
    fn best_threshold_matches_exhaustive_sweep() {
        let mut rng = RngStream::new(4, "sweep");
        for _ in 0..20 {
            let ins: Vec<f64> = (0..25).map(|_| (rng.uniform() * 20.0).round() / 20.0).collect();
            let outs: Vec<f64> = (0..25).map(|_| (rng.uniform() * 18.0).round() / 20.0).collect();
            let oracle = ins
                .iter()
                .chain(&outs)
                .chain(&[-1.0, 2.0])
                .map(|&t| msr_threshold_classifier(&ins, &outs, t))
                .fold(0.0, f64::max);
            let (tau, rate) = best_threshold(&ins, &outs);
            assert_eq!(rate, oracle);
            assert_eq!(msr_threshold_classifier(&ins, &outs, tau), rate);
        }
    }
}
