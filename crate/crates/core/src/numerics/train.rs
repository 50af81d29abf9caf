use super::model::loss_grad_rows;
use super::{Architecture, Batch, ModelParams};
use crate::error::{Error, Result};
use crate::rng::RngStream;

/// Local SGD hyperparameters.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrainSchedule {
    pub epochs: usize,
    pub lr: f64,
    pub batch_size: usize,
}

/// Runs `schedule.epochs` epochs of mini-batch SGD starting from `model`.
///
/// Indices are reshuffled from `rng` at the start of every epoch and the last
/// partial batch is kept. `round` is only used to label divergence errors.
pub fn local_train(
    model: &ModelParams,
    arch: &Architecture,
    data: &Batch,
    schedule: &TrainSchedule,
    rng: &mut RngStream,
    round: usize,
) -> Result<ModelParams> {
    if schedule.epochs == 0 {
        return Err(Error::InvalidInput("local training needs at least one epoch".into()));
    }
    if !(schedule.lr >= 0.0) || schedule.batch_size == 0 {
        return Err(Error::InvalidInput(format!(
            "invalid schedule: lr {} batch {}",
            schedule.lr, schedule.batch_size
        )));
    }
    // validates shapes and labels once
    super::predict(model, arch, &Batch::empty(data.width))?;
    if data.is_empty() {
        return Err(Error::InvalidInput("empty client shard".into()));
    }
    if let Some(&bad) = data.labels.iter().find(|&&y| y >= arch.classes()) {
        return Err(Error::InvalidInput(format!("label {bad} out of range")));
    }

    let mut current = model.clone();
    let mut grad = vec![0.0; model.dim()];
    let mut order: Vec<usize> = (0..data.len()).collect();
    for epoch in 0..schedule.epochs {
        rng.shuffle(&mut order);
        for rows in order.chunks(schedule.batch_size) {
            let loss = loss_grad_rows(&current, arch, data, rows, &mut grad);
            if !loss.is_finite() {
                return Err(Error::Divergence { round, epoch });
            }
            for (w, g) in current.values.iter_mut().zip(&grad) {
                *w -= schedule.lr * g;
            }
        }
    }
    if !current.is_finite() {
        return Err(Error::Divergence {
            round,
            epoch: schedule.epochs - 1,
        });
    }
    Ok(current)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::loss_and_grad;

    fn data(rng: &mut RngStream) -> Batch {
        let n = 40;
        let features = (0..n * 3).map(|_| rng.gaussian()).collect();
        let labels = (0..n).map(|i| i % 3).collect();
        Batch::new(features, 3, labels).unwrap()
    }

    #[test]
    fn zero_learning_rate_is_identity() {
        let arch = Architecture::Mlp { inputs: 3, hidden: 4, classes: 3 };
        let mut rng = RngStream::new(9, "init");
        let model = arch.init(&mut rng);
        let batch = data(&mut rng);
        let schedule = TrainSchedule { epochs: 3, lr: 0.0, batch_size: 7 };
        let out = local_train(&model, &arch, &batch, &schedule, &mut rng, 0).unwrap();
        assert_eq!(out, model);
    }

    #[test]
    fn single_full_batch_epoch_is_one_sgd_step() {
        let arch = Architecture::LogisticRegression { inputs: 3, classes: 3 };
        let mut rng = RngStream::new(10, "x");
        let batch = data(&mut rng);
        let mut model = arch.zeros();
        for v in &mut model.values {
            *v = rng.gaussian() * 0.1;
        }
        let (_, grad) = loss_and_grad(&model, &arch, &batch).unwrap();
        let lr = 0.3;
        let schedule = TrainSchedule { epochs: 1, lr, batch_size: batch.len() };
        let out = local_train(&model, &arch, &batch, &schedule, &mut rng, 0).unwrap();
        for ((o, w), g) in out.values.iter().zip(&model.values).zip(&grad.values) {
            assert!((o - (w - lr * g)).abs() < 1e-12);
        }
    }

    #[test]
    fn same_stream_gives_bit_identical_output() {
        let arch = Architecture::Mlp { inputs: 3, hidden: 6, classes: 3 };
        let mut seed_rng = RngStream::new(11, "init");
        let model = arch.init(&mut seed_rng);
        let batch = data(&mut seed_rng);
        let schedule = TrainSchedule { epochs: 4, lr: 0.1, batch_size: 8 };
        let a = local_train(&model, &arch, &batch, &schedule, &mut RngStream::new(5, "c"), 0).unwrap();
        let b = local_train(&model, &arch, &batch, &schedule, &mut RngStream::new(5, "c"), 0).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, model);
    }

    #[test]
    fn divergence_reports_round_and_epoch() {
        let arch = Architecture::LogisticRegression { inputs: 3, classes: 3 };
        let mut rng = RngStream::new(12, "x");
        let batch = data(&mut rng);
        let mut model = arch.zeros();
        model.values[0] = f64::NAN;
        let schedule = TrainSchedule { epochs: 2, lr: 0.1, batch_size: 8 };
        let err = local_train(&model, &arch, &batch, &schedule, &mut rng, 4).unwrap_err();
        assert!(matches!(err, Error::Divergence { round: 4, epoch: 0 }));
    }
}
