//! Client contributions and server aggregation for FedAvg, q-FedAvg and
//! q-FedSGD.
//!
//! A contribution is a numerator `Δ_k` and a denominator weight `h_k`; the
//! server sets `w ← w − Σ Δ_k / Σ h_k`.

use crate::error::{Error, Result};
use crate::numerics::{loss_and_grad, per_sample_loss, squared_norm, local_train, Architecture, Batch, ModelParams, TrainSchedule};
use crate::rng::RngStream;
use crate::update::Update;

/// Losses are floored here before taking powers.
pub const LOSS_FLOOR: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OptimizerKind {
    FedAvg,
    QFedAvg,
    QFedSgd,
}

impl OptimizerKind {
    pub fn name(self) -> &'static str {
        match self {
            OptimizerKind::FedAvg => "fedavg",
            OptimizerKind::QFedAvg => "qfedavg",
            OptimizerKind::QFedSgd => "qfedsgd",
        }
    }
}

impl std::str::FromStr for OptimizerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fedavg" => Ok(Self::FedAvg),
            "qfedavg" => Ok(Self::QFedAvg),
            "qfedsgd" => Ok(Self::QFedSgd),
            other => Err(Error::Config(format!(
                "fair.optimizer must be fedavg, qfedavg or qfedsgd, got {other:?}"
            ))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FairnessConfig {
    pub q: f64,
    /// Lipschitz estimate `L`; `1/L` is the server step constant.
    pub lipschitz: f64,
    pub optimizer: OptimizerKind,
}

impl FairnessConfig {
    /// `L = 1/η` for local learning rate `η`.
    pub fn from_lr(q: f64, lr: f64, optimizer: OptimizerKind) -> Self {
        Self { q, lipschitz: 1.0 / lr, optimizer }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.q >= 0.0 && self.q.is_finite()) {
            return Err(Error::Config(format!("fair.q must be >= 0, got {}", self.q)));
        }
        if !(self.lipschitz > 0.0 && self.lipschitz.is_finite()) {
            return Err(Error::Config(format!("fair.lipschitz must be positive, got {}", self.lipschitz)));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct ClientContribution {
    pub client_id: usize,
    pub delta: Update,
    pub h: f64,
    /// `F_k(w^t)` on the client's training shard.
    pub loss: f64,
}

/// `Δw = L·(w − w̄)`.
pub fn compute_delta(w_global: &ModelParams, w_local: &ModelParams, lipschitz: f64) -> Result<Vec<f64>> {
    if w_global.dim() != w_local.dim() {
        return Err(Error::DimensionMismatch {
            expected: w_global.dim(),
            actual: w_local.dim(),
        });
    }
    Ok(w_global
        .values
        .iter()
        .zip(&w_local.values)
        .map(|(w, wl)| lipschitz * (w - wl))
        .collect())
}

/// `F^q · Δ`.
pub fn fairness_scale(delta: &[f64], loss: f64, q: f64) -> Vec<f64> {
    let factor = loss.max(LOSS_FLOOR).powf(q);
    delta.iter().map(|d| factor * d).collect()
}

/// `h = q·F^(q−1)·‖Δw‖² + L·F^q`. The first term is dropped when `q = 0`,
/// and when `F = 0` with `q < 1`.
pub fn compute_h(loss: f64, delta: &[f64], q: f64, lipschitz: f64) -> f64 {
    let f = loss.max(LOSS_FLOOR);
    let curvature = if q == 0.0 || (loss <= 0.0 && q < 1.0) {
        0.0
    } else {
        q * f.powf(q - 1.0) * squared_norm(delta)
    };
    curvature + lipschitz * f.powf(q)
}

/// Mean training loss of `model` on `data`.
pub fn mean_loss(model: &ModelParams, arch: &Architecture, data: &Batch) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::InvalidInput("empty client shard".into()));
    }
    let losses = per_sample_loss(model, arch, data)?;
    Ok(losses.iter().sum::<f64>() / losses.len() as f64)
}

/// Trains locally from `w` and forms the client's contribution. FedAvg sends
/// `Δ = L(w − w̄)` with `h = L`; q-FedAvg rescales by the pre-training loss.
pub fn local_contribution(
    client_id: usize,
    w: &ModelParams,
    arch: &Architecture,
    data: &Batch,
    cfg: &FairnessConfig,
    schedule: &TrainSchedule,
    rng: &mut RngStream,
    round: usize,
) -> Result<ClientContribution> {
    if cfg.optimizer == OptimizerKind::QFedSgd {
        return qfedsgd_contribution(client_id, w, arch, data, cfg);
    }
    let loss = mean_loss(w, arch, data)?;
    let trained = local_train(w, arch, data, schedule, rng, round)?;
    let delta_w = compute_delta(w, &trained, cfg.lipschitz)?;
    let (delta, h) = match cfg.optimizer {
        OptimizerKind::FedAvg => (delta_w, cfg.lipschitz),
        _ => {
            let h = compute_h(loss, &delta_w, cfg.q, cfg.lipschitz);
            (fairness_scale(&delta_w, loss, cfg.q), h)
        }
    };
    Ok(ClientContribution {
        client_id,
        delta: Update::plain(client_id, delta),
        h,
        loss,
    })
}

/// One full-shard gradient: `Δ = F^q·∇F(w)` and `h` with `Δw := ∇F(w)`.
pub fn qfedsgd_contribution(
    client_id: usize,
    w: &ModelParams,
    arch: &Architecture,
    data: &Batch,
    cfg: &FairnessConfig,
) -> Result<ClientContribution> {
    let (loss, grad) = loss_and_grad(w, arch, data)?;
    let h = compute_h(loss, &grad.values, cfg.q, cfg.lipschitz);
    Ok(ClientContribution {
        client_id,
        delta: Update::plain(client_id, fairness_scale(&grad.values, loss, cfg.q)),
        h,
        loss,
    })
}

/// `w − Σ / h_total`.
pub fn apply_aggregate(prior: &ModelParams, sum: &[f64], h_total: f64) -> Result<ModelParams> {
    if sum.len() != prior.dim() {
        return Err(Error::DimensionMismatch { expected: prior.dim(), actual: sum.len() });
    }
    if h_total == 0.0 || !h_total.is_finite() {
        return Err(Error::DegenerateRound);
    }
    prior.with_values(prior.values.iter().zip(sum).map(|(w, s)| w - s / h_total).collect())
}

/// Plain aggregation, folding contributions in ascending `client_id` order.
pub fn aggregate(contributions: &[ClientContribution], prior: &ModelParams) -> Result<ModelParams> {
    if contributions.is_empty() {
        return Err(Error::InvalidInput("no contributions to aggregate".into()));
    }
    let mut ordered: Vec<&ClientContribution> = contributions.iter().collect();
    ordered.sort_by_key(|c| c.client_id);
    let mut sum = vec![0.0; prior.dim()];
    let mut h_total = 0.0;
    for c in ordered {
        let delta = c.delta.as_plain()?;
        if delta.len() != sum.len() {
            return Err(Error::DimensionMismatch { expected: sum.len(), actual: delta.len() });
        }
        for (s, d) in sum.iter_mut().zip(delta) {
            *s += d;
        }
        h_total += c.h;
    }
    apply_aggregate(prior, &sum, h_total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::synth_tabular;
    use proptest::prelude::*;

    fn params(values: Vec<f64>) -> ModelParams {
        let n = values.len();
        ModelParams::from_values(values, vec![(1, n)]).unwrap()
    }

    fn contribution(id: usize, delta: Vec<f64>, h: f64) -> ClientContribution {
        ClientContribution { client_id: id, delta: Update::plain(id, delta), h, loss: 1.0 }
    }

    #[test]
    fn delta_examples() {
        let w = params(vec![0.5, -0.5]);
        assert_eq!(compute_delta(&w, &w, 10.0).unwrap(), vec![0.0, 0.0]);
        let wl = params(vec![0.4, -0.3]);
        let d = compute_delta(&w, &wl, 10.0).unwrap();
        assert!((d[0] - 1.0).abs() < 1e-12 && (d[1] + 2.0).abs() < 1e-12);
        let d3 = compute_delta(&params(vec![1.0, 2.0, 3.0]), &params(vec![0.5, 2.5, 3.0]), 4.0).unwrap();
        assert_eq!(d3, vec![2.0, -2.0, 0.0]);
        assert!(compute_delta(&w, &params(vec![1.0]), 1.0).is_err());
    }

    #[test]
    fn fairness_scale_examples() {
        let d = vec![0.3, -1.7];
        assert_eq!(fairness_scale(&d, 7.3, 0.0), d);
        assert_eq!(fairness_scale(&[1.0], 2.0, 1.0), vec![2.0]);
        // ln(10)^10 to 40 digits
        let oracle = 4189.448798029520479024881126433042837129_f64;
        let got = fairness_scale(&[1.0, -2.5], std::f64::consts::LN_10, 10.0);
        assert!((got[0] / oracle - 1.0).abs() < 1e-12);
        assert!((got[1] / (-2.5 * oracle) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn h_examples() {
        assert_eq!(compute_h(3.7, &[5.0, 1.0], 0.0, 10.0), 10.0);
        assert_eq!(compute_h(2.0, &[2.0, 0.0], 1.0, 10.0), 24.0);
        assert_eq!(compute_h(0.0, &[1.0], 0.5, 10.0), 10.0 * LOSS_FLOOR.powf(0.5));
    }

    #[test]
    fn h_matches_second_implementation() {
        let mut rng = RngStream::new(1, "h-grid");
        for _ in 0..100 {
            let q = rng.uniform() * 10.0;
            let f = rng.uniform() * 3.0 + 0.01;
            let l = rng.uniform() * 20.0 + 0.1;
            let dw: Vec<f64> = (0..5).map(|_| rng.gaussian()).collect();
            let norm2: f64 = dw.iter().map(|x| x * x).sum();
            let expected = q * (f.ln() * (q - 1.0)).exp() * norm2 + l * (f.ln() * q).exp();
            let got = compute_h(f, &dw, q, l);
            assert!((got / expected - 1.0).abs() < 1e-12, "q={q} f={f}");
        }
    }

    #[test]
    fn single_client_fedavg_adopts_local_model() {
        let w = params(vec![0.2, 0.4, -1.0]);
        let wl = params(vec![0.25, 0.3, -0.5]);
        let delta = compute_delta(&w, &wl, 4.0).unwrap();
        let out = aggregate(&[contribution(0, delta, 4.0)], &w).unwrap();
        for (a, b) in out.values.iter().zip(&wl.values) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn opposite_deltas_cancel() {
        let w = params(vec![1.0, -1.0]);
        let out = aggregate(&[contribution(0, vec![0.5, 2.0], 3.0), contribution(1, vec![-0.5, -2.0], 3.0)], &w).unwrap();
        assert_eq!(out, w);
    }

    #[test]
    fn three_client_hand_example() {
        // q = 1, L = 10:
        //   Δw = [1, 0], F = 1   → Δ = [1, 0],     h = 1 + 10 = 11
        //   Δw = [0, 2], F = 2   → Δ = [0, 4],     h = 4 + 20 = 24
        //   Δw = [1, 1], F = 0.5 → Δ = [0.5, 0.5], h = 2 + 5 = 7
        // w' = [1, 2] − [1.5, 4.5] / 42 = [27/28, 53/28]
        let cases = [(vec![1.0, 0.0], 1.0), (vec![0.0, 2.0], 2.0), (vec![1.0, 1.0], 0.5)];
        let contribs: Vec<ClientContribution> = cases
            .iter()
            .enumerate()
            .map(|(k, (dw, f))| ClientContribution {
                client_id: k,
                delta: Update::plain(k, fairness_scale(dw, *f, 1.0)),
                h: compute_h(*f, dw, 1.0, 10.0),
                loss: *f,
            })
            .collect();
        assert_eq!(contribs.iter().map(|c| c.h).collect::<Vec<_>>(), vec![11.0, 24.0, 7.0]);
        let out = aggregate(&contribs, &params(vec![1.0, 2.0])).unwrap();
        assert!((out.values[0] - 27.0 / 28.0).abs() < 1e-15);
        assert!((out.values[1] - 53.0 / 28.0).abs() < 1e-15);
    }

    #[test]
    fn zero_weight_is_degenerate() {
        let err = aggregate(&[contribution(0, vec![1.0], 0.0)], &params(vec![0.0])).unwrap_err();
        assert!(matches!(err, Error::DegenerateRound));
    }

    fn setup() -> (Architecture, Batch, ModelParams) {
        let ds = synth_tabular(60, 4, 0.3, 9).unwrap();
        let arch = Architecture::Mlp { inputs: 4, hidden: 5, classes: 2 };
        let w = arch.init(&mut RngStream::new(9, "init"));
        (arch, ds.samples, w)
    }

    #[test]
    fn qfedsgd_matches_one_epoch_full_batch_qfedavg() {
        let (arch, data, w) = setup();
        let lr = 0.1;
        for q in [0.0, 1.0, 5.0] {
            let sgd = qfedsgd_contribution(0, &w, &arch, &data, &FairnessConfig::from_lr(q, lr, OptimizerKind::QFedSgd)).unwrap();
            let schedule = TrainSchedule { epochs: 1, lr, batch_size: data.len() };
            let avg = local_contribution(
                0, &w, &arch, &data,
                &FairnessConfig::from_lr(q, lr, OptimizerKind::QFedAvg),
                &schedule, &mut RngStream::new(0, "t"), 0,
            )
            .unwrap();
            let (a, b) = (sgd.delta.as_plain().unwrap(), avg.delta.as_plain().unwrap());
            for (x, y) in a.iter().zip(b) {
                assert!((x - y).abs() < 1e-10, "q={q}");
            }
            assert!((sgd.h - avg.h).abs() < 1e-10 * sgd.h.max(1.0));
        }
    }

    #[test]
    fn qfedsgd_zero_q_is_plain_gradient_and_zero_gradient_gives_lf() {
        let (arch, data, w) = setup();
        let c = qfedsgd_contribution(0, &w, &arch, &data, &FairnessConfig::from_lr(0.0, 0.1, OptimizerKind::QFedSgd)).unwrap();
        let (_, grad) = loss_and_grad(&w, &arch, &data).unwrap();
        assert_eq!(c.delta.as_plain().unwrap(), &grad.values[..]);
        assert_eq!(c.h, 10.0);
        assert_eq!(compute_h(0.8, &[0.0; 4], 2.0, 10.0), 10.0 * 0.8f64.powf(2.0));
        assert_eq!(fairness_scale(&[0.0; 3], 0.8, 2.0), vec![0.0; 3]);
    }

    #[test]
    fn q_zero_contribution_is_bitwise_fedavg() {
        let (arch, data, w) = setup();
        let schedule = TrainSchedule { epochs: 2, lr: 0.1, batch_size: 8 };
        let run = |kind| {
            local_contribution(3, &w, &arch, &data, &FairnessConfig::from_lr(0.0, 0.1, kind), &schedule, &mut RngStream::new(4, "c"), 0).unwrap()
        };
        let (a, b) = (run(OptimizerKind::FedAvg), run(OptimizerKind::QFedAvg));
        assert_eq!(a.h.to_bits(), b.h.to_bits());
        let bits = |c: &ClientContribution| c.delta.as_plain().unwrap().iter().map(|x| x.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&a), bits(&b));
    }

    proptest! {
        #[test]
        fn aggregation_is_order_invariant(seed in any::<u64>(), k in 1usize..8) {
            let mut rng = RngStream::new(seed, "perm");
            let contribs: Vec<ClientContribution> = (0..k)
                .map(|id| contribution(id, (0..4).map(|_| rng.gaussian()).collect(), rng.uniform() + 0.1))
                .collect();
            let prior = params(vec![0.1, 0.2, 0.3, 0.4]);
            let mut shuffled = contribs.clone();
            rng.shuffle(&mut shuffled);
            let a = aggregate(&contribs, &prior).unwrap();
            let b = aggregate(&shuffled, &prior).unwrap();
            prop_assert_eq!(a, b);
        }
    }
}
