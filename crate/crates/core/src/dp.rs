//! Clipping and the Gaussian mechanism.
//!
//! Local DP noises every client's clipped update. Global DP only clips on the
//! client and adds a single noise vector to the server-side sum. Masking
//! clips and noises each layer against its own bound.

use std::ops::Range;

use crate::error::{Error, Result};
use crate::numerics::l2_norm;
use crate::rng::RngStream;
use crate::update::Update;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DpPlacement {
    Local,
    Global,
    Masking,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DpConfig {
    pub epsilon: f64,
    /// Recorded with the run; only the classic calibration reads it.
    pub delta: f64,
    pub sensitivity: f64,
    pub clip_norm: f64,
    pub placement: DpPlacement,
    /// Per-layer clip bounds for masking; `None` uses `clip_norm` everywhere.
    pub layer_clip: Option<Vec<f64>>,
    /// Use `σ = Δ·√(2 ln(1.25/δ))/ε` instead of `σ = Δ/ε`.
    pub classic_calibration: bool,
}

impl DpConfig {
    pub fn new(epsilon: f64, placement: DpPlacement) -> Self {
        Self {
            epsilon,
            delta: 1e-5,
            sensitivity: 1.0,
            clip_norm: 1.0,
            placement,
            layer_clip: None,
            classic_calibration: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |v: f64| v > 0.0 && !v.is_nan();
        if !positive(self.epsilon) {
            return Err(Error::Config(format!("dp.epsilon must be positive, got {}", self.epsilon)));
        }
        if !(0.0..1.0).contains(&self.delta) {
            return Err(Error::Config(format!("dp.delta must lie in [0, 1), got {}", self.delta)));
        }
        if self.classic_calibration && self.delta == 0.0 {
            return Err(Error::Config("dp.calibration = classic needs dp.delta > 0".into()));
        }
        if !positive(self.sensitivity) || !self.sensitivity.is_finite() {
            return Err(Error::Config(format!("dp.sensitivity must be positive, got {}", self.sensitivity)));
        }
        if !positive(self.clip_norm) || !self.clip_norm.is_finite() {
            return Err(Error::Config(format!("dp.clip_norm must be positive, got {}", self.clip_norm)));
        }
        if let Some(bounds) = &self.layer_clip {
            if bounds.iter().any(|&c| !positive(c) || !c.is_finite()) {
                return Err(Error::Config("dp.layer_clip entries must be positive".into()));
            }
        }
        Ok(())
    }

    /// Per-coordinate noise standard deviation.
    pub fn sigma(&self) -> f64 {
        let base = self.sensitivity / self.epsilon;
        if self.classic_calibration {
            base * (2.0 * (1.25 / self.delta).ln()).sqrt()
        } else {
            base
        }
    }
}

/// Projects `update` onto the L2 ball of radius `c`.
pub fn clip(update: &[f64], c: f64) -> Vec<f64> {
    let mut out = update.to_vec();
    clip_in_place(&mut out, c);
    out
}

fn clip_in_place(v: &mut [f64], c: f64) {
    let norm = l2_norm(v);
    if norm > c {
        let factor = c / norm;
        v.iter_mut().for_each(|x| *x *= factor);
    }
}

fn add_noise(v: &mut [f64], sigma: f64, rng: &mut RngStream) {
    for x in v.iter_mut() {
        *x += sigma * rng.gaussian();
    }
}

/// `update + N(0, σ²I)` with `σ = cfg.sigma()`.
pub fn gaussian_noise(update: &[f64], cfg: &DpConfig, rng: &mut RngStream) -> Vec<f64> {
    let mut out = update.to_vec();
    add_noise(&mut out, cfg.sigma(), rng);
    out
}

/// Applies `cfg.placement` to each plain update. Client `k` draws its noise
/// from `rng.derive("client:k")`.
pub fn apply_dp_stage(
    mut updates: Vec<Update>,
    cfg: &DpConfig,
    layers: &[Range<usize>],
    rng: &RngStream,
) -> Result<Vec<Update>> {
    cfg.validate()?;
    let bounds: Vec<f64> = match &cfg.layer_clip {
        Some(b) if cfg.placement == DpPlacement::Masking => {
            if b.len() != layers.len() {
                return Err(Error::Config(format!(
                    "dp.layer_clip has {} entries but the model has {} layers",
                    b.len(),
                    layers.len()
                )));
            }
            b.clone()
        }
        _ => vec![cfg.clip_norm; layers.len()],
    };
    for update in &mut updates {
        let mut client_rng = rng.derive(format!("client:{}", update.client_id));
        let values = update.as_plain_mut()?;
        match cfg.placement {
            DpPlacement::Local => {
                clip_in_place(values, cfg.clip_norm);
                add_noise(values, cfg.sigma(), &mut client_rng);
            }
            DpPlacement::Global => {
                clip_in_place(values, cfg.clip_norm);
                update.global_noise_pending = true;
            }
            DpPlacement::Masking => {
                for (range, &bound) in layers.iter().zip(&bounds) {
                    let layer = values.get_mut(range.clone()).ok_or(Error::DimensionMismatch {
                        expected: range.end,
                        actual: 0,
                    })?;
                    clip_in_place(layer, bound);
                    add_noise(layer, cfg.sigma() * bound / cfg.clip_norm, &mut client_rng);
                }
            }
        }
    }
    Ok(updates)
}

/// Adds the single global-DP noise vector to an aggregated sum.
pub fn server_noise(sum: &mut [f64], cfg: &DpConfig, rng: &mut RngStream) {
    add_noise(sum, cfg.sigma(), rng);
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::update::{Payload, UpdateState};
    use proptest::prelude::*;

    fn std_dev(samples: &[f64]) -> f64 {
        let mean = samples.iter().sum::<f64>() / samples.len() as f64;
        (samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (samples.len() - 1) as f64).sqrt()
    }

    #[test]
    fn clip_examples() {
        assert_eq!(clip(&[0.0; 4], 1.0), vec![0.0; 4]);
        let out = clip(&[3.0, 4.0], 2.5);
        assert!((l2_norm(&out) - 2.5).abs() < 1e-15);
        assert!((out[0] / out[1] - 0.75).abs() < 1e-15);
        let small = [0.1, -0.2, 0.2];
        assert_eq!(clip(&small, 1.0), small.to_vec());
    }

    #[test]
    fn tiny_sigma_leaves_input_unchanged() {
        let cfg = DpConfig { epsilon: 1e14, ..DpConfig::new(1.0, DpPlacement::Local) };
        assert!(cfg.sigma() < 1e-13);
        let input = vec![0.3, -0.7, 1.1];
        let out = gaussian_noise(&input, &cfg, &mut RngStream::new(0, "dp"));
        for (a, b) in input.iter().zip(out) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn noise_std_matches_sigma() {
        let mut rng = RngStream::new(1, "dp-std");
        let cfg = DpConfig::new(2.0, DpPlacement::Local);
        let noise = gaussian_noise(&vec![0.0; 100_000], &cfg, &mut rng);
        let mean = noise.iter().sum::<f64>() / noise.len() as f64;
        assert!(mean.abs() < 0.01);
        assert!((std_dev(&noise) / 0.5 - 1.0).abs() < 0.02);
    }

    #[test]
    fn larger_epsilon_stays_closer() {
        let input: Vec<f64> = (0..20).map(|i| i as f64 * 0.05).collect();
        let mut dist = [0.0; 2];
        for trial in 0..100 {
            for (slot, eps) in [2.0, 8.0].into_iter().enumerate() {
                let mut rng = RngStream::new(trial, format!("pair/{eps}"));
                let out = gaussian_noise(&input, &DpConfig::new(eps, DpPlacement::Local), &mut rng);
                dist[slot] += input.iter().zip(&out).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
            }
        }
        assert!(dist[1] < dist[0]);
    }

    #[test]
    fn classic_calibration() {
        let cfg = DpConfig { classic_calibration: true, ..DpConfig::new(2.0, DpPlacement::Local) };
        assert!((cfg.sigma() - 0.5 * (2.0 * (1.25e5f64).ln()).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn local_single_client_is_clip_then_noise() {
        let cfg = DpConfig::new(4.0, DpPlacement::Local);
        let rng = RngStream::new(2, "round");
        let input = vec![3.0, -4.0, 12.0];
        let out = apply_dp_stage(vec![Update::plain(5, input.clone())], &cfg, &[0..3], &rng).unwrap();
        let expected = gaussian_noise(&clip(&input, 1.0), &cfg, &mut rng.derive("client:5"));
        assert_eq!(out[0].as_plain().unwrap(), &expected[..]);
    }

    #[test]
    fn masking_with_uniform_bounds_equals_local() {
        let rng = RngStream::new(3, "round");
        let input = vec![0.5, 2.0, -1.0, 0.25];
        let local = apply_dp_stage(vec![Update::plain(0, input.clone())], &DpConfig::new(2.0, DpPlacement::Local), &[0..4], &rng).unwrap();
        let masking_cfg = DpConfig { layer_clip: Some(vec![1.0]), ..DpConfig::new(2.0, DpPlacement::Masking) };
        let masked = apply_dp_stage(vec![Update::plain(0, input)], &masking_cfg, &[0..4], &rng).unwrap();
        assert_eq!(local[0].as_plain().unwrap(), masked[0].as_plain().unwrap());
    }

    #[test]
    fn masking_clips_each_layer_separately() {
        let cfg = DpConfig {
            epsilon: 1e15,
            layer_clip: Some(vec![1.0, 0.1]),
            ..DpConfig::new(1.0, DpPlacement::Masking)
        };
        let out = apply_dp_stage(vec![Update::plain(0, vec![3.0, 4.0, 0.0, 2.0])], &cfg, &[0..2, 2..4], &RngStream::new(0, "m")).unwrap();
        let v = out[0].as_plain().unwrap();
        assert!((l2_norm(&v[..2]) - 1.0).abs() < 1e-9);
        assert!((l2_norm(&v[2..]) - 0.1).abs() < 1e-9);
    }

    #[test]
    fn global_noise_is_one_draw_per_coordinate_per_round() {
        let cfg = DpConfig::new(2.0, DpPlacement::Global);
        let updates: Vec<Update> = (0..7).map(|k| Update::plain(k, vec![5.0; 10])).collect();
        let out = apply_dp_stage(updates, &cfg, &[0..10], &RngStream::new(4, "round")).unwrap();
        assert!(out.iter().all(|u| u.global_noise_pending && (l2_norm(u.as_plain().unwrap()) - 1.0).abs() < 1e-12));
        let mut server = RngStream::new(4, "server");
        let mut sum = vec![0.0; 10];
        server_noise(&mut sum, &cfg, &mut server);
        assert_eq!(server.gaussian_draws(), 10);
    }

    #[test]
    fn global_noise_on_cancelling_updates() {
        let cfg = DpConfig::new(2.0, DpPlacement::Global);
        let u = vec![0.3, -0.1];
        let mut samples = Vec::new();
        for trial in 0..20_000 {
            let updates = vec![Update::plain(0, u.clone()), Update::plain(1, u.iter().map(|x| -x).collect())];
            let out = apply_dp_stage(updates, &cfg, &[0..2], &RngStream::new(trial, "r")).unwrap();
            let mut sum: Vec<f64> = (0..2).map(|i| out.iter().map(|o| o.as_plain().unwrap()[i]).sum()).collect();
            server_noise(&mut sum, &cfg, &mut RngStream::new(trial, "server"));
            samples.extend(sum);
        }
        let mean = samples.iter().sum::<f64>() / samples.len() as f64;
        assert!(mean.abs() < 0.01, "{mean}");
        assert!((std_dev(&samples) / 0.5 - 1.0).abs() < 0.02);
    }

    #[test]
    fn non_plain_input_is_pipeline_error() {
        let update = Update {
            client_id: 0,
            payload: Payload::Shared(Vec::new()),
            global_noise_pending: false,
        };
        assert_eq!(update.state(), UpdateState::Shared);
        let err = apply_dp_stage(vec![update], &DpConfig::new(1.0, DpPlacement::Local), &[], &RngStream::new(0, "x")).unwrap_err();
        assert!(matches!(err, Error::PipelineOrder(_)));
    }

    #[test]
    fn invalid_config_is_rejected() {
        assert!(DpConfig::new(0.0, DpPlacement::Local).validate().is_err());
        assert!(DpConfig { delta: 1.0, ..DpConfig::new(1.0, DpPlacement::Local) }.validate().is_err());
        assert!(DpConfig { clip_norm: -1.0, ..DpConfig::new(1.0, DpPlacement::Local) }.validate().is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]
        #[test]
        fn clipped_norm_never_exceeds_bound(v in proptest::collection::vec(-1e6f64..1e6, 0..40), c in 1e-3f64..1e3) {
            let out = clip(&v, c);
            prop_assert!(l2_norm(&out) <= c * (1.0 + 1e-12));
            if l2_norm(&v) <= c {
                prop_assert_eq!(out, v);
            }
        }
    }
}
