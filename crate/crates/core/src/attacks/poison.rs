use super::AdversaryConfig;
use crate::error::Result;
use crate::numerics::{predict, Architecture, Batch, ModelParams};
use crate::rng::RngStream;

/// `⌊β·K⌋` distinct client positions, ascending.
pub fn select_compromised(clients: usize, beta: f64, rng: &mut RngStream) -> Vec<usize> {
    let count = ((beta * clients as f64).floor() as usize).min(clients);
    let mut ids: Vec<usize> = (0..clients).collect();
    rng.shuffle(&mut ids);
    let mut chosen = ids[..count].to_vec();
    chosen.sort_unstable();
    chosen
}

fn chosen_rows(n: usize, fraction: f64, rng: &mut RngStream) -> Vec<usize> {
    let count = ((fraction * n as f64).floor() as usize).min(n);
    let mut rows: Vec<usize> = (0..n).collect();
    rng.shuffle(&mut rows);
    rows.truncate(count);
    rows
}

/// Random label flipping on `⌊β·K⌋` clients: `⌊poison_fraction·n_k⌋` labels per
/// compromised shard are redrawn uniformly from the other classes. Returns
/// the compromised positions.
pub fn poison_shards(shards: &mut [Batch], num_classes: usize, cfg: &AdversaryConfig, rng: &mut RngStream) -> Vec<usize> {
    let compromised = select_compromised(shards.len(), cfg.beta, rng);
    if num_classes < 2 {
        return compromised;
    }
    for &k in &compromised {
        let shard = &mut shards[k];
        for row in chosen_rows(shard.len(), cfg.poison_fraction, rng) {
            let old = shard.labels[row];
            let draw = rng.below(num_classes - 1);
            shard.labels[row] = if draw >= old { draw + 1 } else { draw };
        }
    }
    compromised
}

/// Writes the trigger into `⌊backdoor_fraction·n_k⌋` samples of each
/// compromised shard and relabels them as the target class.
pub fn plant_backdoor(shards: &mut [Batch], cfg: &AdversaryConfig, rng: &mut RngStream) -> Vec<usize> {
    let compromised = select_compromised(shards.len(), cfg.beta, rng);
    for &k in &compromised {
        let shard = &mut shards[k];
        for row in chosen_rows(shard.len(), cfg.backdoor_fraction, rng) {
            let x = shard.row_mut(row);
            for &(i, v) in &cfg.trigger {
                x[i] = v;
            }
            shard.labels[row] = cfg.backdoor_target;
        }
    }
    compromised
}

/// Fraction of triggered non-target samples classified as the target. Returns
/// `None` when every sample already belongs to the target class.
pub fn backdoor_success(
    model: &ModelParams,
    arch: &Architecture,
    test: &Batch,
    cfg: &AdversaryConfig,
) -> Result<Option<f64>> {
    let keep: Vec<usize> = (0..test.len()).filter(|&i| test.labels[i] != cfg.backdoor_target).collect();
    if keep.is_empty() {
        return Ok(None);
    }
    let mut triggered = test.select(&keep);
    for r in 0..triggered.len() {
        let x = triggered.row_mut(r);
        for &(i, v) in &cfg.trigger {
            x[i] = v;
        }
    }
    let predictions = predict(model, arch, &triggered)?;
    let hits = predictions.iter().filter(|&&p| p == cfg.backdoor_target).count();
    Ok(Some(hits as f64 / keep.len() as f64))
}
