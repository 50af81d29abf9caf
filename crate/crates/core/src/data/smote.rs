use super::Dataset;
use crate::error::{Error, Result};
use crate::rng::RngStream;

/// One synthetic sample: `base + u · (neighbor − base)`, indices into the
/// input dataset.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SmoteDraw {
    pub base: usize,
    pub neighbor: usize,
    pub u: f64,
}

/// Oversamples `minority_class` until it makes up at least `target_ratio` of
/// the dataset. The original rows stay as a prefix.
pub fn smote(
    dataset: &Dataset,
    minority_class: usize,
    k_neighbors: usize,
    target_ratio: f64,
    rng: &mut RngStream,
) -> Result<Dataset> {
    smote_logged(dataset, minority_class, k_neighbors, target_ratio, rng).map(|(d, _)| d)
}

/// [`smote`] that also returns the draws behind each synthetic row.
pub fn smote_logged(
    dataset: &Dataset,
    minority_class: usize,
    k_neighbors: usize,
    target_ratio: f64,
    rng: &mut RngStream,
) -> Result<(Dataset, Vec<SmoteDraw>)> {
    if !(0.0..1.0).contains(&target_ratio) {
        return Err(Error::InvalidInput(format!("target_ratio must lie in [0, 1), got {target_ratio}")));
    }
    let minority: Vec<usize> = (0..dataset.len())
        .filter(|&i| dataset.samples.labels[i] == minority_class)
        .collect();
    if minority.len() <= k_neighbors || k_neighbors == 0 {
        return Err(Error::InvalidInput(format!(
            "SMOTE needs more than k_neighbors={k_neighbors} minority samples (and k ≥ 1), found {}",
            minority.len()
        )));
    }
    let n = dataset.len() as f64;
    let m = minority.len() as f64;
    let needed = ((target_ratio * n - m) / (1.0 - target_ratio) - 1e-9).ceil();
    if needed <= 0.0 {
        return Ok((dataset.clone(), Vec::new()));
    }
    let needed = needed as usize;

    let neighbors = nearest_neighbors(dataset, &minority, k_neighbors);
    let mut out = dataset.clone();
    let mut draws = Vec::with_capacity(needed);
    let width = dataset.width();
    let mut row = vec![0.0; width];
    for _ in 0..needed {
        let slot = rng.below(minority.len());
        let base = minority[slot];
        let neighbor = neighbors[slot][rng.below(k_neighbors)];
        let u = rng.uniform();
        let (xb, xn) = (dataset.samples.row(base), dataset.samples.row(neighbor));
        for j in 0..width {
            row[j] = xb[j] + u * (xn[j] - xb[j]);
        }
        out.samples.push(&row, minority_class);
        draws.push(SmoteDraw { base, neighbor, u });
    }
    Ok((out, draws))
}

/// `k` nearest minority neighbors (Euclidean, excluding self, ties by index)
/// for each minority sample.
fn nearest_neighbors(dataset: &Dataset, minority: &[usize], k: usize) -> Vec<Vec<usize>> {
    minority
        .iter()
        .map(|&i| {
            let xi = dataset.samples.row(i);
            let mut dists: Vec<(f64, usize)> = minority
                .iter()
                .filter(|&&j| j != i)
                .map(|&j| {
                    let d = xi
                        .iter()
                        .zip(dataset.samples.row(j))
                        .map(|(a, b)| (a - b).powi(2))
                        .sum::<f64>();
                    (d, j)
                })
                .collect();
            dists.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            dists.into_iter().take(k).map(|(_, j)| j).collect()
        })
        .collect()
}
