use rand_distr::{Distribution, Gamma};

use super::Dataset;
use crate::error::{Error, Result};
use crate::rng::RngStream;

const MAX_ATTEMPTS: usize = 100;

#[derive(Clone, Debug, PartialEq)]
pub enum PartitionMode {
    /// Uniform shuffle, shard sizes differ by at most one.
    Iid,
    /// Per class, route samples to clients by a `Dirichlet(alpha)` draw.
    Dirichlet { alpha: f64 },
    /// Equal-size shards with a configured rate of `positive_class` per client
    /// group. `weights[g]` is the share of clients in group `g` whose positive
    /// rate is `fractions[g]`.
    LabelFraction {
        fractions: Vec<f64>,
        weights: Vec<f64>,
        positive_class: usize,
    },
}

#[derive(Clone, Debug, PartialEq)]
pub struct PartitionSpec {
    pub mode: PartitionMode,
    pub clients: usize,
    pub seed: u64,
}

/// One client's slice of the parent dataset.
#[derive(Clone, Debug, PartialEq)]
pub struct ClientShard {
    pub client_id: usize,
    pub indices: Vec<usize>,
    /// Sampling probability, `|shard| / Σ |shards|`.
    pub p_k: f64,
}

/// Splits `dataset` across `spec.clients` disjoint, nonempty shards.
///
/// Randomized modes are retried with fresh streams
/// (`"partition:attempt:{i}"`) until every shard is nonempty.
pub fn partition(dataset: &Dataset, spec: &PartitionSpec) -> Result<Vec<ClientShard>> {
    validate(dataset, spec)?;
    for attempt in 0..MAX_ATTEMPTS {
        let mut rng = RngStream::new(spec.seed, format!("partition:attempt:{attempt}"));
        let assignment = match &spec.mode {
            PartitionMode::Iid => iid(dataset.len(), spec.clients, &mut rng),
            PartitionMode::Dirichlet { alpha } => dirichlet(dataset, spec.clients, *alpha, &mut rng),
            PartitionMode::LabelFraction {
                fractions,
                weights,
                positive_class,
            } => label_fraction(dataset, spec.clients, fractions, weights, *positive_class, &mut rng),
        };
        if assignment.iter().all(|s| !s.is_empty()) {
            return Ok(into_shards(assignment));
        }
    }
    Err(Error::Partition(format!(
        "could not give all {} clients a nonempty shard after {MAX_ATTEMPTS} attempts",
        spec.clients
    )))
}

fn validate(dataset: &Dataset, spec: &PartitionSpec) -> Result<()> {
    if dataset.is_empty() {
        return Err(Error::InvalidInput("cannot partition an empty dataset".into()));
    }
    if spec.clients == 0 {
        return Err(Error::Config("partition.clients must be at least 1".into()));
    }
    match &spec.mode {
        PartitionMode::Dirichlet { alpha } if !(*alpha > 0.0 && alpha.is_finite()) => {
            Err(Error::Config(format!("partition.alpha must be positive, got {alpha}")))
        }
        PartitionMode::LabelFraction {
            fractions,
            weights,
            positive_class,
        } => {
            if fractions.is_empty() || fractions.len() != weights.len() {
                return Err(Error::Config(
                    "partition.fractions and partition.fraction_weights must be nonempty and equally long".into(),
                ));
            }
            if fractions.iter().any(|f| !(0.0..=1.0).contains(f)) {
                return Err(Error::Config("partition.fractions must lie in [0, 1]".into()));
            }
            if weights.iter().any(|w| !(*w >= 0.0)) || weights.iter().sum::<f64>() <= 0.0 {
                return Err(Error::Config("partition.fraction_weights must be nonnegative with positive sum".into()));
            }
            if *positive_class >= dataset.num_classes {
                return Err(Error::Config(format!(
                    "partition.positive_class {positive_class} outside [0, {})",
                    dataset.num_classes
                )));
            }
            Ok(())
        }
        _ => Ok(()),
    }
}

fn into_shards(assignment: Vec<Vec<usize>>) -> Vec<ClientShard> {
    let total: usize = assignment.iter().map(Vec::len).sum();
    assignment
        .into_iter()
        .enumerate()
        .map(|(client_id, indices)| ClientShard {
            client_id,
            p_k: indices.len() as f64 / total as f64,
            indices,
        })
        .collect()
}

fn iid(n: usize, clients: usize, rng: &mut RngStream) -> Vec<Vec<usize>> {
    let mut order: Vec<usize> = (0..n).collect();
    rng.shuffle(&mut order);
    let base = n / clients;
    let extra = n % clients;
    let mut out = Vec::with_capacity(clients);
    let mut start = 0;
    for k in 0..clients {
        let size = base + usize::from(k < extra);
        out.push(order[start..start + size].to_vec());
        start += size;
    }
    out
}

/// Client proportions for one class; falls back to uniform if every gamma
/// draw underflows.
pub(crate) fn dirichlet_draw(clients: usize, alpha: f64, rng: &mut RngStream) -> Vec<f64> {
    let gamma = Gamma::new(alpha, 1.0).expect("alpha validated positive");
    let mut draws: Vec<f64> = (0..clients).map(|_| gamma.sample(rng)).collect();
    let total: f64 = draws.iter().sum();
    if total > 0.0 && total.is_finite() {
        draws.iter_mut().for_each(|d| *d /= total);
    } else {
        draws.iter_mut().for_each(|d| *d = 1.0 / clients as f64);
    }
    draws
}

fn dirichlet(dataset: &Dataset, clients: usize, alpha: f64, rng: &mut RngStream) -> Vec<Vec<usize>> {
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); dataset.num_classes];
    for (i, &y) in dataset.samples.labels.iter().enumerate() {
        by_class[y].push(i);
    }
    let mut out = vec![Vec::new(); clients];
    for members in &by_class {
        let proportions = dirichlet_draw(clients, alpha, rng);
        let mut cumulative = Vec::with_capacity(clients);
        let mut acc = 0.0;
        for p in &proportions {
            acc += p;
            cumulative.push(acc);
        }
        for &i in members {
            let u = rng.uniform();
            let k = cumulative.iter().position(|&c| u < c).unwrap_or(clients - 1);
            out[k].push(i);
        }
    }
    for shard in &mut out {
        shard.sort_unstable();
    }
    out
}

fn label_fraction(
    dataset: &Dataset,
    clients: usize,
    fractions: &[f64],
    weights: &[f64],
    positive_class: usize,
    rng: &mut RngStream,
) -> Vec<Vec<usize>> {
    let (mut positives, mut negatives): (Vec<usize>, Vec<usize>) =
        (0..dataset.len()).partition(|&i| dataset.samples.labels[i] == positive_class);
    rng.shuffle(&mut positives);
    rng.shuffle(&mut negatives);

    // contiguous client groups sized by weight; the last group absorbs rounding
    let weight_sum: f64 = weights.iter().sum();
    let mut group_of = Vec::with_capacity(clients);
    for (g, w) in weights.iter().enumerate() {
        let count = if g + 1 == weights.len() {
            clients - group_of.len()
        } else {
            ((w / weight_sum) * clients as f64).round() as usize
        };
        for _ in 0..count.min(clients - group_of.len()) {
            group_of.push(g);
        }
    }

    let size = dataset.len() / clients;
    let mut out = Vec::with_capacity(clients);
    for &group in group_of.iter().take(clients) {
        let want_pos = ((fractions[group] * size as f64).round() as usize).min(size);
        let take_pos = want_pos.min(positives.len());
        let take_neg = (size - take_pos).min(negatives.len());
        let mut shard: Vec<usize> = positives.drain(..take_pos).collect();
        shard.extend(negatives.drain(..take_neg));
        // top up from whichever pool still has samples
        let short = size - shard.len();
        let extra = short.min(positives.len());
        shard.extend(positives.drain(..extra));
        shard.sort_unstable();
        out.push(shard);
    }
    out
}
