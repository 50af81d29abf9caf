//! Synthetic stand-ins for the image and fraud datasets.

use super::Dataset;
use crate::error::{Error, Result};
use crate::numerics::Batch;
use crate::rng::RngStream;

/// Two Gaussian clusters in `features` dimensions with a rare minority
/// cluster.
#[derive(Clone, Debug, PartialEq)]
pub struct TabularSpec {
    pub n: usize,
    pub features: usize,
    pub fraud_rate: f64,
    pub seed: u64,
    /// Offset of the minority cluster mean along every axis (before
    /// standardization).
    pub separation: f64,
    /// Assign label 0 to the minority cluster instead of label 1. Features
    /// are unchanged.
    pub swap_labels: bool,
}

pub fn synth_tabular(n: usize, features: usize, fraud_rate: f64, seed: u64) -> Result<Dataset> {
    synth_tabular_with(&TabularSpec {
        n,
        features,
        fraud_rate,
        seed,
        separation: 1.5,
        swap_labels: false,
    })
}

pub fn synth_tabular_with(spec: &TabularSpec) -> Result<Dataset> {
    if spec.n < 2 {
        return Err(Error::InvalidInput(format!("need at least 2 rows, got {}", spec.n)));
    }
    if !(spec.fraud_rate > 0.0 && spec.fraud_rate < 1.0) {
        return Err(Error::InvalidInput(format!(
            "fraud_rate must lie in (0, 1), got {}",
            spec.fraud_rate
        )));
    }
    if spec.features == 0 {
        return Err(Error::InvalidInput("need at least one feature".into()));
    }
    let f = spec.features;
    let mut rng = RngStream::new(spec.seed, "synth:tabular");
    let mut features = Vec::with_capacity(spec.n * f);
    let mut labels = Vec::with_capacity(spec.n);
    for _ in 0..spec.n {
        let minority = rng.uniform() < spec.fraud_rate;
        for j in 0..f {
            // alternate sign so the clusters differ in direction, not just norm
            let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
            let mean = if minority { sign * spec.separation } else { 0.0 };
            features.push(mean + rng.gaussian());
        }
        labels.push(usize::from(minority != spec.swap_labels));
    }
    standardize(&mut features, f);
    Dataset::new("synth_tabular", 2, Batch::new(features, f, labels)?)
}

/// Zero mean, unit population variance per column.
fn standardize(features: &mut [f64], width: usize) {
    let n = features.len() / width;
    for j in 0..width {
        let mean = (0..n).map(|i| features[i * width + j]).sum::<f64>() / n as f64;
        let var = (0..n)
            .map(|i| (features[i * width + j] - mean).powi(2))
            .sum::<f64>()
            / n as f64;
        let std = if var > 0.0 { var.sqrt() } else { 1.0 };
        for i in 0..n {
            features[i * width + j] = (features[i * width + j] - mean) / std;
        }
    }
}

const SIDE: usize = 28;
const STROKES_PER_CLASS: usize = 3;

/// Procedurally drawn 28x28 "digit" images in `[0, 1]`, 10 classes.
///
/// Each class has a fixed template of line strokes; samples jitter the stroke
/// endpoints, translate by up to two pixels and scale the ink intensity. The
/// result has MNIST's shape and sparsity, which is what the desk-scale runs
/// need when the real IDX files are not available.
pub fn synth_digits(n: usize, seed: u64) -> Result<Dataset> {
    if n == 0 {
        return Err(Error::InvalidInput("need at least one image".into()));
    }
    let classes = 10;
    let mut template_rng = RngStream::new(seed, "synth:digits:templates");
    let templates: Vec<Vec<[f64; 4]>> = (0..classes)
        .map(|_| {
            (0..STROKES_PER_CLASS)
                .map(|_| {
                    let mut p = [0.0; 4];
                    for v in &mut p {
                        *v = 5.0 + template_rng.uniform() * 18.0;
                    }
                    p
                })
                .collect()
        })
        .collect();

    let mut rng = RngStream::new(seed, "synth:digits:samples");
    let mut features = vec![0.0; n * SIDE * SIDE];
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let class = rng.below(classes);
        labels.push(class);
        let dx = rng.below(5) as f64 - 2.0;
        let dy = rng.below(5) as f64 - 2.0;
        let ink = 0.7 + 0.3 * rng.uniform();
        let image = &mut features[i * SIDE * SIDE..(i + 1) * SIDE * SIDE];
        for stroke in &templates[class] {
            let mut p = *stroke;
            for v in &mut p {
                *v += rng.gaussian();
            }
            draw_segment(image, [p[0] + dx, p[1] + dy], [p[2] + dx, p[3] + dy], ink);
        }
    }
    Dataset::new("synth_digits", classes, Batch::new(features, SIDE * SIDE, labels)?)
}

fn draw_segment(image: &mut [f64], from: [f64; 2], to: [f64; 2], ink: f64) {
    const RADIUS: f64 = 0.9;
    let length = ((to[0] - from[0]).powi(2) + (to[1] - from[1]).powi(2)).sqrt();
    let steps = (length * 2.0).ceil().max(1.0) as usize;
    for s in 0..=steps {
        let t = s as f64 / steps as f64;
        let cx = from[0] + t * (to[0] - from[0]);
        let cy = from[1] + t * (to[1] - from[1]);
        let (x0, x1) = ((cx - 2.0).floor().max(0.0) as usize, ((cx + 2.0).ceil() as usize).min(SIDE - 1));
        let (y0, y1) = ((cy - 2.0).floor().max(0.0) as usize, ((cy + 2.0).ceil() as usize).min(SIDE - 1));
        for y in y0..=y1 {
            for x in x0..=x1 {
                let d2 = (x as f64 - cx).powi(2) + (y as f64 - cy).powi(2);
                let value = ink * (-d2 / (2.0 * RADIUS * RADIUS)).exp();
                let px = &mut image[y * SIDE + x];
                if value > *px {
                    *px = value;
                }
            }
        }
    }
}
