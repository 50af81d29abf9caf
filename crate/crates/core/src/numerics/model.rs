use super::{ModelParams, Batch, Matrix};
use crate::error::{Error, Result};
use crate::rng::RngStream;

/// Multinomial logistic regression or a one-hidden-layer tanh MLP.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Architecture {
    LogisticRegression { inputs: usize, classes: usize },
    Mlp { inputs: usize, hidden: usize, classes: usize },
}

impl Architecture {
    pub fn inputs(&self) -> usize {
        match *self {
            Architecture::LogisticRegression { inputs, .. } | Architecture::Mlp { inputs, .. } => {
                inputs
            }
        }
    }

    pub fn classes(&self) -> usize {
        match *self {
            Architecture::LogisticRegression { classes, .. }
            | Architecture::Mlp { classes, .. } => classes,
        }
    }

    /// Layer shapes in storage order: weights `(in, out)` then bias `(1, out)`.
    pub fn param_shapes(&self) -> Vec<(usize, usize)> {
        match *self {
            Architecture::LogisticRegression { inputs, classes } => {
                vec![(inputs, classes), (1, classes)]
            }
            Architecture::Mlp {
                inputs,
                hidden,
                classes,
            } => vec![(inputs, hidden), (1, hidden), (hidden, classes), (1, classes)],
        }
    }

    pub fn zeros(&self) -> ModelParams {
        ModelParams::zeros(self.param_shapes())
    }

    /// Zero weights for logistic regression; Glorot-uniform weights and zero
    /// biases for the MLP.
    pub fn init(&self, rng: &mut RngStream) -> ModelParams {
        let mut params = self.zeros();
        if let Architecture::Mlp {
            inputs,
            hidden,
            classes,
        } = *self
        {
            let ranges = params.layer_ranges();
            for (range, (fan_in, fan_out)) in [(ranges[0].clone(), (inputs, hidden)), (ranges[2].clone(), (hidden, classes))] {
                let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
                for v in &mut params.values[range] {
                    *v = (2.0 * rng.uniform() - 1.0) * limit;
                }
            }
        }
        params
    }

    fn check(&self, model: &ModelParams, batch: &Batch) -> Result<()> {
        if batch.width != self.inputs() {
            return Err(Error::Config(format!(
                "feature width {} does not match architecture input width {}",
                batch.width,
                self.inputs()
            )));
        }
        let expected: usize = self.param_shapes().iter().map(|(r, c)| r * c).sum();
        if model.dim() != expected {
            return Err(Error::DimensionMismatch {
                expected,
                actual: model.dim(),
            });
        }
        if let Some(&bad) = batch.labels.iter().find(|&&y| y >= self.classes()) {
            return Err(Error::InvalidInput(format!(
                "label {bad} outside [0, {})",
                self.classes()
            )));
        }
        Ok(())
    }
}

/// Scratch buffers reused across samples.
struct Workspace {
    hidden: Vec<f64>,
    logits: Vec<f64>,
    dlogits: Vec<f64>,
    dhidden: Vec<f64>,
}

impl Workspace {
    fn new(arch: &Architecture) -> Self {
        let hidden = match *arch {
            Architecture::Mlp { hidden, .. } => hidden,
            _ => 0,
        };
        let c = arch.classes();
        Self {
            hidden: vec![0.0; hidden],
            logits: vec![0.0; c],
            dlogits: vec![0.0; c],
            dhidden: vec![0.0; hidden],
        }
    }
}

/// `out = bias + x · W` with `W` stored row-major `(x.len(), out.len())`.
fn affine(x: &[f64], weights: &[f64], bias: &[f64], out: &mut [f64]) {
    let cols = out.len();
    out.copy_from_slice(bias);
    for (j, &xj) in x.iter().enumerate() {
        if xj == 0.0 {
            continue;
        }
        let row = &weights[j * cols..(j + 1) * cols];
        for (o, &w) in out.iter_mut().zip(row) {
            *o += xj * w;
        }
    }
}

/// `grad_w += x ⊗ delta`, `grad_b += delta`.
fn accumulate_outer(x: &[f64], delta: &[f64], grad_w: &mut [f64], grad_b: &mut [f64]) {
    let cols = delta.len();
    for (j, &xj) in x.iter().enumerate() {
        if xj == 0.0 {
            continue;
        }
        let row = &mut grad_w[j * cols..(j + 1) * cols];
        for (g, &d) in row.iter_mut().zip(delta) {
            *g += xj * d;
        }
    }
    for (g, &d) in grad_b.iter_mut().zip(delta) {
        *g += d;
    }
}

fn log_sum_exp(logits: &[f64]) -> f64 {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    max + logits.iter().map(|l| (l - max).exp()).sum::<f64>().ln()
}

fn softmax_in_place(logits: &mut [f64]) {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for l in logits.iter_mut() {
        *l = (*l - max).exp();
        total += *l;
    }
    for l in logits.iter_mut() {
        *l /= total;
    }
}

fn logits_into(arch: &Architecture, model: &ModelParams, x: &[f64], ws: &mut Workspace) {
    let v = &model.values;
    match *arch {
        Architecture::LogisticRegression { inputs, classes } => {
            let (w, rest) = v.split_at(inputs * classes);
            affine(x, w, &rest[..classes], &mut ws.logits);
        }
        Architecture::Mlp {
            inputs,
            hidden,
            classes,
        } => {
            let (w1, rest) = v.split_at(inputs * hidden);
            let (b1, rest) = rest.split_at(hidden);
            let (w2, b2) = rest.split_at(hidden * classes);
            affine(x, w1, b1, &mut ws.hidden);
            for h in ws.hidden.iter_mut() {
                *h = h.tanh();
            }
            affine(&ws.hidden, w2, b2, &mut ws.logits);
        }
    }
}

/// Class-probability matrix, one softmax row per sample.
pub fn forward(model: &ModelParams, arch: &Architecture, batch: &Batch) -> Result<Matrix> {
    arch.check(model, batch)?;
    let classes = arch.classes();
    let mut ws = Workspace::new(arch);
    let mut data = Vec::with_capacity(batch.len() * classes);
    for i in 0..batch.len() {
        logits_into(arch, model, batch.row(i), &mut ws);
        softmax_in_place(&mut ws.logits);
        data.extend_from_slice(&ws.logits);
    }
    Ok(Matrix {
        rows: batch.len(),
        cols: classes,
        data,
    })
}

/// Arg-max class per sample.
pub fn predict(model: &ModelParams, arch: &Architecture, batch: &Batch) -> Result<Vec<usize>> {
    arch.check(model, batch)?;
    let mut ws = Workspace::new(arch);
    Ok((0..batch.len())
        .map(|i| {
            logits_into(arch, model, batch.row(i), &mut ws);
            argmax(&ws.logits)
        })
        .collect())
}

pub(crate) fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

/// Cross-entropy of each sample under the model.
pub fn per_sample_loss(model: &ModelParams, arch: &Architecture, batch: &Batch) -> Result<Vec<f64>> {
    arch.check(model, batch)?;
    let mut ws = Workspace::new(arch);
    Ok((0..batch.len())
        .map(|i| {
            logits_into(arch, model, batch.row(i), &mut ws);
            log_sum_exp(&ws.logits) - ws.logits[batch.labels[i]]
        })
        .collect())
}

/// Mean cross-entropy over `batch` and its gradient.
pub fn loss_and_grad(
    model: &ModelParams,
    arch: &Architecture,
    batch: &Batch,
) -> Result<(f64, ModelParams)> {
    arch.check(model, batch)?;
    if batch.is_empty() {
        return Err(Error::InvalidInput("empty batch".into()));
    }
    let indices: Vec<usize> = (0..batch.len()).collect();
    let mut grad = vec![0.0; model.dim()];
    let loss = loss_grad_rows(model, arch, batch, &indices, &mut grad);
    Ok((loss, model.with_values(grad)?))
}

/// Mean loss over `rows` of `batch`; writes the mean gradient into `grad`.
/// Callers validate shapes.
pub(crate) fn loss_grad_rows(
    model: &ModelParams,
    arch: &Architecture,
    batch: &Batch,
    rows: &[usize],
    grad: &mut [f64],
) -> f64 {
    grad.iter_mut().for_each(|g| *g = 0.0);
    let scale = 1.0 / rows.len() as f64;
    let classes = arch.classes();
    let mut ws = Workspace::new(arch);
    let mut loss = 0.0;
    for &i in rows {
        let x = batch.row(i);
        let y = batch.labels[i];
        logits_into(arch, model, x, &mut ws);
        loss += log_sum_exp(&ws.logits) - ws.logits[y];
        ws.dlogits.copy_from_slice(&ws.logits);
        softmax_in_place(&mut ws.dlogits);
        ws.dlogits[y] -= 1.0;
        for d in ws.dlogits.iter_mut() {
            *d *= scale;
        }
        match *arch {
            Architecture::LogisticRegression { inputs, .. } => {
                let (gw, gb) = grad.split_at_mut(inputs * classes);
                accumulate_outer(x, &ws.dlogits, gw, gb);
            }
            Architecture::Mlp { inputs, hidden, .. } => {
                let (gw1, rest) = grad.split_at_mut(inputs * hidden);
                let (gb1, rest) = rest.split_at_mut(hidden);
                let (gw2, gb2) = rest.split_at_mut(hidden * classes);
                accumulate_outer(&ws.hidden, &ws.dlogits, gw2, gb2);
                let w2 = &model.values[inputs * hidden + hidden..][..hidden * classes];
                for (j, dh) in ws.dhidden.iter_mut().enumerate() {
                    let row = &w2[j * classes..(j + 1) * classes];
                    let back: f64 = row.iter().zip(&ws.dlogits).map(|(w, d)| w * d).sum();
                    let h = ws.hidden[j];
                    *dh = back * (1.0 - h * h);
                }
                accumulate_outer(x, &ws.dhidden, gw1, gb1);
            }
        }
    }
    loss * scale
}
