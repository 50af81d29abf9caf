//! Exhaustive key recovery against tiny ring-LWE instances.
//!
//! Each instance draws a ternary secret `s`, uniform `a_i` and rounded
//! Gaussian `e_i`, publishing `b_i = a_i·s + e_i` in `Z_q[X]/(X^n + 1)`. The
//! attacker walks every ternary candidate and keeps the one with the smallest
//! centered residual `Σ_i ‖b_i − a_i·ŝ‖²`.

use crate::error::{Error, Result};
use crate::rng::RngStream;

/// Largest search space accepted (3^16 fits).
const MAX_CANDIDATES: f64 = 5e7;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ToyLweParams {
    pub n: usize,
    pub modulus: u32,
    pub error_std: f64,
    /// Number of `(a_i, b_i)` pairs published with the same secret.
    pub samples: usize,
}

impl ToyLweParams {
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.n > 16 {
            return Err(Error::Capacity(format!("toy ring degree {} outside 1..=16", self.n)));
        }
        if 3f64.powi(self.n as i32) > MAX_CANDIDATES {
            return Err(Error::Capacity(format!("3^{} ternary candidates is too many", self.n)));
        }
        if !(2..=4096).contains(&self.modulus) {
            return Err(Error::Capacity(format!("toy modulus {} outside 2..=2^12", self.modulus)));
        }
        if self.samples == 0 {
            return Err(Error::InvalidInput("toy instance needs at least one sample".into()));
        }
        if !(self.error_std >= 0.0 && self.error_std.is_finite()) {
            return Err(Error::InvalidInput(format!("toy error_std {} must be nonnegative", self.error_std)));
        }
        Ok(())
    }
}

/// Toy ring degree standing in for a full CKKS degree:
/// 4096 → 8, 8192 → 12, 16384 → 16.
pub fn toy_degree_for(poly_degree: usize) -> usize {
    let log = poly_degree.max(1).ilog2() as usize;
    (4 * log.saturating_sub(10)).clamp(4, 16)
}

struct Instance {
    secret: Vec<i32>,
    /// `columns[j]` stacks `a_i · X^j` over all samples.
    columns: Vec<Vec<i32>>,
    b: Vec<i32>,
}

fn sample_instance(params: &ToyLweParams, rng: &mut RngStream) -> Instance {
    let (n, q) = (params.n, params.modulus as i32);
    let secret: Vec<i32> = (0..n).map(|_| rng.below(3) as i32 - 1).collect();
    let m = n * params.samples;
    let mut columns = vec![vec![0i32; m]; n];
    let mut b = vec![0i32; m];
    for i in 0..params.samples {
        let a: Vec<i32> = (0..n).map(|_| rng.below(q as usize) as i32).collect();
        for (j, col) in columns.iter_mut().enumerate() {
            for k in 0..n {
                // coefficient k of a·X^j with X^n = −1
                col[i * n + k] = if k >= j { a[k - j] } else { (q - a[k + n - j]) % q };
            }
        }
        for k in 0..n {
            let e = if params.error_std == 0.0 {
                0
            } else {
                (rng.gaussian() * params.error_std).round() as i64
            };
            let dot: i64 = (0..n).map(|j| columns[j][i * n + k] as i64 * secret[j] as i64).sum();
            b[i * n + k] = (dot + e).rem_euclid(q as i64) as i32;
        }
    }
    Instance { secret, columns, b }
}

/// Candidate minimizing the centered residual; the first found wins ties.
///
/// Depth-first over the ternary tree with one residual buffer per level. The
/// last coordinate is scored for all three values in a single pass. Residuals
/// stay in `[0, q)` and the inner loops are branch-free so they vectorize.
fn search(inst: &Instance, q: i32) -> Vec<i32> {
    let n = inst.columns.len();
    let m = inst.b.len();
    let half = q / 2;
    // q < 2^12 and m ≤ 32 keep every partial sum of squares inside i32
    let centered_sq = |r: i32| -> i32 {
        let c = r - (q & -((r > half) as i32));
        c * c
    };
    let wrap = |r: i32| -> i32 {
        let r = r + (q & (r >> 31));
        r - (q & -((r >= q) as i32))
    };
    let mut residuals = vec![0i32; n * m];
    residuals[..m].copy_from_slice(&inst.b);
    let mut choice = vec![0i32; n];
    let mut next = vec![0u8; n];
    let mut best = (i64::MAX, vec![0i32; n]);
    let mut depth = 0usize;
    loop {
        if depth == n - 1 {
            let src = &residuals[depth * m..(depth + 1) * m];
            let mut scores = [0i32; 3];
            for (&r, &c) in src.iter().zip(&inst.columns[depth]) {
                scores[0] += centered_sq(r);
                scores[1] += centered_sq(wrap(r - c));
                scores[2] += centered_sq(wrap(r + c));
            }
            for (score, v) in scores.into_iter().zip([0, 1, -1]) {
                if (score as i64) < best.0 {
                    choice[depth] = v;
                    best = (score as i64, choice.clone());
                }
            }
            if depth == 0 {
                break;
            }
            depth -= 1;
            continue;
        }
        if next[depth] == 3 {
            next[depth] = 0;
            if depth == 0 {
                break;
            }
            depth -= 1;
            continue;
        }
        let v = [0, 1, -1][next[depth] as usize];
        next[depth] += 1;
        choice[depth] = v;
        let (before, after) = residuals.split_at_mut((depth + 1) * m);
        let src = &before[depth * m..];
        for ((d, &r), &c) in after[..m].iter_mut().zip(src).zip(&inst.columns[depth]) {
            *d = wrap(r - v * c);
        }
        depth += 1;
    }
    best.1
}

/// Fraction of `attempts` fresh instances whose recovered key lies within
/// Euclidean distance `delta_tol` of the true secret.
pub fn la_toy_success(params: &ToyLweParams, attempts: usize, delta_tol: f64, rng: &mut RngStream) -> Result<f64> {
    params.validate()?;
    if attempts == 0 {
        return Err(Error::InvalidInput("la_toy_success needs at least one attempt".into()));
    }
    let mut hits = 0usize;
    for _ in 0..attempts {
        let inst = sample_instance(params, rng);
        let guess = search(&inst, params.modulus as i32);
        let dist2: i32 = inst.secret.iter().zip(&guess).map(|(a, b)| (a - b) * (a - b)).sum();
        if (dist2 as f64).sqrt() <= delta_tol {
            hits += 1;
        }
    }
    Ok(hits as f64 / attempts as f64)
}
