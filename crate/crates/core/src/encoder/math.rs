//! Dense building blocks with hand-written backward passes.

use ndarray::{Array1, Array2, ArrayView2, Axis, Zip};

pub const LN_EPS: f64 = 1e-5;

const FRAC_1_SQRT_2: f64 = std::f64::consts::FRAC_1_SQRT_2;
const FRAC_1_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

/// Exact (erf-based) GeLU.
pub fn gelu(x: f64) -> f64 {
    0.5 * x * (1.0 + libm::erf(x * FRAC_1_SQRT_2))
}

pub fn gelu_grad(x: f64) -> f64 {
    0.5 * (1.0 + libm::erf(x * FRAC_1_SQRT_2)) + x * FRAC_1_SQRT_2PI * (-0.5 * x * x).exp()
}

/// `x · w + b` for row-major activations.
pub fn linear(x: &ArrayView2<f64>, w: &Array2<f64>, b: &Array1<f64>) -> Array2<f64> {
    x.dot(w) + b
}

/// Accumulates weight and bias gradients of [`linear`] and returns `∂x`.
pub fn linear_backward(
    x: &ArrayView2<f64>,
    w: &Array2<f64>,
    dy: &Array2<f64>,
    dw: &mut Array2<f64>,
    db: &mut Array1<f64>,
) -> Array2<f64> {
    *dw += &x.t().dot(dy);
    *db += &dy.sum_axis(Axis(0));
    dy.dot(&w.t())
}

#[derive(Debug, Clone)]
pub struct LnCache {
    pub xhat: Array2<f64>,
    pub inv_std: Array1<f64>,
}

/// Row-wise layer normalization followed by the affine `gain`, `bias`.
pub fn layer_norm(x: &Array2<f64>, gain: &Array1<f64>, bias: &Array1<f64>) -> (Array2<f64>, LnCache) {
    let mean = x.mean_axis(Axis(1)).expect("non-empty rows");
    let centered = x - &mean.view().insert_axis(Axis(1));
    let var = centered.mapv(|v| v * v).mean_axis(Axis(1)).expect("non-empty rows");
    let inv_std = var.mapv(|v| 1.0 / (v + LN_EPS).sqrt());
    let xhat = centered * inv_std.view().insert_axis(Axis(1));
    let y = &xhat * gain + bias;
    (y, LnCache { xhat, inv_std })
}

pub fn layer_norm_backward(
    dy: &Array2<f64>,
    cache: &LnCache,
    gain: &Array1<f64>,
    dgain: &mut Array1<f64>,
    dbias: &mut Array1<f64>,
) -> Array2<f64> {
    *dgain += &(dy * &cache.xhat).sum_axis(Axis(0));
    *dbias += &dy.sum_axis(Axis(0));
    let dxhat = dy * gain;
    let mean_d = dxhat.mean_axis(Axis(1)).expect("non-empty rows");
    let mean_dx = (&dxhat * &cache.xhat).mean_axis(Axis(1)).expect("non-empty rows");
    let mut dx = dxhat;
    Zip::from(dx.rows_mut())
        .and(cache.xhat.rows())
        .and(&mean_d)
        .and(&mean_dx)
        .and(&cache.inv_std)
        .for_each(|mut row, xh, &md, &mdx, &inv| {
            Zip::from(&mut row).and(&xh).for_each(|d, &x| {
                *d = inv * (*d - md - x * mdx);
            });
        });
    dx
}

/// Softmax of one logit vector; `-inf` entries get probability 0.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let m = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return vec![0.0; logits.len()];
    }
    let e: Vec<f64> = logits.iter().map(|&v| (v - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}

/// Cross-entropy `−log p[target]` of a softmax and its gradient w.r.t. the logits.
pub fn cross_entropy(logits: &[f64], target: usize) -> (f64, Vec<f64>) {
    let p = softmax(logits);
    let m = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = m + logits.iter().map(|&v| (v - m).exp()).sum::<f64>().ln();
    let loss = lse - logits[target];
    let mut g = p;
    g[target] -= 1.0;
    (loss, g)
}
