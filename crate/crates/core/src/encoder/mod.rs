//! A small post-norm transformer encoder with exact, hand-written gradients.
//!
//! Each layer computes
//!
//! ```text
//! y = LN1(x + MHA(x));  out = LN2(y + W2·gelu(W1·y + b1) + b2)
//! ```
//!
//! followed by a final layer norm over the last layer's output. Keys with a
//! `false` mask bit get zero attention weight, so masked positions never
//! influence unmasked outputs. There are no segment embeddings; separator
//! tokens mark the boundaries between input segments.

pub mod checkpoint;
pub mod math;
pub mod optim;
pub mod vocab;

use ndarray::{s, Array1, Array2, ArrayViewD, ArrayViewMutD, Axis};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use math::{gelu, gelu_grad, layer_norm, layer_norm_backward, linear, linear_backward, LnCache};

pub use vocab::{EncInput, Vocab, CLS, PAD, SEP, UNK};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EncoderConfig {
    pub d_model: usize,
    pub n_heads: usize,
    pub n_layers: usize,
    pub d_ff: usize,
    pub max_len: usize,
    pub vocab_size: usize,
    pub seed: u64,
    /// Standard deviation of the normal initializer for weight matrices and
    /// embeddings.
    pub init_std: f64,
}

impl Default for EncoderConfig {
    fn default() -> Self {
        EncoderConfig {
            d_model: 64,
            n_heads: 4,
            n_layers: 2,
            d_ff: 256,
            max_len: 256,
            vocab_size: 4,
            seed: 0,
            init_std: 0.02,
        }
    }
}

impl EncoderConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(format!("{m}: {self:?}")));
        if self.d_model == 0 || self.n_heads == 0 || self.d_ff == 0 || self.n_layers == 0 {
            return bad("dimensions must be positive");
        }
        if !self.d_model.is_multiple_of(self.n_heads) {
            return bad("d_model must be divisible by n_heads");
        }
        if self.max_len < 8 {
            return bad("max_len must be at least 8");
        }
        if self.vocab_size < 4 {
            return bad("vocab_size must cover the special tokens");
        }
        if !(self.init_std.is_finite() && self.init_std >= 0.0) {
            return bad("init_std must be finite and non-negative");
        }
        Ok(())
    }

    pub fn head_dim(&self) -> usize {
        self.d_model / self.n_heads
    }
}

/// A named collection of trainable `f64` arrays. Gradients and optimizer
/// moments use the same type as the parameters they belong to.
pub trait Params: Clone + Send + Sync {
    fn arrays(&self) -> Vec<(String, ArrayViewD<'_, f64>)>;
    fn arrays_mut(&mut self) -> Vec<(String, ArrayViewMutD<'_, f64>)>;

    fn zeros_like(&self) -> Self {
        let mut z = self.clone();
        for (_, mut a) in z.arrays_mut() {
            a.fill(0.0);
        }
        z
    }

    fn num_params(&self) -> usize {
        self.arrays().iter().map(|(_, a)| a.len()).sum()
    }

    fn add_assign(&mut self, other: &Self) {
        let src = other.arrays();
        for ((_, mut a), (_, b)) in self.arrays_mut().into_iter().zip(src) {
            a += &b;
        }
    }

    fn scale(&mut self, factor: f64) {
        for (_, mut a) in self.arrays_mut() {
            a.mapv_inplace(|v| v * factor);
        }
    }

    /// Name of the first array holding a non-finite value.
    fn first_non_finite(&self) -> Option<String> {
        self.arrays()
            .into_iter()
            .find(|(_, a)| a.iter().any(|v| !v.is_finite()))
            .map(|(n, _)| n)
    }

    fn sq_norm(&self) -> f64 {
        self.arrays()
            .iter()
            .map(|(_, a)| a.iter().map(|v| v * v).sum::<f64>())
            .sum()
    }

    /// All values flattened in array order.
    fn to_flat(&self) -> Vec<f64> {
        self.arrays()
            .iter()
            .flat_map(|(_, a)| a.iter().copied().collect::<Vec<_>>())
            .collect()
    }

    /// Sets the `index`-th value in [`Params::to_flat`] order.
    fn set_flat(&mut self, mut index: usize, value: f64) {
        for (_, mut a) in self.arrays_mut() {
            if index < a.len() {
                *a.iter_mut().nth(index).expect("index in range") = value;
                return;
            }
            index -= a.len();
        }
        panic!("flat index out of range");
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerParams {
    pub wq: Array2<f64>,
    pub bq: Array1<f64>,
    pub wk: Array2<f64>,
    pub bk: Array1<f64>,
    pub wv: Array2<f64>,
    pub bv: Array1<f64>,
    pub wo: Array2<f64>,
    pub bo: Array1<f64>,
    pub ln1_g: Array1<f64>,
    pub ln1_b: Array1<f64>,
    pub w1: Array2<f64>,
    pub b1: Array1<f64>,
    pub w2: Array2<f64>,
    pub b2: Array1<f64>,
    pub ln2_g: Array1<f64>,
    pub ln2_b: Array1<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EncoderParams {
    pub config: EncoderConfig,
    pub tok_emb: Array2<f64>,
    pub pos_emb: Array2<f64>,
    pub layers: Vec<LayerParams>,
    pub lnf_g: Array1<f64>,
    pub lnf_b: Array1<f64>,
}

impl Params for EncoderParams {
    fn arrays(&self) -> Vec<(String, ArrayViewD<'_, f64>)> {
        let mut v = vec![
            ("tok_emb".to_string(), self.tok_emb.view().into_dyn()),
            ("pos_emb".to_string(), self.pos_emb.view().into_dyn()),
        ];
        for (i, l) in self.layers.iter().enumerate() {
            let p = |n: &str| format!("layer{i}.{n}");
            v.extend([
                (p("wq"), l.wq.view().into_dyn()),
                (p("bq"), l.bq.view().into_dyn()),
                (p("wk"), l.wk.view().into_dyn()),
                (p("bk"), l.bk.view().into_dyn()),
                (p("wv"), l.wv.view().into_dyn()),
                (p("bv"), l.bv.view().into_dyn()),
                (p("wo"), l.wo.view().into_dyn()),
                (p("bo"), l.bo.view().into_dyn()),
                (p("ln1_g"), l.ln1_g.view().into_dyn()),
                (p("ln1_b"), l.ln1_b.view().into_dyn()),
                (p("w1"), l.w1.view().into_dyn()),
                (p("b1"), l.b1.view().into_dyn()),
                (p("w2"), l.w2.view().into_dyn()),
                (p("b2"), l.b2.view().into_dyn()),
                (p("ln2_g"), l.ln2_g.view().into_dyn()),
                (p("ln2_b"), l.ln2_b.view().into_dyn()),
            ]);
        }
        v.push(("lnf_g".to_string(), self.lnf_g.view().into_dyn()));
        v.push(("lnf_b".to_string(), self.lnf_b.view().into_dyn()));
        v
    }

    fn arrays_mut(&mut self) -> Vec<(String, ArrayViewMutD<'_, f64>)> {
        let mut v = vec![
            ("tok_emb".to_string(), self.tok_emb.view_mut().into_dyn()),
            ("pos_emb".to_string(), self.pos_emb.view_mut().into_dyn()),
        ];
        for (i, l) in self.layers.iter_mut().enumerate() {
            let p = |n: &str| format!("layer{i}.{n}");
            v.extend([
                (p("wq"), l.wq.view_mut().into_dyn()),
                (p("bq"), l.bq.view_mut().into_dyn()),
                (p("wk"), l.wk.view_mut().into_dyn()),
                (p("bk"), l.bk.view_mut().into_dyn()),
                (p("wv"), l.wv.view_mut().into_dyn()),
                (p("bv"), l.bv.view_mut().into_dyn()),
                (p("wo"), l.wo.view_mut().into_dyn()),
                (p("bo"), l.bo.view_mut().into_dyn()),
                (p("ln1_g"), l.ln1_g.view_mut().into_dyn()),
                (p("ln1_b"), l.ln1_b.view_mut().into_dyn()),
                (p("w1"), l.w1.view_mut().into_dyn()),
                (p("b1"), l.b1.view_mut().into_dyn()),
                (p("w2"), l.w2.view_mut().into_dyn()),
                (p("b2"), l.b2.view_mut().into_dyn()),
                (p("ln2_g"), l.ln2_g.view_mut().into_dyn()),
                (p("ln2_b"), l.ln2_b.view_mut().into_dyn()),
            ]);
        }
        v.push(("lnf_g".to_string(), self.lnf_g.view_mut().into_dyn()));
        v.push(("lnf_b".to_string(), self.lnf_b.view_mut().into_dyn()));
        v
    }
}

pub fn normal_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize, std: f64) -> Array2<f64> {
    if std == 0.0 {
        return Array2::zeros((rows, cols));
    }
    let dist = Normal::new(0.0, std).expect("valid std");
    Array2::from_shape_fn((rows, cols), |_| dist.sample(rng))
}

/// Normal(0, `init_std`) weights and embeddings, zero biases, unit layer-norm
/// gains. Deterministic in `config.seed`.
pub fn init_params(config: &EncoderConfig) -> Result<EncoderParams> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let (d, f, std) = (config.d_model, config.d_ff, config.init_std);
    let tok_emb = normal_matrix(&mut rng, config.vocab_size, d, std);
    let pos_emb = normal_matrix(&mut rng, config.max_len, d, std);
    let layers = (0..config.n_layers)
        .map(|_| LayerParams {
            wq: normal_matrix(&mut rng, d, d, std),
            bq: Array1::zeros(d),
            wk: normal_matrix(&mut rng, d, d, std),
            bk: Array1::zeros(d),
            wv: normal_matrix(&mut rng, d, d, std),
            bv: Array1::zeros(d),
            wo: normal_matrix(&mut rng, d, d, std),
            bo: Array1::zeros(d),
            ln1_g: Array1::ones(d),
            ln1_b: Array1::zeros(d),
            w1: normal_matrix(&mut rng, d, f, std),
            b1: Array1::zeros(f),
            w2: normal_matrix(&mut rng, f, d, std),
            b2: Array1::zeros(d),
            ln2_g: Array1::ones(d),
            ln2_b: Array1::zeros(d),
        })
        .collect();
    Ok(EncoderParams {
        config: *config,
        tok_emb,
        pos_emb,
        layers,
        lnf_g: Array1::ones(d),
        lnf_b: Array1::zeros(d),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct EncodeOutput {
    /// Final hidden states, one row per input position.
    pub hidden: Array2<f64>,
    /// Row 0 of `hidden`.
    pub cls: Array1<f64>,
}

struct LayerCache {
    x: Array2<f64>,
    q: Array2<f64>,
    k: Array2<f64>,
    v: Array2<f64>,
    probs: Vec<Array2<f64>>,
    ctx: Array2<f64>,
    ln1: LnCache,
    y1: Array2<f64>,
    pre_act: Array2<f64>,
    act: Array2<f64>,
    ln2: LnCache,
}

/// Activations retained by [`forward`] for [`backward`].
pub struct EncodeTrace {
    ids: Vec<usize>,
    layers: Vec<LayerCache>,
    lnf: LnCache,
}

fn check_input(params: &EncoderParams, input: &EncInput) -> Result<()> {
    let cfg = &params.config;
    if input.ids.len() != input.mask.len() {
        return Err(Error::InvalidConfig(format!(
            "mask length {} differs from input length {}",
            input.mask.len(),
            input.ids.len()
        )));
    }
    if input.ids.is_empty() {
        return Err(Error::InvalidConfig("empty encoder input".into()));
    }
    if input.ids.len() > cfg.max_len {
        return Err(Error::InputTooLong {
            len: input.ids.len(),
            max_len: cfg.max_len,
        });
    }
    if let Some(&id) = input.ids.iter().find(|&&id| id >= cfg.vocab_size) {
        return Err(Error::TokenOutOfRange {
            id,
            vocab_size: cfg.vocab_size,
        });
    }
    Ok(())
}

/// Q, K, V, per-head attention probabilities and the concatenated context.
type AttentionOut = (Array2<f64>, Array2<f64>, Array2<f64>, Vec<Array2<f64>>, Array2<f64>);

fn attention_forward(l: &LayerParams, x: &Array2<f64>, mask: &[bool], n_heads: usize) -> AttentionOut {
    let (len, d) = x.dim();
    let dh = d / n_heads;
    let scale = 1.0 / (dh as f64).sqrt();
    let xv = x.view();
    let q = linear(&xv, &l.wq, &l.bq);
    let k = linear(&xv, &l.wk, &l.bk);
    let v = linear(&xv, &l.wv, &l.bv);
    let mut ctx = Array2::zeros((len, d));
    let mut probs = Vec::with_capacity(n_heads);
    for h in 0..n_heads {
        let cols = s![.., h * dh..(h + 1) * dh];
        let mut scores = q.slice(cols).dot(&k.slice(cols).t()) * scale;
        for mut row in scores.rows_mut() {
            for (j, s) in row.iter_mut().enumerate() {
                if !mask[j] {
                    *s = f64::NEG_INFINITY;
                }
            }
            let p = math::softmax(row.as_slice().expect("contiguous row"));
            row.iter_mut().zip(p).for_each(|(s, p)| *s = p);
        }
        ctx.slice_mut(cols).assign(&scores.dot(&v.slice(cols)));
        probs.push(scores);
    }
    (q, k, v, probs, ctx)
}

/// Runs the encoder and keeps the activations needed for [`backward`].
pub fn forward(params: &EncoderParams, input: &EncInput) -> Result<(EncodeOutput, EncodeTrace)> {
    check_input(params, input)?;
    let cfg = &params.config;
    let len = input.ids.len();
    let mut x = Array2::zeros((len, cfg.d_model));
    for (p, &id) in input.ids.iter().enumerate() {
        let mut row = x.row_mut(p);
        row += &params.tok_emb.row(id);
        row += &params.pos_emb.row(p);
    }

    let mut caches = Vec::with_capacity(params.layers.len());
    for l in &params.layers {
        let (q, k, v, probs, ctx) = attention_forward(l, &x, &input.mask, cfg.n_heads);
        let attn = linear(&ctx.view(), &l.wo, &l.bo);
        let (y1, ln1) = layer_norm(&(&x + &attn), &l.ln1_g, &l.ln1_b);
        let pre_act = linear(&y1.view(), &l.w1, &l.b1);
        let act = pre_act.mapv(gelu);
        let ff = linear(&act.view(), &l.w2, &l.b2);
        let (out, ln2) = layer_norm(&(&y1 + &ff), &l.ln2_g, &l.ln2_b);
        caches.push(LayerCache {
            x: std::mem::replace(&mut x, out),
            q,
            k,
            v,
            probs,
            ctx,
            ln1,
            y1,
            pre_act,
            act,
            ln2,
        });
    }
    let (hidden, lnf) = layer_norm(&x, &params.lnf_g, &params.lnf_b);
    let cls = hidden.row(0).to_owned();
    Ok((
        EncodeOutput { hidden, cls },
        EncodeTrace {
            ids: input.ids.clone(),
            layers: caches,
            lnf,
        },
    ))
}

pub fn encode(params: &EncoderParams, input: &EncInput) -> Result<EncodeOutput> {
    forward(params, input).map(|(out, _)| out)
}

/// Back-propagates `d_hidden` (gradient w.r.t. the final hidden states) and
/// accumulates parameter gradients into `grads`.
pub fn backward(params: &EncoderParams, trace: &EncodeTrace, d_hidden: &Array2<f64>, grads: &mut EncoderParams) {
    let cfg = &params.config;
    let dh = cfg.head_dim();
    let scale = 1.0 / (dh as f64).sqrt();
    let mut dx = layer_norm_backward(d_hidden, &trace.lnf, &params.lnf_g, &mut grads.lnf_g, &mut grads.lnf_b);

    for ((l, c), g) in params
        .layers
        .iter()
        .zip(&trace.layers)
        .zip(grads.layers.iter_mut())
        .rev()
    {
        let dr2 = layer_norm_backward(&dx, &c.ln2, &l.ln2_g, &mut g.ln2_g, &mut g.ln2_b);
        let dact = linear_backward(&c.act.view(), &l.w2, &dr2, &mut g.w2, &mut g.b2);
        let mut dpre = dact;
        dpre.zip_mut_with(&c.pre_act, |d, &z| *d *= gelu_grad(z));
        let mut dy1 = linear_backward(&c.y1.view(), &l.w1, &dpre, &mut g.w1, &mut g.b1);
        dy1 += &dr2;
        let dr1 = layer_norm_backward(&dy1, &c.ln1, &l.ln1_g, &mut g.ln1_g, &mut g.ln1_b);

        let dctx = linear_backward(&c.ctx.view(), &l.wo, &dr1, &mut g.wo, &mut g.bo);
        let mut dq = Array2::zeros(c.q.dim());
        let mut dk = Array2::zeros(c.k.dim());
        let mut dv = Array2::zeros(c.v.dim());
        for (h, p) in c.probs.iter().enumerate() {
            let cols = s![.., h * dh..(h + 1) * dh];
            let dctx_h = dctx.slice(cols);
            let dp = dctx_h.dot(&c.v.slice(cols).t());
            dv.slice_mut(cols).assign(&p.t().dot(&dctx_h));
            let row_dot = (&dp * p).sum_axis(Axis(1));
            let ds = (dp - &row_dot.insert_axis(Axis(1))) * p * scale;
            dq.slice_mut(cols).assign(&ds.dot(&c.k.slice(cols)));
            dk.slice_mut(cols).assign(&ds.t().dot(&c.q.slice(cols)));
        }
        let xv = c.x.view();
        let mut dxl = dr1;
        dxl += &linear_backward(&xv, &l.wq, &dq, &mut g.wq, &mut g.bq);
        dxl += &linear_backward(&xv, &l.wk, &dk, &mut g.wk, &mut g.bk);
        dxl += &linear_backward(&xv, &l.wv, &dv, &mut g.wv, &mut g.bv);
        dx = dxl;
    }

    for (p, &id) in trace.ids.iter().enumerate() {
        let row = dx.row(p);
        let mut t = grads.tok_emb.row_mut(id);
        t += &row;
        let mut q = grads.pos_emb.row_mut(p);
        q += &row;
    }
}

/// Gradient of the final hidden states that is non-zero only at the CLS row.
pub fn cls_grad(len: usize, d_cls: &Array1<f64>) -> Array2<f64> {
    let mut g = Array2::zeros((len, d_cls.len()));
    g.row_mut(0).assign(d_cls);
    g
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand::Rng;

    fn small() -> EncoderConfig {
        EncoderConfig {
            d_model: 8,
            n_heads: 2,
            n_layers: 2,
            d_ff: 12,
            max_len: 12,
            vocab_size: 10,
            seed: 3,
            init_std: 0.5,
        }
    }

    #[test]
    fn init_is_deterministic() {
        let a = init_params(&small()).unwrap();
        assert_eq!(a, init_params(&small()).unwrap());
        assert!(a.layers.iter().all(|l| l.ln1_g.iter().all(|&g| g == 1.0)));
        assert!(a.lnf_g.iter().all(|&g| g == 1.0));
        assert!(a.layers[0].bq.iter().all(|&b| b == 0.0));
        let b = init_params(&EncoderConfig { seed: 4, ..small() }).unwrap();
        assert_ne!(a.to_flat(), b.to_flat());
    }

    #[test]
    fn config_validation() {
        assert!(init_params(&EncoderConfig { n_heads: 3, ..small() }).is_err());
        assert!(init_params(&EncoderConfig { max_len: 7, ..small() }).is_err());
        assert!(EncoderConfig::default().validate().is_ok());
    }

    #[test]
    fn shapes_and_errors() {
        let p = init_params(&small()).unwrap();
        let out = encode(&p, &EncInput::new(vec![2, 5, 6, 3])).unwrap();
        assert_eq!(out.hidden.dim(), (4, 8));
        assert_eq!(out.cls, out.hidden.row(0));
        assert!(matches!(
            encode(&p, &EncInput::new(vec![2; 13])),
            Err(Error::InputTooLong { .. })
        ));
        assert!(matches!(
            encode(&p, &EncInput::new(vec![2, 10])),
            Err(Error::TokenOutOfRange { .. })
        ));
    }

    #[test]
    fn padding_is_invisible() {
        let p = init_params(&small()).unwrap();
        let input = EncInput::new(vec![2, 5, 6, 3]);
        let a = encode(&p, &input).unwrap();
        let b = encode(&p, &input.padded(5)).unwrap();
        for (x, y) in a.cls.iter().zip(b.cls.iter()) {
            assert!((x - y).abs() < 1e-9);
        }
        for r in 0..4 {
            for (x, y) in a.hidden.row(r).iter().zip(b.hidden.row(r).iter()) {
                assert!((x - y).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn encode_is_pure() {
        let p = init_params(&small()).unwrap();
        let input = EncInput::new(vec![2, 7, 3]);
        assert_eq!(encode(&p, &input).unwrap(), encode(&p, &input).unwrap());
    }

    /// Hand-executed forward pass: 1 layer, 1 head, d_model = 2, d_ff = 1.
    #[test]
    fn hand_forward() {
        let cfg = EncoderConfig {
            d_model: 2,
            n_heads: 1,
            n_layers: 1,
            d_ff: 1,
            max_len: 8,
            vocab_size: 5,
            seed: 0,
            init_std: 0.0,
        };
        let mut p = init_params(&cfg).unwrap();
        p.tok_emb = array![[0.0, 0.0], [0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [0.0, 0.0]];
        let l = &mut p.layers[0];
        l.wq = Array2::eye(2);
        l.wk = Array2::eye(2);
        l.wv = Array2::eye(2);
        l.wo = Array2::eye(2);
        // tokens [CLS, SEP] → x = [[1,0],[0,1]]
        // scores = x xᵀ / √2 = [[1/√2, 0], [0, 1/√2]]
        // p_same = e^{1/√2} / (e^{1/√2} + 1)
        let a = std::f64::consts::FRAC_1_SQRT_2.exp();
        let ps = a / (a + 1.0);
        let pd = 1.0 - ps;
        // row 0: r1 = x0 + [ps, pd] = [1+ps, pd] → LN of two values (u, w) with u > w
        // gives ±1 scaled by 1/sqrt(1 + eps/((u-w)/2)^2)
        let ln2 = |u: f64, w: f64| {
            let half = (u - w) / 2.0;
            let inv = 1.0 / (half * half + math::LN_EPS).sqrt();
            [half * inv, -half * inv]
        };
        let y1 = ln2(1.0 + ps, pd);
        // FFN with zero w1, w2 and biases contributes 0, so r2 = y1
        let y2 = ln2(y1[0], y1[1]);
        let expected = ln2(y2[0], y2[1]);
        let out = encode(&p, &EncInput::new(vec![CLS, SEP])).unwrap();
        assert!(
            (out.cls[0] - expected[0]).abs() < 1e-12,
            "{:?} vs {expected:?}",
            out.cls
        );
        assert!((out.cls[1] - expected[1]).abs() < 1e-12);
    }

    /// Central finite differences on a random linear functional of all hidden
    /// states. The denominator floor absorbs the ~1e-10 rounding noise of the
    /// difference quotient on entries whose true gradient is zero (key biases).
    #[test]
    fn encoder_gradient_check() {
        let p = init_params(&small()).unwrap();
        let input = EncInput::new(vec![2, 5, 9, 3, 4]).padded(2);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let weights = Array2::from_shape_fn((7, 8), |_| rng.random_range(-1.0..1.0));
        let loss = |p: &EncoderParams| (&encode(p, &input).unwrap().hidden * &weights).sum();

        let (_, trace) = forward(&p, &input).unwrap();
        let mut g = p.zeros_like();
        backward(&p, &trace, &weights, &mut g);
        let analytic = g.to_flat();
        let h = 1e-5;
        let mut worst = 0.0f64;
        for (i, &base) in p.to_flat().iter().enumerate() {
            let mut plus = p.clone();
            plus.set_flat(i, base + h);
            let mut minus = p.clone();
            minus.set_flat(i, base - h);
            let fd = (loss(&plus) - loss(&minus)) / (2.0 * h);
            let rel = (fd - analytic[i]).abs() / (fd.abs() + analytic[i].abs()).max(1e-5);
            worst = worst.max(rel);
        }
        assert!(worst < 1e-4, "worst relative error {worst}");
    }

    #[test]
    fn layer_norm_on_random_rows() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let x = Array2::from_shape_fn((16, 32), |_| rng.random_range(-3.0..3.0));
        let (y, _) = layer_norm(&x, &Array1::ones(32), &Array1::zeros(32));
        for row in y.rows() {
            assert!(row.mean().unwrap().abs() < 1e-6);
            let var = row.mapv(|v| v * v).mean().unwrap();
            assert!((var - 1.0).abs() < 1e-4);
        }
    }
}
