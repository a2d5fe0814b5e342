//! AdamW with a linear warmup/decay schedule and a deterministic
//! mini-batch training loop.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::Params;
use crate::error::{Error, Result};

/// Linear warmup from 0 to `lr` over `warmup_steps`, then linear decay to 0
/// at `total_steps`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Schedule {
    pub lr: f64,
    pub warmup_steps: usize,
    pub total_steps: usize,
}

impl Schedule {
    pub fn constant(lr: f64) -> Self {
        Schedule {
            lr,
            warmup_steps: 0,
            total_steps: 0,
        }
    }

    /// Learning rate applied at zero-based update `step`. A `total_steps` of 0
    /// disables decay.
    pub fn lr_at(&self, step: usize) -> f64 {
        if step < self.warmup_steps {
            return self.lr * step as f64 / self.warmup_steps as f64;
        }
        if self.total_steps == 0 {
            return self.lr;
        }
        if step >= self.total_steps {
            return 0.0;
        }
        let span = (self.total_steps - self.warmup_steps) as f64;
        self.lr * (self.total_steps - step) as f64 / span
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamW {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    /// Decoupled decay, applied to matrices only (not biases or norm gains).
    pub weight_decay: f64,
    /// Rescale gradients whose global L2 norm exceeds this.
    pub clip_norm: Option<f64>,
}

impl Default for AdamW {
    fn default() -> Self {
        AdamW {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay: 0.01,
            clip_norm: Some(1.0),
        }
    }
}

#[derive(Debug, Clone)]
pub struct AdamState<P> {
    pub m: P,
    pub v: P,
    pub step: usize,
}

impl<P: Params> AdamState<P> {
    pub fn new(params: &P) -> Self {
        AdamState {
            m: params.zeros_like(),
            v: params.zeros_like(),
            step: 0,
        }
    }
}

impl AdamW {
    /// One update. A zero learning rate leaves `params` bit-for-bit unchanged.
    pub fn step<P: Params>(&self, params: &mut P, grads: &P, state: &mut AdamState<P>, lr: f64) -> Result<()> {
        if let Some(name) = grads.first_non_finite() {
            return Err(Error::NonFinite(format!("gradient of {name}")));
        }
        let mut clip = 1.0;
        if let Some(max) = self.clip_norm {
            let norm = grads.sq_norm().sqrt();
            if norm > max {
                clip = max / norm;
            }
        }
        state.step += 1;
        let t = state.step as i32;
        let bc1 = 1.0 - self.beta1.powi(t);
        let bc2 = 1.0 - self.beta2.powi(t);
        let g = grads.arrays();
        let m = state.m.arrays_mut();
        let v = state.v.arrays_mut();
        for ((((_, mut p), (_, g)), (_, mut m)), (_, mut v)) in params.arrays_mut().into_iter().zip(g).zip(m).zip(v) {
            let decay = if p.ndim() >= 2 { self.weight_decay } else { 0.0 };
            ndarray::Zip::from(&mut p)
                .and(&g)
                .and(&mut m)
                .and(&mut v)
                .for_each(|p, &g, m, v| {
                    let g = g * clip;
                    *m = self.beta1 * *m + (1.0 - self.beta1) * g;
                    *v = self.beta2 * *v + (1.0 - self.beta2) * g * g;
                    if lr != 0.0 {
                        let update = (*m / bc1) / ((*v / bc2).sqrt() + self.eps);
                        *p -= lr * (update + decay * *p);
                    }
                });
        }
        if let Some(name) = params.first_non_finite() {
            return Err(Error::NonFinite(format!("parameter {name}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    /// Fraction of total updates spent warming up.
    pub warmup_fraction: f64,
    pub weight_decay: f64,
    pub clip_norm: Option<f64>,
    /// Decay the learning rate to zero over the run.
    pub decay: bool,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 20,
            batch_size: 16,
            lr: 1e-3,
            warmup_fraction: 0.1,
            weight_decay: 0.01,
            clip_norm: Some(1.0),
            decay: true,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::InvalidConfig("batch_size must be positive".into()));
        }
        if !(self.lr.is_finite() && self.lr >= 0.0) {
            return Err(Error::InvalidConfig(format!("invalid learning rate {}", self.lr)));
        }
        if !(0.0..=1.0).contains(&self.warmup_fraction) {
            return Err(Error::InvalidConfig("warmup_fraction must lie in [0, 1]".into()));
        }
        Ok(())
    }

    pub fn optimizer(&self) -> AdamW {
        AdamW {
            weight_decay: self.weight_decay,
            clip_norm: self.clip_norm,
            ..AdamW::default()
        }
    }

    pub fn schedule(&self, n_examples: usize) -> Schedule {
        let per_epoch = n_examples.div_ceil(self.batch_size);
        let total = per_epoch * self.epochs;
        Schedule {
            lr: self.lr,
            warmup_steps: (total as f64 * self.warmup_fraction).round() as usize,
            total_steps: if self.decay { total } else { 0 },
        }
    }
}

/// Sums per-example losses and gradients. Examples are evaluated in parallel
/// but reduced in index order, so the result does not depend on thread count.
pub fn batch_gradient<P, F>(params: &P, batch: &[usize], loss_and_grad: &F) -> Result<(f64, P)>
where
    P: Params,
    F: Fn(&P, usize) -> Result<(f64, P)> + Sync,
{
    let parts = batch
        .par_iter()
        .map(|&i| loss_and_grad(params, i))
        .collect::<Result<Vec<_>>>()?;
    let mut total = params.zeros_like();
    let mut loss = 0.0;
    for (l, g) in &parts {
        loss += l;
        total.add_assign(g);
    }
    Ok((loss, total))
}

/// Per-epoch summary passed to the `on_epoch` callback of [`fit`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochStats {
    pub epoch: usize,
    pub mean_loss: f64,
}

/// Mini-batch training over `n_examples`, shuffled each epoch by a
/// generator seeded from `config.seed`. The batch gradient is the mean over
/// the batch. `on_epoch` returns `false` to stop early.
pub fn fit<P, F, C>(
    params: &mut P,
    n_examples: usize,
    config: &TrainConfig,
    loss_and_grad: F,
    mut on_epoch: C,
) -> Result<Vec<EpochStats>>
where
    P: Params,
    F: Fn(&P, usize) -> Result<(f64, P)> + Sync,
    C: FnMut(&P, EpochStats) -> bool,
{
    config.validate()?;
    if n_examples == 0 {
        return Err(Error::EmptyDataset);
    }
    let opt = config.optimizer();
    let schedule = config.schedule(n_examples);
    let mut state = AdamState::new(params);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut order: Vec<usize> = (0..n_examples).collect();
    let mut history = Vec::with_capacity(config.epochs);
    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for batch in order.chunks(config.batch_size) {
            let (loss, mut grads) = batch_gradient(params, batch, &loss_and_grad)?;
            if !loss.is_finite() {
                return Err(Error::NonFinite(format!("loss in epoch {epoch}")));
            }
            epoch_loss += loss;
            grads.scale(1.0 / batch.len() as f64);
            let lr = schedule.lr_at(state.step);
            opt.step(params, &grads, &mut state, lr)?;
        }
        let stats = EpochStats {
            epoch,
            mean_loss: epoch_loss / n_examples as f64,
        };
        log::debug!("epoch {epoch}: mean loss {:.6}", stats.mean_loss);
        history.push(stats);
        if !on_epoch(params, stats) {
            break;
        }
    }
    Ok(history)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{Array1, Array2, ArrayViewD, ArrayViewMutD};

    #[derive(Debug, Clone, PartialEq)]
    struct Quad {
        w: Array2<f64>,
        b: Array1<f64>,
    }

    impl Params for Quad {
        fn arrays(&self) -> Vec<(String, ArrayViewD<'_, f64>)> {
            vec![
                ("w".into(), self.w.view().into_dyn()),
                ("b".into(), self.b.view().into_dyn()),
            ]
        }
        fn arrays_mut(&mut self) -> Vec<(String, ArrayViewMutD<'_, f64>)> {
            vec![
                ("w".into(), self.w.view_mut().into_dyn()),
                ("b".into(), self.b.view_mut().into_dyn()),
            ]
        }
    }

    fn quad() -> Quad {
        Quad {
            w: Array2::from_elem((2, 2), 3.0),
            b: Array1::from_elem(2, -2.0),
        }
    }

    #[test]
    fn schedule_shape() {
        let s = Schedule {
            lr: 1.0,
            warmup_steps: 4,
            total_steps: 12,
        };
        assert_eq!(s.lr_at(0), 0.0);
        assert_eq!(s.lr_at(2), 0.5);
        assert_eq!(s.lr_at(4), 1.0);
        assert_eq!(s.lr_at(8), 0.5);
        assert_eq!(s.lr_at(12), 0.0);
        assert_eq!(Schedule::constant(0.3).lr_at(100), 0.3);
    }

    #[test]
    fn zero_lr_or_zero_grad_leaves_params() {
        let opt = AdamW::default();
        let mut p = quad();
        let mut st = AdamState::new(&p);
        let g = Quad {
            w: Array2::ones((2, 2)),
            b: Array1::ones(2),
        };
        opt.step(&mut p, &g, &mut st, 0.0).unwrap();
        assert_eq!(p, quad());

        let no_decay = AdamW {
            weight_decay: 0.0,
            ..AdamW::default()
        };
        let mut st = AdamState::new(&p);
        let z = p.zeros_like();
        no_decay.step(&mut p, &z, &mut st, 0.1).unwrap();
        assert_eq!(p, quad());
    }

    #[test]
    fn decay_only_on_matrices() {
        let opt = AdamW {
            weight_decay: 0.5,
            ..AdamW::default()
        };
        let mut p = quad();
        let mut st = AdamState::new(&p);
        let z = p.zeros_like();
        opt.step(&mut p, &z, &mut st, 0.1).unwrap();
        assert!((p.w[[0, 0]] - 3.0 * (1.0 - 0.05)).abs() < 1e-15);
        assert_eq!(p.b[0], -2.0);
    }

    #[test]
    fn non_finite_gradient_is_rejected() {
        let mut p = quad();
        let mut st = AdamState::new(&p);
        let mut g = p.zeros_like();
        g.b[1] = f64::NAN;
        assert!(matches!(
            AdamW::default().step(&mut p, &g, &mut st, 0.1),
            Err(Error::NonFinite(_))
        ));
    }

    #[test]
    fn fit_minimizes_quadratic() {
        // loss_i = ½‖θ − t_i‖², mean target is 1.
        let targets = [0.0, 2.0, 1.0, 1.0];
        let mut p = quad();
        let cfg = TrainConfig {
            epochs: 300,
            batch_size: 4,
            lr: 0.05,
            warmup_fraction: 0.0,
            weight_decay: 0.0,
            clip_norm: None,
            decay: false,
            seed: 1,
        };
        let grad = |p: &Quad, i: usize| {
            let mut g = p.clone();
            for (_, mut a) in g.arrays_mut() {
                a.mapv_inplace(|v| v - targets[i]);
            }
            Ok((0.5 * g.sq_norm(), g))
        };
        let hist = fit(&mut p, 4, &cfg, grad, |_, _| true).unwrap();
        assert!(hist.last().unwrap().mean_loss < hist[0].mean_loss);
        assert!(p.to_flat().iter().all(|v| (v - 1.0).abs() < 1e-3), "{p:?}");
    }

    #[test]
    fn fit_is_deterministic_and_stops_early() {
        let cfg = TrainConfig {
            epochs: 10,
            batch_size: 3,
            ..TrainConfig::default()
        };
        let grad = |p: &Quad, i: usize| {
            let mut g = p.clone();
            g.scale(i as f64 + 1.0);
            Ok((g.sq_norm(), g))
        };
        let mut a = quad();
        let mut b = quad();
        fit(&mut a, 7, &cfg, grad, |_, _| true).unwrap();
        fit(&mut b, 7, &cfg, grad, |_, _| true).unwrap();
        assert_eq!(a, b);
        let mut c = quad();
        let h = fit(&mut c, 7, &cfg, grad, |_, s| s.epoch < 2).unwrap();
        assert_eq!(h.len(), 3);
    }
}
