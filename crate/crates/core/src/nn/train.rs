use serde::{Deserialize, Serialize};

use super::batch::TrainBatch;
use super::model::{loss_and_grad_with, Prox};
use super::params::ModelParams;
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::seed;

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-8;

/// Adam state; clients start a fresh one every federation round.
#[derive(Debug, Clone)]
pub struct Adam<T> {
    lr: T,
    m: Vec<T>,
    v: Vec<T>,
    step: i32,
}

impl<T: Scalar> Adam<T> {
    pub fn new(len: usize, lr: T) -> Self {
        Self {
            lr,
            m: vec![T::zero(); len],
            v: vec![T::zero(); len],
            step: 0,
        }
    }

    pub fn update(&mut self, params: &mut [T], grad: &[T]) {
        let (b1, b2, eps) = (T::of(ADAM_BETA1), T::of(ADAM_BETA2), T::of(ADAM_EPS));
        self.step += 1;
        let c1 = T::one() - b1.powi(self.step);
        let c2 = T::one() - b2.powi(self.step);
        for i in 0..params.len() {
            let g = grad[i];
            self.m[i] = b1 * self.m[i] + (T::one() - b1) * g;
            self.v[i] = b2 * self.v[i] + (T::one() - b2) * g * g;
            let m_hat = self.m[i] / c1;
            let v_hat = self.v[i] / c2;
            params[i] -= self.lr * m_hat / (v_hat.sqrt() + eps);
        }
    }
}

/// Client-side optimisation settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LocalConfig {
    pub epochs: usize,
    pub lr: f64,
    /// Redraw negatives each epoch at this ratio; `None` keeps the batch's own.
    pub resample_ratio: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct LocalOutcome<T> {
    pub params: ModelParams<T>,
    /// Loss of the incoming parameters on the first epoch's batch.
    pub loss_before: T,
}

/// `epochs` full-sequence Adam steps starting from `params`.
pub fn local_train<T: Scalar>(
    params: &ModelParams<T>,
    batch: &TrainBatch<T>,
    cfg: &LocalConfig,
    prox: Option<(T, &ModelParams<T>)>,
    seed: u64,
) -> Result<LocalOutcome<T>> {
    if cfg.epochs == 0 {
        return Err(Error::InvalidArgument("local epochs must be >= 1".into()));
    }
    if !(cfg.lr >= 0.0) {
        return Err(Error::InvalidArgument(format!("learning rate {}", cfg.lr)));
    }
    let mut w = params.clone();
    let mut adam = Adam::new(w.len(), T::of(cfg.lr));
    let mut loss_before = None;
    for epoch in 0..cfg.epochs {
        let fresh;
        let negatives = match cfg.resample_ratio {
            Some(ratio) => {
                fresh = batch.draw_negatives(ratio, seed::derive(seed, "epoch", epoch as u64))?;
                &fresh
            }
            None => &batch.negatives,
        };
        let prox = prox.map(|(mu, anchor)| Prox { mu, anchor });
        let (loss, grad) = loss_and_grad_with(&w, batch, negatives, prox)?;
        loss_before.get_or_insert(loss);
        adam.update(&mut w.flat, &grad);
    }
    if !w.is_finite() {
        return Err(Error::NumericOverflow);
    }
    Ok(LocalOutcome {
        params: w,
        loss_before: loss_before.expect("at least one epoch"),
    })
}
