//! Adam over the flat parameter view.
//!
//! Standard Adam with bias correction. State (first/second moments, step
//! count) lives in flat layout aligned with [`ModelParams::to_flat`]
//! (../params.rs), so one optimizer instance serves the whole model.

use crate::numeric::{scalar, NumericError, Real, Result};

#[derive(Debug, Clone)]
pub struct Adam<F: Real> {
    pub lr: F,
    pub beta1: F,
    pub beta2: F,
    pub eps: F,
    t: u64,
    m: Vec<F>,
    v: Vec<F>,
}

impl<F: Real> Adam<F> {
    /// Defaults: beta1 = 0.9, beta2 = 0.999, eps = 1e-8.
    pub fn new(lr: f64, len: usize) -> Adam<F> {
        Adam {
            lr: scalar(lr),
            beta1: scalar(0.9),
            beta2: scalar(0.999),
            eps: scalar(1e-8),
            t: 0,
            m: vec![F::zero(); len],
            v: vec![F::zero(); len],
        }
    }

    pub fn step_count(&self) -> u64 {
        self.t
    }

    /// One bias-corrected update, in place on the flat parameter vector.
    pub fn step(&mut self, params: &mut [F], grads: &[F]) -> Result<()> {
        if params.len() != self.m.len() || grads.len() != self.m.len() {
            return Err(NumericError::FlatLenMismatch {
                expected: self.m.len(),
                got: if params.len() != self.m.len() {
                    params.len()
                } else {
                    grads.len()
                },
            });
        }
        self.t += 1;
        let one = F::one();
        let bc1 = one - self.beta1.powi(self.t as i32);
        let bc2 = one - self.beta2.powi(self.t as i32);
        for i in 0..params.len() {
            let g = grads[i];
            self.m[i] = self.beta1 * self.m[i] + (one - self.beta1) * g;
            self.v[i] = self.beta2 * self.v[i] + (one - self.beta2) * g * g;
            let m_hat = self.m[i] / bc1;
            let v_hat = self.v[i] / bc2;
            params[i] = params[i] - self.lr * m_hat / (v_hat.sqrt() + self.eps);
        }
        Ok(())
    }
}
