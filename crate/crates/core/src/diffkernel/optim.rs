use super::tensor::Parameter;
use crate::{Error, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum OptimKind {
    #[default]
    Sgd,
    Adam,
}

const ADAM_BETA1: f64 = 0.9;
const ADAM_BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

/// Optimizer state for one parameter group.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimState {
    lr: f64,
    clip_norm: Option<f64>,
    kind: OptimKind,
    steps: u64,
    first: Vec<Vec<f64>>,
    second: Vec<Vec<f64>>,
}

impl OptimState {
    pub fn new(kind: OptimKind, lr: f64, clip_norm: Option<f64>) -> Result<Self> {
        if !(lr > 0.0 && lr.is_finite()) {
            return Err(Error::InvalidArgument(format!("learning rate must be > 0, got {lr}")));
        }
        if let Some(c) = clip_norm {
            if c.is_nan() || c <= 0.0 {
                return Err(Error::InvalidArgument(format!("clip norm must be > 0, got {c}")));
            }
        }
        Ok(Self {
            lr,
            clip_norm,
            kind,
            steps: 0,
            first: Vec::new(),
            second: Vec::new(),
        })
    }

    pub fn lr(&self) -> f64 {
        self.lr
    }

    pub fn set_lr(&mut self, lr: f64) -> Result<()> {
        if !(lr > 0.0 && lr.is_finite()) {
            return Err(Error::InvalidArgument(format!("learning rate must be > 0, got {lr}")));
        }
        self.lr = lr;
        Ok(())
    }

    pub fn kind(&self) -> OptimKind {
        self.kind
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    /// Clips the group's global gradient norm (if configured) and applies
    /// one update. Gradients are left in place; the caller zeroes them.
    pub fn step(&mut self, params: &mut [&mut Parameter]) {
        let mut scale = 1.0;
        if let Some(clip) = self.clip_norm {
            let norm = params.iter().map(|p| p.grad.norm_sq()).sum::<f64>().sqrt();
            if norm > clip {
                scale = clip / norm;
            }
        }
        if scale != 1.0 {
            for p in params.iter_mut() {
                p.grad.data_mut().iter_mut().for_each(|g| *g *= scale);
            }
        }
        self.steps += 1;
        match self.kind {
            OptimKind::Sgd => {
                for p in params.iter_mut() {
                    let lr = self.lr;
                    let Parameter { value, grad, .. } = &mut **p;
                    for (v, g) in value.data_mut().iter_mut().zip(grad.data()) {
                        *v -= lr * g;
                    }
                }
            }
            OptimKind::Adam => {
                if self.first.len() != params.len() {
                    self.first = params.iter().map(|p| vec![0.0; p.value.len()]).collect();
                    self.second = self.first.clone();
                }
                let t = self.steps as i32;
                let bc1 = 1.0 - ADAM_BETA1.powi(t);
                let bc2 = 1.0 - ADAM_BETA2.powi(t);
                for ((p, m), s) in params.iter_mut().zip(&mut self.first).zip(&mut self.second) {
                    let Parameter { value, grad, .. } = &mut **p;
                    for (((v, &g), mi), si) in value
                        .data_mut()
                        .iter_mut()
                        .zip(grad.data())
                        .zip(m.iter_mut())
                        .zip(s.iter_mut())
                    {
                        *mi = ADAM_BETA1 * *mi + (1.0 - ADAM_BETA1) * g;
                        *si = ADAM_BETA2 * *si + (1.0 - ADAM_BETA2) * g * g;
                        let m_hat = *mi / bc1;
                        let s_hat = *si / bc2;
                        *v -= self.lr * m_hat / (s_hat.sqrt() + ADAM_EPS);
                    }
                }
            }
        }
    }

    /// Moment buffers and step count, for checkpointing.
    pub fn moments(&self) -> (u64, &[Vec<f64>], &[Vec<f64>]) {
        (self.steps, &self.first, &self.second)
    }

    pub fn restore_moments(&mut self, steps: u64, first: Vec<Vec<f64>>, second: Vec<Vec<f64>>) {
        self.steps = steps;
        self.first = first;
        self.second = second;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diffkernel::Tensor;

    fn scalar(v: f64, g: f64) -> Parameter {
        let mut p = Parameter::from_tensor("p", Tensor::vector(vec![v]));
        p.grad.data_mut()[0] = g;
        p
    }

    #[test]
    fn zero_grad_is_identity() {
        for kind in [OptimKind::Sgd, OptimKind::Adam] {
            let mut p = scalar(1.25, 0.0);
            let mut opt = OptimState::new(kind, 0.1, Some(5.0)).unwrap();
            opt.step(&mut [&mut p]);
            assert_eq!(p.value.data()[0], 1.25);
        }
    }

    #[test]
    fn sgd_arithmetic() {
        let mut p = scalar(1.0, 0.5);
        let mut opt = OptimState::new(OptimKind::Sgd, 0.1, None).unwrap();
        opt.step(&mut [&mut p]);
        assert!((p.value.data()[0] - 0.95).abs() < 1e-15);
        assert_eq!(p.grad.data()[0], 0.5, "grads are not cleared by the step");
    }

    #[test]
    fn clipping_halves_gradients() {
        let mut a = scalar(0.0, 6.0);
        let mut b = scalar(0.0, 8.0);
        let mut opt = OptimState::new(OptimKind::Sgd, 1.0, Some(5.0)).unwrap();
        opt.step(&mut [&mut a, &mut b]);
        assert!((a.grad.data()[0] - 3.0).abs() < 1e-12);
        assert!((b.grad.data()[0] - 4.0).abs() < 1e-12);
        assert!((a.value.data()[0] + 3.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_nonpositive_lr() {
        assert!(OptimState::new(OptimKind::Sgd, 0.0, None).is_err());
        assert!(OptimState::new(OptimKind::Sgd, -1.0, None).is_err());
    }
}
