use serde::{Deserialize, Serialize};

use super::tensor::Tensor;
use super::NnError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self { lr: 1e-5, beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

/// Bias-corrected Adam with first/second moment buffers shaped like the
/// parameters they track.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub config: AdamConfig,
    pub t: u64,
    pub m: Vec<Tensor>,
    pub v: Vec<Tensor>,
}

impl AdamState {
    pub fn new(config: AdamConfig, params: &[&Tensor]) -> Self {
        let zeros = |p: &&Tensor| Tensor::zeros(p.shape());
        Self { config, t: 0, m: params.iter().map(zeros).collect(), v: params.iter().map(zeros).collect() }
    }

    pub fn step(&mut self, mut params: Vec<&mut Tensor>, grads: &[Tensor]) -> Result<(), NnError> {
        if params.len() != self.m.len() || grads.len() != self.m.len() {
            return Err(NnError::ShapeMismatch { expected: vec![self.m.len()], got: vec![params.len(), grads.len()] });
        }
        for ((p, g), m) in params.iter().zip(grads).zip(&self.m) {
            p.expect_shape(m.shape())?;
            g.expect_shape(m.shape())?;
        }
        self.t += 1;
        let AdamConfig { lr, beta1, beta2, eps } = self.config;
        let t = self.t as i32;
        let bc1 = 1.0 - beta1.powi(t);
        let bc2 = 1.0 - beta2.powi(t);
        for (((p, g), m), v) in params.iter_mut().zip(grads).zip(self.m.iter_mut()).zip(self.v.iter_mut()) {
            let pd = p.data_mut();
            for (((pi, &gi), mi), vi) in pd.iter_mut().zip(g.data()).zip(m.data_mut()).zip(v.data_mut()) {
                *mi = beta1 * *mi + (1.0 - beta1) * gi;
                *vi = beta2 * *vi + (1.0 - beta2) * gi * gi;
                let m_hat = *mi / bc1;
                let v_hat = *vi / bc2;
                *pi -= lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_is_a_fixed_point() {
        let mut p = Tensor::from_vec(&[3], vec![1.0, -2.0, 0.5]).unwrap();
        let before = p.clone();
        let mut adam = AdamState::new(AdamConfig::default(), &[&p]);
        adam.step(vec![&mut p], &[Tensor::zeros(&[3])]).unwrap();
        assert_eq!(p, before);
        assert_eq!(adam.t, 1);
    }

    #[test]
    fn first_step_closed_form() {
        for g in [3.0, -0.02, 1e-9] {
            let mut p = Tensor::from_vec(&[1], vec![0.7]).unwrap();
            let cfg = AdamConfig::default();
            let mut adam = AdamState::new(cfg, &[&p]);
            adam.step(vec![&mut p], &[Tensor::from_vec(&[1], vec![g]).unwrap()]).unwrap();
            let expected = 0.7 - cfg.lr * g / (g.abs() + cfg.eps);
            assert!((p.data()[0] - expected).abs() < 1e-18, "g={g}");
        }
    }

    #[test]
    fn rejects_mismatched_shapes() {
        let mut p = Tensor::zeros(&[2]);
        let mut adam = AdamState::new(AdamConfig::default(), &[&p]);
        assert!(adam.step(vec![&mut p], &[Tensor::zeros(&[3])]).is_err());
        assert_eq!(adam.t, 0);
    }
}
