use serde::{Deserialize, Serialize};

use crate::error::{ensure_arg, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self { learning_rate: 0.0002, beta1: 0.5, beta2: 0.999, epsilon: 1e-7 }
    }
}

impl AdamConfig {
    pub fn validate(&self) -> Result<()> {
        ensure_arg!(
            self.learning_rate > 0.0 && self.learning_rate.is_finite(),
            "learning rate must be positive"
        );
        ensure_arg!((0.0..1.0).contains(&self.beta1), "beta1 must lie in [0, 1)");
        ensure_arg!((0.0..1.0).contains(&self.beta2), "beta2 must lie in [0, 1)");
        ensure_arg!(self.epsilon > 0.0, "epsilon must be positive");
        Ok(())
    }
}

/// Moment estimates for one parameter group.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub config: AdamConfig,
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
}

impl AdamState {
    pub fn new(config: AdamConfig, n_params: usize) -> Self {
        Self { config, m: vec![0.0; n_params], v: vec![0.0; n_params], t: 0 }
    }

    pub fn steps(&self) -> u64 {
        self.t
    }

    pub fn len(&self) -> usize {
        self.m.len()
    }

    pub fn is_empty(&self) -> bool {
        self.m.is_empty()
    }

    /// One bias-corrected Adam update of `params` in place.
    pub fn step(&mut self, params: &mut [f64], grads: &[f64]) -> Result<()> {
        ensure_arg!(
            params.len() == self.m.len() && grads.len() == self.m.len(),
            "Adam state holds {} moments, got {} params and {} grads",
            self.m.len(),
            params.len(),
            grads.len()
        );
        let AdamConfig { learning_rate, beta1, beta2, epsilon } = self.config;
        self.t += 1;
        let t = self.t as i32;
        let c1 = 1.0 - beta1.powi(t);
        let c2 = 1.0 - beta2.powi(t);
        for (((p, &g), m), v) in params.iter_mut().zip(grads).zip(&mut self.m).zip(&mut self.v) {
            *m = beta1 * *m + (1.0 - beta1) * g;
            *v = beta2 * *v + (1.0 - beta2) * g * g;
            let m_hat = *m / c1;
            let v_hat = *v / c2;
            *p -= learning_rate * m_hat / (v_hat.sqrt() + epsilon);
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_is_fixed_point() {
        let mut adam = AdamState::new(AdamConfig::default(), 3);
        let mut p = vec![0.5, -1.0, 2.0];
        adam.step(&mut p, &[0.0; 3]).unwrap();
        assert_eq!(p, vec![0.5, -1.0, 2.0]);
        assert_eq!(adam.steps(), 1);
    }

    #[test]
    fn first_step_moves_by_learning_rate() {
        let mut adam = AdamState::new(AdamConfig::default(), 1);
        let mut p = vec![0.0];
        adam.step(&mut p, &[1.0]).unwrap();
        assert!((p[0] + 0.0002).abs() < 1e-6);
    }

    #[test]
    fn constant_gradient_step_bound() {
        let cfg = AdamConfig::default();
        let mut adam = AdamState::new(cfg, 1);
        let mut p = vec![0.0];
        let mut prev = 0.0;
        for _ in 0..2 {
            adam.step(&mut p, &[3.7]).unwrap();
            assert!((p[0] - prev).abs() <= cfg.learning_rate * (1.0 + 1e-6));
            prev = p[0];
        }
    }

    #[test]
    fn length_mismatch_rejected() {
        let mut adam = AdamState::new(AdamConfig::default(), 2);
        let mut p = vec![0.0; 2];
        assert!(adam.step(&mut p, &[1.0]).is_err());
        assert_eq!(adam.steps(), 0);
    }
}
