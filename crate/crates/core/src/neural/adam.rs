use serde::{Deserialize, Serialize};

use super::model::Model;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// First and second moment estimates, one buffer per parameter block.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub step: u64,
    pub m: Vec<Vec<f64>>,
    pub v: Vec<Vec<f64>>,
}

impl AdamState {
    pub fn new(model: &Model) -> AdamState {
        let sizes: Vec<usize> = model.params().iter().map(|(_, t)| t.len()).collect();
        AdamState {
            step: 0,
            m: sizes.iter().map(|&n| vec![0.0; n]).collect(),
            v: sizes.iter().map(|&n| vec![0.0; n]).collect(),
        }
    }
}

/// One bias-corrected Adam update of every block of `model`.
pub fn optimizer_step(model: &mut Model, grads: &Model, state: &mut AdamState, cfg: &AdamConfig) -> Result<()> {
    let g_blocks: Vec<&[f64]> = grads.params().into_iter().map(|(_, t)| t.data.as_slice()).collect();
    let mut p_blocks = model.params_mut();
    if g_blocks.len() != p_blocks.len() || state.m.len() != p_blocks.len() {
        return Err(Error::dim("optimizer parameter blocks", p_blocks.len(), g_blocks.len()));
    }
    state.step += 1;
    let t = state.step as i32;
    let c1 = 1.0 - cfg.beta1.powi(t);
    let c2 = 1.0 - cfg.beta2.powi(t);
    for (k, (p, g)) in p_blocks.iter_mut().zip(&g_blocks).enumerate() {
        if p.data.len() != g.len() || state.m[k].len() != g.len() {
            return Err(Error::dim(format!("optimizer block {k}"), p.data.len(), g.len()));
        }
        let (m, v) = (&mut state.m[k], &mut state.v[k]);
        for i in 0..g.len() {
            m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g[i];
            v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g[i] * g[i];
            let m_hat = m[i] / c1;
            let v_hat = v[i] / c2;
            p.data[i] -= cfg.learning_rate * m_hat / (v_hat.sqrt() + cfg.epsilon);
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::context::ContextSpec;
    use crate::neural::model::ModelConfig;

    fn model() -> Model {
        let mut cfg = ModelConfig::pooled(ContextSpec::none());
        cfg.fixed_dim = 3;
        Model::new(cfg, 4).unwrap()
    }

    #[test]
    fn zero_gradient_leaves_params() {
        let mut m = model();
        let before = m.clone();
        let g = m.zeros_like();
        let mut st = AdamState::new(&m);
        optimizer_step(&mut m, &g, &mut st, &AdamConfig::default()).unwrap();
        assert_eq!(m, before);
    }

    #[test]
    fn first_step_hand_computed() {
        let mut m = model();
        let before = m.clone();
        let mut g = m.zeros_like();
        g.classifier.w.data[0] = 0.3;
        g.classifier.b.data[2] = -2.0;
        let cfg = AdamConfig::default();
        let mut st = AdamState::new(&m);
        optimizer_step(&mut m, &g, &mut st, &cfg).unwrap();
        // m_hat = g, v_hat = g^2, so the step is lr * g / (|g| + eps).
        let expect_w = before.classifier.w.data[0] - 1e-3 * 0.3 / (0.3 + 1e-8);
        let expect_b = before.classifier.b.data[2] + 1e-3 * 2.0 / (2.0 + 1e-8);
        assert!((m.classifier.w.data[0] - expect_w).abs() < 1e-15);
        assert!((m.classifier.b.data[2] - expect_b).abs() < 1e-15);
        assert_eq!(m.classifier.w.data[1], before.classifier.w.data[1]);
    }

    #[test]
    fn resuming_from_saved_state_is_identical() {
        let mut g = model().zeros_like();
        g.classifier.w.data.iter_mut().enumerate().for_each(|(i, x)| *x = (i as f64 - 4.0) * 0.1);
        let cfg = AdamConfig::default();

        let mut a = model();
        let mut sa = AdamState::new(&a);
        optimizer_step(&mut a, &g, &mut sa, &cfg).unwrap();
        let (mut b, mut sb) = (a.clone(), sa.clone());
        optimizer_step(&mut a, &g, &mut sa, &cfg).unwrap();
        optimizer_step(&mut b, &g, &mut sb, &cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(sa, sb);
    }
}
