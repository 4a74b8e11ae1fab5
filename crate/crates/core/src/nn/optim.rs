use serde::{Deserialize, Serialize};

use super::model::ModelParams;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimizerConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub weight_decay: f64,
    pub eps: f64,
    pub batch_size: usize,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            lr: 1e-4,
            beta1: 0.9,
            beta2: 0.9999,
            weight_decay: 0.1,
            eps: 1e-8,
            batch_size: 128,
        }
    }
}

impl OptimizerConfig {
    /// Batch 32 and a learning rate sized for the small backbone and short runs.
    pub fn desk() -> Self {
        Self {
            lr: 2e-3,
            batch_size: 32,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.lr > 0.0
            && self.lr.is_finite()
            && self.beta1 > 0.0
            && self.beta1 < 1.0
            && self.beta2 > 0.0
            && self.beta2 < 1.0
            && self.weight_decay >= 0.0
            && self.eps > 0.0
            && self.batch_size >= 1;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidConfig(format!("invalid optimizer config {self:?}")))
        }
    }
}

/// First and second moments, shaped like the parameters, plus the step count.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: ModelParams,
    pub v: ModelParams,
    pub t: u64,
}

impl AdamState {
    pub fn new(params: &ModelParams) -> Self {
        Self {
            m: ModelParams::zeros(params.config),
            v: ModelParams::zeros(params.config),
            t: 0,
        }
    }
}

/// One Adam update in place, with weight decay applied to the parameters
/// directly rather than folded into the gradient.
pub fn adam_step(params: &mut ModelParams, grads: &ModelParams, state: &mut AdamState, cfg: &OptimizerConfig) -> Result<()> {
    if !params.same_layout(grads) || !params.same_layout(&state.m) || !params.same_layout(&state.v) {
        return Err(Error::ShapeMismatch("optimizer state does not match parameters".into()));
    }
    if !grads.is_finite() {
        return Err(Error::InvalidConfig("non-finite gradient".into()));
    }
    let t = state.t + 1;
    let c1 = 1.0 - cfg.beta1.powi(t as i32);
    let c2 = 1.0 - cfg.beta2.powi(t as i32);
    let mut next = params.clone();
    for (k, p) in next.tensors.iter_mut().enumerate() {
        let g = &grads.tensors[k].data;
        let m = &mut state.m.tensors[k].data;
        let v = &mut state.v.tensors[k].data;
        for i in 0..p.data.len() {
            m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g[i];
            v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g[i] * g[i];
            let step = (m[i] / c1) / ((v[i] / c2).sqrt() + cfg.eps);
            p.data[i] -= cfg.lr * (step + cfg.weight_decay * p.data[i]);
        }
    }
    if !next.is_finite() {
        return Err(Error::InvalidConfig("optimizer step produced a non-finite parameter".into()));
    }
    *params = next;
    state.t = t;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::ModelConfig;

    fn no_decay() -> OptimizerConfig {
        OptimizerConfig {
            lr: 1e-3,
            weight_decay: 0.0,
            ..OptimizerConfig::default()
        }
    }

    #[test]
    fn first_step_is_signed_learning_rate() {
        let cfg = ModelConfig::tiny();
        let mut p = ModelParams::random(cfg, 1, 0.5);
        let before = p.clone();
        let g = ModelParams::random(cfg, 2, 1.0);
        let mut st = AdamState::new(&p);
        let o = no_decay();
        adam_step(&mut p, &g, &mut st, &o).unwrap();
        for i in 0..p.parameter_count() {
            let gi = g.flat(i);
            let want = -o.lr * gi / (gi.abs() + o.eps);
            let got = p.flat(i) - before.flat(i);
            assert!((got - want).abs() <= 1e-9 * want.abs() + 1e-15, "{got} vs {want}");
        }
        assert_eq!(st.t, 1);
    }

    #[test]
    fn zero_gradient_keeps_parameters() {
        let cfg = ModelConfig::tiny();
        let mut p = ModelParams::random(cfg, 1, 0.5);
        let before = p.clone();
        let g = ModelParams::zeros(cfg);
        let mut st = AdamState::new(&p);
        for _ in 0..3 {
            adam_step(&mut p, &g, &mut st, &no_decay()).unwrap();
        }
        assert_eq!(p, before);
    }

    #[test]
    fn weight_decay_shrinks_without_gradient() {
        let cfg = ModelConfig::tiny();
        let mut p = ModelParams::random(cfg, 1, 0.5);
        let n0 = p.norm();
        let mut st = AdamState::new(&p);
        adam_step(&mut p, &ModelParams::zeros(cfg), &mut st, &OptimizerConfig::default()).unwrap();
        assert!((p.norm() - n0 * (1.0 - 1e-5)).abs() < 1e-12);
    }

    #[test]
    fn scalar_quadratic_converges() {
        // Minimize (w - 3)^2 from w = -2 through a single bias parameter.
        let cfg = ModelConfig::tiny();
        let mut p = ModelParams::zeros(cfg);
        let idx = 0;
        *p.flat_mut(idx) = -2.0;
        let mut st = AdamState::new(&p);
        let o = OptimizerConfig {
            lr: 0.02,
            weight_decay: 0.0,
            beta2: 0.999,
            ..OptimizerConfig::default()
        };
        let mut dist = Vec::new();
        for _ in 0..100 {
            let mut g = ModelParams::zeros(cfg);
            *g.flat_mut(idx) = 2.0 * (p.flat(idx) - 3.0);
            adam_step(&mut p, &g, &mut st, &o).unwrap();
            dist.push((p.flat(idx) - 3.0).abs());
        }
        assert!(dist[99] < 5.0);
        let loss: Vec<f64> = dist.iter().map(|d| d * d).collect();
        assert!(loss[50..].windows(2).all(|w| w[1] <= w[0] + 1e-12), "{:?}", &loss[50..]);
    }

    #[test]
    fn layout_mismatch() {
        let mut p = ModelParams::zeros(ModelConfig::tiny());
        let g = ModelParams::zeros(ModelConfig::default());
        let mut st = AdamState::new(&p);
        assert!(matches!(
            adam_step(&mut p, &g, &mut st, &OptimizerConfig::default()),
            Err(Error::ShapeMismatch(_))
        ));
    }

    #[test]
    fn defaults_validate() {
        OptimizerConfig::default().validate().unwrap();
        OptimizerConfig::desk().validate().unwrap();
        assert!(OptimizerConfig { beta2: 1.0, ..OptimizerConfig::default() }.validate().is_err());
    }
}
