use rand::seq::index::sample;

use super::model::{backward, batch_loss, forward, ModelParams};
use super::tensor::Tensor;
use crate::error::Result;
use crate::seeding;

/// Gradients smaller than this are compared in absolute terms.
const GRAD_FLOOR: f64 = 1e-6;

/// Labels of a gradient-check batch, one entry per image for each hand.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckLabels {
    pub left: Vec<f64>,
    pub right: Vec<f64>,
}

/// Worst relative error between `analytic` and central differences of the
/// loss over a seeded sample of `fraction` of all parameters (at least one).
#[allow(clippy::too_many_arguments)]
pub fn compare_gradients(
    params: &ModelParams,
    input: &Tensor,
    labels: &CheckLabels,
    analytic: &ModelParams,
    h: f64,
    fraction: f64,
    seed: u64,
) -> Result<f64> {
    let n = params.parameter_count();
    let k = ((n as f64 * fraction).ceil() as usize).clamp(1, n);
    let mut rng = seeding::stream_rng(seed, &[seeding::tag("grad_check")]);
    let mut worst: f64 = 0.0;
    for i in sample(&mut rng, n, k) {
        let mut p = params.clone();
        let x0 = p.flat(i);
        *p.flat_mut(i) = x0 + h;
        let up = batch_loss(&p, input, &labels.left, &labels.right)?;
        *p.flat_mut(i) = x0 - h;
        let down = batch_loss(&p, input, &labels.left, &labels.right)?;
        let numeric = (up - down) / (2.0 * h);
        let a = analytic.flat(i);
        let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(GRAD_FLOOR);
        worst = worst.max(rel);
    }
    Ok(worst)
}

/// Checks [`backward`] against central differences with step `h` on 1% of
/// the parameters. Meant for models with a few thousand parameters.
pub fn grad_check(params: &ModelParams, input: &Tensor, labels: &CheckLabels, h: f64, seed: u64) -> Result<f64> {
    let (_, cache) = forward(params, input)?;
    let g = backward(params, &cache, &labels.left, &labels.right)?;
    compare_gradients(params, input, labels, &g, h, 0.01, seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::ModelConfig;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn check_batch(cfg: &ModelConfig, n: usize, seed: u64) -> (Tensor, CheckLabels) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let s = cfg.input_size;
        let data = (0..n * cfg.input_len()).map(|_| rng.random_range(-0.5..0.5)).collect();
        let labels = CheckLabels {
            left: (0..n).map(|_| rng.random_range(0..2) as f64).collect(),
            right: (0..n).map(|_| rng.random_range(0..2) as f64).collect(),
        };
        (Tensor::from_vec(&[n, cfg.input_channels, s, s], data).unwrap(), labels)
    }

    #[test]
    fn backward_agrees_with_finite_differences() {
        let cfg = ModelConfig::tiny();
        let params = ModelParams::init(cfg, 11).unwrap();
        let (x, y) = check_batch(&cfg, 4, 1);
        let err = grad_check(&params, &x, &y, 1e-5, 3).unwrap();
        assert!(err <= 1e-4, "{err}");
    }

    #[test]
    fn scaled_gradient_is_detected() {
        let cfg = ModelConfig::tiny();
        let params = ModelParams::init(cfg, 11).unwrap();
        let (x, y) = check_batch(&cfg, 4, 1);
        let (_, cache) = forward(&params, &x).unwrap();
        let mut g = backward(&params, &cache, &y.left, &y.right).unwrap();
        g.tensors.iter_mut().flat_map(|t| t.data.iter_mut()).for_each(|v| *v *= 1.01);
        let err = compare_gradients(&params, &x, &y, &g, 1e-5, 0.01, 3).unwrap();
        assert!(err > 5e-3, "{err}");
    }

    #[test]
    fn step_size_sweep_does_not_explode() {
        let cfg = ModelConfig::tiny();
        let params = ModelParams::init(cfg, 5).unwrap();
        let (x, y) = check_batch(&cfg, 3, 2);
        let e: Vec<f64> = [1e-4, 1e-5, 1e-6]
            .iter()
            .map(|&h| grad_check(&params, &x, &y, h, 9).unwrap())
            .collect();
        // The middle step is never the worst of the three by more than noise.
        assert!(e[1] <= e[0].max(e[2]) * 1.5 + 1e-9, "{e:?}");
        assert!(e[1] <= 1e-4, "{e:?}");
    }
}
