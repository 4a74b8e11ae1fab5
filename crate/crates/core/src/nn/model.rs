use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::tensor::{gemm, Tensor};
use crate::error::{Error, Result};
use crate::seeding;

/// Probability clamp applied before taking logs.
pub const PROB_CLAMP: f64 = 1e-7;

const RELU_BIAS_INIT: f64 = 0.05;

/// Backbone of three 3×3 stride-2 convolutions with ReLU and a global
/// average pool, followed by two independent binary heads.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ModelConfig {
    pub input_size: usize,
    pub input_channels: usize,
    pub conv_channels: [usize; 3],
    /// Appends two constant planes holding normalized x and y pixel
    /// coordinates to the input, so pooled features can encode position.
    pub coord_channels: bool,
    /// Hidden widths of each head's two ReLU layers.
    pub head_hidden: [usize; 2],
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            input_size: 32,
            input_channels: 3,
            conv_channels: [8, 16, 32],
            coord_channels: true,
            head_hidden: [16, 8],
        }
    }
}

impl ModelConfig {
    /// Under 5,000 parameters, for finite-difference checks.
    pub fn tiny() -> Self {
        Self {
            input_size: 16,
            input_channels: 3,
            conv_channels: [4, 8, 32],
            coord_channels: true,
            head_hidden: [16, 8],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_size < 8 || self.input_channels == 0 || self.conv_channels.contains(&0) || self.head_hidden.contains(&0)
        {
            return Err(Error::InvalidConfig(format!("invalid model config {self:?}")));
        }
        Ok(())
    }

    /// Spatial side after each convolution.
    pub fn conv_sizes(&self) -> [usize; 3] {
        let mut s = self.input_size;
        [0, 1, 2].map(|_| {
            s = (s - 1) / 2 + 1;
            s
        })
    }

    fn conv_in(&self, l: usize) -> usize {
        if l == 0 {
            self.input_channels + 2 * self.coord_channels as usize
        } else {
            self.conv_channels[l - 1]
        }
    }

    /// Shapes of every parameter tensor, in storage order: three conv layers
    /// `(w, b)`, then the left head's three dense layers, then the right's.
    pub fn shapes(&self) -> Vec<Vec<usize>> {
        let mut out = Vec::with_capacity(18);
        for l in 0..3 {
            out.push(vec![self.conv_channels[l], self.conv_in(l), 3, 3]);
            out.push(vec![self.conv_channels[l]]);
        }
        let dims = [self.conv_channels[2], self.head_hidden[0], self.head_hidden[1], 1];
        for _ in 0..2 {
            for k in 0..3 {
                out.push(vec![dims[k + 1], dims[k]]);
                out.push(vec![dims[k + 1]]);
            }
        }
        out
    }

    pub fn input_len(&self) -> usize {
        self.input_channels * self.input_size * self.input_size
    }
}

/// All weights and biases; also used as the gradient container.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub config: ModelConfig,
    pub tensors: Vec<Tensor>,
}

pub(crate) const HEAD_OFFSET: [usize; 2] = [6, 12];

impl ModelParams {
    pub fn zeros(config: ModelConfig) -> Self {
        Self {
            config,
            tensors: config.shapes().iter().map(|s| Tensor::zeros(s)).collect(),
        }
    }

    /// He-normal weights. Biases feeding a ReLU start at a small positive
    /// value so no unit begins dead; output biases start at zero.
    pub fn init(config: ModelConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut p = Self::zeros(config);
        let mut rng = seeding::stream_rng(seed, &[seeding::tag("init")]);
        for pair in p.tensors.chunks_exact_mut(2) {
            let (w, b) = pair.split_at_mut(1);
            let fan_in: usize = w[0].shape[1..].iter().product();
            let last = w[0].shape[0] == 1;
            let std = if last { (1.0 / fan_in as f64).sqrt() } else { (2.0 / fan_in as f64).sqrt() };
            let normal = Normal::new(0.0, std).expect("positive std");
            w[0].data.iter_mut().for_each(|v| *v = normal.sample(&mut rng));
            if !last {
                b[0].fill(RELU_BIAS_INIT);
            }
        }
        Ok(p)
    }

    /// Random values everywhere, biases included; for tests.
    pub fn random(config: ModelConfig, seed: u64, scale: f64) -> Self {
        let mut p = Self::zeros(config);
        let mut rng = seeding::stream_rng(seed, &[seeding::tag("random")]);
        for t in &mut p.tensors {
            t.data.iter_mut().for_each(|w| *w = rng.random_range(-scale..scale));
        }
        p
    }

    pub fn parameter_count(&self) -> usize {
        self.tensors.iter().map(Tensor::len).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.tensors.iter().all(Tensor::is_finite)
    }

    pub fn same_layout(&self, other: &ModelParams) -> bool {
        self.config == other.config
            && self.tensors.len() == other.tensors.len()
            && self.tensors.iter().zip(&other.tensors).all(|(a, b)| a.shape == b.shape)
    }

    /// Content fingerprint (FNV-1a over the bit patterns).
    pub fn fingerprint(&self) -> u64 {
        let mut h = 0xcbf2_9ce4_8422_2325u64;
        for t in &self.tensors {
            for v in &t.data {
                h = (h ^ v.to_bits()).wrapping_mul(0x0000_0100_0000_01B3);
            }
        }
        h
    }

    pub fn norm(&self) -> f64 {
        self.tensors
            .iter()
            .flat_map(|t| t.data.iter())
            .map(|v| v * v)
            .sum::<f64>()
            .sqrt()
    }

    /// Mutable view of parameter `i` of the flattened vector.
    pub fn flat_mut(&mut self, mut i: usize) -> &mut f64 {
        for t in &mut self.tensors {
            if i < t.len() {
                return &mut t.data[i];
            }
            i -= t.len();
        }
        panic!("parameter index out of range");
    }

    pub fn flat(&self, mut i: usize) -> f64 {
        for t in &self.tensors {
            if i < t.len() {
                return t.data[i];
            }
            i -= t.len();
        }
        panic!("parameter index out of range");
    }
}

/// Activations kept for the backward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    fingerprint: u64,
    batch: usize,
    /// im2col buffers per conv layer, `batch × (cin·9) × positions`.
    cols: [Vec<f64>; 3],
    /// Post-ReLU conv outputs per layer, `batch × cout × positions`.
    acts: [Vec<f64>; 3],
    feats: Vec<f64>,
    /// Per head: post-ReLU hidden layers and output probabilities.
    hidden: [[Vec<f64>; 2]; 2],
    pub p: [Vec<f64>; 2],
}

fn im2col(x: &[f64], c: usize, size: usize, out_size: usize, cols: &mut [f64]) {
    let positions = out_size * out_size;
    for ci in 0..c {
        for ky in 0..3 {
            for kx in 0..3 {
                let row = (ci * 9 + ky * 3 + kx) * positions;
                for oy in 0..out_size {
                    let iy = (2 * oy + ky) as isize - 1;
                    for ox in 0..out_size {
                        let ix = (2 * ox + kx) as isize - 1;
                        cols[row + oy * out_size + ox] =
                            if iy < 0 || ix < 0 || iy >= size as isize || ix >= size as isize {
                                0.0
                            } else {
                                x[(ci * size + iy as usize) * size + ix as usize]
                            };
                    }
                }
            }
        }
    }
}

fn col2im(cols: &[f64], c: usize, size: usize, out_size: usize, dx: &mut [f64]) {
    let positions = out_size * out_size;
    dx.iter_mut().for_each(|v| *v = 0.0);
    for ci in 0..c {
        for ky in 0..3 {
            for kx in 0..3 {
                let row = (ci * 9 + ky * 3 + kx) * positions;
                for oy in 0..out_size {
                    let iy = (2 * oy + ky) as isize - 1;
                    if iy < 0 || iy >= size as isize {
                        continue;
                    }
                    for ox in 0..out_size {
                        let ix = (2 * ox + kx) as isize - 1;
                        if ix < 0 || ix >= size as isize {
                            continue;
                        }
                        dx[(ci * size + iy as usize) * size + ix as usize] += cols[row + oy * out_size + ox];
                    }
                }
            }
        }
    }
}

/// x plane then y plane, each running from -0.5 to 0.5 across the image.
fn coord_planes(s: usize) -> Vec<f64> {
    let t = |i: usize| i as f64 / (s - 1) as f64 - 0.5;
    let xs = (0..s * s).map(|p| t(p % s));
    let ys = (0..s * s).map(|p| t(p / s));
    xs.chain(ys).collect()
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `y = W x + b` for each row of `x` (`n × din`), ReLU optional.
fn dense(w: &Tensor, b: &Tensor, x: &[f64], n: usize, relu: bool) -> Vec<f64> {
    let (dout, din) = (w.shape[0], w.shape[1]);
    let mut y = vec![0.0; n * dout];
    for r in 0..n {
        y[r * dout..(r + 1) * dout].copy_from_slice(&b.data);
    }
    gemm(n, din, dout, x, false, &w.data, true, 1.0, &mut y);
    if relu {
        y.iter_mut().for_each(|v| *v = v.max(0.0));
    }
    y
}

/// Probabilities for both heads on a `batch × C × S × S` input.
pub fn forward(params: &ModelParams, input: &Tensor) -> Result<([Vec<f64>; 2], ForwardCache)> {
    let cfg = &params.config;
    let s = cfg.input_size;
    if input.shape.len() != 4 || input.shape[1..] != [cfg.input_channels, s, s] {
        return Err(Error::ShapeMismatch(format!(
            "input {:?}, model expects [N, {}, {s}, {s}]",
            input.shape, cfg.input_channels
        )));
    }
    let n = input.shape[0];
    let sizes = cfg.conv_sizes();
    let mut cols: [Vec<f64>; 3] = Default::default();
    let mut acts: [Vec<f64>; 3] = Default::default();
    for l in 0..3 {
        let cin = cfg.conv_in(l);
        let cout = cfg.conv_channels[l];
        let in_size = if l == 0 { s } else { sizes[l - 1] };
        let out_size = sizes[l];
        let positions = out_size * out_size;
        let k = cin * 9;
        let in_len = cin * in_size * in_size;
        let mut col = vec![0.0; n * k * positions];
        let mut act = vec![0.0; n * cout * positions];
        let (w, b) = (&params.tensors[2 * l], &params.tensors[2 * l + 1]);
        let mut augmented = Vec::new();
        for i in 0..n {
            let x = if l == 0 {
                let raw = &input.data[i * cfg.input_len()..(i + 1) * cfg.input_len()];
                if cfg.coord_channels {
                    augmented.clear();
                    augmented.extend_from_slice(raw);
                    augmented.extend_from_slice(&coord_planes(s));
                    &augmented[..]
                } else {
                    raw
                }
            } else {
                &acts[l - 1][i * in_len..(i + 1) * in_len]
            };
            let c = &mut col[i * k * positions..(i + 1) * k * positions];
            im2col(x, cin, in_size, out_size, c);
            let z = &mut act[i * cout * positions..(i + 1) * cout * positions];
            for co in 0..cout {
                z[co * positions..(co + 1) * positions].fill(b.data[co]);
            }
            gemm(cout, k, positions, &w.data, false, c, false, 1.0, z);
            z.iter_mut().for_each(|v| *v = v.max(0.0));
        }
        cols[l] = col;
        acts[l] = act;
    }
    let c3 = cfg.conv_channels[2];
    let positions = sizes[2] * sizes[2];
    let feats: Vec<f64> = acts[2]
        .chunks_exact(positions)
        .map(|ch| ch.iter().sum::<f64>() / positions as f64)
        .collect();
    debug_assert_eq!(feats.len(), n * c3);

    let mut hidden: [[Vec<f64>; 2]; 2] = Default::default();
    let mut p: [Vec<f64>; 2] = Default::default();
    for head in 0..2 {
        let t = &params.tensors[HEAD_OFFSET[head]..HEAD_OFFSET[head] + 6];
        let h1 = dense(&t[0], &t[1], &feats, n, true);
        let h2 = dense(&t[2], &t[3], &h1, n, true);
        let z = dense(&t[4], &t[5], &h2, n, false);
        p[head] = z.into_iter().map(sigmoid).collect();
        hidden[head] = [h1, h2];
    }
    if p.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::InvalidConfig("non-finite activation in forward pass".into()));
    }
    let cache = ForwardCache {
        fingerprint: params.fingerprint(),
        batch: n,
        cols,
        acts,
        feats,
        hidden,
        p: p.clone(),
    };
    Ok((p, cache))
}

/// Mean binary cross-entropy with probabilities clamped to `[1e-7, 1 - 1e-7]`.
pub fn bce_loss(p: &[f64], y: &[f64]) -> Result<f64> {
    if p.len() != y.len() || p.is_empty() {
        return Err(Error::ShapeMismatch(format!("{} probabilities vs {} labels", p.len(), y.len())));
    }
    let sum: f64 = p
        .iter()
        .zip(y)
        .map(|(&p, &y)| {
            let p = p.clamp(PROB_CLAMP, 1.0 - PROB_CLAMP);
            -(y * p.ln() + (1.0 - y) * (1.0 - p).ln())
        })
        .sum();
    Ok(sum / p.len() as f64)
}

/// Left plus right head loss.
pub fn total_loss(p: &[Vec<f64>; 2], y_left: &[f64], y_right: &[f64]) -> Result<f64> {
    Ok(bce_loss(&p[0], y_left)? + bce_loss(&p[1], y_right)?)
}

/// Exact gradients of [`total_loss`] with respect to every parameter.
pub fn backward(params: &ModelParams, cache: &ForwardCache, y_left: &[f64], y_right: &[f64]) -> Result<ModelParams> {
    if cache.fingerprint != params.fingerprint() {
        return Err(Error::StaleCache);
    }
    let n = cache.batch;
    if y_left.len() != n || y_right.len() != n {
        return Err(Error::ShapeMismatch(format!(
            "batch of {n} with {} / {} labels",
            y_left.len(),
            y_right.len()
        )));
    }
    let cfg = &params.config;
    let mut g = ModelParams::zeros(*cfg);
    let c3 = cfg.conv_channels[2];
    let mut dfeats = vec![0.0; n * c3];
    for (head, y) in [y_left, y_right].into_iter().enumerate() {
        let off = HEAD_OFFSET[head];
        let t = &params.tensors[off..off + 6];
        let [h1, h2] = &cache.hidden[head];
        let dz: Vec<f64> = cache.p[head]
            .iter()
            .zip(y)
            .map(|(&p, &y)| {
                if (PROB_CLAMP..=1.0 - PROB_CLAMP).contains(&p) {
                    (p - y) / n as f64
                } else {
                    0.0
                }
            })
            .collect();
        let layers: [(&[f64], usize); 3] = [(&cache.feats, c3), (h1, cfg.head_hidden[0]), (h2, cfg.head_hidden[1])];
        let mut upstream = dz;
        for k in (0..3).rev() {
            let (x, din) = layers[k];
            let w = &t[2 * k];
            let dout = w.shape[0];
            // dW = upstreamᵀ x, db = column sums.
            gemm(dout, n, din, &upstream, true, x, false, 0.0, &mut g.tensors[off + 2 * k].data);
            let db = &mut g.tensors[off + 2 * k + 1].data;
            for r in 0..n {
                for j in 0..dout {
                    db[j] += upstream[r * dout + j];
                }
            }
            let mut dx = vec![0.0; n * din];
            gemm(n, dout, din, &upstream, false, &w.data, false, 0.0, &mut dx);
            if k > 0 {
                for (d, &a) in dx.iter_mut().zip(x) {
                    if a <= 0.0 {
                        *d = 0.0;
                    }
                }
                upstream = dx;
            } else {
                for (acc, d) in dfeats.iter_mut().zip(dx) {
                    *acc += d;
                }
            }
        }
    }

    let sizes = cfg.conv_sizes();
    let positions3 = sizes[2] * sizes[2];
    let mut dact: Vec<f64> = dfeats
        .iter()
        .flat_map(|&d| std::iter::repeat_n(d / positions3 as f64, positions3))
        .collect();
    for l in (0..3).rev() {
        let cin = cfg.conv_in(l);
        let cout = cfg.conv_channels[l];
        let in_size = if l == 0 { cfg.input_size } else { sizes[l - 1] };
        let positions = sizes[l] * sizes[l];
        let k = cin * 9;
        let w = &params.tensors[2 * l];
        for (d, &a) in dact.iter_mut().zip(&cache.acts[l]) {
            if a <= 0.0 {
                *d = 0.0;
            }
        }
        let mut dprev = if l > 0 { vec![0.0; n * cin * in_size * in_size] } else { Vec::new() };
        let mut dcols = vec![0.0; k * positions];
        for i in 0..n {
            let dz = &dact[i * cout * positions..(i + 1) * cout * positions];
            let col = &cache.cols[l][i * k * positions..(i + 1) * k * positions];
            gemm(cout, positions, k, dz, false, col, true, 1.0, &mut g.tensors[2 * l].data);
            let db = &mut g.tensors[2 * l + 1].data;
            for co in 0..cout {
                db[co] += dz[co * positions..(co + 1) * positions].iter().sum::<f64>();
            }
            if l > 0 {
                gemm(k, cout, positions, &w.data, true, dz, false, 0.0, &mut dcols);
                let len = cin * in_size * in_size;
                col2im(&dcols, cin, in_size, sizes[l], &mut dprev[i * len..(i + 1) * len]);
            }
        }
        dact = dprev;
    }
    if !g.is_finite() {
        return Err(Error::InvalidConfig("non-finite gradient".into()));
    }
    Ok(g)
}

/// Loss of a batch without keeping the cache.
pub fn batch_loss(params: &ModelParams, input: &Tensor, y_left: &[f64], y_right: &[f64]) -> Result<f64> {
    let (p, _) = forward(params, input)?;
    total_loss(&p, y_left, y_right)
}

/// Probabilities for `n` stacked inputs, evaluated in chunks.
pub fn predict(params: &ModelParams, inputs: &[f64], chunk: usize) -> Result<Vec<[f64; 2]>> {
    let len = params.config.input_len();
    if !inputs.len().is_multiple_of(len) {
        return Err(Error::ShapeMismatch(format!(
            "{} input values is not a multiple of {len}",
            inputs.len()
        )));
    }
    let s = params.config.input_size;
    let c = params.config.input_channels;
    let mut out = Vec::with_capacity(inputs.len() / len);
    for block in inputs.chunks(chunk.max(1) * len) {
        let n = block.len() / len;
        let t = Tensor::from_vec(&[n, c, s, s], block.to_vec())?;
        let (p, _) = forward(params, &t)?;
        out.extend((0..n).map(|i| [p[0][i], p[1][i]]));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// Direct per-element evaluation, sharing no code with `forward`.
    fn naive_forward(params: &ModelParams, x: &[f64]) -> [f64; 2] {
        let cfg = params.config;
        let mut act = x.to_vec();
        let mut size = cfg.input_size;
        let mut cin = cfg.input_channels;
        if cfg.coord_channels {
            for plane in 0..2 {
                for y in 0..size {
                    for xx in 0..size {
                        let v = if plane == 0 { xx } else { y };
                        act.push(v as f64 / (size as f64 - 1.0) - 0.5);
                    }
                }
            }
            cin += 2;
        }
        for l in 0..3 {
            let w = &params.tensors[2 * l].data;
            let b = &params.tensors[2 * l + 1].data;
            let cout = cfg.conv_channels[l];
            let out = (size - 1) / 2 + 1;
            let mut next = vec![0.0; cout * out * out];
            for co in 0..cout {
                for oy in 0..out {
                    for ox in 0..out {
                        let mut acc = b[co];
                        for ci in 0..cin {
                            for ky in 0..3 {
                                for kx in 0..3 {
                                    let iy = 2 * oy as i64 + ky as i64 - 1;
                                    let ix = 2 * ox as i64 + kx as i64 - 1;
                                    if iy >= 0 && ix >= 0 && iy < size as i64 && ix < size as i64 {
                                        acc += w[((co * cin + ci) * 3 + ky) * 3 + kx]
                                            * act[(ci * size + iy as usize) * size + ix as usize];
                                    }
                                }
                            }
                        }
                        next[(co * out + oy) * out + ox] = acc.max(0.0);
                    }
                }
            }
            act = next;
            size = out;
            cin = cout;
        }
        let feats: Vec<f64> = (0..cin)
            .map(|c| act[c * size * size..(c + 1) * size * size].iter().sum::<f64>() / (size * size) as f64)
            .collect();
        let mut out = [0.0; 2];
        for head in 0..2 {
            let mut h = feats.clone();
            for k in 0..3 {
                let w = &params.tensors[HEAD_OFFSET[head] + 2 * k];
                let b = &params.tensors[HEAD_OFFSET[head] + 2 * k + 1].data;
                let mut y = vec![0.0; w.shape[0]];
                for j in 0..w.shape[0] {
                    y[j] = b[j] + (0..w.shape[1]).map(|i| w.data[j * w.shape[1] + i] * h[i]).sum::<f64>();
                    if k < 2 {
                        y[j] = y[j].max(0.0);
                    }
                }
                h = y;
            }
            out[head] = 1.0 / (1.0 + (-h[0]).exp());
        }
        out
    }

    fn batch(cfg: &ModelConfig, n: usize, seed: u64) -> Tensor {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let s = cfg.input_size;
        let data = (0..n * cfg.input_len()).map(|_| rng.random_range(-0.5..0.5)).collect();
        Tensor::from_vec(&[n, cfg.input_channels, s, s], data).unwrap()
    }

    #[test]
    fn zero_weights_give_one_half() {
        let cfg = ModelConfig::default();
        let p = ModelParams::zeros(cfg);
        let (out, _) = forward(&p, &batch(&cfg, 3, 1)).unwrap();
        assert!(out.iter().flatten().all(|&v| v == 0.5));
    }

    #[test]
    fn forward_matches_naive_reference() {
        let cfg = ModelConfig::default();
        let params = ModelParams::random(cfg, 5, 0.3);
        let x = batch(&cfg, 4, 2);
        let (p, _) = forward(&params, &x).unwrap();
        for i in 0..4 {
            let want = naive_forward(&params, &x.data[i * cfg.input_len()..(i + 1) * cfg.input_len()]);
            assert!((p[0][i] - want[0]).abs() < 1e-10 && (p[1][i] - want[1]).abs() < 1e-10);
        }
    }

    #[test]
    fn identical_images_give_identical_outputs() {
        let cfg = ModelConfig::default();
        let params = ModelParams::init(cfg, 3).unwrap();
        let one = batch(&cfg, 1, 9);
        let mut data = Vec::new();
        for _ in 0..5 {
            data.extend_from_slice(&one.data);
        }
        let x = Tensor::from_vec(&[5, 3, 32, 32], data).unwrap();
        let (p, _) = forward(&params, &x).unwrap();
        assert!(p[0].iter().all(|&v| v == p[0][0]) && p[1].iter().all(|&v| v == p[1][0]));
    }

    #[test]
    fn wrong_input_shape() {
        let params = ModelParams::zeros(ModelConfig::default());
        let x = Tensor::zeros(&[2, 3, 16, 16]);
        assert!(matches!(forward(&params, &x), Err(Error::ShapeMismatch(_))));
    }

    #[test]
    fn bce_reference_values() {
        assert!((bce_loss(&[0.5; 4], &[0.0, 1.0, 1.0, 0.0]).unwrap() - std::f64::consts::LN_2).abs() < 1e-15);
        assert!(bce_loss(&[0.0, 1.0], &[0.0, 1.0]).unwrap() <= 1e-6);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let p: Vec<f64> = (0..50).map(|_| rng.random_range(0.01..0.99)).collect();
        let y: Vec<f64> = (0..50).map(|_| rng.random_range(0..2) as f64).collect();
        let direct: f64 =
            p.iter().zip(&y).map(|(p, y)| -(y * p.ln() + (1.0 - y) * (1.0 - p).ln())).sum::<f64>() / 50.0;
        assert!((bce_loss(&p, &y).unwrap() - direct).abs() < 1e-12);
        assert!(bce_loss(&p, &y[..3]).is_err());
    }

    #[test]
    fn stale_cache_is_rejected() {
        let cfg = ModelConfig::tiny();
        let mut params = ModelParams::random(cfg, 1, 0.2);
        let (_, cache) = forward(&params, &batch(&cfg, 2, 1)).unwrap();
        *params.flat_mut(10) += 1e-3;
        assert!(matches!(backward(&params, &cache, &[0.0, 1.0], &[1.0, 0.0]), Err(Error::StaleCache)));
    }

    #[test]
    fn heads_have_independent_gradients() {
        let cfg = ModelConfig::tiny();
        let params = ModelParams::random(cfg, 7, 0.3);
        let x = batch(&cfg, 3, 3);
        let (_, cache) = forward(&params, &x).unwrap();
        let a = backward(&params, &cache, &[1.0, 0.0, 1.0], &[0.0, 0.0, 1.0]).unwrap();
        let b = backward(&params, &cache, &[1.0, 0.0, 1.0], &[1.0, 1.0, 0.0]).unwrap();
        for i in HEAD_OFFSET[0]..HEAD_OFFSET[0] + 6 {
            assert_eq!(a.tensors[i], b.tensors[i]);
        }
        assert_ne!(a.tensors[HEAD_OFFSET[1]], b.tensors[HEAD_OFFSET[1]]);
    }

    #[test]
    fn gradient_vanishes_at_the_labels() {
        // Saturate both heads through the final bias; clamped outputs have zero gradient.
        let cfg = ModelConfig::tiny();
        let mut params = ModelParams::random(cfg, 2, 0.1);
        params.tensors[HEAD_OFFSET[0] + 5].data[0] = 40.0;
        params.tensors[HEAD_OFFSET[1] + 5].data[0] = -40.0;
        let x = batch(&cfg, 2, 5);
        let (_, cache) = forward(&params, &x).unwrap();
        let g = backward(&params, &cache, &[1.0, 1.0], &[0.0, 0.0]).unwrap();
        assert!(g.norm() <= 1e-6, "{}", g.norm());
    }

    #[test]
    fn parameter_counts() {
        assert_eq!(ModelParams::zeros(ModelConfig::default()).parameter_count(), 7_522);
        assert!(ModelParams::zeros(ModelConfig::tiny()).parameter_count() <= 5_000);
    }
}
