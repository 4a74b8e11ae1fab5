use std::path::Path;

use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::metrics::EvalReport;
use crate::datasets::{crop_input, load_inputs, GeneratedFrame, Manifest};
use crate::error::{Error, Result};
use crate::labeling::LabelPair;
use crate::nn::{adam_step, backward, forward, predict, total_loss, AdamState, ModelParams, OptimizerConfig, Tensor};
use crate::seeding;

/// Network inputs held in memory: stacked `3 × S × S` crops and their labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub input_size: usize,
    pub inputs: Vec<f64>,
    pub labels: Vec<LabelPair>,
    pub frame_ids: Vec<String>,
}

impl Dataset {
    pub fn from_manifest(m: &Manifest, root: &Path, input_size: usize) -> Result<Self> {
        Ok(Self {
            input_size,
            inputs: load_inputs(m, root, input_size as u32)?,
            labels: m.records.iter().map(|r| r.labels).collect(),
            frame_ids: m.records.iter().map(|r| r.frame_id.clone()).collect(),
        })
    }

    /// Same crops as [`Dataset::from_manifest`] without a disk round trip.
    pub fn from_frames(frames: &[GeneratedFrame], input_size: usize) -> Result<Self> {
        if frames.is_empty() {
            return Err(Error::EmptyManifest);
        }
        let per: Vec<Vec<f64>> = frames
            .par_iter()
            .map(|f| crop_input(&f.image, f.record.crop_rect, input_size as u32))
            .collect::<Result<_>>()?;
        Ok(Self {
            input_size,
            inputs: per.concat(),
            labels: frames.iter().map(|f| f.record.labels).collect(),
            frame_ids: frames.iter().map(|f| f.record.frame_id.clone()).collect(),
        })
    }

    pub fn input_len(&self) -> usize {
        3 * self.input_size * self.input_size
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn input(&self, i: usize) -> &[f64] {
        let n = self.input_len();
        &self.inputs[i * n..(i + 1) * n]
    }

    /// Rows `indices`, in the given order.
    pub fn subset(&self, indices: &[usize]) -> Self {
        let mut inputs = Vec::with_capacity(indices.len() * self.input_len());
        for &i in indices {
            inputs.extend_from_slice(self.input(i));
        }
        Self {
            input_size: self.input_size,
            inputs,
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            frame_ids: indices.iter().map(|&i| self.frame_ids[i].clone()).collect(),
        }
    }

    /// Rows whose frame id is in `ids`, in dataset order.
    pub fn select_ids(&self, ids: &std::collections::HashSet<String>) -> Self {
        let idx: Vec<usize> = (0..self.len()).filter(|&i| ids.contains(&self.frame_ids[i])).collect();
        self.subset(&idx)
    }

    pub fn concat(&self, other: &Dataset) -> Result<Self> {
        if self.input_size != other.input_size {
            return Err(Error::ShapeMismatch("datasets have different input sizes".into()));
        }
        let mut out = self.clone();
        out.inputs.extend_from_slice(&other.inputs);
        out.labels.extend_from_slice(&other.labels);
        out.frame_ids.extend(other.frame_ids.iter().cloned());
        Ok(out)
    }
}

/// Stacks rows drawn from one or more datasets into a batch tensor.
fn gather(parts: &[(&Dataset, &[usize])]) -> Result<(Tensor, Vec<f64>, Vec<f64>)> {
    let size = parts[0].0.input_size;
    let n: usize = parts.iter().map(|(_, idx)| idx.len()).sum();
    let mut data = Vec::with_capacity(n * 3 * size * size);
    let (mut yl, mut yr) = (Vec::with_capacity(n), Vec::with_capacity(n));
    for (ds, idx) in parts {
        for &i in idx.iter() {
            data.extend_from_slice(ds.input(i));
            yl.push(ds.labels[i].left_on_wheel as u8 as f64);
            yr.push(ds.labels[i].right_on_wheel as u8 as f64);
        }
    }
    Ok((Tensor::from_vec(&[n, 3, size, size], data)?, yl, yr))
}

/// Endless stream of indices: a fresh seeded permutation per pass, so small
/// pools repeat once exhausted.
struct EpochSampler {
    n: usize,
    order: Vec<usize>,
    pos: usize,
    rng: ChaCha8Rng,
}

impl EpochSampler {
    fn new(n: usize, seed: u64, stream: &str) -> Self {
        Self {
            n,
            order: Vec::new(),
            pos: 0,
            rng: seeding::stream_rng(seed, &[seeding::tag(stream)]),
        }
    }

    fn take(&mut self, k: usize) -> Vec<usize> {
        (0..k)
            .map(|_| {
                if self.pos == self.order.len() {
                    self.order = (0..self.n).collect();
                    self.order.shuffle(&mut self.rng);
                    self.pos = 0;
                }
                self.pos += 1;
                self.order[self.pos - 1]
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub optimizer: OptimizerConfig,
    pub max_batches: usize,
    pub finetune_batches: usize,
    pub eval_every: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            optimizer: OptimizerConfig::desk(),
            max_batches: 600,
            finetune_batches: 300,
            eval_every: 100,
            seed: 0,
        }
    }
}

impl TrainConfig {
    /// Full-size optimizer settings and 2,500 fine-tuning batches.
    pub fn paper_scale(self) -> Self {
        Self {
            optimizer: OptimizerConfig::default(),
            finetune_batches: 2500,
            ..self
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.optimizer.validate()?;
        if self.max_batches == 0 || self.finetune_batches == 0 || self.eval_every == 0 {
            return Err(Error::InvalidConfig(format!("batch counts must be positive: {self:?}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistoryEntry {
    pub batch: usize,
    /// Mean training loss since the previous entry.
    pub train_loss: f64,
    pub val_auc_left: Option<f64>,
    pub val_auc_right: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainHistory {
    pub entries: Vec<HistoryEntry>,
    /// Batch count of the returned checkpoint.
    pub best_batch: usize,
}

impl TrainHistory {
    pub fn to_text(&self) -> String {
        let f = |v: Option<f64>| v.map_or("undefined".to_string(), |v| format!("{v:.6}"));
        let mut s = format!("best_batch {}\n", self.best_batch);
        for e in &self.entries {
            s += &format!(
                "batch {} train_loss {:.6} val_auc_left {} val_auc_right {}\n",
                e.batch,
                e.train_loss,
                f(e.val_auc_left),
                f(e.val_auc_right)
            );
        }
        s
    }
}

fn step(params: &mut ModelParams, state: &mut AdamState, cfg: &OptimizerConfig, batch: (Tensor, Vec<f64>, Vec<f64>)) -> Result<f64> {
    let (x, yl, yr) = batch;
    let (p, cache) = forward(params, &x)?;
    let loss = total_loss(&p, &yl, &yr)?;
    let g = backward(params, &cache, &yl, &yr)?;
    adam_step(params, &g, state, cfg)?;
    Ok(loss)
}

/// Minibatch Adam on `train` for `cfg.max_batches` batches. Validation AUC
/// is measured every `cfg.eval_every` batches and at the end; the parameters
/// with the best mean validation AUC are returned (the last ones if no AUC is
/// ever defined).
pub fn train(params: &ModelParams, train: &Dataset, val: &Dataset, cfg: &TrainConfig) -> Result<(ModelParams, TrainHistory)> {
    cfg.validate()?;
    if train.is_empty() || val.is_empty() {
        return Err(Error::EmptyManifest);
    }
    let mut p = params.clone();
    let mut state = AdamState::new(&p);
    let mut sampler = EpochSampler::new(train.len(), cfg.seed, "train");
    let mut history = TrainHistory::default();
    let mut best: Option<(f64, ModelParams)> = None;
    let mut window = Vec::new();
    for b in 1..=cfg.max_batches {
        let idx = sampler.take(cfg.optimizer.batch_size);
        window.push(step(&mut p, &mut state, &cfg.optimizer, gather(&[(train, &idx)])?)?);
        if b % cfg.eval_every == 0 || b == cfg.max_batches {
            let report = evaluate(&p, val)?;
            history.entries.push(HistoryEntry {
                batch: b,
                train_loss: window.iter().sum::<f64>() / window.len() as f64,
                val_auc_left: report.auc_left,
                val_auc_right: report.auc_right,
            });
            window.clear();
            if let Some(m) = report.mean_auc() {
                if best.as_ref().is_none_or(|(bm, _)| m > *bm) {
                    best = Some((m, p.clone()));
                    history.best_batch = b;
                }
            }
        }
    }
    match best {
        Some((_, bp)) => Ok((bp, history)),
        None => {
            history.best_batch = cfg.max_batches;
            Ok((p, history))
        }
    }
}

/// Composition of one fine-tuning batch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BatchAudit {
    pub synthetic: usize,
    pub real: usize,
}

/// Fine-tunes the whole network for `cfg.finetune_batches` batches, each
/// holding `ceil(B/2)` synthetic and `floor(B/2)` real records. A real pool
/// smaller than the demand is cycled, so its frames repeat.
pub fn finetune_mixed(
    params: &ModelParams,
    synth: &Dataset,
    real: &Dataset,
    cfg: &TrainConfig,
) -> Result<(ModelParams, Vec<BatchAudit>)> {
    cfg.validate()?;
    if synth.is_empty() || real.is_empty() {
        return Err(Error::EmptyManifest);
    }
    let b = cfg.optimizer.batch_size;
    let (ns, nr) = (b.div_ceil(2), b / 2);
    let mut p = params.clone();
    let mut state = AdamState::new(&p);
    let mut s_sampler = EpochSampler::new(synth.len(), cfg.seed, "finetune_synthetic");
    let mut r_sampler = EpochSampler::new(real.len(), cfg.seed, "finetune_real");
    let mut audit = Vec::with_capacity(cfg.finetune_batches);
    for _ in 0..cfg.finetune_batches {
        let si = s_sampler.take(ns);
        let ri = r_sampler.take(nr);
        audit.push(BatchAudit {
            synthetic: si.len(),
            real: ri.len(),
        });
        step(&mut p, &mut state, &cfg.optimizer, gather(&[(synth, &si), (real, &ri)])?)?;
    }
    Ok((p, audit))
}

/// Per-frame `[left, right]` probabilities, in dataset order.
pub fn score(params: &ModelParams, ds: &Dataset) -> Result<Vec<[f64; 2]>> {
    if ds.is_empty() {
        return Err(Error::EmptyManifest);
    }
    if ds.input_size != params.config.input_size {
        return Err(Error::ShapeMismatch(format!(
            "dataset crops are {} px, model expects {}",
            ds.input_size, params.config.input_size
        )));
    }
    const CHUNK: usize = 64;
    let chunks: Vec<Vec<[f64; 2]>> = ds
        .inputs
        .par_chunks(CHUNK * ds.input_len())
        .map(|c| predict(params, c, CHUNK))
        .collect::<Result<_>>()?;
    Ok(chunks.concat())
}

pub fn evaluate(params: &ModelParams, ds: &Dataset) -> Result<EvalReport> {
    EvalReport::from_scores(&score(params, ds)?, &ds.labels)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datasets::generate_frames;
    use crate::nn::ModelConfig;
    use crate::scenegen::GenerationConfig;

    fn small_set() -> Dataset {
        let mut cfg = GenerationConfig::desk_synthetic();
        cfg.num_sequences = 7;
        Dataset::from_frames(&generate_frames(&cfg).unwrap(), 32).unwrap()
    }

    #[test]
    fn sampler_cycles_permutations() {
        let mut s = EpochSampler::new(5, 1, "t");
        let mut first: Vec<usize> = s.take(5);
        first.sort();
        assert_eq!(first, vec![0, 1, 2, 3, 4]);
        assert_eq!(s.take(12).len(), 12);
    }

    #[test]
    fn training_lowers_loss_and_is_deterministic() {
        let ds = small_set();
        assert!(ds.len() >= 200);
        let params = ModelParams::init(ModelConfig::default(), 1).unwrap();
        let cfg = TrainConfig {
            max_batches: 300,
            eval_every: 50,
            ..TrainConfig::default()
        };
        let (_, h) = train(&params, &ds, &ds, &cfg).unwrap();
        let first = h.entries.first().unwrap().train_loss;
        let last = h.entries.last().unwrap().train_loss;
        assert!(last < first, "{first} -> {last}");
        let (_, h2) = train(&params, &ds, &ds, &cfg).unwrap();
        assert_eq!(h, h2);
    }

    #[test]
    fn single_frame_is_memorized() {
        let ds = small_set().subset(&[3]);
        let params = ModelParams::init(ModelConfig::default(), 2).unwrap();
        let cfg = TrainConfig {
            max_batches: 500,
            eval_every: 500,
            ..TrainConfig::default()
        };
        let (p, _) = train(&params, &ds, &ds, &cfg).unwrap();
        let (x, yl, yr) = gather(&[(&ds, &[0])]).unwrap();
        let (out, _) = forward(&p, &x).unwrap();
        let l = total_loss(&out, &yl, &yr).unwrap();
        assert!(l < 0.05, "{l} {out:?} {yl:?} {yr:?}");
    }

    #[test]
    fn odd_batch_split() {
        let ds = small_set();
        let params = ModelParams::init(ModelConfig::default(), 1).unwrap();
        let real = ds.subset(&[0, 1, 2]);
        let mut cfg = TrainConfig {
            finetune_batches: 5,
            ..TrainConfig::default()
        };
        cfg.optimizer.batch_size = 7;
        let (_, audit) = finetune_mixed(&params, &ds, &real, &cfg).unwrap();
        assert!(audit.iter().all(|a| *a == BatchAudit { synthetic: 4, real: 3 }));
    }

    #[test]
    fn reference_batch_is_half_synthetic() {
        let ds = small_set();
        let params = ModelParams::init(ModelConfig::default(), 1).unwrap();
        let mut cfg = TrainConfig {
            finetune_batches: 2,
            ..TrainConfig::default()
        };
        cfg.optimizer.batch_size = 128;
        let (_, audit) = finetune_mixed(&params, &ds, &ds.subset(&[0, 1]), &cfg).unwrap();
        assert!(audit.iter().all(|a| *a == BatchAudit { synthetic: 64, real: 64 }));
    }

    #[test]
    fn evaluation_ignores_order() {
        let ds = small_set();
        let params = ModelParams::init(ModelConfig::default(), 4).unwrap();
        let mut idx: Vec<usize> = (0..ds.len()).rev().collect();
        idx.rotate_left(17);
        assert_eq!(evaluate(&params, &ds).unwrap(), evaluate(&params, &ds.subset(&idx)).unwrap());
    }
}
