//! The domain-gap experiment: train on a few target-domain frames alone, or
//! pretrain on synthetic data and fine-tune with the same frames, and compare
//! per-hand test AUC over repeated subsamplings.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::Serialize;

use crate::datasets::{
    balance_undersample, sample_small_real_subset, split_by_identity, GeneratedFrame, Manifest, SplitSpec, SplitTag,
    SYNTHETIC_LABEL_MIX,
};
use crate::error::{Error, Result};
use crate::nn::{ModelConfig, ModelParams};
use crate::pipeline::{evaluate, finetune_mixed, train, Dataset, TrainConfig};
use crate::scenegen::named_enum;
use crate::seeding;

/// Drivers drawn for each small target-domain subset (four sequences each).
pub const SUBSET_DRIVERS: usize = 5;

/// Synthetic train/validation proportions.
pub const SYNTHETIC_SPLIT: [f64; 3] = [0.78, 0.22, 0.0];
/// Target-domain train/validation/test proportions.
pub const REAL_SPLIT: [f64; 3] = [0.55, 0.15, 0.30];

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentMatrixConfig {
    pub real_subset_sizes: Vec<usize>,
    pub repetitions: usize,
    /// Also train on the real subset alone, from scratch.
    pub baseline_only_real: bool,
    /// One seed per repetition; it drives both the subsample and the init.
    pub seeds: Vec<u64>,
    pub train: TrainConfig,
    pub model: ModelConfig,
}

impl Default for ExperimentMatrixConfig {
    fn default() -> Self {
        Self {
            real_subset_sizes: vec![100, 200, 300, 400],
            repetitions: 5,
            baseline_only_real: true,
            seeds: (0..5).collect(),
            train: TrainConfig::default(),
            model: ModelConfig::default(),
        }
    }
}

impl ExperimentMatrixConfig {
    /// Eleven repetitions.
    pub fn paper_scale(self) -> Self {
        Self {
            repetitions: 11,
            seeds: (0..11).collect(),
            train: self.train.paper_scale(),
            ..self
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.train.validate()?;
        self.model.validate()?;
        if self.repetitions == 0 || self.seeds.len() != self.repetitions {
            return Err(Error::InvalidConfig(format!(
                "{} repetitions need as many seeds, got {}",
                self.repetitions,
                self.seeds.len()
            )));
        }
        if self
            .real_subset_sizes
            .iter()
            .any(|&k| k == 0 || k % (SUBSET_DRIVERS * 4) != 0)
        {
            return Err(Error::InvalidConfig(format!(
                "subset sizes {:?} must be positive multiples of {}",
                self.real_subset_sizes,
                SUBSET_DRIVERS * 4
            )));
        }
        Ok(())
    }
}

/// Synthetic and target-domain data, split once and held in memory.
#[derive(Debug, Clone)]
pub struct MatrixPools {
    pub synth_train: Dataset,
    pub synth_val: Dataset,
    pub real_train_manifest: Manifest,
    pub real_train: Dataset,
    pub real_val_manifest: Manifest,
    pub real_val: Dataset,
    pub real_test: Dataset,
}

fn split_dataset(ds: &Dataset, m: &Manifest) -> Dataset {
    let ids: HashSet<String> = m.records.iter().map(|r| r.frame_id.clone()).collect();
    ds.select_ids(&ids)
}

impl MatrixPools {
    /// Balances the synthetic pool to the reference label mix, then splits
    /// both pools by driver identity.
    pub fn new(synth: (&Manifest, &Dataset), real: (&Manifest, &Dataset), seed: u64) -> Result<Self> {
        let balanced = balance_undersample(synth.0, &SYNTHETIC_LABEL_MIX, seed)?;
        let (s_train, s_val, _) = split_by_identity(&balanced, &SplitSpec::new(SYNTHETIC_SPLIT[0], SYNTHETIC_SPLIT[1], SYNTHETIC_SPLIT[2], seed)?)?;
        let (r_train, r_val, r_test) = split_by_identity(real.0, &SplitSpec::new(REAL_SPLIT[0], REAL_SPLIT[1], REAL_SPLIT[2], seed)?)?;
        Ok(Self {
            synth_train: split_dataset(synth.1, &s_train),
            synth_val: split_dataset(synth.1, &s_val),
            real_train: split_dataset(real.1, &r_train),
            real_val: split_dataset(real.1, &r_val),
            real_test: split_dataset(real.1, &r_test),
            real_train_manifest: r_train,
            real_val_manifest: r_val,
        })
    }

    pub fn from_frames(synth: &[GeneratedFrame], real: &[GeneratedFrame], input_size: usize, seed: u64) -> Result<Self> {
        let manifest = |frames: &[GeneratedFrame], hash: &str| {
            Manifest::new(frames.iter().map(|f| f.record.clone()).collect(), SplitTag::Unsplit, hash)
        };
        let sm = manifest(synth, "synthetic")?;
        let rm = manifest(real, "pseudo_real")?;
        let sd = Dataset::from_frames(synth, input_size)?;
        let rd = Dataset::from_frames(real, input_size)?;
        Self::new((&sm, &sd), (&rm, &rd), seed)
    }

    pub fn from_manifests(synth: &Manifest, synth_root: &Path, real: &Manifest, real_root: &Path, input_size: usize, seed: u64) -> Result<Self> {
        let sd = Dataset::from_manifest(synth, synth_root, input_size)?;
        let rd = Dataset::from_manifest(real, real_root, input_size)?;
        Self::new((synth, &sd), (real, &rd), seed)
    }
}

named_enum!(
    Condition {
        SynthOnly => "synth_only",
        RealOnly => "real_only",
        SynthPlusReal => "synth_plus_real",
    }
);

/// Test AUC of one trained model.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunRecord {
    pub condition: Condition,
    pub real_frames: usize,
    pub repetition: usize,
    pub seed: u64,
    pub auc_left: Option<f64>,
    pub auc_right: Option<f64>,
}

/// Mean and population standard deviation of one cell over repetitions.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CellSummary {
    pub condition: Condition,
    pub real_frames: usize,
    pub runs: usize,
    pub mean_left: f64,
    pub std_left: f64,
    pub mean_right: f64,
    pub std_right: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MatrixResult {
    pub runs: Vec<RunRecord>,
    pub cells: Vec<CellSummary>,
}

fn mean_std(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Groups runs by (condition, real_frames) and averages the defined AUCs.
pub fn summarize(runs: &[RunRecord]) -> Vec<CellSummary> {
    let mut groups: BTreeMap<(Condition, usize), Vec<&RunRecord>> = BTreeMap::new();
    for r in runs {
        groups.entry((r.condition, r.real_frames)).or_default().push(r);
    }
    groups
        .into_iter()
        .map(|((condition, real_frames), rs)| {
            let l: Vec<f64> = rs.iter().filter_map(|r| r.auc_left).collect();
            let r: Vec<f64> = rs.iter().filter_map(|r| r.auc_right).collect();
            let (mean_left, std_left) = mean_std(&l);
            let (mean_right, std_right) = mean_std(&r);
            CellSummary {
                condition,
                real_frames,
                runs: rs.len(),
                mean_left,
                std_left,
                mean_right,
                std_right,
            }
        })
        .collect()
}

impl MatrixResult {
    pub fn cell(&self, condition: Condition, real_frames: usize) -> Option<&CellSummary> {
        self.cells
            .iter()
            .find(|c| c.condition == condition && c.real_frames == real_frames)
    }

    /// Tab-separated per-run log.
    pub fn runs_text(&self) -> String {
        let f = |v: Option<f64>| v.map_or("undefined".to_string(), |v| format!("{v:?}"));
        let mut s = String::from("condition\treal_frames\trepetition\tseed\tauc_left\tauc_right\n");
        for r in &self.runs {
            s += &format!(
                "{}\t{}\t{}\t{}\t{}\t{}\n",
                r.condition,
                r.real_frames,
                r.repetition,
                r.seed,
                f(r.auc_left),
                f(r.auc_right)
            );
        }
        s
    }

    /// Tab-separated mean and standard deviation per cell.
    pub fn summary_text(&self) -> String {
        let mut s = String::from("condition\treal_frames\truns\tmean_left\tstd_left\tmean_right\tstd_right\n");
        for c in &self.cells {
            s += &format!(
                "{}\t{}\t{}\t{:.4}\t{:.4}\t{:.4}\t{:.4}\n",
                c.condition, c.real_frames, c.runs, c.mean_left, c.std_left, c.mean_right, c.std_right
            );
        }
        s
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        for (name, text) in [("runs.tsv", self.runs_text()), ("summary.tsv", self.summary_text())] {
            let p = dir.join(name);
            std::fs::write(&p, text).map_err(|e| Error::io(&p, e))?;
        }
        let p = dir.join("summary.json");
        let json = serde_json::to_string_pretty(self).expect("plain data serializes");
        std::fs::write(&p, json).map_err(|e| Error::io(&p, e))
    }
}

/// Per repetition: pretrain on synthetic data (the synthetic-only row), then
/// for each subset size train on the subset alone and fine-tune the
/// pretrained model with it; every model is scored on the fixed test split.
pub fn run_experiment_matrix(cfg: &ExperimentMatrixConfig, pools: &MatrixPools) -> Result<MatrixResult> {
    cfg.validate()?;
    let mut runs = Vec::new();
    let record = |condition, real_frames, repetition, seed, params: &ModelParams| -> Result<RunRecord> {
        let r = evaluate(params, &pools.real_test)?;
        Ok(RunRecord {
            condition,
            real_frames,
            repetition,
            seed,
            auc_left: r.auc_left,
            auc_right: r.auc_right,
        })
    };
    let index: HashMap<&str, usize> = pools
        .real_train
        .frame_ids
        .iter()
        .enumerate()
        .map(|(i, id)| (id.as_str(), i))
        .collect();
    for (rep, &seed) in cfg.seeds.iter().enumerate() {
        let init = ModelParams::init(cfg.model, seeding::stream_seed(seed, &[seeding::tag("init")]))?;
        let tc = TrainConfig { seed, ..cfg.train };
        let (pretrained, _) = train(&init, &pools.synth_train, &pools.synth_val, &tc)?;
        runs.push(record(Condition::SynthOnly, 0, rep, seed, &pretrained)?);
        for &k in &cfg.real_subset_sizes {
            let sub = sample_small_real_subset(&pools.real_train_manifest, SUBSET_DRIVERS, k / (SUBSET_DRIVERS * 4), seed)?;
            let rows: Vec<usize> = sub.records.iter().map(|r| index[r.frame_id.as_str()]).collect();
            let real = pools.real_train.subset(&rows);
            if cfg.baseline_only_real {
                let (p, _) = train(&init, &real, &pools.real_val, &tc)?;
                runs.push(record(Condition::RealOnly, k, rep, seed, &p)?);
            }
            let (p, _) = finetune_mixed(&pretrained, &pools.synth_train, &real, &tc)?;
            runs.push(record(Condition::SynthPlusReal, k, rep, seed, &p)?);
        }
    }
    let cells = summarize(&runs);
    Ok(MatrixResult { runs, cells })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run(c: Condition, k: usize, rep: usize, l: f64, r: f64) -> RunRecord {
        RunRecord {
            condition: c,
            real_frames: k,
            repetition: rep,
            seed: rep as u64,
            auc_left: Some(l),
            auc_right: Some(r),
        }
    }

    #[test]
    fn summary_recomputes_from_runs() {
        let runs = vec![
            run(Condition::RealOnly, 100, 0, 0.6, 0.7),
            run(Condition::RealOnly, 100, 1, 0.8, 0.9),
            run(Condition::SynthOnly, 0, 0, 0.5, 0.5),
        ];
        let cells = summarize(&runs);
        assert_eq!(cells.len(), 2);
        let c = cells.iter().find(|c| c.condition == Condition::RealOnly).unwrap();
        assert!((c.mean_left - 0.7).abs() < 1e-12 && (c.std_left - 0.1).abs() < 1e-12);
        assert!((c.mean_right - 0.8).abs() < 1e-12);
    }

    #[test]
    fn config_checks() {
        assert!(ExperimentMatrixConfig::default().validate().is_ok());
        let bad = ExperimentMatrixConfig {
            real_subset_sizes: vec![30],
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        let p = ExperimentMatrixConfig::default().paper_scale();
        assert_eq!((p.repetitions, p.train.finetune_batches), (11, 2500));
    }
}
