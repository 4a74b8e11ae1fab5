use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use super::metrics::predicted_labels;
use super::train::{score, Dataset};
use crate::datasets::{read_table, write_table, FrameRecord, Manifest, SplitTag};
use crate::error::{Error, Result};
use crate::labeling::LabelPair;
use crate::nn::ModelParams;
use crate::render::{crop_and_resize, Image};
use crate::scenegen::named_enum;

named_enum!(
    /// Failure categories a reviewer assigns to misclassified frames.
    ErrorCategory {
        Unassigned => "unassigned",
        Occlusion => "occlusion",
        BothOff => "both_off",
        OppositeSide => "opposite_side",
        Blur => "blur",
        Other => "other",
    }
);

/// A frame the model got wrong on at least one hand.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorRecord {
    pub record: FrameRecord,
    pub scores: [f64; 2],
    pub predicted: LabelPair,
    pub category: ErrorCategory,
    /// Wheel crop image, relative to the error manifest's directory.
    pub crop_path: PathBuf,
}

impl ErrorRecord {
    pub fn frame_id(&self) -> &str {
        &self.record.frame_id
    }

    pub fn labels(&self) -> LabelPair {
        self.record.labels
    }

    /// Largest `|score - 0.5|` among the misclassified hands.
    pub fn confidence(&self) -> f64 {
        let wrong = [
            self.predicted.left_on_wheel != self.record.labels.left_on_wheel,
            self.predicted.right_on_wheel != self.record.labels.right_on_wheel,
        ];
        (0..2)
            .filter(|&h| wrong[h])
            .map(|h| (self.scores[h] - 0.5).abs())
            .fold(0.0, f64::max)
    }
}

/// Misclassified frames plus the manifest provenance they came from.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorManifest {
    pub split: SplitTag,
    pub config_hash: String,
    pub errors: Vec<ErrorRecord>,
}

const ERROR_COLUMNS: [&str; 6] = ["score_left", "score_right", "pred_left", "pred_right", "category", "crop_path"];

impl ErrorManifest {
    pub fn write(&self, path: &Path) -> Result<()> {
        let m = Manifest {
            records: self.errors.iter().map(|e| e.record.clone()).collect(),
            split: self.split,
            config_hash: self.config_hash.clone(),
        };
        write_table(path, &m, &ERROR_COLUMNS, |i| {
            let e = &self.errors[i];
            vec![
                format!("{:?}", e.scores[0]),
                format!("{:?}", e.scores[1]),
                (e.predicted.left_on_wheel as u8).to_string(),
                (e.predicted.right_on_wheel as u8).to_string(),
                e.category.to_string(),
                e.crop_path.display().to_string(),
            ]
        })
    }

    pub fn read(path: &Path) -> Result<Self> {
        let mut extra: Vec<([f64; 2], LabelPair, ErrorCategory, PathBuf)> = Vec::new();
        let (m, _) = read_table(path, &ERROR_COLUMNS, |f, _| {
            let num = |s: &str| s.parse::<f64>().map_err(|e| format!("score: {e}"));
            let flag = |s: &str| match s {
                "0" => Ok(false),
                "1" => Ok(true),
                other => Err(format!("expected 0 or 1, got `{other}`")),
            };
            extra.push((
                [num(f[0])?, num(f[1])?],
                LabelPair::new(flag(f[2])?, flag(f[3])?),
                f[4].parse()?,
                PathBuf::from(f[5]),
            ));
            Ok(())
        })?;
        let errors = m
            .records
            .into_iter()
            .zip(extra)
            .map(|(record, (scores, predicted, category, crop_path))| ErrorRecord {
                record,
                scores,
                predicted,
                category,
                crop_path,
            })
            .collect();
        Ok(Self {
            split: m.split,
            config_hash: m.config_hash,
            errors,
        })
    }

    pub fn get(&self, frame_id: &str) -> Option<&ErrorRecord> {
        self.errors.iter().find(|e| e.record.frame_id == frame_id)
    }
}

/// Misclassified frames of `manifest` (rows of `ds` in the same order),
/// most confident mistakes first, all with category `unassigned`.
pub fn collect_errors(params: &ModelParams, ds: &Dataset, manifest: &Manifest) -> Result<ErrorManifest> {
    if ds.len() != manifest.len() || ds.frame_ids.iter().zip(&manifest.records).any(|(a, r)| *a != r.frame_id) {
        return Err(Error::ShapeMismatch("dataset rows do not follow the manifest".into()));
    }
    let scores = score(params, ds)?;
    let mut errors: Vec<ErrorRecord> = manifest
        .records
        .iter()
        .zip(&scores)
        .filter_map(|(r, &s)| {
            let predicted = predicted_labels(s);
            (predicted != r.labels).then(|| ErrorRecord {
                record: r.clone(),
                scores: s,
                predicted,
                category: ErrorCategory::Unassigned,
                crop_path: PathBuf::from("crops").join(format!("{}.png", r.frame_id)),
            })
        })
        .collect();
    errors.sort_by(|a, b| b.confidence().total_cmp(&a.confidence()));
    Ok(ErrorManifest {
        split: manifest.split,
        config_hash: manifest.config_hash.clone(),
        errors,
    })
}

/// Side length of exported crop images.
pub const EXPORT_CROP_SIZE: u32 = 96;

/// Writes the error manifest to `out_path` and each error's wheel crop (read
/// from `data_root`) as a PNG under `crops/` beside it.
pub fn export_errors(
    params: &ModelParams,
    ds: &Dataset,
    manifest: &Manifest,
    data_root: &Path,
    out_path: &Path,
) -> Result<ErrorManifest> {
    let errs = collect_errors(params, ds, manifest)?;
    let dir = out_path.parent().unwrap_or(Path::new("."));
    for e in &errs.errors {
        let img = Image::read_ppm(&data_root.join(&e.record.image_path))?;
        let crop = crop_and_resize(&img, e.record.crop_rect, EXPORT_CROP_SIZE)?;
        let path = dir.join(&e.crop_path);
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent).map_err(|err| Error::io(parent, err))?;
        }
        std::fs::write(&path, crop.to_png()?).map_err(|err| Error::io(&path, err))?;
    }
    errs.write(out_path)?;
    Ok(errs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datasets::{materialize, tests::record};
    use crate::labeling::JointClass;
    use crate::nn::ModelConfig;
    use crate::scenegen::GenerationConfig;

    #[test]
    fn category_names_round_trip() {
        for c in ErrorCategory::ALL {
            assert_eq!(c.as_str().parse::<ErrorCategory>().unwrap(), *c);
        }
    }

    #[test]
    fn export_matches_recount_and_round_trips() {
        let mut cfg = GenerationConfig::desk_synthetic();
        cfg.num_sequences = 3;
        let data = tempfile::tempdir().unwrap();
        let m = materialize(&cfg, data.path(), 0..3).unwrap();
        let ds = Dataset::from_manifest(&m, data.path(), 32).unwrap();
        let params = ModelParams::init(ModelConfig::default(), 8).unwrap();
        let out = data.path().join("errors/errors.tsv");
        let errs = export_errors(&params, &ds, &m, data.path(), &out).unwrap();
        let scores = score(&params, &ds).unwrap();
        let wrong = scores
            .iter()
            .zip(&ds.labels)
            .filter(|(s, l)| predicted_labels(**s) != **l)
            .count();
        assert_eq!(errs.errors.len(), wrong);
        assert!(errs.errors.windows(2).all(|w| w[0].confidence() >= w[1].confidence()));
        assert_eq!(ErrorManifest::read(&out).unwrap(), errs);
        for e in &errs.errors {
            assert!(out.parent().unwrap().join(&e.crop_path).exists());
        }
    }

    #[test]
    fn constant_model_flags_every_minority_frame() {
        // A zero model says 0.5 for both hands, i.e. (on, on): every other class is wrong.
        let records: Vec<FrameRecord> = (0..8)
            .map(|i| record("s", i, "d", JointClass::ALL[i % 4].labels()))
            .collect();
        let m = Manifest::new(records, SplitTag::Test, "h").unwrap();
        let ds = Dataset {
            input_size: 32,
            inputs: vec![0.0; 8 * 3 * 32 * 32],
            labels: m.records.iter().map(|r| r.labels).collect(),
            frame_ids: m.records.iter().map(|r| r.frame_id.clone()).collect(),
        };
        let errs = collect_errors(&ModelParams::zeros(ModelConfig::default()), &ds, &m).unwrap();
        assert_eq!(errs.errors.len(), 6);
        assert!(errs.errors.iter().all(|e| e.labels().class() != JointClass::BothOn));
    }
}
