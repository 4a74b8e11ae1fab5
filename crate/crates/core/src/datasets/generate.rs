use std::ops::Range;
use std::path::Path;

use rayon::prelude::*;

use super::{FrameRecord, Manifest, SplitTag};
use crate::error::{Error, Result};
use crate::labeling::{frame_labels, hand_distances, occlusion_flag, LabelerConfig};
use crate::render::{compute_wheel_crop, crop_and_resize, render_sequence, CropRect, Image, DEFAULT_CROP_MARGIN};
use crate::scenegen::{animate_sequence, sample_scenario, GenerationConfig};

/// A labeled frame with its rendered image, before anything touches disk.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratedFrame {
    pub record: FrameRecord,
    pub image: Image,
}

fn generate_one(cfg: &GenerationConfig, index: usize, labeler: &LabelerConfig) -> Result<Vec<GeneratedFrame>> {
    let sc = sample_scenario(cfg, index)?;
    let poses = animate_sequence(&sc, cfg);
    let images = render_sequence(&sc, &poses, &cfg.profile);
    let crop_rect = compute_wheel_crop(&sc.camera, &sc.wheel, DEFAULT_CROP_MARGIN)?;
    poses
        .iter()
        .zip(images)
        .map(|(pose, image)| {
            let record = FrameRecord {
                frame_id: FrameRecord::frame_id_for(&sc.sequence_id, pose.frame_index),
                image_path: FrameRecord::image_path_for(&sc.sequence_id, pose.frame_index),
                crop_rect,
                sequence_id: sc.sequence_id.clone(),
                frame_index: pose.frame_index,
                driver_id: sc.driver.driver_id.clone(),
                domain: cfg.profile.kind,
                labels: frame_labels(pose, &sc.wheel, labeler)?,
                distances: hand_distances(pose, &sc.wheel, labeler.skin_radius)?,
                behavior: sc.behavior,
                lighting: sc.lighting,
                occluded: occlusion_flag(pose, &sc.camera)?,
            };
            Ok(GeneratedFrame { record, image })
        })
        .collect()
}

/// Frames for the sequence indices in `range`, in index order. Sequences are
/// generated in parallel; output does not depend on the thread count.
pub fn generate_sequences(cfg: &GenerationConfig, range: Range<usize>) -> Result<Vec<GeneratedFrame>> {
    cfg.validate()?;
    let labeler = LabelerConfig::default();
    let per_seq: Vec<Vec<GeneratedFrame>> = range
        .into_par_iter()
        .map(|i| generate_one(cfg, i, &labeler))
        .collect::<Result<_>>()?;
    Ok(per_seq.into_iter().flatten().collect())
}

pub fn generate_frames(cfg: &GenerationConfig) -> Result<Vec<GeneratedFrame>> {
    generate_sequences(cfg, 0..cfg.num_sequences)
}

/// Renders sequences `range` into `root/{sequence_id}/{frame:05}.ppm` and
/// returns their manifest (not written; callers choose the path).
pub fn materialize(cfg: &GenerationConfig, root: &Path, range: Range<usize>) -> Result<Manifest> {
    cfg.validate()?;
    let labeler = LabelerConfig::default();
    let per_seq: Vec<Vec<FrameRecord>> = range
        .into_par_iter()
        .map(|i| {
            let frames = generate_one(cfg, i, &labeler)?;
            frames
                .into_iter()
                .map(|f| {
                    f.image.write_ppm(&root.join(&f.record.image_path))?;
                    Ok(f.record)
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;
    Manifest::new(per_seq.into_iter().flatten().collect(), SplitTag::Unsplit, cfg.hash())
}

/// Wheel crop as a `3 × size × size` planar tensor scaled to `[-0.5, 0.5]`.
pub fn crop_input(img: &Image, rect: CropRect, size: u32) -> Result<Vec<f64>> {
    let crop = crop_and_resize(img, rect, size)?;
    let plane = (size * size) as usize;
    let mut out = vec![0.0; 3 * plane];
    for (i, px) in crop.pixels.chunks_exact(3).enumerate() {
        for c in 0..3 {
            out[c * plane + i] = px[c] as f64 / 255.0 - 0.5;
        }
    }
    Ok(out)
}

/// Reads every record's image under `root` and stacks the wheel crops.
pub fn load_inputs(m: &Manifest, root: &Path, size: u32) -> Result<Vec<f64>> {
    let per: Vec<Vec<f64>> = m
        .records
        .par_iter()
        .map(|r| {
            let img = Image::read_ppm(&root.join(&r.image_path))?;
            crop_input(&img, r.crop_rect, size)
        })
        .collect::<Result<_>>()?;
    if per.is_empty() {
        return Err(Error::EmptyManifest);
    }
    Ok(per.concat())
}
