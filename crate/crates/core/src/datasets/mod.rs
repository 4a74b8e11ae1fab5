//! Frame manifests and the dataset operations built on them: identity
//! splits, undersampling, small target-domain subsets and materialization.

mod balance;
mod generate;
mod split;

pub use balance::{balance_undersample, BALANCE_TOLERANCE, SYNTHETIC_LABEL_MIX};
pub use generate::{crop_input, generate_frames, generate_sequences, load_inputs, materialize, GeneratedFrame};
pub use split::{sample_small_real_subset, split_by_identity, SplitSpec};

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::labeling::{LabelHistogram, LabelPair};
use crate::render::{CropRect, DomainKind};
use crate::scenegen::{named_enum, Behavior, Lighting};

named_enum!(
    SplitTag {
        Train => "train",
        Val => "val",
        Test => "test",
        Unsplit => "unsplit",
    }
);

/// One labeled frame on disk.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameRecord {
    pub frame_id: String,
    /// Relative to the dataset root.
    pub image_path: PathBuf,
    pub crop_rect: CropRect,
    pub sequence_id: String,
    pub frame_index: usize,
    pub driver_id: String,
    pub domain: DomainKind,
    pub labels: LabelPair,
    /// Per-hand wheel distances the labels were derived from, meters.
    pub distances: [f64; 2],
    pub behavior: Behavior,
    pub lighting: Lighting,
    pub occluded: bool,
}

impl FrameRecord {
    pub fn frame_id_for(sequence_id: &str, frame_index: usize) -> String {
        format!("{sequence_id}_{frame_index:05}")
    }

    pub fn image_path_for(sequence_id: &str, frame_index: usize) -> PathBuf {
        PathBuf::from(sequence_id).join(format!("{frame_index:05}.ppm"))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Manifest {
    pub records: Vec<FrameRecord>,
    pub split: SplitTag,
    pub config_hash: String,
}

pub const MANIFEST_COLUMNS: [&str; 17] = [
    "frame_id",
    "image_path",
    "crop_x",
    "crop_y",
    "crop_w",
    "crop_h",
    "sequence_id",
    "frame_index",
    "driver_id",
    "domain",
    "left_on_wheel",
    "right_on_wheel",
    "left_distance",
    "right_distance",
    "behavior",
    "lighting",
    "occluded",
];

fn columns() -> &'static [&'static str] {
    &MANIFEST_COLUMNS
}

impl Manifest {
    pub fn new(records: Vec<FrameRecord>, split: SplitTag, config_hash: impl Into<String>) -> Result<Self> {
        let m = Self {
            records,
            split,
            config_hash: config_hash.into(),
        };
        m.check_unique()?;
        Ok(m)
    }

    fn check_unique(&self) -> Result<()> {
        let mut seen = HashSet::new();
        for r in &self.records {
            if !seen.insert(r.frame_id.as_str()) {
                return Err(Error::InvalidConfig(format!("duplicate frame_id `{}`", r.frame_id)));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn drivers(&self) -> BTreeSet<String> {
        self.records.iter().map(|r| r.driver_id.clone()).collect()
    }

    /// Frame counts per driver, in driver-id order.
    pub fn driver_counts(&self) -> BTreeMap<String, usize> {
        let mut out = BTreeMap::new();
        for r in &self.records {
            *out.entry(r.driver_id.clone()).or_insert(0) += 1;
        }
        out
    }

    pub fn histogram(&self) -> LabelHistogram {
        LabelHistogram::from_labels(self.records.iter().map(|r| r.labels))
    }

    /// Records whose driver is in `drivers`, order preserved.
    pub fn with_drivers(&self, drivers: &BTreeSet<String>, split: SplitTag) -> Manifest {
        Manifest {
            records: self
                .records
                .iter()
                .filter(|r| drivers.contains(&r.driver_id))
                .cloned()
                .collect(),
            split,
            config_hash: self.config_hash.clone(),
        }
    }

    /// Concatenation; hashes are joined with `+` when they differ.
    pub fn concat(&self, other: &Manifest) -> Result<Manifest> {
        let config_hash = if self.config_hash == other.config_hash {
            self.config_hash.clone()
        } else {
            format!("{}+{}", self.config_hash, other.config_hash)
        };
        let mut records = self.records.clone();
        records.extend(other.records.iter().cloned());
        Manifest::new(records, self.split, config_hash)
    }

    /// Labels recomputed from the stored per-hand distances with a
    /// different on-wheel threshold.
    pub fn relabeled(&self, threshold: f64) -> Result<Manifest> {
        if !(threshold > 0.0 && threshold.is_finite()) {
            return Err(Error::InvalidConfig(format!("threshold {threshold} must be positive")));
        }
        let mut out = self.clone();
        for r in &mut out.records {
            r.labels = LabelPair::new(r.distances[0] < threshold, r.distances[1] < threshold);
        }
        Ok(out)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        write_table(path, self, &[], |_| Vec::new())
    }

    pub fn read(path: &Path) -> Result<Self> {
        Ok(read_table(path, &[], |_, _| Ok(()))?.0)
    }
}

pub fn write_manifest(m: &Manifest, path: &Path) -> Result<()> {
    m.write(path)
}

pub fn read_manifest(path: &Path) -> Result<Manifest> {
    Manifest::read(path)
}

fn record_fields(r: &FrameRecord) -> Vec<String> {
    let c = r.crop_rect;
    vec![
        r.frame_id.clone(),
        r.image_path.to_string_lossy().into_owned(),
        c.x.to_string(),
        c.y.to_string(),
        c.w.to_string(),
        c.h.to_string(),
        r.sequence_id.clone(),
        r.frame_index.to_string(),
        r.driver_id.clone(),
        r.domain.to_string(),
        (r.labels.left_on_wheel as u8).to_string(),
        (r.labels.right_on_wheel as u8).to_string(),
        r.distances[0].to_string(),
        r.distances[1].to_string(),
        r.behavior.to_string(),
        r.lighting.to_string(),
        (r.occluded as u8).to_string(),
    ]
}

fn check_field(value: &str) -> std::io::Result<()> {
    if value.contains(['\t', '\n', '\r']) {
        return Err(std::io::Error::new(
            std::io::ErrorKind::InvalidInput,
            format!("field {value:?} contains a tab or newline"),
        ));
    }
    Ok(())
}

/// Writes the manifest table plus `extra` columns produced per record.
pub(crate) fn write_table<F>(path: &Path, m: &Manifest, extra: &[&str], mut extra_fields: F) -> Result<()>
where
    F: FnMut(usize) -> Vec<String>,
{
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let mut out = Vec::new();
    let io = |e| Error::io(path, e);
    writeln!(out, "# split={} config_hash={}", m.split, m.config_hash).map_err(io)?;
    let header: Vec<&str> = columns().iter().chain(extra).copied().collect();
    writeln!(out, "{}", header.join("\t")).map_err(io)?;
    for (i, r) in m.records.iter().enumerate() {
        let mut fields = record_fields(r);
        fields.extend(extra_fields(i));
        for f in &fields {
            check_field(f).map_err(io)?;
        }
        writeln!(out, "{}", fields.join("\t")).map_err(io)?;
    }
    std::fs::write(path, out).map_err(io)
}

fn parse_bool(s: &str) -> std::result::Result<bool, String> {
    match s {
        "1" => Ok(true),
        "0" => Ok(false),
        other => Err(format!("expected 0 or 1, got `{other}`")),
    }
}

fn parse_num<T: FromStr>(s: &str, what: &str) -> std::result::Result<T, String>
where
    T::Err: fmt::Display,
{
    s.parse().map_err(|e| format!("{what}: {e}"))
}

fn parse_record(f: &[&str]) -> std::result::Result<FrameRecord, String> {
    Ok(FrameRecord {
        frame_id: f[0].to_string(),
        image_path: PathBuf::from(f[1]),
        crop_rect: CropRect {
            x: parse_num(f[2], "crop_x")?,
            y: parse_num(f[3], "crop_y")?,
            w: parse_num(f[4], "crop_w")?,
            h: parse_num(f[5], "crop_h")?,
        },
        sequence_id: f[6].to_string(),
        frame_index: parse_num(f[7], "frame_index")?,
        driver_id: f[8].to_string(),
        domain: f[9].parse()?,
        labels: LabelPair::new(parse_bool(f[10])?, parse_bool(f[11])?),
        distances: [parse_num(f[12], "left_distance")?, parse_num(f[13], "right_distance")?],
        behavior: f[14].parse()?,
        lighting: f[15].parse()?,
        occluded: parse_bool(f[16])?,
    })
}

/// Reads a manifest table; `extra` names trailing columns handed to `on_extra`.
pub(crate) fn read_table<F>(path: &Path, extra: &[&str], mut on_extra: F) -> Result<(Manifest, usize)>
where
    F: FnMut(&[&str], usize) -> std::result::Result<(), String>,
{
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = text.lines().enumerate();
    let (_, meta) = lines.next().ok_or_else(|| Error::parse(path, 1, "missing metadata line"))?;
    let meta = meta
        .strip_prefix("# ")
        .ok_or_else(|| Error::parse(path, 1, "metadata line must start with `# `"))?;
    let mut split = None;
    let mut config_hash = None;
    for kv in meta.split_whitespace() {
        match kv.split_once('=') {
            Some(("split", v)) => split = Some(v.parse::<SplitTag>().map_err(|e| Error::parse(path, 1, e))?),
            Some(("config_hash", v)) => config_hash = Some(v.to_string()),
            _ => return Err(Error::parse(path, 1, format!("unexpected metadata `{kv}`"))),
        }
    }
    let split = split.ok_or_else(|| Error::parse(path, 1, "missing split"))?;
    let config_hash = config_hash.ok_or_else(|| Error::parse(path, 1, "missing config_hash"))?;
    let expected: Vec<&str> = columns().iter().chain(extra).copied().collect();
    let (_, header) = lines.next().ok_or_else(|| Error::parse(path, 2, "missing header line"))?;
    if header.split('\t').collect::<Vec<_>>() != expected {
        return Err(Error::parse(path, 2, "header does not match the expected columns"));
    }
    let mut records = Vec::new();
    for (n, line) in lines {
        let line_no = n + 1;
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != expected.len() {
            return Err(Error::parse(
                path,
                line_no,
                format!("expected {} fields, found {}", expected.len(), fields.len()),
            ));
        }
        let rec = parse_record(&fields).map_err(|m| Error::parse(path, line_no, m))?;
        on_extra(&fields[columns().len()..], records.len()).map_err(|m| Error::parse(path, line_no, m))?;
        records.push(rec);
    }
    let count = records.len();
    let m = Manifest {
        records,
        split,
        config_hash,
    };
    m.check_unique().map_err(|e| Error::parse(path, 0, e.to_string()))?;
    Ok((m, count))
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;

    pub(crate) fn record(seq: &str, frame: usize, driver: &str, labels: LabelPair) -> FrameRecord {
        FrameRecord {
            frame_id: FrameRecord::frame_id_for(seq, frame),
            image_path: FrameRecord::image_path_for(seq, frame),
            crop_rect: CropRect { x: 3, y: 4, w: 40, h: 40 },
            sequence_id: seq.to_string(),
            frame_index: frame,
            driver_id: driver.to_string(),
            domain: DomainKind::Synthetic,
            labels,
            distances: [if labels.left_on_wheel { 0.001 } else { 0.2 }, 0.1 / 3.0],
            behavior: Behavior::TwoHanded,
            lighting: Lighting::Night,
            occluded: frame.is_multiple_of(3),
        }
    }

    #[test]
    fn manifest_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.tsv");
        let records = (0..7)
            .map(|i| record("syn0001", i, "drv02", LabelPair::new(i % 2 == 0, i % 3 == 0)))
            .collect();
        let m = Manifest::new(records, SplitTag::Val, "0123abcd").unwrap();
        m.write(&path).unwrap();
        assert_eq!(Manifest::read(&path).unwrap(), m);

        let empty = Manifest::new(Vec::new(), SplitTag::Unsplit, "x").unwrap();
        empty.write(&path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().count(), 2);
        assert!(Manifest::read(&path).unwrap().is_empty());
    }

    #[test]
    fn corrupted_line_names_the_line() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.tsv");
        let records = (0..5).map(|i| record("s", i, "d", LabelPair::new(true, true))).collect();
        Manifest::new(records, SplitTag::Train, "h").unwrap().write(&path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let mut lines: Vec<String> = text.lines().map(String::from).collect();
        lines[4] = lines[4].replace("\t1\t", "\tmaybe\t");
        std::fs::write(&path, lines.join("\n")).unwrap();
        match Manifest::read(&path) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 5),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn duplicate_ids_rejected() {
        let r = record("s", 0, "d", LabelPair::default());
        assert!(Manifest::new(vec![r.clone(), r], SplitTag::Train, "h").is_err());
    }

    #[test]
    fn relabel_follows_stored_distances() {
        let records = (0..6).map(|i| record("s", i, "d", LabelPair::new(i % 2 == 0, true))).collect();
        let m = Manifest::new(records, SplitTag::Train, "h").unwrap();
        assert_eq!(m.relabeled(0.03).unwrap().histogram(), LabelHistogram::from_labels(m.records.iter().map(|r| LabelPair::new(r.labels.left_on_wheel, false))));
        let wide = m.relabeled(0.25).unwrap();
        assert!(wide.records.iter().all(|r| r.labels == LabelPair::new(true, true)));
        assert!(m.relabeled(0.0).is_err());
    }
}
