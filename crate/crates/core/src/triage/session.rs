use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::plan::{apply_plan, build_iteration_plan, IterationPlan, DEFAULT_BUDGET_FRAMES};
use super::store::{Assignment, CategoryStore};
use crate::error::{Error, Result};
use crate::labeling::LabelPair;
use crate::pipeline::{ErrorCategory, ErrorManifest, ErrorRecord};
use crate::scenegen::GenerationConfig;

/// Review state for one error manifest.
#[derive(Debug)]
pub struct TriageSession {
    pub errors: ErrorManifest,
    /// Directory of the error manifest; crop paths are relative to it.
    pub manifest_dir: PathBuf,
    pub store: CategoryStore,
    /// Config the next plan is applied to. Advances on every apply.
    pub base: GenerationConfig,
    /// Where applied configs are written.
    pub out_dir: PathBuf,
    pub budget_frames: usize,
}

/// JSON view of an error with its current review state.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ErrorView {
    pub frame_id: String,
    pub sequence_id: String,
    pub driver_id: String,
    pub labels: LabelPair,
    pub predicted: LabelPair,
    pub scores: [f64; 2],
    pub category: ErrorCategory,
    pub note: String,
    pub image_url: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ErrorPage {
    pub page: usize,
    pub per_page: usize,
    pub total: usize,
    pub errors: Vec<ErrorView>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AppliedPlan {
    pub path: PathBuf,
    pub hash: String,
    pub num_sequences: usize,
}

impl TriageSession {
    pub fn new(errors: ErrorManifest, manifest_dir: PathBuf, store: CategoryStore, base: GenerationConfig, out_dir: PathBuf) -> Self {
        Self {
            errors,
            manifest_dir,
            store,
            base,
            out_dir,
            budget_frames: DEFAULT_BUDGET_FRAMES,
        }
    }

    /// Loads the error manifest and base config, and opens (or creates) the
    /// category store.
    pub fn open(error_manifest: &Path, store_path: &Path, base_config: &Path, out_dir: &Path) -> Result<Self> {
        let errors = ErrorManifest::read(error_manifest)?;
        let dir = error_manifest.parent().unwrap_or(Path::new(".")).to_path_buf();
        Ok(Self::new(
            errors,
            dir,
            CategoryStore::open(store_path)?,
            GenerationConfig::read(base_config)?,
            out_dir.to_path_buf(),
        ))
    }

    /// Stored category if reviewed, otherwise the manifest's own.
    pub fn category_of(&self, e: &ErrorRecord) -> ErrorCategory {
        self.store.get(e.frame_id()).map_or(e.category, |a| a.category)
    }

    fn view(&self, e: &ErrorRecord) -> ErrorView {
        ErrorView {
            frame_id: e.record.frame_id.clone(),
            sequence_id: e.record.sequence_id.clone(),
            driver_id: e.record.driver_id.clone(),
            labels: e.record.labels,
            predicted: e.predicted,
            scores: e.scores,
            category: self.category_of(e),
            note: self.store.get(e.frame_id()).map(|a| a.note.clone()).unwrap_or_default(),
            image_url: format!("/frames/{}", e.record.frame_id),
        }
    }

    /// One page of errors in manifest order; pages count from 1.
    pub fn page(&self, page: usize, per_page: usize) -> ErrorPage {
        let page = page.max(1);
        let per_page = per_page.max(1);
        let errors = self
            .errors
            .errors
            .iter()
            .skip((page - 1).saturating_mul(per_page))
            .take(per_page)
            .map(|e| self.view(e))
            .collect();
        ErrorPage {
            page,
            per_page,
            total: self.errors.errors.len(),
            errors,
        }
    }

    pub fn error(&self, frame_id: &str) -> Result<&ErrorRecord> {
        self.errors.get(frame_id).ok_or_else(|| Error::UnknownFrame(frame_id.to_string()))
    }

    pub fn crop_path(&self, frame_id: &str) -> Result<PathBuf> {
        Ok(self.manifest_dir.join(&self.error(frame_id)?.crop_path))
    }

    pub fn categorize(&mut self, frame_id: &str, category: ErrorCategory, note: &str) -> Result<Assignment> {
        self.error(frame_id)?;
        self.store.assign(frame_id, category, note)
    }

    /// Errors per category, `unassigned` included.
    pub fn tallies(&self) -> BTreeMap<ErrorCategory, usize> {
        let mut out = BTreeMap::new();
        for e in &self.errors.errors {
            *out.entry(self.category_of(e)).or_insert(0) += 1;
        }
        out
    }

    pub fn plan(&self) -> Result<IterationPlan> {
        build_iteration_plan(&self.tallies(), &self.base, self.budget_frames)
    }

    /// Applies the current plan, writes the new config under `out_dir`, and
    /// makes it the base for the next plan.
    pub fn apply(&mut self) -> Result<AppliedPlan> {
        let plan = self.plan()?;
        let next = apply_plan(&plan, &self.base)?;
        let hash = next.hash();
        std::fs::create_dir_all(&self.out_dir).map_err(|e| Error::io(&self.out_dir, e))?;
        let path = self.out_dir.join(format!("generation_{hash}.cfg"));
        next.write(&path)?;
        let applied = AppliedPlan {
            path,
            hash,
            num_sequences: next.num_sequences,
        };
        self.base = next;
        Ok(applied)
    }
}
