use std::collections::{BTreeMap, HashMap};
use std::fs::{File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pipeline::ErrorCategory;

/// One reviewer decision as stored in the append log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Assignment {
    pub frame_id: String,
    pub category: ErrorCategory,
    #[serde(default)]
    pub note: String,
    /// Milliseconds since the Unix epoch.
    pub timestamp_ms: u64,
}

/// Category assignments persisted as a line-delimited JSON append log.
/// Replaying the log with last-write-wins gives the current state. Each
/// append is flushed and synced before `assign` returns.
#[derive(Debug)]
pub struct CategoryStore {
    path: PathBuf,
    file: File,
    current: HashMap<String, Assignment>,
}

impl CategoryStore {
    /// Opens or creates the log. A final line without a newline is the
    /// remains of an interrupted write and is dropped.
    pub fn open(path: &Path) -> Result<Self> {
        if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
            std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
        let text = match std::fs::read_to_string(path) {
            Ok(t) => t,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => String::new(),
            Err(e) => return Err(Error::io(path, e)),
        };
        let complete = match text.rfind('\n') {
            Some(i) => &text[..=i],
            None => "",
        };
        let mut current = HashMap::new();
        for (i, line) in complete.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let a: Assignment = serde_json::from_str(line).map_err(|e| Error::Parse {
                path: path.to_path_buf(),
                line: i + 1,
                message: e.to_string(),
            })?;
            current.insert(a.frame_id.clone(), a);
        }
        if complete.len() != text.len() {
            // Cut the torn tail so later appends start on a fresh line.
            let f = OpenOptions::new().write(true).open(path).map_err(|e| Error::io(path, e))?;
            f.set_len(complete.len() as u64).map_err(|e| Error::io(path, e))?;
        }
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)
            .map_err(|e| Error::io(path, e))?;
        Ok(Self {
            path: path.to_path_buf(),
            file,
            current,
        })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    /// Appends and syncs one assignment, then updates the in-memory view.
    pub fn assign(&mut self, frame_id: &str, category: ErrorCategory, note: &str) -> Result<Assignment> {
        let a = Assignment {
            frame_id: frame_id.to_string(),
            category,
            note: note.to_string(),
            timestamp_ms: SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_millis() as u64)
                .unwrap_or(0),
        };
        let mut line = serde_json::to_string(&a).expect("assignment serializes");
        line.push('\n');
        let io = |e| Error::io(&self.path, e);
        self.file.write_all(line.as_bytes()).map_err(io)?;
        self.file.sync_data().map_err(io)?;
        self.current.insert(a.frame_id.clone(), a.clone());
        Ok(a)
    }

    pub fn get(&self, frame_id: &str) -> Option<&Assignment> {
        self.current.get(frame_id)
    }

    pub fn category(&self, frame_id: &str) -> ErrorCategory {
        self.get(frame_id).map_or(ErrorCategory::Unassigned, |a| a.category)
    }

    pub fn len(&self) -> usize {
        self.current.len()
    }

    pub fn is_empty(&self) -> bool {
        self.current.is_empty()
    }

    /// Assignments per category over `frame_ids`; frames never assigned
    /// count as `unassigned`.
    pub fn tally<'a>(&self, frame_ids: impl IntoIterator<Item = &'a str>) -> BTreeMap<ErrorCategory, usize> {
        let mut out = BTreeMap::new();
        for id in frame_ids {
            *out.entry(self.category(id)).or_insert(0) += 1;
        }
        out
    }
}
