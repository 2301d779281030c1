//! Experiment directories: a `manifest.json` plus batch files.

use std::path::{Path, PathBuf};

use post_core::formats::{read_batch_file, Manifest};
use post_core::Batch;

use crate::error::{CliError, CliResult};

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug)]
pub struct ExperimentInput {
    pub label: String,
    pub manifest: Manifest,
    pub files: Vec<PathBuf>,
    pub batches: Vec<Batch>,
}

impl ExperimentInput {
    /// Reads and validates every batch up front so schema errors surface
    /// before any output is written.
    pub fn load(dir: &Path) -> CliResult<Self> {
        if !dir.is_dir() {
            return Err(CliError::usage(format!("{} is not a directory", dir.display())));
        }
        let manifest_path = dir.join(MANIFEST_FILE);
        if !manifest_path.is_file() {
            return Err(CliError::usage(format!("{} has no {MANIFEST_FILE}", dir.display())));
        }
        let manifest = Manifest::read(&manifest_path)?;
        let files: Vec<PathBuf> = match &manifest.batches {
            Some(names) => names.iter().map(|n| dir.join(n)).collect(),
            None => {
                let mut f: Vec<PathBuf> = std::fs::read_dir(dir)?
                    .filter_map(|e| e.ok().map(|e| e.path()))
                    .filter(|p| p.is_file() && p.extension().is_some_and(|x| x == "csv"))
                    .collect();
                f.sort_by(|a, b| a.file_name().cmp(&b.file_name()));
                f
            }
        };
        if files.is_empty() {
            return Err(CliError::usage(format!("{} contains no batch files", dir.display())));
        }
        let batches = files
            .iter()
            .enumerate()
            .map(|(k, f)| read_batch_file(f, &manifest, k as u64))
            .collect::<post_core::Result<Vec<_>>>()?;
        let label = dir
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_else(|| dir.display().to_string());
        Ok(Self { label, manifest, files, batches })
    }

    /// Per-arm size after all batches: the smaller of the two arms.
    pub fn total_per_arm(&self) -> usize {
        let treated = self.batches.iter().flat_map(|b| &b.observations).filter(|o| o.treated).count();
        let total: usize = self.batches.iter().map(|b| b.observations.len()).sum();
        treated.min(total - treated)
    }

    pub fn horizon(&self, flag: Option<usize>) -> usize {
        flag.or(self.manifest.horizon).unwrap_or_else(|| self.total_per_arm())
    }

    pub fn file_name(&self, k: usize) -> String {
        self.files[k].file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default()
    }
}
