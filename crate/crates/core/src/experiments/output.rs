//! Atomic output directories: files are written to a hidden sibling and
//! renamed into place, so a run either leaves a complete directory or none.

use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

/// Named file contents making up one experiment's output.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct OutputBundle {
    pub files: Vec<(String, Vec<u8>)>,
}

impl OutputBundle {
    pub fn push(&mut self, name: impl Into<String>, contents: impl Into<Vec<u8>>) {
        self.files.push((name.into(), contents.into()));
    }

    pub fn get(&self, name: &str) -> Option<&[u8]> {
        self.files.iter().find(|(n, _)| n == name).map(|(_, c)| c.as_slice())
    }

    pub fn names(&self) -> Vec<&str> {
        self.files.iter().map(|(n, _)| n.as_str()).collect()
    }

    pub fn write_to(&self, dir: &Path, overwrite: bool) -> Result<()> {
        check_output_dir(dir, overwrite)?;
        let staging = staging_path(dir)?;
        if staging.exists() {
            fs::remove_dir_all(&staging)?;
        }
        fs::create_dir_all(&staging)?;
        let written = self.files.iter().try_for_each(|(name, contents)| fs::write(staging.join(name), contents));
        if let Err(e) = written {
            let _ = fs::remove_dir_all(&staging);
            return Err(e.into());
        }
        if dir.exists() {
            fs::remove_dir_all(dir)?;
        }
        fs::rename(&staging, dir)?;
        Ok(())
    }
}

/// Fails if `dir` exists and `overwrite` is not set; cheap enough to call
/// before a long run.
pub fn check_output_dir(dir: &Path, overwrite: bool) -> Result<()> {
    if dir.exists() && !overwrite {
        return Err(Error::input(format!(
            "output directory {} already exists (use --overwrite to replace it)",
            dir.display()
        )));
    }
    if dir.exists() && !dir.is_dir() {
        return Err(Error::input(format!("{} exists and is not a directory", dir.display())));
    }
    Ok(())
}

fn staging_path(dir: &Path) -> Result<PathBuf> {
    let name = dir
        .file_name()
        .ok_or_else(|| Error::input(format!("invalid output directory {}", dir.display())))?;
    let parent = match dir.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    };
    fs::create_dir_all(&parent)?;
    Ok(parent.join(format!(".{}.partial-{}", name.to_string_lossy(), std::process::id())))
}

pub(crate) fn csv_bytes(write: impl FnOnce(&mut csv::Writer<Vec<u8>>) -> Result<()>) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    write(&mut w)?;
    w.into_inner().map_err(|e| Error::Io(e.into_error()))
}
