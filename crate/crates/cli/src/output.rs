use std::io::Write;
use std::path::{Path, PathBuf};

use tempfile::NamedTempFile;

use crate::error::{CliError, CliResult};

/// Files produced by one command, written only after every one of them has
/// been computed.
#[derive(Debug, Default)]
pub struct Outputs {
    files: Vec<(String, Vec<u8>)>,
}

impl Outputs {
    pub fn add(&mut self, name: &str, bytes: impl Into<Vec<u8>>) {
        self.files.push((name.to_string(), bytes.into()));
    }

    /// Each file goes to a temporary sibling first and is renamed into place.
    pub fn commit(self, dir: &Path) -> CliResult<Vec<PathBuf>> {
        std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        let mut written = Vec::with_capacity(self.files.len());
        for (name, bytes) in self.files {
            let target = dir.join(&name);
            let mut tmp = NamedTempFile::new_in(dir).map_err(|e| CliError::io(dir, e))?;
            tmp.write_all(&bytes).map_err(|e| CliError::io(&target, e))?;
            tmp.persist(&target).map_err(|e| CliError::io(&target, e.error))?;
            written.push(target);
        }
        Ok(written)
    }
}
