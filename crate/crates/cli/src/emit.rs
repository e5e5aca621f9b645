//! Writing a run record to disk.
//!
//! Files are first written into a staging directory inside the output
//! directory and then renamed into place. If anything fails, files already
//! moved are removed again, so a failed emission leaves nothing behind.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::error::CliError;
use crate::run::RunRecord;

pub const METADATA: &str = "metadata.toml";

/// Writes all data files and the metadata snapshot into `dir`.
/// Returns the paths written, in order.
pub fn emit(record: &RunRecord, dir: &Path) -> Result<Vec<PathBuf>, CliError> {
    fs::create_dir_all(dir)?;
    let staging = tempfile::Builder::new()
        .prefix(".hybrid-swap-")
        .tempdir_in(dir)?;
    let metadata = record.metadata(METADATA);
    let mut staged = Vec::new();
    for (name, contents) in record
        .files
        .iter()
        .map(|f| (f.name.as_str(), f.contents.as_str()))
        .chain([(METADATA, metadata.as_str())])
    {
        let path = staging.path().join(name);
        let mut f = fs::File::create(&path)?;
        f.write_all(contents.as_bytes())?;
        f.sync_all()?;
        staged.push((path, dir.join(name)));
    }
    let mut moved: Vec<PathBuf> = Vec::new();
    for (from, to) in &staged {
        if let Err(e) = fs::rename(from, to) {
            for m in &moved {
                let _ = fs::remove_file(m);
            }
            return Err(e.into());
        }
        moved.push(to.clone());
    }
    Ok(moved)
}
