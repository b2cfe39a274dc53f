use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use shmm_core::format::model_from_json;
use shmm_core::model::{PartitionedModel, SymbolAlphabet};
use shmm_core::rle::{parse_sequence_text, RunLengthSequence};

use crate::error::CliError;

pub fn read_text(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::io(path, e))
}

pub fn read_model(path: &Path) -> Result<PartitionedModel, CliError> {
    model_from_json(&read_text(path)?).map_err(|e| CliError::invalid(path.display(), e))
}

pub fn read_sequence(path: &Path, alphabet: &SymbolAlphabet) -> Result<RunLengthSequence, CliError> {
    parse_sequence_text(&read_text(path)?, alphabet).map_err(|e| CliError::invalid(path.display(), e))
}

/// `<path>.<suffix>`, e.g. `fit.json` → `fit.json.report.json`.
pub fn sidecar(path: &Path, suffix: &str) -> PathBuf {
    let mut name = path.as_os_str().to_owned();
    name.push(".");
    name.push(suffix);
    PathBuf::from(name)
}

/// Writes every file through a temporary in the destination directory and
/// renames it into place. Nothing is written unless all temporaries succeed.
pub fn write_all_atomic(files: &[(PathBuf, String)]) -> Result<(), CliError> {
    let mut staged = Vec::with_capacity(files.len());
    for (path, contents) in files {
        let dir = match path.parent() {
            Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
            _ => PathBuf::from("."),
        };
        fs::create_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;
        let mut tmp = tempfile::NamedTempFile::new_in(&dir).map_err(|e| CliError::io(&dir, e))?;
        tmp.write_all(contents.as_bytes()).map_err(|e| CliError::io(path, e))?;
        tmp.as_file().sync_all().map_err(|e| CliError::io(path, e))?;
        staged.push((tmp, path));
    }
    for (tmp, path) in staged {
        tmp.persist(path).map_err(|e| CliError::io(path, e.error))?;
    }
    Ok(())
}
