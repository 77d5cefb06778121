use std::path::{Path, PathBuf};

use super::model::SkillLibrary;
use super::validate::validate_library;
use crate::canonical::{to_canonical, write_canonical};
use crate::error::{Error, Result};

pub fn snapshot_path(dir: &Path, round: u32) -> PathBuf {
    dir.join(format!("library-round-{round}.json"))
}

/// Writes the canonical form; refuses libraries that do not validate.
pub fn save_library(library: &SkillLibrary, path: &Path) -> Result<()> {
    let report = validate_library(library);
    if !report.is_ok() {
        return Err(Error::Validation(report.messages()));
    }
    write_canonical(library, path)
}

pub fn library_to_string(library: &SkillLibrary) -> String {
    to_canonical(library)
}

pub fn library_from_str(text: &str, origin: &Path) -> Result<SkillLibrary> {
    let lib: SkillLibrary = serde_json::from_str(text).map_err(|e| Error::json(origin, &e))?;
    let report = validate_library(&lib);
    if !report.is_ok() {
        return Err(Error::Validation(report.messages()));
    }
    Ok(lib)
}

pub fn load_library(path: &Path) -> Result<SkillLibrary> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    library_from_str(&text, path)
}

/// Saves `library-round-<n>` under `dir`; rounds must not go backwards.
pub fn save_snapshot(library: &SkillLibrary, dir: &Path) -> Result<PathBuf> {
    if let Some(latest) = latest_round(dir)? {
        if library.round < latest {
            return Err(Error::Precondition(format!(
                "snapshot round {} precedes existing round {latest}",
                library.round
            )));
        }
    }
    let path = snapshot_path(dir, library.round);
    save_library(library, &path)?;
    Ok(path)
}

pub fn latest_round(dir: &Path) -> Result<Option<u32>> {
    if !dir.exists() {
        return Ok(None);
    }
    let entries = std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    Ok(entries
        .filter_map(|e| e.ok())
        .filter_map(|e| {
            let name = e.file_name().to_string_lossy().into_owned();
            name.strip_prefix("library-round-")?.strip_suffix(".json")?.parse::<u32>().ok()
        })
        .max())
}
