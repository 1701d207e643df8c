//! Output directory layout:
//!
//! ```text
//! <out>/<suite>/report.json
//! <out>/<suite>/config.json
//! <out>/<suite>/<op id>.<table>.csv
//! <out>/<suite>/<file name>            (curves, OBJ surfaces)
//! <out>/<suite>/objects/<object id>.json
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use crate::ops::StoredObject;
use crate::CliError;

/// Output root: `--out` (or `SOBOLEVLAB_OUT`, which clap folds into the
/// flag), then the config's `output_dir`, then `sobolevlab-out`.
pub fn resolve_out(flag: Option<&Path>, config: Option<&Path>) -> PathBuf {
    flag.or(config).map(Path::to_path_buf).unwrap_or_else(|| PathBuf::from("sobolevlab-out"))
}

pub fn write(path: &Path, contents: &[u8]) -> Result<(), CliError> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    fs::write(path, contents).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

pub fn save_object(suite_dir: &Path, obj: &StoredObject) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(obj).expect("object serializes");
    write(&suite_dir.join("objects").join(format!("{}.json", obj.id)), text.as_bytes())
}

/// Find an object by `suite/id` or by a bare id that is unique across suites.
pub fn find_object(out: &Path, id: &str) -> Result<StoredObject, CliError> {
    let load = |p: &Path| -> Result<StoredObject, CliError> {
        let text = fs::read_to_string(p)?;
        serde_json::from_str(&text).map_err(|e| CliError::Io(format!("{}: {e}", p.display())))
    };
    if let Some((suite, rest)) = id.split_once('/') {
        let p = out.join(suite).join("objects").join(format!("{rest}.json"));
        return if p.is_file() {
            load(&p)
        } else {
            Err(CliError::NotFound(format!("no object {id:?} under {}", out.display())))
        };
    }
    let mut hits = vec![];
    if let Ok(entries) = fs::read_dir(out) {
        for e in entries.flatten() {
            let p = e.path().join("objects").join(format!("{id}.json"));
            if p.is_file() {
                hits.push(p);
            }
        }
    }
    hits.sort();
    match hits.len() {
        0 => Err(CliError::NotFound(format!("no object {id:?} under {}", out.display()))),
        1 => load(&hits[0]),
        _ => Err(CliError::Usage(format!(
            "object id {id:?} exists in several suites; use suite/id ({})",
            hits.iter()
                .filter_map(|p| p.parent()?.parent()?.file_name()?.to_str().map(String::from))
                .collect::<Vec<_>>()
                .join(", ")
        ))),
    }
}
