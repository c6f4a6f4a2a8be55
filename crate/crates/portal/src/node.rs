//! On-disk layout of a node: `<data-dir>/system-id` and `<data-dir>/log.ndjson`.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use marginalia_core::model::generate_ref;
use marginalia_core::store::{Store, StoreConfig};

pub const LOG_FILE: &str = "log.ndjson";
pub const SYSTEM_ID_FILE: &str = "system-id";

pub fn log_path(data_dir: &Path) -> PathBuf {
    data_dir.join(LOG_FILE)
}

/// The node's system id. The first run records it; later runs must agree.
pub fn resolve_system_id(data_dir: &Path, requested: Option<&str>) -> anyhow::Result<String> {
    let id_file = data_dir.join(SYSTEM_ID_FILE);
    let recorded = match fs::read_to_string(&id_file) {
        Ok(s) => Some(s.trim().to_string()),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => None,
        Err(e) => return Err(e).with_context(|| format!("reading {}", id_file.display())),
    };
    match (recorded, requested) {
        (Some(have), Some(want)) if have != want => {
            bail!(
                "{} belongs to system {have:?}, not {want:?}",
                data_dir.display()
            )
        }
        (Some(have), _) => Ok(have),
        (None, requested) => {
            let id = match requested {
                Some(id) if id.trim().is_empty() => bail!("system id must not be empty"),
                Some(id) => id.to_string(),
                None => format!("node-{}", &generate_ref()[..8]),
            };
            fs::create_dir_all(data_dir)
                .with_context(|| format!("creating {}", data_dir.display()))?;
            fs::write(&id_file, format!("{id}\n"))
                .with_context(|| format!("writing {}", id_file.display()))?;
            Ok(id)
        }
    }
}

/// Opens the node's store, creating the directory on first use.
pub fn open_store(
    data_dir: &Path,
    system_id: Option<&str>,
    config: StoreConfig,
) -> anyhow::Result<Store> {
    let id = resolve_system_id(data_dir, system_id)?;
    let store = Store::open(&log_path(data_dir), &id)?.with_config(config);
    Ok(store)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn system_id_is_recorded_once() {
        let dir = tempfile::tempdir().unwrap();
        let generated = resolve_system_id(dir.path(), None).unwrap();
        assert!(generated.starts_with("node-") && generated.len() == 13);
        assert_eq!(resolve_system_id(dir.path(), None).unwrap(), generated);
        assert_eq!(
            resolve_system_id(dir.path(), Some(&generated)).unwrap(),
            generated
        );
        assert!(resolve_system_id(dir.path(), Some("other")).is_err());
    }
}
