//! Append-only record store: one JSON file per `(condition, rep)` key,
//! committed by write-then-rename.

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::metrics::ReplicationRecord;

#[derive(Debug, Clone)]
pub struct RecordStore {
    dir: PathBuf,
}

fn parse_key(name: &str) -> Option<(usize, usize)> {
    let rest = name.strip_prefix('c')?.strip_suffix(".json")?;
    let (c, r) = rest.split_once("_r")?;
    Some((c.parse().ok()?, r.parse().ok()?))
}

impl RecordStore {
    /// Opens `dir`, creating it if needed.
    pub fn open(dir: impl Into<PathBuf>) -> Result<Self> {
        let dir = dir.into();
        fs::create_dir_all(&dir)?;
        Ok(Self { dir })
    }

    /// Opens an existing store without creating it.
    pub fn existing(dir: impl Into<PathBuf>) -> Result<Self> {
        let dir = dir.into();
        if !dir.is_dir() {
            return Err(Error::Store(format!("{} is not a directory", dir.display())));
        }
        Ok(Self { dir })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn path(&self, condition: usize, rep: usize) -> PathBuf {
        self.dir.join(format!("c{condition:03}_r{rep:04}.json"))
    }

    pub fn contains(&self, condition: usize, rep: usize) -> bool {
        self.path(condition, rep).is_file()
    }

    /// Commits a record. An existing record under the same key is kept.
    pub fn put(&self, record: &ReplicationRecord) -> Result<bool> {
        let target = self.path(record.condition, record.rep);
        if target.exists() {
            return Ok(false);
        }
        let tmp = self
            .dir
            .join(format!(".c{:03}_r{:04}.tmp", record.condition, record.rep));
        let mut text = serde_json::to_string_pretty(record)?;
        text.push('\n');
        fs::write(&tmp, text)?;
        fs::rename(&tmp, &target)?;
        Ok(true)
    }

    pub fn keys(&self) -> Result<BTreeSet<(usize, usize)>> {
        let mut keys = BTreeSet::new();
        for entry in fs::read_dir(&self.dir)? {
            let name = entry?.file_name();
            if let Some(key) = name.to_str().and_then(parse_key) {
                keys.insert(key);
            }
        }
        Ok(keys)
    }

    pub fn get(&self, condition: usize, rep: usize) -> Result<ReplicationRecord> {
        let path = self.path(condition, rep);
        let text = fs::read_to_string(&path)?;
        serde_json::from_str(&text)
            .map_err(|e| Error::Store(format!("{}: {e}", path.display())))
    }

    /// All records ordered by `(condition, rep)`.
    pub fn load_all(&self) -> Result<Vec<ReplicationRecord>> {
        self.keys()?.into_iter().map(|(c, r)| self.get(c, r)).collect()
    }
}
