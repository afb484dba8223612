//! Line-delimited JSON scene index with lock-file serialized writers.

use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{Scene, YearMonth};
use crate::error::{Error, Result};
use crate::raster::BBox;

pub const INDEX_FILE: &str = "index.jsonl";
pub const LOCK_FILE: &str = "index.lock";

#[derive(Debug, Serialize, Deserialize)]
struct Record {
    scene_id: String,
    year: i32,
    month: u8,
    bbox: [f64; 4],
    path: String,
    byte_size: u64,
}

fn round4(v: f64) -> f64 {
    (v * 1e4).round() / 1e4
}

impl From<&Scene> for Record {
    fn from(s: &Scene) -> Self {
        let b: [f64; 4] = s.extent.into();
        Record {
            scene_id: s.scene_id.clone(),
            year: s.time.year,
            month: s.time.month,
            bbox: b.map(round4),
            path: s.grid_path.to_string_lossy().replace('\\', "/"),
            byte_size: s.byte_size,
        }
    }
}

impl From<Record> for Scene {
    fn from(r: Record) -> Self {
        Scene {
            scene_id: r.scene_id,
            time: YearMonth { year: r.year, month: r.month },
            grid_path: PathBuf::from(r.path),
            extent: BBox::from(r.bbox),
            byte_size: r.byte_size,
        }
    }
}

/// Reads the index; a missing file is an empty catalog.
pub fn read_index(root: &Path) -> Result<Vec<Scene>> {
    let path = root.join(INDEX_FILE);
    let file = match File::open(&path) {
        Ok(f) => f,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
        Err(e) => return Err(e.into()),
    };
    let mut scenes = Vec::new();
    for (n, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: Record = serde_json::from_str(&line)
            .map_err(|e| Error::UnreadableFile { path: path.clone(), reason: format!("line {}: {e}", n + 1) })?;
        scenes.push(Scene::from(rec));
    }
    scenes.sort_by_key(|s| s.time);
    Ok(scenes)
}

/// Rewrites the whole index through a temp file and rename.
pub fn write_index(root: &Path, scenes: &[Scene]) -> Result<()> {
    let fail = |e: std::io::Error| Error::IndexWriteFailure(e.to_string());
    let tmp = root.join(format!("{INDEX_FILE}.tmp"));
    let mut out = File::create(&tmp).map_err(fail)?;
    for s in scenes {
        let line = serde_json::to_string(&Record::from(s)).map_err(|e| Error::IndexWriteFailure(e.to_string()))?;
        out.write_all(line.as_bytes()).map_err(fail)?;
        out.write_all(b"\n").map_err(fail)?;
    }
    out.sync_all().map_err(fail)?;
    drop(out);
    fs::rename(&tmp, root.join(INDEX_FILE)).map_err(fail)
}

/// Exclusive writer lock; released on drop.
#[derive(Debug)]
pub struct IndexLock {
    path: PathBuf,
}

impl IndexLock {
    pub fn acquire(root: &Path) -> Result<Self> {
        let path = root.join(LOCK_FILE);
        match OpenOptions::new().write(true).create_new(true).open(&path) {
            Ok(mut f) => {
                let _ = writeln!(f, "{}", std::process::id());
                Ok(IndexLock { path })
            }
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => {
                Err(Error::IndexWriteFailure(format!("catalog is locked by another writer ({})", path.display())))
            }
            Err(e) => Err(Error::IndexWriteFailure(e.to_string())),
        }
    }
}

impl Drop for IndexLock {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.path);
    }
}
