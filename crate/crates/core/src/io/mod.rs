//! Persistence: experiment configuration, IDX and CSV ingestion, CSV
//! results, checkpoints and atomic file writes.

mod checkpoint;
mod config;
mod idx;
mod table;

use std::fs;
use std::io::Write as _;
use std::path::Path;

use crate::error::Result;

pub use checkpoint::{decode_checkpoint, encode_checkpoint, read_checkpoint, write_checkpoint, Checkpoint, CheckpointManifest, TensorEntry, CHECKPOINT_FORMAT};
pub use config::{DataKind, DataSource, ExperimentConfig, PointProcessConfig, UqConfig};
pub use idx::{parse_idx, read_idx, IdxData, IdxKind};
pub use table::{
    classification_table, draws_table, format_real, intervals_table, parse_table, points_table, read_classification,
    read_points, read_regression, read_table, regression_table, trace_table, uqc_table, write_table, Table,
};

/// Writes through a sibling temporary file and a rename, so readers never
/// observe a partially written file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    fs::create_dir_all(dir)?;
    let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    let tmp = dir.join(format!(".{name}.tmp-{}", std::process::id()));
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

pub fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_atomic(path, text.as_bytes())
}
