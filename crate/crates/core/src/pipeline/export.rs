//! Writes a decomposition tree as `tree.json` plus raw little-endian f64 grids.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{io_err, PipelineError};
use crate::imgio::{Dims, Image};
use crate::wavelet::{DecompositionTree, WaveletKind};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelEntry {
    pub level: usize,
    pub rows: usize,
    pub cols: usize,
    /// Grid files present for this level, e.g. `L1_cH.f64`.
    pub files: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeManifest {
    pub levels: usize,
    pub wavelet: WaveletKind,
    pub original_dims: Dims,
    pub padded_dims: Dims,
    pub byte_order: String,
    pub per_level: Vec<LevelEntry>,
}

fn write_grid(dir: &Path, name: &str, grid: &Image) -> Result<(), PipelineError> {
    let mut bytes = Vec::with_capacity(grid.pixels().len() * 8);
    for v in grid.pixels() {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    let path = dir.join(name);
    fs::write(&path, bytes).map_err(io_err(&path))
}

/// Exports `tree` into `dir` (created if needed). Only the deepest level carries a `cA` file.
pub fn export_decomposition(
    tree: &DecompositionTree,
    dir: &Path,
) -> Result<TreeManifest, PipelineError> {
    tree.validate()?;
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let mut per_level = Vec::with_capacity(tree.levels);
    for (i, triple) in tree.details.iter().enumerate() {
        let level = i + 1;
        let mut files = Vec::new();
        if level == tree.levels {
            let name = format!("L{level}_cA.f64");
            write_grid(dir, &name, &tree.deepest_approx)?;
            files.push(name);
        }
        for (band, grid) in ["cH", "cV", "cD"].iter().zip(triple.grids()) {
            let name = format!("L{level}_{band}.f64");
            write_grid(dir, &name, grid)?;
            files.push(name);
        }
        let d = tree.level_dims(level);
        per_level.push(LevelEntry {
            level,
            rows: d.rows,
            cols: d.cols,
            files,
        });
    }
    let manifest = TreeManifest {
        levels: tree.levels,
        wavelet: tree.wavelet,
        original_dims: tree.original_dims,
        padded_dims: tree.padded_dims(),
        byte_order: "little-endian f64, row-major".into(),
        per_level,
    };
    let path = dir.join("tree.json");
    let text = serde_json::to_string_pretty(&manifest).map_err(|source| PipelineError::Json {
        path: path.display().to_string(),
        source,
    })?;
    fs::write(&path, text + "\n").map_err(io_err(&path))?;
    Ok(manifest)
}
