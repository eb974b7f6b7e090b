use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{demean_rows, ConditionSegment, ErpBlock, Formulation, FusionDataset, Split};
use crate::error::{Error, Result};
use crate::linalg::Mat;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManifestBlock {
    pub modality: String,
    pub subject: String,
    pub split: Split,
    pub path: String,
    pub n_channels: usize,
}

/// On-disk description of a dataset. Block paths are relative to the
/// manifest's directory unless absolute.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub formulation: Formulation,
    #[serde(rename = "P")]
    pub p: usize,
    pub condition_layout: Vec<ConditionSegment>,
    #[serde(default)]
    pub tilde_prestim_len: usize,
    #[serde(default)]
    pub demean: bool,
    pub blocks: Vec<ManifestBlock>,
}

/// Reads a headerless comma-separated matrix. Blank lines are skipped.
pub fn read_csv_matrix(path: &Path) -> Result<Mat> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut values = Vec::new();
    let mut ncols = None;
    let mut nrows = 0;
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let before = values.len();
        for field in line.split(',') {
            let v: f64 = field.trim().parse().map_err(|_| Error::Parse {
                path: path.to_path_buf(),
                line: lineno + 1,
                message: format!("not a number: '{field}'"),
            })?;
            values.push(v);
        }
        let width = values.len() - before;
        match ncols {
            None => ncols = Some(width),
            Some(c) if c != width => {
                return Err(Error::Parse {
                    path: path.to_path_buf(),
                    line: lineno + 1,
                    message: format!("row has {width} fields, expected {c}"),
                })
            }
            _ => {}
        }
        nrows += 1;
    }
    Ok(Mat::from_row_slice(nrows, ncols.unwrap_or(0), &values))
}

/// Writes a matrix with the shortest decimal representation that parses
/// back to the identical `f64`.
pub fn write_csv_matrix(path: &Path, m: &Mat) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let mut line = String::new();
    for row in m.row_iter() {
        line.clear();
        for (j, v) in row.iter().enumerate() {
            if j > 0 {
                line.push(',');
            }
            line.push_str(&v.to_string());
        }
        line.push('\n');
        w.write_all(line.as_bytes()).map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn load_dataset(manifest_path: &Path) -> Result<FusionDataset> {
    let text = fs::read_to_string(manifest_path).map_err(|e| Error::io(manifest_path, e))?;
    let manifest: Manifest = serde_json::from_str(&text).map_err(|e| Error::Manifest {
        path: manifest_path.to_path_buf(),
        message: e.to_string(),
    })?;
    let layout_sum: usize = manifest.condition_layout.iter().map(|s| s.len).sum();
    if layout_sum != manifest.p {
        return Err(Error::Manifest {
            path: manifest_path.to_path_buf(),
            message: format!(
                "condition_layout lengths sum to {layout_sum} but P is {}",
                manifest.p
            ),
        });
    }
    let base = manifest_path.parent().unwrap_or_else(|| Path::new("."));
    let mut blocks = Vec::with_capacity(manifest.blocks.len());
    for entry in &manifest.blocks {
        let key = format!("({}, {}, {})", entry.modality, entry.subject, entry.split);
        let path = resolve(base, &entry.path);
        if !path.is_file() {
            return Err(Error::MissingFile { path, key });
        }
        let mut data = read_csv_matrix(&path)?;
        if data.ncols() != manifest.p {
            return Err(Error::InconsistentSharedDim {
                key: format!("{key} in {}", path.display()),
                expected: manifest.p,
                found: data.ncols(),
            });
        }
        if data.nrows() != entry.n_channels {
            return Err(Error::FileShape {
                path,
                key,
                expected: format!("{}x{}", entry.n_channels, manifest.p),
                found: format!("{}x{}", data.nrows(), data.ncols()),
            });
        }
        if manifest.demean {
            demean_rows(&mut data);
        }
        blocks.push(ErpBlock::new(&entry.modality, &entry.subject, entry.split, data));
    }
    FusionDataset::new(
        manifest.formulation,
        manifest.condition_layout,
        manifest.tilde_prestim_len,
        blocks,
    )
}

fn resolve(base: &Path, p: &str) -> PathBuf {
    let p = Path::new(p);
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

/// Writes one CSV per block plus `manifest.json` into `dir`; returns the
/// manifest path. Saved data are already in final form, so `demean` is false.
pub fn save_dataset(dataset: &FusionDataset, dir: &Path) -> Result<PathBuf> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut entries = Vec::with_capacity(dataset.blocks().len());
    for block in dataset.blocks() {
        let name = format!("{}_{}_{}.csv", block.split, block.modality, block.subject);
        write_csv_matrix(&dir.join(&name), &block.data)?;
        entries.push(ManifestBlock {
            modality: block.modality.clone(),
            subject: block.subject.clone(),
            split: block.split,
            path: name,
            n_channels: block.n_channels(),
        });
    }
    let manifest = Manifest {
        formulation: dataset.formulation(),
        p: dataset.shared_dim(),
        condition_layout: dataset.condition_layout().to_vec(),
        tilde_prestim_len: dataset.tilde_prestim_len(),
        demean: false,
        blocks: entries,
    };
    let path = dir.join("manifest.json");
    let mut text = serde_json::to_string_pretty(&manifest)?;
    text.push('\n');
    fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    Ok(path)
}
