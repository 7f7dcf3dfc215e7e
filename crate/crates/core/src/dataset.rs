//! On-disk datasets: one CSV file per matrix (rows of 17-significant-digit
//! values) plus a JSON manifest `{d, n, seed, config, files[], sha256[]}`.

use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::barycenter::SampleSet;
use crate::error::{BwError, IoError, Result};
use crate::matrix::SymMatrix;

pub const MANIFEST_NAME: &str = "manifest.json";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub d: usize,
    pub n: usize,
    pub seed: Option<u64>,
    /// Echo of the generator configuration.
    pub config: serde_json::Value,
    /// File names relative to the manifest directory.
    pub files: Vec<String>,
    pub sha256: Vec<String>,
}

fn file_err(path: &Path, source: std::io::Error) -> BwError {
    IoError::File {
        path: path.to_path_buf(),
        source,
    }
    .into()
}

fn parse_err(path: &Path, message: impl Into<String>) -> BwError {
    IoError::Parse {
        path: path.to_path_buf(),
        message: message.into(),
    }
    .into()
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Serializes a matrix as CSV rows with 17 significant digits (lossless for `f64`).
pub fn matrix_to_csv(m: &DMatrix<f64>) -> String {
    let mut out = String::new();
    for i in 0..m.nrows() {
        let row: Vec<String> = (0..m.ncols()).map(|j| format!("{:.16e}", m[(i, j)])).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

pub fn matrix_from_csv(text: &str, path: &Path) -> Result<DMatrix<f64>> {
    let rows: Vec<Vec<f64>> = text
        .lines()
        .filter(|l| !l.trim().is_empty())
        .enumerate()
        .map(|(r, line)| {
            line.split(',')
                .map(|tok| {
                    tok.trim()
                        .parse::<f64>()
                        .map_err(|e| parse_err(path, format!("row {r}: {e}")))
                })
                .collect()
        })
        .collect::<Result<_>>()?;
    let nrows = rows.len();
    let ncols = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != ncols) {
        return Err(parse_err(path, "ragged rows"));
    }
    Ok(DMatrix::from_fn(nrows, ncols, |i, j| rows[i][j]))
}

pub fn write_matrix(path: &Path, m: &SymMatrix) -> Result<String> {
    let text = matrix_to_csv(m.matrix());
    fs::write(path, &text).map_err(|e| file_err(path, e))?;
    Ok(sha256_hex(text.as_bytes()))
}

/// Reads a symmetric PSD matrix of dimension `d` (if given).
pub fn read_matrix(path: &Path, d: Option<usize>) -> Result<SymMatrix> {
    let bytes = fs::read(path).map_err(|e| file_err(path, e))?;
    let text = String::from_utf8(bytes).map_err(|e| parse_err(path, e.to_string()))?;
    parse_matrix(&text, path, d)
}

fn parse_matrix(text: &str, path: &Path, d: Option<usize>) -> Result<SymMatrix> {
    let m = matrix_from_csv(text, path)?;
    let expected = d.unwrap_or(m.nrows());
    if m.nrows() != expected || m.ncols() != expected {
        return Err(IoError::Dim {
            path: path.to_path_buf(),
            expected,
            rows: m.nrows(),
            cols: m.ncols(),
        }
        .into());
    }
    let sym = SymMatrix::new(m).map_err(|e| parse_err(path, e.to_string()))?;
    if !sym.is_psd() {
        return Err(parse_err(path, "matrix is not positive semi-definite"));
    }
    Ok(sym)
}

/// Writes `matrices` as `s_00000.csv, …` plus `manifest.json` into `dir`.
pub fn save_dataset(
    matrices: &[SymMatrix],
    dir: &Path,
    seed: Option<u64>,
    config: serde_json::Value,
) -> Result<DatasetManifest> {
    let d = matrices.first().map_or(0, SymMatrix::dim);
    if let Some(bad) = matrices.iter().position(|m| m.dim() != d) {
        return Err(BwError::shape(format!("{d}x{d}"), format!("matrix {bad}")));
    }
    fs::create_dir_all(dir).map_err(|e| file_err(dir, e))?;
    let mut files = Vec::with_capacity(matrices.len());
    let mut sha256 = Vec::with_capacity(matrices.len());
    for (i, m) in matrices.iter().enumerate() {
        let name = format!("s_{i:05}.csv");
        sha256.push(write_matrix(&dir.join(&name), m)?);
        files.push(name);
    }
    let manifest = DatasetManifest {
        d,
        n: matrices.len(),
        seed,
        config,
        files,
        sha256,
    };
    let path = dir.join(MANIFEST_NAME);
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    fs::write(&path, text).map_err(|e| file_err(&path, e))?;
    Ok(manifest)
}

pub fn read_manifest(manifest_path: &Path) -> Result<DatasetManifest> {
    let text = fs::read_to_string(manifest_path).map_err(|e| file_err(manifest_path, e))?;
    let manifest: DatasetManifest =
        serde_json::from_str(&text).map_err(|e| parse_err(manifest_path, e.to_string()))?;
    if manifest.n != manifest.files.len() || manifest.n != manifest.sha256.len() {
        return Err(IoError::Manifest(format!(
            "n = {} but {} files and {} checksums listed",
            manifest.n,
            manifest.files.len(),
            manifest.sha256.len()
        ))
        .into());
    }
    Ok(manifest)
}

/// Accepts either a manifest file or the directory containing it.
pub fn resolve_manifest_path(path: &Path) -> PathBuf {
    if path.is_dir() {
        path.join(MANIFEST_NAME)
    } else {
        path.to_path_buf()
    }
}

/// Loads all matrices listed in a manifest, verifying checksums and dimensions.
pub fn load_matrices(manifest_path: &Path) -> Result<(DatasetManifest, Vec<SymMatrix>)> {
    let manifest_path = resolve_manifest_path(manifest_path);
    let manifest = read_manifest(&manifest_path)?;
    let base = manifest_path.parent().unwrap_or(Path::new("."));
    let mut matrices = Vec::with_capacity(manifest.n);
    for (name, expected) in manifest.files.iter().zip(&manifest.sha256) {
        let path = base.join(name);
        let bytes = fs::read(&path).map_err(|e| file_err(&path, e))?;
        let actual = sha256_hex(&bytes);
        if &actual != expected {
            return Err(IoError::Checksum {
                path,
                expected: expected.clone(),
                actual,
            }
            .into());
        }
        let text = String::from_utf8(bytes).map_err(|e| parse_err(&path, e.to_string()))?;
        matrices.push(parse_matrix(&text, &path, Some(manifest.d))?);
    }
    Ok((manifest, matrices))
}

/// Loads a dataset as a unit-weight [`SampleSet`].
pub fn load_dataset(manifest_path: &Path) -> Result<SampleSet> {
    let (_, matrices) = load_matrices(manifest_path)?;
    SampleSet::new(matrices)
}
