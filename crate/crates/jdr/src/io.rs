//! CSV and JSON serialization for matrices, embeddings, and dyadic
//! score triples.
//!
//! Matrices are plain comma-delimited rows with no header unless asked
//! for; floats are written in shortest round-trip form so re-runs are
//! byte-identical.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimator::EmbeddingPair;
use crate::sparse::SparseEmbeddingPair;

/// Reads a matrix of decimal floats, one row per line.
pub fn read_matrix_csv(path: &Path, has_headers: bool) -> Result<DMatrix<f64>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(has_headers)
        .trim(csv::Trim::All)
        .flexible(false)
        .from_path(path)?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for record in reader.records() {
        let record = record?;
        let row: std::result::Result<Vec<f64>, _> =
            record.iter().map(|field| field.parse::<f64>()).collect();
        let row = row.map_err(|e| Error::Parse {
            context: format!("{}: row {}: {e}", path.display(), rows.len() + 1),
        })?;
        if let Some(first) = rows.first() {
            if row.len() != first.len() {
                return Err(Error::Parse {
                    context: format!(
                        "{}: row {} has {} fields, expected {}",
                        path.display(),
                        rows.len() + 1,
                        row.len(),
                        first.len()
                    ),
                });
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::Parse {
            context: format!("{}: no data rows", path.display()),
        });
    }
    let (m, n) = (rows.len(), rows[0].len());
    Ok(DMatrix::from_fn(m, n, |i, j| rows[i][j]))
}

pub fn write_matrix_csv(path: &Path, mat: &DMatrix<f64>) -> Result<()> {
    let mut out = BufWriter::new(fs::File::create(path)?);
    for i in 0..mat.nrows() {
        for j in 0..mat.ncols() {
            if j > 0 {
                out.write_all(b",")?;
            }
            write!(out, "{}", mat[(i, j)])?;
        }
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

/// Reads a single-column CSV as a vector.
pub fn read_vector_csv(path: &Path, has_headers: bool) -> Result<DVector<f64>> {
    let mat = read_matrix_csv(path, has_headers)?;
    if mat.ncols() != 1 {
        return Err(Error::Parse {
            context: format!("{}: expected one column, got {}", path.display(), mat.ncols()),
        });
    }
    Ok(mat.column(0).into_owned())
}

pub fn write_vector_csv(path: &Path, v: &DVector<f64>) -> Result<()> {
    let mut out = BufWriter::new(fs::File::create(path)?);
    for value in v.iter() {
        writeln!(out, "{value}")?;
    }
    out.flush()?;
    Ok(())
}

/// Writes a vector as a single comma-delimited line.
pub fn write_row_csv(path: &Path, v: &DVector<f64>) -> Result<()> {
    let mut out = BufWriter::new(fs::File::create(path)?);
    for (j, value) in v.iter().enumerate() {
        if j > 0 {
            out.write_all(b",")?;
        }
        write!(out, "{value}")?;
    }
    out.write_all(b"\n")?;
    out.flush()?;
    Ok(())
}

pub fn read_row_csv(path: &Path) -> Result<DVector<f64>> {
    let text = fs::read_to_string(path)?;
    let line = text.lines().next().ok_or_else(|| Error::Parse {
        context: format!("{}: empty file", path.display()),
    })?;
    let values: std::result::Result<Vec<f64>, _> =
        line.split(',').map(|f| f.trim().parse::<f64>()).collect();
    values
        .map(DVector::from_vec)
        .map_err(|e| Error::Parse {
            context: format!("{}: {e}", path.display()),
        })
}

fn write_index_row(path: &Path, indices: &[usize]) -> Result<()> {
    let mut out = BufWriter::new(fs::File::create(path)?);
    for (j, idx) in indices.iter().enumerate() {
        if j > 0 {
            out.write_all(b",")?;
        }
        write!(out, "{idx}")?;
    }
    out.write_all(b"\n")?;
    out.flush()?;
    Ok(())
}

/// Observed (i, j, y) score triples.
pub fn read_triples_csv(path: &Path, has_headers: bool) -> Result<Vec<(usize, usize, f64)>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(has_headers)
        .trim(csv::Trim::All)
        .from_path(path)?;
    let mut triples = Vec::new();
    for record in reader.records() {
        let record = record?;
        if record.len() != 3 {
            return Err(Error::Parse {
                context: format!("{}: expected i,j,y rows", path.display()),
            });
        }
        let parse = |field: &str| {
            field.parse::<usize>().map_err(|e| Error::Parse {
                context: format!("{}: {e}", path.display()),
            })
        };
        let i = parse(&record[0])?;
        let j = parse(&record[1])?;
        let y = record[2].parse::<f64>().map_err(|e| Error::Parse {
            context: format!("{}: {e}", path.display()),
        })?;
        triples.push((i, j, y));
    }
    Ok(triples)
}

pub fn write_triples_csv(path: &Path, triples: &[(usize, usize, f64)]) -> Result<()> {
    let mut out = BufWriter::new(fs::File::create(path)?);
    for (i, j, y) in triples {
        writeln!(out, "{i},{j},{y}")?;
    }
    out.flush()?;
    Ok(())
}

/// Query (i, j) pairs.
pub fn read_pairs_csv(path: &Path, has_headers: bool) -> Result<Vec<(usize, usize)>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(has_headers)
        .trim(csv::Trim::All)
        .from_path(path)?;
    let mut pairs = Vec::new();
    for record in reader.records() {
        let record = record?;
        if record.len() != 2 {
            return Err(Error::Parse {
                context: format!("{}: expected i,j rows", path.display()),
            });
        }
        let parse = |field: &str| {
            field.parse::<usize>().map_err(|e| Error::Parse {
                context: format!("{}: {e}", path.display()),
            })
        };
        pairs.push((parse(&record[0])?, parse(&record[1])?));
    }
    Ok(pairs)
}

/// Sidecar describing how an embedding was produced.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct EmbeddingMeta {
    pub algo: String,
    pub r: usize,
    pub m: usize,
    pub n1: usize,
    pub n2: usize,
    pub normalize: String,
    pub jitter: f64,
    pub seed: Option<u64>,
    pub version: String,
}

pub fn library_version() -> String {
    env!("CARGO_PKG_VERSION").to_string()
}

pub fn write_meta<T: Serialize>(path: &Path, meta: &T) -> Result<()> {
    let mut out = BufWriter::new(fs::File::create(path)?);
    let text = serde_json::to_string_pretty(meta).map_err(|e| Error::Parse {
        context: format!("serializing metadata: {e}"),
    })?;
    out.write_all(text.as_bytes())?;
    out.write_all(b"\n")?;
    out.flush()?;
    Ok(())
}

pub fn read_meta(path: &Path) -> Result<EmbeddingMeta> {
    let text = fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| Error::Parse {
        context: format!("{}: {e}", path.display()),
    })
}

/// Writes `U.csv`, `V.csv`, `sigma.csv`, the whitened factors, and
/// `meta.json` into `dir`.
pub fn save_embedding(dir: &Path, emb: &EmbeddingPair, meta: &EmbeddingMeta) -> Result<()> {
    fs::create_dir_all(dir)?;
    write_matrix_csv(&dir.join("U.csv"), &emb.u)?;
    write_matrix_csv(&dir.join("V.csv"), &emb.v)?;
    write_row_csv(&dir.join("sigma.csv"), &emb.sigma)?;
    write_matrix_csv(&dir.join("U_whitened.csv"), &emb.whitened_u)?;
    write_matrix_csv(&dir.join("V_whitened.csv"), &emb.whitened_v)?;
    write_meta(&dir.join("meta.json"), meta)?;
    Ok(())
}

pub fn load_embedding(dir: &Path) -> Result<(EmbeddingPair, EmbeddingMeta)> {
    let meta = read_meta(&dir.join("meta.json"))?;
    let emb = EmbeddingPair {
        u: read_matrix_csv(&dir.join("U.csv"), false)?,
        v: read_matrix_csv(&dir.join("V.csv"), false)?,
        sigma: read_row_csv(&dir.join("sigma.csv"))?,
        whitened_u: read_matrix_csv(&dir.join("U_whitened.csv"), false)?,
        whitened_v: read_matrix_csv(&dir.join("V_whitened.csv"), false)?,
    };
    if emb.u.ncols() != meta.r || emb.sigma.len() != meta.r {
        return Err(Error::Parse {
            context: format!("{}: embedding files disagree with meta.json", dir.display()),
        });
    }
    Ok((emb, meta))
}

/// Saves a sparse embedding: the base files plus one support index line
/// per side.
pub fn save_sparse_embedding(
    dir: &Path,
    sparse: &SparseEmbeddingPair,
    meta: &EmbeddingMeta,
) -> Result<()> {
    save_embedding(dir, &sparse.base, meta)?;
    write_index_row(&dir.join("support_u.csv"), &sparse.row_support_u)?;
    write_index_row(&dir.join("support_v.csv"), &sparse.row_support_v)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;
    use tempfile::tempdir;

    #[test]
    fn matrix_round_trip_is_exact() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("m.csv");
        let mat = DMatrix::from_row_slice(
            2,
            3,
            &[1.5, -2.25, 1e-17, std::f64::consts::PI, -0.0, 4.0 / 3.0],
        );
        write_matrix_csv(&path, &mat).unwrap();
        let back = read_matrix_csv(&path, false).unwrap();
        assert_eq!(mat, back);
    }

    #[test]
    fn header_row_skipped_when_flagged() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("h.csv");
        fs::write(&path, "x,y\n1.0,2.0\n3.0,4.0\n").unwrap();
        let with = read_matrix_csv(&path, true).unwrap();
        assert_eq!(with.nrows(), 2);
        assert!(read_matrix_csv(&path, false).is_err());
    }

    #[test]
    fn ragged_rows_rejected() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("r.csv");
        fs::write(&path, "1.0,2.0\n3.0\n").unwrap();
        assert!(read_matrix_csv(&path, false).is_err());
    }

    #[test]
    fn embedding_directory_round_trip() {
        let dir = tempdir().unwrap();
        let emb = EmbeddingPair {
            u: DMatrix::from_row_slice(3, 2, &[0.1, 0.2, 0.3, 0.4, 0.5, 0.6]),
            v: DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 1.0]),
            sigma: nalgebra::DVector::from_vec(vec![2.0, 0.5]),
            whitened_u: DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 0.0, 1.0, 0.0, 0.0]),
            whitened_v: DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 1.0]),
        };
        let meta = EmbeddingMeta {
            algo: "jdr".into(),
            r: 2,
            m: 100,
            n1: 3,
            n2: 2,
            normalize: "full".into(),
            jitter: 0.0,
            seed: Some(7),
            version: library_version(),
        };
        save_embedding(dir.path(), &emb, &meta).unwrap();
        let (back, meta_back) = load_embedding(dir.path()).unwrap();
        assert_eq!(back, emb);
        assert_eq!(meta_back, meta);
    }

    #[test]
    fn triples_and_pairs_round_trip() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("t.csv");
        let triples = vec![(0, 1, 0.25), (3, 2, -1.5)];
        write_triples_csv(&path, &triples).unwrap();
        assert_eq!(read_triples_csv(&path, false).unwrap(), triples);
    }
}
