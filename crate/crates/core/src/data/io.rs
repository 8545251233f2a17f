//! JSONL datasets, the PREMB1 binary embedding store, and pair lists.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{Dataset, EmbeddingDims, Item, PairExample, RATING_MAX, RATING_MIN};
use crate::error::{Error, Result};

pub const PREMB_MAGIC: &[u8; 6] = b"PREMB1";

/// Tolerance between a supplied `mean_rating` and the mean of `ratings`.
const MEAN_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub enum IngestFormat {
    /// Embeddings inline as `image_embedding` / `text_embedding` arrays.
    Jsonl,
    /// Each line carries `embedding_row` into a PREMB1 store; the first
    /// `image_dim` columns of a row are image features.
    BinaryEmbeddings { store: PathBuf, image_dim: usize },
}

#[derive(Debug, Serialize, Deserialize)]
struct ItemRecord {
    item_id: String,
    image_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    caption: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    ratings: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    mean_rating: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    image_embedding: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    text_embedding: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    embedding_row: Option<u32>,
}

/// Row-major float32 embedding matrix as stored in a PREMB1 file.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingStore {
    pub rows: usize,
    pub dim: usize,
    pub data: Vec<f32>,
}

impl EmbeddingStore {
    pub fn row(&self, r: usize) -> &[f32] {
        &self.data[r * self.dim..(r + 1) * self.dim]
    }
}

pub fn ingest_dataset(path: impl AsRef<Path>, format: &IngestFormat) -> Result<Dataset> {
    match format {
        IngestFormat::Jsonl => read_jsonl(path),
        IngestFormat::BinaryEmbeddings { store, image_dim } => {
            let store = read_premb(store)?;
            if *image_dim > store.dim {
                return Err(Error::DimensionMismatch {
                    expected: store.dim,
                    found: *image_dim,
                    context: "image_dim exceeds store dimension".into(),
                });
            }
            let dims = EmbeddingDims {
                image: *image_dim,
                text: store.dim - image_dim,
            };
            read_items(path.as_ref(), Some((&store, dims)))
        }
    }
}

/// Reads a dataset whose embeddings are inline in the JSONL file.
pub fn read_jsonl(path: impl AsRef<Path>) -> Result<Dataset> {
    read_items(path.as_ref(), None)
}

fn read_items(path: &Path, store: Option<(&EmbeddingStore, EmbeddingDims)>) -> Result<Dataset> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut items = Vec::new();
    let mut dims = store.map(|(_, d)| d);
    for (lineno, line) in BufReader::new(file).lines().enumerate() {
        let line_no = lineno + 1;
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let malformed = |message: String| Error::MalformedLine { line: line_no, message };
        let rec: ItemRecord = serde_json::from_str(&line).map_err(|e| malformed(e.to_string()))?;
        let mean_rating = resolve_mean(&rec, line_no)?;

        let (embedding, line_dims) = match (store, rec.embedding_row) {
            (Some((st, d)), Some(row)) => {
                let row = row as usize;
                if row >= st.rows {
                    return Err(malformed(format!(
                        "embedding_row {row} out of range for store of {} rows",
                        st.rows
                    )));
                }
                (st.row(row).iter().map(|&v| f64::from(v)).collect(), d)
            }
            (Some(_), None) => {
                return Err(malformed("missing embedding_row for binary store".into()));
            }
            (None, Some(_)) => {
                return Err(malformed("embedding_row given but no binary store was supplied".into()));
            }
            (None, None) => {
                let (Some(img), Some(txt)) = (rec.image_embedding, rec.text_embedding) else {
                    return Err(malformed("image_embedding and text_embedding are required".into()));
                };
                let d = EmbeddingDims {
                    image: img.len(),
                    text: txt.len(),
                };
                let mut e = img;
                e.extend(txt);
                (e, d)
            }
        };
        match dims {
            None => dims = Some(line_dims),
            Some(d) if d != line_dims => {
                return Err(Error::DimensionMismatch {
                    expected: d.total(),
                    found: line_dims.total(),
                    context: format!(
                        "line {line_no}: image/text dims {}/{} vs declared {}/{}",
                        line_dims.image, line_dims.text, d.image, d.text
                    ),
                });
            }
            Some(_) => {}
        }
        if embedding.iter().any(|v| !v.is_finite()) {
            return Err(malformed("embedding contains a non-finite value".into()));
        }
        items.push(Item {
            item_id: rec.item_id,
            image_id: rec.image_id,
            caption: rec.caption,
            ratings: rec.ratings,
            mean_rating,
            embedding,
        });
    }
    let dims = dims.unwrap_or(EmbeddingDims { image: 0, text: 0 });
    Dataset::new(items, dims, false)
}

fn resolve_mean(rec: &ItemRecord, line: usize) -> Result<f64> {
    let out_of_range = |value: f64| Error::RatingOutOfRange {
        item_id: rec.item_id.clone(),
        value,
    };
    let in_range = |v: f64| (RATING_MIN..=RATING_MAX).contains(&v);
    match (&rec.ratings, rec.mean_rating) {
        (Some(rs), given) => {
            if rs.is_empty() {
                return Err(Error::MalformedLine {
                    line,
                    message: "ratings array is empty".into(),
                });
            }
            if let Some(&bad) = rs.iter().find(|&&v| !in_range(v)) {
                return Err(out_of_range(bad));
            }
            let mean = rs.iter().sum::<f64>() / rs.len() as f64;
            if let Some(g) = given {
                if (g - mean).abs() > MEAN_TOLERANCE {
                    return Err(Error::MalformedLine {
                        line,
                        message: format!("mean_rating {g} disagrees with mean of ratings {mean}"),
                    });
                }
            }
            Ok(mean)
        }
        (None, Some(g)) if in_range(g) => Ok(g),
        (None, Some(g)) => Err(out_of_range(g)),
        (None, None) => Err(Error::MalformedLine {
            line,
            message: "one of ratings / mean_rating is required".into(),
        }),
    }
}

fn item_record(item: &Item, dims: EmbeddingDims, row: Option<u32>) -> ItemRecord {
    let (image_embedding, text_embedding) = match row {
        Some(_) => (None, None),
        None => (
            Some(item.embedding[..dims.image].to_vec()),
            Some(item.embedding[dims.image..].to_vec()),
        ),
    };
    ItemRecord {
        item_id: item.item_id.clone(),
        image_id: item.image_id.clone(),
        caption: item.caption.clone(),
        ratings: item.ratings.clone(),
        mean_rating: Some(item.mean_rating),
        image_embedding,
        text_embedding,
        embedding_row: row,
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(|e| Error::io(path, e))
}

fn write_json_line<T: Serialize>(w: &mut impl Write, path: &Path, value: &T) -> Result<()> {
    serde_json::to_writer(&mut *w, value).map_err(|e| Error::io(path, std::io::Error::other(e)))?;
    w.write_all(b"\n").map_err(|e| Error::io(path, e))
}

/// Writes a raw-scale dataset with inline embeddings.
pub fn write_jsonl(ds: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut w = create(path)?;
    for item in ds.items() {
        write_json_line(&mut w, path, &item_record(item, ds.dims(), None))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Writes item metadata as JSONL referencing rows of a PREMB1 store.
/// Embeddings are stored as float32.
pub fn write_jsonl_with_store(ds: &Dataset, jsonl: impl AsRef<Path>, store: impl AsRef<Path>) -> Result<()> {
    let jsonl = jsonl.as_ref();
    let mut w = create(jsonl)?;
    let mut data = Vec::with_capacity(ds.len() * ds.input_dim());
    for (row, item) in ds.items().iter().enumerate() {
        let row = u32::try_from(row).map_err(|_| Error::InvalidConfig("too many rows for a PREMB1 store".into()))?;
        write_json_line(&mut w, jsonl, &item_record(item, ds.dims(), Some(row)))?;
        data.extend(item.embedding.iter().map(|&v| v as f32));
    }
    w.flush().map_err(|e| Error::io(jsonl, e))?;
    write_premb(
        store,
        &EmbeddingStore {
            rows: ds.len(),
            dim: ds.input_dim(),
            data,
        },
    )
}

pub fn write_premb(path: impl AsRef<Path>, store: &EmbeddingStore) -> Result<()> {
    let path = path.as_ref();
    if store.data.len() != store.rows * store.dim {
        return Err(Error::LengthMismatch {
            left: store.data.len(),
            right: store.rows * store.dim,
        });
    }
    let to_u32 = |v: usize| u32::try_from(v).map_err(|_| Error::InvalidConfig(format!("{v} exceeds u32 range")));
    let mut w = create(path)?;
    let mut buf = Vec::with_capacity(14 + store.data.len() * 4);
    buf.extend_from_slice(PREMB_MAGIC);
    buf.extend_from_slice(&to_u32(store.rows)?.to_le_bytes());
    buf.extend_from_slice(&to_u32(store.dim)?.to_le_bytes());
    for v in &store.data {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    w.write_all(&buf).map_err(|e| Error::io(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_premb(path: impl AsRef<Path>) -> Result<EmbeddingStore> {
    let path = path.as_ref();
    let mut bytes = Vec::new();
    File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| Error::io(path, e))?;
    if bytes.len() < 14 || &bytes[..6] != PREMB_MAGIC {
        return Err(Error::Format(format!("{} is not a PREMB1 store", path.display())));
    }
    let rows = u32::from_le_bytes(bytes[6..10].try_into().unwrap()) as usize;
    let dim = u32::from_le_bytes(bytes[10..14].try_into().unwrap()) as usize;
    let body = &bytes[14..];
    let expected = rows
        .checked_mul(dim)
        .and_then(|n| n.checked_mul(4))
        .ok_or_else(|| Error::Format("PREMB1 header overflows".into()))?;
    if body.len() != expected {
        return Err(Error::Format(format!(
            "PREMB1 body is {} bytes, header declares {rows}x{dim} floats ({expected} bytes)",
            body.len()
        )));
    }
    let data = body
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Ok(EmbeddingStore { rows, dim, data })
}

pub fn write_pairs(pairs: &[PairExample], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut w = create(path)?;
    for p in pairs {
        write_json_line(&mut w, path, p)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_pairs(path: impl AsRef<Path>) -> Result<Vec<PairExample>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (lineno, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let p: PairExample = serde_json::from_str(&line).map_err(|e| Error::MalformedLine {
            line: lineno + 1,
            message: e.to_string(),
        })?;
        if p.i == p.j {
            return Err(Error::MalformedLine {
                line: lineno + 1,
                message: format!("pair compares item `{}` with itself", p.i),
            });
        }
        out.push(p);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write_lines(dir: &tempfile::TempDir, name: &str, lines: &[&str]) -> PathBuf {
        let path = dir.path().join(name);
        let mut f = File::create(&path).unwrap();
        for l in lines {
            writeln!(f, "{l}").unwrap();
        }
        path
    }

    #[test]
    fn three_lines_of_width_four() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_lines(
            &dir,
            "d.jsonl",
            &[
                r#"{"item_id":"a","image_id":"i1","mean_rating":2.0,"image_embedding":[1,2],"text_embedding":[3,4]}"#,
                r#"{"item_id":"b","image_id":"i1","caption":"x","mean_rating":3.0,"image_embedding":[1,2],"text_embedding":[3,4]}"#,
                r#"{"item_id":"c","image_id":"i2","ratings":[4.5,4.6],"image_embedding":[1,2],"text_embedding":[3,4]}"#,
            ],
        );
        let ds = read_jsonl(&path).unwrap();
        assert_eq!(ds.len(), 3);
        assert_eq!(ds.input_dim(), 4);
        assert_eq!(ds.dims(), EmbeddingDims { image: 2, text: 2 });
        assert!(!ds.is_normalized());
        assert!((ds.items()[2].mean_rating - 4.55).abs() < 1e-12);
    }

    #[test]
    fn duplicate_id_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        let line = r#"{"item_id":"a","image_id":"i1","mean_rating":2.0,"image_embedding":[1],"text_embedding":[3]}"#;
        let path = write_lines(&dir, "d.jsonl", &[line, line]);
        assert!(matches!(read_jsonl(&path), Err(Error::DuplicateId(_))));
    }

    #[test]
    fn malformed_line_reports_line_number() {
        let dir = tempfile::tempdir().unwrap();
        let good = r#"{"item_id":"a","image_id":"i1","mean_rating":2.0,"image_embedding":[1],"text_embedding":[3]}"#;
        let path = write_lines(&dir, "d.jsonl", &[good, "", "{not json"]);
        match read_jsonl(&path) {
            Err(Error::MalformedLine { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn dimension_mismatch_between_lines() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_lines(
            &dir,
            "d.jsonl",
            &[
                r#"{"item_id":"a","image_id":"i1","mean_rating":2.0,"image_embedding":[1],"text_embedding":[3]}"#,
                r#"{"item_id":"b","image_id":"i1","mean_rating":2.0,"image_embedding":[1,2],"text_embedding":[3]}"#,
            ],
        );
        assert!(matches!(read_jsonl(&path), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn rating_outside_scale() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_lines(
            &dir,
            "d.jsonl",
            &[r#"{"item_id":"a","image_id":"i1","ratings":[3,6],"image_embedding":[1],"text_embedding":[3]}"#],
        );
        assert!(matches!(
            read_jsonl(&path),
            Err(Error::RatingOutOfRange { value, .. }) if value == 6.0
        ));
        let path = write_lines(
            &dir,
            "e.jsonl",
            &[r#"{"item_id":"a","image_id":"i1","mean_rating":0.5,"image_embedding":[1],"text_embedding":[3]}"#],
        );
        assert!(matches!(read_jsonl(&path), Err(Error::RatingOutOfRange { .. })));
    }

    #[test]
    fn inconsistent_mean_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_lines(
            &dir,
            "d.jsonl",
            &[
                r#"{"item_id":"a","image_id":"i1","ratings":[3,4],"mean_rating":3.6,"image_embedding":[1],"text_embedding":[3]}"#,
            ],
        );
        assert!(matches!(read_jsonl(&path), Err(Error::MalformedLine { line: 1, .. })));
    }

    #[test]
    fn premb_wrong_magic_and_truncation() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.premb");
        std::fs::write(&path, b"PREMB2\x01\0\0\0\x01\0\0\0\0\0\0\0").unwrap();
        assert!(matches!(read_premb(&path), Err(Error::Format(_))));
        std::fs::write(&path, b"PREMB1\x02\0\0\0\x01\0\0\0\0\0\0\0").unwrap();
        assert!(matches!(read_premb(&path), Err(Error::Format(_))));
    }

    #[test]
    fn premb_header_layout() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.premb");
        let store = EmbeddingStore {
            rows: 2,
            dim: 1,
            data: vec![1.0, -2.5],
        };
        write_premb(&path, &store).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        assert_eq!(&bytes[..6], b"PREMB1");
        assert_eq!(&bytes[6..10], &2u32.to_le_bytes());
        assert_eq!(&bytes[10..14], &1u32.to_le_bytes());
        assert_eq!(&bytes[14..18], &1.0f32.to_le_bytes());
        assert_eq!(bytes.len(), 22);
    }

    #[test]
    fn binary_format_requires_rows() {
        let dir = tempfile::tempdir().unwrap();
        let store_path = dir.path().join("x.premb");
        write_premb(
            &store_path,
            &EmbeddingStore {
                rows: 1,
                dim: 3,
                data: vec![0.5, 1.5, 2.5],
            },
        )
        .unwrap();
        let meta = write_lines(
            &dir,
            "m.jsonl",
            &[r#"{"item_id":"a","image_id":"i","mean_rating":3,"embedding_row":0}"#],
        );
        let fmt = IngestFormat::BinaryEmbeddings {
            store: store_path.clone(),
            image_dim: 2,
        };
        let ds = ingest_dataset(&meta, &fmt).unwrap();
        assert_eq!(ds.dims(), EmbeddingDims { image: 2, text: 1 });
        assert_eq!(ds.items()[0].embedding, vec![0.5, 1.5, 2.5]);

        let bad = write_lines(
            &dir,
            "n.jsonl",
            &[r#"{"item_id":"a","image_id":"i","mean_rating":3,"embedding_row":1}"#],
        );
        assert!(matches!(
            ingest_dataset(&bad, &fmt),
            Err(Error::MalformedLine { line: 1, .. })
        ));
    }
}
