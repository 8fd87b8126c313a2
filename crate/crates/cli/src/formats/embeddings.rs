//! Embedding dumps: a JSON-lines index plus a binary vector blob.
//!
//! The index starts with `{"reference_model": ..., "layer": ...}` and then
//! lists `{"stem_id", "word", "offset", "n_subwords"}` records, where
//! `offset` is a row of the blob.
//!
//! Blob layout, little-endian: magic `CLZEMBED`, `u16` version, `u32` d,
//! `u64` row count, then `count * d` `f32` values row-major.

use std::fs;
use std::io::Write;
use std::path::Path;

use clozealign_core::semspace::{EmbeddingDump, EmbeddingRecord};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

pub const BLOB_MAGIC: &[u8; 8] = b"CLZEMBED";
pub const BLOB_VERSION: u16 = 1;
const BLOB_HEADER: usize = 8 + 2 + 4 + 8;

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct IndexHeader {
    reference_model: String,
    layer: String,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct IndexRecord {
    stem_id: String,
    word: String,
    offset: u64,
    n_subwords: u32,
}

/// The blob that sits next to an index: `x.jsonl` pairs with `x.bin`.
pub fn blob_path(index: &Path) -> std::path::PathBuf {
    index.with_extension("bin")
}

pub fn read_embeddings(index: &Path, blob: &Path) -> Result<EmbeddingDump> {
    let text = fs::read_to_string(index).map_err(|e| CliError::io(index, e))?;
    let bytes = fs::read(blob).map_err(|e| CliError::io(blob, e))?;
    let (dim, vectors) = parse_blob(&bytes, blob)?;
    let (reference_model, layer, records) = parse_index(&text, index)?;
    EmbeddingDump::new(reference_model, layer, dim, records, vectors)
        .map_err(|e| CliError::data(index, e))
}

fn parse_index(text: &str, path: &Path) -> Result<(String, String, Vec<EmbeddingRecord>)> {
    let mut lines = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty());
    let (i, first) = lines
        .next()
        .ok_or_else(|| CliError::format(path, 1, "empty embedding index"))?;
    let header: IndexHeader = serde_json::from_str(first)
        .map_err(|e| CliError::format(path, i + 1, format!("bad header: {e}")))?;
    let mut records = Vec::new();
    let mut seen = std::collections::BTreeSet::new();
    for (i, line) in lines {
        let r: IndexRecord =
            serde_json::from_str(line).map_err(|e| CliError::format(path, i + 1, e.to_string()))?;
        if !seen.insert((r.stem_id.clone(), r.word.clone())) {
            return Err(CliError::format(
                path,
                i + 1,
                format!("duplicate record for `{}`/`{}`", r.stem_id, r.word),
            ));
        }
        records.push(EmbeddingRecord {
            stem_id: r.stem_id,
            word: r.word,
            offset: r.offset as usize,
            n_subwords: r.n_subwords as usize,
        });
    }
    Ok((header.reference_model, header.layer, records))
}

fn parse_blob(bytes: &[u8], path: &Path) -> Result<(usize, Vec<f32>)> {
    let bad = |m: String| CliError::format(path, 0, m);
    if bytes.len() < BLOB_HEADER || &bytes[..8] != BLOB_MAGIC {
        return Err(bad("not an embedding blob".into()));
    }
    let version = u16::from_le_bytes([bytes[8], bytes[9]]);
    if version != BLOB_VERSION {
        return Err(bad(format!("unsupported blob version {version}")));
    }
    let dim = u32::from_le_bytes(bytes[10..14].try_into().expect("4 bytes")) as usize;
    let count = u64::from_le_bytes(bytes[14..22].try_into().expect("8 bytes")) as usize;
    let body = &bytes[BLOB_HEADER..];
    let expected = count.checked_mul(dim).and_then(|n| n.checked_mul(4));
    if expected != Some(body.len()) {
        return Err(bad(format!(
            "blob declares {count} rows of {dim} floats but holds {} bytes",
            body.len()
        )));
    }
    let vectors = body
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
        .collect();
    Ok((dim, vectors))
}

pub fn write_embeddings<W: Write, B: Write>(
    dump: &EmbeddingDump,
    mut index: W,
    mut blob: B,
) -> std::io::Result<()> {
    let header = IndexHeader {
        reference_model: dump.reference_model.clone(),
        layer: dump.layer.clone(),
    };
    writeln!(index, "{}", serde_json::to_string(&header)?)?;
    for r in dump.records() {
        let rec = IndexRecord {
            stem_id: r.stem_id.clone(),
            word: r.word.clone(),
            offset: r.offset as u64,
            n_subwords: r.n_subwords as u32,
        };
        writeln!(index, "{}", serde_json::to_string(&rec)?)?;
    }
    let rows = dump.vectors().len() / dump.dim();
    blob.write_all(BLOB_MAGIC)?;
    blob.write_all(&BLOB_VERSION.to_le_bytes())?;
    blob.write_all(&(dump.dim() as u32).to_le_bytes())?;
    blob.write_all(&(rows as u64).to_le_bytes())?;
    for v in dump.vectors() {
        blob.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> EmbeddingDump {
        let records = vec![
            EmbeddingRecord {
                stem_id: "s1".into(),
                word: "bee".into(),
                offset: 1,
                n_subwords: 1,
            },
            EmbeddingRecord {
                stem_id: "s2".into(),
                word: "wasp".into(),
                offset: 0,
                n_subwords: 2,
            },
        ];
        EmbeddingDump::new(
            "ref-2.8b",
            "last",
            3,
            records,
            vec![0.5, -1.0, 2.0, 1e-3, 7.0, -0.25],
        )
        .unwrap()
    }

    #[test]
    fn round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let index = dir.path().join("emb.jsonl");
        let (mut i, mut b) = (Vec::new(), Vec::new());
        write_embeddings(&sample(), &mut i, &mut b).unwrap();
        assert_eq!(&b[..8], BLOB_MAGIC);
        std::fs::write(&index, i).unwrap();
        std::fs::write(blob_path(&index), b).unwrap();
        assert_eq!(
            read_embeddings(&index, &blob_path(&index)).unwrap(),
            sample()
        );
    }

    #[test]
    fn truncated_blob_is_rejected() {
        let (mut i, mut b) = (Vec::new(), Vec::new());
        write_embeddings(&sample(), &mut i, &mut b).unwrap();
        b.pop();
        assert!(parse_blob(&b, Path::new("e.bin")).is_err());
        b[0] = b'X';
        assert!(parse_blob(&b, Path::new("e.bin")).is_err());
    }

    #[test]
    fn offsets_past_the_blob_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let index = dir.path().join("emb.jsonl");
        let (mut i, mut b) = (Vec::new(), Vec::new());
        write_embeddings(&sample(), &mut i, &mut b).unwrap();
        let text = String::from_utf8(i)
            .unwrap()
            .replace("\"offset\":1", "\"offset\":9");
        std::fs::write(&index, text).unwrap();
        std::fs::write(blob_path(&index), b).unwrap();
        assert!(matches!(
            read_embeddings(&index, &blob_path(&index)),
            Err(CliError::Data { .. })
        ));
    }
}
