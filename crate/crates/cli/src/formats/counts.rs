//! Binary n-gram count files and corpus counting.
//!
//! Layout, little-endian: magic `CLZNGRAM`, `u32` version, `u32` max order,
//! `u64` token total, one `u64` entry count per order, then for each order
//! `k` its entries sorted by id sequence, each `k` `u32` ids and a `u64`
//! count.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use clozealign_core::ngram::NgramCounts;
use clozealign_core::tokenizer::TokenizerSpec;
use rayon::prelude::*;

use crate::error::{CliError, Result};

pub const COUNTS_MAGIC: &[u8; 8] = b"CLZNGRAM";
pub const COUNTS_VERSION: u32 = 1;

/// How corpus lines are turned into documents.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CorpusFormat {
    /// One document of raw text per line.
    #[default]
    Text,
    /// One document per line as whitespace-separated token ids.
    Ids,
}

pub fn write_counts<W: Write>(counts: &NgramCounts, w: W) -> std::io::Result<()> {
    let mut w = BufWriter::new(w);
    w.write_all(COUNTS_MAGIC)?;
    w.write_all(&COUNTS_VERSION.to_le_bytes())?;
    w.write_all(&(counts.max_order() as u32).to_le_bytes())?;
    w.write_all(&counts.total_tokens().to_le_bytes())?;
    for k in 1..=counts.max_order() {
        w.write_all(&(counts.table_len(k) as u64).to_le_bytes())?;
    }
    for k in 1..=counts.max_order() {
        for (gram, c) in counts.sorted_entries(k) {
            for id in gram {
                w.write_all(&id.to_le_bytes())?;
            }
            w.write_all(&c.to_le_bytes())?;
        }
    }
    w.flush()
}

pub fn save_counts(counts: &NgramCounts, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| CliError::io(path, e))?;
    write_counts(counts, file).map_err(|e| CliError::io(path, e))
}

pub fn read_counts(path: &Path) -> Result<NgramCounts> {
    let file = File::open(path).map_err(|e| CliError::io(path, e))?;
    parse_counts(BufReader::new(file), path)
}

pub fn parse_counts<R: Read>(mut r: R, path: &Path) -> Result<NgramCounts> {
    let bad = |m: &str| CliError::format(path, 0, m);
    let mut u32b = [0u8; 4];
    let mut u64b = [0u8; 8];
    let mut magic = [0u8; 8];
    let mut read = |buf: &mut [u8]| r.read_exact(buf).map_err(|_| bad("truncated count file"));
    read(&mut magic)?;
    if &magic != COUNTS_MAGIC {
        return Err(bad("not an n-gram count file"));
    }
    read(&mut u32b)?;
    let version = u32::from_le_bytes(u32b);
    if version != COUNTS_VERSION {
        return Err(CliError::format(
            path,
            0,
            format!("unsupported count file version {version}"),
        ));
    }
    read(&mut u32b)?;
    let max_order = u32::from_le_bytes(u32b) as usize;
    if max_order == 0 || max_order > 64 {
        return Err(bad("implausible n-gram order"));
    }
    read(&mut u64b)?;
    let total = u64::from_le_bytes(u64b);
    let mut lens = Vec::with_capacity(max_order);
    for _ in 0..max_order {
        read(&mut u64b)?;
        lens.push(u64::from_le_bytes(u64b));
    }
    let mut tables = Vec::with_capacity(max_order);
    for (k, &len) in lens.iter().enumerate() {
        let mut entries = Vec::with_capacity(len.min(1 << 24) as usize);
        for _ in 0..len {
            let mut gram = Vec::with_capacity(k + 1);
            for _ in 0..=k {
                read(&mut u32b)?;
                gram.push(u32::from_le_bytes(u32b));
            }
            read(&mut u64b)?;
            entries.push((gram, u64::from_le_bytes(u64b)));
        }
        tables.push(entries);
    }
    let mut extra = [0u8; 1];
    if r.read(&mut extra).map_err(|e| CliError::io(path, e))? != 0 {
        return Err(bad("trailing bytes after count tables"));
    }
    NgramCounts::from_tables(max_order, total, tables).map_err(|e| CliError::data(path, e))
}

const BATCH_LINES: usize = 8192;

/// Counts a corpus file, one document per non-blank line. Batches of lines
/// are counted in parallel and merged; the result does not depend on the
/// thread count.
pub fn count_corpus(
    path: &Path,
    spec: &TokenizerSpec,
    format: CorpusFormat,
    max_order: usize,
) -> Result<NgramCounts> {
    let file = File::open(path).map_err(|e| CliError::io(path, e))?;
    let mut total = NgramCounts::new(max_order)?;
    let mut batch: Vec<(usize, String)> = Vec::with_capacity(BATCH_LINES);
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| CliError::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        batch.push((i + 1, line));
        if batch.len() == BATCH_LINES {
            total.merge_from(&count_batch(&batch, spec, format, max_order, path)?)?;
            batch.clear();
        }
    }
    if !batch.is_empty() {
        total.merge_from(&count_batch(&batch, spec, format, max_order, path)?)?;
    }
    log::info!(
        "counted {} tokens from {}",
        total.total_tokens(),
        path.display()
    );
    Ok(total)
}

fn count_batch(
    batch: &[(usize, String)],
    spec: &TokenizerSpec,
    format: CorpusFormat,
    max_order: usize,
    path: &Path,
) -> Result<NgramCounts> {
    batch
        .par_chunks(256)
        .map(|chunk| {
            let mut counts = NgramCounts::new(max_order)?;
            for (line_no, line) in chunk {
                let ids = document_ids(line, spec, format)
                    .map_err(|m| CliError::format(path, *line_no, m))?;
                counts.add_document(&ids);
            }
            Ok(counts)
        })
        .try_reduce(
            || NgramCounts::new(max_order).expect("order validated"),
            |a, b| Ok(a.merge(&b)?),
        )
}

fn document_ids(
    line: &str,
    spec: &TokenizerSpec,
    format: CorpusFormat,
) -> std::result::Result<Vec<u32>, String> {
    match format {
        CorpusFormat::Text => spec.encode(line).map_err(|e| e.to_string()),
        CorpusFormat::Ids => line
            .split_whitespace()
            .map(|t| t.parse::<u32>().map_err(|_| format!("bad token id `{t}`")))
            .collect(),
    }
}
