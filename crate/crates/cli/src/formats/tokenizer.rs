//! Byte-level BPE tokenizer files and tokenization maps.
//!
//! The vocabulary is a JSON object from token string to id. The merge list
//! holds one space-separated pair per line; a first line starting with `#`
//! is a version header.
//!
//! A tokenization map is JSON lines: an optional header
//! `{"source_tokenizer": ...}` followed by `{"word": ..., "ids": [...]}`.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::Path;

use clozealign_core::norms::TokenizationMap;
use clozealign_core::tokenizer::TokenizerSpec;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

pub const GPT2_ID: &str = "gpt2";
const GPT2_VOCAB: &str = include_str!("../../data/gpt2/vocab.json");
const GPT2_MERGES: &str = include_str!("../../data/gpt2/merges.txt");

/// The GPT-2 tokenizer shipped with the crate.
pub fn bundled_gpt2() -> TokenizerSpec {
    parse_tokenizer(GPT2_ID, GPT2_VOCAB, GPT2_MERGES, Path::new("gpt2"))
        .expect("bundled tokenizer is valid")
}

pub fn read_tokenizer(id: &str, vocab: &Path, merges: &Path) -> Result<TokenizerSpec> {
    let v = fs::read_to_string(vocab).map_err(|e| CliError::io(vocab, e))?;
    let m = fs::read_to_string(merges).map_err(|e| CliError::io(merges, e))?;
    parse_tokenizer(id, &v, &m, merges)
}

pub fn parse_tokenizer(id: &str, vocab: &str, merges: &str, path: &Path) -> Result<TokenizerSpec> {
    let vocab: BTreeMap<String, u32> =
        serde_json::from_str(vocab).map_err(|e| CliError::format(path, e.line(), e.to_string()))?;
    let mut pairs = Vec::new();
    for (i, line) in merges.lines().enumerate() {
        if (i == 0 && line.starts_with('#')) || line.trim().is_empty() {
            continue;
        }
        let mut parts = line.split(' ');
        match (parts.next(), parts.next(), parts.next()) {
            (Some(a), Some(b), None) if !a.is_empty() && !b.is_empty() => {
                pairs.push((a.to_string(), b.to_string()))
            }
            _ => {
                return Err(CliError::format(
                    path,
                    i + 1,
                    format!("malformed merge `{line}`"),
                ))
            }
        }
    }
    TokenizerSpec::new(id, vocab, pairs).map_err(|e| CliError::data(path, e))
}

#[derive(Serialize, Deserialize)]
struct MapHeader {
    source_tokenizer: String,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MapEntry {
    word: String,
    ids: Vec<u32>,
}

pub fn read_tokenization_map(path: &Path) -> Result<TokenizationMap> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    parse_tokenization_map(&text, path)
}

pub fn parse_tokenization_map(text: &str, path: &Path) -> Result<TokenizationMap> {
    let mut map: Option<TokenizationMap> = None;
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let bad = |e: serde_json::Error| CliError::format(path, i + 1, e.to_string());
        if map.is_none() {
            if let Ok(h) = serde_json::from_str::<MapHeader>(line) {
                map = Some(TokenizationMap::new(h.source_tokenizer));
                continue;
            }
            map = Some(TokenizationMap::new(""));
        }
        let entry: MapEntry = serde_json::from_str(line).map_err(bad)?;
        let m = map.as_mut().expect("initialized above");
        if m.get(&entry.word).is_some() {
            return Err(CliError::format(
                path,
                i + 1,
                format!("word `{}` listed twice", entry.word),
            ));
        }
        m.insert(entry.word, entry.ids)
            .map_err(|e| CliError::format(path, i + 1, e.to_string()))?;
    }
    Ok(map.unwrap_or_else(|| TokenizationMap::new("")))
}

pub fn write_tokenization_map<W: Write>(map: &TokenizationMap, mut w: W) -> std::io::Result<()> {
    let header = MapHeader {
        source_tokenizer: map.source_tokenizer.clone(),
    };
    writeln!(w, "{}", serde_json::to_string(&header)?)?;
    for (word, ids) in map.iter() {
        let entry = MapEntry {
            word: word.to_string(),
            ids: ids.to_vec(),
        };
        writeln!(w, "{}", serde_json::to_string(&entry)?)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_tokenizer_loads() {
        let spec = bundled_gpt2();
        assert_eq!(spec.vocab_size(), 50257);
        assert_eq!(spec.encode(" bee").unwrap(), vec![20697]);
    }

    #[test]
    fn malformed_merge_names_line() {
        let err = parse_tokenizer(
            "t",
            r#"{"a":0,"b":1,"ab":2}"#,
            "#version: 0.2\na b\nab\n",
            Path::new("m.txt"),
        )
        .unwrap_err();
        assert_eq!(err.to_string(), "m.txt:3: malformed merge `ab`");
    }

    #[test]
    fn map_round_trip() {
        let mut map = TokenizationMap::new("gpt2");
        map.insert("bee", vec![20697]).unwrap();
        map.insert("wasp", vec![373, 79]).unwrap();
        let mut buf = Vec::new();
        write_tokenization_map(&map, &mut buf).unwrap();
        let back =
            parse_tokenization_map(std::str::from_utf8(&buf).unwrap(), Path::new("x")).unwrap();
        assert_eq!(back, map);
    }

    #[test]
    fn map_header_is_optional_and_entries_checked() {
        let m = parse_tokenization_map("{\"word\":\"a\",\"ids\":[1]}\n", Path::new("x")).unwrap();
        assert_eq!(m.get("a"), Some(&[1u32][..]));
        let err =
            parse_tokenization_map("{\"word\":\"a\",\"ids\":[]}\n", Path::new("x")).unwrap_err();
        assert!(err.to_string().starts_with("x:1:"));
        let err = parse_tokenization_map(
            "{\"word\":\"a\",\"ids\":[1]}\n{\"word\":\"a\",\"ids\":[2]}\n",
            Path::new("x"),
        )
        .unwrap_err();
        assert!(err.to_string().starts_with("x:2:"));
    }
}
