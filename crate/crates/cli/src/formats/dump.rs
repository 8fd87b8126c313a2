//! Prediction dumps as JSON lines.
//!
//! Line 1 is the header:
//! `{"model_id", "n_params", "checkpoint_step", "dedup", "tokenizer", "top_k", "leading_space"}`.
//! Every following line is one stem:
//! `{"stem_id", "top": [[token_id, prob], ...], "responses": [{"text", "first_subword_id", "prob", "rank"}, ...]}`.

use std::fs;
use std::io::Write;
use std::path::Path;

use clozealign_core::predictions::{
    DumpHeader, PredictionDump, ResponsePrediction, StemPrediction,
};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct HeaderLine {
    model_id: String,
    n_params: u64,
    checkpoint_step: u64,
    dedup: bool,
    tokenizer: String,
    top_k: usize,
    #[serde(default = "default_leading_space")]
    leading_space: bool,
}

fn default_leading_space() -> bool {
    true
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ResponseLine {
    text: String,
    first_subword_id: u32,
    prob: f64,
    rank: u64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct StemLine {
    stem_id: String,
    top: Vec<(u32, f64)>,
    responses: Vec<ResponseLine>,
}

pub fn read_dump(path: &Path) -> Result<PredictionDump> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    parse_dump(&text, path)
}

pub fn parse_dump(text: &str, path: &Path) -> Result<PredictionDump> {
    let mut lines = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty());
    let (i, first) = lines
        .next()
        .ok_or_else(|| CliError::format(path, 1, "empty prediction dump"))?;
    let h: HeaderLine = serde_json::from_str(first)
        .map_err(|e| CliError::format(path, i + 1, format!("bad header: {e}")))?;
    let header = DumpHeader {
        model_id: h.model_id,
        n_params: h.n_params,
        checkpoint_step: h.checkpoint_step,
        dedup: h.dedup,
        tokenizer: h.tokenizer,
        top_k: h.top_k,
        leading_space: h.leading_space,
    };
    let mut stems = Vec::new();
    for (i, line) in lines {
        let s: StemLine =
            serde_json::from_str(line).map_err(|e| CliError::format(path, i + 1, e.to_string()))?;
        stems.push(StemPrediction {
            stem_id: s.stem_id,
            top: s.top,
            responses: s
                .responses
                .into_iter()
                .map(|r| ResponsePrediction {
                    text: r.text,
                    first_subword_id: r.first_subword_id,
                    prob: r.prob,
                    rank: r.rank,
                })
                .collect(),
        });
    }
    PredictionDump::new(header, stems).map_err(|e| CliError::data(path, e))
}

pub fn write_dump<W: Write>(dump: &PredictionDump, mut w: W) -> std::io::Result<()> {
    let h = dump.header();
    let header = HeaderLine {
        model_id: h.model_id.clone(),
        n_params: h.n_params,
        checkpoint_step: h.checkpoint_step,
        dedup: h.dedup,
        tokenizer: h.tokenizer.clone(),
        top_k: h.top_k,
        leading_space: h.leading_space,
    };
    writeln!(w, "{}", serde_json::to_string(&header)?)?;
    for s in dump.stems() {
        let line = StemLine {
            stem_id: s.stem_id.clone(),
            top: s.top.clone(),
            responses: s
                .responses
                .iter()
                .map(|r| ResponseLine {
                    text: r.text.clone(),
                    first_subword_id: r.first_subword_id,
                    prob: r.prob,
                    rank: r.rank,
                })
                .collect(),
        };
        writeln!(w, "{}", serde_json::to_string(&line)?)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = r#"{"model_id":"pythia-70m","n_params":70426624,"checkpoint_step":143000,"dedup":true,"tokenizer":"gpt2","top_k":2,"leading_space":true}
{"stem_id":"s1","top":[[20697,0.25],[30077,0.125]],"responses":[{"text":"bee","first_subword_id":20697,"prob":0.25,"rank":1},{"text":"wasp","first_subword_id":373,"prob":0.001,"rank":250}]}
"#;

    #[test]
    fn parses_and_round_trips() {
        let d = parse_dump(SAMPLE, Path::new("d.jsonl")).unwrap();
        assert_eq!(d.header().n_params, 70426624);
        assert_eq!(d.stems()[0].responses[1].rank, 250);
        let mut out = Vec::new();
        write_dump(&d, &mut out).unwrap();
        assert_eq!(std::str::from_utf8(&out).unwrap(), SAMPLE);
    }

    #[test]
    fn errors_name_the_line() {
        let broken = SAMPLE.replace("\"rank\":250", "\"rank\":\"x\"");
        let err = parse_dump(&broken, Path::new("d.jsonl")).unwrap_err();
        assert!(err.to_string().starts_with("d.jsonl:2:"), "{err}");
        let unsorted = SAMPLE.replace("[30077,0.125]", "[30077,0.5]");
        assert!(matches!(
            parse_dump(&unsorted, Path::new("d")),
            Err(CliError::Data { .. })
        ));
        assert!(parse_dump("", Path::new("d")).is_err());
    }

    #[test]
    fn unknown_fields_are_rejected() {
        let extra = SAMPLE.replace("\"top_k\":2", "\"top_k\":2,\"surprise\":1");
        assert!(parse_dump(&extra, Path::new("d")).is_err());
    }
}
