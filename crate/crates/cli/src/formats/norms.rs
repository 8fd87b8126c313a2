//! Cloze norms CSV: `stem_id,stem_text,response_text,response_count,cloze_prob`.
//!
//! `cloze_prob` may be empty; when present it is checked against the counts.
//! Extra columns are ignored.

use std::fs::File;
use std::path::Path;

use clozealign_core::norms::{ClozeNorms, NormsRecord, NormsWarning};

use crate::error::{CliError, Result};

const COLUMNS: [&str; 5] = [
    "stem_id",
    "stem_text",
    "response_text",
    "response_count",
    "cloze_prob",
];

pub fn read_norms(path: &Path) -> Result<(ClozeNorms, Vec<NormsWarning>)> {
    let file = File::open(path).map_err(|e| CliError::io(path, e))?;
    parse_norms(file, path)
}

pub fn parse_norms<R: std::io::Read>(
    reader: R,
    path: &Path,
) -> Result<(ClozeNorms, Vec<NormsWarning>)> {
    let mut rdr = csv::ReaderBuilder::new()
        .flexible(false)
        .from_reader(reader);
    let headers = rdr
        .headers()
        .map_err(|e| CliError::format(path, 1, e.to_string()))?
        .clone();
    let mut cols = [0usize; 5];
    for (slot, name) in cols.iter_mut().zip(COLUMNS) {
        *slot = headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| CliError::format(path, 1, format!("missing column `{name}`")))?;
    }

    let mut records = Vec::new();
    for row in rdr.records() {
        let row = row.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize);
            CliError::format(path, line, e.to_string())
        })?;
        let line = row.position().map_or(0, |p| p.line() as usize);
        let field = |i: usize| row.get(cols[i]).unwrap_or("");
        let count = field(3).trim().parse::<u64>().map_err(|_| {
            CliError::format(path, line, format!("bad response_count `{}`", field(3)))
        })?;
        let prob = match field(4).trim() {
            "" => None,
            p => Some(
                p.parse::<f64>()
                    .map_err(|_| CliError::format(path, line, format!("bad cloze_prob `{p}`")))?,
            ),
        };
        records.push(NormsRecord {
            stem_id: field(0).trim().to_string(),
            stem_text: field(1).to_string(),
            response_text: field(2).trim().to_string(),
            count,
            cloze_prob: prob,
        });
    }
    ClozeNorms::from_records(records).map_err(|e| CliError::data(path, e))
}

/// Writes norms back out with computed probabilities.
pub fn write_norms<W: std::io::Write>(norms: &ClozeNorms, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let to_err = |e: csv::Error| CliError::Config(format!("writing norms: {e}"));
    w.write_record(COLUMNS).map_err(to_err)?;
    for (stem, responses) in norms.iter() {
        for r in responses {
            w.write_record([
                stem.stem_id.as_str(),
                stem.text.as_str(),
                r.text.as_str(),
                &r.count.to_string(),
                &r.cloze_prob.to_string(),
            ])
            .map_err(to_err)?;
        }
    }
    w.flush().map_err(|e| CliError::io("<output>", e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<(ClozeNorms, Vec<NormsWarning>)> {
        parse_norms(text.as_bytes(), Path::new("norms.csv"))
    }

    #[test]
    fn reads_quoted_stems_and_optional_probabilities() {
        let (n, warnings) = parse(
            "stem_id,stem_text,response_text,response_count,cloze_prob\n\
             s1,\"He hated bees, and feared encountering a\",hive,6,\n\
             s1,\"He hated bees, and feared encountering a\",wasp,4,0.4\n",
        )
        .unwrap();
        assert_eq!(n.len(), 1);
        assert_eq!(n.stem("s1").unwrap().n_words, 7);
        assert_eq!(n.responses("s1").unwrap()[0].cloze_prob, 0.6);
        assert_eq!(warnings.len(), 1);
    }

    #[test]
    fn errors_name_the_line() {
        let err = parse(
            "stem_id,stem_text,response_text,response_count,cloze_prob\n\
             s1,a b,x,3,\n\
             s1,a b,y,many,\n",
        )
        .unwrap_err();
        assert_eq!(err.to_string(), "norms.csv:3: bad response_count `many`");
        assert_eq!(err.exit_code(), 3);
    }

    #[test]
    fn missing_column_is_reported() {
        let err = parse("stem_id,stem_text,response_text\ns,t,r\n").unwrap_err();
        assert!(err.to_string().contains("response_count"));
    }

    #[test]
    fn inconsistent_probability_is_rejected() {
        let err = parse(
            "stem_id,stem_text,response_text,response_count,cloze_prob\n\
             s1,a b,x,1,0.9\n\
             s1,a b,y,1,0.5\n",
        )
        .unwrap_err();
        assert!(matches!(err, CliError::Data { .. }));
    }

    #[test]
    fn round_trips_through_writer() {
        let text = "stem_id,stem_text,response_text,response_count,cloze_prob\n\
                    s1,\"a, b\",x,3,\n\
                    s1,\"a, b\",y,1,\n";
        let (n, _) = parse(text).unwrap();
        let mut out = Vec::new();
        write_norms(&n, &mut out).unwrap();
        let (again, _) = parse(std::str::from_utf8(&out).unwrap()).unwrap();
        assert_eq!(again, n);
    }
}
