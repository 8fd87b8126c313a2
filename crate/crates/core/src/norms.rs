//! Cloze completion norms, word-to-subword maps, and response subword
//! statistics.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::tokenizer::{first_subword, TokenizerSpec};
use crate::{Error, FxHashMap, FxHashSet, Result};

/// Tolerance between a stated cloze probability and `count / total`.
pub const PROB_CONSISTENCY_TOL: f64 = 1e-6;

/// Minimum number of responses per stem in the validated norms.
pub const MIN_RESPONSES_PER_STEM: u64 = 100;

#[derive(Debug, Clone, PartialEq)]
pub struct SentenceStem {
    pub stem_id: String,
    /// Preamble text; the blank after it is implied.
    pub text: String,
    pub n_words: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClozeResponse {
    pub stem_id: String,
    pub text: String,
    pub count: u64,
    pub cloze_prob: f64,
}

/// One row of a norms file before validation.
#[derive(Debug, Clone, PartialEq)]
pub struct NormsRecord {
    pub stem_id: String,
    pub stem_text: String,
    pub response_text: String,
    pub count: u64,
    pub cloze_prob: Option<f64>,
}

/// Non-fatal findings produced while assembling norms.
#[derive(Debug, Clone, PartialEq)]
pub enum NormsWarning {
    FewResponses { stem_id: String, total: u64 },
}

/// Human cloze responses grouped by sentence stem.
#[derive(Debug, Clone, PartialEq)]
pub struct ClozeNorms {
    stems: Vec<SentenceStem>,
    responses: Vec<Vec<ClozeResponse>>,
    index: BTreeMap<String, usize>,
}

pub fn count_words(text: &str) -> usize {
    text.split_whitespace().count()
}

impl ClozeNorms {
    /// Validates records and groups them by stem, in order of first
    /// appearance. Rows with a zero count are dropped; a stem left without
    /// responses is an error.
    pub fn from_records<I>(records: I) -> Result<(Self, Vec<NormsWarning>)>
    where
        I: IntoIterator<Item = NormsRecord>,
    {
        let mut stems: Vec<SentenceStem> = Vec::new();
        let mut grouped: Vec<Vec<NormsRecord>> = Vec::new();
        let mut index: BTreeMap<String, usize> = BTreeMap::new();
        let mut seen: FxHashSet<(String, String)> = FxHashSet::default();

        for rec in records {
            if rec.stem_id.is_empty() {
                return Err(Error::InvalidRecord("empty stem_id".into()));
            }
            if rec.stem_text.trim().is_empty() {
                return Err(Error::InvalidRecord(alloc::format!(
                    "stem `{}` has empty text",
                    rec.stem_id
                )));
            }
            if rec.response_text.is_empty() {
                return Err(Error::InvalidRecord(alloc::format!(
                    "stem `{}` has an empty response",
                    rec.stem_id
                )));
            }
            if !seen.insert((rec.stem_id.clone(), rec.response_text.clone())) {
                return Err(Error::DuplicateRecord {
                    stem_id: rec.stem_id,
                    response: rec.response_text,
                });
            }
            let slot = match index.get(&rec.stem_id) {
                Some(&i) => {
                    if stems[i].text != rec.stem_text {
                        return Err(Error::InvalidRecord(alloc::format!(
                            "stem `{}` has conflicting texts",
                            rec.stem_id
                        )));
                    }
                    i
                }
                None => {
                    let i = stems.len();
                    index.insert(rec.stem_id.clone(), i);
                    stems.push(SentenceStem {
                        stem_id: rec.stem_id.clone(),
                        n_words: count_words(&rec.stem_text),
                        text: rec.stem_text.clone(),
                    });
                    grouped.push(Vec::new());
                    i
                }
            };
            grouped[slot].push(rec);
        }

        let mut warnings = Vec::new();
        let mut responses = Vec::with_capacity(grouped.len());
        for (stem, recs) in stems.iter().zip(grouped) {
            let total: u64 = recs.iter().map(|r| r.count).sum();
            if total == 0 {
                return Err(Error::EmptyStem(stem.stem_id.clone()));
            }
            if total < MIN_RESPONSES_PER_STEM {
                warnings.push(NormsWarning::FewResponses {
                    stem_id: stem.stem_id.clone(),
                    total,
                });
            }
            let mut out = Vec::with_capacity(recs.len());
            for r in recs.into_iter().filter(|r| r.count > 0) {
                let computed = r.count as f64 / total as f64;
                if let Some(stated) = r.cloze_prob {
                    if !stated.is_finite() || libm::fabs(stated - computed) > PROB_CONSISTENCY_TOL {
                        return Err(Error::Consistency {
                            stem_id: r.stem_id,
                            response: r.response_text,
                            stated,
                            computed,
                        });
                    }
                }
                out.push(ClozeResponse {
                    stem_id: r.stem_id,
                    text: r.response_text,
                    count: r.count,
                    cloze_prob: computed,
                });
            }
            responses.push(out);
        }

        Ok((
            ClozeNorms {
                stems,
                responses,
                index,
            },
            warnings,
        ))
    }

    pub fn stems(&self) -> &[SentenceStem] {
        &self.stems
    }

    pub fn len(&self) -> usize {
        self.stems.len()
    }

    pub fn is_empty(&self) -> bool {
        self.stems.is_empty()
    }

    pub fn stem(&self, stem_id: &str) -> Option<&SentenceStem> {
        self.index.get(stem_id).map(|&i| &self.stems[i])
    }

    pub fn responses(&self, stem_id: &str) -> Option<&[ClozeResponse]> {
        self.index
            .get(stem_id)
            .map(|&i| self.responses[i].as_slice())
    }

    /// Stems paired with their responses, in load order.
    pub fn iter(&self) -> impl Iterator<Item = (&SentenceStem, &[ClozeResponse])> {
        self.stems
            .iter()
            .zip(self.responses.iter().map(Vec::as_slice))
    }

    pub fn total_count(&self, stem_id: &str) -> Option<u64> {
        self.responses(stem_id)
            .map(|rs| rs.iter().map(|r| r.count).sum())
    }

    /// Distinct response strings, sorted.
    pub fn response_types(&self) -> BTreeSet<&str> {
        self.responses
            .iter()
            .flatten()
            .map(|r| r.text.as_str())
            .collect()
    }
}

/// Precomputed subword ids for response strings.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TokenizationMap {
    pub source_tokenizer: String,
    entries: BTreeMap<String, Vec<u32>>,
}

impl TokenizationMap {
    pub fn new(source_tokenizer: impl Into<String>) -> Self {
        TokenizationMap {
            source_tokenizer: source_tokenizer.into(),
            entries: BTreeMap::new(),
        }
    }

    pub fn insert(&mut self, word: impl Into<String>, ids: Vec<u32>) -> Result<()> {
        let word = word.into();
        if ids.is_empty() {
            return Err(Error::InvalidRecord(alloc::format!(
                "empty id list for `{word}`"
            )));
        }
        self.entries.insert(word, ids);
        Ok(())
    }

    pub fn get(&self, word: &str) -> Option<&[u32]> {
        self.entries.get(word).map(Vec::as_slice)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &[u32])> {
        self.entries
            .iter()
            .map(|(w, ids)| (w.as_str(), ids.as_slice()))
    }

    /// Encodes each word with a leading space.
    pub fn build<'w, I>(spec: &TokenizerSpec, words: I) -> Result<Self>
    where
        I: IntoIterator<Item = &'w str>,
    {
        let mut map = TokenizationMap::new(spec.id());
        for word in words {
            if word.is_empty() {
                return Err(Error::Argument("empty word".into()));
            }
            let mut spaced = String::with_capacity(word.len() + 1);
            spaced.push(' ');
            spaced.push_str(word);
            map.insert(word, spec.encode(&spaced)?)?;
        }
        Ok(map)
    }

    /// Checks the map against a tokenizer's name and vocabulary size.
    pub fn validate_against(&self, spec: &TokenizerSpec) -> Result<()> {
        if self.source_tokenizer != spec.id() {
            return Err(Error::Compatibility(alloc::format!(
                "map built with `{}`, tokenizer is `{}`",
                self.source_tokenizer,
                spec.id()
            )));
        }
        let size = spec.vocab_size() as u64;
        for (word, ids) in &self.entries {
            if let Some(bad) = ids.iter().find(|&&id| u64::from(id) >= size) {
                return Err(Error::Compatibility(alloc::format!(
                    "id {bad} for `{word}` exceeds vocabulary size {size}"
                )));
            }
        }
        Ok(())
    }

    /// Head of the entry for `word`, falling back to encoding it.
    pub fn first_subword(&self, spec: &TokenizerSpec, word: &str) -> Result<u32> {
        match self.get(word) {
            Some(ids) => Ok(ids[0]),
            None => first_subword(spec, word, true),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SubwordStats {
    /// Share of response tokens (weighted by count) that are one subword.
    pub single_token_fraction: f64,
    /// Mean subword count over unique response types.
    pub mean_subwords: f64,
    /// Population standard deviation over unique response types.
    pub sd_subwords: f64,
}

pub fn response_subword_stats(norms: &ClozeNorms, map: &TokenizationMap) -> Result<SubwordStats> {
    let mut missing = BTreeSet::new();
    let mut single = 0u64;
    let mut total = 0u64;
    let mut type_lengths: FxHashMap<&str, usize> = FxHashMap::default();
    for (_, responses) in norms.iter() {
        for r in responses {
            match map.get(&r.text) {
                Some(ids) => {
                    total += r.count;
                    if ids.len() == 1 {
                        single += r.count;
                    }
                    type_lengths.insert(r.text.as_str(), ids.len());
                }
                None => {
                    missing.insert(r.text.to_string());
                }
            }
        }
    }
    if !missing.is_empty() {
        return Err(Error::Coverage(missing.into_iter().collect()));
    }
    if total == 0 {
        return Err(Error::Degenerate("no responses".into()));
    }
    // sorted so the floating-point sum does not depend on hash order
    let mut lengths: Vec<usize> = type_lengths.into_values().collect();
    lengths.sort_unstable();
    let n = lengths.len() as f64;
    let mean = lengths.iter().sum::<usize>() as f64 / n;
    let var = lengths
        .iter()
        .map(|&l| {
            let d = l as f64 - mean;
            d * d
        })
        .sum::<f64>()
        / n;
    Ok(SubwordStats {
        single_token_fraction: single as f64 / total as f64,
        mean_subwords: mean,
        sd_subwords: libm::sqrt(var),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn rec(stem: &str, resp: &str, count: u64, prob: Option<f64>) -> NormsRecord {
        NormsRecord {
            stem_id: stem.into(),
            stem_text: "He hated bees and feared encountering a".into(),
            response_text: resp.into(),
            count,
            cloze_prob: prob,
        }
    }

    #[test]
    fn probabilities_from_counts() {
        let (norms, warnings) = ClozeNorms::from_records(vec![
            rec("s1", "hive", 50, None),
            rec("s1", "bee", 50, None),
        ])
        .unwrap();
        assert!(warnings.is_empty());
        let probs: Vec<f64> = norms
            .responses("s1")
            .unwrap()
            .iter()
            .map(|r| r.cloze_prob)
            .collect();
        assert_eq!(probs, vec![0.5, 0.5]);
        assert_eq!(norms.stem("s1").unwrap().n_words, 7);

        let (norms, warnings) =
            ClozeNorms::from_records(vec![rec("s1", "a", 3, None), rec("s1", "b", 1, Some(0.25))])
                .unwrap();
        assert_eq!(warnings.len(), 1);
        let probs: Vec<f64> = norms
            .responses("s1")
            .unwrap()
            .iter()
            .map(|r| r.cloze_prob)
            .collect();
        assert_eq!(probs, vec![0.75, 0.25]);
    }

    #[test]
    fn rejects_duplicates_and_inconsistency() {
        let err = ClozeNorms::from_records(vec![rec("s1", "a", 3, None), rec("s1", "a", 1, None)])
            .unwrap_err();
        assert!(matches!(err, Error::DuplicateRecord { .. }));
        let err =
            ClozeNorms::from_records(vec![rec("s1", "a", 3, Some(0.7)), rec("s1", "b", 1, None)])
                .unwrap_err();
        assert!(matches!(err, Error::Consistency { .. }));
        let err = ClozeNorms::from_records(vec![rec("s1", "a", 0, None)]).unwrap_err();
        assert_eq!(err, Error::EmptyStem("s1".into()));
    }

    #[test]
    fn subword_stats_weights() {
        let (norms, _) = ClozeNorms::from_records(vec![
            rec("s1", "a", 3, None),
            rec("s1", "b", 1, None),
            rec("s2", "a", 4, None),
        ])
        .unwrap();
        let mut map = TokenizationMap::new("t");
        map.insert("a", vec![1]).unwrap();
        map.insert("b", vec![2, 3, 4]).unwrap();
        let s = response_subword_stats(&norms, &map).unwrap();
        assert_eq!(s.single_token_fraction, 7.0 / 8.0);
        assert_eq!(s.mean_subwords, 2.0);
        assert_eq!(s.sd_subwords, 1.0);

        let mut all_single = TokenizationMap::new("t");
        all_single.insert("a", vec![1]).unwrap();
        all_single.insert("b", vec![2]).unwrap();
        let s = response_subword_stats(&norms, &all_single).unwrap();
        assert_eq!(
            (s.single_token_fraction, s.mean_subwords, s.sd_subwords),
            (1.0, 1.0, 0.0)
        );
    }

    #[test]
    fn subword_stats_reports_missing_words() {
        let (norms, _) =
            ClozeNorms::from_records(vec![rec("s1", "a", 3, None), rec("s1", "b", 1, None)])
                .unwrap();
        let mut map = TokenizationMap::new("t");
        map.insert("a", vec![1]).unwrap();
        assert_eq!(
            response_subword_stats(&norms, &map).unwrap_err(),
            Error::Coverage(vec!["b".into()])
        );
    }
}
