//! N-gram count tables and Stupid Backoff scoring.
//!
//! Tables are keyed by subword id sequences. Counting never crosses document
//! boundaries, so tables built from document shards and combined with
//! [`NgramCounts::merge`] are identical to a single pass over all documents.

use alloc::boxed::Box;
use alloc::string::String;
use alloc::vec::Vec;

use crate::norms::{ClozeNorms, TokenizationMap};
use crate::tokenizer::TokenizerSpec;
use crate::{Error, FxHashMap, Result};

/// Backoff order and discount. Defaults to a 5-gram model with `alpha = 0.4`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BackoffParams {
    alpha: f64,
    order: usize,
}

impl BackoffParams {
    pub fn new(alpha: f64, order: usize) -> Result<Self> {
        if !(alpha > 0.0 && alpha <= 1.0) {
            return Err(Error::Argument(alloc::format!(
                "backoff alpha must be in (0, 1], got {alpha}"
            )));
        }
        if order == 0 {
            return Err(Error::Argument("backoff order must be at least 1".into()));
        }
        Ok(BackoffParams { alpha, order })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn order(&self) -> usize {
        self.order
    }
}

impl Default for BackoffParams {
    fn default() -> Self {
        BackoffParams {
            alpha: 0.4,
            order: 5,
        }
    }
}

/// Counts of every n-gram of order `1..=max_order`.
#[derive(Debug, Clone, PartialEq)]
pub struct NgramCounts {
    max_order: usize,
    // tables[k - 1] holds k-grams
    tables: Vec<FxHashMap<Box<[u32]>, u64>>,
    total_tokens: u64,
}

impl NgramCounts {
    pub fn new(max_order: usize) -> Result<Self> {
        if max_order == 0 {
            return Err(Error::Argument("max_order must be at least 1".into()));
        }
        Ok(NgramCounts {
            max_order,
            tables: (0..max_order).map(|_| FxHashMap::default()).collect(),
            total_tokens: 0,
        })
    }

    /// Assembles counts from explicit tables, e.g. when reading a file.
    /// `tables[k - 1]` lists the k-grams.
    pub fn from_tables(
        max_order: usize,
        total_tokens: u64,
        tables: Vec<Vec<(Vec<u32>, u64)>>,
    ) -> Result<Self> {
        let mut counts = NgramCounts::new(max_order)?;
        if tables.len() != max_order {
            return Err(Error::InvalidRecord(alloc::format!(
                "expected {max_order} tables, got {}",
                tables.len()
            )));
        }
        for (k, table) in tables.into_iter().enumerate() {
            let target = &mut counts.tables[k];
            target.reserve(table.len());
            for (gram, c) in table {
                if gram.len() != k + 1 {
                    return Err(Error::InvalidRecord(alloc::format!(
                        "{}-gram stored in order-{} table",
                        gram.len(),
                        k + 1
                    )));
                }
                if c == 0 {
                    return Err(Error::InvalidRecord("stored n-gram with zero count".into()));
                }
                if target.insert(gram.into_boxed_slice(), c).is_some() {
                    return Err(Error::InvalidRecord("repeated n-gram".into()));
                }
            }
        }
        counts.total_tokens = total_tokens;
        let unigram_sum: u64 = counts.tables[0].values().sum();
        if unigram_sum != total_tokens {
            return Err(Error::InvalidRecord(alloc::format!(
                "unigram counts sum to {unigram_sum}, header says {total_tokens}"
            )));
        }
        if let Some(gram) = counts.prefix_violation() {
            return Err(Error::InvalidRecord(alloc::format!(
                "n-gram {gram:?} is more frequent than its prefix"
            )));
        }
        Ok(counts)
    }

    pub fn max_order(&self) -> usize {
        self.max_order
    }

    pub fn total_tokens(&self) -> u64 {
        self.total_tokens
    }

    /// Number of distinct n-grams of order `k`.
    pub fn table_len(&self, k: usize) -> usize {
        self.tables.get(k.wrapping_sub(1)).map_or(0, |t| t.len())
    }

    /// Count of an n-gram. The empty sequence counts every token.
    pub fn count(&self, gram: &[u32]) -> u64 {
        match gram.len() {
            0 => self.total_tokens,
            k if k <= self.max_order => self.tables[k - 1].get(gram).copied().unwrap_or(0),
            _ => 0,
        }
    }

    /// Adds every window of one document.
    pub fn add_document(&mut self, tokens: &[u32]) {
        self.total_tokens += tokens.len() as u64;
        for (k, table) in self.tables.iter_mut().enumerate() {
            for window in tokens.windows(k + 1) {
                match table.get_mut(window) {
                    Some(c) => *c += 1,
                    None => {
                        table.insert(window.into(), 1);
                    }
                }
            }
        }
    }

    /// Pointwise sum.
    pub fn merge(mut self, other: &NgramCounts) -> Result<NgramCounts> {
        self.merge_from(other)?;
        Ok(self)
    }

    pub fn merge_from(&mut self, other: &NgramCounts) -> Result<()> {
        if self.max_order != other.max_order {
            return Err(Error::Argument(alloc::format!(
                "cannot merge order {} with order {}",
                self.max_order,
                other.max_order
            )));
        }
        self.total_tokens += other.total_tokens;
        for (mine, theirs) in self.tables.iter_mut().zip(&other.tables) {
            mine.reserve(theirs.len());
            for (gram, &c) in theirs {
                match mine.get_mut(gram) {
                    Some(v) => *v += c,
                    None => {
                        mine.insert(gram.clone(), c);
                    }
                }
            }
        }
        Ok(())
    }

    /// Entries of order `k` in lexicographic id order.
    pub fn sorted_entries(&self, k: usize) -> Vec<(&[u32], u64)> {
        let mut entries: Vec<(&[u32], u64)> = self
            .tables
            .get(k.wrapping_sub(1))
            .map(|t| t.iter().map(|(g, &c)| (&**g, c)).collect())
            .unwrap_or_default();
        entries.sort_unstable_by(|a, b| a.0.cmp(b.0));
        entries
    }

    /// Finds an n-gram whose count exceeds that of its prefix, if any.
    pub fn prefix_violation(&self) -> Option<Vec<u32>> {
        for k in 2..=self.max_order {
            for (gram, &c) in &self.tables[k - 1] {
                if self.count(&gram[..k - 1]) < c {
                    return Some(gram.to_vec());
                }
            }
        }
        None
    }
}

/// Counts a single token sequence treated as one document.
pub fn count_ngrams(tokens: &[u32], max_order: usize) -> Result<NgramCounts> {
    let mut counts = NgramCounts::new(max_order)?;
    counts.add_document(tokens);
    Ok(counts)
}

/// Counts a sequence of documents.
pub fn count_documents<'d, I>(documents: I, max_order: usize) -> Result<NgramCounts>
where
    I: IntoIterator<Item = &'d [u32]>,
{
    let mut counts = NgramCounts::new(max_order)?;
    for doc in documents {
        counts.add_document(doc);
    }
    Ok(counts)
}

/// Stupid Backoff score of `word` after `context`.
///
/// Uses the relative frequency `count(ctx w) / count(ctx)` for the longest
/// attested suffix of the context, multiplied by `alpha` once per dropped
/// context token; the empty context falls back to `count(w) / N`.
pub fn stupid_backoff_score(
    counts: &NgramCounts,
    context: &[u32],
    word: u32,
    params: &BackoffParams,
) -> Result<f64> {
    if counts.total_tokens == 0 {
        return Err(Error::EmptyModel);
    }
    if params.order > counts.max_order {
        return Err(Error::Argument(alloc::format!(
            "backoff order {} exceeds counted order {}",
            params.order,
            counts.max_order
        )));
    }
    if context.len() + 1 > params.order {
        return Err(Error::Argument(alloc::format!(
            "context of {} tokens is too long for order {}",
            context.len(),
            params.order
        )));
    }
    let mut gram = Vec::with_capacity(context.len() + 1);
    gram.extend_from_slice(context);
    gram.push(word);

    let mut factor = 1.0;
    for start in 0..context.len() {
        let hit = counts.count(&gram[start..]);
        if hit > 0 {
            let ctx = counts.count(&gram[start..context.len()]);
            return Ok(factor * hit as f64 / ctx as f64);
        }
        factor *= params.alpha;
    }
    Ok(factor * counts.count(&[word]) as f64 / counts.total_tokens as f64)
}

/// Relative frequency `count(word) / N`.
pub fn unigram_score(counts: &NgramCounts, word: u32) -> Result<f64> {
    if counts.total_tokens == 0 {
        return Err(Error::EmptyModel);
    }
    Ok(counts.count(&[word]) as f64 / counts.total_tokens as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResponseScore {
    pub stem_id: String,
    pub response: String,
    pub first_subword: u32,
    pub backoff: f64,
    pub unigram: f64,
}

/// Scores every human response's first subword after its stem.
///
/// The context is the last `order - 1` ids of the encoded preamble, or the
/// whole preamble when it is shorter.
pub fn score_stems(
    counts: &NgramCounts,
    norms: &ClozeNorms,
    map: &TokenizationMap,
    spec: &TokenizerSpec,
    params: &BackoffParams,
) -> Result<Vec<ResponseScore>> {
    let mut missing = alloc::collections::BTreeSet::new();
    for (_, responses) in norms.iter() {
        for r in responses {
            if map.get(&r.text).is_none() {
                missing.insert(r.text.clone());
            }
        }
    }
    if !missing.is_empty() {
        return Err(Error::Coverage(missing.into_iter().collect()));
    }

    let mut out = Vec::new();
    for (stem, responses) in norms.iter() {
        let ids = spec.encode(&stem.text)?;
        let keep = params.order - 1;
        let context = &ids[ids.len().saturating_sub(keep)..];
        for r in responses {
            let first = map.get(&r.text).expect("coverage checked")[0];
            out.push(ResponseScore {
                stem_id: stem.stem_id.clone(),
                response: r.text.clone(),
                first_subword: first,
                backoff: stupid_backoff_score(counts, context, first, params)?,
                unigram: unigram_score(counts, first)?,
            });
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    const A: u32 = 0;
    const B: u32 = 1;
    const C: u32 = 2;

    #[test]
    fn counts_every_window() {
        let counts = count_ngrams(&[A, B, C], 2).unwrap();
        assert_eq!(counts.count(&[A, B]), 1);
        assert_eq!(counts.count(&[B, C]), 1);
        assert_eq!(counts.count(&[A, C]), 0);
        assert_eq!(counts.table_len(2), 2);
        assert_eq!(counts.table_len(1), 3);
        assert_eq!(counts.total_tokens(), 3);

        let counts = count_ngrams(&[A, A, A], 3).unwrap();
        assert_eq!(counts.count(&[A, A, A]), 1);
        assert_eq!(counts.count(&[A, A]), 2);
        assert_eq!(counts.count(&[A]), 3);

        let empty = count_ngrams(&[], 4).unwrap();
        assert_eq!(empty.total_tokens(), 0);
        assert!((1..=4).all(|k| empty.table_len(k) == 0));
        assert!(count_ngrams(&[A], 0).is_err());
    }

    #[test]
    fn merge_rules() {
        let x = count_ngrams(&[A, B, A, B, C], 3).unwrap();
        let empty = NgramCounts::new(3).unwrap();
        assert_eq!(x.clone().merge(&empty).unwrap(), x);
        let doubled = x.clone().merge(&x).unwrap();
        assert_eq!(doubled.total_tokens(), 10);
        assert_eq!(doubled.count(&[A, B]), 4);
        assert!(x.clone().merge(&NgramCounts::new(2).unwrap()).is_err());
    }

    #[test]
    fn backoff_examples() {
        let counts = count_ngrams(&[A, B, A, B, C], 2).unwrap();
        let p = BackoffParams::new(0.4, 2).unwrap();
        assert_eq!(stupid_backoff_score(&counts, &[A], B, &p).unwrap(), 1.0);
        let s = stupid_backoff_score(&counts, &[C], A, &p).unwrap();
        assert!((s - 0.16).abs() < 1e-15);
        assert_eq!(stupid_backoff_score(&counts, &[A], 99, &p).unwrap(), 0.0);
        assert_eq!(unigram_score(&counts, A).unwrap(), 0.4);
        assert_eq!(unigram_score(&counts, 99).unwrap(), 0.0);
        let total: f64 = [A, B, C]
            .iter()
            .map(|&w| unigram_score(&counts, w).unwrap())
            .sum();
        assert!((total - 1.0).abs() < 1e-15);
    }

    #[test]
    fn backoff_errors() {
        let empty = NgramCounts::new(2).unwrap();
        let p = BackoffParams::new(0.4, 2).unwrap();
        assert_eq!(
            stupid_backoff_score(&empty, &[], A, &p),
            Err(Error::EmptyModel)
        );
        assert_eq!(unigram_score(&empty, A), Err(Error::EmptyModel));
        let counts = count_ngrams(&[A, B], 2).unwrap();
        assert!(stupid_backoff_score(&counts, &[A, A], B, &p).is_err());
        let too_high = BackoffParams::new(0.4, 3).unwrap();
        assert!(stupid_backoff_score(&counts, &[A], B, &too_high).is_err());
        assert!(BackoffParams::new(0.0, 2).is_err());
        assert!(BackoffParams::new(1.5, 2).is_err());
        assert!(BackoffParams::new(0.4, 0).is_err());
    }

    #[test]
    fn from_tables_checks_totals() {
        let ok = NgramCounts::from_tables(1, 2, vec![vec![(vec![A], 2)]]).unwrap();
        assert_eq!(ok.count(&[A]), 2);
        assert!(NgramCounts::from_tables(1, 3, vec![vec![(vec![A], 2)]]).is_err());
        assert!(NgramCounts::from_tables(2, 2, vec![vec![(vec![A], 2)]]).is_err());
    }
}
