//! Semantic spaces over completion words and their comparison.
//!
//! Two constructions are provided: count-based spaces (top-k co-occurrence
//! counts → PPMI → row normalization → PCA) and pooled contextual
//! embeddings. Spaces are compared by correlating the upper triangles of
//! their cosine-similarity matrices (RSA) and by k-nearest-neighbor overlap.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;
use core::cmp::Ordering;

use crate::linalg::{dot, symmetric_eigen, Matrix};
use crate::stats::{spearman, PairedSeries};
use crate::{Error, FxHashMap, Result};

/// Top-k cutoff for completion sets.
pub const DEFAULT_TOPK: usize = 40;
/// Neighborhood size for the overlap headline.
pub const DEFAULT_NEIGHBORS: usize = 20;
/// PCA dimensionalities swept by default.
pub const DEFAULT_DIMS: [usize; 5] = [10, 25, 50, 100, 200];

/// Case-folded key used to identify words across sources.
pub fn fold(word: &str) -> String {
    word.to_lowercase()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SpaceSource {
    Human,
    Model(String),
    PpmiPca,
    PooledEmbedding,
}

/// Word vectors, one row per word.
#[derive(Debug, Clone, PartialEq)]
pub struct SemanticSpace {
    words: Vec<String>,
    vectors: Matrix,
    source: SpaceSource,
}

impl SemanticSpace {
    pub fn new(words: Vec<String>, vectors: Matrix, source: SpaceSource) -> Result<Self> {
        if words.len() != vectors.rows() {
            return Err(Error::Argument(alloc::format!(
                "{} words for {} vectors",
                words.len(),
                vectors.rows()
            )));
        }
        for (i, w) in words.iter().enumerate() {
            let row = vectors.row(i);
            if row.iter().any(|v| !v.is_finite()) {
                return Err(Error::Domain(alloc::format!(
                    "vector for `{w}` is not finite"
                )));
            }
            if row.iter().all(|&v| v == 0.0) {
                return Err(Error::DegenerateVector(w.clone()));
            }
        }
        Ok(SemanticSpace {
            words,
            vectors,
            source,
        })
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    pub fn vectors(&self) -> &Matrix {
        &self.vectors
    }

    pub fn source(&self) -> &SpaceSource {
        &self.source
    }

    pub fn dim(&self) -> usize {
        self.vectors.cols()
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn with_source(mut self, source: SpaceSource) -> Self {
        self.source = source;
        self
    }
}

/// Pairwise cosine similarities over an ordered word set.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityMatrix {
    words: Vec<String>,
    values: Matrix,
}

impl SimilarityMatrix {
    /// Wraps precomputed similarities after checking symmetry, a unit
    /// diagonal and the [-1, 1] range.
    pub fn new(words: Vec<String>, values: Matrix) -> Result<Self> {
        let n = words.len();
        if values.rows() != n || values.cols() != n {
            return Err(Error::Argument(
                "similarity matrix shape does not match words".into(),
            ));
        }
        if !values.is_symmetric() {
            return Err(Error::Argument("similarity matrix is not symmetric".into()));
        }
        for i in 0..n {
            if values.get(i, i) != 1.0 {
                return Err(Error::Argument("similarity diagonal must be 1".into()));
            }
        }
        if values.as_slice().iter().any(|v| !(-1.0..=1.0).contains(v)) {
            return Err(Error::Domain("similarities must lie in [-1, 1]".into()));
        }
        Ok(SimilarityMatrix { words, values })
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    pub fn values(&self) -> &Matrix {
        &self.values
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values.get(i, j)
    }

    /// Entries strictly above the diagonal, row by row.
    pub fn upper_triangle(&self) -> Vec<f64> {
        let n = self.words.len();
        let mut out = Vec::with_capacity(n * n.saturating_sub(1) / 2);
        for i in 0..n {
            for j in i + 1..n {
                out.push(self.values.get(i, j));
            }
        }
        out
    }
}

/// Scored completions per stem, e.g. human counts or model probabilities.
#[derive(Debug, Clone, Default)]
pub struct ScoredCompletions {
    by_stem: BTreeMap<String, Vec<(String, f64)>>,
}

impl ScoredCompletions {
    pub fn new() -> Self {
        Self::default()
    }

    /// Records a completion; a repeated word keeps its highest score.
    pub fn insert(&mut self, stem_id: &str, word: impl Into<String>, score: f64) {
        let word = word.into();
        let entries = self.by_stem.entry(stem_id.into()).or_default();
        match entries.iter_mut().find(|(w, _)| *w == word) {
            Some((_, s)) => {
                if score > *s {
                    *s = score;
                }
            }
            None => entries.push((word, score)),
        }
    }

    pub fn stems(&self) -> impl Iterator<Item = &str> {
        self.by_stem.keys().map(String::as_str)
    }

    pub fn get(&self, stem_id: &str) -> Option<&[(String, f64)]> {
        self.by_stem.get(stem_id).map(Vec::as_slice)
    }
}

fn score_then_word(a: &(String, f64), b: &(String, f64)) -> Ordering {
    b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0))
}

/// The `k` highest-scoring distinct completions for a stem, ordered by
/// score descending and then lexicographically.
pub fn topk_responses(source: &ScoredCompletions, stem_id: &str, k: usize) -> Result<Vec<String>> {
    if k == 0 {
        return Err(Error::Argument("k must be at least 1".into()));
    }
    let entries = source
        .get(stem_id)
        .ok_or_else(|| Error::Lookup(stem_id.into()))?;
    let mut sorted: Vec<&(String, f64)> = entries.iter().collect();
    sorted.sort_by(|a, b| score_then_word(a, b));
    Ok(sorted.into_iter().take(k).map(|(w, _)| w.clone()).collect())
}

/// Symmetric word co-occurrence counts with a zero diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct CoocCounts {
    words: Vec<String>,
    counts: Vec<u64>,
    total: u64,
}

impl CoocCounts {
    pub fn words(&self) -> &[String] {
        &self.words
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn get(&self, i: usize, j: usize) -> u64 {
        self.counts[i * self.words.len() + j]
    }

    pub fn index_of(&self, word: &str) -> Option<usize> {
        self.words.binary_search_by(|w| w.as_str().cmp(word)).ok()
    }

    pub fn is_degenerate(&self) -> bool {
        self.total == 0
    }
}

/// Counts, for every unordered pair of distinct words sharing a set, one
/// co-occurrence in each direction. Words are ordered lexicographically.
pub fn cooccurrence_counts<S: AsRef<str>>(sets: &[Vec<S>]) -> CoocCounts {
    let vocab: BTreeSet<&str> = sets.iter().flatten().map(AsRef::as_ref).collect();
    let words: Vec<String> = vocab.iter().map(|w| String::from(*w)).collect();
    let index: FxHashMap<&str, usize> = vocab.iter().enumerate().map(|(i, w)| (*w, i)).collect();
    let n = words.len();
    let mut counts = alloc::vec![0u64; n * n];
    let mut total = 0;
    for set in sets {
        let mut ids: Vec<usize> = set.iter().map(|w| index[w.as_ref()]).collect();
        ids.sort_unstable();
        ids.dedup();
        for (a, &i) in ids.iter().enumerate() {
            for &j in &ids[a + 1..] {
                counts[i * n + j] += 1;
                counts[j * n + i] += 1;
                total += 2;
            }
        }
    }
    CoocCounts {
        words,
        counts,
        total,
    }
}

/// Positive pointwise mutual information with marginals from row sums.
pub fn ppmi(cooc: &CoocCounts) -> Result<Matrix> {
    if cooc.total == 0 {
        return Err(Error::Degenerate(
            "co-occurrence counts are all zero".into(),
        ));
    }
    let n = cooc.words.len();
    let t = cooc.total as f64;
    let marginals: Vec<f64> = (0..n)
        .map(|i| cooc.counts[i * n..(i + 1) * n].iter().sum::<u64>() as f64 / t)
        .collect();
    let mut out = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            let c = cooc.counts[i * n + j];
            if c == 0 {
                continue;
            }
            let pmi = libm::log(c as f64 / t) - libm::log(marginals[i] * marginals[j]);
            if pmi > 0.0 {
                out.set(i, j, pmi);
            }
        }
    }
    // log ratios are symmetric up to rounding in the marginal product
    for i in 0..n {
        for j in 0..i {
            let v = out.get(j, i);
            out.set(i, j, v);
        }
    }
    Ok(out)
}

/// Centers each row and scales it to unit population standard deviation.
pub fn row_normalize(m: &Matrix, words: &[String]) -> Result<Matrix> {
    if words.len() != m.rows() {
        return Err(Error::Argument("one word per row is required".into()));
    }
    let mut out = m.clone();
    let cols = m.cols() as f64;
    for (r, word) in words.iter().enumerate() {
        let row = out.row_mut(r);
        let mean = row.iter().sum::<f64>() / cols;
        let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / cols;
        let sd = libm::sqrt(var);
        if !(sd > 0.0) {
            return Err(Error::DegenerateRow(word.clone()));
        }
        for v in row.iter_mut() {
            *v = (*v - mean) / sd;
        }
    }
    Ok(out)
}

/// Indices of rows that are not constant.
pub fn nonconstant_rows(m: &Matrix) -> Vec<usize> {
    (0..m.rows())
        .filter(|&r| {
            let row = m.row(r);
            row.iter().any(|&v| v != row[0])
        })
        .collect()
}

/// Principal directions of a matrix's rows, without extra column centering.
#[derive(Debug, Clone)]
pub struct Pca {
    /// Right singular vectors as columns, ordered by decreasing singular value.
    pub components: Matrix,
    pub singular_values: Vec<f64>,
}

/// Full decomposition of `m`'s row space: every right singular direction,
/// sign-normalized so each component's largest-magnitude entry is positive.
pub fn principal_components(m: &Matrix) -> Result<Pca> {
    let eig = symmetric_eigen(&m.gram())?;
    let n = eig.values.len();
    let mut order: Vec<usize> = (0..n).collect();
    // stable: equal eigenvalues keep component index order
    order.sort_by(|&a, &b| eig.values[b].total_cmp(&eig.values[a]));
    let mut components = Matrix::zeros(n, n);
    let mut singular_values = Vec::with_capacity(n);
    for (c, &src) in order.iter().enumerate() {
        let mut pivot = 0;
        for r in 1..n {
            if libm::fabs(eig.vectors.get(r, src)) > libm::fabs(eig.vectors.get(pivot, src)) {
                pivot = r;
            }
        }
        let sign = if eig.vectors.get(pivot, src) < 0.0 {
            -1.0
        } else {
            1.0
        };
        for r in 0..n {
            components.set(r, c, sign * eig.vectors.get(r, src));
        }
        singular_values.push(libm::sqrt(eig.values[src].max(0.0)));
    }
    Ok(Pca {
        components,
        singular_values,
    })
}

/// Projects rows of `m` onto its top `d` right singular directions.
pub fn pca_project(m: &Matrix, words: Vec<String>, d: usize) -> Result<SemanticSpace> {
    let limit = m.rows().min(m.cols());
    if d == 0 || d > limit {
        return Err(Error::Argument(alloc::format!(
            "dimension {d} outside 1..={limit}"
        )));
    }
    let pca = principal_components(m)?;
    project(m, &pca, words, d)
}

/// Projection onto the first `d` components of a precomputed decomposition.
pub fn project(m: &Matrix, pca: &Pca, words: Vec<String>, d: usize) -> Result<SemanticSpace> {
    let n = pca.components.rows();
    if d == 0 || d > n || m.cols() != n {
        return Err(Error::Argument(alloc::format!(
            "dimension {d} outside 1..={n}"
        )));
    }
    let cols: Vec<usize> = (0..d).collect();
    let basis = pca.components.transpose().select_rows(&cols).transpose();
    let scores = m.matmul(&basis)?;
    SemanticSpace::new(words, scores, SpaceSource::PpmiPca)
}

fn cosine(a: &[f64], b: &[f64], norm_a: f64, norm_b: f64) -> f64 {
    (dot(a, b) / (norm_a * norm_b)).clamp(-1.0, 1.0)
}

/// Cosine similarities between all pairs of vectors; the diagonal is 1.
pub fn cosine_similarity_matrix(space: &SemanticSpace) -> Result<SimilarityMatrix> {
    let n = space.len();
    let v = &space.vectors;
    let mut norms = Vec::with_capacity(n);
    for (i, w) in space.words.iter().enumerate() {
        let norm = libm::sqrt(dot(v.row(i), v.row(i)));
        if !(norm > 0.0) {
            return Err(Error::DegenerateVector(w.clone()));
        }
        norms.push(norm);
    }
    let mut values = Matrix::zeros(n, n);
    for i in 0..n {
        values.set(i, i, 1.0);
        for j in i + 1..n {
            let s = cosine(v.row(i), v.row(j), norms[i], norms[j]);
            values.set(i, j, s);
            values.set(j, i, s);
        }
    }
    Ok(SimilarityMatrix {
        words: space.words.clone(),
        values,
    })
}

/// Spearman correlation between the strict upper triangles.
pub fn rsa_spearman(a: &SimilarityMatrix, b: &SimilarityMatrix) -> Result<f64> {
    if a.words != b.words {
        return Err(Error::Alignment);
    }
    if a.words.len() < 3 {
        return Err(Error::InsufficientOverlap(a.words.len()));
    }
    let s = PairedSeries::new(a.upper_triangle(), b.upper_triangle())?;
    spearman(&s)
}

/// Restricts both spaces to their shared case-folded words, in the order
/// they appear in `a`. Output words are the folded keys.
pub fn intersect_spaces(
    a: &SemanticSpace,
    b: &SemanticSpace,
) -> Result<(SemanticSpace, SemanticSpace)> {
    let mut b_index: BTreeMap<String, usize> = BTreeMap::new();
    for (i, w) in b.words.iter().enumerate() {
        b_index.entry(fold(w)).or_insert(i);
    }
    let mut seen = BTreeSet::new();
    let mut words = Vec::new();
    let (mut rows_a, mut rows_b) = (Vec::new(), Vec::new());
    for (i, w) in a.words.iter().enumerate() {
        let key = fold(w);
        if let Some(&j) = b_index.get(&key) {
            if seen.insert(key.clone()) {
                rows_a.push(i);
                rows_b.push(j);
                words.push(key);
            }
        }
    }
    if words.len() < 3 {
        return Err(Error::InsufficientOverlap(words.len()));
    }
    Ok((
        SemanticSpace {
            words: words.clone(),
            vectors: a.vectors.select_rows(&rows_a),
            source: a.source.clone(),
        },
        SemanticSpace {
            words,
            vectors: b.vectors.select_rows(&rows_b),
            source: b.source.clone(),
        },
    ))
}

/// One pooled-embedding occurrence: the hidden state of `word` completing
/// stem `stem_id`, stored as row `offset` of the vector blob.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingRecord {
    pub stem_id: String,
    pub word: String,
    pub offset: usize,
    pub n_subwords: usize,
}

/// Contextual embeddings of completions from one reference model.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingDump {
    pub reference_model: String,
    pub layer: String,
    dim: usize,
    records: Vec<EmbeddingRecord>,
    vectors: Vec<f32>,
}

impl EmbeddingDump {
    pub fn new(
        reference_model: impl Into<String>,
        layer: impl Into<String>,
        dim: usize,
        records: Vec<EmbeddingRecord>,
        vectors: Vec<f32>,
    ) -> Result<Self> {
        if dim == 0 || !vectors.len().is_multiple_of(dim) {
            return Err(Error::InvalidRecord(alloc::format!(
                "{} floats do not form rows of dimension {dim}",
                vectors.len()
            )));
        }
        let rows = vectors.len() / dim;
        if let Some(bad) = records.iter().find(|r| r.offset >= rows) {
            return Err(Error::InvalidRecord(alloc::format!(
                "record `{}`/`{}` points at row {} of {rows}",
                bad.stem_id,
                bad.word,
                bad.offset
            )));
        }
        if vectors.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidRecord(
                "embedding blob contains non-finite values".into(),
            ));
        }
        Ok(EmbeddingDump {
            reference_model: reference_model.into(),
            layer: layer.into(),
            dim,
            records,
            vectors,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn records(&self) -> &[EmbeddingRecord] {
        &self.records
    }

    pub fn vector(&self, offset: usize) -> &[f32] {
        &self.vectors[offset * self.dim..(offset + 1) * self.dim]
    }

    pub fn vectors(&self) -> &[f32] {
        &self.vectors
    }
}

/// `(stem_id, folded word)` pairs that make up one data source's
/// completions.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct DatasetSelector {
    pairs: BTreeSet<(String, String)>,
}

impl DatasetSelector {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, stem_id: &str, word: &str) {
        self.pairs.insert((stem_id.into(), fold(word)));
    }

    pub fn contains(&self, stem_id: &str, word: &str) -> bool {
        self.pairs.contains(&(String::from(stem_id), fold(word)))
    }

    pub fn words(&self) -> BTreeSet<&str> {
        self.pairs.iter().map(|(_, w)| w.as_str()).collect()
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }
}

/// Averages, for every selected word, its embeddings over the stems where
/// the selection lists it as a completion. Words are sorted.
pub fn mean_pool_embeddings(
    dump: &EmbeddingDump,
    selection: &DatasetSelector,
) -> Result<SemanticSpace> {
    let words: Vec<&str> = selection.words().into_iter().collect();
    let index: FxHashMap<&str, usize> = words.iter().enumerate().map(|(i, w)| (*w, i)).collect();
    let d = dump.dim;
    let mut sums = alloc::vec![0.0f64; words.len() * d];
    let mut counts = alloc::vec![0usize; words.len()];
    for rec in &dump.records {
        if !selection.contains(&rec.stem_id, &rec.word) {
            continue;
        }
        let w = index[fold(&rec.word).as_str()];
        for (s, &v) in sums[w * d..(w + 1) * d]
            .iter_mut()
            .zip(dump.vector(rec.offset))
        {
            *s += f64::from(v);
        }
        counts[w] += 1;
    }
    let missing: Vec<String> = words
        .iter()
        .zip(&counts)
        .filter(|(_, &c)| c == 0)
        .map(|(w, _)| String::from(*w))
        .collect();
    if !missing.is_empty() {
        return Err(Error::Coverage(missing));
    }
    for (w, &c) in counts.iter().enumerate() {
        for s in &mut sums[w * d..(w + 1) * d] {
            *s /= c as f64;
        }
    }
    let vectors = Matrix::from_vec(words.len(), d, sums)?;
    SemanticSpace::new(
        words.into_iter().map(String::from).collect(),
        vectors,
        SpaceSource::PooledEmbedding,
    )
}

fn neighbors_of(sim: &SimilarityMatrix, pivot: usize, k: usize) -> Vec<usize> {
    let n = sim.words.len();
    let mut others: Vec<usize> = (0..n).filter(|&j| j != pivot).collect();
    others.sort_by(|&a, &b| {
        sim.get(pivot, b)
            .total_cmp(&sim.get(pivot, a))
            .then_with(|| sim.words[a].cmp(&sim.words[b]))
    });
    others.truncate(k);
    others
}

/// The `k` most similar words to `word`, excluding itself; ties go to the
/// lexicographically smaller word.
pub fn knn(sim: &SimilarityMatrix, word: &str, k: usize) -> Result<Vec<String>> {
    let n = sim.words.len();
    if k == 0 || k + 1 > n {
        return Err(Error::Argument(alloc::format!(
            "k = {k} needs 1 <= k <= {}",
            n.saturating_sub(1)
        )));
    }
    let pivot = sim
        .words
        .iter()
        .position(|w| w == word)
        .ok_or_else(|| Error::Lookup(word.into()))?;
    Ok(neighbors_of(sim, pivot, k)
        .into_iter()
        .map(|j| sim.words[j].clone())
        .collect())
}

/// Mean Jaccard similarity of each word's k-neighborhoods in two spaces over
/// the same word list.
pub fn neighborhood_overlap(a: &SemanticSpace, b: &SemanticSpace, k: usize) -> Result<f64> {
    let sa = cosine_similarity_matrix(a)?;
    let sb = cosine_similarity_matrix(b)?;
    neighborhood_overlap_sim(&sa, &sb, k)
}

pub fn neighborhood_overlap_sim(
    a: &SimilarityMatrix,
    b: &SimilarityMatrix,
    k: usize,
) -> Result<f64> {
    if a.words != b.words {
        return Err(Error::Alignment);
    }
    let n = a.words.len();
    if k == 0 || k + 1 > n {
        return Err(Error::Argument(alloc::format!(
            "k = {k} needs 1 <= k <= {}",
            n.saturating_sub(1)
        )));
    }
    let mut total = 0.0;
    for pivot in 0..n {
        let mut na = neighbors_of(a, pivot, k);
        let mut nb = neighbors_of(b, pivot, k);
        na.sort_unstable();
        nb.sort_unstable();
        let inter = na.iter().filter(|i| nb.binary_search(i).is_ok()).count();
        let union = na.len() + nb.len() - inter;
        total += inter as f64 / union as f64;
    }
    Ok(total / n as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::string::ToString;
    use alloc::vec;
    use approx::assert_abs_diff_eq;

    fn strings(ws: &[&str]) -> Vec<String> {
        ws.iter().map(|w| w.to_string()).collect()
    }

    fn space(words: &[&str], rows: &[Vec<f64>]) -> SemanticSpace {
        SemanticSpace::new(
            strings(words),
            Matrix::from_rows(rows).unwrap(),
            SpaceSource::Human,
        )
        .unwrap()
    }

    #[test]
    fn topk_examples() {
        let mut sc = ScoredCompletions::new();
        sc.insert("s", "a", 0.5);
        sc.insert("s", "b", 0.3);
        sc.insert("s", "c", 0.2);
        assert_eq!(
            topk_responses(&sc, "s", 40).unwrap(),
            strings(&["a", "b", "c"])
        );
        assert_eq!(topk_responses(&sc, "s", 2).unwrap(), strings(&["a", "b"]));
        sc.insert("t", "zebra", 0.4);
        sc.insert("t", "apple", 0.4);
        sc.insert("t", "top", 0.9);
        assert_eq!(
            topk_responses(&sc, "t", 2).unwrap(),
            strings(&["top", "apple"])
        );
        assert_eq!(
            topk_responses(&sc, "nope", 2),
            Err(Error::Lookup("nope".into()))
        );
        assert!(topk_responses(&sc, "s", 0).is_err());
    }

    #[test]
    fn cooccurrence_examples() {
        let c = cooccurrence_counts(&[vec!["a", "b"]]);
        assert_eq!((c.get(0, 1), c.get(1, 0), c.total()), (1, 1, 2));
        let c = cooccurrence_counts(&[vec!["a", "b"], vec!["b", "a"]]);
        assert_eq!(c.get(0, 1), 2);
        let c = cooccurrence_counts(&[vec!["a", "b", "c"], vec!["a", "b"]]);
        assert_eq!((c.get(0, 1), c.get(0, 2), c.get(1, 2)), (2, 1, 1));
        assert_eq!(c.get(2, 1), 1);
        assert_eq!(c.total(), 8);
        assert!((0..3).all(|i| c.get(i, i) == 0));
        assert!(cooccurrence_counts::<&str>(&[vec!["a"]]).is_degenerate());
    }

    #[test]
    fn ppmi_hand_values() {
        let c = cooccurrence_counts(&[vec!["a", "b", "c"], vec!["a", "b"]]);
        let m = ppmi(&c).unwrap();
        assert_abs_diff_eq!(m.get(0, 1), libm::log(0.25 / 0.140625), epsilon = 1e-12);
        assert_abs_diff_eq!(m.get(0, 1), 0.5754, epsilon = 1e-4);
        assert_abs_diff_eq!(m.get(0, 2), 0.2877, epsilon = 1e-4);
        assert!(m.is_symmetric());
        assert!(ppmi(&cooccurrence_counts::<&str>(&[])).is_err());
    }

    #[test]
    fn ppmi_present_and_absent_pairs() {
        // a 2x2 block of equal counts: p(i,j) = p(i)p(j) exactly for cross pairs
        let c = cooccurrence_counts(&[
            vec!["a", "b"],
            vec!["c", "d"],
            vec!["a", "d"],
            vec!["b", "c"],
        ]);
        let m = ppmi(&c).unwrap();
        // every word has row sum 2 out of total 8; each present pair has p = 1/8
        // and p(i)p(j) = 1/16, so PMI = ln 2 > 0; absent pairs are 0
        assert_abs_diff_eq!(m.get(0, 1), core::f64::consts::LN_2, epsilon = 1e-12);
        assert_eq!(m.get(0, 2), 0.0);
        let c = cooccurrence_counts(&[vec!["a", "b"]]);
        // p(a,b) = 1/2, p(a)p(b) = 1/4 -> ln 2; diagonal stays 0
        assert_eq!(ppmi(&c).unwrap().get(0, 0), 0.0);
    }

    #[test]
    fn row_normalize_examples() {
        let m = Matrix::from_rows(&[vec![1.0, 2.0, 3.0]]).unwrap();
        let out = row_normalize(&m, &strings(&["w"])).unwrap();
        let expect = libm::sqrt(1.5);
        assert_abs_diff_eq!(out.get(0, 0), -expect, epsilon = 1e-12);
        assert_abs_diff_eq!(out.get(0, 1), 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(out.get(0, 2), 1.2247, epsilon = 1e-4);
        let again = row_normalize(&out, &strings(&["w"])).unwrap();
        for c in 0..3 {
            assert_abs_diff_eq!(again.get(0, c), out.get(0, c), epsilon = 1e-12);
        }
        let flat = Matrix::from_rows(&[vec![2.0, 2.0]]).unwrap();
        assert_eq!(
            row_normalize(&flat, &strings(&["flat"])),
            Err(Error::DegenerateRow("flat".into()))
        );
    }

    #[test]
    fn pca_rank_one() {
        let m = Matrix::from_rows(&[vec![1.0, 2.0], vec![-2.0, -4.0], vec![0.5, 1.0]]).unwrap();
        let s = pca_project(&m, strings(&["a", "b", "c"]), 1).unwrap();
        let sim = cosine_similarity_matrix(&s).unwrap();
        assert_abs_diff_eq!(sim.get(0, 1), -1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(sim.get(0, 2), 1.0, epsilon = 1e-12);
        assert!(pca_project(&m, strings(&["a", "b", "c"]), 3).is_err());
        assert!(pca_project(&m, strings(&["a", "b", "c"]), 0).is_err());
    }

    #[test]
    fn pca_sign_convention() {
        let m = Matrix::from_rows(&[
            vec![3.0, -1.0, 0.0],
            vec![-3.0, 1.0, 0.5],
            vec![1.0, 0.0, -2.0],
        ])
        .unwrap();
        let pca = principal_components(&m).unwrap();
        for c in 0..3 {
            let col: Vec<f64> = (0..3).map(|r| pca.components.get(r, c)).collect();
            let max = col
                .iter()
                .copied()
                .fold(0.0f64, |a, v| if v.abs() > a.abs() { v } else { a });
            assert!(max > 0.0);
        }
        assert!(pca.singular_values.windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn cosine_examples() {
        let s = space(
            &["x", "y", "z", "w"],
            &[
                vec![1.0, 0.0],
                vec![1.0, 1.0],
                vec![0.0, 3.0],
                vec![2.0, 0.0],
            ],
        );
        let sim = cosine_similarity_matrix(&s).unwrap();
        assert_abs_diff_eq!(
            sim.get(0, 1),
            core::f64::consts::FRAC_1_SQRT_2,
            epsilon = 1e-12
        );
        assert_eq!(sim.get(0, 2), 0.0);
        assert_eq!(sim.get(0, 3), 1.0);
        assert_eq!(sim.get(1, 1), 1.0);
        assert!(
            SemanticSpace::new(strings(&["z"]), Matrix::zeros(1, 2), SpaceSource::Human).is_err()
        );
    }

    #[test]
    fn rsa_examples() {
        let s = space(
            &["a", "b", "c", "d"],
            &[
                vec![1.0, 0.2],
                vec![0.3, 1.0],
                vec![-1.0, 0.4],
                vec![0.5, -0.7],
            ],
        );
        let sim = cosine_similarity_matrix(&s).unwrap();
        assert_abs_diff_eq!(rsa_spearman(&sim, &sim).unwrap(), 1.0, epsilon = 1e-15);
        let mut neg = sim.values().clone();
        for i in 0..4 {
            for j in 0..4 {
                if i != j {
                    neg.set(i, j, -neg.get(i, j));
                }
            }
        }
        let neg = SimilarityMatrix::new(sim.words().to_vec(), neg).unwrap();
        assert_abs_diff_eq!(rsa_spearman(&sim, &neg).unwrap(), -1.0, epsilon = 1e-15);

        // hand-built triangles (ab, ac, ad, bc, bd, cd)
        let build = |t: [f64; 6]| {
            let mut m = Matrix::zeros(4, 4);
            let mut k = 0;
            for i in 0..4 {
                m.set(i, i, 1.0);
                for j in i + 1..4 {
                    m.set(i, j, t[k]);
                    m.set(j, i, t[k]);
                    k += 1;
                }
            }
            SimilarityMatrix::new(strings(&["a", "b", "c", "d"]), m).unwrap()
        };
        let a = build([0.9, 0.1, 0.5, 0.3, 0.7, -0.2]);
        let b = build([0.8, 0.2, 0.1, 0.6, 0.7, -0.5]);
        // ranks a = [6, 2, 4, 3, 5, 1], b = [6, 3, 2, 4, 5, 1]
        // sum d^2 = 0 + 1 + 4 + 1 + 0 + 0 = 6, rho = 1 - 6*6/(6*35) = 29/35
        assert_abs_diff_eq!(rsa_spearman(&a, &b).unwrap(), 29.0 / 35.0, epsilon = 1e-12);

        let other =
            SimilarityMatrix::new(strings(&["a", "b", "c", "e"]), b.values().clone()).unwrap();
        assert_eq!(rsa_spearman(&a, &other), Err(Error::Alignment));
    }

    #[test]
    fn intersect_examples() {
        let a = space(&["a", "b", "c"], &[vec![1.0], vec![2.0], vec![3.0]]);
        let (x, y) = intersect_spaces(&a, &a).unwrap();
        assert_eq!(x, a);
        assert_eq!(y, a);
        let d = space(&["x", "y", "z"], &[vec![1.0], vec![2.0], vec![3.0]]);
        assert_eq!(
            intersect_spaces(&a, &d).unwrap_err(),
            Error::InsufficientOverlap(0)
        );
        let b = space(&["b", "c", "d"], &[vec![1.0], vec![2.0], vec![3.0]]);
        assert_eq!(
            intersect_spaces(&a, &b).unwrap_err(),
            Error::InsufficientOverlap(2)
        );
        let a4 = space(
            &["A", "b", "c", "q"],
            &[vec![1.0], vec![2.0], vec![3.0], vec![4.0]],
        );
        let b4 = space(
            &["c", "b", "a", "r"],
            &[vec![5.0], vec![6.0], vec![7.0], vec![8.0]],
        );
        let (x, y) = intersect_spaces(&a4, &b4).unwrap();
        assert_eq!(x.words(), &strings(&["a", "b", "c"])[..]);
        assert_eq!(y.words(), x.words());
        assert_eq!(y.vectors().as_slice(), &[7.0, 6.0, 5.0]);
    }

    #[test]
    fn mean_pool_examples() {
        let records = vec![
            EmbeddingRecord {
                stem_id: "s1".into(),
                word: "bee".into(),
                offset: 0,
                n_subwords: 1,
            },
            EmbeddingRecord {
                stem_id: "s2".into(),
                word: "bee".into(),
                offset: 1,
                n_subwords: 1,
            },
            EmbeddingRecord {
                stem_id: "s1".into(),
                word: "hive".into(),
                offset: 2,
                n_subwords: 2,
            },
            EmbeddingRecord {
                stem_id: "s3".into(),
                word: "bee".into(),
                offset: 3,
                n_subwords: 1,
            },
        ];
        let blob = vec![1.0, 0.0, 0.0, 1.0, 0.25, 0.75, 3.0, 3.0];
        let dump = EmbeddingDump::new("ref", "last", 2, records, blob).unwrap();

        let mut sel = DatasetSelector::new();
        sel.insert("s1", "hive");
        let s = mean_pool_embeddings(&dump, &sel).unwrap();
        assert_eq!(s.vectors().row(0), &[0.25, 0.75]);

        sel.insert("s1", "Bee");
        sel.insert("s2", "bee");
        let s = mean_pool_embeddings(&dump, &sel).unwrap();
        assert_eq!(s.words(), &strings(&["bee", "hive"])[..]);
        assert_eq!(s.vectors().row(0), &[0.5, 0.5]);

        sel.insert("s3", "bee");
        let s = mean_pool_embeddings(&dump, &sel).unwrap();
        assert_abs_diff_eq!(s.vectors().get(0, 0), 4.0 / 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(s.vectors().get(0, 1), 4.0 / 3.0, epsilon = 1e-12);

        sel.insert("s9", "wasp");
        assert_eq!(
            mean_pool_embeddings(&dump, &sel),
            Err(Error::Coverage(vec!["wasp".into()]))
        );
        assert!(EmbeddingDump::new("ref", "last", 2, vec![], vec![1.0]).is_err());
    }

    #[test]
    fn knn_examples() {
        let s = space(
            &["a", "b", "c", "d"],
            &[
                vec![1.0, 0.0],
                vec![1.0, 0.1],
                vec![0.0, 1.0],
                vec![-1.0, 0.0],
            ],
        );
        let sim = cosine_similarity_matrix(&s).unwrap();
        assert_eq!(knn(&sim, "a", 1).unwrap(), strings(&["b"]));
        let mut all = knn(&sim, "a", 3).unwrap();
        all.sort();
        assert_eq!(all, strings(&["b", "c", "d"]));
        assert!(knn(&sim, "zz", 1).is_err());
        assert!(knn(&sim, "a", 4).is_err());

        // c is equidistant from b' and d' in this space: tie goes to b
        let t = space(
            &["b", "c", "d"],
            &[vec![1.0, 0.0], vec![1.0, 1.0], vec![0.0, 1.0]],
        );
        let sim = cosine_similarity_matrix(&t).unwrap();
        assert_eq!(knn(&sim, "c", 1).unwrap(), strings(&["b"]));
    }

    #[test]
    fn overlap_examples() {
        let a = space(
            &["a", "b", "c"],
            &[vec![1.0, 0.0], vec![1.0, 0.2], vec![0.0, 1.0]],
        );
        assert_eq!(neighborhood_overlap(&a, &a, 1).unwrap(), 1.0);
        // a: a->b, b->a, c->b.  b: a->c, b->c, c->b. Only c agrees.
        let b = space(
            &["a", "b", "c"],
            &[vec![1.0, 0.2], vec![0.0, 1.0], vec![0.2, 1.0]],
        );
        assert_abs_diff_eq!(
            neighborhood_overlap(&a, &b, 1).unwrap(),
            1.0 / 3.0,
            epsilon = 1e-15
        );
        assert_abs_diff_eq!(
            neighborhood_overlap(&b, &a, 1).unwrap(),
            1.0 / 3.0,
            epsilon = 1e-15
        );
        assert!(neighborhood_overlap(&a, &b, 3).is_err());
    }

    #[test]
    fn overlap_zero_for_disjoint_neighborhoods() {
        // 4 words, k = 1; neighbor maps are fixed-point-free and disagree everywhere
        let a = space(
            &["a", "b", "c", "d"],
            &[
                vec![1.0, 0.0],
                vec![1.0, 0.05],
                vec![-1.0, 0.0],
                vec![-1.0, 0.05],
            ],
        );
        let b = space(
            &["a", "b", "c", "d"],
            &[
                vec![1.0, 0.0],
                vec![-1.0, 0.0],
                vec![1.0, 0.05],
                vec![-1.0, 0.05],
            ],
        );
        assert_eq!(neighborhood_overlap(&a, &b, 1).unwrap(), 0.0);
    }
}
