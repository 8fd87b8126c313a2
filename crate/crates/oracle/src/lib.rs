//! Slow, obviously-correct reference implementations.
//!
//! Nothing here shares code with `clozealign-core`. Each function computes
//! its quantity straight from the definition so the fast implementations
//! can be checked against it.

use std::cell::RefCell;
use std::collections::{BTreeMap, HashMap, HashSet};

use statrs::statistics::Statistics;

/// Occurrences of `gram` inside each document, found by scanning.
pub fn scan_count(documents: &[Vec<u32>], gram: &[u32]) -> u64 {
    if gram.is_empty() {
        return documents.iter().map(|d| d.len() as u64).sum();
    }
    documents
        .iter()
        .map(|d| d.windows(gram.len()).filter(|w| *w == gram).count() as u64)
        .sum()
}

/// Every n-gram up to `max_order` with its count, by sliding a window over
/// each document.
pub fn all_ngrams(documents: &[Vec<u32>], max_order: usize) -> BTreeMap<Vec<u32>, u64> {
    let mut out = BTreeMap::new();
    for doc in documents {
        for n in 1..=max_order {
            for w in doc.windows(n) {
                *out.entry(w.to_vec()).or_insert(0) += 1;
            }
        }
    }
    out
}

/// How often a context occurs and the counts of the tokens after it.
type Followers = (u64, HashMap<u32, u64>);

/// Stupid Backoff evaluated by rescanning the token stream.
///
/// For each context the documents are scanned once, recording how often
/// the context occurs and which tokens follow it; the result is cached so
/// each context is scanned at most once.
pub struct StreamBackoff<'d> {
    documents: &'d [Vec<u32>],
    alpha: f64,
    follow: RefCell<HashMap<Vec<u32>, Followers>>,
}

impl<'d> StreamBackoff<'d> {
    pub fn new(documents: &'d [Vec<u32>], alpha: f64) -> Self {
        StreamBackoff {
            documents,
            alpha,
            follow: RefCell::new(HashMap::new()),
        }
    }

    fn scan(&self, context: &[u32]) -> Followers {
        let mut occurrences = 0;
        let mut next = HashMap::new();
        for doc in self.documents {
            for start in 0..=doc.len().saturating_sub(context.len()) {
                if doc.len() < context.len() || doc[start..start + context.len()] != *context {
                    continue;
                }
                if context.is_empty() && start == doc.len() {
                    continue;
                }
                occurrences += 1;
                if let Some(&w) = doc.get(start + context.len()) {
                    *next.entry(w).or_insert(0) += 1;
                }
            }
        }
        (occurrences, next)
    }

    /// `S(word | context)`:
    /// `c(context word) / c(context)` when the extended gram occurs, otherwise
    /// `alpha * S(word | context without its first token)`. The empty
    /// context gives `c(word) / N`.
    pub fn score(&self, context: &[u32], word: u32) -> f64 {
        if !self.follow.borrow().contains_key(context) {
            let entry = self.scan(context);
            self.follow.borrow_mut().insert(context.to_vec(), entry);
        }
        let (occurrences, hit) = {
            let cache = self.follow.borrow();
            let (c, next) = &cache[context];
            (*c, next.get(&word).copied().unwrap_or(0))
        };
        if hit > 0 {
            hit as f64 / occurrences as f64
        } else if context.is_empty() {
            0.0
        } else {
            self.alpha * self.score(&context[1..], word)
        }
    }
}

/// Sample Pearson correlation as covariance over the product of standard
/// deviations.
pub fn pearson(x: &[f64], y: &[f64]) -> f64 {
    let cov = x.iter().covariance(y.iter());
    cov / (x.iter().std_dev() * y.iter().std_dev())
}

/// Spearman correlation from the no-ties formula
/// `1 - 6 sum d^2 / (n (n^2 - 1))`, with ranks found by counting smaller
/// values. Panics on tied values.
pub fn spearman_no_ties(x: &[f64], y: &[f64]) -> f64 {
    let rank = |v: &[f64]| -> Vec<f64> {
        v.iter()
            .map(|a| {
                assert_eq!(v.iter().filter(|b| *b == a).count(), 1, "tied value {a}");
                1.0 + v.iter().filter(|b| *b < a).count() as f64
            })
            .collect()
    };
    let (rx, ry) = (rank(x), rank(y));
    let n = x.len() as f64;
    let d2: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - b) * (a - b)).sum();
    1.0 - 6.0 * d2 / (n * (n * n - 1.0))
}

/// Cosine similarity of two vectors.
pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    dot / (na * nb)
}

/// The `k` words most cosine-similar to `words[pivot]`, ties broken by the
/// smaller word.
pub fn brute_knn(
    words: &[String],
    vectors: &[Vec<f64>],
    pivot: usize,
    k: usize,
) -> HashSet<String> {
    let mut scored: Vec<(f64, &String)> = (0..words.len())
        .filter(|&j| j != pivot)
        .map(|j| (cosine(&vectors[pivot], &vectors[j]), &words[j]))
        .collect();
    scored.sort_by(|a, b| b.0.total_cmp(&a.0).then_with(|| a.1.cmp(b.1)));
    scored.into_iter().take(k).map(|(_, w)| w.clone()).collect()
}

/// Mean over words of the Jaccard similarity of their k-neighborhoods in
/// two spaces with the same word list.
pub fn brute_overlap(words: &[String], a: &[Vec<f64>], b: &[Vec<f64>], k: usize) -> f64 {
    let mut total = 0.0;
    for pivot in 0..words.len() {
        let na = brute_knn(words, a, pivot, k);
        let nb = brute_knn(words, b, pivot, k);
        let inter = na.intersection(&nb).count();
        let union = na.union(&nb).count();
        total += inter as f64 / union as f64;
    }
    total / words.len() as f64
}
