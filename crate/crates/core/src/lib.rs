//! Core algorithms for measuring how language-model next-token predictions
//! line up with human cloze production norms.
//!
//! Everything here is pure computation over in-memory data and only needs
//! `alloc`. File formats, corpus streaming and the command-line surface live
//! in the `clozealign` crate.
//!
//! Modules, bottom up:
//!
//! - [`tokenizer`]: byte-level BPE encoding and the first-subword policy.
//! - [`norms`]: cloze norms, tokenization maps and response subword statistics.
//! - [`ngram`]: mergeable n-gram count tables, Stupid Backoff and unigram scores.
//! - [`stats`]: probability transforms, correlations, ranks, bootstrap, OLS,
//!   calibration curves.
//! - [`linalg`]: a small dense matrix type and a symmetric eigensolver.
//! - [`semspace`]: PPMI + PCA spaces, pooled embeddings, RSA and
//!   neighborhood overlap.
//! - [`predictions`]: prediction dumps and the analyses joining them to norms.
#![no_std]

extern crate alloc;

pub mod error;
pub mod linalg;
pub mod ngram;
pub mod norms;
pub mod predictions;
pub mod seed;
pub mod semspace;
pub mod stats;
pub mod tokenizer;

pub use error::{Error, ErrorKind, Result};

pub(crate) type FxHashMap<K, V> = hashbrown::HashMap<K, V, rustc_hash::FxBuildHasher>;
pub(crate) type FxHashSet<K> = hashbrown::HashSet<K, rustc_hash::FxBuildHasher>;
