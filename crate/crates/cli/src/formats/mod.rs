//! Readers and writers for every on-disk format the toolkit consumes.

pub mod counts;
pub mod dump;
pub mod embeddings;
pub mod norms;
pub mod tokenizer;
