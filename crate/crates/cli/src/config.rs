//! Run configuration from `key = value` text files.
//!
//! Blank lines and lines starting with `#` are skipped. `dump` may repeat;
//! every other key may appear once. Relative paths resolve against the
//! directory holding the config file.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use clozealign_core::predictions::Analysis;
use clozealign_core::semspace::{DEFAULT_DIMS, DEFAULT_NEIGHBORS, DEFAULT_TOPK};
use clozealign_core::stats::{ResampleUnit, DEFAULT_LOGIT_ALPHA, DEFAULT_RESAMPLES};

use crate::error::{CliError, Result};
use crate::formats::counts::CorpusFormat;

pub const RSA_PPMI: &str = "rsa_ppmi";
pub const RSA_EMBED: &str = "rsa_embed";
pub const OVERLAP_EMBED: &str = "overlap_embed";
pub const DEFAULT_BINS: usize = 10;

/// Everything a run needs. Fields left unset fall back to defaults or are
/// reported missing by the command that needs them.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub seed: Option<u64>,
    pub norms: Option<PathBuf>,
    pub tokenizer_id: Option<String>,
    pub tokenizer_vocab: Option<PathBuf>,
    pub tokenizer_merges: Option<PathBuf>,
    pub tokenization_map: Option<PathBuf>,
    pub corpus: Option<PathBuf>,
    pub corpus_format: CorpusFormat,
    pub ngram_counts: Option<PathBuf>,
    pub dumps: Vec<PathBuf>,
    pub embeddings: Option<PathBuf>,
    pub embeddings_blob: Option<PathBuf>,
    pub reference_model: Option<String>,
    /// Explicit analysis selection; `None` picks every analysis whose
    /// inputs are configured.
    pub analyses: Option<BTreeSet<String>>,
    pub topk: usize,
    pub dims: Vec<usize>,
    pub neighbors: Vec<usize>,
    pub n_bins: usize,
    pub logit_alpha: f64,
    pub backoff_alpha: f64,
    pub order: usize,
    pub resamples: usize,
    pub resample_unit: ResampleUnit,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: None,
            norms: None,
            tokenizer_id: None,
            tokenizer_vocab: None,
            tokenizer_merges: None,
            tokenization_map: None,
            corpus: None,
            corpus_format: CorpusFormat::Text,
            ngram_counts: None,
            dumps: Vec::new(),
            embeddings: None,
            embeddings_blob: None,
            reference_model: None,
            analyses: None,
            topk: DEFAULT_TOPK,
            dims: DEFAULT_DIMS.to_vec(),
            neighbors: vec![DEFAULT_NEIGHBORS],
            n_bins: DEFAULT_BINS,
            logit_alpha: DEFAULT_LOGIT_ALPHA,
            backoff_alpha: 0.4,
            order: 5,
            resamples: DEFAULT_RESAMPLES,
            resample_unit: ResampleUnit::Pair,
        }
    }
}

fn parse_list(value: &str) -> std::result::Result<Vec<usize>, String> {
    let mut out = Vec::new();
    for part in value.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        match part.split_once('-') {
            Some((a, b)) => {
                let (a, b): (usize, usize) = (
                    a.trim()
                        .parse()
                        .map_err(|_| format!("bad range `{part}`"))?,
                    b.trim()
                        .parse()
                        .map_err(|_| format!("bad range `{part}`"))?,
                );
                if a > b {
                    return Err(format!("empty range `{part}`"));
                }
                out.extend(a..=b);
            }
            None => out.push(part.parse().map_err(|_| format!("bad integer `{part}`"))?),
        }
    }
    if out.is_empty() {
        return Err("empty list".into());
    }
    out.sort_unstable();
    out.dedup();
    Ok(out)
}

pub fn is_known_analysis(name: &str) -> bool {
    Analysis::from_name(name).is_some() || [RSA_PPMI, RSA_EMBED, OVERLAP_EMBED].contains(&name)
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::parse(&text, base)
            .map_err(|(line, msg)| CliError::Config(format!("{}:{line}: {msg}", path.display())))
    }

    pub fn parse(text: &str, base: &Path) -> std::result::Result<Self, (usize, String)> {
        let mut cfg = RunConfig::default();
        let mut seen = BTreeSet::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let err = |m: String| (i + 1, m);
            let (key, value) = line
                .split_once('=')
                .map(|(k, v)| (k.trim(), v.trim()))
                .ok_or_else(|| err(format!("expected `key = value`, got `{line}`")))?;
            if key != "dump" && !seen.insert(key.to_string()) {
                return Err(err(format!("`{key}` set twice")));
            }
            let path = || base.join(value);
            let num = |v: &str| {
                v.parse::<f64>()
                    .map_err(|_| err(format!("`{key}` needs a number, got `{v}`")))
            };
            let int = |v: &str| {
                v.parse::<usize>()
                    .map_err(|_| err(format!("`{key}` needs an integer, got `{v}`")))
            };
            match key {
                "seed" => {
                    cfg.seed = Some(
                        value
                            .parse()
                            .map_err(|_| err(format!("bad seed `{value}`")))?,
                    )
                }
                "norms" => cfg.norms = Some(path()),
                "tokenizer_id" => cfg.tokenizer_id = Some(value.to_string()),
                "tokenizer_vocab" => cfg.tokenizer_vocab = Some(path()),
                "tokenizer_merges" => cfg.tokenizer_merges = Some(path()),
                "tokenization_map" => cfg.tokenization_map = Some(path()),
                "corpus" => cfg.corpus = Some(path()),
                "corpus_format" => {
                    cfg.corpus_format = match value {
                        "text" => CorpusFormat::Text,
                        "ids" => CorpusFormat::Ids,
                        other => {
                            return Err(err(format!(
                                "corpus_format must be `text` or `ids`, got `{other}`"
                            )))
                        }
                    }
                }
                "ngram_counts" => cfg.ngram_counts = Some(path()),
                "dump" => cfg.dumps.push(path()),
                "embeddings" => cfg.embeddings = Some(path()),
                "embeddings_blob" => cfg.embeddings_blob = Some(path()),
                "reference_model" => cfg.reference_model = Some(value.to_string()),
                "analyses" => {
                    let names: BTreeSet<String> = value
                        .split(',')
                        .map(|s| s.trim().to_string())
                        .filter(|s| !s.is_empty())
                        .collect();
                    if let Some(bad) = names.iter().find(|n| !is_known_analysis(n)) {
                        return Err(err(format!("unknown analysis `{bad}`")));
                    }
                    cfg.analyses = Some(names);
                }
                "topk" => cfg.topk = int(value)?,
                "dims" => cfg.dims = parse_list(value).map_err(err)?,
                "neighbors" => cfg.neighbors = parse_list(value).map_err(err)?,
                "n_bins" => cfg.n_bins = int(value)?,
                "logit_alpha" => cfg.logit_alpha = num(value)?,
                "backoff_alpha" => cfg.backoff_alpha = num(value)?,
                "order" => cfg.order = int(value)?,
                "resamples" => cfg.resamples = int(value)?,
                "resample_unit" => {
                    cfg.resample_unit = match value {
                        "pair" => ResampleUnit::Pair,
                        "stem" => ResampleUnit::Stem,
                        other => {
                            return Err(err(format!(
                                "resample_unit must be `pair` or `stem`, got `{other}`"
                            )))
                        }
                    }
                }
                other => return Err(err(format!("unknown key `{other}`"))),
            }
        }
        Ok(cfg)
    }

    pub fn seed(&self) -> Result<u64> {
        self.seed.ok_or_else(|| {
            CliError::Config("a seed is required (`--seed` or `seed =` in the config)".into())
        })
    }

    pub fn norms(&self) -> Result<&Path> {
        self.norms
            .as_deref()
            .ok_or_else(|| CliError::Config("no norms file given".into()))
    }

    /// Checks parameter ranges and that every referenced file exists.
    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(CliError::Config(m));
        if self.topk == 0 {
            return fail("topk must be at least 1".into());
        }
        if self.dims.contains(&0) || self.neighbors.contains(&0) {
            return fail("dims and neighbors must be positive".into());
        }
        if self.n_bins < 2 {
            return fail("n_bins must be at least 2".into());
        }
        if !(self.logit_alpha > 0.0) {
            return fail("logit_alpha must be positive".into());
        }
        if self.resamples < 100 {
            return fail("resamples must be at least 100".into());
        }
        if self.tokenizer_vocab.is_some() != self.tokenizer_merges.is_some() {
            return fail("tokenizer_vocab and tokenizer_merges go together".into());
        }
        let paths = self
            .norms
            .iter()
            .chain(&self.tokenizer_vocab)
            .chain(&self.tokenizer_merges)
            .chain(&self.tokenization_map)
            .chain(&self.corpus)
            .chain(&self.ngram_counts)
            .chain(&self.dumps)
            .chain(&self.embeddings)
            .chain(&self.embeddings_blob);
        for p in paths {
            if !p.exists() {
                return fail(format!("{} does not exist", p.display()));
            }
        }
        Ok(())
    }

    pub fn has_ngram_inputs(&self) -> bool {
        self.ngram_counts.is_some() || self.corpus.is_some()
    }

    /// The analyses to run: the explicit selection, or everything whose
    /// inputs are present. Selecting an analysis without its inputs is an
    /// error.
    pub fn selected_analyses(&self) -> Result<BTreeSet<String>> {
        match &self.analyses {
            Some(names) => {
                for name in names {
                    let needs_ngram = Analysis::from_name(name).is_some_and(Analysis::needs_ngram);
                    if needs_ngram && !self.has_ngram_inputs() {
                        return Err(CliError::Config(format!(
                            "`{name}` needs `ngram_counts` or `corpus`"
                        )));
                    }
                    if (name == RSA_EMBED || name == OVERLAP_EMBED) && self.embeddings.is_none() {
                        return Err(CliError::Config(format!("`{name}` needs `embeddings`")));
                    }
                }
                Ok(names.clone())
            }
            None => {
                let mut names: BTreeSet<String> = Analysis::ALIGNMENT
                    .iter()
                    .map(|a| a.name().to_string())
                    .collect();
                if self.has_ngram_inputs() {
                    names.extend(Analysis::NGRAM.iter().map(|a| a.name().to_string()));
                }
                names.insert(RSA_PPMI.into());
                if self.embeddings.is_some() {
                    names.insert(RSA_EMBED.into());
                    names.insert(OVERLAP_EMBED.into());
                }
                Ok(names)
            }
        }
    }
}
