//! Loading inputs and turning them into report rows.
//!
//! Every subcommand and the sweep go through these functions, so a row
//! computed by `align-prob` is identical to the same row in a sweep report.

use std::collections::BTreeSet;
use std::path::Path;

use clozealign_core::linalg::Matrix;
use clozealign_core::ngram::{score_stems, BackoffParams, NgramCounts, ResponseScore};
use clozealign_core::norms::{ClozeNorms, TokenizationMap};
use clozealign_core::predictions::{
    align, alignment_series, human_completions, model_completions, ngram_series, run_analysis,
    AlignedResponse, Analysis, AnalysisResult, AnalysisSettings, DumpHeader, PredictionDump,
};
use clozealign_core::seed::derive_seed;
use clozealign_core::semspace::{
    cooccurrence_counts, cosine_similarity_matrix, fold, intersect_spaces, mean_pool_embeddings,
    neighborhood_overlap_sim, nonconstant_rows, ppmi, principal_components, project, row_normalize,
    rsa_spearman, topk_responses, DatasetSelector, EmbeddingDump, Pca, ScoredCompletions,
    SemanticSpace,
};
use clozealign_core::stats::{calibration_curve_with, CalibrationCurve, PairedSeries};
use clozealign_core::tokenizer::TokenizerSpec;
use rayon::prelude::*;

use crate::config::{RunConfig, OVERLAP_EMBED, RSA_EMBED, RSA_PPMI};
use crate::error::{CliError, Result};
use crate::formats::counts::{count_corpus, read_counts};
use crate::formats::dump::read_dump;
use crate::formats::embeddings::{blob_path, read_embeddings};
use crate::formats::norms::read_norms;
use crate::formats::tokenizer::{bundled_gpt2, read_tokenization_map, read_tokenizer, GPT2_ID};
use crate::report::{AlignmentReport, ReportRow};

pub const CALIBRATION: &str = "calibration";

pub fn load_norms(cfg: &RunConfig) -> Result<ClozeNorms> {
    let path = cfg.norms()?;
    let (norms, warnings) = read_norms(path)?;
    for w in &warnings {
        log::warn!("{}: {w:?}", path.display());
    }
    Ok(norms)
}

pub fn load_tokenizer(cfg: &RunConfig) -> Result<TokenizerSpec> {
    match (&cfg.tokenizer_vocab, &cfg.tokenizer_merges) {
        (Some(v), Some(m)) => read_tokenizer(cfg.tokenizer_id.as_deref().unwrap_or("custom"), v, m),
        (None, None) => match cfg.tokenizer_id.as_deref() {
            None | Some(GPT2_ID) => Ok(bundled_gpt2()),
            Some(other) => Err(CliError::Config(format!(
                "tokenizer `{other}` is not bundled; give tokenizer_vocab and tokenizer_merges"
            ))),
        },
        _ => Err(CliError::Config(
            "tokenizer_vocab and tokenizer_merges go together".into(),
        )),
    }
}

/// The configured map, checked against the tokenizer, or one built by
/// encoding every response type.
pub fn load_map(
    cfg: &RunConfig,
    spec: &TokenizerSpec,
    norms: &ClozeNorms,
) -> Result<TokenizationMap> {
    match &cfg.tokenization_map {
        Some(path) => {
            let map = read_tokenization_map(path)?;
            map.validate_against(spec)
                .map_err(|e| CliError::data(path, e))?;
            Ok(map)
        }
        None => Ok(TokenizationMap::build(spec, norms.response_types())?),
    }
}

pub fn load_counts(cfg: &RunConfig, spec: &TokenizerSpec) -> Result<NgramCounts> {
    match (&cfg.ngram_counts, &cfg.corpus) {
        (Some(path), _) => read_counts(path),
        (None, Some(corpus)) => count_corpus(corpus, spec, cfg.corpus_format, cfg.order),
        (None, None) => Err(CliError::Config(
            "n-gram analyses need `ngram_counts` or `corpus`".into(),
        )),
    }
}

pub fn load_embeddings(cfg: &RunConfig) -> Result<EmbeddingDump> {
    let index = cfg
        .embeddings
        .as_deref()
        .ok_or_else(|| CliError::Config("no embeddings given".into()))?;
    let blob = cfg
        .embeddings_blob
        .clone()
        .unwrap_or_else(|| blob_path(index));
    let dump = read_embeddings(index, &blob)?;
    if let Some(expected) = &cfg.reference_model {
        if &dump.reference_model != expected {
            return Err(CliError::data(
                index,
                clozealign_core::Error::Compatibility(format!(
                    "embeddings come from `{}`, expected `{expected}`",
                    dump.reference_model
                )),
            ));
        }
    }
    Ok(dump)
}

/// Reads a dump and checks it against the tokenizer.
pub fn load_dump(path: &Path, spec: &TokenizerSpec) -> Result<PredictionDump> {
    let dump = read_dump(path)?;
    dump.check_tokenizer(spec)
        .map_err(|e| CliError::data(path, e))?;
    Ok(dump)
}

pub fn settings(cfg: &RunConfig) -> AnalysisSettings {
    AnalysisSettings {
        logit_alpha: cfg.logit_alpha,
        n_resamples: cfg.resamples,
        unit: cfg.resample_unit,
    }
}

pub fn backoff(cfg: &RunConfig) -> Result<BackoffParams> {
    Ok(BackoffParams::new(cfg.backoff_alpha, cfg.order)?)
}

/// Seed for one analysis of one model, independent of which other analyses
/// or models are in the run.
pub fn substream_seed(seed: u64, analysis: &str, model_id: &str) -> u64 {
    derive_seed(seed, &[analysis, model_id])
}

pub fn make_row(
    header: &DumpHeader,
    analysis: &str,
    statistic: f64,
    ci: Option<(f64, f64)>,
    n: usize,
) -> ReportRow {
    ReportRow {
        analysis: analysis.to_string(),
        model_id: header.model_id.clone(),
        n_params: header.n_params,
        checkpoint_step: header.checkpoint_step,
        dedup: header.dedup,
        statistic,
        ci_low: ci.map(|c| c.0),
        ci_high: ci.map(|c| c.1),
        n,
    }
}

fn result_row(header: &DumpHeader, analysis: Analysis, r: AnalysisResult) -> ReportRow {
    make_row(
        header,
        analysis.name(),
        r.statistic,
        r.ci.map(|c| (c.low, c.high)),
        r.n,
    )
}

/// Rows for the alignment and n-gram analyses of one dump.
pub fn analysis_rows(
    header: &DumpHeader,
    rows: &[AlignedResponse],
    scores: Option<&[ResponseScore]>,
    analyses: &[Analysis],
    cfg: &RunConfig,
    seed: u64,
) -> Result<Vec<ReportRow>> {
    let settings = settings(cfg);
    analyses
        .iter()
        .map(|&a| {
            let series = if a.needs_ngram() {
                let scores = scores.ok_or_else(|| {
                    CliError::Config(format!("`{}` needs n-gram scores", a.name()))
                })?;
                ngram_series(rows, scores, a)?
            } else {
                alignment_series(rows, a, cfg.logit_alpha)?
            };
            let r = run_analysis(
                &series,
                a,
                &settings,
                substream_seed(seed, a.name(), &header.model_id),
            )?;
            Ok(result_row(header, a, r))
        })
        .collect()
}

pub fn calibration(
    rows: &[AlignedResponse],
    header: &DumpHeader,
    cfg: &RunConfig,
    seed: u64,
) -> Result<CalibrationCurve> {
    let pairs = PairedSeries::new(
        rows.iter().map(|r| r.cloze_prob).collect(),
        rows.iter().map(|r| r.model_prob).collect(),
    )?;
    Ok(calibration_curve_with(
        &pairs,
        cfg.n_bins,
        cfg.resamples,
        substream_seed(seed, CALIBRATION, &header.model_id),
    )?)
}

/// A row-normalized PPMI matrix and its principal directions, ready to be
/// projected at any dimensionality.
pub struct PpmiBasis {
    words: Vec<String>,
    normalized: Matrix,
    pca: Pca,
}

impl PpmiBasis {
    /// Builds the basis from each stem's top-`k` completions. Words whose
    /// PPMI row is constant carry no direction and are dropped.
    pub fn build(completions: &ScoredCompletions, stems: &[&str], k: usize) -> Result<Self> {
        let mut sets = Vec::with_capacity(stems.len());
        for stem in stems {
            if completions.get(stem).is_some() {
                sets.push(topk_responses(completions, stem, k)?);
            }
        }
        let cooc = cooccurrence_counts(&sets);
        let m = ppmi(&cooc)?;
        let keep = nonconstant_rows(&m);
        if keep.len() < m.rows() {
            log::info!(
                "dropping {} words with constant PPMI rows",
                m.rows() - keep.len()
            );
        }
        let words: Vec<String> = keep.iter().map(|&i| cooc.words()[i].clone()).collect();
        let normalized = row_normalize(&m.select_rows(&keep), &words)?;
        let pca = principal_components(&normalized)?;
        Ok(PpmiBasis {
            words,
            normalized,
            pca,
        })
    }

    pub fn max_dim(&self) -> usize {
        self.normalized.rows().min(self.normalized.cols())
    }

    pub fn space(&self, d: usize) -> Result<SemanticSpace> {
        Ok(project(&self.normalized, &self.pca, self.words.clone(), d)?)
    }
}

/// RSA between two spaces over their shared words: `(rho, |W|)`.
pub fn rsa(a: &SemanticSpace, b: &SemanticSpace) -> Result<(f64, usize)> {
    let (a, b) = intersect_spaces(a, b)?;
    let rho = rsa_spearman(
        &cosine_similarity_matrix(&a)?,
        &cosine_similarity_matrix(&b)?,
    )?;
    Ok((rho, a.len()))
}

pub fn rsa_ppmi_name(d: usize) -> String {
    format!("{RSA_PPMI}_d{d}")
}

pub fn overlap_name(k: usize) -> String {
    format!("{OVERLAP_EMBED}_k{k}")
}

/// One RSA row per configured dimensionality that both spaces support.
pub fn rsa_ppmi_rows(
    human: &PpmiBasis,
    dump: &PredictionDump,
    spec: &TokenizerSpec,
    stems: &[&str],
    cfg: &RunConfig,
) -> Result<Vec<ReportRow>> {
    let model = PpmiBasis::build(&model_completions(dump, spec)?, stems, cfg.topk)?;
    let mut rows = Vec::new();
    for &d in &cfg.dims {
        if d > human.max_dim() || d > model.max_dim() {
            log::warn!(
                "{}: skipping d = {d}; spaces support at most {} and {}",
                dump.header().model_id,
                human.max_dim(),
                model.max_dim()
            );
            continue;
        }
        let (rho, n) = rsa(&human.space(d)?, &model.space(d)?)?;
        rows.push(make_row(dump.header(), &rsa_ppmi_name(d), rho, None, n));
    }
    Ok(rows)
}

/// `(stem, word)` pairs of each stem's top-`k` completions.
pub fn selector(
    completions: &ScoredCompletions,
    stems: &[&str],
    k: usize,
) -> Result<DatasetSelector> {
    let mut sel = DatasetSelector::new();
    for stem in stems {
        if completions.get(stem).is_some() {
            for w in topk_responses(completions, stem, k)? {
                sel.insert(stem, &fold(&w));
            }
        }
    }
    Ok(sel)
}

/// RSA and neighborhood overlap between pooled-embedding spaces of the
/// human and model completions.
pub fn embedding_rows(
    human: &SemanticSpace,
    embeddings: &EmbeddingDump,
    dump: &PredictionDump,
    spec: &TokenizerSpec,
    stems: &[&str],
    cfg: &RunConfig,
    analyses: &BTreeSet<String>,
) -> Result<Vec<ReportRow>> {
    let model_sel = selector(&model_completions(dump, spec)?, stems, cfg.topk)?;
    let model = mean_pool_embeddings(embeddings, &model_sel)?;
    let (h, m) = intersect_spaces(human, &model)?;
    let (sh, sm) = (cosine_similarity_matrix(&h)?, cosine_similarity_matrix(&m)?);
    let mut rows = Vec::new();
    if analyses.contains(RSA_EMBED) {
        rows.push(make_row(
            dump.header(),
            RSA_EMBED,
            rsa_spearman(&sh, &sm)?,
            None,
            h.len(),
        ));
    }
    if analyses.contains(OVERLAP_EMBED) {
        for &k in &cfg.neighbors {
            if k + 1 > h.len() {
                log::warn!(
                    "{}: skipping k = {k}; only {} shared words",
                    dump.header().model_id,
                    h.len()
                );
                continue;
            }
            let a = neighborhood_overlap_sim(&sh, &sm, k)?;
            rows.push(make_row(dump.header(), &overlap_name(k), a, None, h.len()));
        }
    }
    Ok(rows)
}

/// Inputs shared by every dump in a run.
pub struct Shared {
    pub norms: ClozeNorms,
    pub spec: TokenizerSpec,
    pub scores: Option<Vec<ResponseScore>>,
    pub human_ppmi: Option<PpmiBasis>,
    pub embeddings: Option<(EmbeddingDump, SemanticSpace)>,
}

impl Shared {
    pub fn load(cfg: &RunConfig, analyses: &BTreeSet<String>) -> Result<Self> {
        let norms = load_norms(cfg)?;
        let spec = load_tokenizer(cfg)?;
        let needs_ngram = analyses
            .iter()
            .any(|a| Analysis::from_name(a).is_some_and(Analysis::needs_ngram));
        let scores = if needs_ngram {
            let map = load_map(cfg, &spec, &norms)?;
            let counts = load_counts(cfg, &spec)?;
            Some(score_stems(&counts, &norms, &map, &spec, &backoff(cfg)?)?)
        } else {
            None
        };
        let stems: Vec<&str> = norms.stems().iter().map(|s| s.stem_id.as_str()).collect();
        let human = human_completions(&norms);
        let human_ppmi = if analyses.contains(RSA_PPMI) {
            Some(PpmiBasis::build(&human, &stems, cfg.topk)?)
        } else {
            None
        };
        let embeddings = if analyses.contains(RSA_EMBED) || analyses.contains(OVERLAP_EMBED) {
            let dump = load_embeddings(cfg)?;
            let space = mean_pool_embeddings(&dump, &selector(&human, &stems, cfg.topk)?)?;
            Some((dump, space))
        } else {
            None
        };
        Ok(Shared {
            norms,
            spec,
            scores,
            human_ppmi,
            embeddings,
        })
    }

    /// Every selected row for one dump.
    pub fn dump_rows(
        &self,
        path: &Path,
        cfg: &RunConfig,
        analyses: &BTreeSet<String>,
        seed: u64,
    ) -> Result<Vec<ReportRow>> {
        let dump = load_dump(path, &self.spec)?;
        let aligned = align(&self.norms, &dump).map_err(|e| CliError::data(path, e))?;
        let selected: Vec<Analysis> = Analysis::ALIGNMENT
            .iter()
            .chain(&Analysis::NGRAM)
            .copied()
            .filter(|a| analyses.contains(a.name()))
            .collect();
        let mut rows = analysis_rows(
            dump.header(),
            &aligned,
            self.scores.as_deref(),
            &selected,
            cfg,
            seed,
        )?;
        let stems: Vec<&str> = dump.stems().iter().map(|s| s.stem_id.as_str()).collect();
        if let Some(human) = &self.human_ppmi {
            rows.extend(rsa_ppmi_rows(human, &dump, &self.spec, &stems, cfg)?);
        }
        if let Some((emb, human)) = &self.embeddings {
            rows.extend(embedding_rows(
                human, emb, &dump, &self.spec, &stems, cfg, analyses,
            )?);
        }
        log::info!("{}: {} rows", dump.header().model_id, rows.len());
        Ok(rows)
    }
}

/// Runs every selected analysis on every configured dump.
///
/// Dumps are processed in parallel; each row depends only on its own dump,
/// the shared inputs and the seed, so the report is identical for any
/// thread count or dump order.
pub fn run_sweep(cfg: &RunConfig) -> Result<AlignmentReport> {
    cfg.validate()?;
    let seed = cfg.seed()?;
    if cfg.dumps.is_empty() {
        return Err(CliError::Config("sweep needs at least one `dump`".into()));
    }
    let analyses = cfg.selected_analyses()?;
    let shared = Shared::load(cfg, &analyses)?;
    let per_dump: Vec<Vec<ReportRow>> = cfg
        .dumps
        .par_iter()
        .map(|path| shared.dump_rows(path, cfg, &analyses, seed))
        .collect::<Result<_>>()?;
    AlignmentReport::new(per_dump.into_iter().flatten().collect())
}
