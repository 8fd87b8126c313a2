//! Model prediction dumps and the analyses that join them to cloze norms.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;

use crate::ngram::ResponseScore;
use crate::norms::ClozeNorms;
use crate::semspace::{fold, ScoredCompletions};
use crate::stats::{
    bootstrap_ci_with, logit, luce_renormalize, ols_fit, pearson, spearman, within_stem_ranks,
    BootstrapData, Interval, PairedSeries, ResampleUnit, Statistic, DEFAULT_LOGIT_ALPHA,
    DEFAULT_RESAMPLES,
};
use crate::tokenizer::{first_subword, TokenizerSpec};
use crate::{Error, Result};

/// Slack allowed on the sum of a top-k list.
pub const TOPK_SUM_TOL: f64 = 1e-6;

/// Identity of the checkpoint that produced a dump.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DumpHeader {
    pub model_id: String,
    pub n_params: u64,
    pub checkpoint_step: u64,
    pub dedup: bool,
    pub tokenizer: String,
    pub top_k: usize,
    /// Whether responses were encoded with a leading space.
    pub leading_space: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResponsePrediction {
    pub text: String,
    pub first_subword_id: u32,
    pub prob: f64,
    /// Position in the full next-token distribution, 1 = most probable.
    pub rank: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StemPrediction {
    pub stem_id: String,
    pub top: Vec<(u32, f64)>,
    pub responses: Vec<ResponsePrediction>,
}

/// Next-token predictions of one checkpoint for a set of stems.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionDump {
    header: DumpHeader,
    stems: Vec<StemPrediction>,
}

fn check_prob(p: f64, what: &str, stem_id: &str) -> Result<()> {
    if !(p > 0.0 && p <= 1.0) {
        return Err(Error::InvalidRecord(alloc::format!(
            "stem `{stem_id}`: {what} probability {p} outside (0, 1]"
        )));
    }
    Ok(())
}

impl PredictionDump {
    pub fn new(header: DumpHeader, stems: Vec<StemPrediction>) -> Result<Self> {
        if header.model_id.is_empty() {
            return Err(Error::InvalidRecord("dump header has no model id".into()));
        }
        if header.n_params == 0 {
            return Err(Error::InvalidRecord(alloc::format!(
                "model `{}` declares zero parameters",
                header.model_id
            )));
        }
        let mut seen = BTreeSet::new();
        for stem in &stems {
            if !seen.insert(stem.stem_id.as_str()) {
                return Err(Error::InvalidRecord(alloc::format!(
                    "stem `{}` appears twice",
                    stem.stem_id
                )));
            }
            if stem.top.len() > header.top_k {
                return Err(Error::InvalidRecord(alloc::format!(
                    "stem `{}` lists {} tokens, header allows {}",
                    stem.stem_id,
                    stem.top.len(),
                    header.top_k
                )));
            }
            let mut sum = 0.0;
            for (i, &(_, p)) in stem.top.iter().enumerate() {
                check_prob(p, "top-k", &stem.stem_id)?;
                if i > 0 && p > stem.top[i - 1].1 {
                    return Err(Error::InvalidRecord(alloc::format!(
                        "stem `{}`: top-k list is not sorted",
                        stem.stem_id
                    )));
                }
                sum += p;
            }
            if sum > 1.0 + TOPK_SUM_TOL {
                return Err(Error::InvalidRecord(alloc::format!(
                    "stem `{}`: top-k probabilities sum to {sum}",
                    stem.stem_id
                )));
            }
            let mut texts = BTreeSet::new();
            for r in &stem.responses {
                check_prob(r.prob, "response", &stem.stem_id)?;
                if r.rank == 0 {
                    return Err(Error::InvalidRecord(alloc::format!(
                        "stem `{}`: response `{}` has rank 0",
                        stem.stem_id,
                        r.text
                    )));
                }
                if !texts.insert(r.text.as_str()) {
                    return Err(Error::DuplicateRecord {
                        stem_id: stem.stem_id.clone(),
                        response: r.text.clone(),
                    });
                }
            }
        }
        Ok(PredictionDump { header, stems })
    }

    pub fn header(&self) -> &DumpHeader {
        &self.header
    }

    pub fn stems(&self) -> &[StemPrediction] {
        &self.stems
    }

    pub fn stem(&self, stem_id: &str) -> Option<&StemPrediction> {
        self.stems.iter().find(|s| s.stem_id == stem_id)
    }

    /// Checks that the dump was produced with `spec`: same tokenizer id,
    /// in-vocabulary ids, and first-subword ids that `spec` reproduces.
    pub fn check_tokenizer(&self, spec: &TokenizerSpec) -> Result<()> {
        if self.header.tokenizer != spec.id() {
            return Err(Error::Compatibility(alloc::format!(
                "dump `{}` uses tokenizer `{}`, expected `{}`",
                self.header.model_id,
                self.header.tokenizer,
                spec.id()
            )));
        }
        let vocab = spec.vocab_size() as u64;
        for stem in &self.stems {
            if let Some(&(id, _)) = stem.top.iter().find(|(id, _)| u64::from(*id) >= vocab) {
                return Err(Error::Compatibility(alloc::format!(
                    "stem `{}`: token {id} outside vocabulary of {vocab}",
                    stem.stem_id
                )));
            }
            for r in &stem.responses {
                let expect = first_subword(spec, &r.text, self.header.leading_space)?;
                if expect != r.first_subword_id {
                    return Err(Error::Compatibility(alloc::format!(
                        "stem `{}`: `{}` has first subword {}, tokenizer gives {expect}",
                        stem.stem_id,
                        r.text,
                        r.first_subword_id
                    )));
                }
            }
        }
        Ok(())
    }
}

/// One human response joined with the model's view of it.
#[derive(Debug, Clone, PartialEq)]
pub struct AlignedResponse {
    pub stem_id: String,
    pub response: String,
    pub count: u64,
    pub cloze_prob: f64,
    /// Within-stem rank by count, 1 = most frequent.
    pub human_rank: f64,
    pub model_prob: f64,
    pub model_rank: u64,
    /// Model probability renormalized over the stem's attested responses.
    pub luce_prob: f64,
}

/// Joins norms with a dump on `(stem_id, response)`.
///
/// Stems the dump does not cover are skipped. Every response of a covered
/// stem must be present in the dump.
pub fn align(norms: &ClozeNorms, dump: &PredictionDump) -> Result<Vec<AlignedResponse>> {
    let mut missing = BTreeSet::new();
    let mut out = Vec::new();
    let mut by_stem: BTreeMap<&str, &StemPrediction> = BTreeMap::new();
    for s in &dump.stems {
        if norms.stem(&s.stem_id).is_none() {
            return Err(Error::Lookup(s.stem_id.clone()));
        }
        by_stem.insert(&s.stem_id, s);
    }
    for (stem, responses) in norms.iter() {
        let Some(pred) = by_stem.get(stem.stem_id.as_str()) else {
            continue;
        };
        let lookup: BTreeMap<&str, &ResponsePrediction> = pred
            .responses
            .iter()
            .map(|r| (r.text.as_str(), r))
            .collect();
        let mut found = Vec::with_capacity(responses.len());
        for r in responses {
            match lookup.get(r.text.as_str()) {
                Some(p) => found.push((r, *p)),
                None => {
                    missing.insert(alloc::format!("{}/{}", stem.stem_id, r.text));
                }
            }
        }
        if found.len() != responses.len() {
            continue;
        }
        let counts: Vec<f64> = found.iter().map(|(r, _)| r.count as f64).collect();
        let ranks = within_stem_ranks(&counts)?;
        let probs: Vec<f64> = found.iter().map(|(_, p)| p.prob).collect();
        let luce = luce_renormalize(&probs)?;
        for (((r, p), rank), l) in found.into_iter().zip(ranks).zip(luce) {
            out.push(AlignedResponse {
                stem_id: stem.stem_id.clone(),
                response: r.text.clone(),
                count: r.count,
                cloze_prob: r.cloze_prob,
                human_rank: rank,
                model_prob: p.prob,
                model_rank: p.rank,
                luce_prob: l,
            });
        }
    }
    if !missing.is_empty() {
        return Err(Error::Coverage(missing.into_iter().collect()));
    }
    Ok(out)
}

/// Analyses computed from an aligned table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Analysis {
    ProbPearson,
    ProbSpearman,
    LogitPearson,
    LuceLogitPearson,
    RankSpearman,
    /// Slope of model logit regressed on cloze logit.
    LogitSlope,
    LogitIntercept,
    NgramHuman,
    NgramModel,
    UnigramHuman,
    UnigramModel,
}

impl Analysis {
    pub const ALIGNMENT: [Analysis; 7] = [
        Analysis::ProbPearson,
        Analysis::ProbSpearman,
        Analysis::LogitPearson,
        Analysis::LuceLogitPearson,
        Analysis::RankSpearman,
        Analysis::LogitSlope,
        Analysis::LogitIntercept,
    ];

    pub const NGRAM: [Analysis; 4] = [
        Analysis::NgramHuman,
        Analysis::NgramModel,
        Analysis::UnigramHuman,
        Analysis::UnigramModel,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Analysis::ProbPearson => "prob_pearson",
            Analysis::ProbSpearman => "prob_spearman",
            Analysis::LogitPearson => "logit_pearson",
            Analysis::LuceLogitPearson => "luce_logit_pearson",
            Analysis::RankSpearman => "rank_spearman",
            Analysis::LogitSlope => "logit_ols_slope",
            Analysis::LogitIntercept => "logit_ols_intercept",
            Analysis::NgramHuman => "ngram_human_spearman",
            Analysis::NgramModel => "ngram_model_spearman",
            Analysis::UnigramHuman => "unigram_human_spearman",
            Analysis::UnigramModel => "unigram_model_spearman",
        }
    }

    pub fn from_name(name: &str) -> Option<Analysis> {
        Self::ALIGNMENT
            .iter()
            .chain(&Self::NGRAM)
            .copied()
            .find(|a| a.name() == name)
    }

    pub fn needs_ngram(self) -> bool {
        Self::NGRAM.contains(&self)
    }

    fn statistic(self) -> Option<Statistic> {
        match self {
            Analysis::ProbPearson | Analysis::LogitPearson | Analysis::LuceLogitPearson => {
                Some(Statistic::Pearson)
            }
            Analysis::LogitSlope | Analysis::LogitIntercept => None,
            _ => Some(Statistic::Spearman),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnalysisSettings {
    pub logit_alpha: f64,
    pub n_resamples: usize,
    pub unit: ResampleUnit,
}

impl Default for AnalysisSettings {
    fn default() -> Self {
        AnalysisSettings {
            logit_alpha: DEFAULT_LOGIT_ALPHA,
            n_resamples: DEFAULT_RESAMPLES,
            unit: ResampleUnit::Pair,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnalysisResult {
    pub statistic: f64,
    pub ci: Option<Interval>,
    pub n: usize,
}

fn labels(rows: &[AlignedResponse]) -> Vec<(String, String)> {
    rows.iter()
        .map(|r| (r.stem_id.clone(), r.response.clone()))
        .collect()
}

fn labelled(x: Vec<f64>, y: Vec<f64>, rows: &[AlignedResponse]) -> Result<PairedSeries> {
    PairedSeries::new(x, y)?.with_labels(labels(rows))
}

/// The paired observations an alignment analysis correlates.
///
/// Probability analyses pair cloze with model probability, logit analyses
/// apply the smoothed logit to both, and the rank analysis pairs the human
/// within-stem rank with the model's vocabulary rank.
pub fn alignment_series(
    rows: &[AlignedResponse],
    analysis: Analysis,
    alpha: f64,
) -> Result<PairedSeries> {
    let x_logit = || {
        rows.iter()
            .map(|r| logit(r.cloze_prob, alpha))
            .collect::<Result<Vec<_>>>()
    };
    match analysis {
        Analysis::ProbPearson | Analysis::ProbSpearman => labelled(
            rows.iter().map(|r| r.cloze_prob).collect(),
            rows.iter().map(|r| r.model_prob).collect(),
            rows,
        ),
        Analysis::LogitPearson | Analysis::LogitSlope | Analysis::LogitIntercept => labelled(
            x_logit()?,
            rows.iter()
                .map(|r| logit(r.model_prob, alpha))
                .collect::<Result<_>>()?,
            rows,
        ),
        Analysis::LuceLogitPearson => labelled(
            x_logit()?,
            rows.iter()
                .map(|r| logit(r.luce_prob, alpha))
                .collect::<Result<_>>()?,
            rows,
        ),
        Analysis::RankSpearman => labelled(
            rows.iter().map(|r| r.human_rank).collect(),
            rows.iter().map(|r| r.model_rank as f64).collect(),
            rows,
        ),
        _ => Err(Error::Argument(alloc::format!(
            "`{}` needs n-gram scores",
            analysis.name()
        ))),
    }
}

/// Pairs n-gram scores with human or model probabilities.
pub fn ngram_series(
    rows: &[AlignedResponse],
    scores: &[ResponseScore],
    analysis: Analysis,
) -> Result<PairedSeries> {
    let index: BTreeMap<(&str, &str), &ResponseScore> = scores
        .iter()
        .map(|s| ((s.stem_id.as_str(), s.response.as_str()), s))
        .collect();
    let mut x = Vec::with_capacity(rows.len());
    let mut y = Vec::with_capacity(rows.len());
    let mut missing = Vec::new();
    for r in rows {
        let Some(s) = index.get(&(r.stem_id.as_str(), r.response.as_str())) else {
            missing.push(alloc::format!("{}/{}", r.stem_id, r.response));
            continue;
        };
        let (score, target) = match analysis {
            Analysis::NgramHuman => (s.backoff, r.cloze_prob),
            Analysis::NgramModel => (s.backoff, r.model_prob),
            Analysis::UnigramHuman => (s.unigram, r.cloze_prob),
            Analysis::UnigramModel => (s.unigram, r.model_prob),
            _ => {
                return Err(Error::Argument(alloc::format!(
                    "`{}` is not an n-gram analysis",
                    analysis.name()
                )))
            }
        };
        x.push(score);
        y.push(target);
    }
    if !missing.is_empty() {
        return Err(Error::Coverage(missing));
    }
    labelled(x, y, rows)
}

/// Runs one analysis on a prepared series.
pub fn run_analysis(
    series: &PairedSeries,
    analysis: Analysis,
    settings: &AnalysisSettings,
    seed: u64,
) -> Result<AnalysisResult> {
    let n = series.len();
    match analysis.statistic() {
        Some(stat) => {
            let point = match stat {
                Statistic::Pearson => pearson(series)?,
                _ => spearman(series)?,
            };
            let ci = bootstrap_ci_with(
                stat,
                BootstrapData::Paired(series),
                settings.n_resamples,
                seed,
                settings.unit,
            )?
            .containing(point);
            Ok(AnalysisResult {
                statistic: point,
                ci: Some(ci),
                n,
            })
        }
        None => {
            let fit = ols_fit(series)?;
            // normal-approximation 95% interval
            let (est, se) = if analysis == Analysis::LogitSlope {
                (fit.slope, fit.slope_se)
            } else {
                (fit.intercept, fit.intercept_se)
            };
            Ok(AnalysisResult {
                statistic: est,
                ci: Some(Interval {
                    low: est - 1.959963984540054 * se,
                    high: est + 1.959963984540054 * se,
                }),
                n,
            })
        }
    }
}

/// Human completions per stem, scored by count and keyed by folded word.
pub fn human_completions(norms: &ClozeNorms) -> ScoredCompletions {
    let mut out = ScoredCompletions::new();
    for (stem, responses) in norms.iter() {
        for r in responses {
            out.insert(&stem.stem_id, fold(&r.text), r.count as f64);
        }
    }
    out
}

/// Model completions per stem: each top-k token decoded, trimmed and
/// folded. Tokens that decode to blank text are dropped.
pub fn model_completions(dump: &PredictionDump, spec: &TokenizerSpec) -> Result<ScoredCompletions> {
    let mut out = ScoredCompletions::new();
    for stem in &dump.stems {
        for &(id, p) in &stem.top {
            let text = spec.decode_lossy(&[id])?;
            let word = fold(text.trim());
            if !word.is_empty() {
                out.insert(&stem.stem_id, word, p);
            }
        }
    }
    Ok(out)
}
