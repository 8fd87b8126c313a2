use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use clozealign::config::{RunConfig, OVERLAP_EMBED, RSA_EMBED, RSA_PPMI};
use clozealign::error::{CliError, Result};
use clozealign::formats::counts::{count_corpus, save_counts, CorpusFormat};
use clozealign::formats::tokenizer::write_tokenization_map;
use clozealign::pipeline::{self, Shared};
use clozealign::report::{
    parse_report, render_calibration, render_correlations, render_report, render_scores,
    render_subword_stats, write_output, Format,
};
use clozealign_core::norms::response_subword_stats;
use clozealign_core::predictions::{align, Analysis};

/// Compare cloze completion norms with language-model next-word predictions.
#[derive(Parser)]
#[command(name = "clozealign", version)]
struct Cli {
    /// Global seed for every randomized step.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Key/value run configuration; flags override its entries.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output file; standard output when absent.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t)]
    format: Format,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Default)]
struct Inputs {
    /// Cloze norms CSV.
    #[arg(long)]
    norms: Option<PathBuf>,
    /// Prediction dump; may repeat.
    #[arg(long = "dump")]
    dumps: Vec<PathBuf>,
    #[arg(long)]
    tokenizer_vocab: Option<PathBuf>,
    #[arg(long)]
    tokenizer_merges: Option<PathBuf>,
    #[arg(long)]
    tokenization_map: Option<PathBuf>,
    /// Binary n-gram counts from `ngram-count`.
    #[arg(long)]
    counts: Option<PathBuf>,
    /// Corpus text, one document per line.
    #[arg(long)]
    corpus: Option<PathBuf>,
    /// Corpus lines hold whitespace-separated token ids instead of text.
    #[arg(long)]
    corpus_ids: bool,
    /// Embedding index; the blob defaults to the same name with `.bin`.
    #[arg(long)]
    embeddings: Option<PathBuf>,
    #[arg(long)]
    embeddings_blob: Option<PathBuf>,
    /// Number of completions per stem in semantic spaces.
    #[arg(long)]
    topk: Option<usize>,
    #[arg(long)]
    resamples: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Validate a norms file and write the tokenization map of its responses.
    IngestNorms {
        #[command(flatten)]
        inputs: Inputs,
        /// Print first-subword statistics instead of the map.
        #[arg(long)]
        stats: bool,
    },
    /// Count n-grams of a corpus into a binary count file.
    NgramCount {
        #[command(flatten)]
        inputs: Inputs,
        #[arg(long)]
        order: Option<usize>,
    },
    /// Score every response with stupid backoff and unigram frequency, or
    /// correlate those scores with each dump given.
    NgramScore {
        #[command(flatten)]
        inputs: Inputs,
        #[arg(long)]
        order: Option<usize>,
        #[arg(long)]
        alpha: Option<f64>,
    },
    /// Probability, logit and Luce correlations and the logit regression.
    AlignProb {
        #[command(flatten)]
        inputs: Inputs,
    },
    /// Spearman correlation of within-stem human and model ranks.
    AlignRank {
        #[command(flatten)]
        inputs: Inputs,
    },
    /// Mean model probability per cloze-probability bin for one dump.
    Calibrate {
        #[command(flatten)]
        inputs: Inputs,
        #[arg(long)]
        bins: Option<usize>,
    },
    /// RSA between human and model PPMI spaces.
    RsaPpmi {
        #[command(flatten)]
        inputs: Inputs,
        /// Dimensionalities, e.g. `10,25,50`.
        #[arg(long, value_delimiter = ',')]
        dims: Vec<usize>,
    },
    /// RSA between pooled-embedding spaces of human and model completions.
    RsaEmbed {
        #[command(flatten)]
        inputs: Inputs,
    },
    /// Nearest-neighbor overlap between pooled-embedding spaces.
    Overlap {
        #[command(flatten)]
        inputs: Inputs,
        #[arg(long = "k", value_delimiter = ',')]
        neighbors: Vec<usize>,
    },
    /// Every selected analysis on every dump of the configuration.
    Sweep {
        #[command(flatten)]
        inputs: Inputs,
    },
    /// Re-render a sweep report, e.g. to convert CSV to JSON lines.
    Report {
        input: PathBuf,
        /// Format of the input report.
        #[arg(long, value_enum, default_value_t)]
        from: Format,
    },
}

fn base_config(cli: &Cli) -> Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if cli.seed.is_some() {
        cfg.seed = cli.seed;
    }
    Ok(cfg)
}

fn apply(cfg: &mut RunConfig, inputs: &Inputs) {
    fn set<T: Clone>(slot: &mut Option<T>, v: &Option<T>) {
        if v.is_some() {
            slot.clone_from(v);
        }
    }
    set(&mut cfg.norms, &inputs.norms);
    set(&mut cfg.tokenizer_vocab, &inputs.tokenizer_vocab);
    set(&mut cfg.tokenizer_merges, &inputs.tokenizer_merges);
    set(&mut cfg.tokenization_map, &inputs.tokenization_map);
    set(&mut cfg.ngram_counts, &inputs.counts);
    set(&mut cfg.corpus, &inputs.corpus);
    set(&mut cfg.embeddings, &inputs.embeddings);
    set(&mut cfg.embeddings_blob, &inputs.embeddings_blob);
    if !inputs.dumps.is_empty() {
        cfg.dumps.clone_from(&inputs.dumps);
    }
    if inputs.corpus_ids {
        cfg.corpus_format = CorpusFormat::Ids;
    }
    if let Some(k) = inputs.topk {
        cfg.topk = k;
    }
    if let Some(r) = inputs.resamples {
        cfg.resamples = r;
    }
}

fn require_dumps(cfg: &RunConfig) -> Result<()> {
    if cfg.dumps.is_empty() {
        return Err(CliError::Config("give at least one `--dump`".into()));
    }
    Ok(())
}

/// Runs `analyses` on every configured dump and renders the correlation table.
fn correlate(cfg: &mut RunConfig, analyses: &[&str], format: Format) -> Result<String> {
    cfg.validate()?;
    require_dumps(cfg)?;
    let seed = cfg.seed()?;
    let selected: BTreeSet<String> = analyses.iter().map(|s| s.to_string()).collect();
    cfg.analyses = Some(selected.clone());
    cfg.selected_analyses()?;
    let shared = Shared::load(cfg, &selected)?;
    let mut rows = Vec::new();
    for path in &cfg.dumps {
        rows.extend(shared.dump_rows(path, cfg, &selected, seed)?);
    }
    let report = clozealign::report::AlignmentReport::new(rows)?;
    render_correlations(report.rows(), format)
}

fn run(cli: Cli) -> Result<()> {
    let mut cfg = base_config(&cli)?;
    let format = cli.format;
    let out = cli.out.as_deref();
    let text = match &cli.command {
        Command::IngestNorms { inputs, stats } => {
            apply(&mut cfg, inputs);
            cfg.validate()?;
            let norms = pipeline::load_norms(&cfg)?;
            let spec = pipeline::load_tokenizer(&cfg)?;
            let map = pipeline::load_map(&cfg, &spec, &norms)?;
            log::info!(
                "{} stems, {} response types",
                norms.len(),
                norms.response_types().len()
            );
            if *stats {
                let s = response_subword_stats(&norms, &map)?;
                render_subword_stats(&s, norms.response_types().len(), format)?
            } else {
                let mut buf = Vec::new();
                write_tokenization_map(&map, &mut buf)
                    .map_err(|e| CliError::io(out.unwrap_or(Path::new("-")), e))?;
                String::from_utf8(buf).expect("JSON is UTF-8")
            }
        }
        Command::NgramCount { inputs, order } => {
            apply(&mut cfg, inputs);
            if let Some(o) = order {
                cfg.order = *o;
            }
            cfg.validate()?;
            let corpus = cfg
                .corpus
                .as_deref()
                .ok_or_else(|| CliError::Config("ngram-count needs `--corpus`".into()))?;
            let out = out.ok_or_else(|| {
                CliError::Config("ngram-count writes binary; give `--out`".into())
            })?;
            let spec = pipeline::load_tokenizer(&cfg)?;
            let counts = count_corpus(corpus, &spec, cfg.corpus_format, cfg.order)?;
            return save_counts(&counts, out);
        }
        Command::NgramScore {
            inputs,
            order,
            alpha,
        } => {
            apply(&mut cfg, inputs);
            if let Some(o) = order {
                cfg.order = *o;
            }
            if let Some(a) = alpha {
                cfg.backoff_alpha = *a;
            }
            if cfg.dumps.is_empty() {
                cfg.validate()?;
                let norms = pipeline::load_norms(&cfg)?;
                let spec = pipeline::load_tokenizer(&cfg)?;
                let map = pipeline::load_map(&cfg, &spec, &norms)?;
                let counts = pipeline::load_counts(&cfg, &spec)?;
                let scores = clozealign_core::ngram::score_stems(
                    &counts,
                    &norms,
                    &map,
                    &spec,
                    &pipeline::backoff(&cfg)?,
                )?;
                render_scores(&scores, format)?
            } else {
                let names: Vec<&str> = Analysis::NGRAM.iter().map(|a| a.name()).collect();
                correlate(&mut cfg, &names, format)?
            }
        }
        Command::AlignProb { inputs } => {
            apply(&mut cfg, inputs);
            let names: Vec<&str> = Analysis::ALIGNMENT
                .iter()
                .filter(|&&a| a != Analysis::RankSpearman)
                .map(|a| a.name())
                .collect();
            correlate(&mut cfg, &names, format)?
        }
        Command::AlignRank { inputs } => {
            apply(&mut cfg, inputs);
            correlate(&mut cfg, &[Analysis::RankSpearman.name()], format)?
        }
        Command::Calibrate { inputs, bins } => {
            apply(&mut cfg, inputs);
            if let Some(b) = bins {
                cfg.n_bins = *b;
            }
            cfg.validate()?;
            let seed = cfg.seed()?;
            let [dump_path] = cfg.dumps.as_slice() else {
                return Err(CliError::Config(
                    "calibrate takes exactly one `--dump`".into(),
                ));
            };
            let norms = pipeline::load_norms(&cfg)?;
            let spec = pipeline::load_tokenizer(&cfg)?;
            let dump = pipeline::load_dump(dump_path, &spec)?;
            let rows = align(&norms, &dump).map_err(|e| CliError::data(dump_path, e))?;
            render_calibration(
                &pipeline::calibration(&rows, dump.header(), &cfg, seed)?,
                format,
            )?
        }
        Command::RsaPpmi { inputs, dims } => {
            apply(&mut cfg, inputs);
            if !dims.is_empty() {
                cfg.dims.clone_from(dims);
            }
            correlate(&mut cfg, &[RSA_PPMI], format)?
        }
        Command::RsaEmbed { inputs } => {
            apply(&mut cfg, inputs);
            correlate(&mut cfg, &[RSA_EMBED], format)?
        }
        Command::Overlap { inputs, neighbors } => {
            apply(&mut cfg, inputs);
            if !neighbors.is_empty() {
                cfg.neighbors.clone_from(neighbors);
            }
            correlate(&mut cfg, &[OVERLAP_EMBED], format)?
        }
        Command::Sweep { inputs } => {
            apply(&mut cfg, inputs);
            render_report(&pipeline::run_sweep(&cfg)?, format)?
        }
        Command::Report { input, from } => {
            let text = std::fs::read_to_string(input).map_err(|e| CliError::io(input, e))?;
            render_report(&parse_report(&text, *from, input)?, format)?
        }
    };
    write_output(&text, out)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
