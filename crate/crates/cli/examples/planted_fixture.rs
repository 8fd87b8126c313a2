//! Writes the planted-correlation fixture used by the end-to-end tests.
//!
//! ```text
//! cargo run -p clozealign --example planted_fixture -- crates/cli/tests/fixtures/planted
//! ```
//!
//! See `tests/fixtures/planted/README.md` for the simulation.

use std::f64::consts::PI;
use std::fs::{self, File};
use std::path::Path;

use clozealign::formats::dump::write_dump;
use clozealign::formats::embeddings::write_embeddings;
use clozealign::formats::norms::write_norms;
use clozealign::formats::tokenizer::{bundled_gpt2, GPT2_ID};
use clozealign_core::norms::{ClozeNorms, NormsRecord};
use clozealign_core::predictions::{
    DumpHeader, PredictionDump, ResponsePrediction, StemPrediction,
};
use clozealign_core::semspace::{EmbeddingDump, EmbeddingRecord};
use clozealign_core::tokenizer::TokenizerSpec;
use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use statrs::distribution::{ContinuousCDF, Normal};

const SEED: u64 = 0x5eed_c102e;
const N_STEMS: usize = 50;
const RESPONSES_PER_STEM: usize = 60;
const N_TOPICS: usize = 8;
const WORDS_PER_TOPIC: usize = 50;
const OFF_TOPIC: usize = 10;
const TOP_K: usize = 40;
const EMBED_DIM: usize = 16;
const CORPUS_LINES_PER_STEM: usize = 40;

/// Spearman correlation planted between cloze and model probabilities.
pub const PLANTED_SPEARMAN: f64 = 0.8;

/// Pearson correlation of a bivariate normal whose Spearman correlation is
/// `rho_s`.
fn copula_r(rho_s: f64) -> f64 {
    2.0 * (PI * rho_s / 6.0).sin()
}

/// Words that GPT-2 encodes as a single token after a space.
fn word_pool(spec: &TokenizerSpec, n: usize) -> Vec<String> {
    let mut candidates: Vec<(u32, String)> = (1000..30000u32)
        .filter_map(|id| {
            let tok = spec.token(id)?;
            let word = tok.strip_prefix('Ġ')?;
            let ok = (4..=9).contains(&word.len()) && word.bytes().all(|b| b.is_ascii_lowercase());
            ok.then(|| (id, word.to_string()))
        })
        .filter(|(id, w)| spec.encode(&format!(" {w}")).is_ok_and(|ids| ids == [*id]))
        .collect();
    let step = candidates.len() / n;
    assert!(step >= 1, "not enough single-token words");
    candidates = candidates.into_iter().step_by(step).take(n).collect();
    candidates.into_iter().map(|(_, w)| w).collect()
}

/// Distinct primes in `[lo, ..)`.
fn primes_from(lo: u64, n: usize) -> Vec<u64> {
    let is_prime = |p: u64| p > 1 && (2..).take_while(|d| d * d <= p).all(|d| !p.is_multiple_of(d));
    (lo..).filter(|&p| is_prime(p)).step_by(7).take(n).collect()
}

/// `n` distinct positive counts summing to `total`, Zipf-shaped.
fn zipf_counts(n: usize, total: u64) -> Vec<u64> {
    let base: Vec<u64> = (1..=n as u64).rev().collect();
    let floor: u64 = base.iter().sum();
    let extra = total - floor;
    let weights: Vec<f64> = (1..=n).map(|i| 1.0 / i as f64).collect();
    let wsum: f64 = weights.iter().sum();
    let mut add: Vec<u64> = weights
        .iter()
        .map(|w| (extra as f64 * w / wsum) as u64)
        .collect();
    add[0] += extra - add.iter().sum::<u64>();
    base.iter().zip(&add).map(|(b, a)| b + a).collect()
}

struct Stem {
    id: String,
    text: String,
    words: Vec<String>,
    counts: Vec<u64>,
    total: u64,
}

fn stems(pool: &[String], rng: &mut ChaCha8Rng) -> Vec<Stem> {
    const SUBJECTS: [&str; 10] = [
        "The farmer",
        "My sister",
        "The old man",
        "Our teacher",
        "The young girl",
        "A stranger",
        "The doctor",
        "His neighbor",
        "The captain",
        "Her father",
    ];
    const VERBS: [&str; 5] = [
        "quietly reached for the",
        "talked for hours about the",
        "was afraid of the",
        "pointed at the",
        "could not forget the",
    ];
    let totals = primes_from(2003, N_STEMS);
    (0..N_STEMS)
        .map(|s| {
            let topic = s % N_TOPICS;
            let own = &pool[topic * WORDS_PER_TOPIC..(topic + 1) * WORDS_PER_TOPIC];
            let mut words: Vec<String> = own
                .choose_multiple(rng, RESPONSES_PER_STEM - OFF_TOPIC)
                .cloned()
                .collect();
            let others: Vec<&String> = pool.iter().filter(|w| !own.contains(w)).collect();
            words.extend(others.choose_multiple(rng, OFF_TOPIC).map(|w| (*w).clone()));
            words.shuffle(rng);
            Stem {
                id: format!("s{:03}", s + 1),
                text: format!("{} {}", SUBJECTS[s % 10], VERBS[s / 10]),
                counts: zipf_counts(RESPONSES_PER_STEM, totals[s]),
                total: totals[s],
                words,
            }
        })
        .collect()
}

/// Normal scores of the pooled cloze probabilities.
fn normal_scores(probs: &[f64]) -> Vec<f64> {
    let std = Normal::standard();
    let mut order: Vec<usize> = (0..probs.len()).collect();
    order.sort_by(|&a, &b| probs[a].total_cmp(&probs[b]));
    let n = probs.len() as f64;
    let mut u = vec![0.0; probs.len()];
    for (rank, &i) in order.iter().enumerate() {
        u[i] = std.inverse_cdf((rank as f64 + 0.5) / n);
    }
    u
}

fn header(model_id: &str, n_params: u64, dedup: bool) -> DumpHeader {
    DumpHeader {
        model_id: model_id.into(),
        n_params,
        checkpoint_step: 143_000,
        dedup,
        tokenizer: GPT2_ID.into(),
        top_k: TOP_K,
        leading_space: true,
    }
}

/// Builds a dump whose response probabilities are `probs`, in the same
/// pooled order as the stems' responses.
fn dump(spec: &TokenizerSpec, stems: &[Stem], probs: &[f64], header: DumpHeader) -> PredictionDump {
    let mut next = 0;
    let records = stems
        .iter()
        .map(|s| {
            let mut responses: Vec<ResponsePrediction> = s
                .words
                .iter()
                .map(|w| {
                    let p = probs[next];
                    next += 1;
                    ResponsePrediction {
                        text: w.clone(),
                        first_subword_id: spec.encode(&format!(" {w}")).unwrap()[0],
                        prob: p,
                        rank: 0,
                    }
                })
                .collect();
            let mut order: Vec<usize> = (0..responses.len()).collect();
            order.sort_by(|&a, &b| {
                responses[b].prob.total_cmp(&responses[a].prob).then(
                    responses[a]
                        .first_subword_id
                        .cmp(&responses[b].first_subword_id),
                )
            });
            for (rank, &i) in order.iter().enumerate() {
                responses[i].rank = rank as u64 + 1;
            }
            let top = order
                .iter()
                .take(TOP_K)
                .map(|&i| (responses[i].first_subword_id, responses[i].prob))
                .collect();
            StemPrediction {
                stem_id: s.id.clone(),
                top,
                responses,
            }
        })
        .collect();
    PredictionDump::new(header, records).expect("valid dump")
}

/// Model probabilities `Phi(r u + sqrt(1 - r^2) e) / 60`.
fn planted_probs(u: &[f64], rng: &mut ChaCha8Rng) -> Vec<f64> {
    let std = Normal::standard();
    let r = copula_r(PLANTED_SPEARMAN);
    let s = (1.0 - r * r).sqrt();
    u.iter()
        .map(|&ui| {
            let e: f64 = StandardNormal.sample(rng);
            std.cdf(r * ui + s * e).max(1e-9) / RESPONSES_PER_STEM as f64
        })
        .collect()
}

fn embeddings(stems: &[Stem], pool: &[String], rng: &mut ChaCha8Rng) -> EmbeddingDump {
    let topic_dirs: Vec<Vec<f64>> = (0..N_TOPICS)
        .map(|_| {
            (0..EMBED_DIM)
                .map(|_| StandardNormal.sample(&mut *rng))
                .collect()
        })
        .collect();
    let word_vec: Vec<Vec<f64>> = pool
        .iter()
        .enumerate()
        .map(|(i, _)| {
            let t = (i / WORDS_PER_TOPIC).min(N_TOPICS - 1);
            topic_dirs[t]
                .iter()
                .map(|&c| 2.0 * c + rng.sample::<f64, _>(StandardNormal))
                .collect::<Vec<f64>>()
        })
        .collect();
    let mut records = Vec::new();
    let mut vectors = Vec::new();
    for s in stems {
        for w in &s.words {
            let i = pool.iter().position(|p| p == w).unwrap();
            for &c in &word_vec[i] {
                let noise: f64 = StandardNormal.sample(&mut *rng);
                vectors.push((c + 0.1 * noise) as f32);
            }
            records.push(EmbeddingRecord {
                stem_id: s.id.clone(),
                word: w.clone(),
                offset: records.len(),
                n_subwords: 1,
            });
        }
    }
    EmbeddingDump::new("synthetic-ref", "last", EMBED_DIM, records, vectors)
        .expect("valid embeddings")
}

/// Sentences ending in responses drawn by cloze probability, so the
/// n-gram model sees the human distribution.
fn corpus(stems: &[Stem], rng: &mut ChaCha8Rng) -> String {
    let mut out = String::new();
    for s in stems {
        for _ in 0..CORPUS_LINES_PER_STEM {
            let mut x = rng.random_range(0..s.total);
            let mut pick = 0;
            while x >= s.counts[pick] {
                x -= s.counts[pick];
                pick += 1;
            }
            out.push_str(&format!("{} {}.\n", s.text, s.words[pick]));
        }
    }
    out
}

const CONFIG: &str = "\
# planted-correlation sweep
seed = 20240601
norms = norms.csv
corpus = corpus.txt
dump = planted_standard.jsonl
dump = planted_dedup.jsonl
dump = oracle.jsonl
embeddings = embeddings.jsonl
dims = 10,25,50
neighbors = 5,20
";

fn main() {
    let dir = std::env::args()
        .nth(1)
        .expect("usage: planted_fixture <out-dir>");
    let dir = Path::new(&dir);
    fs::create_dir_all(dir).unwrap();
    let spec = bundled_gpt2();
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);

    let pool = word_pool(&spec, N_TOPICS * WORDS_PER_TOPIC);
    let stems = stems(&pool, &mut rng);
    let records = stems.iter().flat_map(|s| {
        s.words.iter().zip(&s.counts).map(|(w, &c)| NormsRecord {
            stem_id: s.id.clone(),
            stem_text: s.text.clone(),
            response_text: w.clone(),
            count: c,
            cloze_prob: None,
        })
    });
    let (norms, _) = ClozeNorms::from_records(records).unwrap();
    write_norms(&norms, File::create(dir.join("norms.csv")).unwrap()).unwrap();

    let cloze: Vec<f64> = stems
        .iter()
        .flat_map(|s| s.counts.iter().map(move |&c| c as f64 / s.total as f64))
        .collect();
    let u = normal_scores(&cloze);
    let outputs = [
        (
            "planted_standard.jsonl",
            dump(
                &spec,
                &stems,
                &planted_probs(&u, &mut rng),
                header("planted-410m", 410_000_000, false),
            ),
        ),
        (
            "planted_dedup.jsonl",
            dump(
                &spec,
                &stems,
                &planted_probs(&u, &mut rng),
                header("planted-410m", 410_000_000, true),
            ),
        ),
        (
            "oracle.jsonl",
            dump(&spec, &stems, &cloze, header("oracle", 1, false)),
        ),
    ];
    for (name, d) in &outputs {
        write_dump(d, File::create(dir.join(name)).unwrap()).unwrap();
    }

    let emb = embeddings(&stems, &pool, &mut rng);
    write_embeddings(
        &emb,
        File::create(dir.join("embeddings.jsonl")).unwrap(),
        File::create(dir.join("embeddings.bin")).unwrap(),
    )
    .unwrap();
    fs::write(dir.join("corpus.txt"), corpus(&stems, &mut rng)).unwrap();
    fs::write(dir.join("sweep.conf"), CONFIG).unwrap();
}
