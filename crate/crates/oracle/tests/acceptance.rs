//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Runs without the libtest harness so every line is printed, and exits
//! non-zero when any criterion fails.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clozealign::config::RunConfig;
use clozealign::formats::norms::read_norms;
use clozealign::formats::tokenizer::bundled_gpt2;
use clozealign::pipeline::run_sweep;
use clozealign::report::{emit_report, Format};
use clozealign_core::linalg::{dot, Matrix};
use clozealign_core::ngram::{count_documents, stupid_backoff_score, BackoffParams, NgramCounts};
use clozealign_core::norms::{response_subword_stats, TokenizationMap};
use clozealign_core::semspace::{
    cooccurrence_counts, cosine_similarity_matrix, neighborhood_overlap, pca_project, ppmi,
    rsa_spearman, SemanticSpace, SpaceSource,
};
use clozealign_core::stats::{
    logit, luce_renormalize, pearson, spearman, within_stem_ranks, PairedSeries,
};
use clozealign_oracle::{all_ngrams, brute_overlap, StreamBackoff};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn check(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn random_documents(rng: &mut ChaCha8Rng, vocab: u32, max_tokens: usize) -> Vec<Vec<u32>> {
    let total = rng.random_range(1..=max_tokens);
    let n_docs = rng.random_range(1..=10usize).min(total);
    let mut cuts: Vec<usize> = (0..n_docs - 1)
        .map(|_| rng.random_range(0..=total))
        .collect();
    cuts.push(0);
    cuts.push(total);
    cuts.sort_unstable();
    cuts.windows(2)
        .map(|w| (w[0]..w[1]).map(|_| rng.random_range(0..vocab)).collect())
        .collect()
}

fn ngram_oracle() -> Outcome {
    let start = Instant::now();
    let params = BackoffParams::new(0.4, 5).map_err(|e| e.to_string())?;
    let (mut pairs, mut worst) = (0usize, 0.0f64);
    for corpus in 0..50u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(1000 + corpus);
        let vocab = rng.random_range(2..=20u32);
        let docs = random_documents(&mut rng, vocab, 2000);
        let counts =
            count_documents(docs.iter().map(Vec::as_slice), 5).map_err(|e| e.to_string())?;
        let oracle = StreamBackoff::new(&docs, 0.4);
        let mut contexts = BTreeSet::new();
        for doc in &docs {
            for len in 0..=4 {
                contexts.extend(doc.windows(len.max(1)).map(|w| w[..len].to_vec()));
            }
        }
        for ctx in &contexts {
            for w in 0..vocab {
                let ours =
                    stupid_backoff_score(&counts, ctx, w, &params).map_err(|e| e.to_string())?;
                let theirs = oracle.score(ctx, w);
                let err = (ours - theirs).abs();
                worst = worst.max(err);
                check(err <= 1e-12, || {
                    format!("corpus {corpus}, context {ctx:?}, word {w}: {ours} vs {theirs}")
                })?;
                pairs += 1;
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    check(secs < 10.0, || format!("took {secs:.2} s"))?;
    Ok(format!(
        "50 corpora, {pairs} (context, word) pairs, max error {worst:.1e}, {secs:.2} s"
    ))
}

fn shard_merge() -> Outcome {
    let mut grams = 0;
    for set in 0..20u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(2000 + set);
        let vocab = rng.random_range(2..=30);
        let docs = random_documents(&mut rng, vocab, 3000);
        let whole =
            count_documents(docs.iter().map(Vec::as_slice), 5).map_err(|e| e.to_string())?;
        let n_shards = rng.random_range(1..=docs.len());
        let mut merged = NgramCounts::new(5).map_err(|e| e.to_string())?;
        let mut rest = docs.as_slice();
        for s in 0..n_shards {
            let take = if s + 1 == n_shards {
                rest.len()
            } else {
                rng.random_range(0..=rest.len())
            };
            let (shard, tail) = rest.split_at(take);
            rest = tail;
            let part =
                count_documents(shard.iter().map(Vec::as_slice), 5).map_err(|e| e.to_string())?;
            merged = merged.merge(&part).map_err(|e| e.to_string())?;
        }
        check(merged == whole, || {
            format!("set {set}: merged counts differ from a single pass")
        })?;
        let oracle = all_ngrams(&docs, 5);
        let stored: usize = (1..=5).map(|k| whole.table_len(k)).sum();
        check(stored == oracle.len(), || {
            format!(
                "set {set}: {stored} stored grams, oracle has {}",
                oracle.len()
            )
        })?;
        for (gram, &c) in &oracle {
            check(whole.count(gram) == c, || {
                format!("set {set}: count of {gram:?}")
            })?;
        }
        grams += oracle.len();
    }
    Ok(format!(
        "20 document sets, {grams} distinct n-grams, all exact"
    ))
}

fn correlation_oracles() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3000);
    let mut worst = 0.0f64;
    for pair in 0..100 {
        let slope = rng.random_range(-2.0..2.0);
        let x: Vec<f64> = (0..500).map(|_| rng.random_range(-3.0..3.0)).collect();
        let y: Vec<f64> = x
            .iter()
            .map(|v| slope * v + rng.random_range(-3.0..3.0))
            .collect();
        let s = PairedSeries::new(x.clone(), y.clone()).map_err(|e| e.to_string())?;
        let p = pearson(&s).map_err(|e| e.to_string())?;
        let r = spearman(&s).map_err(|e| e.to_string())?;
        let (po, ro) = (
            clozealign_oracle::pearson(&x, &y),
            clozealign_oracle::spearman_no_ties(&x, &y),
        );
        worst = worst.max((p - po).abs()).max((r - ro).abs());
        check((p - po).abs() <= 1e-10, || {
            format!("pair {pair}: pearson {p} vs {po}")
        })?;
        check((r - ro).abs() <= 1e-10, || {
            format!("pair {pair}: spearman {r} vs {ro}")
        })?;
    }
    for t in 0..100 {
        let x: Vec<f64> = (0..200).map(|_| rng.random_range(-2.0..2.0)).collect();
        let y: Vec<f64> = x.iter().map(|v| v + rng.random_range(-2.0..2.0)).collect();
        let (a, b) = (rng.random_range(0.1..3.0), rng.random_range(-5.0..5.0));
        let fx: Vec<f64> = match t % 4 {
            0 => x.iter().map(|v| (a * v).exp() + b).collect(),
            1 => x.iter().map(|v| v * v * v + a * v).collect(),
            2 => x.iter().map(|v| (a * v).atan()).collect(),
            _ => x.iter().map(|v| (v + 3.0).ln() * a + b).collect(),
        };
        let gy: Vec<f64> = y.iter().map(|v| -(-a * v).exp()).collect();
        let before = spearman(&PairedSeries::new(x, y).map_err(|e| e.to_string())?)
            .map_err(|e| e.to_string())?;
        let after = spearman(&PairedSeries::new(fx, gy).map_err(|e| e.to_string())?)
            .map_err(|e| e.to_string())?;
        check((before - after).abs() <= 1e-12, || {
            format!("transform {t}: {before} vs {after}")
        })?;
    }
    Ok(format!(
        "100 pairs at n = 500, max error {worst:.1e}; 100 monotone transforms invariant"
    ))
}

fn transforms() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4000);
    let alpha = 1e-6;
    let mut probes: Vec<f64> = (0..10_000).map(|_| rng.random_range(0.5..=1.0)).collect();
    probes.extend([0.5, 1.0, 0.75]);
    for &p in &probes {
        let (a, b) = (
            logit(p, alpha).map_err(|e| e.to_string())?,
            logit(1.0 - p, alpha).map_err(|e| e.to_string())?,
        );
        check(a == -b, || format!("logit({p}) = {a}, logit(1 - p) = {b}"))?;
    }
    let mut worst_sum = 0.0f64;
    for case in 0..1000 {
        let n = rng.random_range(1..=60);
        let v: Vec<f64> = (0..n).map(|_| rng.random_range(1e-9..1.0)).collect();
        let k = rng.random_range(1e-3..1e3);
        let l = luce_renormalize(&v).map_err(|e| e.to_string())?;
        let scaled: Vec<f64> = v.iter().map(|x| x * k).collect();
        let ls = luce_renormalize(&scaled).map_err(|e| e.to_string())?;
        let sum: f64 = l.iter().sum();
        worst_sum = worst_sum.max((sum - 1.0).abs());
        check((sum - 1.0).abs() <= 1e-12, || {
            format!("case {case}: luce sums to {sum}")
        })?;
        for (a, b) in l.iter().zip(&ls) {
            check((a - b).abs() <= 1e-12, || {
                format!("case {case}: scaling by {k} moved {a} to {b}")
            })?;
        }
        let ties: Vec<f64> = (0..n)
            .map(|_| [0.0, 0.25, 0.5, rng.random_range(0.0..1.0)][rng.random_range(0..4)])
            .collect();
        let ranks = within_stem_ranks(&ties).map_err(|e| e.to_string())?;
        let total: f64 = ranks.iter().sum();
        check(total == (n * (n + 1)) as f64 / 2.0, || {
            format!("case {case}: ranks sum to {total}")
        })?;
    }
    Ok(format!(
        "logit antisymmetric on {} probes; luce max |sum - 1| = {worst_sum:.1e}; 1000 rank-sum checks",
        probes.len()
    ))
}

fn words(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("w{i:02}")).collect()
}

fn space(words: Vec<String>, rows: &[Vec<f64>]) -> Result<SemanticSpace, String> {
    let m = Matrix::from_rows(rows).map_err(|e| e.to_string())?;
    SemanticSpace::new(words, m, SpaceSource::Human).map_err(|e| e.to_string())
}

fn ppmi_pca() -> Outcome {
    let cooc = cooccurrence_counts(&[
        vec!["a", "b"],
        vec!["a", "b"],
        vec!["a", "c"],
        vec!["b", "c"],
    ]);
    check(cooc.total() == 8, || format!("T = {}", cooc.total()))?;
    let m = ppmi(&cooc).map_err(|e| e.to_string())?;
    let (ab, ac) = (m.get(0, 1), m.get(0, 2));
    check((ab - 0.5754).abs() <= 1e-4, || format!("PPMI(a,b) = {ab}"))?;
    check((ac - 0.2877).abs() <= 1e-4, || format!("PPMI(a,c) = {ac}"))?;

    let mut rng = ChaCha8Rng::seed_from_u64(5000);
    let mut worst = 0.0f64;
    for trial in 0..40 {
        let n = rng.random_range(2..=30);
        let cols = rng.random_range(n..=30);
        let rank = rng.random_range(1..=n);
        let a: Vec<f64> = (0..n * rank).map(|_| rng.random_range(-1.0..1.0)).collect();
        let b: Vec<f64> = (0..rank * cols)
            .map(|_| rng.random_range(-1.0..1.0))
            .collect();
        let a = Matrix::from_vec(n, rank, a).map_err(|e| e.to_string())?;
        let b = Matrix::from_vec(rank, cols, b).map_err(|e| e.to_string())?;
        let x = a.matmul(&b).map_err(|e| e.to_string())?;
        let s = pca_project(&x, words(n), rank).map_err(|e| e.to_string())?;
        for i in 0..n {
            for j in 0..n {
                let err =
                    (dot(x.row(i), x.row(j)) - dot(s.vectors().row(i), s.vectors().row(j))).abs();
                worst = worst.max(err);
                check(err <= 1e-9, || {
                    format!("trial {trial}: dot product moved by {err:.2e}")
                })?;
            }
        }
        let sim = cosine_similarity_matrix(&s).map_err(|e| e.to_string())?;
        if n >= 3 {
            let rsa = rsa_spearman(&sim, &sim).map_err(|e| e.to_string())?;
            check((rsa - 1.0).abs() <= 1e-12, || {
                format!("trial {trial}: RSA self-correlation {rsa}")
            })?;
        }
    }
    Ok(format!("PPMI(a,b) = {ab:.4}, PPMI(a,c) = {ac:.4}; 40 projections at d = rank, max dot error {worst:.1e}; RSA(S,S) = 1"))
}

fn overlap_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6000);
    let mut checked = 0;
    for trial in 0..60 {
        let n = rng.random_range(3..=50);
        let d = rng.random_range(2..=8);
        let noise = rng.random_range(0.0..1.5);
        let a: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..d).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect();
        let b: Vec<Vec<f64>> = a
            .iter()
            .map(|r| {
                r.iter()
                    .map(|v| v + noise * rng.random_range(-1.0..1.0))
                    .collect()
            })
            .collect();
        let (sa, sb) = (space(words(n), &a)?, space(words(n), &b)?);
        for k in [1, 5, 20].into_iter().filter(|&k| k < n) {
            let ours = neighborhood_overlap(&sa, &sb, k).map_err(|e| e.to_string())?;
            let theirs = brute_overlap(&words(n), &a, &b, k);
            check(ours == theirs, || {
                format!("trial {trial}, k = {k}: {ours} vs {theirs}")
            })?;
            let same = neighborhood_overlap(&sa, &sa, k).map_err(|e| e.to_string())?;
            check(same == 1.0, || {
                format!("trial {trial}, k = {k}: identical spaces give {same}")
            })?;
            checked += 1;
        }
    }
    // pairs (0,1), (2,3) are close in one space and (0,2), (1,3) in the other
    let a = [
        vec![1.0, 0.0],
        vec![1.0, 0.1],
        vec![0.0, 1.0],
        vec![0.1, 1.0],
    ];
    let b = [
        vec![1.0, 0.0],
        vec![0.0, 1.0],
        vec![1.0, 0.1],
        vec![0.1, 1.0],
    ];
    let disjoint = neighborhood_overlap(&space(words(4), &a)?, &space(words(4), &b)?, 1)
        .map_err(|e| e.to_string())?;
    check(disjoint == 0.0, || {
        format!("disjoint neighborhoods give {disjoint}")
    })?;
    Ok(format!("{checked} (space, k) cases equal the brute-force Jaccard exactly; identical = 1, disjoint = 0"))
}

fn fixture_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../cli/tests/fixtures/planted")
}

fn planted_sweep() -> Outcome {
    const PLANTED: f64 = 0.8;
    let cfg = RunConfig::load(&fixture_dir().join("sweep.conf")).map_err(|e| e.to_string())?;
    let report = run_sweep(&cfg).map_err(|e| e.to_string())?;
    let planted: Vec<f64> = report
        .find("prob_spearman", "planted-410m")
        .map(|r| r.statistic)
        .collect();
    check(planted.len() == 2, || {
        format!("expected 2 planted rows, found {}", planted.len())
    })?;
    for &rho in &planted {
        check((rho - PLANTED).abs() <= 0.03, || {
            format!("recovered {rho}, planted {PLANTED}")
        })?;
    }
    let oracle: Vec<f64> = report
        .find("rank_spearman", "oracle")
        .map(|r| r.statistic)
        .collect();
    check(oracle == [1.0], || {
        format!("oracle dump rank_spearman {oracle:?}")
    })?;

    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let (first, second) = (dir.path().join("a.csv"), dir.path().join("b.csv"));
    emit_report(&report, &first, Format::Csv).map_err(|e| e.to_string())?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .map_err(|e| e.to_string())?;
    let again = pool
        .install(|| run_sweep(&cfg))
        .map_err(|e| e.to_string())?;
    emit_report(&again, &second, Format::Csv).map_err(|e| e.to_string())?;
    let (x, y) = (
        std::fs::read(&first).map_err(|e| e.to_string())?,
        std::fs::read(&second).map_err(|e| e.to_string())?,
    );
    check(x == y, || "re-run report differs".into())?;
    Ok(format!(
        "planted 0.8, recovered {:.4} and {:.4}; oracle rank_spearman = 1; re-run byte-identical ({} bytes)",
        planted[0],
        planted[1],
        x.len()
    ))
}

fn subword_stats() -> Outcome {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../cli/data/norms/cloze_norms.csv");
    if !path.exists() {
        return Err(format!(
            "real norms file not vendored at {}",
            path.display()
        ));
    }
    let start = Instant::now();
    let (norms, _) = read_norms(&path).map_err(|e| e.to_string())?;
    let spec = bundled_gpt2();
    let map = TokenizationMap::build(&spec, norms.response_types()).map_err(|e| e.to_string())?;
    let s = response_subword_stats(&norms, &map).map_err(|e| e.to_string())?;
    let secs = start.elapsed().as_secs_f64();
    check((s.single_token_fraction - 0.504).abs() <= 0.01, || {
        format!("single-token fraction {}", s.single_token_fraction)
    })?;
    check((s.mean_subwords - 1.64).abs() <= 0.05, || {
        format!("mean subwords {}", s.mean_subwords)
    })?;
    check(secs < 30.0, || format!("took {secs:.1} s"))?;
    Ok(format!(
        "single-token fraction {:.3}, mean {:.2} ± {:.2}, {secs:.1} s",
        s.single_token_fraction, s.mean_subwords, s.sd_subwords
    ))
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() -> ExitCode {
    let criteria: [Criterion; 8] = [
        ("ngram_oracle_equivalence", ngram_oracle),
        ("shard_merge_exactness", shard_merge),
        ("correlation_oracles", correlation_oracles),
        ("transform_properties", transforms),
        ("ppmi_pca", ppmi_pca),
        ("neighborhood_overlap_oracle", overlap_oracle),
        ("planted_correlation_end_to_end", planted_sweep),
        ("subword_statistics", subword_stats),
    ];
    let mut failed = 0;
    for (name, run) in criteria {
        match run() {
            Ok(detail) => println!("PASS {name}: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL {name}: {detail}");
            }
        }
    }
    println!(
        "acceptance: {} of {} criteria passed",
        criteria.len() - failed,
        criteria.len()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
