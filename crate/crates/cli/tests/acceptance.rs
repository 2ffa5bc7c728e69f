//! Acceptance suite: runs every criterion and prints one PASS/FAIL line
//! each. Exits non-zero if any criterion fails.
//!
//! Run alone with `cargo test -p tokenalign-cli --test acceptance`.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Instant;

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tokenalign::bench::{alignment_step_histogram, boundary_prompts};
use tokenalign::eval::{run_eval, score, Arm, EvalConfig, Metric};
use tokenalign::metrics::{edit_similarity, pass_at_k, rouge_l};
use tokenalign::scenarios::{generate_dataset, load_corpus, Scenario};
use tokenalign::vocab::{train_tiny_bpe, TrainOptions};
use tokenalign::{aligned_generate, AlignConfig, ByteTrie, MaskCache, NGram, SamplerConfig, Vocabulary};

const BIN: &str = env!("CARGO_BIN_EXE_tokenalign");

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/fixtures")
}

fn code_corpus() -> PathBuf {
    fixtures().join("code_corpus.jsonl")
}

/// Fixture settings for the desk-scale runs: the target vocabulary size,
/// the n-gram order and smoothing, and how the scenario datasets are cut.
const VOCAB_SIZE: usize = 512;
const NGRAM_ORDER: usize = 3;
const NGRAM_ALPHA: f64 = 0.01;
const DATASET_SEED: u64 = 1;
const CUTS_PER_DOC: usize = 8;

/// Directional-improvement thresholds, in absolute FTA points.
const MIN_PARTIAL_GAIN: f64 = 0.0;
const MAX_BASELINE_GAP: f64 = 2.0;

struct Desk {
    docs: Vec<tokenalign::scenarios::Document>,
    texts: Vec<String>,
    vocab: Vocabulary,
    trie: ByteTrie,
    model: NGram,
}

impl Desk {
    fn new() -> Self {
        let docs = load_corpus(code_corpus()).unwrap();
        let texts: Vec<String> = docs.iter().map(|d| d.text.clone()).collect();
        let vocab = train_tiny_bpe(&texts, VOCAB_SIZE, &TrainOptions::code()).unwrap();
        let trie = ByteTrie::build(&vocab).unwrap();
        let model = NGram::build(&texts, &vocab, NGRAM_ORDER, NGRAM_ALPHA).unwrap();
        Self {
            docs,
            texts,
            vocab,
            trie,
            model,
        }
    }
}

type Outcome = Result<String, String>;

fn ensure(ok: bool, msg: impl Into<String>) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg.into())
    }
}

// 1 ---------------------------------------------------------------------

fn trie_oracle() -> Outcome {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(100);
    let alphabet = b"ab_ (\n\txyz";
    let mut checked = 0;
    for v in 0..100 {
        let size = rng.random_range(1..=2_000);
        let mut set = BTreeSet::new();
        while set.len() < size {
            let len = rng.random_range(1..9);
            set.insert(
                (0..len)
                    .map(|_| alphabet[rng.random_range(0..alphabet.len())])
                    .collect::<Vec<u8>>(),
            );
        }
        let tokens: Vec<Vec<u8>> = set.into_iter().collect();
        let vocab = Vocabulary::from_tokens(&tokens).unwrap();
        let trie = ByteTrie::build(&vocab).unwrap();
        for _ in 0..100 {
            let p: Vec<u8> = (0..rng.random_range(1..11))
                .map(|_| alphabet[rng.random_range(0..alphabet.len())])
                .collect();
            let want: Vec<u32> = (0..tokens.len() as u32)
                .filter(|&i| tokens[i as usize].starts_with(&p) || p.starts_with(&tokens[i as usize]))
                .collect();
            let got: Vec<u32> = trie.matching_tokens(&p).iter_ones().collect();
            ensure(
                got == want,
                format!("vocabulary {v}, prefix {p:?}: mask differs from scan"),
            )?;
            checked += 1;
        }
    }
    let secs = started.elapsed().as_secs_f64();
    ensure(secs < 30.0, format!("took {secs:.1} s, budget 30 s"))?;
    Ok(format!(
        "{checked} prefixes over 100 vocabularies bit-identical to the scan ({secs:.1} s)"
    ))
}

// 2, 3 and 8 share one batch of randomized generations ----------------------

struct Run {
    prompt: Vec<u8>,
    backtrack: usize,
    sampler: SamplerConfig,
}

fn random_runs(desk: &Desk, count: usize) -> Vec<Run> {
    let mut rng = ChaCha8Rng::seed_from_u64(200);
    (0..count)
        .map(|i| {
            let text = desk.texts[rng.random_range(0..desk.texts.len())].as_bytes();
            let cut = rng.random_range(1..=text.len());
            let sampler = if i % 2 == 0 {
                SamplerConfig::greedy(8)
            } else {
                SamplerConfig::nucleus(0.9, 0.8, i as u64, 8)
            };
            Run {
                prompt: text[..cut].to_vec(),
                backtrack: 1 + i % 3,
                sampler,
            }
        })
        .collect()
}

fn generate_all(desk: &Desk, runs: &[Run], capacity: usize) -> Result<Vec<tokenalign::GenerationResult>, String> {
    let mut cache = MaskCache::new(&desk.trie, capacity);
    runs.iter()
        .map(|r| {
            aligned_generate(
                &desk.model,
                &desk.vocab,
                &desk.trie,
                &mut cache,
                &r.prompt,
                &AlignConfig::new(r.backtrack),
                &r.sampler,
            )
            .map_err(|e| e.to_string())
        })
        .collect()
}

fn prompt_preservation(desk: &Desk, runs: &[Run], results: &[tokenalign::GenerationResult], secs: f64) -> Outcome {
    ensure(
        desk.vocab.has_all_byte_tokens(),
        "trained vocabulary lacks single-byte tokens",
    )?;
    let dead = results.iter().filter(|r| r.dead_end).count();
    ensure(dead == 0, format!("{dead} dead ends with a byte-complete vocabulary"))?;
    for (run, r) in runs.iter().zip(results) {
        ensure(
            r.output.starts_with(&run.prompt),
            format!("output does not keep prompt {:?}", String::from_utf8_lossy(&run.prompt)),
        )?;
    }
    ensure(secs < 60.0, format!("took {secs:.1} s, budget 60 s"))?;
    Ok(format!(
        "{} runs (B = 1, 2, 3), all keep the prompt, 0 dead ends ({secs:.1} s)",
        runs.len()
    ))
}

fn termination(desk: &Desk, runs: &[Run], results: &[tokenalign::GenerationResult]) -> Outcome {
    for (run, r) in runs.iter().zip(results) {
        let ids = desk.vocab.encode(&run.prompt).unwrap();
        let keep = ids.len() - run.backtrack.min(ids.len());
        let prefix_len = desk.vocab.decode(&ids[keep..]).unwrap().len();
        ensure(
            r.alignment_steps <= prefix_len,
            format!("B' = {} exceeds prefix length {prefix_len}", r.alignment_steps),
        )?;
    }
    let prompts = boundary_prompts(&desk.texts, &desk.vocab, 4, 4, 300).map_err(|e| e.to_string())?;
    let align = AlignConfig::new(3);
    let hist = alignment_step_histogram(
        &desk.model,
        &desk.vocab,
        &desk.trie,
        &prompts,
        &align,
        &SamplerConfig::greedy(0),
    )
    .map_err(|e| e.to_string())?;
    ensure(
        hist.mode == Some(3),
        format!("B' histogram mode is {:?}, expected 3: {:?}", hist.mode, hist.counts),
    )?;
    let at_mode = hist.counts[&3];
    Ok(format!(
        "B' <= prefix length in all runs; boundary prompts with B = 3 peak at 3 ({at_mode}/{} prompts)",
        prompts.len()
    ))
}

fn cache_transparency(desk: &Desk, runs: &[Run], reference: &[tokenalign::GenerationResult]) -> Outcome {
    for cap in [0, 1] {
        let other = generate_all(desk, runs, cap)?;
        for (a, b) in reference.iter().zip(&other) {
            ensure(
                a.output == b.output && a.token_ids == b.token_ids,
                format!("capacity {cap} changed an output"),
            )?;
        }
    }
    Ok(format!(
        "capacities 0, 1 and 1024 give byte-identical outputs over {} runs",
        runs.len()
    ))
}

// 4 ---------------------------------------------------------------------

fn cli(args: &[&str]) -> Result<Vec<u8>, String> {
    let out = Command::new(BIN).args(args).output().map_err(|e| e.to_string())?;
    if !out.status.success() {
        return Err(format!(
            "tokenalign {}: {}",
            args.join(" "),
            String::from_utf8_lossy(&out.stderr)
        ));
    }
    Ok(out.stdout)
}

fn output_bytes(record: &[u8]) -> Result<Vec<u8>, String> {
    use base64::Engine;
    let v: serde_json::Value = serde_json::from_slice(record).map_err(|e| e.to_string())?;
    let b64 = v["output_b64"].as_str().ok_or("no output_b64")?;
    base64::engine::general_purpose::STANDARD
        .decode(b64)
        .map_err(|e| e.to_string())
}

fn fig2() -> Outcome {
    let f = fixtures();
    let vocab = f.join("fig2_vocab.json");
    let table = format!("scripted:{}", f.join("fig2_table.json").display());
    let prompts = f.join("fig2_prompts.jsonl");
    let base = [
        "--vocab",
        vocab.to_str().unwrap(),
        "align",
        "--provider",
        &table,
        "--prompt-file",
        prompts.to_str().unwrap(),
        "--no-timings",
    ];
    let aligned = output_bytes(&cli(&base)?)?;
    let plain = output_bytes(&cli(&[&base[..], &["--no-align"]].concat())?)?;
    let prompt = b"# write a function to get three maximum numbers from a list\ndef three_max(l):\n    re";
    let stem = &prompt[..prompt.len() - 2];
    ensure(
        aligned.starts_with(&[stem, &b"return"[..]].concat()),
        format!("aligned gave {:?}", String::from_utf8_lossy(&aligned)),
    )?;
    ensure(plain.starts_with(prompt), "unaligned output dropped the prompt")?;
    let cont = &plain[prompt.len()..];
    ensure(!cont.starts_with(b"turn"), "unaligned output also completed `return`")?;
    Ok(format!(
        "aligned continues `re` as {:?}, unaligned as {:?}",
        String::from_utf8_lossy(&aligned[stem.len()..]),
        String::from_utf8_lossy(&[&b"re"[..], cont].concat())
    ))
}

// 5 ---------------------------------------------------------------------

fn directional(desk: &Desk) -> Outcome {
    let cfg = EvalConfig::default();
    let mut notes = vec![];
    let mut failures = vec![];
    for s in Scenario::ALL {
        let (examples, _) = generate_dataset(&desk.docs, s, DATASET_SEED, CUTS_PER_DOC).map_err(|e| e.to_string())?;
        let records = run_eval(&examples, &desk.model, &desk.vocab, &desk.trie, &cfg).map_err(|e| e.to_string())?;
        let report = score(&records, &[Metric::Fta], &desk.vocab)?;
        let delta = |scenario: &str| {
            let a = report.mean(scenario, Arm::Aligned, Metric::Fta).unwrap();
            let u = report.mean(scenario, Arm::Unaligned, Metric::Fta).unwrap();
            100.0 * (a - u)
        };
        let gain = delta(s.name());
        let gap = delta(&format!("{s}_baseline"));
        notes.push(format!("{s} {gain:+.1}/{gap:+.2} (n={})", examples.len()));
        if gain <= MIN_PARTIAL_GAIN {
            failures.push(format!("{s}: aligned does not beat unaligned ({gain:+.2} points)"));
        }
        if gap.abs() >= MAX_BASELINE_GAP {
            failures.push(format!(
                "{s}_baseline: arms differ by {:.2} points (limit {MAX_BASELINE_GAP})",
                gap.abs()
            ));
        }
    }
    let summary = format!("FTA delta partial/baseline in points: {}", notes.join(", "));
    if failures.is_empty() {
        Ok(summary)
    } else {
        Err(format!("{}; {summary}", failures.join("; ")))
    }
}

// 6, 7 ------------------------------------------------------------------

fn pass_at_k_oracle() -> Outcome {
    let mut cases = 0;
    for n in 1..=12u64 {
        for c in 0..=n {
            for k in 1..=n {
                let (mut hit, mut all) = (0u64, 0u64);
                for mask in 0u32..1 << n {
                    if mask.count_ones() as u64 == k {
                        all += 1;
                        hit += u64::from(mask & ((1u32 << c) - 1) != 0);
                    }
                }
                let want = hit as f64 / all as f64;
                let got: f64 = pass_at_k(n, c, k).map_err(|e| e.to_string())?;
                ensure(
                    (got - want).abs() < 1e-12,
                    format!("n={n} c={c} k={k}: {got} vs {want}"),
                )?;
                cases += 1;
            }
        }
    }
    let p: f64 = pass_at_k(5, 2, 3).unwrap();
    ensure((p - 0.9).abs() < 1e-12, format!("pass@3 for n=5, c=2 is {p}"))?;
    Ok(format!(
        "{cases} (n, c, k) cases match subset enumeration within 1e-12; (5, 2, 3) = 0.9"
    ))
}

fn lev_matrix(a: &[u8], b: &[u8]) -> usize {
    let mut d = vec![vec![0usize; b.len() + 1]; a.len() + 1];
    for (i, row) in d.iter_mut().enumerate() {
        row[0] = i;
    }
    d[0] = (0..=b.len()).collect();
    for i in 1..=a.len() {
        for j in 1..=b.len() {
            let sub = d[i - 1][j - 1] + usize::from(a[i - 1] != b[j - 1]);
            d[i][j] = sub.min(d[i - 1][j] + 1).min(d[i][j - 1] + 1);
        }
    }
    d[a.len()][b.len()]
}

fn rouge_by_enumeration(g: &[&str], r: &[&str]) -> f64 {
    if g.is_empty() || r.is_empty() {
        return 0.0;
    }
    let lcs = (0u32..1 << g.len())
        .filter(|mask| {
            let mut it = r.iter();
            (0..g.len())
                .filter(|&i| mask >> i & 1 == 1)
                .all(|i| it.any(|w| *w == g[i]))
        })
        .map(|m| m.count_ones() as f64)
        .fold(0.0, f64::max);
    if lcs == 0.0 {
        return 0.0;
    }
    let (p, rec) = (lcs / g.len() as f64, lcs / r.len() as f64);
    2.0 * p * rec / (p + rec)
}

fn metric_oracles() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(700);
    for _ in 0..1_000 {
        let mut s = || -> Vec<u8> {
            (0..rng.random_range(0..30))
                .map(|_| b"abcd \n"[rng.random_range(0..6usize)])
                .collect()
        };
        let (a, b) = (s(), s());
        let longest = a.len().max(b.len());
        let want = if longest == 0 {
            1.0
        } else {
            1.0 - lev_matrix(&a, &b) as f64 / longest as f64
        };
        ensure(edit_similarity(&a, &b) == want, format!("ES mismatch on {a:?} / {b:?}"))?;
    }
    let pool = ["if", "x", "==", "y:", "x,", "return"];
    for _ in 0..1_000 {
        let mut w = || -> Vec<&str> {
            (0..rng.random_range(0..=8))
                .map(|_| pool[rng.random_range(0..pool.len())])
                .collect()
        };
        let (g, r) = (w(), w());
        ensure(
            rouge_l(g.join(" ").as_bytes(), r.join(" ").as_bytes()) == rouge_by_enumeration(&g, &r),
            format!("Rouge-L mismatch on {g:?} / {r:?}"),
        )?;
    }
    Ok("edit similarity matches matrix Levenshtein on 1000 pairs; Rouge-L matches enumeration on 1000 pairs of <= 8 words".into())
}

// 9 ---------------------------------------------------------------------

fn latency() -> Outcome {
    let out = cli(&[
        "--seed",
        "9",
        "bench",
        "--vocab-size",
        "50000",
        "--queries",
        "10000",
        "--warmup",
        "1000",
    ])?;
    let v: serde_json::Value = serde_json::from_slice(&out).map_err(|e| e.to_string())?;
    let p50 = |k: &str| v["latency_ns"][k]["p50"].as_u64().unwrap();
    let (trie, naive, cached) = (p50("trie"), p50("naive_scan"), p50("cached_space"));
    ensure(
        trie < naive,
        format!("trie median {trie} ns is not below naive scan {naive} ns"),
    )?;
    ensure(
        cached <= trie,
        format!("cached space median {cached} ns exceeds trie median {trie} ns"),
    )?;
    let under = trie < 1_000_000;
    // Slow shared CI machines only report the absolute bound.
    if !under && std::env::var_os("CI").is_none() {
        return Err(format!("trie median {trie} ns is not below 1 ms"));
    }
    Ok(format!(
        "medians over 10000 warm queries on 50000 tokens: trie {trie} ns, naive scan {naive} ns, cached space {cached} ns; below 1 ms: {under}"
    ))
}

// 10 --------------------------------------------------------------------

fn pipeline(dir: &Path) -> Result<(), String> {
    let corpus = code_corpus();
    let corpus = corpus.to_str().unwrap();
    let d = |name: &str| dir.join(name).to_str().unwrap().to_string();
    let provider = format!("ngram:{corpus}");
    cli(&[
        "--seed",
        "4",
        "vocab",
        "train",
        "--corpus",
        corpus,
        "--size",
        "400",
        "--out",
        &d("vocab.json"),
    ])?;
    cli(&[
        "--seed",
        "4",
        "gen-dataset",
        "--corpus",
        corpus,
        "--scenario",
        "all",
        "--per-doc",
        "2",
        "--out",
        &d("ds"),
    ])?;
    std::fs::write(dir.join("prompts.txt"), "def three_max(l):\n    re").map_err(|e| e.to_string())?;
    let nucleus = [
        "--sampling",
        "nucleus",
        "--top-p",
        "0.9",
        "--temperature",
        "0.8",
        "--provider",
        &provider,
    ];
    cli(&[
        &[
            "--seed",
            "4",
            "--vocab",
            &d("vocab.json"),
            "align",
            "--prompt-file",
            &d("prompts.txt"),
            "--no-timings",
            "--output",
            &d("align.jsonl"),
        ][..],
        &nucleus,
    ]
    .concat())?;
    cli(&[
        &[
            "--seed",
            "4",
            "--vocab",
            &d("vocab.json"),
            "eval",
            "--dataset",
            &d("ds/subword.jsonl"),
            "--output",
            &d("report.json"),
            "--csv",
            &d("report.csv"),
            "--records",
            &d("records.jsonl"),
        ][..],
        &nucleus,
    ]
    .concat())?;
    Ok(())
}

fn files(dir: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut out = vec![];
    for entry in std::fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        if path.is_dir() {
            out.extend(files(&path));
        } else {
            out.push((
                path.strip_prefix(dir).unwrap().to_path_buf(),
                std::fs::read(&path).unwrap(),
            ));
        }
    }
    out.sort();
    out
}

fn determinism() -> Outcome {
    let root = tempfile::tempdir().map_err(|e| e.to_string())?;
    let (a, b) = (root.path().join("a"), root.path().join("b"));
    for dir in [&a, &b] {
        std::fs::create_dir(dir).map_err(|e| e.to_string())?;
        pipeline(dir)?;
    }
    let (fa, fb) = (files(&a), files(&b));
    ensure(fa.len() == fb.len(), "runs wrote different file sets")?;
    for ((pa, ca), (pb, cb)) in fa.iter().zip(&fb) {
        ensure(pa == pb && ca == cb, format!("{} differs between runs", pa.display()))?;
    }
    Ok(format!(
        "vocab train, gen-dataset, align and eval: {} files byte-identical across two runs",
        fa.len()
    ))
}

fn main() {
    let desk = Desk::new();
    let runs = random_runs(&desk, 1_200);
    let started = Instant::now();
    let results = generate_all(&desk, &runs, MaskCache::DEFAULT_CAPACITY);
    let secs = started.elapsed().as_secs_f64();

    let mut outcomes: Vec<(&str, Outcome)> = vec![("trie oracle equivalence", trie_oracle())];
    match &results {
        Ok(results) => {
            outcomes.push(("prompt preservation", prompt_preservation(&desk, &runs, results, secs)));
            outcomes.push(("termination bound", termination(&desk, &runs, results)));
        }
        Err(e) => {
            outcomes.push(("prompt preservation", Err(e.clone())));
            outcomes.push(("termination bound", Err(e.clone())));
        }
    }
    outcomes.push(("three_max fixture", fig2()));
    outcomes.push(("directional improvement", directional(&desk)));
    outcomes.push(("pass@k estimator", pass_at_k_oracle()));
    outcomes.push(("metric oracles", metric_oracles()));
    outcomes.push((
        "mask-cache transparency",
        results
            .as_ref()
            .map_err(Clone::clone)
            .and_then(|r| cache_transparency(&desk, &runs, r)),
    ));
    outcomes.push(("lookup latency", latency()));
    outcomes.push(("determinism", determinism()));

    let mut failed = 0;
    for (i, (name, outcome)) in outcomes.iter().enumerate() {
        match outcome {
            Ok(detail) => println!("PASS {:>2} {name}: {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL {:>2} {name}: {detail}", i + 1);
            }
        }
    }
    println!("{} of {} criteria passed", outcomes.len() - failed, outcomes.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
