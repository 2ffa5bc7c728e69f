//! `tokenalign` command-line driver.
//!
//! Exit status: 0 success, 1 usage error, 2 data error, 3 alignment dead
//! end under the `error` fallback policy.

mod config;

use std::collections::BTreeMap;
use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use serde::{Deserialize, Serialize};
use serde_json::json;

use tokenalign::align::{aligned_generate, AlignError};
use tokenalign::bench::{
    alignment_step_histogram, boundary_prompts, measure_lookup_latency, synthetic_vocab, LatencyConfig,
};
use tokenalign::decode::{generate, NGramModel};
use tokenalign::eval::{run_eval, score, Arm, EvalConfig, EvalRecord, Metric, Variant};
use tokenalign::generation::Timings;
use tokenalign::scenarios::{
    generate_dataset, load_corpus, load_examples, read_jsonl, save_examples, validate, write_jsonl, Scenario,
};
use tokenalign::trie::{ByteTrie, MaskCache};
use tokenalign::vocab::{train_tiny_bpe, PretokenizeOptions, TrainOptions, Vocabulary};

use config::{load_vocab, DecodeArgs, RunConfig, UsageError};

#[derive(Debug, Parser)]
#[command(
    name = "tokenalign",
    version,
    about = "Token alignment for prompts that end mid-token"
)]
struct Cli {
    /// Vocabulary JSON file.
    #[arg(long, global = true)]
    vocab: Option<PathBuf>,
    /// Seed for every stochastic step.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Run configuration: JSON file or inline JSON object.
    #[arg(long, global = true)]
    config: Option<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Complete prompts, with or without alignment.
    Align(AlignArgs),
    /// Cut a corpus into partial-token examples.
    GenDataset(GenDatasetArgs),
    /// Run both arms over a dataset and score them.
    Eval(EvalArgs),
    /// Measure mask lookup latency and alignment step counts.
    Bench(BenchArgs),
    /// Train or inspect vocabularies.
    #[command(subcommand)]
    Vocab(VocabCommand),
}

#[derive(Debug, clap::Args)]
struct AlignArgs {
    /// Prompt text.
    #[arg(long, conflicts_with = "prompt_file")]
    prompt: Option<String>,
    /// JSONL of `{id?, prompt | prompt_b64}`, or any other file as one prompt.
    /// Without either flag the prompt is read from stdin.
    #[arg(long)]
    prompt_file: Option<PathBuf>,
    /// Plain decoding of the prompt as tokenized.
    #[arg(long)]
    no_align: bool,
    /// Zero the timing fields so output is byte-reproducible.
    #[arg(long)]
    no_timings: bool,
    #[arg(long)]
    output: Option<PathBuf>,
    #[command(flatten)]
    decode: DecodeArgs,
}

#[derive(Debug, clap::Args)]
struct GenDatasetArgs {
    /// JSONL `{id, text}`, a directory of text files, or a text file.
    #[arg(long)]
    corpus: PathBuf,
    /// A scenario name or `all`.
    #[arg(long)]
    scenario: String,
    #[arg(long, default_value_t = 1)]
    per_doc: usize,
    /// Output JSONL (one scenario) or directory (`all`).
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, clap::Args)]
struct EvalArgs {
    /// Scenario dataset JSONL.
    #[arg(long, required_unless_present = "from_records")]
    dataset: Option<PathBuf>,
    /// Score an existing EvalRecord JSONL instead of generating.
    #[arg(long, conflicts_with_all = ["dataset", "validate_only"])]
    from_records: Option<PathBuf>,
    /// Only check every example against its scenario's constraints.
    #[arg(long)]
    validate_only: bool,
    /// Restrict to one arm.
    #[arg(long)]
    arm: Option<Arm>,
    /// Restrict to one prompt variant (`partial` or `baseline`).
    #[arg(long)]
    variant: Option<Variant>,
    /// Comma-separated: em, es, fta, rouge_l, fuzzy_es, fuzzy_rouge_l.
    #[arg(long, default_value = "em,es,fta,rouge_l,fuzzy_es,fuzzy_rouge_l")]
    metrics: String,
    /// Score report JSON (stdout when absent).
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Also write the generated EvalRecord JSONL here.
    #[arg(long)]
    records: Option<PathBuf>,
    #[command(flatten)]
    decode: DecodeArgs,
}

#[derive(Debug, clap::Args)]
struct BenchArgs {
    #[arg(long, default_value_t = 50_000)]
    vocab_size: usize,
    #[arg(long, default_value_t = 10_000)]
    queries: usize,
    /// Naive-scan queries; defaults to `--queries`.
    #[arg(long)]
    naive_queries: Option<usize>,
    #[arg(long, default_value_t = 1_000)]
    warmup: usize,
    /// Corpus for the alignment-step histogram; needs `--vocab`. The
    /// provider defaults to an n-gram model of the same corpus.
    #[arg(long)]
    corpus: Option<PathBuf>,
    #[arg(long, default_value_t = 4)]
    prompts_per_doc: usize,
    #[arg(long)]
    output: Option<PathBuf>,
    #[command(flatten)]
    decode: DecodeArgs,
}

#[derive(Debug, Subcommand)]
enum VocabCommand {
    /// Train a byte-level BPE vocabulary.
    Train {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        size: usize,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        no_space_prefix: bool,
        #[arg(long)]
        no_group_whitespace: bool,
        #[arg(long, default_value_t = 2)]
        min_frequency: u64,
        /// Special token text, repeatable.
        #[arg(long)]
        special: Vec<String>,
    },
    /// Summarize a vocabulary, optionally tokenizing some text.
    Inspect {
        #[arg(long)]
        text: Option<String>,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_status(&e))
        }
    }
}

fn exit_status(e: &anyhow::Error) -> u8 {
    for cause in e.chain() {
        if cause.is::<UsageError>() {
            return 1;
        }
        if let Some(AlignError::DeadEnd { .. }) = cause.downcast_ref::<AlignError>() {
            return 3;
        }
    }
    2
}

fn run(cli: Cli) -> Result<()> {
    let cfg = match &cli.config {
        Some(arg) => RunConfig::load(arg)?,
        None => RunConfig::default(),
    };
    let seed = cli.seed.or(cfg.seed).unwrap_or(0);
    let vocab_path = cli.vocab.clone().or_else(|| cfg.vocab.clone());
    let vocab_path = vocab_path.as_deref();
    match cli.command {
        Command::Align(args) => cmd_align(args, &cfg, vocab_path, seed),
        Command::GenDataset(args) => cmd_gen_dataset(args, seed),
        Command::Eval(args) => cmd_eval(args, &cfg, vocab_path, seed),
        Command::Bench(args) => cmd_bench(args, &cfg, vocab_path, seed),
        Command::Vocab(cmd) => cmd_vocab(cmd, vocab_path),
    }
}

fn open_output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(std::io::BufWriter::new(
            fs::File::create(p).with_context(|| format!("creating {}", p.display()))?,
        )),
        None => Box::new(std::io::stdout().lock()),
    })
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct PromptLine {
    id: Option<String>,
    prompt: Option<String>,
    prompt_b64: Option<String>,
}

fn read_prompts(args: &AlignArgs, cfg: &RunConfig) -> Result<Vec<(Option<String>, Vec<u8>)>> {
    if let Some(p) = &args.prompt {
        return Ok(vec![(None, p.clone().into_bytes())]);
    }
    let Some(path) = args.prompt_file.as_ref().or(cfg.input.as_ref()) else {
        let mut buf = Vec::new();
        std::io::stdin().read_to_end(&mut buf)?;
        return Ok(vec![(None, buf)]);
    };
    if path.extension().is_some_and(|e| e == "jsonl") {
        use base64::Engine;
        let lines: Vec<PromptLine> = read_jsonl(path)?;
        return lines
            .into_iter()
            .enumerate()
            .map(|(i, l)| {
                let bytes = match (l.prompt, l.prompt_b64) {
                    (Some(t), None) => t.into_bytes(),
                    (None, Some(b)) => base64::engine::general_purpose::STANDARD
                        .decode(b)
                        .with_context(|| format!("{}:{}: prompt_b64", path.display(), i + 1))?,
                    _ => bail!("{}:{}: need exactly one of prompt, prompt_b64", path.display(), i + 1),
                };
                Ok((l.id, bytes))
            })
            .collect();
    }
    Ok(vec![(
        None,
        fs::read(path).with_context(|| format!("reading {}", path.display()))?,
    )])
}

fn cmd_align(args: AlignArgs, cfg: &RunConfig, vocab_path: Option<&Path>, seed: u64) -> Result<()> {
    let resolved = args.decode.resolve(cfg, seed, 32)?;
    let vocab = load_vocab(vocab_path)?;
    let model = resolved.build_provider(&vocab)?;
    let trie = ByteTrie::build(&vocab)?;
    let mut cache = MaskCache::new(&trie, resolved.cache_capacity);
    let prompts = read_prompts(&args, cfg)?;
    let mut out = open_output(args.output.as_deref().or(cfg.output.as_deref()))?;
    for (id, prompt) in prompts {
        let mut result = if args.no_align {
            generate(&*model, &vocab, &prompt, &resolved.sampler)?
        } else {
            aligned_generate(
                &*model,
                &vocab,
                &trie,
                &mut cache,
                &prompt,
                &resolved.align,
                &resolved.sampler,
            )?
        };
        if args.no_timings {
            result.timings = Timings::default();
        }
        let mut record = result.to_json();
        record.id = id;
        serde_json::to_writer(&mut out, &record)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

fn cmd_gen_dataset(args: GenDatasetArgs, seed: u64) -> Result<()> {
    let docs = load_corpus(&args.corpus).with_context(|| format!("loading corpus {}", args.corpus.display()))?;
    if args.scenario == "all" {
        fs::create_dir_all(&args.out)?;
        let mut all = Vec::new();
        for scenario in Scenario::ALL {
            let (examples, stats) = generate_dataset(&docs, scenario, seed, args.per_doc)?;
            save_examples(args.out.join(format!("{scenario}.jsonl")), &examples)?;
            write_json(&args.out.join(format!("{scenario}.stats.json")), &stats)?;
            all.push(stats);
        }
        write_json(&args.out.join("stats.json"), &all)?;
        return Ok(());
    }
    let scenario: Scenario = args.scenario.parse().map_err(UsageError)?;
    let (examples, stats) = generate_dataset(&docs, scenario, seed, args.per_doc)?;
    save_examples(&args.out, &examples)?;
    write_json(&stats_path(&args.out), &stats)?;
    Ok(())
}

/// `data.jsonl` → `data.stats.json`.
fn stats_path(out: &Path) -> PathBuf {
    let stem = out.file_stem().unwrap_or_default().to_string_lossy();
    out.with_file_name(format!("{stem}.stats.json"))
}

fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn cmd_eval(args: EvalArgs, cfg: &RunConfig, vocab_path: Option<&Path>, seed: u64) -> Result<()> {
    let metrics = Metric::parse_list(&args.metrics).map_err(UsageError)?;
    if let Some(dataset) = &args.dataset {
        if args.validate_only {
            let examples = load_examples(dataset)?;
            let mut per_scenario: BTreeMap<String, (usize, usize)> = BTreeMap::new();
            let mut failures = Vec::new();
            for ex in &examples {
                let e = per_scenario.entry(ex.scenario.to_string()).or_default();
                e.0 += 1;
                match validate(ex) {
                    Ok(()) => e.1 += 1,
                    Err(msg) => failures.push(json!({"example_id": ex.id(), "error": msg})),
                }
            }
            let summary = json!({
                "examples": examples.len(),
                "valid": examples.len() - failures.len(),
                "per_scenario": per_scenario
                    .iter()
                    .map(|(k, (n, ok))| (k.clone(), json!({"examples": n, "valid": ok})))
                    .collect::<BTreeMap<_, _>>(),
                "failures": failures,
            });
            println!("{}", serde_json::to_string_pretty(&summary)?);
            if !failures.is_empty() {
                bail!("{} of {} examples failed validation", failures.len(), examples.len());
            }
            return Ok(());
        }
    }
    let vocab = load_vocab(vocab_path)?;
    let records = match (&args.from_records, &args.dataset) {
        (Some(path), _) => read_jsonl::<EvalRecord>(path)?,
        (None, Some(dataset)) => {
            let examples = load_examples(dataset)?;
            let resolved = args.decode.resolve(cfg, seed, 16)?;
            let model = resolved.build_provider(&vocab)?;
            let trie = ByteTrie::build(&vocab)?;
            let eval_cfg = EvalConfig {
                align: resolved.align,
                sampler: resolved.sampler.clone(),
                arms: args.arm.map_or_else(|| Arm::BOTH.to_vec(), |a| vec![a]),
                variants: args.variant.map_or_else(|| Variant::BOTH.to_vec(), |v| vec![v]),
                cache_capacity: resolved.cache_capacity,
            };
            run_eval(&examples, &*model, &vocab, &trie, &eval_cfg)?
        }
        (None, None) => bail!(UsageError("need --dataset or --from-records".into())),
    };
    if let Some(path) = &args.records {
        write_jsonl(path, &records)?;
    }
    let report = score(&records, &metrics, &vocab).map_err(anyhow::Error::msg)?;
    if let Some(csv) = &args.csv {
        fs::write(csv, report.to_csv()).with_context(|| format!("writing {}", csv.display()))?;
    }
    match args.output.as_deref().or(cfg.output.as_deref()) {
        Some(path) => write_json(path, &report)?,
        None => println!("{}", serde_json::to_string_pretty(&report)?),
    }
    Ok(())
}

fn cmd_bench(args: BenchArgs, cfg: &RunConfig, vocab_path: Option<&Path>, seed: u64) -> Result<()> {
    if args.vocab_size < 257 {
        bail!(UsageError("--vocab-size must exceed 256".into()));
    }
    if args.queries == 0 {
        bail!(UsageError("--queries must be positive".into()));
    }
    let synthetic = synthetic_vocab(args.vocab_size, seed)?;
    let latency = measure_lookup_latency(
        &synthetic,
        &LatencyConfig {
            queries: args.queries,
            naive_queries: args.naive_queries.unwrap_or(args.queries),
            warmup: args.warmup,
            seed,
        },
    )
    .map_err(anyhow::Error::msg)?;
    let checks = json!({
        "trie_median_below_1ms": latency.trie.p50 < 1_000_000,
        "trie_median_below_naive": latency.trie.p50 < latency.naive_scan.p50,
        "cached_space_median_at_most_trie": latency.cached_space.p50 <= latency.trie.p50,
    });
    let mut report = json!({ "latency_ns": latency, "checks": checks });

    if let Some(corpus) = &args.corpus {
        let vocab = load_vocab(vocab_path)?;
        let resolved = args.decode.resolve(cfg, seed, 0)?;
        let docs = load_corpus(corpus)?;
        let texts: Vec<&str> = docs.iter().map(|d| d.text.as_str()).collect();
        let model: Box<dyn tokenalign::decode::LogitsProvider<f64>> = match resolved.provider {
            Some(_) => resolved.build_provider(&vocab)?,
            None => Box::new(NGramModel::<f64>::build(
                &texts,
                &vocab,
                resolved.ngram_order,
                resolved.ngram_alpha,
            )?),
        };
        let trie = ByteTrie::build(&vocab)?;
        let prompts = boundary_prompts(
            &texts,
            &vocab,
            args.prompts_per_doc,
            resolved.align.backtrack_tokens + 1,
            seed,
        )?;
        let hist = alignment_step_histogram(&*model, &vocab, &trie, &prompts, &resolved.align, &resolved.sampler)?;
        report["alignment_steps"] = serde_json::to_value(&hist)?;
    }
    let text = serde_json::to_string_pretty(&report)? + "\n";
    match &args.output {
        Some(path) => fs::write(path, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

fn cmd_vocab(cmd: VocabCommand, vocab_path: Option<&Path>) -> Result<()> {
    match cmd {
        VocabCommand::Train {
            corpus,
            size,
            out,
            no_space_prefix,
            no_group_whitespace,
            min_frequency,
            special,
        } => {
            let docs = load_corpus(&corpus)?;
            let texts: Vec<&str> = docs.iter().map(|d| d.text.as_str()).collect();
            let opts = TrainOptions {
                pretokenize: PretokenizeOptions {
                    space_prefix: !no_space_prefix,
                    group_whitespace: !no_group_whitespace,
                },
                specials: special.into_iter().map(String::into_bytes).collect(),
                min_frequency,
            };
            let vocab = train_tiny_bpe(&texts, size, &opts)?;
            vocab.save(&out)?;
            eprintln!("wrote {} tokens to {}", vocab.len(), out.display());
            Ok(())
        }
        VocabCommand::Inspect { text } => {
            let vocab: Vocabulary = load_vocab(vocab_path)?;
            let trie = ByteTrie::build(&vocab)?;
            let mut summary = json!({
                "tokens": vocab.len(),
                "specials": vocab.specials().iter().collect::<Vec<_>>(),
                "merges": vocab.merges().map(<[_]>::len),
                "pretokenizer": vocab.pretokenizer(),
                "max_token_len": vocab.max_token_len(),
                "all_byte_tokens": vocab.has_all_byte_tokens(),
                "trie_nodes": trie.node_count(),
            });
            if let Some(text) = text {
                let ids = vocab.encode(text.as_bytes())?;
                let pieces: Vec<String> = ids
                    .iter()
                    .map(|&id| String::from_utf8_lossy(vocab.token_bytes(id).unwrap()).into_owned())
                    .collect();
                summary["ids"] = json!(ids);
                summary["pieces"] = json!(pieces);
            }
            println!("{}", serde_json::to_string_pretty(&summary)?);
            Ok(())
        }
    }
}
