//! Paired evaluation: every example runs through the aligned and the
//! unaligned arm, on the partial-token prompt and on its baseline.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use base64::engine::general_purpose::STANDARD as B64;
use base64::Engine;
use serde::{Deserialize, Serialize};

use crate::align::{aligned_generate, AlignConfig, AlignError};
use crate::decode::{generate, LogitsProvider, SamplerConfig};
use crate::metrics::{
    edit_similarity_max, exact_match, first_token_accuracy, fuzzy_first_n_words, rouge_l, FUZZY_WORDS,
};
use crate::real::Real;
use crate::scenarios::ScenarioExample;
use crate::trie::{ByteTrie, MaskCache};
use crate::vocab::Vocabulary;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Arm {
    Aligned,
    Unaligned,
}

impl Arm {
    pub const BOTH: [Arm; 2] = [Arm::Aligned, Arm::Unaligned];

    pub fn name(self) -> &'static str {
        match self {
            Arm::Aligned => "aligned",
            Arm::Unaligned => "unaligned",
        }
    }
}

impl std::str::FromStr for Arm {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "aligned" => Ok(Arm::Aligned),
            "unaligned" => Ok(Arm::Unaligned),
            other => Err(format!("unknown arm `{other}`")),
        }
    }
}

/// Which prompt of an example is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    Partial,
    Baseline,
}

impl Variant {
    pub const BOTH: [Variant; 2] = [Variant::Partial, Variant::Baseline];
}

impl std::str::FromStr for Variant {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "partial" => Ok(Variant::Partial),
            "baseline" => Ok(Variant::Baseline),
            other => Err(format!("unknown variant `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Em,
    Es,
    Fta,
    RougeL,
    FuzzyEs,
    FuzzyRougeL,
}

impl Metric {
    pub const ALL: [Metric; 6] = [
        Metric::Em,
        Metric::Es,
        Metric::Fta,
        Metric::RougeL,
        Metric::FuzzyEs,
        Metric::FuzzyRougeL,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Metric::Em => "em",
            Metric::Es => "es",
            Metric::Fta => "fta",
            Metric::RougeL => "rouge_l",
            Metric::FuzzyEs => "fuzzy_es",
            Metric::FuzzyRougeL => "fuzzy_rouge_l",
        }
    }

    /// Parses a comma-separated list such as `em,es`.
    pub fn parse_list(s: &str) -> Result<Vec<Metric>, String> {
        s.split(',')
            .map(str::trim)
            .filter(|m| !m.is_empty())
            .map(|m| {
                Metric::ALL
                    .into_iter()
                    .find(|x| x.name() == m)
                    .ok_or_else(|| format!("unknown metric `{m}`"))
            })
            .collect()
    }
}

/// One generated continuation with its references.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvalRecord {
    pub example_id: String,
    /// Scenario name, suffixed `_baseline` for baseline prompts.
    pub scenario: String,
    pub arm: Arm,
    pub generated_b64: String,
    pub references_b64: Vec<String>,
    #[serde(default)]
    pub dead_end: bool,
}

impl EvalRecord {
    pub fn generated(&self) -> Result<Vec<u8>, base64::DecodeError> {
        B64.decode(&self.generated_b64)
    }

    pub fn references(&self) -> Result<Vec<Vec<u8>>, base64::DecodeError> {
        self.references_b64.iter().map(|r| B64.decode(r)).collect()
    }
}

#[derive(Debug, Clone)]
pub struct EvalConfig {
    pub align: AlignConfig,
    pub sampler: SamplerConfig,
    pub arms: Vec<Arm>,
    pub variants: Vec<Variant>,
    pub cache_capacity: usize,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            align: AlignConfig::default(),
            sampler: SamplerConfig::greedy(16),
            arms: Arm::BOTH.to_vec(),
            variants: Variant::BOTH.to_vec(),
            cache_capacity: MaskCache::DEFAULT_CAPACITY,
        }
    }
}

/// Generates every (example, variant, arm) continuation, in dataset order.
pub fn run_eval<F, M>(
    examples: &[ScenarioExample],
    model: &M,
    vocab: &Vocabulary,
    trie: &ByteTrie,
    cfg: &EvalConfig,
) -> Result<Vec<EvalRecord>, AlignError>
where
    F: Real,
    M: LogitsProvider<F> + ?Sized,
{
    let mut cache = MaskCache::new(trie, cfg.cache_capacity);
    let mut out = Vec::new();
    for ex in examples {
        for &variant in &cfg.variants {
            let (prompt, truth, scenario) = match variant {
                Variant::Partial => (ex.prompt.clone(), ex.ground_truth.clone(), ex.scenario.to_string()),
                Variant::Baseline => (
                    ex.baseline_prompt.clone(),
                    ex.baseline_ground_truth(),
                    format!("{}_baseline", ex.scenario),
                ),
            };
            for &arm in &cfg.arms {
                let result = match arm {
                    Arm::Aligned if !prompt.is_empty() => {
                        aligned_generate(model, vocab, trie, &mut cache, &prompt, &cfg.align, &cfg.sampler)?
                    }
                    _ => generate(model, vocab, &prompt, &cfg.sampler)?,
                };
                let generated = result.continuation().unwrap_or_default();
                out.push(EvalRecord {
                    example_id: ex.id(),
                    scenario: scenario.clone(),
                    arm,
                    generated_b64: B64.encode(generated),
                    references_b64: vec![B64.encode(&truth)],
                    dead_end: result.dead_end,
                });
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExampleScore {
    pub example_id: String,
    pub scenario: String,
    pub arm: Arm,
    pub scores: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub scenario: String,
    pub arm: Arm,
    pub metric: String,
    pub mean: f64,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeltaRow {
    pub scenario: String,
    pub metric: String,
    pub aligned: f64,
    pub unaligned: f64,
    /// `aligned − unaligned`.
    pub delta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreReport {
    pub metadata: BTreeMap<String, String>,
    pub aggregates: Vec<AggregateRow>,
    pub deltas: Vec<DeltaRow>,
    pub examples: Vec<ExampleScore>,
}

impl ScoreReport {
    pub fn mean(&self, scenario: &str, arm: Arm, metric: Metric) -> Option<f64> {
        self.aggregates
            .iter()
            .find(|r| r.scenario == scenario && r.arm == arm && r.metric == metric.name())
            .map(|r| r.mean)
    }

    /// `scenario,arm,metric,value,count`, deltas under arm `delta`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("scenario,arm,metric,value,count\n");
        for r in &self.aggregates {
            let _ = writeln!(
                s,
                "{},{},{},{:.6},{}",
                r.scenario,
                r.arm.name(),
                r.metric,
                r.mean,
                r.count
            );
        }
        for d in &self.deltas {
            let _ = writeln!(s, "{},delta,{},{:.6},", d.scenario, d.metric, d.delta);
        }
        s
    }
}

fn metric_value(metric: Metric, gen: &[u8], refs: &[Vec<u8>], vocab: &Vocabulary) -> f64 {
    let best = |f: &dyn Fn(&[u8]) -> f64| refs.iter().map(|r| f(r)).fold(0.0, f64::max);
    match metric {
        Metric::Em => exact_match(gen, refs),
        Metric::Es => edit_similarity_max(gen, refs),
        Metric::Fta => best(&|r| first_token_accuracy(gen, r, vocab)),
        Metric::RougeL => best(&|r| rouge_l(gen, r)),
        Metric::FuzzyEs => best(&|r| fuzzy_first_n_words(gen, r, FUZZY_WORDS).map_or(0.0, |x| x.0)),
        Metric::FuzzyRougeL => best(&|r| fuzzy_first_n_words(gen, r, FUZZY_WORDS).map_or(0.0, |x| x.1)),
    }
}

/// Scores records and aggregates per (scenario, arm, metric).
pub fn score(records: &[EvalRecord], metrics: &[Metric], vocab: &Vocabulary) -> Result<ScoreReport, String> {
    let mut examples = Vec::with_capacity(records.len());
    let mut sums: BTreeMap<(String, Arm, Metric), (f64, usize)> = BTreeMap::new();
    for r in records {
        let gen = r
            .generated()
            .map_err(|e| format!("{}: generated_b64: {e}", r.example_id))?;
        let refs = r
            .references()
            .map_err(|e| format!("{}: references_b64: {e}", r.example_id))?;
        if refs.is_empty() {
            return Err(format!("{}: no references", r.example_id));
        }
        let mut scores = BTreeMap::new();
        for &m in metrics {
            let v = metric_value(m, &gen, &refs, vocab);
            scores.insert(m.name().to_string(), v);
            let e = sums.entry((r.scenario.clone(), r.arm, m)).or_default();
            e.0 += v;
            e.1 += 1;
        }
        examples.push(ExampleScore {
            example_id: r.example_id.clone(),
            scenario: r.scenario.clone(),
            arm: r.arm,
            scores,
        });
    }
    let aggregates: Vec<AggregateRow> = sums
        .iter()
        .map(|((scenario, arm, m), &(sum, count))| AggregateRow {
            scenario: scenario.clone(),
            arm: *arm,
            metric: m.name().to_string(),
            mean: sum / count as f64,
            count,
        })
        .collect();
    let mut deltas = Vec::new();
    for ((scenario, arm, m), &(sum, count)) in &sums {
        if *arm != Arm::Aligned {
            continue;
        }
        if let Some(&(usum, ucount)) = sums.get(&(scenario.clone(), Arm::Unaligned, *m)) {
            let aligned = sum / count as f64;
            let unaligned = usum / ucount as f64;
            deltas.push(DeltaRow {
                scenario: scenario.clone(),
                metric: m.name().to_string(),
                aligned,
                unaligned,
                delta: aligned - unaligned,
            });
        }
    }
    let metadata = [
        (
            "em_normalization",
            "trim ASCII whitespace at both ends, no case folding",
        ),
        ("es_reference_rule", "max over references"),
        ("es_normalization", "1 - levenshtein / max(len)"),
        ("word_rule", "whitespace-delimited, punctuation attached"),
        ("fuzzy_n", "50"),
    ]
    .into_iter()
    .map(|(k, v)| (k.to_string(), v.to_string()))
    .collect();
    Ok(ScoreReport {
        metadata,
        aggregates,
        deltas,
        examples,
    })
}
