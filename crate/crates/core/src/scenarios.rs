//! Partial-token evaluation datasets.
//!
//! Each scenario picks a cut position in a source document. Everything
//! before the cut is the prompt, everything after it the ground truth. The
//! baseline prompt is the same prompt backed off to the last complete
//! whitespace-delimited word, so it carries no partial token.
//!
//! Byte classes:
//! * word: ASCII alphanumerics and `_`
//! * punctuation: ASCII punctuation other than `_`
//! * whitespace: space, `\n`, `\t`

use std::fmt;
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::str::FromStr;

use base64::engine::general_purpose::STANDARD as B64;
use base64::Engine;
use rand::seq::index;
use rand::{Rng, RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("no eligible cut point for scenario {0}")]
    NoCutPoint(Scenario),
    #[error("scenario {scenario}: 0 eligible documents ({documents} read, {skipped} skipped)")]
    NoExamples {
        scenario: Scenario,
        documents: usize,
        skipped: usize,
    },
    #[error("{path}:{line}: {message}")]
    Format { path: String, line: usize, message: String },
    #[error("corpus is empty")]
    EmptyCorpus,
    #[error("invalid example: {0}")]
    Invalid(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    Subword,
    Punctuation,
    PrefixSep,
    PrefixIndent,
    ContiguousSpace,
}

impl Scenario {
    pub const ALL: [Scenario; 5] = [
        Scenario::Subword,
        Scenario::Punctuation,
        Scenario::PrefixSep,
        Scenario::PrefixIndent,
        Scenario::ContiguousSpace,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Scenario::Subword => "subword",
            Scenario::Punctuation => "punctuation",
            Scenario::PrefixSep => "prefix_sep",
            Scenario::PrefixIndent => "prefix_indent",
            Scenario::ContiguousSpace => "contiguous_space",
        }
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scenario {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Scenario::ALL
            .into_iter()
            .find(|sc| sc.name() == s)
            .ok_or_else(|| format!("unknown scenario `{s}`"))
    }
}

pub fn is_word(b: u8) -> bool {
    b.is_ascii_alphanumeric() || b == b'_'
}

pub fn is_punct(b: u8) -> bool {
    b.is_ascii_punctuation() && b != b'_'
}

pub fn is_space(b: u8) -> bool {
    matches!(b, b' ' | b'\n' | b'\t')
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScenarioExample {
    pub scenario: Scenario,
    pub source_id: String,
    pub prompt: Vec<u8>,
    pub baseline_prompt: Vec<u8>,
    pub ground_truth: Vec<u8>,
    pub cut_offset: usize,
}

impl ScenarioExample {
    /// `source_id@cut_offset`, unique within a dataset.
    pub fn id(&self) -> String {
        format!("{}@{}", self.source_id, self.cut_offset)
    }

    pub fn source(&self) -> Vec<u8> {
        [self.prompt.as_slice(), &self.ground_truth].concat()
    }

    /// The ground truth as seen from the baseline prompt.
    pub fn baseline_ground_truth(&self) -> Vec<u8> {
        let mut out = self.prompt[self.baseline_prompt.len()..].to_vec();
        out.extend_from_slice(&self.ground_truth);
        out
    }

    pub fn to_record(&self) -> ExampleRecord {
        ExampleRecord {
            scenario: self.scenario,
            source_id: self.source_id.clone(),
            prompt_b64: B64.encode(&self.prompt),
            baseline_prompt_b64: B64.encode(&self.baseline_prompt),
            ground_truth_b64: B64.encode(&self.ground_truth),
            cut_offset: self.cut_offset,
        }
    }
}

/// JSONL form of [`ScenarioExample`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExampleRecord {
    pub scenario: Scenario,
    pub source_id: String,
    pub prompt_b64: String,
    pub baseline_prompt_b64: String,
    pub ground_truth_b64: String,
    pub cut_offset: usize,
}

impl ExampleRecord {
    pub fn into_example(self) -> Result<ScenarioExample, String> {
        let dec = |field: &str, s: &str| B64.decode(s).map_err(|e| format!("{field}: {e}"));
        Ok(ScenarioExample {
            scenario: self.scenario,
            source_id: self.source_id,
            prompt: dec("prompt_b64", &self.prompt_b64)?,
            baseline_prompt: dec("baseline_prompt_b64", &self.baseline_prompt_b64)?,
            ground_truth: dec("ground_truth_b64", &self.ground_truth_b64)?,
            cut_offset: self.cut_offset,
        })
    }
}

/// Every cut offset the scenario accepts in `source`, ascending.
pub fn eligible_cuts(scenario: Scenario, source: &[u8]) -> Vec<usize> {
    let n = source.len();
    let at = |i: usize| source[i];
    match scenario {
        // Inside a word, right after an alphanumeric byte.
        Scenario::Subword => (1..n)
            .filter(|&c| at(c - 1).is_ascii_alphanumeric() && is_word(at(c)))
            .collect(),
        Scenario::Punctuation => (1..n).filter(|&c| is_punct(at(c - 1)) && is_punct(at(c))).collect(),
        // After the spaces separating two tokens on a line that already
        // has content before them.
        Scenario::PrefixSep => (1..n)
            .filter(|&c| at(c - 1) == b' ' && !is_space(at(c)))
            .filter(|&c| {
                let line_start = source[..c].iter().rposition(|&b| b == b'\n').map_or(0, |i| i + 1);
                source[line_start..c].iter().any(|&b| !is_space(b))
            })
            .collect(),
        // After a full indentation block that follows a newline.
        Scenario::PrefixIndent => (1..n)
            .filter(|&c| matches!(at(c - 1), b' ' | b'\t') && !is_space(at(c)))
            .filter(|&c| {
                let indent = source[..c]
                    .iter()
                    .rev()
                    .take_while(|&&b| matches!(b, b' ' | b'\t'))
                    .count();
                c > indent && at(c - indent - 1) == b'\n'
            })
            .collect(),
        Scenario::ContiguousSpace => (1..n).filter(|&c| is_space(at(c - 1)) && is_space(at(c))).collect(),
    }
}

/// The prompt backed off to the last complete whitespace-delimited word:
/// if the cut falls inside a non-whitespace run, drop that run, then trim
/// trailing whitespace.
pub fn baseline_cut(source: &[u8], cut: usize) -> usize {
    let mut end = cut;
    if end > 0 && end < source.len() && !is_space(source[end - 1]) && !is_space(source[end]) {
        while end > 0 && !is_space(source[end - 1]) {
            end -= 1;
        }
    }
    while end > 0 && is_space(source[end - 1]) {
        end -= 1;
    }
    end
}

pub fn make_example(scenario: Scenario, source_id: &str, source: &[u8], cut: usize) -> ScenarioExample {
    ScenarioExample {
        scenario,
        source_id: source_id.to_string(),
        prompt: source[..cut].to_vec(),
        baseline_prompt: source[..baseline_cut(source, cut)].to_vec(),
        ground_truth: source[cut..].to_vec(),
        cut_offset: cut,
    }
}

/// One uniformly chosen cut.
pub fn cut<R: Rng + ?Sized>(scenario: Scenario, source: &[u8], rng: &mut R) -> Result<ScenarioExample, ScenarioError> {
    let cuts = eligible_cuts(scenario, source);
    if cuts.is_empty() {
        return Err(ScenarioError::NoCutPoint(scenario));
    }
    let c = cuts[rng.random_range(0..cuts.len())];
    Ok(make_example(scenario, "", source, c))
}

pub fn cut_subword<R: Rng + ?Sized>(source: &[u8], rng: &mut R) -> Result<ScenarioExample, ScenarioError> {
    cut(Scenario::Subword, source, rng)
}

pub fn cut_punctuation<R: Rng + ?Sized>(source: &[u8], rng: &mut R) -> Result<ScenarioExample, ScenarioError> {
    cut(Scenario::Punctuation, source, rng)
}

pub fn cut_space_prefix_sep<R: Rng + ?Sized>(source: &[u8], rng: &mut R) -> Result<ScenarioExample, ScenarioError> {
    cut(Scenario::PrefixSep, source, rng)
}

pub fn cut_space_prefix_indent<R: Rng + ?Sized>(source: &[u8], rng: &mut R) -> Result<ScenarioExample, ScenarioError> {
    cut(Scenario::PrefixIndent, source, rng)
}

pub fn cut_contiguous_space<R: Rng + ?Sized>(source: &[u8], rng: &mut R) -> Result<ScenarioExample, ScenarioError> {
    cut(Scenario::ContiguousSpace, source, rng)
}

/// Post-hoc check of an emitted example, independent of [`eligible_cuts`].
pub fn validate(ex: &ScenarioExample) -> Result<(), String> {
    let p = &ex.prompt;
    let last = *p.last().ok_or("empty prompt")?;
    let next = *ex.ground_truth.first().ok_or("empty ground truth")?;
    if ex.cut_offset != p.len() {
        return Err(format!("cut_offset {} != prompt length {}", ex.cut_offset, p.len()));
    }
    let b = &ex.baseline_prompt;
    if !(b.len() < p.len() && p.starts_with(b)) {
        return Err("baseline is not a strict prefix of the prompt".into());
    }
    if let Some(&bl) = b.last() {
        if is_space(bl) || !is_space(p[b.len()]) {
            return Err("baseline does not end at a complete word".into());
        }
    }
    let ok = match ex.scenario {
        Scenario::Subword => last.is_ascii_alphanumeric() && is_word(next),
        Scenario::Punctuation => is_punct(last) && is_punct(next),
        Scenario::PrefixSep => {
            let line = p.rsplit(|&b| b == b'\n').next().unwrap_or(p);
            last == b' ' && !is_space(next) && !line.iter().all(|&b| is_space(b))
        }
        Scenario::PrefixIndent => {
            let indent = p.iter().rev().take_while(|&&b| b == b' ' || b == b'\t').count();
            indent > 0 && p.len() > indent && p[p.len() - indent - 1] == b'\n' && !is_space(next)
        }
        Scenario::ContiguousSpace => is_space(last) && is_space(next),
    };
    if ok {
        Ok(())
    } else {
        Err(format!(
            "{} constraint violated at offset {}",
            ex.scenario, ex.cut_offset
        ))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    pub id: String,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetStats {
    pub scenario: Scenario,
    pub seed: u64,
    pub documents: usize,
    pub emitted: usize,
    pub skipped: usize,
}

/// Up to `per_doc` distinct cuts per document. Document `i` draws from its
/// own generator seeded with `seed ^ i`, so output is independent of how
/// documents are processed.
pub fn generate_dataset(
    docs: &[Document],
    scenario: Scenario,
    seed: u64,
    per_doc: usize,
) -> Result<(Vec<ScenarioExample>, DatasetStats), ScenarioError> {
    if docs.is_empty() {
        return Err(ScenarioError::EmptyCorpus);
    }
    let mut examples = Vec::new();
    let mut skipped = 0;
    for (i, doc) in docs.iter().enumerate() {
        let source = doc.text.as_bytes();
        let cuts = eligible_cuts(scenario, source);
        if cuts.is_empty() || per_doc == 0 {
            skipped += 1;
            continue;
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ i as u64);
        let mut picked: Vec<usize> = index::sample(&mut rng, cuts.len(), per_doc.min(cuts.len()))
            .into_iter()
            .map(|k| cuts[k])
            .collect();
        picked.sort_unstable();
        examples.extend(picked.into_iter().map(|c| make_example(scenario, &doc.id, source, c)));
    }
    let stats = DatasetStats {
        scenario,
        seed,
        documents: docs.len(),
        emitted: examples.len(),
        skipped,
    };
    if examples.is_empty() {
        return Err(ScenarioError::NoExamples {
            scenario,
            documents: docs.len(),
            skipped,
        });
    }
    Ok((examples, stats))
}

/// Reads a corpus: a JSONL file of `{id, text}`, a directory of text files
/// (sorted by name, id = file name) or a single text file.
pub fn load_corpus(path: impl AsRef<Path>) -> Result<Vec<Document>, ScenarioError> {
    let path = path.as_ref();
    if path.is_dir() {
        let mut entries: Vec<_> = fs::read_dir(path)?
            .map(|e| e.map(|e| e.path()))
            .collect::<Result<_, _>>()?;
        entries.retain(|p| p.is_file());
        entries.sort();
        return entries
            .into_iter()
            .map(|p| {
                Ok(Document {
                    id: p.file_name().unwrap_or_default().to_string_lossy().into_owned(),
                    text: fs::read_to_string(&p)?,
                })
            })
            .collect();
    }
    if path.extension().is_some_and(|e| e == "jsonl") {
        return read_jsonl(path);
    }
    Ok(vec![Document {
        id: path.file_stem().unwrap_or_default().to_string_lossy().into_owned(),
        text: fs::read_to_string(path)?,
    }])
}

/// Parses one JSON value per non-blank line.
pub fn read_jsonl<T: serde::de::DeserializeOwned>(path: impl AsRef<Path>) -> Result<Vec<T>, ScenarioError> {
    let path = path.as_ref();
    let reader = BufReader::new(fs::File::open(path)?);
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| ScenarioError::Format {
            path: path.display().to_string(),
            line: i + 1,
            message: e.to_string(),
        })?);
    }
    Ok(out)
}

pub fn write_jsonl<T: Serialize>(
    path: impl AsRef<Path>,
    items: impl IntoIterator<Item = T>,
) -> Result<(), ScenarioError> {
    let mut w = std::io::BufWriter::new(fs::File::create(path)?);
    for item in items {
        serde_json::to_writer(&mut w, &item).map_err(std::io::Error::from)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

pub fn load_examples(path: impl AsRef<Path>) -> Result<Vec<ScenarioExample>, ScenarioError> {
    let path = path.as_ref();
    read_jsonl::<ExampleRecord>(path)?
        .into_iter()
        .enumerate()
        .map(|(i, r)| {
            r.into_example().map_err(|message| ScenarioError::Format {
                path: path.display().to_string(),
                line: i + 1,
                message,
            })
        })
        .collect()
}

pub fn save_examples(path: impl AsRef<Path>, examples: &[ScenarioExample]) -> Result<(), ScenarioError> {
    write_jsonl(path, examples.iter().map(ScenarioExample::to_record))
}
