//! Dataset loading, corpus assembly, and hard-negative mining.
//!
//! Every loader converts into one canonical record shape so fixtures and the
//! pipeline stay dataset-agnostic. The generic JSONL format is
//! `{"id","question","answer","passages":[{"id","text","is_gold"}]}`;
//! HotpotQA- and Musique-shaped files are converted into it with stable
//! passage ids derived from the record id and passage index.

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::embed::{cosine, EmbedError, EmbeddingProvider};
use crate::kg::{Passage, QASample};

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("io error at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: not valid {format} data: {message}")]
    Format { path: PathBuf, format: &'static str, message: String },
    #[error("record `{record}`: no non-gold passage to mine from")]
    NoNonGold { record: String },
    #[error("pool size {pool_size} is smaller than the {gold} gold passages")]
    PoolTooSmall { pool_size: usize, gold: usize },
    #[error(transparent)]
    Embed(#[from] EmbedError),
}

/// Canonical QA record: gold passages are always a subset of candidates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetRecord {
    pub id: String,
    pub question: String,
    pub answer: String,
    pub supporting_passages: Vec<Passage>,
    pub candidate_passages: Vec<Passage>,
}

impl DatasetRecord {
    pub fn gold_ids(&self) -> BTreeSet<String> {
        self.supporting_passages.iter().map(|p| p.id.clone()).collect()
    }

    pub fn to_qa_sample(&self) -> QASample {
        QASample {
            query: self.question.clone(),
            gold_answer: self.answer.clone(),
            context_passages: self.candidate_passages.clone(),
            gold_passage_ids: self.gold_ids(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DatasetFormat {
    HotpotJson,
    MusiqueJson,
    GenericJsonl,
}

impl std::str::FromStr for DatasetFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "hotpot_json" => Ok(Self::HotpotJson),
            "musique_json" => Ok(Self::MusiqueJson),
            "generic_jsonl" => Ok(Self::GenericJsonl),
            other => Err(format!("unknown dataset format `{other}`")),
        }
    }
}

/// A record that failed to load, with its location.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RecordError {
    pub line: usize,
    pub record_id: Option<String>,
    pub message: String,
}

/// Loaded records plus per-record failures. Loading only fails outright when
/// the file itself cannot be read or parsed at the container level.
#[derive(Debug, Default)]
pub struct LoadOutcome {
    pub records: Vec<DatasetRecord>,
    pub errors: Vec<RecordError>,
}

#[derive(Deserialize)]
struct GenericRecord {
    id: String,
    question: String,
    answer: Option<String>,
    passages: Vec<GenericPassage>,
}

#[derive(Deserialize)]
struct GenericPassage {
    id: String,
    text: String,
    #[serde(default)]
    is_gold: bool,
}

#[derive(Deserialize)]
struct HotpotRecord {
    #[serde(rename = "_id")]
    id: String,
    question: String,
    answer: Option<String>,
    /// [[title, [sentence, ...]], ...]
    context: Vec<(String, Vec<String>)>,
    /// [[title, sentence_idx], ...]
    #[serde(default)]
    supporting_facts: Vec<(String, usize)>,
}

#[derive(Deserialize)]
struct MusiqueRecord {
    id: String,
    question: String,
    answer: Option<String>,
    paragraphs: Vec<MusiqueParagraph>,
}

#[derive(Deserialize)]
struct MusiqueParagraph {
    #[serde(default)]
    title: String,
    paragraph_text: String,
    #[serde(default)]
    is_supporting: bool,
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> IngestError + '_ {
    move |source| IngestError::Io { path: path.to_path_buf(), source }
}

fn generic_to_record(raw: GenericRecord, line: usize) -> Result<DatasetRecord, RecordError> {
    let answer = raw.answer.filter(|a| !a.is_empty()).ok_or_else(|| RecordError {
        line,
        record_id: Some(raw.id.clone()),
        message: "missing answer".into(),
    })?;
    let candidates: Vec<Passage> =
        raw.passages.iter().map(|p| Passage::new(&p.id, &p.text)).collect();
    let supporting: Vec<Passage> = raw
        .passages
        .iter()
        .filter(|p| p.is_gold)
        .map(|p| Passage::new(&p.id, &p.text))
        .collect();
    Ok(DatasetRecord {
        id: raw.id,
        question: raw.question,
        answer,
        supporting_passages: supporting,
        candidate_passages: candidates,
    })
}

fn hotpot_to_record(raw: HotpotRecord, line: usize) -> Result<DatasetRecord, RecordError> {
    let answer = raw.answer.filter(|a| !a.is_empty()).ok_or_else(|| RecordError {
        line,
        record_id: Some(raw.id.clone()),
        message: "missing answer".into(),
    })?;
    let gold_titles: BTreeSet<&str> =
        raw.supporting_facts.iter().map(|(title, _)| title.as_str()).collect();
    let mut supporting = Vec::new();
    let mut candidates = Vec::new();
    for (idx, (title, sentences)) in raw.context.iter().enumerate() {
        let passage = Passage {
            id: format!("{}-p{}", raw.id, idx),
            text: sentences.concat(),
            source_doc: title.clone(),
        };
        if gold_titles.contains(title.as_str()) {
            supporting.push(passage.clone());
        }
        candidates.push(passage);
    }
    Ok(DatasetRecord {
        id: raw.id,
        question: raw.question,
        answer,
        supporting_passages: supporting,
        candidate_passages: candidates,
    })
}

fn musique_to_record(raw: MusiqueRecord, line: usize) -> Result<DatasetRecord, RecordError> {
    let answer = raw.answer.filter(|a| !a.is_empty()).ok_or_else(|| RecordError {
        line,
        record_id: Some(raw.id.clone()),
        message: "missing answer".into(),
    })?;
    let mut supporting = Vec::new();
    let mut candidates = Vec::new();
    for (idx, paragraph) in raw.paragraphs.iter().enumerate() {
        let passage = Passage {
            id: format!("{}-p{}", raw.id, idx),
            text: paragraph.paragraph_text.clone(),
            source_doc: paragraph.title.clone(),
        };
        if paragraph.is_supporting {
            supporting.push(passage.clone());
        }
        candidates.push(passage);
    }
    Ok(DatasetRecord {
        id: raw.id,
        question: raw.question,
        answer,
        supporting_passages: supporting,
        candidate_passages: candidates,
    })
}

fn load_jsonl<T, F>(path: &Path, format: &'static str, convert: F) -> Result<LoadOutcome, IngestError>
where
    T: for<'de> Deserialize<'de>,
    F: Fn(T, usize) -> Result<DatasetRecord, RecordError>,
{
    let raw = fs::read_to_string(path).map_err(io_err(path))?;
    let mut outcome = LoadOutcome::default();
    for (i, line) in raw.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str::<T>(line) {
            Ok(parsed) => match convert(parsed, i + 1) {
                Ok(record) => outcome.records.push(record),
                Err(err) => outcome.errors.push(err),
            },
            Err(e) => outcome.errors.push(RecordError {
                line: i + 1,
                record_id: None,
                message: format!("not a {format} record: {e}"),
            }),
        }
    }
    Ok(outcome)
}

/// Loads a dataset file into canonical records. Records that fail to convert
/// (for instance a missing answer) are reported in the outcome and skipped;
/// the rest of the file still loads.
pub fn load_dataset(path: &Path, format: DatasetFormat) -> Result<LoadOutcome, IngestError> {
    match format {
        DatasetFormat::GenericJsonl => load_jsonl(path, "generic", generic_to_record),
        DatasetFormat::MusiqueJson => load_jsonl(path, "musique", musique_to_record),
        DatasetFormat::HotpotJson => {
            // HotpotQA ships as one JSON array.
            let raw = fs::read_to_string(path).map_err(io_err(path))?;
            let parsed: Vec<serde_json::Value> =
                serde_json::from_str(&raw).map_err(|e| IngestError::Format {
                    path: path.to_path_buf(),
                    format: "hotpot",
                    message: e.to_string(),
                })?;
            let mut outcome = LoadOutcome::default();
            for (i, value) in parsed.into_iter().enumerate() {
                match serde_json::from_value::<HotpotRecord>(value) {
                    Ok(record) => match hotpot_to_record(record, i + 1) {
                        Ok(record) => outcome.records.push(record),
                        Err(err) => outcome.errors.push(err),
                    },
                    Err(e) => outcome.errors.push(RecordError {
                        line: i + 1,
                        record_id: None,
                        message: format!("not a hotpot record: {e}"),
                    }),
                }
            }
            Ok(outcome)
        }
    }
}

/// Loads a corpus manifest: line-delimited JSON passages
/// (`{"id","text","source_doc"?}`).
pub fn load_corpus_manifest(path: &Path) -> Result<Vec<Passage>, IngestError> {
    let raw = fs::read_to_string(path).map_err(io_err(path))?;
    let mut passages = Vec::new();
    for (i, line) in raw.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let passage: Passage =
            serde_json::from_str(line).map_err(|e| IngestError::Format {
                path: path.to_path_buf(),
                format: "corpus manifest",
                message: format!("line {}: {e}", i + 1),
            })?;
        passages.push(passage);
    }
    Ok(passages)
}

/// The most query-similar non-gold passage in the corpus; ties break by
/// ascending passage id.
pub fn mine_hard_negative(
    record: &DatasetRecord,
    corpus: &[Passage],
    embedder: &dyn EmbeddingProvider,
) -> Result<Passage, IngestError> {
    let gold = record.gold_ids();
    let non_gold: Vec<&Passage> = corpus.iter().filter(|p| !gold.contains(&p.id)).collect();
    if non_gold.is_empty() {
        return Err(IngestError::NoNonGold { record: record.id.clone() });
    }
    let question_vec = embedder.embed_one(&record.question)?;
    let texts: Vec<String> = non_gold.iter().map(|p| p.text.clone()).collect();
    let vectors = embedder.embed(&texts)?;
    let mut best: Option<(&Passage, f64)> = None;
    for (passage, vector) in non_gold.iter().zip(&vectors) {
        let score = cosine(&question_vec, vector)?;
        let better = match best {
            None => true,
            Some((current, current_score)) => {
                score > current_score
                    || (score == current_score && passage.id < current.id)
            }
        };
        if better {
            best = Some((passage, score));
        }
    }
    Ok(best.expect("non_gold is non-empty").0.clone())
}

/// Pool assembly result; `reached_target` is false when the inputs could not
/// fill the pool (a warning, not a failure).
#[derive(Debug, Clone)]
pub struct PoolOutcome {
    pub record: DatasetRecord,
    pub reached_target: bool,
}

/// Builds the fixed per-query candidate pool: gold passages first, then the
/// mined hard negative (when given), then dataset distractors in id order
/// until `pool_size`. The final pool is sorted by passage id.
pub fn assemble_pool(
    record: &DatasetRecord,
    pool_size: usize,
    hard_negative: Option<Passage>,
) -> Result<PoolOutcome, IngestError> {
    if pool_size < record.supporting_passages.len() {
        return Err(IngestError::PoolTooSmall {
            pool_size,
            gold: record.supporting_passages.len(),
        });
    }
    let mut pool: Vec<Passage> = record.supporting_passages.clone();
    let mut seen: BTreeSet<String> = pool.iter().map(|p| p.id.clone()).collect();
    if let Some(negative) = hard_negative {
        if pool.len() < pool_size && seen.insert(negative.id.clone()) {
            pool.push(negative);
        }
    }
    let mut distractors: Vec<&Passage> = record
        .candidate_passages
        .iter()
        .filter(|p| !seen.contains(&p.id))
        .collect();
    distractors.sort_by(|a, b| a.id.cmp(&b.id));
    for passage in distractors {
        if pool.len() >= pool_size {
            break;
        }
        seen.insert(passage.id.clone());
        pool.push(passage.clone());
    }
    let reached_target = pool.len() == pool_size;
    if !reached_target {
        log::warn!(
            "record {}: pool has {} passages, wanted {}",
            record.id,
            pool.len(),
            pool_size
        );
    }
    pool.sort_by(|a, b| a.id.cmp(&b.id));
    Ok(PoolOutcome {
        record: DatasetRecord { candidate_passages: pool, ..record.clone() },
        reached_target,
    })
}
