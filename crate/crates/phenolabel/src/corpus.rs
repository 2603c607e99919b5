//! Corpus data model, file ingestion, and label-distribution statistics.
//!
//! A corpus is an ordered collection of documents, each carrying a unique id,
//! free text, and a gold [`LabelSet`]. Two on-disk formats are supported:
//!
//! * JSONL — one object per line: `{"id": "...", "text": "...", "labels": ["SI","SA"]}`
//! * CSV — columns `id,text,SI,SA,ES,NSSI` with 0/1 membership flags
//!
//! All values are immutable after construction and safe to share across
//! threads.

use std::collections::HashSet;
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::label::{Label, LabelSet};

/// One note: unique id, non-empty body text, and its gold label set.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    pub id: String,
    pub text: String,
    #[serde(rename = "labels")]
    pub gold: LabelSet,
}

/// An ordered, immutable collection of documents with unique ids.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Corpus {
    documents: Vec<Document>,
}

/// On-disk corpus format.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CorpusFormat {
    Jsonl,
    Csv,
}

impl CorpusFormat {
    /// Guess the format from a file extension; defaults to JSONL.
    pub fn from_path(path: &Path) -> CorpusFormat {
        match path.extension().and_then(|e| e.to_str()) {
            Some("csv") => CorpusFormat::Csv,
            _ => CorpusFormat::Jsonl,
        }
    }
}

impl fmt::Display for CorpusFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CorpusFormat::Jsonl => f.write_str("jsonl"),
            CorpusFormat::Csv => f.write_str("csv"),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: malformed record: {message}")]
    Malformed { line: usize, message: String },
    #[error("line {line}: duplicate document id {id:?}")]
    DuplicateId { line: usize, id: String },
    #[error("line {line}: unknown label name {name:?}")]
    UnknownLabel { line: usize, name: String },
    #[error("line {line}: document text is empty")]
    EmptyText { line: usize },
}

impl Corpus {
    /// Build a corpus, validating id uniqueness and non-empty text.
    pub fn new(documents: Vec<Document>) -> Result<Corpus, CorpusError> {
        let mut seen = HashSet::new();
        for (i, doc) in documents.iter().enumerate() {
            let line = i + 1;
            if doc.text.is_empty() {
                return Err(CorpusError::EmptyText { line });
            }
            if !seen.insert(doc.id.as_str()) {
                return Err(CorpusError::DuplicateId {
                    line,
                    id: doc.id.clone(),
                });
            }
        }
        Ok(Corpus { documents })
    }

    pub fn documents(&self) -> &[Document] {
        &self.documents
    }

    pub fn len(&self) -> usize {
        self.documents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.documents.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Document> {
        self.documents.iter()
    }

    /// Documents selected by index, in the given order.
    pub fn select(&self, indices: &[usize]) -> Vec<&Document> {
        indices.iter().map(|&i| &self.documents[i]).collect()
    }
}

/// Load a corpus from a file in the given format.
///
/// Documents keep file order. Label names outside `SI, SA, ES, NSSI` are
/// rejected, as are duplicate ids and empty texts; errors report the
/// offending line (JSONL) or record (CSV, header = line 1).
pub fn load_corpus(path: &Path, format: CorpusFormat) -> Result<Corpus, CorpusError> {
    let file = File::open(path)?;
    match format {
        CorpusFormat::Jsonl => read_jsonl(BufReader::new(file)),
        CorpusFormat::Csv => read_csv(BufReader::new(file)),
    }
}

/// Write a corpus to a file in the given format. Output is deterministic:
/// equal corpora produce byte-identical files.
pub fn write_corpus(corpus: &Corpus, path: &Path, format: CorpusFormat) -> Result<(), CorpusError> {
    let file = File::create(path)?;
    let mut writer = BufWriter::new(file);
    match format {
        CorpusFormat::Jsonl => write_jsonl(corpus, &mut writer)?,
        CorpusFormat::Csv => write_csv(corpus, &mut writer)?,
    }
    writer.flush()?;
    Ok(())
}

/// Serialize a corpus to a JSONL string.
pub fn corpus_to_jsonl(corpus: &Corpus) -> String {
    let mut out = Vec::new();
    write_jsonl(corpus, &mut out).expect("writing to a Vec cannot fail");
    String::from_utf8(out).expect("JSON output is UTF-8")
}

fn read_jsonl<R: BufRead>(reader: R) -> Result<Corpus, CorpusError> {
    // Raw record so that label errors can be reported by name.
    #[derive(Deserialize)]
    struct RawRecord {
        id: String,
        text: String,
        labels: Vec<String>,
    }

    let mut documents = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let raw: RawRecord =
            serde_json::from_str(&line).map_err(|e| CorpusError::Malformed {
                line: line_no,
                message: e.to_string(),
            })?;
        let mut gold = LabelSet::EMPTY;
        for name in &raw.labels {
            match Label::parse(name) {
                Some(label) => gold.insert(label),
                None => {
                    return Err(CorpusError::UnknownLabel {
                        line: line_no,
                        name: name.clone(),
                    })
                }
            }
        }
        if raw.text.is_empty() {
            return Err(CorpusError::EmptyText { line: line_no });
        }
        documents.push(Document {
            id: raw.id,
            text: raw.text,
            gold,
        });
    }
    with_line_context(Corpus::new(documents))
}

fn write_jsonl<W: Write>(corpus: &Corpus, writer: &mut W) -> Result<(), CorpusError> {
    for doc in corpus.iter() {
        let line = serde_json::to_string(doc).map_err(|e| CorpusError::Malformed {
            line: 0,
            message: e.to_string(),
        })?;
        writer.write_all(line.as_bytes())?;
        writer.write_all(b"\n")?;
    }
    Ok(())
}

fn read_csv<R: Read>(reader: R) -> Result<Corpus, CorpusError> {
    let mut csv_reader = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    {
        let headers = csv_reader.headers().map_err(|e| CorpusError::Malformed {
            line: 1,
            message: e.to_string(),
        })?;
        let expected = ["id", "text", "SI", "SA", "ES", "NSSI"];
        let got: Vec<&str> = headers.iter().collect();
        if got != expected {
            // A mislabeled flag column is an unknown label, not a generic parse error.
            for (name, want) in got.iter().zip(expected.iter()).skip(2) {
                if name != want {
                    return Err(CorpusError::UnknownLabel {
                        line: 1,
                        name: (*name).to_string(),
                    });
                }
            }
            return Err(CorpusError::Malformed {
                line: 1,
                message: format!("expected header id,text,SI,SA,ES,NSSI, found {}", got.join(",")),
            });
        }
    }

    let mut documents = Vec::new();
    for (i, record) in csv_reader.records().enumerate() {
        let line_no = i + 2; // header occupies line 1
        let record = record.map_err(|e| CorpusError::Malformed {
            line: line_no,
            message: e.to_string(),
        })?;
        if record.len() != 6 {
            return Err(CorpusError::Malformed {
                line: line_no,
                message: format!("expected 6 fields, found {}", record.len()),
            });
        }
        let id = record[0].to_string();
        let text = record[1].to_string();
        if text.is_empty() {
            return Err(CorpusError::EmptyText { line: line_no });
        }
        let mut flags = [false; Label::COUNT];
        for (j, flag) in flags.iter_mut().enumerate() {
            *flag = match &record[j + 2] {
                "0" => false,
                "1" => true,
                other => {
                    return Err(CorpusError::Malformed {
                        line: line_no,
                        message: format!(
                            "label flag for {} must be 0 or 1, found {other:?}",
                            Label::ALL[j]
                        ),
                    })
                }
            };
        }
        documents.push(Document {
            id,
            text,
            gold: LabelSet::from_flags(flags),
        });
    }
    with_line_context(Corpus::new(documents))
}

fn write_csv<W: Write>(corpus: &Corpus, writer: &mut W) -> Result<(), CorpusError> {
    let mut csv_writer = csv::Writer::from_writer(writer);
    csv_writer
        .write_record(["id", "text", "SI", "SA", "ES", "NSSI"])
        .map_err(csv_io_error)?;
    for doc in corpus.iter() {
        let flags = doc.gold.flags();
        let mut record = vec![doc.id.clone(), doc.text.clone()];
        record.extend(flags.iter().map(|&f| if f { "1".to_string() } else { "0".to_string() }));
        csv_writer.write_record(&record).map_err(csv_io_error)?;
    }
    csv_writer.flush()?;
    Ok(())
}

fn csv_io_error(e: csv::Error) -> CorpusError {
    CorpusError::Malformed {
        line: 0,
        message: e.to_string(),
    }
}

// Corpus::new reports positions as in-memory indices; keep them as-is, the
// readers above already validated per-line content.
fn with_line_context(result: Result<Corpus, CorpusError>) -> Result<Corpus, CorpusError> {
    result
}

/// Aggregate label statistics for a corpus.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelDistribution {
    /// Documents carrying each label, in canonical label order.
    pub per_label_counts: [usize; Label::COUNT],
    /// Documents with exactly 0, 1, 2, 3, 4 labels.
    pub cardinality_histogram: [usize; Label::COUNT + 1],
    /// Among single-label documents, the count per label.
    pub single_label_breakdown: [usize; Label::COUNT],
    /// Documents containing both labels of each unordered pair, indexed by
    /// [`LabelDistribution::PAIRS`].
    pub pair_cooccurrence: [usize; 6],
    /// Total label instances, `Σ per_label_counts`.
    pub total_label_instances: usize,
    /// Number of documents.
    pub corpus_size: usize,
}

impl LabelDistribution {
    /// The six unordered label pairs, in canonical order.
    pub const PAIRS: [(Label, Label); 6] = [
        (Label::SI, Label::SA),
        (Label::SI, Label::ES),
        (Label::SI, Label::NSSI),
        (Label::SA, Label::ES),
        (Label::SA, Label::NSSI),
        (Label::ES, Label::NSSI),
    ];

    /// Count of documents containing both labels of the pair.
    pub fn pair(&self, a: Label, b: Label) -> usize {
        let key = if a.index() <= b.index() { (a, b) } else { (b, a) };
        let idx = Self::PAIRS
            .iter()
            .position(|&p| p == key)
            .expect("distinct labels form a canonical pair");
        self.pair_cooccurrence[idx]
    }
}

/// Compute the full label distribution of a corpus.
pub fn label_distribution(corpus: &Corpus) -> LabelDistribution {
    let mut per_label = [0usize; Label::COUNT];
    let mut cardinality = [0usize; Label::COUNT + 1];
    let mut singles = [0usize; Label::COUNT];
    let mut pairs = [0usize; 6];

    for doc in corpus.iter() {
        let k = doc.gold.cardinality();
        cardinality[k] += 1;
        for label in doc.gold.iter() {
            per_label[label.index()] += 1;
            if k == 1 {
                singles[label.index()] += 1;
            }
        }
        for (idx, &(a, b)) in LabelDistribution::PAIRS.iter().enumerate() {
            if doc.gold.contains(a) && doc.gold.contains(b) {
                pairs[idx] += 1;
            }
        }
    }

    LabelDistribution {
        per_label_counts: per_label,
        cardinality_histogram: cardinality,
        single_label_breakdown: singles,
        pair_cooccurrence: pairs,
        total_label_instances: per_label.iter().sum(),
        corpus_size: corpus.len(),
    }
}
