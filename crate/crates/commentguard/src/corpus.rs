//! Corpus JSONL ingestion.
//!
//! One object per line with `id`, `text` and optional `post_id`, `author`,
//! `label` (`genuine|spam|scam`) and `created_at`. Unknown fields are kept and
//! written back out on serialization. Bad lines are reported with their
//! 1-based line number rather than aborting the whole file.

use std::collections::HashSet;
use std::fs::File;
use std::io::{self, BufRead, BufReader, Write};
use std::path::Path;

use commentguard_core::{Comment, LabeledComment, RawLabel};
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum LineErrorKind {
    #[error("malformed line: {0}")]
    MalformedLine(String),
    #[error("missing or empty field `{0}`")]
    MissingField(&'static str),
    #[error("unknown label `{0}`")]
    UnknownLabel(String),
    #[error("duplicate id `{0}`")]
    DuplicateId(String),
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("line {line}: {kind}")]
pub struct LineError {
    pub line: usize,
    pub kind: LineErrorKind,
}

#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
    #[error("cannot read corpus: {0}")]
    Io(#[from] io::Error),
    #[error("{count} record(s) carry no label, first at line {first_line}")]
    Unlabeled { count: usize, first_line: usize },
}

/// A parsed corpus line.
#[derive(Debug, Clone, PartialEq)]
pub struct CorpusRecord {
    pub line: usize,
    pub comment: Comment,
    pub label: Option<RawLabel>,
    /// Fields this format does not know about, preserved verbatim.
    pub extra: Map<String, Value>,
}

#[derive(Debug, Deserialize)]
struct WireIn {
    id: Option<String>,
    post_id: Option<String>,
    author: Option<String>,
    text: Option<String>,
    label: Option<String>,
    created_at: Option<String>,
    #[serde(flatten)]
    extra: Map<String, Value>,
}

#[derive(Debug, Serialize)]
struct WireOut<'a> {
    id: &'a str,
    #[serde(skip_serializing_if = "Option::is_none")]
    post_id: Option<&'a str>,
    #[serde(skip_serializing_if = "Option::is_none")]
    author: Option<&'a str>,
    text: &'a str,
    #[serde(skip_serializing_if = "Option::is_none")]
    label: Option<&'a str>,
    #[serde(skip_serializing_if = "Option::is_none")]
    created_at: Option<&'a str>,
    #[serde(flatten)]
    extra: &'a Map<String, Value>,
}

impl CorpusRecord {
    pub fn to_json_line(&self) -> String {
        let out = WireOut {
            id: &self.comment.id,
            post_id: self.comment.post_id.as_deref(),
            author: self.comment.author.as_deref(),
            text: &self.comment.text,
            label: self.label.map(RawLabel::as_str),
            created_at: self.comment.created_at.as_deref(),
            extra: &self.extra,
        };
        serde_json::to_string(&out).expect("corpus record serializes")
    }

    pub fn labeled(&self) -> Option<LabeledComment> {
        self.label
            .map(|l| LabeledComment::new(self.comment.clone(), l))
    }
}

/// Accepted records plus the rejected lines.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParsedCorpus {
    pub records: Vec<CorpusRecord>,
    pub rejected: Vec<LineError>,
}

impl ParsedCorpus {
    /// All records as labeled comments; fails if any record lacks a label.
    pub fn labeled(&self) -> Result<Vec<LabeledComment>, CorpusError> {
        let unlabeled: Vec<&CorpusRecord> =
            self.records.iter().filter(|r| r.label.is_none()).collect();
        if let Some(first) = unlabeled.first() {
            return Err(CorpusError::Unlabeled {
                count: unlabeled.len(),
                first_line: first.line,
            });
        }
        Ok(self
            .records
            .iter()
            .filter_map(CorpusRecord::labeled)
            .collect())
    }

    pub fn comments(&self) -> Vec<Comment> {
        self.records.iter().map(|r| r.comment.clone()).collect()
    }

    pub fn write_jsonl<W: Write>(&self, mut w: W) -> io::Result<()> {
        for r in &self.records {
            writeln!(w, "{}", r.to_json_line())?;
        }
        Ok(())
    }
}

fn parse_line(line: &str, number: usize) -> Result<CorpusRecord, LineErrorKind> {
    let wire: WireIn =
        serde_json::from_str(line).map_err(|e| LineErrorKind::MalformedLine(e.to_string()))?;
    let id = wire
        .id
        .filter(|s| !s.is_empty())
        .ok_or(LineErrorKind::MissingField("id"))?;
    let text = wire
        .text
        .filter(|s| !s.trim().is_empty())
        .ok_or(LineErrorKind::MissingField("text"))?;
    let label = wire
        .label
        .map(|l| {
            l.parse::<RawLabel>()
                .map_err(|_| LineErrorKind::UnknownLabel(l))
        })
        .transpose()?;
    Ok(CorpusRecord {
        line: number,
        comment: Comment {
            id,
            post_id: wire.post_id,
            author: wire.author,
            text,
            created_at: wire.created_at,
        },
        label,
        extra: wire.extra,
    })
}

/// Parses a JSONL stream. Blank lines are skipped but still counted.
pub fn parse_corpus<R: BufRead>(reader: R) -> Result<ParsedCorpus, CorpusError> {
    let mut out = ParsedCorpus::default();
    let mut seen: HashSet<String> = HashSet::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let number = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        match parse_line(&line, number) {
            Ok(record) => {
                if seen.insert(record.comment.id.clone()) {
                    out.records.push(record);
                } else {
                    out.rejected.push(LineError {
                        line: number,
                        kind: LineErrorKind::DuplicateId(record.comment.id),
                    });
                }
            }
            Err(kind) => out.rejected.push(LineError { line: number, kind }),
        }
    }
    Ok(out)
}

pub fn read_corpus(path: &Path) -> Result<ParsedCorpus, CorpusError> {
    parse_corpus(BufReader::new(File::open(path)?))
}
