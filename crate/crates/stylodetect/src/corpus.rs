//! Corpus ingestion and export: CoNLL-U files and a unified JSON-lines
//! document format.
//!
//! JSON-lines is the pipeline's native interchange format; CoNLL-U is the
//! ingestion boundary for externally annotated text. Malformed input lines
//! (unparseable JSON, broken CoNLL-U syntax) are fatal errors carrying a
//! line number; *structurally* invalid documents in JSON-lines corpora are
//! dropped and counted instead, so one broken document does not sink a
//! large corpus.

use std::collections::HashSet;
use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::annotation::{
    validate_document, AnnotatedDocument, AnnotatedToken, DocMeta, NeTag, Sentence, Upos,
};

/// Aggregate counts for one ingested corpus. Dropped documents are excluded
/// from `documents`, `tokens` and `label_counts`.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CorpusStats {
    pub documents: usize,
    pub tokens: usize,
    /// Kept documents per binary label.
    pub label_counts: [usize; 2],
    pub dropped: Vec<DropRecord>,
}

impl CorpusStats {
    pub fn dropped_count(&self) -> usize {
        self.dropped.len()
    }

    fn record(&mut self, doc: &AnnotatedDocument) {
        self.documents += 1;
        self.tokens += doc.sentences.iter().map(|s| s.tokens.len()).sum::<usize>();
        self.label_counts[usize::from(doc.label)] += 1;
    }
}

/// One rejected document: where it came from and why it was dropped.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DropRecord {
    /// 1-based line in the source file (corpus line or manifest line).
    pub line: usize,
    pub id: Option<String>,
    pub reason: String,
}

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("line {line}: malformed JSON: {message}")]
    MalformedJson { line: usize, message: String },
    #[error("manifest line {line}: {message}")]
    Manifest { line: usize, message: String },
    #[error("{path}: {message}")]
    ConlluFile { path: String, message: String },
}

/// A CoNLL-U parse failure, located by 1-based input line.
#[derive(Debug, Error, PartialEq, Eq)]
#[error("line {line}: {message}")]
pub struct ConlluError {
    pub line: usize,
    pub message: String,
}

fn conllu_err(line: usize, message: impl Into<String>) -> ConlluError {
    ConlluError { line, message: message.into() }
}

// ---------------------------------------------------------------------------
// JSON-lines wire format
// ---------------------------------------------------------------------------

#[derive(Serialize, Deserialize)]
struct TokenWire {
    surface: String,
    lemma: String,
    upos: String,
    morph: Vec<String>,
    /// 0 = sentence root, otherwise 1-based in-sentence index of the head.
    head: u64,
    deprel: String,
    ne: String,
}

#[derive(Serialize, Deserialize, Default)]
struct MetaWire {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    source: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    genre: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    model: Option<String>,
}

impl MetaWire {
    fn is_empty(&self) -> bool {
        self.source.is_none() && self.genre.is_none() && self.model.is_none()
    }
}

#[derive(Serialize, Deserialize)]
struct DocWire {
    id: String,
    label: u8,
    #[serde(default, skip_serializing_if = "MetaWire::is_empty")]
    meta: MetaWire,
    sentences: Vec<Vec<TokenWire>>,
}

fn token_from_wire(w: TokenWire) -> Result<AnnotatedToken, String> {
    let upos: Upos = w.upos.parse().map_err(|e| format!("{e}"))?;
    let ne: NeTag = w.ne.parse().map_err(|e| format!("{e}"))?;
    let mut morph = Vec::with_capacity(w.morph.len());
    for item in &w.morph {
        let (k, v) = item
            .split_once('=')
            .ok_or_else(|| format!("morph item {item:?} is not Key=Val"))?;
        morph.push((k.to_string(), v.to_string()));
    }
    morph.sort_by(|a, b| a.0.cmp(&b.0));
    let head = match w.head {
        0 => None,
        h => Some(usize::try_from(h - 1).map_err(|_| format!("head {h} not representable"))?),
    };
    Ok(AnnotatedToken {
        surface: w.surface,
        lemma: w.lemma,
        upos,
        morph,
        head,
        deprel: w.deprel,
        ne,
    })
}

fn doc_from_wire(w: DocWire) -> Result<AnnotatedDocument, String> {
    let mut sentences = Vec::with_capacity(w.sentences.len());
    for (si, sent) in w.sentences.into_iter().enumerate() {
        let mut tokens = Vec::with_capacity(sent.len());
        for (ti, tok) in sent.into_iter().enumerate() {
            tokens.push(token_from_wire(tok).map_err(|e| format!("sentence {si}, token {ti}: {e}"))?);
        }
        sentences.push(Sentence { tokens });
    }
    Ok(AnnotatedDocument {
        id: w.id,
        label: w.label,
        meta: DocMeta { source: w.meta.source, genre: w.meta.genre, model: w.meta.model },
        sentences,
    })
}

fn doc_to_wire(doc: &AnnotatedDocument) -> DocWire {
    DocWire {
        id: doc.id.clone(),
        label: doc.label,
        meta: MetaWire {
            source: doc.meta.source.clone(),
            genre: doc.meta.genre.clone(),
            model: doc.meta.model.clone(),
        },
        sentences: doc
            .sentences
            .iter()
            .map(|s| {
                s.tokens
                    .iter()
                    .map(|t| TokenWire {
                        surface: t.surface.clone(),
                        lemma: t.lemma.clone(),
                        upos: t.upos.as_str().to_string(),
                        morph: t.morph.iter().map(|(k, v)| format!("{k}={v}")).collect(),
                        head: t.head.map_or(0, |h| h as u64 + 1),
                        deprel: t.deprel.clone(),
                        ne: t.ne.to_string(),
                    })
                    .collect()
            })
            .collect(),
    }
}

/// Read a JSON-lines corpus. Documents come back in file order. A line
/// that is not valid JSON is fatal; a line whose document breaks the
/// schema or a structural invariant (or repeats an id) is dropped and
/// counted in the returned stats.
pub fn read_jsonl_corpus(
    input: impl BufRead,
) -> Result<(Vec<AnnotatedDocument>, CorpusStats), CorpusError> {
    let mut docs = Vec::new();
    let mut stats = CorpusStats::default();
    let mut seen: HashSet<String> = HashSet::new();
    for (idx, line) in input.lines().enumerate() {
        let line_no = idx + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let wire: DocWire = match serde_json::from_str(&line) {
            Ok(w) => w,
            Err(e) if e.classify() == serde_json::error::Category::Data => {
                stats.dropped.push(DropRecord {
                    line: line_no,
                    id: None,
                    reason: format!("schema error: {e}"),
                });
                continue;
            }
            Err(e) => {
                return Err(CorpusError::MalformedJson { line: line_no, message: e.to_string() })
            }
        };
        let wire_id = wire.id.clone();
        let doc = match doc_from_wire(wire) {
            Ok(d) => d,
            Err(reason) => {
                stats.dropped.push(DropRecord { line: line_no, id: Some(wire_id), reason });
                continue;
            }
        };
        let violations = validate_document(&doc);
        if let Some(first) = violations.first() {
            let mut reason = format!("invalid document: {first}");
            if violations.len() > 1 {
                reason.push_str(&format!(" (+{} more)", violations.len() - 1));
            }
            stats.dropped.push(DropRecord { line: line_no, id: Some(doc.id), reason });
            continue;
        }
        if !seen.insert(doc.id.clone()) {
            stats.dropped.push(DropRecord {
                line: line_no,
                id: Some(doc.id),
                reason: "duplicate id".to_string(),
            });
            continue;
        }
        stats.record(&doc);
        docs.push(doc);
    }
    Ok((docs, stats))
}

/// Write documents as JSON-lines, one per line, in input order. Requires
/// valid documents; output is canonical so that read-then-write
/// reproduces the file byte for byte.
pub fn write_jsonl_corpus(
    docs: &[AnnotatedDocument],
    mut out: impl Write,
) -> std::io::Result<usize> {
    for doc in docs {
        let line =
            serde_json::to_string(&doc_to_wire(doc)).expect("document serialization cannot fail");
        out.write_all(line.as_bytes())?;
        out.write_all(b"\n")?;
    }
    Ok(docs.len())
}

// ---------------------------------------------------------------------------
// CoNLL-U
// ---------------------------------------------------------------------------

/// Parse one CoNLL-U file into a document with the given id and label.
///
/// Columns map FORM→surface, LEMMA→lemma, UPOS→upos, FEATS→morph
/// (`_` = empty), HEAD→head (0 = root), DEPREL→deprel; the named-entity
/// tag is read from a `NE=<BIO>` attribute in MISC and defaults to `O`.
/// Multiword-token ranges (id `1-2`) and empty nodes (id `1.1`) are
/// skipped. The returned document always satisfies the structural
/// invariants; anything else is a [`ConlluError`] with a line number.
pub fn parse_conllu(
    input: impl BufRead,
    doc_id: &str,
    label: u8,
) -> Result<AnnotatedDocument, ConlluError> {
    let mut sentences: Vec<Sentence> = Vec::new();
    // Source line of every token, per flushed sentence, for error reporting.
    let mut sentence_lines: Vec<Vec<usize>> = Vec::new();
    let mut tokens: Vec<AnnotatedToken> = Vec::new();
    let mut token_lines: Vec<usize> = Vec::new();
    let mut last_line = 0usize;

    for (idx, line) in input.lines().enumerate() {
        let line_no = idx + 1;
        last_line = line_no;
        let line = line.map_err(|e| conllu_err(line_no, format!("read error: {e}")))?;
        if line.is_empty() {
            flush_sentence(&mut tokens, &mut token_lines, &mut sentences, &mut sentence_lines)?;
            continue;
        }
        if line.starts_with('#') {
            continue;
        }
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() != 10 {
            return Err(conllu_err(
                line_no,
                format!("expected 10 tab-separated columns, found {}", cols.len()),
            ));
        }
        let id_field = cols[0];
        // Multiword-token range / empty node: not tokens of the tree.
        if id_field.contains('-') || id_field.contains('.') {
            continue;
        }
        let id_num: usize = id_field
            .parse()
            .map_err(|_| conllu_err(line_no, format!("token id {id_field:?} is not a number")))?;
        if id_num != tokens.len() + 1 {
            return Err(conllu_err(
                line_no,
                format!("token id {id_num} out of sequence, expected {}", tokens.len() + 1),
            ));
        }
        let upos: Upos = cols[3].parse().map_err(|e| conllu_err(line_no, format!("{e}")))?;
        let morph = parse_feats(cols[5]).map_err(|m| conllu_err(line_no, m))?;
        let head = match cols[6].parse::<usize>() {
            Ok(0) => None,
            Ok(h) => Some(h - 1),
            Err(_) => return Err(conllu_err(line_no, format!("non-numeric HEAD {:?}", cols[6]))),
        };
        let ne = parse_misc_ne(cols[9]).map_err(|m| conllu_err(line_no, m))?;
        tokens.push(AnnotatedToken {
            surface: cols[1].to_string(),
            lemma: cols[2].to_string(),
            upos,
            morph,
            head,
            deprel: cols[7].to_string(),
            ne,
        });
        token_lines.push(line_no);
    }
    flush_sentence(&mut tokens, &mut token_lines, &mut sentences, &mut sentence_lines)?;

    let doc = AnnotatedDocument {
        id: doc_id.to_string(),
        label,
        meta: DocMeta::default(),
        sentences,
    };
    if let Some(v) = validate_document(&doc).into_iter().next() {
        let line = v
            .sentence
            .and_then(|si| sentence_lines.get(si))
            .map(|lines| match v.token {
                Some(ti) => lines.get(ti).copied().unwrap_or(last_line),
                None => lines.first().copied().unwrap_or(last_line),
            })
            .unwrap_or(last_line)
            .max(1);
        return Err(conllu_err(line, format!("invalid document: {v}")));
    }
    Ok(doc)
}

fn flush_sentence(
    tokens: &mut Vec<AnnotatedToken>,
    token_lines: &mut Vec<usize>,
    sentences: &mut Vec<Sentence>,
    sentence_lines: &mut Vec<Vec<usize>>,
) -> Result<(), ConlluError> {
    if tokens.is_empty() {
        return Ok(());
    }
    let n = tokens.len();
    for (i, tok) in tokens.iter().enumerate() {
        if let Some(h) = tok.head {
            if h >= n {
                return Err(conllu_err(
                    token_lines[i],
                    format!("head {} out of range for {n}-token sentence", h + 1),
                ));
            }
        }
    }
    sentences.push(Sentence { tokens: std::mem::take(tokens) });
    sentence_lines.push(std::mem::take(token_lines));
    Ok(())
}

fn parse_feats(field: &str) -> Result<Vec<(String, String)>, String> {
    if field == "_" {
        return Ok(Vec::new());
    }
    let mut morph = Vec::new();
    for item in field.split('|') {
        let (k, v) = item
            .split_once('=')
            .ok_or_else(|| format!("FEATS item {item:?} is not Key=Val"))?;
        morph.push((k.to_string(), v.to_string()));
    }
    morph.sort_by(|a, b| a.0.cmp(&b.0));
    Ok(morph)
}

fn parse_misc_ne(field: &str) -> Result<NeTag, String> {
    if field == "_" {
        return Ok(NeTag::O);
    }
    for item in field.split('|') {
        if let Some(tag) = item.strip_prefix("NE=") {
            return tag.parse::<NeTag>().map_err(|e| format!("{e}"));
        }
    }
    Ok(NeTag::O)
}

// ---------------------------------------------------------------------------
// CoNLL-U manifest ingestion
// ---------------------------------------------------------------------------

/// Load a corpus described by a manifest of `path<TAB>id<TAB>label` lines.
/// Relative paths are resolved against the manifest's directory. Files are
/// parsed in parallel; document order equals manifest order. Parse errors
/// are fatal (with file and line); duplicate ids are dropped and counted.
pub fn read_conllu_manifest(
    manifest: &Path,
) -> Result<(Vec<AnnotatedDocument>, CorpusStats), CorpusError> {
    let text = std::fs::read_to_string(manifest)?;
    let base = manifest.parent().unwrap_or_else(|| Path::new(""));
    let mut entries: Vec<(usize, PathBuf, String, u8)> = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let line_no = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let parts: Vec<&str> = line.split('\t').collect();
        let [path, id, label] = parts.as_slice() else {
            return Err(CorpusError::Manifest {
                line: line_no,
                message: format!(
                    "expected path<TAB>id<TAB>label, found {} fields",
                    parts.len()
                ),
            });
        };
        let label: u8 = match *label {
            "0" => 0,
            "1" => 1,
            other => {
                return Err(CorpusError::Manifest {
                    line: line_no,
                    message: format!("label {other:?} is not 0 or 1"),
                })
            }
        };
        entries.push((line_no, base.join(path), id.to_string(), label));
    }

    let parsed: Vec<Result<AnnotatedDocument, CorpusError>> = entries
        .par_iter()
        .map(|(_, path, id, label)| {
            let display = path.display().to_string();
            let file = std::fs::File::open(path).map_err(|e| CorpusError::ConlluFile {
                path: display.clone(),
                message: format!("cannot open: {e}"),
            })?;
            parse_conllu(std::io::BufReader::new(file), id, *label)
                .map_err(|e| CorpusError::ConlluFile { path: display, message: e.to_string() })
        })
        .collect();

    let mut docs = Vec::new();
    let mut stats = CorpusStats::default();
    let mut seen: HashSet<String> = HashSet::new();
    for ((line_no, ..), res) in entries.iter().zip(parsed) {
        let doc = res?;
        if !seen.insert(doc.id.clone()) {
            stats.dropped.push(DropRecord {
                line: *line_no,
                id: Some(doc.id),
                reason: "duplicate id".to_string(),
            });
            continue;
        }
        stats.record(&doc);
        docs.push(doc);
    }
    Ok((docs, stats))
}
