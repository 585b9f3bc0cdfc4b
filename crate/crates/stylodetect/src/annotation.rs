//! The linguistic data model shared by the whole pipeline.
//!
//! Documents are sequences of sentences; sentences are sequences of tokens
//! annotated with lemma, universal POS tag, morphological attributes, a
//! dependency head/relation and a BIO named-entity tag. All types are
//! immutable after construction and may be shared freely across threads.
//! Structural integrity is checked by [`validate_document`]; violations are
//! data, not failures, so corpora with broken documents can drop and count
//! them instead of aborting.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

/// Universal POS tags: the 17 UD tags (which include `PUNCT`) plus `SPACE`,
/// which some taggers emit for stray whitespace tokens.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[allow(clippy::upper_case_acronyms)]
pub enum Upos {
    ADJ,
    ADP,
    ADV,
    AUX,
    CCONJ,
    DET,
    INTJ,
    NOUN,
    NUM,
    PART,
    PRON,
    PROPN,
    PUNCT,
    SCONJ,
    SYM,
    VERB,
    X,
    SPACE,
}

impl Upos {
    pub fn as_str(self) -> &'static str {
        use Upos::*;
        match self {
            ADJ => "ADJ",
            ADP => "ADP",
            ADV => "ADV",
            AUX => "AUX",
            CCONJ => "CCONJ",
            DET => "DET",
            INTJ => "INTJ",
            NOUN => "NOUN",
            NUM => "NUM",
            PART => "PART",
            PRON => "PRON",
            PROPN => "PROPN",
            PUNCT => "PUNCT",
            SCONJ => "SCONJ",
            SYM => "SYM",
            VERB => "VERB",
            X => "X",
            SPACE => "SPACE",
        }
    }
}

impl fmt::Display for Upos {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error("unknown universal POS tag {0:?}")]
pub struct ParseUposError(pub String);

impl FromStr for Upos {
    type Err = ParseUposError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        use Upos::*;
        Ok(match s {
            "ADJ" => ADJ,
            "ADP" => ADP,
            "ADV" => ADV,
            "AUX" => AUX,
            "CCONJ" => CCONJ,
            "DET" => DET,
            "INTJ" => INTJ,
            "NOUN" => NOUN,
            "NUM" => NUM,
            "PART" => PART,
            "PRON" => PRON,
            "PROPN" => PROPN,
            "PUNCT" => PUNCT,
            "SCONJ" => SCONJ,
            "SYM" => SYM,
            "VERB" => VERB,
            "X" => X,
            "SPACE" => SPACE,
            other => return Err(ParseUposError(other.to_string())),
        })
    }
}

/// BIO named-entity tag. The entity type is carried as a plain string and
/// may be empty for bare `B` / `I` tags.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum NeTag {
    /// Outside any entity.
    O,
    /// Begins an entity span.
    B(String),
    /// Continues the entity span opened by the preceding `B` / `I`.
    I(String),
}

impl NeTag {
    pub fn is_outside(&self) -> bool {
        matches!(self, NeTag::O)
    }
}

impl fmt::Display for NeTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NeTag::O => f.write_str("O"),
            NeTag::B(t) if t.is_empty() => f.write_str("B"),
            NeTag::B(t) => write!(f, "B-{t}"),
            NeTag::I(t) if t.is_empty() => f.write_str("I"),
            NeTag::I(t) => write!(f, "I-{t}"),
        }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error("unknown BIO tag {0:?}")]
pub struct ParseNeError(pub String);

impl FromStr for NeTag {
    type Err = ParseNeError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "O" => Ok(NeTag::O),
            "B" => Ok(NeTag::B(String::new())),
            "I" => Ok(NeTag::I(String::new())),
            _ => {
                if let Some(t) = s.strip_prefix("B-") {
                    Ok(NeTag::B(t.to_string()))
                } else if let Some(t) = s.strip_prefix("I-") {
                    Ok(NeTag::I(t.to_string()))
                } else {
                    Err(ParseNeError(s.to_string()))
                }
            }
        }
    }
}

/// One annotated token. `head` is `None` for the sentence root, otherwise a
/// 0-based index of the governing token within the same sentence. `morph`
/// holds `key = value` attribute pairs, kept sorted by key so identical
/// bundles compare and hash identically.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AnnotatedToken {
    pub surface: String,
    pub lemma: String,
    pub upos: Upos,
    pub morph: Vec<(String, String)>,
    pub head: Option<usize>,
    pub deprel: String,
    pub ne: NeTag,
}

impl AnnotatedToken {
    /// Canonical morphology bundle: sorted `Key=Val` pairs joined with `|`,
    /// or `_` when empty. This is the morphology-unigram feature key.
    pub fn morph_bundle(&self) -> String {
        if self.morph.is_empty() {
            return "_".to_string();
        }
        let parts: Vec<String> = self.morph.iter().map(|(k, v)| format!("{k}={v}")).collect();
        parts.join("|")
    }
}

/// One sentence: the scope for n-gram extraction and for the dependency
/// tree (exactly one root, all tokens reachable).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Sentence {
    pub tokens: Vec<AnnotatedToken>,
}

/// Optional document provenance. Carried through ingest and export but
/// never fed to the classifier.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DocMeta {
    pub source: Option<String>,
    pub genre: Option<String>,
    pub model: Option<String>,
}

impl DocMeta {
    pub fn is_empty(&self) -> bool {
        self.source.is_none() && self.genre.is_none() && self.model.is_none()
    }
}

/// A labeled, annotated document. `label` is 1 for machine-generated text,
/// 0 for human text.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AnnotatedDocument {
    pub id: String,
    pub label: u8,
    pub meta: DocMeta,
    pub sentences: Vec<Sentence>,
}

/// A broken structural invariant, locating the offending sentence/token.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub sentence: Option<usize>,
    pub token: Option<usize>,
    pub rule: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (self.sentence, self.token) {
            (Some(s), Some(t)) => write!(f, "sentence {s}, token {t}: {rule}", rule = self.rule),
            (Some(s), None) => write!(f, "sentence {s}: {rule}", rule = self.rule),
            _ => f.write_str(&self.rule),
        }
    }
}

fn violation(sentence: impl Into<Option<usize>>, token: impl Into<Option<usize>>, rule: impl Into<String>) -> Violation {
    Violation {
        sentence: sentence.into(),
        token: token.into(),
        rule: rule.into(),
    }
}

/// Check every structural invariant of a document. Returns an empty list
/// iff the document is well-formed. Pure: identical input yields identical
/// output.
pub fn validate_document(doc: &AnnotatedDocument) -> Vec<Violation> {
    let mut out = Vec::new();
    if doc.id.is_empty() {
        out.push(violation(None, None, "document id is empty"));
    }
    if doc.label > 1 {
        out.push(violation(None, None, format!("label {} is not binary", doc.label)));
    }
    if doc.sentences.iter().all(|s| s.tokens.is_empty()) {
        out.push(violation(None, None, "document has no sentence with at least one token"));
    }
    for (si, sentence) in doc.sentences.iter().enumerate() {
        validate_sentence(si, sentence, &mut out);
    }
    out
}

fn validate_sentence(si: usize, sentence: &Sentence, out: &mut Vec<Violation>) {
    let n = sentence.tokens.len();
    if n == 0 {
        out.push(violation(si, None, "sentence has no tokens"));
        return;
    }
    let mut roots = 0usize;
    let mut heads_ok = true;
    for (ti, tok) in sentence.tokens.iter().enumerate() {
        match tok.head {
            None => roots += 1,
            Some(h) if h == ti => {
                out.push(violation(si, ti, "self-headed token"));
                heads_ok = false;
            }
            Some(h) if h >= n => {
                out.push(violation(si, ti, format!("head index {h} out of range for {n}-token sentence")));
                heads_ok = false;
            }
            Some(_) => {}
        }
        for pair in tok.morph.windows(2) {
            if pair[0].0 >= pair[1].0 {
                let rule = if pair[0].0 == pair[1].0 {
                    format!("duplicate morph key {:?}", pair[0].0)
                } else {
                    "morph attributes not sorted by key".to_string()
                };
                out.push(violation(si, ti, rule));
                break;
            }
        }
        for text in [&tok.surface, &tok.lemma, &tok.deprel]
            .into_iter()
            .chain(tok.morph.iter().flat_map(|(k, v)| [k, v]))
        {
            if text.chars().any(|c| c.is_control()) {
                out.push(violation(si, ti, "annotation text contains a control character"));
                break;
            }
        }
    }
    if roots != 1 {
        out.push(violation(si, None, format!("sentence has {roots} root tokens, expected exactly 1")));
    }
    if roots == 1 && heads_ok && has_head_cycle(sentence) {
        out.push(violation(si, None, "dependency graph is not a tree"));
    }
    validate_bio(si, sentence, out);
}

/// With every non-root token holding exactly one in-range head and exactly
/// one root present, the head graph is a tree iff no head chain cycles.
fn has_head_cycle(sentence: &Sentence) -> bool {
    let n = sentence.tokens.len();
    // 0 = unvisited, 1 = on current path, 2 = known good
    let mut state = vec![0u8; n];
    for start in 0..n {
        if state[start] != 0 {
            continue;
        }
        let mut path = Vec::new();
        let mut cur = start;
        loop {
            match state[cur] {
                1 => return true,
                2 => break,
                _ => {}
            }
            state[cur] = 1;
            path.push(cur);
            match sentence.tokens[cur].head {
                None => break,
                Some(h) => cur = h,
            }
        }
        for i in path {
            state[i] = 2;
        }
    }
    false
}

fn validate_bio(si: usize, sentence: &Sentence, out: &mut Vec<Violation>) {
    let mut prev: Option<&NeTag> = None;
    for (ti, tok) in sentence.tokens.iter().enumerate() {
        if let NeTag::I(t) = &tok.ne {
            let continues = match prev {
                Some(NeTag::B(p)) | Some(NeTag::I(p)) => p == t,
                _ => false,
            };
            if !continues {
                out.push(violation(si, ti, format!("I-{t} tag does not continue a span of the same type")));
            }
        }
        prev = Some(&tok.ne);
    }
}

/// A maximal named-entity span: inclusive token range plus entity type.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NeSpan {
    pub start: usize,
    pub end: usize,
    pub entity_type: String,
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error("malformed BIO sequence at token {index}: {reason}")]
pub struct BioError {
    pub index: usize,
    pub reason: String,
}

/// Extract maximal BIO spans in left-to-right order. Tokens tagged `O`
/// appear in no span. Errors on an `I` tag that does not continue a span
/// of the same type.
pub fn ne_spans(sentence: &Sentence) -> Result<Vec<NeSpan>, BioError> {
    let mut spans: Vec<NeSpan> = Vec::new();
    let mut open: Option<(usize, &str)> = None;
    for (ti, tok) in sentence.tokens.iter().enumerate() {
        match &tok.ne {
            NeTag::O => {
                if let Some((start, t)) = open.take() {
                    spans.push(NeSpan { start, end: ti - 1, entity_type: t.to_string() });
                }
            }
            NeTag::B(t) => {
                if let Some((start, prev)) = open.take() {
                    spans.push(NeSpan { start, end: ti - 1, entity_type: prev.to_string() });
                }
                open = Some((ti, t));
            }
            NeTag::I(t) => match open {
                Some((_, prev)) if prev == t => {}
                _ => {
                    return Err(BioError {
                        index: ti,
                        reason: format!("I-{t} without a preceding B/I of the same type"),
                    })
                }
            },
        }
    }
    if let Some((start, t)) = open {
        spans.push(NeSpan { start, end: sentence.tokens.len() - 1, entity_type: t.to_string() });
    }
    Ok(spans)
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn tok(lemma: &str, upos: Upos, head: Option<usize>, ne: NeTag) -> AnnotatedToken {
        AnnotatedToken {
            surface: lemma.to_string(),
            lemma: lemma.to_string(),
            upos,
            morph: Vec::new(),
            head,
            deprel: "dep".to_string(),
            ne,
        }
    }

    fn two_sentence_doc() -> AnnotatedDocument {
        AnnotatedDocument {
            id: "doc-1".to_string(),
            label: 0,
            meta: DocMeta::default(),
            sentences: vec![
                Sentence {
                    tokens: vec![
                        tok("john", Upos::PROPN, Some(1), NeTag::B("PERSON".into())),
                        tok("run", Upos::VERB, None, NeTag::O),
                    ],
                },
                Sentence {
                    tokens: vec![tok("yes", Upos::INTJ, None, NeTag::O)],
                },
            ],
        }
    }

    #[test]
    fn well_formed_document_has_no_violations() {
        assert_eq!(validate_document(&two_sentence_doc()), vec![]);
    }

    #[test]
    fn self_headed_token_is_reported() {
        let mut doc = two_sentence_doc();
        doc.sentences[0].tokens[0].head = Some(0);
        let violations = validate_document(&doc);
        assert_eq!(violations.len(), 1);
        assert!(violations[0].rule.contains("self-headed"));
        assert_eq!((violations[0].sentence, violations[0].token), (Some(0), Some(0)));
    }

    #[test]
    fn two_cycle_is_not_a_tree() {
        let doc = AnnotatedDocument {
            id: "d".into(),
            label: 0,
            meta: DocMeta::default(),
            sentences: vec![Sentence {
                tokens: vec![
                    tok("a", Upos::NOUN, Some(1), NeTag::O),
                    tok("b", Upos::NOUN, Some(0), NeTag::O),
                    tok("c", Upos::NOUN, None, NeTag::O),
                ],
            }],
        };
        let violations = validate_document(&doc);
        assert_eq!(violations.len(), 1);
        assert!(violations[0].rule.contains("not a tree"));
    }

    #[test]
    fn validation_is_pure() {
        let doc = two_sentence_doc();
        assert_eq!(validate_document(&doc), validate_document(&doc));
    }

    #[test]
    fn unsorted_and_duplicate_morph_keys_flagged() {
        let mut doc = two_sentence_doc();
        doc.sentences[0].tokens[1].morph =
            vec![("Tense".into(), "Pres".into()), ("Number".into(), "Sing".into())];
        assert!(validate_document(&doc)[0].rule.contains("not sorted"));
        doc.sentences[0].tokens[1].morph =
            vec![("Number".into(), "Sing".into()), ("Number".into(), "Plur".into())];
        assert!(validate_document(&doc)[0].rule.contains("duplicate morph key"));
    }

    #[test]
    fn singleton_spans() {
        let s = Sentence {
            tokens: vec![
                tok("a", Upos::PROPN, None, NeTag::B("PERSON".into())),
                tok("b", Upos::VERB, Some(0), NeTag::O),
                tok("c", Upos::PROPN, Some(0), NeTag::B("PERSON".into())),
                tok("d", Upos::PUNCT, Some(0), NeTag::O),
            ],
        };
        let spans = ne_spans(&s).unwrap();
        assert_eq!(
            spans,
            vec![
                NeSpan { start: 0, end: 0, entity_type: "PERSON".into() },
                NeSpan { start: 2, end: 2, entity_type: "PERSON".into() },
            ]
        );
    }

    #[test]
    fn multi_token_span() {
        let s = Sentence {
            tokens: vec![
                tok("acme", Upos::PROPN, None, NeTag::B("ORG".into())),
                tok("corp", Upos::PROPN, Some(0), NeTag::I("ORG".into())),
                tok(".", Upos::PUNCT, Some(0), NeTag::O),
            ],
        };
        assert_eq!(
            ne_spans(&s).unwrap(),
            vec![NeSpan { start: 0, end: 1, entity_type: "ORG".into() }]
        );
    }

    #[test]
    fn orphan_inside_tag_errors_with_index() {
        let s = Sentence {
            tokens: vec![
                tok("a", Upos::NOUN, None, NeTag::O),
                tok("b", Upos::PROPN, Some(0), NeTag::I("ORG".into())),
            ],
        };
        let err = ne_spans(&s).unwrap_err();
        assert_eq!(err.index, 1);
    }

    #[test]
    fn spans_partition_non_outside_tokens_in_order() {
        let s = Sentence {
            tokens: vec![
                tok("a", Upos::PROPN, None, NeTag::B("ORG".into())),
                tok("b", Upos::PROPN, Some(0), NeTag::I("ORG".into())),
                tok("c", Upos::VERB, Some(0), NeTag::O),
                tok("d", Upos::PROPN, Some(0), NeTag::B("LOC".into())),
                tok("e", Upos::PROPN, Some(0), NeTag::B("LOC".into())),
            ],
        };
        let spans = ne_spans(&s).unwrap();
        let covered: Vec<usize> = spans.iter().flat_map(|sp| sp.start..=sp.end).collect();
        let tagged: Vec<usize> = s
            .tokens
            .iter()
            .enumerate()
            .filter(|(_, t)| !t.ne.is_outside())
            .map(|(i, _)| i)
            .collect();
        assert_eq!(covered, tagged);
    }

    #[test]
    fn bare_tags_round_trip_and_span() {
        assert_eq!("B".parse::<NeTag>().unwrap(), NeTag::B(String::new()));
        assert_eq!("B-".parse::<NeTag>().unwrap().to_string(), "B-");
        assert_eq!(NeTag::B(String::new()).to_string(), "B");
        let s = Sentence {
            tokens: vec![tok("x", Upos::NOUN, None, NeTag::B(String::new()))],
        };
        assert_eq!(ne_spans(&s).unwrap()[0].entity_type, "");
    }

    #[test]
    fn morph_bundle_is_canonical() {
        let mut t = tok("run", Upos::VERB, None, NeTag::O);
        assert_eq!(t.morph_bundle(), "_");
        t.morph = vec![("Number".into(), "Sing".into()), ("Person".into(), "3".into())];
        assert_eq!(t.morph_bundle(), "Number=Sing|Person=3");
    }
}
