//! The trained feature space: per-class frequency ranking with a hard cap,
//! followed by optional document-frequency culling.
//!
//! Building ranks each class's keys by total corpus occurrence count (ties
//! broken by ascending lexicographic key order) and keeps at most `cap`
//! per class. Culling then drops entries whose document frequency falls
//! strictly outside the configured thresholds. Column indices are assigned
//! by class block (LEMMA, POS, DEP, MORPH) and rank within class, and are
//! re-densified after culling preserving order.

use std::collections::HashMap;
use std::io::{BufRead, Write};

use thiserror::Error;

use crate::features::{FeatureBag, FeatureClass, FeatureKey};
use crate::hexfloat;

/// Default per-class cap on vocabulary size.
pub const DEFAULT_CAP: usize = 1500;

/// One retained feature with its column index and corpus statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct VocabEntry {
    pub key: FeatureKey,
    /// Dense column index; always equals the entry's position.
    pub index: usize,
    /// Total occurrences across the training corpus.
    pub corpus_count: u64,
    /// Fraction of training documents containing the key, in (0, 1].
    pub doc_freq: f64,
}

/// A built (and possibly culled) feature space.
#[derive(Debug, Clone, PartialEq)]
pub struct Vocabulary {
    entries: Vec<VocabEntry>,
    by_key: HashMap<FeatureKey, usize>,
    /// Per-class cap the vocabulary was built with.
    pub cap: usize,
    /// Minimum document frequency, if culling was applied.
    pub min_df: Option<f64>,
    /// Maximum document frequency, if culling was applied.
    pub max_df: Option<f64>,
    /// Number of documents the statistics were computed over.
    pub corpus_size: usize,
}

#[derive(Debug, Error)]
pub enum VocabError {
    #[error("empty feature-bag stream")]
    EmptyStream,
    #[error("corpus size must be at least 1")]
    ZeroCorpus,
    #[error("stream yielded {actual} documents, expected corpus size {expected}")]
    CorpusSizeMismatch { expected: usize, actual: usize },
    #[error("culling threshold {0} outside (0, 1]")]
    BadThreshold(f64),
    #[error("min_df {min} exceeds max_df {max}")]
    CrossedThresholds { min: f64, max: f64 },
    #[error("empty vocabulary (pass allow_empty to accept)")]
    Empty,
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Vocabulary {
    fn from_entries(
        ordered: Vec<(FeatureKey, u64, f64)>,
        cap: usize,
        min_df: Option<f64>,
        max_df: Option<f64>,
        corpus_size: usize,
    ) -> Vocabulary {
        let entries: Vec<VocabEntry> = ordered
            .into_iter()
            .enumerate()
            .map(|(index, (key, corpus_count, doc_freq))| VocabEntry {
                key,
                index,
                corpus_count,
                doc_freq,
            })
            .collect();
        let by_key = entries.iter().map(|e| (e.key.clone(), e.index)).collect();
        Vocabulary { entries, by_key, cap, min_df, max_df, corpus_size }
    }

    pub fn entries(&self) -> &[VocabEntry] {
        &self.entries
    }

    /// Number of columns (V).
    pub fn dimension(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn index_of(&self, key: &FeatureKey) -> Option<usize> {
        self.by_key.get(key).copied()
    }

    pub fn per_class_count(&self, class: FeatureClass) -> usize {
        self.entries.iter().filter(|e| e.key.class == class).count()
    }
}

/// Build a vocabulary from per-document feature bags.
///
/// The stream must yield every corpus document exactly once; `corpus_size`
/// is the expected document count and the denominator for document
/// frequencies. Per class, the `cap` highest-count keys are kept, ties
/// broken by ascending key order.
pub fn build_vocabulary<'a, I>(
    bags: I,
    corpus_size: usize,
    cap: usize,
) -> Result<Vocabulary, VocabError>
where
    I: IntoIterator<Item = (&'a str, &'a FeatureBag)>,
{
    if corpus_size == 0 {
        return Err(VocabError::ZeroCorpus);
    }
    let mut stats: HashMap<FeatureKey, (u64, usize)> = HashMap::new();
    let mut seen_docs = 0usize;
    for (_id, bag) in bags {
        seen_docs += 1;
        for (key, count) in bag.iter() {
            let entry = stats.entry(key.clone()).or_insert((0, 0));
            entry.0 += count;
            entry.1 += 1;
        }
    }
    if seen_docs == 0 {
        return Err(VocabError::EmptyStream);
    }
    if seen_docs != corpus_size {
        return Err(VocabError::CorpusSizeMismatch { expected: corpus_size, actual: seen_docs });
    }

    let mut per_class: [Vec<(FeatureKey, u64, usize)>; 4] = Default::default();
    for (key, (count, doc_count)) in stats {
        let slot = FeatureClass::ALL.iter().position(|&c| c == key.class).unwrap();
        per_class[slot].push((key, count, doc_count));
    }
    let mut ordered = Vec::new();
    for class_keys in &mut per_class {
        class_keys.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        class_keys.truncate(cap);
        for (key, count, doc_count) in class_keys.drain(..) {
            // Single exact division; serialized losslessly as a hex float.
            let doc_freq = doc_count as f64 / corpus_size as f64;
            ordered.push((key, count, doc_freq));
        }
    }
    Ok(Vocabulary::from_entries(ordered, cap, None, None, corpus_size))
}

fn check_threshold(t: Option<f64>) -> Result<(), VocabError> {
    if let Some(v) = t {
        if !(v > 0.0 && v <= 1.0) {
            return Err(VocabError::BadThreshold(v));
        }
    }
    Ok(())
}

/// Drop entries whose document frequency is strictly below `min_df` or
/// strictly above `max_df`; boundary values are kept. Surviving entries
/// are re-indexed densely in their original order.
pub fn apply_culling(
    vocab: &Vocabulary,
    min_df: Option<f64>,
    max_df: Option<f64>,
) -> Result<Vocabulary, VocabError> {
    check_threshold(min_df)?;
    check_threshold(max_df)?;
    if let (Some(lo), Some(hi)) = (min_df, max_df) {
        if lo > hi {
            return Err(VocabError::CrossedThresholds { min: lo, max: hi });
        }
    }
    let ordered: Vec<(FeatureKey, u64, f64)> = vocab
        .entries
        .iter()
        .filter(|e| {
            min_df.map_or(true, |lo| e.doc_freq >= lo) && max_df.map_or(true, |hi| e.doc_freq <= hi)
        })
        .map(|e| (e.key.clone(), e.corpus_count, e.doc_freq))
        .collect();
    Ok(Vocabulary::from_entries(
        ordered,
        vocab.cap,
        min_df.or(vocab.min_df),
        max_df.or(vocab.max_df),
        vocab.corpus_size,
    ))
}

fn fmt_threshold(t: Option<f64>) -> String {
    t.map_or_else(|| "-".to_string(), hexfloat::format_hex)
}

/// Write the vocabulary: a `#` header with cap, corpus size and culling
/// thresholds, then one line per entry in index order:
/// `class<TAB>order<TAB>components-joined-by-U+001F<TAB>corpus_count<TAB>doc_freq`
/// with the document frequency as an exact hexadecimal float.
pub fn save_vocabulary(vocab: &Vocabulary, mut out: impl Write) -> std::io::Result<()> {
    writeln!(
        out,
        "# cap={} corpus={} min_df={} max_df={}",
        vocab.cap,
        vocab.corpus_size,
        fmt_threshold(vocab.min_df),
        fmt_threshold(vocab.max_df),
    )?;
    for e in &vocab.entries {
        writeln!(
            out,
            "{}\t{}\t{}\t{}\t{}",
            e.key.class,
            e.key.order(),
            e.key.joined(),
            e.corpus_count,
            hexfloat::format_hex(e.doc_freq),
        )?;
    }
    Ok(())
}

fn parse_threshold(s: &str, line: usize) -> Result<Option<f64>, VocabError> {
    if s == "-" {
        return Ok(None);
    }
    hexfloat::parse_hex(s)
        .map(Some)
        .map_err(|e| VocabError::Parse { line, message: format!("bad threshold {s:?}: {e}") })
}

/// Read a vocabulary written by [`save_vocabulary`]. `load_vocabulary ∘
/// save_vocabulary` is the identity. An entry-less file is an error
/// unless `allow_empty` is set.
pub fn load_vocabulary(input: impl BufRead, allow_empty: bool) -> Result<Vocabulary, VocabError> {
    let mut lines = input.lines().enumerate();
    let mut header: Option<(usize, String)> = None;
    for (idx, line) in lines.by_ref() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        header = Some((idx + 1, line));
        break;
    }
    let Some((header_line, header_text)) = header else {
        return Err(VocabError::Parse { line: 0, message: "missing header".into() });
    };
    let rest = header_text.strip_prefix("# ").ok_or_else(|| VocabError::Parse {
        line: header_line,
        message: "expected '# cap=... corpus=... min_df=... max_df=...' header".into(),
    })?;
    let mut cap = None;
    let mut corpus_size = None;
    let mut min_df = None;
    let mut max_df = None;
    for item in rest.split_whitespace() {
        let (k, v) = item.split_once('=').ok_or_else(|| VocabError::Parse {
            line: header_line,
            message: format!("bad header item {item:?}"),
        })?;
        match k {
            "cap" => {
                cap = Some(v.parse::<usize>().map_err(|_| VocabError::Parse {
                    line: header_line,
                    message: format!("bad cap {v:?}"),
                })?)
            }
            "corpus" => {
                corpus_size = Some(v.parse::<usize>().map_err(|_| VocabError::Parse {
                    line: header_line,
                    message: format!("bad corpus size {v:?}"),
                })?)
            }
            "min_df" => min_df = parse_threshold(v, header_line)?,
            "max_df" => max_df = parse_threshold(v, header_line)?,
            other => {
                return Err(VocabError::Parse {
                    line: header_line,
                    message: format!("unknown header item {other:?}"),
                })
            }
        }
    }
    let (Some(cap), Some(corpus_size)) = (cap, corpus_size) else {
        return Err(VocabError::Parse {
            line: header_line,
            message: "header missing cap or corpus".into(),
        });
    };
    if corpus_size == 0 {
        return Err(VocabError::Parse { line: header_line, message: "corpus size 0".into() });
    }

    let mut ordered: Vec<(FeatureKey, u64, f64)> = Vec::new();
    let mut seen: HashMap<FeatureKey, usize> = HashMap::new();
    let mut per_class = [0usize; 4];
    for (idx, line) in lines {
        let line_no = idx + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let parse_err = |message: String| VocabError::Parse { line: line_no, message };
        let cols: Vec<&str> = line.split('\t').collect();
        let [class, order, joined, count, df] = cols.as_slice() else {
            return Err(parse_err(format!("expected 5 tab-separated fields, found {}", cols.len())));
        };
        let class = FeatureClass::from_str_exact(class)
            .ok_or_else(|| parse_err(format!("unknown feature class {class:?}")))?;
        let order: u8 =
            order.parse().map_err(|_| parse_err(format!("bad order {order:?}")))?;
        let key = FeatureKey::from_joined(class, joined);
        if key.order() != order {
            return Err(parse_err(format!(
                "order {order} does not match {} components",
                key.components.len()
            )));
        }
        if !class.orders().contains(&order) {
            return Err(parse_err(format!("order {order} not allowed for class {class}")));
        }
        let count: u64 =
            count.parse().map_err(|_| parse_err(format!("bad corpus count {count:?}")))?;
        let doc_freq = hexfloat::parse_hex(df)
            .map_err(|e| parse_err(format!("bad doc_freq {df:?}: {e}")))?;
        if !(doc_freq > 0.0 && doc_freq <= 1.0) {
            return Err(parse_err(format!("doc_freq {doc_freq} outside (0, 1]")));
        }
        if let Some(prev) = seen.insert(key.clone(), line_no) {
            return Err(parse_err(format!("duplicate key (first seen on line {prev})")));
        }
        let slot = FeatureClass::ALL.iter().position(|&c| c == class).unwrap();
        per_class[slot] += 1;
        if per_class[slot] > cap {
            return Err(parse_err(format!("class {class} exceeds cap {cap}")));
        }
        ordered.push((key, count, doc_freq));
    }
    if ordered.is_empty() && !allow_empty {
        return Err(VocabError::Empty);
    }
    Ok(Vocabulary::from_entries(ordered, cap, min_df, max_df, corpus_size))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn lemma_key(name: &str) -> FeatureKey {
        FeatureKey::new(FeatureClass::Lemma, vec![name.to_string()])
    }

    fn bag_of(keys: &[(FeatureKey, u64)]) -> FeatureBag {
        let mut bag = FeatureBag::new();
        for (key, count) in keys {
            for _ in 0..*count {
                bag.add(key.clone());
            }
        }
        bag
    }

    fn build_from(bags: &[FeatureBag], cap: usize) -> Vocabulary {
        let pairs: Vec<(&str, &FeatureBag)> = bags.iter().map(|b| ("d", b)).collect();
        build_vocabulary(pairs, bags.len(), cap).unwrap()
    }

    #[test]
    fn under_cap_keeps_everything() {
        let lemma_keys: Vec<(FeatureKey, u64)> =
            (0..10).map(|i| (lemma_key(&format!("l{i}")), 1)).collect();
        let pos_keys: Vec<(FeatureKey, u64)> = (0..10)
            .map(|i| (FeatureKey::new(FeatureClass::Pos, vec![format!("P{i}")]), 1))
            .collect();
        let bag = bag_of(&[lemma_keys, pos_keys].concat());
        let v = build_from(&[bag], 1500);
        assert_eq!(v.dimension(), 20);
        assert_eq!(v.per_class_count(FeatureClass::Lemma), 10);
        assert_eq!(v.per_class_count(FeatureClass::Pos), 10);
    }

    #[test]
    fn cap_drops_lowest_count() {
        // 1501 keys with pairwise distinct counts 1..=1501.
        let keys: Vec<(FeatureKey, u64)> =
            (0..1501).map(|i| (lemma_key(&format!("k{i:04}")), i as u64 + 1)).collect();
        let v = build_from(&[bag_of(&keys)], 1500);
        assert_eq!(v.dimension(), 1500);
        assert!(v.index_of(&lemma_key("k0000")).is_none(), "count-1 key must be dropped");
        assert!(v.index_of(&lemma_key("k0001")).is_some());
    }

    #[test]
    fn cap_tie_broken_lexicographically() {
        let bag = bag_of(&[
            (lemma_key("mid"), 5),
            (lemma_key("zz"), 3),
            (lemma_key("aa"), 3),
        ]);
        let v = build_from(&[bag], 2);
        assert_eq!(v.dimension(), 2);
        assert!(v.index_of(&lemma_key("mid")).is_some());
        assert!(v.index_of(&lemma_key("aa")).is_some());
        assert!(v.index_of(&lemma_key("zz")).is_none());
    }

    #[test]
    fn index_order_is_class_then_rank() {
        let mut bag = bag_of(&[
            (FeatureKey::new(FeatureClass::Morph, vec!["_".into()]), 9),
            (lemma_key("rare"), 1),
            (lemma_key("common"), 7),
            (FeatureKey::new(FeatureClass::Pos, vec!["NOUN".into()]), 4),
        ]);
        bag.add(FeatureKey::new(FeatureClass::Dep, vec!["a".into(), "b".into()]));
        let v = build_from(&[bag], 1500);
        let keys: Vec<String> = v.entries().iter().map(|e| e.key.joined()).collect();
        assert_eq!(keys, vec!["common", "rare", "NOUN", "a\u{1f}b", "_"]);
        for (i, e) in v.entries().iter().enumerate() {
            assert_eq!(e.index, i);
        }
    }

    /// 20-document corpus with doc frequencies a: 0.05, b: 0.10, c: 0.50.
    fn df_fixture() -> Vocabulary {
        let mut bags = Vec::new();
        for i in 0..20 {
            let mut keys = Vec::new();
            if i < 1 {
                keys.push((lemma_key("a"), 1));
            }
            if i < 2 {
                keys.push((lemma_key("b"), 1));
            }
            if i < 10 {
                keys.push((lemma_key("c"), 1));
            }
            bags.push(bag_of(&keys));
        }
        build_from(&bags, 1500)
    }

    #[test]
    fn doc_freq_is_exact_fraction() {
        let v = df_fixture();
        let df = |name: &str| v.entries()[v.index_of(&lemma_key(name)).unwrap()].doc_freq;
        assert_eq!(df("a"), 1.0 / 20.0);
        assert_eq!(df("b"), 2.0 / 20.0);
        assert_eq!(df("c"), 0.5);
    }

    #[test]
    fn min_df_drops_strictly_lower_only() {
        let v = apply_culling(&df_fixture(), Some(0.10), None).unwrap();
        assert!(v.index_of(&lemma_key("a")).is_none());
        assert!(v.index_of(&lemma_key("b")).is_some(), "boundary df = min_df is kept");
        assert!(v.index_of(&lemma_key("c")).is_some());
        assert_eq!(v.min_df, Some(0.10));
        // Indices re-densified in original order.
        assert_eq!(v.index_of(&lemma_key("c")).unwrap(), 0);
        assert_eq!(v.index_of(&lemma_key("b")).unwrap(), 1);
    }

    #[test]
    fn max_df_keeps_boundary() {
        let v = apply_culling(&df_fixture(), None, Some(0.50)).unwrap();
        assert_eq!(v.dimension(), 3, "0.50 is not strictly higher than max_df");
    }

    #[test]
    fn no_thresholds_is_identity() {
        let v = df_fixture();
        let culled = apply_culling(&v, None, None).unwrap();
        assert_eq!(culled, v);
    }

    #[test]
    fn bad_thresholds_rejected() {
        let v = df_fixture();
        assert!(matches!(apply_culling(&v, Some(0.0), None), Err(VocabError::BadThreshold(_))));
        assert!(matches!(apply_culling(&v, None, Some(1.5)), Err(VocabError::BadThreshold(_))));
        assert!(matches!(
            apply_culling(&v, Some(0.9), Some(0.1)),
            Err(VocabError::CrossedThresholds { .. })
        ));
    }

    #[test]
    fn empty_stream_and_size_mismatch_error() {
        let none: Vec<(&str, &FeatureBag)> = Vec::new();
        assert!(matches!(build_vocabulary(none, 1, 1500), Err(VocabError::EmptyStream)));
        let bag = bag_of(&[(lemma_key("a"), 1)]);
        let one = vec![("d", &bag)];
        assert!(matches!(
            build_vocabulary(one, 2, 1500),
            Err(VocabError::CorpusSizeMismatch { expected: 2, actual: 1 })
        ));
    }

    #[test]
    fn save_load_round_trip() {
        let v = apply_culling(&df_fixture(), Some(0.10), None).unwrap();
        let mut buf = Vec::new();
        save_vocabulary(&v, &mut buf).unwrap();
        let loaded = load_vocabulary(buf.as_slice(), false).unwrap();
        assert_eq!(loaded, v);
        let mut buf2 = Vec::new();
        save_vocabulary(&loaded, &mut buf2).unwrap();
        assert_eq!(buf, buf2);
    }

    #[test]
    fn load_rejects_duplicate_key() {
        let text = "# cap=1500 corpus=4 min_df=- max_df=-\n\
                    LEMMA\t1\tfoo\t3\t0x1p-2\n\
                    LEMMA\t1\tfoo\t2\t0x1p-2\n";
        match load_vocabulary(text.as_bytes(), false) {
            Err(VocabError::Parse { line: 3, message }) => assert!(message.contains("duplicate")),
            other => panic!("expected duplicate-key error, got {other:?}"),
        }
    }

    #[test]
    fn load_empty_requires_flag() {
        let text = "# cap=1500 corpus=1 min_df=- max_df=-\n";
        assert!(matches!(load_vocabulary(text.as_bytes(), false), Err(VocabError::Empty)));
        let v = load_vocabulary(text.as_bytes(), true).unwrap();
        assert_eq!(v.dimension(), 0);
        assert_eq!(v.corpus_size, 1);
    }

    #[test]
    fn load_reports_malformed_line() {
        let text = "# cap=1500 corpus=1 min_df=- max_df=-\n\
                    LEMMA\t1\tfoo\t3\n";
        match load_vocabulary(text.as_bytes(), false) {
            Err(VocabError::Parse { line: 2, message }) => {
                assert!(message.contains("5 tab-separated"))
            }
            other => panic!("expected parse error on line 2, got {other:?}"),
        }
    }

    #[test]
    fn load_rejects_bad_order() {
        let text = "# cap=1500 corpus=1 min_df=- max_df=-\n\
                    MORPH\t2\ta\u{1f}b\t3\t0x1p-1\n";
        assert!(matches!(load_vocabulary(text.as_bytes(), false), Err(VocabError::Parse { .. })));
    }

    proptest! {
        /// Raising min_df never adds entries, and every survivor respects
        /// the threshold.
        #[test]
        fn culling_is_monotone(
            doc_counts in proptest::collection::vec(1usize..=30, 1..40),
            lo in 1u32..=10,
            hi in 1u32..=10,
        ) {
            let corpus = 30usize;
            let mut bags: Vec<FeatureBag> = (0..corpus).map(|_| FeatureBag::new()).collect();
            for (i, &dc) in doc_counts.iter().enumerate() {
                let key = lemma_key(&format!("k{i}"));
                for bag in bags.iter_mut().take(dc) {
                    bag.add(key.clone());
                }
            }
            let v = build_from(&bags, 1500);
            let (lo, hi) = (lo.min(hi), lo.max(hi));
            let loose = apply_culling(&v, Some(lo as f64 / 10.0), None).unwrap();
            let tight = apply_culling(&v, Some(hi as f64 / 10.0), None).unwrap();
            prop_assert!(tight.dimension() <= loose.dimension());
            for e in tight.entries() {
                prop_assert!(e.doc_freq >= hi as f64 / 10.0);
                prop_assert!(loose.index_of(&e.key).is_some());
            }
        }
    }
}
