//! The four stylometric feature extractors.
//!
//! Each extractor turns one valid [`AnnotatedDocument`] into a multiset of
//! typed n-gram occurrences:
//!
//! * lemma uni- to trigrams, with named-entity tokens removed first;
//! * POS uni- to quadrigrams over the full token sequence (punctuation and
//!   SPACE included);
//! * dependency bigrams `(lemma of head, lemma of dependent)` for every
//!   tree edge whose endpoints both lie outside named entities;
//! * morphology unigrams: one per named-entity span (keyed by entity
//!   type) plus one per non-entity token (keyed by its canonical
//!   `Key=Val|...` bundle, `_` when empty).
//!
//! N-grams never cross sentence boundaries. Named-entity exclusion means
//! deleting the span's tokens and forming contiguous n-grams over what
//! remains, so tokens flanking an entity become adjacent.
//!
//! All extractors require a structurally valid document (see
//! [`crate::annotation::validate_document`]); feeding an invalid one may
//! panic.

use std::collections::HashMap;

use crate::annotation::{AnnotatedDocument, NeTag, Sentence};

/// Separator used to join key components canonically. Cannot occur inside
/// a component (annotation text is validated to be control-character
/// free), so joined keys are unambiguous.
pub const COMPONENT_SEPARATOR: char = '\u{1F}';

/// The four feature classes, in canonical (column-block) order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum FeatureClass {
    Lemma,
    Pos,
    Dep,
    Morph,
}

impl FeatureClass {
    pub const ALL: [FeatureClass; 4] = [
        FeatureClass::Lemma,
        FeatureClass::Pos,
        FeatureClass::Dep,
        FeatureClass::Morph,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            FeatureClass::Lemma => "LEMMA",
            FeatureClass::Pos => "POS",
            FeatureClass::Dep => "DEP",
            FeatureClass::Morph => "MORPH",
        }
    }

    pub fn from_str_exact(s: &str) -> Option<FeatureClass> {
        Some(match s {
            "LEMMA" => FeatureClass::Lemma,
            "POS" => FeatureClass::Pos,
            "DEP" => FeatureClass::Dep,
            "MORPH" => FeatureClass::Morph,
            _ => return None,
        })
    }

    /// Allowed n-gram orders for this class.
    pub fn orders(self) -> std::ops::RangeInclusive<u8> {
        match self {
            FeatureClass::Lemma => 1..=3,
            FeatureClass::Pos => 1..=4,
            FeatureClass::Dep => 2..=2,
            FeatureClass::Morph => 1..=1,
        }
    }
}

impl std::fmt::Display for FeatureClass {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A typed n-gram identity. Ordering is `(class, components)`, which is
/// also the canonical lexicographic order of the joined key because the
/// separator sorts below every allowed component character.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct FeatureKey {
    pub class: FeatureClass,
    pub components: Vec<String>,
}

impl FeatureKey {
    pub fn new(class: FeatureClass, components: Vec<String>) -> FeatureKey {
        debug_assert!(
            class.orders().contains(&(components.len() as u8)),
            "{class} key with {} components",
            components.len()
        );
        FeatureKey { class, components }
    }

    /// N-gram length.
    pub fn order(&self) -> u8 {
        self.components.len() as u8
    }

    /// Components joined with [`COMPONENT_SEPARATOR`].
    pub fn joined(&self) -> String {
        self.components.join("\u{1F}")
    }

    /// Inverse of [`FeatureKey::joined`].
    pub fn from_joined(class: FeatureClass, joined: &str) -> FeatureKey {
        FeatureKey {
            class,
            components: joined.split(COMPONENT_SEPARATOR).map(str::to_string).collect(),
        }
    }
}

/// The nine (class, order) strata, in canonical order.
pub const STRATA: [(FeatureClass, u8); 9] = [
    (FeatureClass::Lemma, 1),
    (FeatureClass::Lemma, 2),
    (FeatureClass::Lemma, 3),
    (FeatureClass::Pos, 1),
    (FeatureClass::Pos, 2),
    (FeatureClass::Pos, 3),
    (FeatureClass::Pos, 4),
    (FeatureClass::Dep, 2),
    (FeatureClass::Morph, 1),
];

/// Dense stratum index of a (class, order) pair, if the order is allowed
/// for the class.
pub fn stratum_index(class: FeatureClass, order: u8) -> Option<usize> {
    if !class.orders().contains(&order) {
        return None;
    }
    Some(match (class, order) {
        (FeatureClass::Lemma, n) => n as usize - 1,
        (FeatureClass::Pos, n) => 2 + n as usize,
        (FeatureClass::Dep, _) => 7,
        (FeatureClass::Morph, _) => 8,
    })
}

/// Multiset of feature occurrences for one document, with per-stratum
/// totals (the normalization denominators).
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FeatureBag {
    counts: HashMap<FeatureKey, u64>,
    totals: [u64; STRATA.len()],
}

impl FeatureBag {
    pub fn new() -> FeatureBag {
        FeatureBag::default()
    }

    /// Record one occurrence.
    pub fn add(&mut self, key: FeatureKey) {
        let stratum = stratum_index(key.class, key.order())
            .expect("feature key order out of range for its class");
        self.totals[stratum] += 1;
        *self.counts.entry(key).or_insert(0) += 1;
    }

    pub fn count(&self, key: &FeatureKey) -> u64 {
        self.counts.get(key).copied().unwrap_or(0)
    }

    /// Total occurrences extracted for one (class, order) stratum.
    pub fn total(&self, class: FeatureClass, order: u8) -> u64 {
        stratum_index(class, order).map_or(0, |i| self.totals[i])
    }

    pub fn iter(&self) -> impl Iterator<Item = (&FeatureKey, u64)> {
        self.counts.iter().map(|(k, &c)| (k, c))
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    /// Merge another bag's occurrences into this one.
    pub fn merge(&mut self, other: FeatureBag) {
        for (i, t) in other.totals.iter().enumerate() {
            self.totals[i] += t;
        }
        for (k, c) in other.counts {
            *self.counts.entry(k).or_insert(0) += c;
        }
    }
}

fn add_ngrams(bag: &mut FeatureBag, class: FeatureClass, units: &[&str], orders: std::ops::RangeInclusive<u8>) {
    for n in orders {
        let n = n as usize;
        for window in units.windows(n) {
            bag.add(FeatureKey::new(class, window.iter().map(|u| u.to_string()).collect()));
        }
    }
}

/// Lemma uni- to trigrams over each sentence after deleting named-entity
/// tokens. Punctuation is kept.
pub fn extract_lemma_ngrams(doc: &AnnotatedDocument) -> FeatureBag {
    let mut bag = FeatureBag::new();
    for sentence in &doc.sentences {
        let kept: Vec<&str> = sentence
            .tokens
            .iter()
            .filter(|t| t.ne.is_outside())
            .map(|t| t.lemma.as_str())
            .collect();
        add_ngrams(&mut bag, FeatureClass::Lemma, &kept, FeatureClass::Lemma.orders());
    }
    bag
}

/// POS uni- to quadrigrams over each full sentence (no entity removal;
/// PUNCT and SPACE are ordinary units).
pub fn extract_pos_ngrams(doc: &AnnotatedDocument) -> FeatureBag {
    let mut bag = FeatureBag::new();
    for sentence in &doc.sentences {
        let units: Vec<&str> = sentence.tokens.iter().map(|t| t.upos.as_str()).collect();
        add_ngrams(&mut bag, FeatureClass::Pos, &units, FeatureClass::Pos.orders());
    }
    bag
}

/// Dependency bigrams: for every edge (head, dependent) at tree distance
/// one, with both endpoints outside named entities, emit
/// `[lemma(head), lemma(dependent)]`. Root attachments emit nothing.
pub fn extract_dep_bigrams(doc: &AnnotatedDocument) -> FeatureBag {
    let mut bag = FeatureBag::new();
    for sentence in &doc.sentences {
        for tok in &sentence.tokens {
            let Some(h) = tok.head else { continue };
            let head_tok = &sentence.tokens[h];
            if tok.ne.is_outside() && head_tok.ne.is_outside() {
                bag.add(FeatureKey::new(
                    FeatureClass::Dep,
                    vec![head_tok.lemma.clone(), tok.lemma.clone()],
                ));
            }
        }
    }
    bag
}

/// Morphology unigrams: one occurrence per named-entity span, keyed by the
/// entity type, plus one per non-entity token, keyed by its canonical
/// morphology bundle (`_` when the bundle is empty).
pub fn extract_morph_unigrams(doc: &AnnotatedDocument) -> FeatureBag {
    let mut bag = FeatureBag::new();
    for sentence in &doc.sentences {
        for tok in &sentence.tokens {
            // In a valid BIO sequence, spans are exactly the maximal
            // B/I runs, so emitting on B covers one unigram per span.
            let key = match &tok.ne {
                NeTag::O => tok.morph_bundle(),
                NeTag::B(t) => t.clone(),
                NeTag::I(_) => continue,
            };
            bag.add(FeatureKey::new(FeatureClass::Morph, vec![key]));
        }
    }
    bag
}

/// Union of the four extractors.
pub fn extract_all(doc: &AnnotatedDocument) -> FeatureBag {
    let mut bag = extract_lemma_ngrams(doc);
    bag.merge(extract_pos_ngrams(doc));
    bag.merge(extract_dep_bigrams(doc));
    bag.merge(extract_morph_unigrams(doc));
    bag
}

/// Number of dependency edges in a sentence with both endpoints outside
/// named entities (the expected dependency-bigram yield).
pub fn countable_dep_edges(sentence: &Sentence) -> usize {
    sentence
        .tokens
        .iter()
        .filter(|t| {
            t.head
                .map(|h| t.ne.is_outside() && sentence.tokens[h].ne.is_outside())
                .unwrap_or(false)
        })
        .count()
}
