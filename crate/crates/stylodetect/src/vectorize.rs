//! Sparse normalized-frequency vectors over a fixed [`Vocabulary`], and
//! training-matrix assembly.
//!
//! Each retained feature's value is its document count divided by the
//! document's total for the same (class, order) stratum — trigram counts
//! are normalized by the trigram total, POS bigrams by the POS-bigram
//! total, and so on. Out-of-vocabulary occurrences contribute nothing
//! (their mass is dropped, not re-bucketed).

use std::collections::HashSet;
use std::io::{BufRead, Write};

use rayon::prelude::*;
use thiserror::Error;

use crate::annotation::AnnotatedDocument;
use crate::features::{extract_all, FeatureBag};
use crate::hexfloat;
use crate::vocab::Vocabulary;

/// Sparse vector of normalized frequencies; indices strictly increasing,
/// values in (0, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct SparseFeatureVector {
    entries: Vec<(usize, f64)>,
    dimension: usize,
}

impl SparseFeatureVector {
    pub fn new(mut entries: Vec<(usize, f64)>, dimension: usize) -> SparseFeatureVector {
        entries.sort_unstable_by_key(|&(i, _)| i);
        debug_assert!(entries.windows(2).all(|w| w[0].0 < w[1].0), "duplicate column index");
        debug_assert!(entries.iter().all(|&(i, v)| i < dimension && v > 0.0 && v <= 1.0));
        SparseFeatureVector { entries, dimension }
    }

    pub fn entries(&self) -> &[(usize, f64)] {
        &self.entries
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    /// Value at a column (0.0 when absent).
    pub fn get(&self, index: usize) -> f64 {
        self.entries
            .binary_search_by_key(&index, |&(i, _)| i)
            .map(|pos| self.entries[pos].1)
            .unwrap_or(0.0)
    }
}

/// One labeled matrix row.
#[derive(Debug, Clone, PartialEq)]
pub struct MatrixRow {
    pub id: String,
    pub label: u8,
    pub vector: SparseFeatureVector,
}

/// A corpus-ordered collection of rows sharing one dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    rows: Vec<MatrixRow>,
    dimension: usize,
}

#[derive(Debug, Error)]
pub enum VectorizeError {
    #[error("empty corpus")]
    EmptyCorpus,
    #[error("duplicate document id {0:?}")]
    DuplicateId(String),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl FeatureMatrix {
    pub fn new(rows: Vec<MatrixRow>, dimension: usize) -> Result<FeatureMatrix, VectorizeError> {
        if rows.is_empty() {
            return Err(VectorizeError::EmptyCorpus);
        }
        let mut seen = HashSet::new();
        for row in &rows {
            debug_assert_eq!(row.vector.dimension(), dimension);
            if !seen.insert(row.id.as_str()) {
                return Err(VectorizeError::DuplicateId(row.id.clone()));
            }
        }
        drop(seen);
        Ok(FeatureMatrix { rows, dimension })
    }

    pub fn rows(&self) -> &[MatrixRow] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn labels(&self) -> Vec<u8> {
        self.rows.iter().map(|r| r.label).collect()
    }

    /// Rows restricted to the given positions, in the given order.
    pub fn subset(&self, positions: &[usize]) -> Result<FeatureMatrix, VectorizeError> {
        FeatureMatrix::new(
            positions.iter().map(|&i| self.rows[i].clone()).collect(),
            self.dimension,
        )
    }
}

/// Map a feature bag onto the vocabulary: value = count / stratum total.
/// Keys missing from the vocabulary are ignored.
pub fn vectorize(bag: &FeatureBag, vocab: &Vocabulary) -> SparseFeatureVector {
    let mut entries: Vec<(usize, f64)> = Vec::new();
    for (key, count) in bag.iter() {
        if let Some(index) = vocab.index_of(key) {
            let total = bag.total(key.class, key.order());
            debug_assert!(total >= count);
            entries.push((index, count as f64 / total as f64));
        }
    }
    SparseFeatureVector::new(entries, vocab.dimension())
}

/// Extract and vectorize one document.
pub fn vectorize_document(doc: &AnnotatedDocument, vocab: &Vocabulary) -> SparseFeatureVector {
    vectorize(&extract_all(doc), vocab)
}

/// Extract and vectorize a corpus, one row per document in corpus order.
/// Documents are processed in parallel; the result is order-deterministic.
pub fn assemble_matrix(
    docs: &[AnnotatedDocument],
    vocab: &Vocabulary,
) -> Result<FeatureMatrix, VectorizeError> {
    if docs.is_empty() {
        return Err(VectorizeError::EmptyCorpus);
    }
    let rows: Vec<MatrixRow> = docs
        .par_iter()
        .map(|doc| MatrixRow {
            id: doc.id.clone(),
            label: doc.label,
            vector: vectorize_document(doc, vocab),
        })
        .collect();
    FeatureMatrix::new(rows, vocab.dimension())
}

/// Write the matrix cache: header `V<TAB>rows`, then per row
/// `id<TAB>label<TAB>idx:value,...` with values as exact hex floats.
pub fn save_matrix(matrix: &FeatureMatrix, mut out: impl Write) -> std::io::Result<()> {
    writeln!(out, "{}\t{}", matrix.dimension(), matrix.len())?;
    for row in matrix.rows() {
        let cells: Vec<String> = row
            .vector
            .entries()
            .iter()
            .map(|&(i, v)| format!("{i}:{}", hexfloat::format_hex(v)))
            .collect();
        writeln!(out, "{}\t{}\t{}", row.id, row.label, cells.join(","))?;
    }
    Ok(())
}

/// Read a matrix cache written by [`save_matrix`] (its exact inverse).
pub fn load_matrix(input: impl BufRead) -> Result<FeatureMatrix, VectorizeError> {
    let mut lines = input.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| VectorizeError::Parse { line: 0, message: "missing header".into() })?;
    let header = header?;
    let parse_err = |line: usize, message: String| VectorizeError::Parse { line, message };
    let (v_str, rows_str) = header
        .split_once('\t')
        .ok_or_else(|| parse_err(1, "expected V<TAB>rows header".into()))?;
    let dimension: usize =
        v_str.parse().map_err(|_| parse_err(1, format!("bad dimension {v_str:?}")))?;
    let expected_rows: usize =
        rows_str.parse().map_err(|_| parse_err(1, format!("bad row count {rows_str:?}")))?;

    let mut rows = Vec::with_capacity(expected_rows);
    for (idx, line) in lines {
        let line_no = idx + 1;
        let line = line?;
        if line.is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split('\t').collect();
        let [id, label, cells] = cols.as_slice() else {
            return Err(parse_err(
                line_no,
                format!("expected 3 tab-separated fields, found {}", cols.len()),
            ));
        };
        let label: u8 = match *label {
            "0" => 0,
            "1" => 1,
            other => return Err(parse_err(line_no, format!("label {other:?} is not 0 or 1"))),
        };
        let mut entries: Vec<(usize, f64)> = Vec::new();
        if !cells.is_empty() {
            for cell in cells.split(',') {
                let (i_str, v_str) = cell
                    .split_once(':')
                    .ok_or_else(|| parse_err(line_no, format!("bad cell {cell:?}")))?;
                let i: usize = i_str
                    .parse()
                    .map_err(|_| parse_err(line_no, format!("bad column index {i_str:?}")))?;
                if i >= dimension {
                    return Err(parse_err(line_no, format!("column {i} ≥ dimension {dimension}")));
                }
                if let Some(&(prev, _)) = entries.last() {
                    if i <= prev {
                        return Err(parse_err(line_no, format!("column {i} not increasing")));
                    }
                }
                let v = hexfloat::parse_hex(v_str)
                    .map_err(|e| parse_err(line_no, format!("bad value {v_str:?}: {e}")))?;
                if !(v > 0.0 && v <= 1.0) {
                    return Err(parse_err(line_no, format!("value {v} outside (0, 1]")));
                }
                entries.push((i, v));
            }
        }
        rows.push(MatrixRow {
            id: id.to_string(),
            label,
            vector: SparseFeatureVector { entries, dimension },
        });
    }
    if rows.len() != expected_rows {
        return Err(VectorizeError::Parse {
            line: 0,
            message: format!("header declares {expected_rows} rows, found {}", rows.len()),
        });
    }
    FeatureMatrix::new(rows, dimension)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::{FeatureClass, FeatureKey};
    use crate::testutil::{chain_sentence, doc, john_loves_mary};
    use proptest::prelude::*;

    fn pos_key(name: &str) -> FeatureKey {
        FeatureKey::new(FeatureClass::Pos, vec![name.to_string()])
    }

    fn bag_with(items: &[(&FeatureKey, u64)]) -> FeatureBag {
        let mut bag = FeatureBag::new();
        for (key, count) in items {
            for _ in 0..*count {
                bag.add((*key).clone());
            }
        }
        bag
    }

    fn vocab_of(keys: &[FeatureKey]) -> Vocabulary {
        let items: Vec<(&FeatureKey, u64)> = keys.iter().map(|k| (k, 1)).collect();
        let bag = bag_with(&items);
        crate::vocab::build_vocabulary(vec![("d", &bag)], 1, 1500).unwrap()
    }

    #[test]
    fn normalization_by_stratum_total() {
        let noun = pos_key("NOUN");
        let verb = pos_key("VERB");
        let punct = pos_key("PUNCT");
        let bag = bag_with(&[(&noun, 2), (&verb, 1), (&punct, 1)]);
        let vocab = vocab_of(&[noun.clone(), verb.clone()]);
        let vec = vectorize(&bag, &vocab);
        assert_eq!(vec.nnz(), 2);
        assert_eq!(vec.get(vocab.index_of(&noun).unwrap()), 0.5);
        assert_eq!(vec.get(vocab.index_of(&verb).unwrap()), 0.25);
    }

    #[test]
    fn disjoint_bag_gives_empty_vector() {
        let bag = bag_with(&[(&pos_key("NOUN"), 3)]);
        let vocab = vocab_of(&[pos_key("VERB")]);
        let vec = vectorize(&bag, &vocab);
        assert_eq!(vec.nnz(), 0);
        assert_eq!(vec.dimension(), 1);
    }

    #[test]
    fn single_key_bag_value_is_one() {
        let noun = pos_key("NOUN");
        let bag = bag_with(&[(&noun, 3)]);
        let vocab = vocab_of(&[noun.clone()]);
        let vec = vectorize(&bag, &vocab);
        assert_eq!(vec.entries(), &[(vocab.index_of(&noun).unwrap(), 1.0)]);
    }

    fn toy_vocab() -> Vocabulary {
        let d = john_loves_mary();
        let bag = extract_all(&d);
        crate::vocab::build_vocabulary(vec![("jlm", &bag)], 1, 1500).unwrap()
    }

    #[test]
    fn assemble_preserves_order_and_purity() {
        let vocab = toy_vocab();
        let mut d1 = john_loves_mary();
        d1.id = "one".into();
        let mut d2 = john_loves_mary();
        d2.id = "two".into();
        let m = assemble_matrix(&[d1, d2], &vocab).unwrap();
        assert_eq!(m.len(), 2);
        assert_eq!(m.rows()[0].id, "one");
        assert_eq!(m.rows()[1].id, "two");
        assert_eq!(m.rows()[0].vector, m.rows()[1].vector);
    }

    #[test]
    fn assemble_rejects_empty_and_duplicate() {
        let vocab = toy_vocab();
        assert!(matches!(assemble_matrix(&[], &vocab), Err(VectorizeError::EmptyCorpus)));
        let d = john_loves_mary();
        match assemble_matrix(&[d.clone(), d], &vocab) {
            Err(VectorizeError::DuplicateId(id)) => assert_eq!(id, "jlm"),
            other => panic!("expected duplicate id error, got {other:?}"),
        }
    }

    #[test]
    fn matrix_cache_round_trip() {
        let vocab = toy_vocab();
        let mut d1 = john_loves_mary();
        d1.id = "one".into();
        let d2 = doc("empty-overlap", 1, vec![chain_sentence(&["zzz"])]);
        let m = assemble_matrix(&[d1, d2], &vocab).unwrap();
        let mut buf = Vec::new();
        save_matrix(&m, &mut buf).unwrap();
        let loaded = load_matrix(buf.as_slice()).unwrap();
        assert_eq!(loaded, m);
        let mut buf2 = Vec::new();
        save_matrix(&loaded, &mut buf2).unwrap();
        assert_eq!(buf, buf2);
    }

    #[test]
    fn matrix_cache_rejects_malformed() {
        let text = "2\t1\nrow1\t9\t\n";
        match load_matrix(text.as_bytes()) {
            Err(VectorizeError::Parse { line: 2, message }) => {
                assert!(message.contains("label"))
            }
            other => panic!("expected label error, got {other:?}"),
        }
        let text = "2\t3\nrow1\t0\t\n";
        assert!(matches!(load_matrix(text.as_bytes()), Err(VectorizeError::Parse { .. })));
    }

    proptest! {
        /// Per-stratum sums stay ≤ 1, with equality iff every extracted
        /// key of the stratum is in the vocabulary.
        #[test]
        fn stratum_sums_bounded(
            counts in proptest::collection::vec(1u64..5, 1..8),
            in_vocab in proptest::collection::vec(proptest::bool::ANY, 8),
        ) {
            let keys: Vec<FeatureKey> =
                (0..counts.len()).map(|i| pos_key(&format!("P{i}"))).collect();
            let items: Vec<(&FeatureKey, u64)> =
                keys.iter().zip(&counts).map(|(k, &c)| (k, c)).collect();
            let bag = bag_with(&items);
            let kept: Vec<FeatureKey> = keys
                .iter()
                .zip(&in_vocab)
                .filter(|&(_, &keep)| keep)
                .map(|(k, _)| k.clone())
                .collect();
            prop_assume!(!kept.is_empty());
            let vocab = vocab_of(&kept);
            let vec = vectorize(&bag, &vocab);
            let sum: f64 = vec.entries().iter().map(|&(_, v)| v).sum();
            prop_assert!(sum <= 1.0 + 1e-12);
            let all_kept = keys.iter().all(|k| vocab.index_of(k).is_some());
            if all_kept {
                prop_assert!((sum - 1.0).abs() < 1e-12);
            } else {
                prop_assert!(sum < 1.0);
            }
        }
    }
}
