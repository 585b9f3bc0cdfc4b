//! Shared builders for unit tests. Compiled only under `cfg(test)`.

use crate::annotation::{AnnotatedDocument, AnnotatedToken, DocMeta, NeTag, Sentence, Upos};

pub fn tok(lemma: &str, upos: Upos, head: Option<usize>, ne: NeTag) -> AnnotatedToken {
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

pub fn doc(id: &str, label: u8, sentences: Vec<Sentence>) -> AnnotatedDocument {
    AnnotatedDocument {
        id: id.to_string(),
        label,
        meta: DocMeta::default(),
        sentences,
    }
}

/// A right-headed chain sentence over plain NOUN lemmas: token i is headed
/// by token i+1, last token is root. No entities, no morphology.
pub fn chain_sentence(lemmas: &[&str]) -> Sentence {
    let n = lemmas.len();
    Sentence {
        tokens: lemmas
            .iter()
            .enumerate()
            .map(|(i, l)| tok(l, Upos::NOUN, if i + 1 < n { Some(i + 1) } else { None }, NeTag::O))
            .collect(),
    }
}

/// The running example: "John loves Mary ." with John and Mary tagged as
/// PERSON entities and "loves" carrying a full morphology bundle.
pub fn john_loves_mary() -> AnnotatedDocument {
    let mut love = tok("love", Upos::VERB, None, NeTag::O);
    love.surface = "loves".to_string();
    love.morph = vec![
        ("Number".into(), "Sing".into()),
        ("Person".into(), "3".into()),
        ("Tense".into(), "Pres".into()),
        ("VerbForm".into(), "Fin".into()),
    ];
    doc(
        "jlm",
        0,
        vec![Sentence {
            tokens: vec![
                tok("John", Upos::PROPN, Some(1), NeTag::B("PERSON".into())),
                love,
                tok("Mary", Upos::PROPN, Some(1), NeTag::B("PERSON".into())),
                tok(".", Upos::PUNCT, Some(1), NeTag::O),
            ],
        }],
    )
}
