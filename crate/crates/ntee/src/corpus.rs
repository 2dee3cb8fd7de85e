//! Annotated-document corpus: loading and validation, tokenization,
//! sentence splitting, pseudo-annotations, training pairs, and anchor
//! statistics.
//!
//! The corpus file is UTF-8 with one JSON record per line:
//!
//! ```text
//! {"id":"d1","source_entity":"Tea","text":"Tea is a drink.","annotations":[{"surface":"Tea","start":0,"end":3,"entity":"Tea"}]}
//! ```
//!
//! All offsets are Unicode scalar-value offsets (character counts), not
//! byte offsets, so the same file validates identically in any language.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::vocab::Vocabulary;
use crate::{Error, Result};

/// A single entity annotation: a span of the document text that links to a
/// knowledge-base entity.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Annotation {
    pub surface: String,
    /// Inclusive character offset of the first annotated character.
    pub start: usize,
    /// Exclusive character offset one past the last annotated character.
    pub end: usize,
    /// Title of the linked entity.
    pub entity: String,
}

/// A source text plus its entity annotations; the unit of training
/// supervision.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotatedDocument {
    #[serde(rename = "id")]
    pub doc_id: String,
    /// The KB page this text was extracted from, when known.
    #[serde(default)]
    pub source_entity: Option<String>,
    pub text: String,
    #[serde(default)]
    pub annotations: Vec<Annotation>,
    /// Document-level annotation pointing at `source_entity`, added by
    /// [`add_pseudo_annotations`]. Offsetless by construction and excluded
    /// from anchor statistics.
    #[serde(skip)]
    pub pseudo_entity: Option<String>,
}

/// One training item: the in-vocabulary tokens of a text and the ids of the
/// entities annotated in it. The entity set is always non-empty.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrainingPair {
    pub tokens: Vec<usize>,
    /// Sorted, deduplicated entity ids.
    pub entities: Vec<usize>,
}

/// Counts of anchor occurrences, the raw material for entity popularity and
/// prior probability. Surfaces are lowercased; pseudo-annotations are
/// excluded.
#[derive(Debug, Clone, Default)]
pub struct AnchorStats {
    /// (lowercased surface, entity) -> count.
    pub pair_counts: HashMap<(String, String), u64>,
    /// entity -> number of anchors pointing to it.
    pub entity_counts: HashMap<String, u64>,
    /// lowercased surface -> number of anchors with that surface.
    pub surface_counts: HashMap<String, u64>,
}

/// Training granularity: one pair per sentence, or one pair per document.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Granularity {
    Sentence,
    Paragraph,
}

impl std::str::FromStr for Granularity {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sentence" => Ok(Self::Sentence),
            "paragraph" => Ok(Self::Paragraph),
            other => Err(Error::InvalidArgument(format!(
                "granularity must be 'sentence' or 'paragraph', got '{other}'"
            ))),
        }
    }
}

/// Lowercased tokens split on whitespace and punctuation boundaries, with
/// their character spans. A token is a maximal run of alphanumeric
/// characters; everything else separates tokens, so punctuation-only
/// fragments never appear.
pub fn tokenize_spans(text: &str) -> Vec<(String, usize, usize)> {
    let mut out = Vec::new();
    let mut token = String::new();
    let mut start = 0;
    let mut pos = 0;
    for ch in text.chars() {
        if ch.is_alphanumeric() {
            if token.is_empty() {
                start = pos;
            }
            for lc in ch.to_lowercase() {
                token.push(lc);
            }
        } else if !token.is_empty() {
            out.push((std::mem::take(&mut token), start, pos));
        }
        pos += 1;
    }
    if !token.is_empty() {
        out.push((token, start, pos));
    }
    out
}

/// Lowercased word sequence of a text. See [`tokenize_spans`].
pub fn tokenize(text: &str) -> Vec<String> {
    tokenize_spans(text)
        .into_iter()
        .map(|(t, _, _)| t)
        .collect()
}

/// Character spans of sentences. A sentence ends after `.`, `!`, or `?`
/// followed by whitespace and then an uppercase letter or a digit. The
/// spans partition the text; whitespace between sentences belongs to the
/// following span. Abbreviation-heavy text ("J. R. R.") over-splits.
pub fn split_sentences(text: &str) -> Vec<(usize, usize)> {
    let chars: Vec<char> = text.chars().collect();
    let n = chars.len();
    if n == 0 {
        return Vec::new();
    }
    let mut spans = Vec::new();
    let mut start = 0;
    for i in 0..n {
        if matches!(chars[i], '.' | '!' | '?') && i + 1 < n && chars[i + 1].is_whitespace() {
            let mut k = i + 1;
            while k < n && chars[k].is_whitespace() {
                k += 1;
            }
            if k < n && (chars[k].is_uppercase() || chars[k].is_numeric()) {
                spans.push((start, i + 1));
                start = i + 1;
            }
        }
    }
    if start < n {
        spans.push((start, n));
    }
    spans
}

/// Loads and validates a corpus file. Each annotation must satisfy
/// `0 <= start < end <= |text|` and its surface must equal the text
/// substring; annotations are sorted by start offset and must not overlap.
pub fn load_corpus(path: &Path) -> Result<Vec<AnnotatedDocument>> {
    let file = File::open(path)?;
    load_corpus_reader(BufReader::new(file), &path.display().to_string())
}

/// Same as [`load_corpus`] but over any reader; `label` names the source in
/// error messages.
pub fn load_corpus_reader<R: BufRead>(reader: R, label: &str) -> Result<Vec<AnnotatedDocument>> {
    let mut docs = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let mut doc: AnnotatedDocument =
            serde_json::from_str(&line).map_err(|e| Error::MalformedRecord {
                path: label.to_string(),
                line: idx + 1,
                message: e.to_string(),
            })?;
        validate_document(&mut doc)?;
        docs.push(doc);
    }
    Ok(docs)
}

/// Serializes documents back to the line-delimited format.
pub fn save_corpus(path: &Path, docs: &[AnnotatedDocument]) -> Result<()> {
    use std::io::Write;
    let mut out = std::io::BufWriter::new(File::create(path)?);
    for doc in docs {
        serde_json::to_writer(&mut out, doc).map_err(|e| Error::InvalidArgument(e.to_string()))?;
        writeln!(out)?;
    }
    Ok(())
}

fn validate_document(doc: &mut AnnotatedDocument) -> Result<()> {
    let chars: Vec<char> = doc.text.chars().collect();
    doc.annotations.sort_by_key(|a| (a.start, a.end));
    let mut prev_end = 0;
    for ann in &doc.annotations {
        if ann.start >= ann.end {
            return Err(Error::InvalidAnnotation {
                doc_id: doc.doc_id.clone(),
                message: format!(
                    "annotation span [{}, {}) is empty or reversed",
                    ann.start, ann.end
                ),
            });
        }
        if ann.end > chars.len() {
            return Err(Error::InvalidAnnotation {
                doc_id: doc.doc_id.clone(),
                message: format!(
                    "annotation span [{}, {}) exceeds text length {}",
                    ann.start,
                    ann.end,
                    chars.len()
                ),
            });
        }
        let actual: String = chars[ann.start..ann.end].iter().collect();
        if actual != ann.surface {
            return Err(Error::InvalidAnnotation {
                doc_id: doc.doc_id.clone(),
                message: format!(
                    "surface '{}' does not match text substring '{}' at [{}, {})",
                    ann.surface, actual, ann.start, ann.end
                ),
            });
        }
        if ann.start < prev_end {
            return Err(Error::InvalidAnnotation {
                doc_id: doc.doc_id.clone(),
                message: format!("annotations overlap at offset {}", ann.start),
            });
        }
        prev_end = ann.end;
    }
    Ok(())
}

/// Gives every document with a `source_entity` one document-level
/// annotation for that entity. A KB text typically mentions its own entity
/// many times without linking to it; this recovers that supervision.
pub fn add_pseudo_annotations(docs: &mut [AnnotatedDocument]) {
    for doc in docs {
        doc.pseudo_entity = doc.source_entity.clone();
    }
}

/// Builds training pairs at the requested granularity.
///
/// Sentence granularity: each sentence becomes a pair whose entities are
/// the in-vocabulary annotations contained in the sentence span plus the
/// document's pseudo-annotation (inherited by every sentence). Paragraph
/// granularity: the whole document is one pair. Pairs with no in-vocabulary
/// tokens or an empty entity set are dropped.
pub fn make_training_pairs(
    docs: &[AnnotatedDocument],
    granularity: Granularity,
    vocab: &Vocabulary,
) -> Vec<TrainingPair> {
    let mut pairs = Vec::new();
    for doc in docs {
        let token_spans = tokenize_spans(&doc.text);
        let pseudo_id = doc
            .pseudo_entity
            .as_deref()
            .and_then(|e| vocab.lookup_entity(e));
        let spans = match granularity {
            Granularity::Sentence => split_sentences(&doc.text),
            Granularity::Paragraph => {
                let len = doc.text.chars().count();
                if len == 0 {
                    continue;
                }
                vec![(0, len)]
            }
        };
        for (s, e) in spans {
            let tokens: Vec<usize> = token_spans
                .iter()
                .filter(|(_, ts, te)| *ts >= s && *te <= e)
                .filter_map(|(t, _, _)| vocab.lookup_word(t))
                .collect();
            let mut entities: Vec<usize> = doc
                .annotations
                .iter()
                .filter(|a| a.start >= s && a.end <= e)
                .filter_map(|a| vocab.lookup_entity(&a.entity))
                .collect();
            if let Some(id) = pseudo_id {
                entities.push(id);
            }
            entities.sort_unstable();
            entities.dedup();
            if tokens.is_empty() || entities.is_empty() {
                continue;
            }
            pairs.push(TrainingPair { tokens, entities });
        }
    }
    pairs
}

/// Counts anchors over all real (non-pseudo) annotations, lowercasing
/// surfaces.
pub fn collect_anchor_stats(docs: &[AnnotatedDocument]) -> AnchorStats {
    let mut stats = AnchorStats::default();
    for doc in docs {
        for ann in &doc.annotations {
            let surface = ann.surface.to_lowercase();
            *stats
                .pair_counts
                .entry((surface.clone(), ann.entity.clone()))
                .or_insert(0) += 1;
            *stats.entity_counts.entry(ann.entity.clone()).or_insert(0) += 1;
            *stats.surface_counts.entry(surface).or_insert(0) += 1;
        }
    }
    stats
}
