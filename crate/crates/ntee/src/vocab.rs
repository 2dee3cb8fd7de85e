//! Word and entity vocabularies with frequency thresholds.
//!
//! Words kept when they appear at least five times in the corpus, entities
//! at least three times (both overridable). Ids are assigned per kind in
//! descending frequency with lexicographic tie-breaks, so construction is
//! deterministic across platforms and hash-map iteration orders.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::corpus::{tokenize, AnnotatedDocument};
use crate::{Error, Result};

pub const DEFAULT_MIN_WORD_COUNT: u64 = 5;
pub const DEFAULT_MIN_ENTITY_COUNT: u64 = 3;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VocabEntry {
    pub surface: String,
    pub count: u64,
}

/// Indexed word and entity vocabularies.
///
/// Word ids and entity ids each run contiguously from 0. The unified id
/// space used by skip-gram pre-training places words first:
/// `unified = word_id` or `n_words + entity_id`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    words: Vec<VocabEntry>,
    entities: Vec<VocabEntry>,
    word_ids: HashMap<String, usize>,
    entity_ids: HashMap<String, usize>,
}

/// Builds a vocabulary from documents. Word frequency is counted over full
/// document texts; entity frequency over annotations plus pseudo-annotations
/// (pseudo-annotations are training supervision exactly like real ones).
pub fn build_vocab(
    docs: &[AnnotatedDocument],
    min_word_count: u64,
    min_entity_count: u64,
) -> Result<Vocabulary> {
    let mut word_counts: HashMap<String, u64> = HashMap::new();
    let mut entity_counts: HashMap<String, u64> = HashMap::new();
    for doc in docs {
        for token in tokenize(&doc.text) {
            *word_counts.entry(token).or_insert(0) += 1;
        }
        for ann in &doc.annotations {
            *entity_counts.entry(ann.entity.clone()).or_insert(0) += 1;
        }
        if let Some(e) = &doc.pseudo_entity {
            *entity_counts.entry(e.clone()).or_insert(0) += 1;
        }
    }
    let words = rank(word_counts, min_word_count);
    let entities = rank(entity_counts, min_entity_count);
    if words.is_empty() && entities.is_empty() {
        return Err(Error::EmptyVocabulary);
    }
    Ok(Vocabulary::from_entries(words, entities))
}

fn rank(counts: HashMap<String, u64>, min_count: u64) -> Vec<VocabEntry> {
    let mut entries: Vec<VocabEntry> = counts
        .into_iter()
        .filter(|(_, c)| *c >= min_count)
        .map(|(surface, count)| VocabEntry { surface, count })
        .collect();
    entries.sort_by(|a, b| {
        b.count
            .cmp(&a.count)
            .then_with(|| a.surface.cmp(&b.surface))
    });
    entries
}

impl Vocabulary {
    fn from_entries(words: Vec<VocabEntry>, entities: Vec<VocabEntry>) -> Self {
        let word_ids = words
            .iter()
            .enumerate()
            .map(|(i, e)| (e.surface.clone(), i))
            .collect();
        let entity_ids = entities
            .iter()
            .enumerate()
            .map(|(i, e)| (e.surface.clone(), i))
            .collect();
        Self {
            words,
            entities,
            word_ids,
            entity_ids,
        }
    }

    pub fn lookup_word(&self, word: &str) -> Option<usize> {
        self.word_ids.get(word).copied()
    }

    pub fn lookup_entity(&self, entity: &str) -> Option<usize> {
        self.entity_ids.get(entity).copied()
    }

    pub fn n_words(&self) -> usize {
        self.words.len()
    }

    pub fn n_entities(&self) -> usize {
        self.entities.len()
    }

    /// Total number of retained types.
    pub fn len(&self) -> usize {
        self.words.len() + self.entities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn word(&self, id: usize) -> &str {
        &self.words[id].surface
    }

    pub fn entity(&self, id: usize) -> &str {
        &self.entities[id].surface
    }

    pub fn words(&self) -> &[VocabEntry] {
        &self.words
    }

    pub fn entities(&self) -> &[VocabEntry] {
        &self.entities
    }

    /// Position of an entity in the unified (words-first) id space.
    pub fn unified_entity_id(&self, entity_id: usize) -> usize {
        self.words.len() + entity_id
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut out = BufWriter::new(File::create(path)?);
        self.write_to(&mut out)
    }

    /// One line per type: `kind TAB surface TAB count TAB id`.
    pub fn write_to<W: Write>(&self, out: &mut W) -> Result<()> {
        for (id, e) in self.words.iter().enumerate() {
            writeln!(out, "word\t{}\t{}\t{}", e.surface, e.count, id)?;
        }
        for (id, e) in self.entities.iter().enumerate() {
            writeln!(out, "entity\t{}\t{}\t{}", e.surface, e.count, id)?;
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = File::open(path)?;
        Self::read_from(BufReader::new(file), &path.display().to_string())
    }

    pub fn read_from<R: BufRead>(reader: R, label: &str) -> Result<Self> {
        let mut words = Vec::new();
        let mut entities = Vec::new();
        for (idx, line) in reader.lines().enumerate() {
            let line = line?;
            if line.is_empty() {
                continue;
            }
            let bad = |message: String| Error::MalformedRecord {
                path: label.to_string(),
                line: idx + 1,
                message,
            };
            let parts: Vec<&str> = line.split('\t').collect();
            if parts.len() != 4 {
                return Err(bad(format!(
                    "expected 4 tab-separated fields, got {}",
                    parts.len()
                )));
            }
            let count: u64 = parts[2]
                .parse()
                .map_err(|_| bad(format!("bad count '{}'", parts[2])))?;
            let id: usize = parts[3]
                .parse()
                .map_err(|_| bad(format!("bad id '{}'", parts[3])))?;
            let list = match parts[0] {
                "word" => &mut words,
                "entity" => &mut entities,
                other => return Err(bad(format!("unknown kind '{other}'"))),
            };
            if id != list.len() {
                return Err(bad(format!(
                    "non-contiguous id {id}, expected {}",
                    list.len()
                )));
            }
            list.push(VocabEntry {
                surface: parts[1].to_string(),
                count,
            });
        }
        if words.is_empty() && entities.is_empty() {
            return Err(Error::EmptyVocabulary);
        }
        Ok(Self::from_entries(words, entities))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn doc(text: &str, pseudo: Option<&str>) -> AnnotatedDocument {
        AnnotatedDocument {
            doc_id: "d".to_string(),
            source_entity: None,
            text: text.to_string(),
            annotations: Vec::new(),
            pseudo_entity: pseudo.map(str::to_string),
        }
    }

    /// One empty-text doc per entity occurrence, so counts are explicit.
    fn entity_docs(entities: &[&str]) -> Vec<AnnotatedDocument> {
        entities.iter().map(|e| doc("", Some(e))).collect()
    }

    #[test]
    fn word_threshold_boundary() {
        let docs = vec![doc("aa aa aa aa aa bb bb bb bb", Some("E"))];
        let v = build_vocab(&docs, 5, 1).unwrap();
        assert_eq!(v.lookup_word("aa"), Some(0));
        assert_eq!(v.lookup_word("bb"), None);
        assert_eq!(v.n_words(), 1);
    }

    #[test]
    fn entity_threshold_boundary() {
        let docs = entity_docs(&["E1", "E1", "E1", "E2", "E2"]);
        let v = build_vocab(&docs, 1, 3).unwrap();
        assert_eq!(v.lookup_entity("E1"), Some(0));
        assert_eq!(v.lookup_entity("E2"), None);
    }

    #[test]
    fn equal_counts_tie_break_lexicographically() {
        let docs = vec![doc("bb aa bb aa cc", None)];
        let v = build_vocab(&docs, 1, 1).unwrap();
        // aa and bb both count 2 -> aa first; cc count 1 last.
        assert_eq!(v.word(0), "aa");
        assert_eq!(v.word(1), "bb");
        assert_eq!(v.word(2), "cc");
    }

    #[test]
    fn lookup_is_total_and_case_sensitive() {
        let docs = vec![doc("alpha alpha", Some("Alpha"))];
        let v = build_vocab(&docs, 1, 1).unwrap();
        assert!(v.lookup_word("alpha").is_some());
        assert_eq!(v.lookup_word("Alpha"), None);
        assert_eq!(v.lookup_entity("alpha"), None);
        assert!(v.lookup_entity("Alpha").is_some());
        assert_eq!(v.lookup_word("pruned"), None);
    }

    #[test]
    fn empty_vocabulary_is_an_error() {
        let docs = vec![doc("one two", None)];
        assert!(matches!(
            build_vocab(&docs, 10, 10),
            Err(Error::EmptyVocabulary)
        ));
    }

    #[test]
    fn build_is_deterministic() {
        let mut docs = vec![doc("w1 w2 w3 w1 w2 w1", Some("A"))];
        docs.extend(entity_docs(&["A", "B"]));
        let a = build_vocab(&docs, 1, 1).unwrap();
        let b = build_vocab(&docs, 1, 1).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn ids_are_a_bijection_onto_contiguous_range() {
        let mut docs = vec![doc("w1 w2 w3 w1", None)];
        docs.extend(entity_docs(&["A", "B"]));
        let v = build_vocab(&docs, 1, 1).unwrap();
        let mut unified: Vec<usize> = (0..v.n_words())
            .map(|i| v.lookup_word(v.word(i)).unwrap())
            .chain(
                (0..v.n_entities())
                    .map(|i| v.unified_entity_id(v.lookup_entity(v.entity(i)).unwrap())),
            )
            .collect();
        unified.sort_unstable();
        assert_eq!(unified, (0..v.len()).collect::<Vec<_>>());
    }

    #[test]
    fn save_load_round_trip() {
        let mut docs = vec![doc("w1 w2 w2 w3", None)];
        docs.extend(entity_docs(&["Entity A", "Entity A", "B"]));
        let v = build_vocab(&docs, 1, 1).unwrap();
        let mut buf = Vec::new();
        v.write_to(&mut buf).unwrap();
        let loaded = Vocabulary::read_from(buf.as_slice(), "mem").unwrap();
        assert_eq!(v, loaded);
    }
}
