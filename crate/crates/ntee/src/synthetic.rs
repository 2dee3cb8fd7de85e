//! Deterministic synthetic data generators used by the examples and the
//! test suite. Everything derives from the caller's RNG, so generated
//! worlds are reproducible.

use std::collections::HashMap;

use crate::corpus::{add_pseudo_annotations, AnnotatedDocument, Annotation};
use crate::linker::Mention;
use crate::numerics::Rng;
use crate::qa::QaExample;

/// A two-topic corpus: sentences about "Topic Alpha" use one word
/// inventory, sentences about "Topic Beta" a disjoint one. Supervision
/// comes from each document's pseudo-annotation. Returns the training
/// documents and held-out (sentence, gold entity) pairs.
pub fn two_topic_corpus(
    n_train_per_topic: usize,
    n_heldout_per_topic: usize,
    rng: &mut Rng,
) -> (Vec<AnnotatedDocument>, Vec<(String, String)>) {
    let topics = [
        (
            "Topic Alpha",
            ["ember", "forge", "anvil", "copper", "kiln", "smelt"],
        ),
        (
            "Topic Beta",
            ["tide", "harbor", "sail", "anchor", "reef", "buoy"],
        ),
    ];
    let sentence = |words: &[&str; 6], rng: &mut Rng| {
        let len = 4 + rng.below(4);
        let picked: Vec<&str> = (0..len).map(|_| words[rng.below(words.len())]).collect();
        format!("{}.", picked.join(" "))
    };
    let mut docs = Vec::new();
    let mut heldout = Vec::new();
    for (entity, words) in &topics {
        for i in 0..n_train_per_topic {
            docs.push(AnnotatedDocument {
                doc_id: format!("{}-{i}", entity.to_lowercase().replace(' ', "-")),
                source_entity: Some(entity.to_string()),
                text: sentence(words, rng),
                annotations: Vec::new(),
                pseudo_entity: None,
            });
        }
        for _ in 0..n_heldout_per_topic {
            heldout.push((sentence(words, rng), entity.to_string()));
        }
    }
    add_pseudo_annotations(&mut docs);
    (docs, heldout)
}

/// A synthetic linking world with ambiguous surfaces. Each surface
/// `place<i>` is shared by two entities, `Place<i> City` and
/// `Place<i> River`; documents carry disambiguating context words. Every
/// gold entity is anchored somewhere in the corpus, so candidate recall is
/// complete by construction.
pub struct LinkingWorld {
    pub docs: Vec<AnnotatedDocument>,
    pub mentions: Vec<Mention>,
    pub kb_titles: Vec<(String, String)>,
    pub redirects: HashMap<String, String>,
}

pub fn linking_world(
    n_surfaces: usize,
    mentions_per_surface: usize,
    rng: &mut Rng,
) -> LinkingWorld {
    let city_words = ["street", "market", "tower", "plaza", "mayor"];
    let river_words = ["water", "flows", "banks", "fish", "bridge"];
    let mut docs = Vec::new();
    let mut mentions = Vec::new();
    let mut kb_titles = Vec::new();
    for s in 0..n_surfaces {
        let surface = format!("place{s}");
        let city = format!("Place{s} City");
        let river = format!("Place{s} River");
        kb_titles.push((city.clone(), city.clone()));
        kb_titles.push((river.clone(), river.clone()));
        for m in 0..mentions_per_surface {
            let is_city = m % 2 == 0;
            let (entity, words) = if is_city {
                (&city, &city_words)
            } else {
                (&river, &river_words)
            };
            let mut context: Vec<&str> = (0..4).map(|_| words[rng.below(words.len())]).collect();
            context.push(words[m % words.len()]);
            let text = format!("the {surface} has {}", context.join(" "));
            let start = "the ".chars().count();
            let end = start + surface.chars().count();
            let doc_id = format!("doc-{s}-{m}");
            docs.push(AnnotatedDocument {
                doc_id: doc_id.clone(),
                source_entity: None,
                text: text.clone(),
                annotations: vec![Annotation {
                    surface: surface.clone(),
                    start,
                    end,
                    entity: entity.clone(),
                }],
                pseudo_entity: None,
            });
            mentions.push(Mention {
                doc_id,
                surface: surface.clone(),
                start,
                end,
                gold_entity: entity.clone(),
            });
        }
    }
    LinkingWorld {
        docs,
        mentions,
        kb_titles,
        redirects: HashMap::new(),
    }
}

/// A keyword-separable QA world: each answer entity has a signature keyword
/// that appears in every question about it. Returns corpus documents (for
/// vocabulary and embeddings; one per answer mention) and the raw QA
/// examples.
pub fn qa_world(
    n_answers: usize,
    questions_per_answer: usize,
    rng: &mut Rng,
) -> (Vec<AnnotatedDocument>, Vec<QaExample>) {
    let filler = ["this", "asks", "about", "named", "which", "person"];
    let mut docs = Vec::new();
    let mut examples = Vec::new();
    for a in 0..n_answers {
        let answer = format!("Answer {a}");
        let keyword = format!("signature{a}");
        // One corpus document per answer keeps both in the vocabulary.
        docs.push(AnnotatedDocument {
            doc_id: format!("qa-doc-{a}"),
            source_entity: Some(answer.clone()),
            text: format!("{keyword} {keyword} {}", filler.join(" ")),
            annotations: Vec::new(),
            pseudo_entity: None,
        });
        for q in 0..questions_per_answer {
            let pad: Vec<&str> = (0..3).map(|_| filler[rng.below(filler.len())]).collect();
            examples.push(QaExample {
                question: format!("{} {keyword} {} number {q}", pad[0], pad[1..].join(" ")),
                answer: answer.clone(),
            });
        }
    }
    add_pseudo_annotations(&mut docs);
    (docs, examples)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generators_are_deterministic() {
        let (a, ha) = two_topic_corpus(5, 2, &mut Rng::with_seed(1));
        let (b, hb) = two_topic_corpus(5, 2, &mut Rng::with_seed(1));
        assert_eq!(a, b);
        assert_eq!(ha, hb);

        let wa = linking_world(3, 4, &mut Rng::with_seed(2));
        let wb = linking_world(3, 4, &mut Rng::with_seed(2));
        assert_eq!(wa.docs, wb.docs);
        assert_eq!(wa.mentions, wb.mentions);

        let (qa, ea) = qa_world(3, 6, &mut Rng::with_seed(3));
        let (qb, eb) = qa_world(3, 6, &mut Rng::with_seed(3));
        assert_eq!(qa, qb);
        assert_eq!(ea, eb);
    }

    #[test]
    fn linking_world_offsets_validate() {
        let world = linking_world(2, 3, &mut Rng::with_seed(4));
        for doc in &world.docs {
            let line = serde_json::to_string(doc).unwrap();
            let reloaded = crate::corpus::load_corpus_reader(line.as_bytes(), "synthetic").unwrap();
            assert_eq!(reloaded.len(), 1);
        }
    }
}
