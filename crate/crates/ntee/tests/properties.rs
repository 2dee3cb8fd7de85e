//! Property tests for the invariants that hold for arbitrary inputs,
//! not just the worked examples.

use proptest::collection::vec;
use proptest::prelude::*;

use ntee::corpus::{self, AnnotatedDocument, Annotation};
use ntee::mlp::softmax_over_candidates;
use ntee::model::{prob_sampled, NteeModel};
use ntee::numerics::Rng;
use ntee::similarity::{average_ranks, pearson, spearman};
use ntee::vocab::build_vocab;

/// Documents assembled from a tiny word inventory with consistent
/// annotation offsets.
fn arb_document() -> impl Strategy<Value = AnnotatedDocument> {
    let word = prop::sample::select(vec!["alpha", "beta", "gamma", "delta", "epsilon"]);
    (vec(word, 1..12), any::<u64>()).prop_map(|(words, salt)| {
        let text = words.join(" ");
        // Annotate every third word with an entity named after it.
        let mut annotations = Vec::new();
        let mut offset = 0;
        for (i, w) in words.iter().enumerate() {
            if i % 3 == 0 {
                annotations.push(Annotation {
                    surface: w.to_string(),
                    start: offset,
                    end: offset + w.chars().count(),
                    entity: format!("Entity {w}"),
                });
            }
            offset += w.chars().count() + 1;
        }
        AnnotatedDocument {
            doc_id: format!("doc-{salt}"),
            source_entity: (salt % 2 == 0).then(|| "Entity alpha".to_string()),
            text,
            annotations,
            pseudo_entity: None,
        }
    })
}

proptest! {
    /// Serialized documents reload with every surface equal to its text
    /// substring.
    #[test]
    fn corpus_round_trip_preserves_annotation_alignment(docs in vec(arb_document(), 1..8)) {
        let mut serialized = String::new();
        for doc in &docs {
            serialized.push_str(&serde_json::to_string(doc).unwrap());
            serialized.push('\n');
        }
        let loaded = corpus::load_corpus_reader(serialized.as_bytes(), "prop").unwrap();
        prop_assert_eq!(loaded.len(), docs.len());
        for doc in &loaded {
            let chars: Vec<char> = doc.text.chars().collect();
            for a in &doc.annotations {
                let actual: String = chars[a.start..a.end].iter().collect();
                prop_assert_eq!(&actual, &a.surface);
            }
        }
    }

    /// Anchor-statistics marginals: entity and surface counts are the row
    /// and column sums of the pair counts.
    #[test]
    fn anchor_stats_marginals(docs in vec(arb_document(), 1..8)) {
        let stats = corpus::collect_anchor_stats(&docs);
        for (entity, count) in &stats.entity_counts {
            let total: u64 = stats
                .pair_counts
                .iter()
                .filter(|((_, e), _)| e == entity)
                .map(|(_, c)| c)
                .sum();
            prop_assert_eq!(total, *count);
        }
        for (surface, count) in &stats.surface_counts {
            let total: u64 = stats
                .pair_counts
                .iter()
                .filter(|((s, _), _)| s == surface)
                .map(|(_, c)| c)
                .sum();
            prop_assert_eq!(total, *count);
        }
    }

    /// Vocabulary ids are a bijection onto 0..n-1 and construction is
    /// order-stable under repetition.
    #[test]
    fn vocab_ids_are_contiguous(mut docs in vec(arb_document(), 1..8)) {
        corpus::add_pseudo_annotations(&mut docs);
        let vocab = build_vocab(&docs, 1, 1).unwrap();
        let again = build_vocab(&docs, 1, 1).unwrap();
        prop_assert_eq!(&vocab, &again);
        let mut ids: Vec<usize> = (0..vocab.n_words())
            .map(|i| vocab.lookup_word(vocab.word(i)).unwrap())
            .chain((0..vocab.n_entities()).map(|i| {
                vocab.unified_entity_id(vocab.lookup_entity(vocab.entity(i)).unwrap())
            }))
            .collect();
        ids.sort_unstable();
        let expected: Vec<usize> = (0..vocab.len()).collect();
        prop_assert_eq!(ids, expected);
    }

    /// The encoder ignores uniform duplication of the token multiset.
    #[test]
    fn encode_text_duplication_invariance(
        seed in 0u64..1000,
        tokens in vec(0usize..10, 1..8),
        copies in 2usize..4,
    ) {
        let model = NteeModel::new(10, 2, 6, &mut Rng::with_seed(seed)).unwrap();
        let mut repeated = Vec::new();
        for _ in 0..copies {
            repeated.extend_from_slice(&tokens);
        }
        let a = model.encode_text(&tokens);
        let b = model.encode_text(&repeated);
        for (x, y) in a.iter().zip(&b) {
            prop_assert!((x - y).abs() <= 1e-12);
        }
    }

    /// Sampled-softmax probabilities over a member set sum to one when
    /// each member takes its turn as the positive.
    #[test]
    fn prob_sampled_sums_to_one(seed in 0u64..1000) {
        let mut rng = Rng::with_seed(seed);
        let n_entities = 3 + rng.below(10);
        let model = NteeModel::new(4, n_entities, 5, &mut rng).unwrap();
        let text_vec = model.encode_text(&[0, 1, 2]);
        let members: Vec<usize> = (0..n_entities).filter(|_| rng.next_f64() < 0.7).collect();
        prop_assume!(members.len() >= 2);
        let mut total = 0.0;
        for (i, &positive) in members.iter().enumerate() {
            let negatives: Vec<usize> = members
                .iter()
                .enumerate()
                .filter(|(j, _)| *j != i)
                .map(|(_, &e)| e)
                .collect();
            total += prob_sampled(&model, positive, &negatives, &text_vec).unwrap();
        }
        prop_assert!((total - 1.0).abs() <= 1e-12);
    }

    /// Correlations stay in [-1, 1]; Pearson is invariant under positive
    /// affine maps and Spearman under strictly monotone maps.
    #[test]
    fn correlation_bounds_and_invariances(
        x in vec(-100.0f64..100.0, 4..20),
        y_seed in vec(-100.0f64..100.0, 4..20),
        scale in 0.1f64..10.0,
        shift in -50.0f64..50.0,
    ) {
        let n = x.len().min(y_seed.len());
        let x = &x[..n];
        let y = &y_seed[..n];
        prop_assume!(x.iter().any(|v| v != &x[0]));
        prop_assume!(y.iter().any(|v| v != &y[0]));
        let r = pearson(x, y).unwrap();
        let rho = spearman(x, y).unwrap();
        prop_assert!((-1.0..=1.0).contains(&r), "r = {r}");
        prop_assert!((-1.0..=1.0).contains(&rho), "rho = {rho}");

        let x_affine: Vec<f64> = x.iter().map(|v| scale * v + shift).collect();
        prop_assert!((pearson(&x_affine, y).unwrap() - r).abs() <= 1e-9);

        // exp is strictly monotone; guard against overflow via the range.
        let x_monotone: Vec<f64> = x.iter().map(|v| (v / 100.0).exp()).collect();
        prop_assert!((spearman(&x_monotone, y).unwrap() - rho).abs() <= 1e-9);
    }

    /// Ranks are a permutation-average: they sum to n(n+1)/2.
    #[test]
    fn average_ranks_sum_is_fixed(x in vec(-10.0f64..10.0, 1..30)) {
        let ranks = average_ranks(&x);
        let n = x.len() as f64;
        let total: f64 = ranks.iter().sum();
        prop_assert!((total - n * (n + 1.0) / 2.0).abs() <= 1e-9);
    }

    /// Softmax over candidates sums to one and ignores constant shifts.
    #[test]
    fn softmax_normalization_and_shift_invariance(
        logits in vec(-30.0f64..30.0, 1..12),
        shift in -100.0f64..100.0,
    ) {
        let p = softmax_over_candidates(&logits);
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
        let shifted: Vec<f64> = logits.iter().map(|l| l + shift).collect();
        let q = softmax_over_candidates(&shifted);
        for (a, b) in p.iter().zip(&q) {
            prop_assert!((a - b).abs() <= 1e-12);
        }
    }
}
