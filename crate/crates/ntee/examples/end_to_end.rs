//! The whole training pipeline on a synthetic two-topic corpus:
//! corpus -> vocabulary -> skip-gram pre-training -> joint training ->
//! entity scores for held-out sentences.
//!
//! ```bash
//! cargo run --example end_to_end
//! ```

use ntee::corpus::{make_training_pairs, tokenize, Granularity};
use ntee::model::{train, NteeModel, NteeTrainConfig};
use ntee::numerics::Rng;
use ntee::pretrain::{
    entity_replaced_stream, normalize_entity_rows, train_skipgram, SkipgramConfig,
};
use ntee::synthetic::two_topic_corpus;
use ntee::vocab::build_vocab;

fn main() -> ntee::Result<()> {
    let mut rng = Rng::with_seed(7);
    let (docs, heldout) = two_topic_corpus(80, 10, &mut rng);
    println!(
        "corpus: {} documents, {} held-out sentences",
        docs.len(),
        heldout.len()
    );

    let vocab = build_vocab(&docs, 1, 1)?;
    println!(
        "vocabulary: {} words, {} entities",
        vocab.n_words(),
        vocab.n_entities()
    );

    // Skip-gram pre-training over the entity-replaced stream.
    let stream = entity_replaced_stream(&docs, &vocab);
    let sg_config = SkipgramConfig {
        window: 3,
        negatives: 3,
        dim: 16,
        epochs: 3,
        learning_rate: 0.025,
        subsample_threshold: None,
    };
    let mut table = train_skipgram(&stream, &vocab, &sg_config, &mut rng)?;
    normalize_entity_rows(&mut table, &vocab);

    // Joint training initialized from the pre-trained vectors.
    let init = NteeModel::from_pretrained(&table, &vocab, &mut rng)?;
    let pairs = make_training_pairs(&docs, Granularity::Sentence, &vocab);
    let config = NteeTrainConfig {
        negatives: 1,
        batch_size: 20,
        epochs: 40,
        fixed_embeddings: false,
        optimizer: Default::default(),
    };
    let (model, losses) = train(init, &pairs, &config, &mut rng)?;
    println!(
        "training: {} pairs, loss {:.3} -> {:.3} over {} epochs",
        pairs.len(),
        losses.first().unwrap(),
        losses.last().unwrap(),
        losses.len()
    );

    // Score each held-out sentence against both entities.
    let mut correct = 0;
    for (sentence, gold) in &heldout {
        let tokens: Vec<usize> = tokenize(sentence)
            .iter()
            .filter_map(|t| vocab.lookup_word(t))
            .collect();
        let text_vec = model.encode_text(&tokens);
        let mut best = (0, f64::NEG_INFINITY);
        for e in 0..vocab.n_entities() {
            let score = model.score(e, &text_vec)?;
            if score > best.1 {
                best = (e, score);
            }
        }
        if vocab.entity(best.0) == gold {
            correct += 1;
        }
    }
    println!(
        "held-out entity prediction: {correct}/{} correct",
        heldout.len()
    );
    Ok(())
}
