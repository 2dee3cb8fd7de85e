//! Nearest-neighbor exploration of trained word and entity vectors.
//!
//! ```bash
//! cargo run --example nearest_neighbors
//! ```

use ntee::corpus::{make_training_pairs, Granularity};
use ntee::model::{train, NteeModel, NteeTrainConfig};
use ntee::numerics::Rng;
use ntee::similarity::{nearest_neighbors, ItemKind};
use ntee::synthetic::two_topic_corpus;
use ntee::vocab::build_vocab;

fn main() -> ntee::Result<()> {
    let mut rng = Rng::with_seed(19);
    let (docs, _) = two_topic_corpus(120, 0, &mut rng);
    let vocab = build_vocab(&docs, 1, 1)?;
    let init = NteeModel::new(vocab.n_words(), vocab.n_entities(), 16, &mut rng)?;
    let pairs = make_training_pairs(&docs, Granularity::Sentence, &vocab);
    let config = NteeTrainConfig {
        negatives: 1,
        batch_size: 20,
        epochs: 40,
        ..Default::default()
    };
    let (model, _) = train(init, &pairs, &config, &mut rng)?;

    for query in ["ember", "tide"] {
        println!("words similar to '{query}':");
        for (word, cos) in nearest_neighbors(&model, &vocab, ItemKind::Word, query, 5)? {
            println!("  {word:<10} {cos:+.3}");
        }
    }
    println!("entities similar to 'Topic Alpha':");
    for (entity, cos) in nearest_neighbors(&model, &vocab, ItemKind::Entity, "Topic Alpha", 5)? {
        println!("  {entity:<12} {cos:+.3}");
    }
    Ok(())
}
