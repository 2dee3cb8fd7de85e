//! Skip-gram pre-training over the entity-replaced token stream, showing
//! the stream construction and the effect of entity-row normalization.
//!
//! ```bash
//! cargo run --example skipgram_pretraining
//! ```

use ntee::numerics::{l2_norm, Rng};
use ntee::pretrain::{
    entity_replaced_stream, normalize_entity_rows, train_skipgram, SkipgramConfig,
};
use ntee::synthetic::linking_world;
use ntee::vocab::build_vocab;

fn main() -> ntee::Result<()> {
    let mut rng = Rng::with_seed(23);
    let world = linking_world(3, 10, &mut rng);
    let vocab = build_vocab(&world.docs, 1, 1)?;
    let stream = entity_replaced_stream(&world.docs, &vocab);

    // Render one sequence: annotation spans became entity tokens.
    let rendered: Vec<String> = stream[0]
        .iter()
        .map(|&id| {
            if id < vocab.n_words() {
                vocab.word(id).to_string()
            } else {
                format!(
                    "ENTITY:{}",
                    vocab.entity(id - vocab.n_words()).replace(' ', "_")
                )
            }
        })
        .collect();
    println!("document 0 text:   {}", world.docs[0].text);
    println!("document 0 stream: {}", rendered.join(" "));

    let config = SkipgramConfig {
        window: 2,
        negatives: 3,
        dim: 12,
        epochs: 4,
        learning_rate: 0.025,
        subsample_threshold: None,
    };
    let mut table = train_skipgram(&stream, &vocab, &config, &mut rng)?;
    let eid = vocab.unified_entity_id(0);
    println!(
        "\nentity '{}' row norm before normalization: {:.4}",
        vocab.entity(0),
        l2_norm(table.input_vectors.row(eid))
    );
    normalize_entity_rows(&mut table, &vocab);
    println!(
        "entity '{}' row norm after normalization:  {:.4}",
        vocab.entity(0),
        l2_norm(table.input_vectors.row(eid))
    );
    Ok(())
}
