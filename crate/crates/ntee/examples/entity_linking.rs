//! Entity linking on a synthetic ambiguous corpus: anchor statistics,
//! candidate dictionary, feature construction, MLP disambiguation, and
//! micro/macro accuracy.
//!
//! ```bash
//! cargo run --example entity_linking
//! ```

use ntee::corpus::collect_anchor_stats;
use ntee::linker::{
    build_mention_dictionary, entity_popularity, evaluate_linker, generate_candidates,
    prior_probability, train_linker, ElPipeline,
};
use ntee::mlp::MlpConfig;
use ntee::model::NteeModel;
use ntee::numerics::Rng;
use ntee::synthetic::linking_world;
use ntee::vocab::build_vocab;

fn main() -> ntee::Result<()> {
    let mut rng = Rng::with_seed(13);
    let world = linking_world(4, 12, &mut rng);
    println!(
        "world: {} documents, {} mentions, {} entities",
        world.docs.len(),
        world.mentions.len(),
        world.kb_titles.len()
    );

    let stats = collect_anchor_stats(&world.docs);
    let dict = build_mention_dictionary(&world.kb_titles, &world.redirects, &stats, 100);
    let sample = &world.mentions[0];
    println!(
        "\nmention '{}' (gold {}):",
        sample.surface, sample.gold_entity
    );
    for (entity, pop) in generate_candidates(&dict, sample) {
        println!(
            "  candidate {entity:<14} popularity {pop:.3} prior {:.3}",
            prior_probability(&stats, &sample.surface, entity)
        );
    }
    println!(
        "  popularity of an unseen entity: {}",
        entity_popularity(&stats, "Nowhere")
    );

    let vocab = build_vocab(&world.docs, 1, 1)?;
    let model = NteeModel::new(vocab.n_words(), vocab.n_entities(), 12, &mut rng)?;
    let pipeline = ElPipeline {
        model: &model,
        vocab: &vocab,
        dict: &dict,
        stats: &stats,
        use_strsim: true,
    };
    // Hold out the last three mentions of each surface so every entity is
    // seen in training.
    let (train_set, eval_set): (Vec<_>, Vec<_>) = world
        .mentions
        .iter()
        .cloned()
        .enumerate()
        .partition(|(i, _)| i % 12 < 9);
    let train_set: Vec<_> = train_set.into_iter().map(|(_, m)| m).collect();
    let eval_set: Vec<_> = eval_set.into_iter().map(|(_, m)| m).collect();
    let config = MlpConfig {
        hidden_units: 32,
        dropout_p: 0.0,
        epochs: 120,
        batch_size: 8,
        optimizer: Default::default(),
    };
    let (mlp, report) = train_linker(&pipeline, &world.docs, &train_set, None, &config, &mut rng)?;
    println!(
        "\ntrained {} epochs, skipped {} mentions without gold candidates",
        config.epochs, report.skipped
    );
    let on_train = evaluate_linker(&pipeline, &mlp, &world.docs, &train_set)?;
    let on_eval = evaluate_linker(&pipeline, &mlp, &world.docs, &eval_set)?;
    println!(
        "train: micro {:.3} macro {:.3} | held-out: micro {:.3} macro {:.3}",
        on_train.micro, on_train.macro_, on_eval.micro, on_eval.macro_
    );
    Ok(())
}
