//! Factoid question answering over a fixed answer set, with full
//! fine-tuning of the encoder.
//!
//! ```bash
//! cargo run --example question_answering
//! ```

use ntee::mlp::MlpConfig;
use ntee::model::NteeModel;
use ntee::numerics::Rng;
use ntee::qa::{build_qa_dataset, evaluate_qa, train_qa, QaTrainConfig};
use ntee::synthetic::qa_world;
use ntee::vocab::build_vocab;

fn main() -> ntee::Result<()> {
    let mut rng = Rng::with_seed(17);
    let (docs, examples) = qa_world(5, 10, &mut rng);
    let dataset = build_qa_dataset(&examples, 6, &mut rng)?;
    println!(
        "dataset: {} answers, {}/{}/{} train/dev/test questions",
        dataset.answers.len(),
        dataset.train.len(),
        dataset.dev.len(),
        dataset.test.len()
    );

    let vocab = build_vocab(&docs, 1, 1)?;
    let init = NteeModel::new(vocab.n_words(), vocab.n_entities(), 12, &mut rng)?;
    let before = init.clone();
    let config = QaTrainConfig {
        mlp: MlpConfig {
            hidden_units: 16,
            dropout_p: 0.1,
            epochs: 50,
            batch_size: 10,
            optimizer: Default::default(),
        },
        fixed_embeddings: false,
        encoder_optimizer: Default::default(),
    };
    let (mlp, tuned, report) = train_qa(init, &vocab, &dataset, &config, &mut rng)?;
    println!(
        "best epoch {} with dev accuracy {:?}",
        report.best_epoch + 1,
        report.best_dev_accuracy
    );
    println!(
        "embeddings moved during fine-tuning: {}",
        !tuned.word_emb.bits_eq(&before.word_emb)
    );
    for (name, split) in [
        ("train", &dataset.train),
        ("dev", &dataset.dev),
        ("test", &dataset.test),
    ] {
        let acc = evaluate_qa(&mlp, &tuned, &vocab, split, &dataset.answers)?;
        println!("{name:<5} accuracy {acc:.3} over {} questions", split.len());
    }
    Ok(())
}
