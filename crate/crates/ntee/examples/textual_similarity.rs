//! Sentence-pair similarity: cosine of encoder vectors correlated against
//! gold ratings with Pearson and Spearman.
//!
//! ```bash
//! cargo run --example textual_similarity
//! ```

use ntee::corpus::{make_training_pairs, Granularity};
use ntee::model::{train, NteeModel, NteeTrainConfig};
use ntee::numerics::Rng;
use ntee::similarity::{evaluate_sts, pair_score, StsPair};
use ntee::synthetic::two_topic_corpus;
use ntee::vocab::build_vocab;

fn main() -> ntee::Result<()> {
    let mut rng = Rng::with_seed(11);
    let (docs, heldout) = two_topic_corpus(60, 12, &mut rng);
    let vocab = build_vocab(&docs, 1, 1)?;
    let init = NteeModel::new(vocab.n_words(), vocab.n_entities(), 16, &mut rng)?;
    let pairs = make_training_pairs(&docs, Granularity::Sentence, &vocab);
    let config = NteeTrainConfig {
        negatives: 1,
        batch_size: 20,
        epochs: 30,
        ..Default::default()
    };
    let (model, _) = train(init, &pairs, &config, &mut rng)?;

    // Same-topic pairs get high gold ratings, cross-topic pairs low ones;
    // half of each kind.
    let half = heldout.len() / 2;
    let mut sts_pairs = Vec::new();
    for i in 0..half {
        let (ref a, ref topic_a) = heldout[i];
        let (ref same, _) = heldout[(i + 1) % half];
        let (ref cross, ref topic_cross) = heldout[half + i];
        assert_ne!(topic_a, topic_cross);
        sts_pairs.push(StsPair {
            sentence_a: a.clone(),
            sentence_b: same.clone(),
            gold: 4.5,
        });
        sts_pairs.push(StsPair {
            sentence_a: a.clone(),
            sentence_b: cross.clone(),
            gold: 1.5,
        });
    }
    for pair in sts_pairs.iter().take(4) {
        let score = pair_score(&model, &vocab, &pair.sentence_a, &pair.sentence_b);
        println!(
            "score {score:+.3}  gold {:.1}  |  {}  ~  {}",
            pair.gold, pair.sentence_a, pair.sentence_b
        );
    }
    let report = evaluate_sts(&model, &vocab, &sts_pairs)?;
    println!(
        "\npearson={:.4} spearman={:.4} n={}",
        report.pearson_r, report.spearman_rho, report.n
    );
    Ok(())
}
