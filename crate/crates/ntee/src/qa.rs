//! Factoid question answering as classification over a fixed answer-entity
//! set, with full fine-tuning of every parameter.
//!
//! Each question is scored against every answer in the answer set by the
//! shared MLP over `[normalized entity vector, question vector, dot]`
//! features. Unlike entity linking, the gradients flow through the features
//! into the embeddings and the encoder's affine layer.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::tokenize;
use crate::mlp::{
    candidate_grads, predict, ForwardMode, MlpConfig, MlpGrads, MlpModel, MlpOptimizer,
};
use crate::model::{backprop_text, NteeGrads, NteeModel, NteeOptimizer};
use crate::numerics::{axpy, dot, l2_norm, RmspropConfig, Rng};
use crate::vocab::Vocabulary;
use crate::{Error, Result};

pub const DEFAULT_MIN_ANSWER_COUNT: usize = 6;

/// One question labeled with its answer entity.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QaExample {
    pub question: String,
    pub answer: String,
}

/// Split dataset plus the ordered answer set the classifier ranges over.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QaDataset {
    pub train: Vec<QaExample>,
    pub dev: Vec<QaExample>,
    pub test: Vec<QaExample>,
    /// Lexicographically sorted retained answers.
    pub answers: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Split {
    Train,
    Dev,
    Test,
}

impl std::str::FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Self::Train),
            "dev" => Ok(Self::Dev),
            "test" => Ok(Self::Test),
            other => Err(Error::InvalidArgument(format!(
                "split must be train, dev, or test, got '{other}'"
            ))),
        }
    }
}

impl QaDataset {
    pub fn split(&self, which: Split) -> &[QaExample] {
        match which {
            Split::Train => &self.train,
            Split::Dev => &self.dev,
            Split::Test => &self.test,
        }
    }
}

/// Drops answers with fewer than `min_answer_count` questions, then splits
/// each surviving answer's questions 20%/20%/60% into dev/test/train:
/// after a seeded shuffle, dev takes `floor(0.2 n)`, test the next
/// `floor(0.2 n)`, train the remainder.
pub fn build_qa_dataset(
    examples: &[QaExample],
    min_answer_count: usize,
    rng: &mut Rng,
) -> Result<QaDataset> {
    let mut by_answer: BTreeMap<&str, Vec<&QaExample>> = BTreeMap::new();
    for ex in examples {
        by_answer.entry(ex.answer.as_str()).or_default().push(ex);
    }
    by_answer.retain(|_, qs| qs.len() >= min_answer_count);
    if by_answer.is_empty() {
        return Err(Error::InvalidArgument(format!(
            "no answer reaches the minimum of {min_answer_count} questions"
        )));
    }
    let mut dataset = QaDataset {
        train: Vec::new(),
        dev: Vec::new(),
        test: Vec::new(),
        answers: by_answer.keys().map(|a| a.to_string()).collect(),
    };
    for (_, mut questions) in by_answer {
        rng.shuffle(&mut questions);
        let n = questions.len();
        let fifth = n / 5;
        for (i, ex) in questions.into_iter().enumerate() {
            let target = if i < fifth {
                &mut dataset.dev
            } else if i < 2 * fifth {
                &mut dataset.test
            } else {
                &mut dataset.train
            };
            target.push(ex.clone());
        }
    }
    Ok(dataset)
}

/// `[v_e / ||v_e||, v_t, v_e/||v_e|| . v_t]`, dimension `2d + 1`. An answer
/// outside the entity vocabulary contributes zeros and a zero dot product,
/// mirroring the linking features.
pub fn featurize_question(
    model: &NteeModel,
    vocab: &Vocabulary,
    question: &str,
    answer_entity: &str,
) -> Vec<f64> {
    let tokens = question_tokens(vocab, question);
    let text_vec = model.encode_text(&tokens);
    featurize_tokens(model, vocab, &text_vec, answer_entity)
}

fn question_tokens(vocab: &Vocabulary, question: &str) -> Vec<usize> {
    tokenize(question)
        .iter()
        .filter_map(|t| vocab.lookup_word(t))
        .collect()
}

fn featurize_tokens(
    model: &NteeModel,
    vocab: &Vocabulary,
    text_vec: &[f64],
    answer_entity: &str,
) -> Vec<f64> {
    let d = model.dim();
    let mut features = Vec::with_capacity(2 * d + 1);
    match vocab.lookup_entity(answer_entity) {
        Some(eid) => {
            let row = model.entity_emb.row(eid);
            let norm = l2_norm(row);
            if norm > 0.0 {
                features.extend(row.iter().map(|x| x / norm));
            } else {
                features.extend(std::iter::repeat_n(0.0, d));
            }
        }
        None => features.extend(std::iter::repeat_n(0.0, d)),
    }
    features.extend_from_slice(text_vec);
    features.push(dot(&features[..d], text_vec));
    features
}

/// Fine-tuning configuration. `fixed_embeddings` freezes the whole encoder
/// (linking-style behavior) for ablation.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct QaTrainConfig {
    pub mlp: MlpConfig,
    pub fixed_embeddings: bool,
    /// Optimizer for the encoder parameters (the MLP uses `mlp.optimizer`).
    pub encoder_optimizer: RmspropConfig,
}

#[derive(Debug, Clone, Default)]
pub struct QaTrainReport {
    pub best_epoch: usize,
    pub best_dev_accuracy: Option<f64>,
    pub epoch_losses: Vec<f64>,
}

/// The fixed ingredients of one fine-tuning pass: the encoder, the
/// vocabulary, and the answer set with its resolved entity ids.
struct QuestionScorer<'a> {
    model: &'a NteeModel,
    vocab: &'a Vocabulary,
    answers: &'a [String],
    answer_ids: &'a [Option<usize>],
}

impl QuestionScorer<'_> {
    /// Adds the gradients of one question's cross-entropy into both
    /// gradient accumulators and returns the loss. Every answer in the
    /// answer set is a candidate; feature gradients propagate into the
    /// entity rows (through the normalization Jacobian), the question's
    /// word rows, and the affine layer.
    fn accumulate(
        &self,
        mlp: &MlpModel,
        tokens: &[usize],
        gold_idx: usize,
        mode: &mut ForwardMode,
        mlp_grads: &mut Option<MlpGrads>,
        encoder_grads: &mut NteeGrads,
    ) -> Result<f64> {
        let model = self.model;
        let d = model.dim();
        let cache = model.encode_cache(tokens);
        let bias_fallback = model.bias.clone();
        let text_vec: &[f64] = cache
            .as_ref()
            .map(|c| c.text_vec.as_slice())
            .unwrap_or(&bias_fallback);
        let features: Vec<Vec<f64>> = self
            .answers
            .iter()
            .map(|a| featurize_tokens(model, self.vocab, text_vec, a))
            .collect();
        let (loss, grads) = candidate_grads(mlp, &features, gold_idx, mode)?;

        let mut g_text = vec![0.0; d];
        for (j, feature_grad) in grads.features.iter().enumerate() {
            let g_entity_block = &feature_grad[..d];
            let g_text_block = &feature_grad[d..2 * d];
            let g_dot = feature_grad[2 * d];
            let unit_entity = &features[j][..d];
            // v_t receives the direct block plus the dot path.
            axpy(&mut g_text, 1.0, g_text_block);
            axpy(&mut g_text, g_dot, unit_entity);
            // The entity row receives gradient through its normalization.
            if let Some(eid) = self.answer_ids[j] {
                let row = model.entity_emb.row(eid);
                let norm = l2_norm(row);
                if norm > 0.0 {
                    let mut g_unit = g_entity_block.to_vec();
                    axpy(&mut g_unit, g_dot, text_vec);
                    let along = dot(unit_entity, &g_unit);
                    let mut g_row = g_unit;
                    axpy(&mut g_row, -along, unit_entity);
                    for x in &mut g_row {
                        *x /= norm;
                    }
                    encoder_grads.entity_rows.add(eid, 1.0, &g_row);
                }
            }
        }
        backprop_text(model, tokens, cache.as_ref(), &g_text, encoder_grads);
        match mlp_grads {
            Some(acc) => acc.accumulate(&grads),
            None => *mlp_grads = Some(grads),
        }
        Ok(loss)
    }
}

/// Eval-mode loss and both gradient sets for one question, for gradient
/// verification.
pub(crate) fn accumulate_question_grads_for_check(
    model: &NteeModel,
    vocab: &Vocabulary,
    mlp: &MlpModel,
    tokens: &[usize],
    answer_ids: &[Option<usize>],
    answers: &[String],
    gold_idx: usize,
) -> Result<(f64, MlpGrads, NteeGrads)> {
    let scorer = QuestionScorer {
        model,
        vocab,
        answers,
        answer_ids,
    };
    let mut mlp_grads = None;
    let mut encoder_grads = NteeGrads::zeros(model.dim());
    let loss = scorer.accumulate(
        mlp,
        tokens,
        gold_idx,
        &mut ForwardMode::Eval,
        &mut mlp_grads,
        &mut encoder_grads,
    )?;
    Ok((
        loss,
        mlp_grads.expect("one example accumulated"),
        encoder_grads,
    ))
}

/// Trains the QA classifier, fine-tuning the encoder unless frozen.
/// Returns the (MLP, encoder) checkpoint with the best dev accuracy (ties
/// to the later epoch; the final epoch when there is no dev set) plus a
/// report.
pub fn train_qa(
    model: NteeModel,
    vocab: &Vocabulary,
    dataset: &QaDataset,
    config: &QaTrainConfig,
    rng: &mut Rng,
) -> Result<(MlpModel, NteeModel, QaTrainReport)> {
    if dataset.train.is_empty() {
        return Err(Error::InvalidArgument("empty training split".to_string()));
    }
    let answer_ids: Vec<Option<usize>> = dataset
        .answers
        .iter()
        .map(|a| vocab.lookup_entity(a))
        .collect();
    let gold_of = |ex: &QaExample| -> Result<usize> {
        dataset
            .answers
            .binary_search(&ex.answer)
            .map_err(|_| Error::Unknown {
                kind: "answer",
                name: ex.answer.clone(),
            })
    };
    let token_cache: Vec<Vec<usize>> = dataset
        .train
        .iter()
        .map(|ex| question_tokens(vocab, &ex.question))
        .collect();
    let golds: Vec<usize> = dataset.train.iter().map(gold_of).collect::<Result<_>>()?;

    let mut model = model;
    let feature_dim = 2 * model.dim() + 1;
    let mut mlp = MlpModel::new(config.mlp.hidden_units, feature_dim, rng)?;
    let mut mlp_optimizer = MlpOptimizer::new(&mlp, config.mlp.optimizer);
    let mut encoder_optimizer = NteeOptimizer::new(&model, config.encoder_optimizer);

    let mut report = QaTrainReport::default();
    let mut best: Option<(f64, MlpModel, NteeModel)> = None;
    for epoch in 0..config.mlp.epochs {
        let mut order: Vec<usize> = (0..dataset.train.len()).collect();
        rng.shuffle(&mut order);
        let mut epoch_loss = 0.0;
        for batch in order.chunks(config.mlp.batch_size.max(1)) {
            let mut mlp_grads: Option<MlpGrads> = None;
            let mut encoder_grads = NteeGrads::zeros(model.dim());
            for &i in batch {
                let scorer = QuestionScorer {
                    model: &model,
                    vocab,
                    answers: &dataset.answers,
                    answer_ids: &answer_ids,
                };
                let mut mode = ForwardMode::Train {
                    dropout_p: config.mlp.dropout_p,
                    rng,
                };
                epoch_loss += scorer.accumulate(
                    &mlp,
                    &token_cache[i],
                    golds[i],
                    &mut mode,
                    &mut mlp_grads,
                    &mut encoder_grads,
                )?;
            }
            if let Some(grads) = mlp_grads {
                mlp_optimizer.apply(&mut mlp, &grads)?;
            }
            // With frozen embeddings the whole encoder stays untouched,
            // reproducing the linking-style setup.
            if !config.fixed_embeddings {
                encoder_optimizer.apply(&mut model, &encoder_grads, false)?;
            }
        }
        report.epoch_losses.push(epoch_loss);
        if dataset.dev.is_empty() {
            report.best_epoch = epoch;
        } else {
            let acc = evaluate_qa(&mlp, &model, vocab, &dataset.dev, &dataset.answers)?;
            let better = best.as_ref().map(|(b, _, _)| acc >= *b).unwrap_or(true);
            if better {
                best = Some((acc, mlp.clone(), model.clone()));
                report.best_epoch = epoch;
                report.best_dev_accuracy = Some(acc);
            }
        }
    }
    if let Some((_, best_mlp, best_model)) = best {
        mlp = best_mlp;
        model = best_model;
    }
    Ok((mlp, model, report))
}

/// Top-1 accuracy of the classifier on a split: the fraction of questions
/// whose argmax answer equals the gold (ties to the lowest answer index).
pub fn evaluate_qa(
    mlp: &MlpModel,
    model: &NteeModel,
    vocab: &Vocabulary,
    split: &[QaExample],
    answers: &[String],
) -> Result<f64> {
    if split.is_empty() {
        return Err(Error::InvalidArgument("empty evaluation split".to_string()));
    }
    let mut correct = 0;
    for ex in split {
        let tokens = question_tokens(vocab, &ex.question);
        let text_vec = model.encode_text(&tokens);
        let features: Vec<Vec<f64>> = answers
            .iter()
            .map(|a| featurize_tokens(model, vocab, &text_vec, a))
            .collect();
        let (idx, _) = predict(mlp, &features)?;
        if answers[idx] == ex.answer {
            correct += 1;
        }
    }
    Ok(correct as f64 / split.len() as f64)
}

/// Loads line-delimited `{question, answer}` records.
pub fn load_qa_examples(path: &Path) -> Result<Vec<QaExample>> {
    let reader = BufReader::new(File::open(path)?);
    let label = path.display().to_string();
    let mut examples = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let ex: QaExample = serde_json::from_str(&line).map_err(|e| Error::MalformedRecord {
            path: label.clone(),
            line: idx + 1,
            message: e.to_string(),
        })?;
        examples.push(ex);
    }
    Ok(examples)
}

pub fn save_qa_examples(path: &Path, examples: &[QaExample]) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    for ex in examples {
        serde_json::to_writer(&mut out, ex).map_err(|e| Error::InvalidArgument(e.to_string()))?;
        writeln!(out)?;
    }
    Ok(())
}

/// Writes the materialized splits as one JSON document.
pub fn save_qa_dataset(path: &Path, dataset: &QaDataset) -> Result<()> {
    let out = BufWriter::new(File::create(path)?);
    serde_json::to_writer(out, dataset).map_err(|e| Error::InvalidArgument(e.to_string()))
}

pub fn load_qa_dataset(path: &Path) -> Result<QaDataset> {
    let reader = BufReader::new(File::open(path)?);
    serde_json::from_reader(reader).map_err(|e| Error::ModelFile {
        path: path.display().to_string(),
        message: e.to_string(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn examples(counts: &[(&str, usize)]) -> Vec<QaExample> {
        let mut out = Vec::new();
        for (answer, n) in counts {
            for i in 0..*n {
                out.push(QaExample {
                    question: format!("question {i} about {answer}"),
                    answer: answer.to_string(),
                });
            }
        }
        out
    }

    #[test]
    fn answers_below_threshold_are_dropped_entirely() {
        let exs = examples(&[("A", 6), ("B", 5)]);
        let ds = build_qa_dataset(&exs, 6, &mut Rng::with_seed(1)).unwrap();
        assert_eq!(ds.answers, vec!["A".to_string()]);
        let total = ds.train.len() + ds.dev.len() + ds.test.len();
        assert_eq!(total, 6);
        assert!(build_qa_dataset(&examples(&[("A", 5)]), 6, &mut Rng::with_seed(1)).is_err());
    }

    #[test]
    fn split_rounding_six_questions() {
        let exs = examples(&[("A", 6)]);
        let ds = build_qa_dataset(&exs, 6, &mut Rng::with_seed(2)).unwrap();
        assert_eq!(ds.dev.len(), 1);
        assert_eq!(ds.test.len(), 1);
        assert_eq!(ds.train.len(), 4);
    }

    #[test]
    fn split_rounding_ten_questions() {
        let exs = examples(&[("A", 10)]);
        let ds = build_qa_dataset(&exs, 6, &mut Rng::with_seed(3)).unwrap();
        assert_eq!(ds.dev.len(), 2);
        assert_eq!(ds.test.len(), 2);
        assert_eq!(ds.train.len(), 6);
    }

    #[test]
    fn split_is_a_partition_per_answer() {
        let exs = examples(&[("A", 7), ("B", 9), ("C", 13)]);
        let ds = build_qa_dataset(&exs, 6, &mut Rng::with_seed(4)).unwrap();
        let mut seen: Vec<&QaExample> = Vec::new();
        seen.extend(ds.train.iter());
        seen.extend(ds.dev.iter());
        seen.extend(ds.test.iter());
        assert_eq!(seen.len(), exs.len());
        let mut sorted: Vec<String> = seen.iter().map(|e| e.question.clone()).collect();
        sorted.sort();
        sorted.dedup();
        assert_eq!(sorted.len(), exs.len(), "splits must be disjoint");
        for (answer, n) in [("A", 7usize), ("B", 9), ("C", 13)] {
            let count = |split: &[QaExample]| split.iter().filter(|e| e.answer == answer).count();
            assert_eq!(count(&ds.dev), n / 5);
            assert_eq!(count(&ds.test), n / 5);
            assert_eq!(count(&ds.train), n - 2 * (n / 5));
        }
    }

    #[test]
    fn split_is_deterministic_per_seed() {
        let exs = examples(&[("A", 8), ("B", 11)]);
        let a = build_qa_dataset(&exs, 6, &mut Rng::with_seed(9)).unwrap();
        let b = build_qa_dataset(&exs, 6, &mut Rng::with_seed(9)).unwrap();
        assert_eq!(a, b);
    }

    fn tiny_model() -> (NteeModel, Vocabulary) {
        let docs = ["Author", "Painter"]
            .iter()
            .map(|e| crate::corpus::AnnotatedDocument {
                doc_id: format!("d-{e}"),
                source_entity: None,
                text: "who wrote this book or made this art".to_string(),
                annotations: Vec::new(),
                pseudo_entity: Some(e.to_string()),
            })
            .collect::<Vec<_>>();
        let vocab = crate::vocab::build_vocab(&docs, 1, 1).unwrap();
        let model = NteeModel::new(
            vocab.n_words(),
            vocab.n_entities(),
            4,
            &mut Rng::with_seed(5),
        )
        .unwrap();
        (model, vocab)
    }

    #[test]
    fn featurize_dimension_and_degenerate_cases() {
        let (model, vocab) = tiny_model();
        let d = model.dim();
        let f = featurize_question(&model, &vocab, "who wrote this", "Author");
        assert_eq!(f.len(), 2 * d + 1);
        // Dot feature consistent with its blocks.
        assert!((dot(&f[..d], &f[d..2 * d]) - f[2 * d]).abs() < 1e-12);

        let f = featurize_question(&model, &vocab, "who wrote this", "Nobody");
        assert!(f[..d].iter().all(|&x| x == 0.0));
        assert_eq!(f[2 * d], 0.0);

        // Empty question encodes to the bias.
        let f = featurize_question(&model, &vocab, "", "Author");
        assert_eq!(&f[d..2 * d], model.bias.as_slice());
    }

    #[test]
    fn single_answer_dataset_always_scores_one() {
        let (model, vocab) = tiny_model();
        let mlp = MlpModel::new(4, 2 * model.dim() + 1, &mut Rng::with_seed(6)).unwrap();
        let split = examples(&[("Author", 3)]);
        let acc = evaluate_qa(&mlp, &model, &vocab, &split, &["Author".to_string()]).unwrap();
        assert_eq!(acc, 1.0);
        assert!(evaluate_qa(&mlp, &model, &vocab, &[], &["Author".to_string()]).is_err());
    }

    #[test]
    fn fine_tuning_changes_embeddings_and_frozen_mode_does_not() {
        let (model, vocab) = tiny_model();
        let exs = examples(&[("Author", 6), ("Painter", 6)]);
        let ds = build_qa_dataset(&exs, 6, &mut Rng::with_seed(7)).unwrap();
        let config = QaTrainConfig {
            mlp: MlpConfig {
                hidden_units: 4,
                dropout_p: 0.0,
                epochs: 1,
                batch_size: 4,
                optimizer: RmspropConfig::default(),
            },
            fixed_embeddings: false,
            encoder_optimizer: RmspropConfig::default(),
        };
        let before = model.clone();
        let (_, tuned, _) = train_qa(model, &vocab, &ds, &config, &mut Rng::with_seed(8)).unwrap();
        assert!(
            !tuned.word_emb.bits_eq(&before.word_emb)
                || !tuned.entity_emb.bits_eq(&before.entity_emb)
        );

        let frozen_config = QaTrainConfig {
            fixed_embeddings: true,
            ..config
        };
        let (_, frozen, _) = train_qa(
            before.clone(),
            &vocab,
            &ds,
            &frozen_config,
            &mut Rng::with_seed(8),
        )
        .unwrap();
        assert!(frozen.word_emb.bits_eq(&before.word_emb));
        assert!(frozen.entity_emb.bits_eq(&before.entity_emb));
        assert!(frozen.projection.bits_eq(&before.projection));
    }
}
