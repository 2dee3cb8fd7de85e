//! Central-difference verification of every analytic gradient in the
//! crate: the skip-gram pair loss, the joint model's sampled-softmax loss,
//! the MLP cross-entropy, and the full QA fine-tuning path.
//!
//! The `gradcheck` CLI subcommand runs these suites and prints the maximum
//! relative error per parameter group; the acceptance tests assert the
//! same numbers against [`GRAD_TOLERANCE`].

use crate::corpus::AnnotatedDocument;
use crate::mlp::{candidate_grads, ForwardMode, MlpModel};
use crate::model::{accumulate_example_grads, NteeGrads, NteeModel};
use crate::numerics::{finite_diff_grad, Mat, Rng};
use crate::pretrain::{sgns_pair_grads, sgns_pair_loss};
use crate::qa::accumulate_question_grads_for_check;
use crate::vocab::{build_vocab, Vocabulary};
use crate::Result;

/// Central-difference step used throughout.
pub const GRAD_STEP: f64 = 1e-5;
/// Maximum tolerated relative error between analytic and numeric
/// gradients.
pub const GRAD_TOLERANCE: f64 = 1e-4;

#[derive(Debug, Clone)]
pub struct GradCheckReport {
    pub group: String,
    pub max_rel_err: f64,
}

impl GradCheckReport {
    pub fn passed(&self) -> bool {
        self.max_rel_err <= GRAD_TOLERANCE
    }
}

fn max_rel_err(analytic: &[f64], numeric: &[f64]) -> f64 {
    analytic
        .iter()
        .zip(numeric)
        .map(|(a, n)| (a - n).abs() / a.abs().max(n.abs()).max(1e-6))
        .fold(0.0, f64::max)
}

fn report<F>(group: &str, analytic: &[f64], at: &[f64], f: F) -> Result<GradCheckReport>
where
    F: FnMut(&[f64]) -> f64,
{
    let numeric = finite_diff_grad(f, at, GRAD_STEP)?;
    Ok(GradCheckReport {
        group: group.to_string(),
        max_rel_err: max_rel_err(analytic, &numeric),
    })
}

/// (a) Skip-gram pair loss: center, context, and negative vectors.
pub fn check_skipgram_pair() -> Result<Vec<GradCheckReport>> {
    let mut rng = Rng::with_seed(101);
    let d = 6;
    let sample = |rng: &mut Rng| -> Vec<f64> { (0..d).map(|_| rng.uniform(-1.2, 1.2)).collect() };
    let center = sample(&mut rng);
    let context = sample(&mut rng);
    let negatives: Vec<Vec<f64>> = (0..4).map(|_| sample(&mut rng)).collect();
    let neg_refs: Vec<&[f64]> = negatives.iter().map(Vec::as_slice).collect();
    let (g_center, g_context, g_negs) = sgns_pair_grads(&center, &context, &neg_refs);

    let mut reports = Vec::new();
    reports.push(report("sgns.center", &g_center, &center, |x| {
        sgns_pair_loss(x, &context, &neg_refs)
    })?);
    reports.push(report("sgns.context", &g_context, &context, |x| {
        sgns_pair_loss(&center, x, &neg_refs)
    })?);
    let flat_analytic: Vec<f64> = g_negs.concat();
    let flat_at: Vec<f64> = negatives.concat();
    reports.push(report("sgns.negatives", &flat_analytic, &flat_at, |x| {
        let rows: Vec<&[f64]> = x.chunks(d).collect();
        sgns_pair_loss(&center, &context, &rows)
    })?);
    Ok(reports)
}

/// Two fixed examples over a toy model; between them they touch repeated
/// word tokens, positive entity rows, and negative entity rows.
struct NteeFixture {
    model: NteeModel,
    examples: Vec<(Vec<usize>, usize, Vec<usize>)>,
}

impl NteeFixture {
    fn new() -> Self {
        let mut rng = Rng::with_seed(202);
        let mut model = NteeModel::new(5, 6, 4, &mut rng).expect("valid dims");
        for x in model.word_emb.as_mut_slice() {
            *x *= 8.0;
        }
        for x in model.entity_emb.as_mut_slice() {
            *x *= 8.0;
        }
        // Token 1 repeats to exercise gradient accumulation over
        // duplicate rows.
        let examples = vec![
            (vec![0, 1, 2, 1], 2, vec![0, 4]),
            (vec![3, 4], 5, vec![1, 3]),
        ];
        Self { model, examples }
    }

    fn loss(&self, model: &NteeModel) -> f64 {
        self.examples
            .iter()
            .map(|(tokens, pos, negs)| {
                crate::model::example_loss(model, tokens, *pos, negs).expect("valid example")
            })
            .sum()
    }

    fn grads(&self) -> NteeGrads {
        let mut grads = NteeGrads::zeros(self.model.dim());
        for (tokens, pos, negs) in &self.examples {
            accumulate_example_grads(&self.model, tokens, *pos, negs, &mut grads)
                .expect("valid example");
        }
        grads
    }
}

fn dense_rows(sparse: &crate::model::SparseRows, rows: usize, cols: usize) -> Vec<f64> {
    let mut dense = vec![0.0; rows * cols];
    for (row, g) in sparse.iter_sorted() {
        dense[row * cols..(row + 1) * cols].copy_from_slice(g);
    }
    dense
}

/// (b) Joint-model loss: projection, bias, word rows (through the
/// normalization Jacobian), and positive/negative entity rows.
pub fn check_ntee_loss() -> Result<Vec<GradCheckReport>> {
    let fixture = NteeFixture::new();
    let model = &fixture.model;
    let d = model.dim();
    let grads = fixture.grads();

    let mut reports = Vec::new();
    reports.push(report(
        "ntee.projection",
        grads.projection.as_slice(),
        model.projection.as_slice(),
        |x| {
            let mut m = model.clone();
            m.projection = Mat::from_vec(d, d, x.to_vec()).expect("square");
            fixture.loss(&m)
        },
    )?);
    reports.push(report("ntee.bias", &grads.bias, &model.bias, |x| {
        let mut m = model.clone();
        m.bias = x.to_vec();
        fixture.loss(&m)
    })?);

    let word_analytic = dense_rows(&grads.word_rows, model.n_words(), d);
    reports.push(report(
        "ntee.word_rows",
        &word_analytic,
        model.word_emb.as_slice(),
        |x| {
            let mut m = model.clone();
            m.word_emb = Mat::from_vec(m.word_emb.rows(), d, x.to_vec()).expect("sized");
            fixture.loss(&m)
        },
    )?);

    // Entity rows, split into the positive rows and the sampled negatives.
    let entity_analytic = dense_rows(&grads.entity_rows, model.n_entities(), d);
    let entity_numeric = finite_diff_grad(
        |x| {
            let mut m = model.clone();
            m.entity_emb = Mat::from_vec(m.entity_emb.rows(), d, x.to_vec()).expect("sized");
            fixture.loss(&m)
        },
        model.entity_emb.as_slice(),
        GRAD_STEP,
    )?;
    let positives: Vec<usize> = fixture.examples.iter().map(|(_, p, _)| *p).collect();
    let negatives: Vec<usize> = fixture
        .examples
        .iter()
        .flat_map(|(_, _, negs)| negs.iter().copied())
        .collect();
    let rows_err = |rows: &[usize]| {
        rows.iter()
            .map(|&r| {
                max_rel_err(
                    &entity_analytic[r * d..(r + 1) * d],
                    &entity_numeric[r * d..(r + 1) * d],
                )
            })
            .fold(0.0, f64::max)
    };
    reports.push(GradCheckReport {
        group: "ntee.entity_rows.positive".to_string(),
        max_rel_err: rows_err(&positives),
    });
    reports.push(GradCheckReport {
        group: "ntee.entity_rows.negative".to_string(),
        max_rel_err: rows_err(&negatives),
    });
    Ok(reports)
}

/// (c) MLP candidate cross-entropy: all four parameter groups plus the
/// per-candidate feature gradients.
pub fn check_mlp() -> Result<Vec<GradCheckReport>> {
    let mut rng = Rng::with_seed(303);
    let feature_dim = 5;
    let model = MlpModel::new(4, feature_dim, &mut rng)?;
    let candidates: Vec<Vec<f64>> = (0..3)
        .map(|_| (0..feature_dim).map(|_| rng.uniform(-1.5, 1.5)).collect())
        .collect();
    let gold = 1;
    let (_, grads) = candidate_grads(&model, &candidates, gold, &mut ForwardMode::Eval)?;
    let loss_of = |m: &MlpModel, cands: &[Vec<f64>]| {
        candidate_grads(m, cands, gold, &mut ForwardMode::Eval)
            .expect("valid example")
            .0
    };

    let mut reports = Vec::new();
    reports.push(report(
        "mlp.w1",
        grads.w1.as_slice(),
        model.w1.as_slice(),
        |x| {
            let mut m = model.clone();
            m.w1 = Mat::from_vec(4, feature_dim, x.to_vec()).expect("sized");
            loss_of(&m, &candidates)
        },
    )?);
    reports.push(report("mlp.b1", &grads.b1, &model.b1, |x| {
        let mut m = model.clone();
        m.b1 = x.to_vec();
        loss_of(&m, &candidates)
    })?);
    reports.push(report("mlp.w2", &grads.w2, &model.w2, |x| {
        let mut m = model.clone();
        m.w2 = x.to_vec();
        loss_of(&m, &candidates)
    })?);
    reports.push(report("mlp.b2", &[grads.b2], &[model.b2], |x| {
        let mut m = model.clone();
        m.b2 = x[0];
        loss_of(&m, &candidates)
    })?);
    let flat_analytic: Vec<f64> = grads.features.concat();
    let flat_at: Vec<f64> = candidates.concat();
    reports.push(report("mlp.features", &flat_analytic, &flat_at, |x| {
        let cands: Vec<Vec<f64>> = x.chunks(feature_dim).map(<[f64]>::to_vec).collect();
        loss_of(&model, &cands)
    })?);
    Ok(reports)
}

struct QaFixture {
    model: NteeModel,
    vocab: Vocabulary,
    mlp: MlpModel,
    tokens: Vec<usize>,
    answers: Vec<String>,
    answer_ids: Vec<Option<usize>>,
    gold: usize,
}

impl QaFixture {
    fn new() -> Self {
        let mut docs: Vec<AnnotatedDocument> = Vec::new();
        for (i, answer) in ["Answer A", "Answer B", "Answer C"].iter().enumerate() {
            docs.push(AnnotatedDocument {
                doc_id: format!("d{i}"),
                source_entity: None,
                text: "alpha beta gamma delta epsilon".to_string(),
                annotations: Vec::new(),
                pseudo_entity: Some(answer.to_string()),
            });
        }
        let vocab = build_vocab(&docs, 1, 1).expect("non-empty");
        let mut rng = Rng::with_seed(404);
        let mut model =
            NteeModel::new(vocab.n_words(), vocab.n_entities(), 4, &mut rng).expect("valid dims");
        for x in model.word_emb.as_mut_slice() {
            *x *= 8.0;
        }
        for x in model.entity_emb.as_mut_slice() {
            *x *= 8.0;
        }
        let mlp = MlpModel::new(5, 2 * 4 + 1, &mut rng).expect("valid dims");
        // One answer outside the entity vocabulary exercises the zero-vector
        // feature path.
        let answers: Vec<String> = ["Answer A", "Answer B", "Answer C", "Answer Missing"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        let answer_ids: Vec<Option<usize>> =
            answers.iter().map(|a| vocab.lookup_entity(a)).collect();
        let tokens: Vec<usize> = vec![0, 1, 2, 1];
        Self {
            model,
            vocab,
            mlp,
            tokens,
            answers,
            answer_ids,
            gold: 1,
        }
    }

    fn loss(&self, model: &NteeModel, mlp: &MlpModel) -> f64 {
        let (loss, _, _) = accumulate_question_grads_for_check(
            model,
            &self.vocab,
            mlp,
            &self.tokens,
            &self.answer_ids,
            &self.answers,
            self.gold,
        )
        .expect("valid example");
        loss
    }
}

/// (d) The full QA fine-tuning path: cross-entropy through the MLP, the
/// feature blocks, the normalized entity vectors, and the text encoder.
pub fn check_qa_end_to_end() -> Result<Vec<GradCheckReport>> {
    let fx = QaFixture::new();
    let d = fx.model.dim();
    let (_, mlp_grads, encoder_grads) = accumulate_question_grads_for_check(
        &fx.model,
        &fx.vocab,
        &fx.mlp,
        &fx.tokens,
        &fx.answer_ids,
        &fx.answers,
        fx.gold,
    )?;

    let mut reports = Vec::new();
    reports.push(report(
        "qa.mlp.w1",
        mlp_grads.w1.as_slice(),
        fx.mlp.w1.as_slice(),
        |x| {
            let mut m = fx.mlp.clone();
            m.w1 = Mat::from_vec(m.w1.rows(), m.w1.cols(), x.to_vec()).expect("sized");
            fx.loss(&fx.model, &m)
        },
    )?);
    reports.push(report("qa.mlp.w2", &mlp_grads.w2, &fx.mlp.w2, |x| {
        let mut m = fx.mlp.clone();
        m.w2 = x.to_vec();
        fx.loss(&fx.model, &m)
    })?);
    reports.push(report(
        "qa.projection",
        encoder_grads.projection.as_slice(),
        fx.model.projection.as_slice(),
        |x| {
            let mut m = fx.model.clone();
            m.projection = Mat::from_vec(d, d, x.to_vec()).expect("square");
            fx.loss(&m, &fx.mlp)
        },
    )?);
    reports.push(report(
        "qa.bias",
        &encoder_grads.bias,
        &fx.model.bias,
        |x| {
            let mut m = fx.model.clone();
            m.bias = x.to_vec();
            fx.loss(&m, &fx.mlp)
        },
    )?);
    let word_analytic = dense_rows(&encoder_grads.word_rows, fx.model.n_words(), d);
    reports.push(report(
        "qa.word_rows",
        &word_analytic,
        fx.model.word_emb.as_slice(),
        |x| {
            let mut m = fx.model.clone();
            m.word_emb = Mat::from_vec(m.word_emb.rows(), d, x.to_vec()).expect("sized");
            fx.loss(&m, &fx.mlp)
        },
    )?);
    let entity_analytic = dense_rows(&encoder_grads.entity_rows, fx.model.n_entities(), d);
    reports.push(report(
        "qa.entity_rows",
        &entity_analytic,
        fx.model.entity_emb.as_slice(),
        |x| {
            let mut m = fx.model.clone();
            m.entity_emb = Mat::from_vec(m.entity_emb.rows(), d, x.to_vec()).expect("sized");
            fx.loss(&m, &fx.mlp)
        },
    )?);
    Ok(reports)
}

/// Runs all four suites.
pub fn run_all() -> Result<Vec<GradCheckReport>> {
    let mut reports = check_skipgram_pair()?;
    reports.extend(check_ntee_loss()?);
    reports.extend(check_mlp()?);
    reports.extend(check_qa_end_to_end()?);
    Ok(reports)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_gradient_suites_pass_tolerance() {
        let reports = run_all().unwrap();
        assert!(reports.len() >= 14);
        for r in &reports {
            assert!(
                r.passed(),
                "group {} has max relative error {}",
                r.group,
                r.max_rel_err
            );
        }
    }
}
