//! Single-hidden-layer candidate scorer shared by the entity-linking and
//! question-answering pipelines.
//!
//! One network maps a candidate's feature vector to a scalar logit through
//! a ReLU hidden layer with inverted dropout; a softmax across the
//! candidate set picks the winner. The same weights score every candidate.

use crate::numerics::{axpy, dot, glorot_init, Mat, RmspropConfig, RmspropState, Rng};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct MlpModel {
    /// hidden x feature_dim.
    pub w1: Mat,
    pub b1: Vec<f64>,
    pub w2: Vec<f64>,
    pub b2: f64,
}

/// Architecture and training knobs. Dropout is the inverted variant:
/// surviving units scale by `1/(1-p)` at train time, evaluation runs the
/// plain network.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpConfig {
    pub hidden_units: usize,
    pub dropout_p: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub optimizer: RmspropConfig,
}

impl Default for MlpConfig {
    fn default() -> Self {
        Self {
            hidden_units: 100,
            dropout_p: 0.0,
            epochs: 50,
            batch_size: 100,
            optimizer: RmspropConfig::default(),
        }
    }
}

/// Forward mode: evaluation (no dropout) or training with dropout masks
/// drawn from the given RNG.
pub enum ForwardMode<'a> {
    Eval,
    Train { dropout_p: f64, rng: &'a mut Rng },
}

struct ForwardCache {
    pre: Vec<f64>,
    /// Post-ReLU, post-dropout activations.
    hidden: Vec<f64>,
    /// Per-unit dropout scale (0 or 1/(1-p)); `None` in eval mode.
    mask: Option<Vec<f64>>,
    logit: f64,
}

impl MlpModel {
    pub fn new(hidden_units: usize, feature_dim: usize, rng: &mut Rng) -> Result<Self> {
        if hidden_units == 0 || feature_dim == 0 {
            return Err(Error::InvalidArgument(
                "hidden_units and feature_dim must be >= 1".to_string(),
            ));
        }
        let w1 = glorot_init(hidden_units, feature_dim, rng)?;
        let w2 = glorot_init(1, hidden_units, rng)?.as_slice().to_vec();
        Ok(Self {
            w1,
            b1: vec![0.0; hidden_units],
            w2,
            b2: 0.0,
        })
    }

    pub fn hidden_units(&self) -> usize {
        self.w1.rows()
    }

    pub fn feature_dim(&self) -> usize {
        self.w1.cols()
    }

    fn forward(&self, features: &[f64], mode: &mut ForwardMode) -> Result<ForwardCache> {
        if features.len() != self.feature_dim() {
            return Err(Error::ShapeMismatch(format!(
                "feature vector has {} entries, network expects {}",
                features.len(),
                self.feature_dim()
            )));
        }
        let mut pre = self.w1.matvec(features);
        axpy(&mut pre, 1.0, &self.b1);
        let relu: Vec<f64> = pre.iter().map(|&x| x.max(0.0)).collect();
        let (hidden, mask) = match mode {
            ForwardMode::Eval => (relu, None),
            ForwardMode::Train { dropout_p, rng } => {
                let p = *dropout_p;
                if !(0.0..1.0).contains(&p) {
                    return Err(Error::InvalidArgument(format!(
                        "dropout probability must be in [0, 1), got {p}"
                    )));
                }
                if p == 0.0 {
                    (relu, None)
                } else {
                    let scale = 1.0 / (1.0 - p);
                    let mask: Vec<f64> = (0..relu.len())
                        .map(|_| if rng.next_f64() < p { 0.0 } else { scale })
                        .collect();
                    let dropped: Vec<f64> = relu.iter().zip(&mask).map(|(h, m)| h * m).collect();
                    (dropped, Some(mask))
                }
            }
        };
        let logit = dot(&self.w2, &hidden) + self.b2;
        Ok(ForwardCache {
            pre,
            hidden,
            mask,
            logit,
        })
    }

    /// Scalar logit of one candidate's features.
    pub fn logit(&self, features: &[f64], mode: &mut ForwardMode) -> Result<f64> {
        Ok(self.forward(features, mode)?.logit)
    }
}

/// Numerically stable softmax; the probabilities sum to 1 and are invariant
/// under adding a constant to every logit.
pub fn softmax_over_candidates(logits: &[f64]) -> Vec<f64> {
    assert!(!logits.is_empty(), "softmax needs at least one candidate");
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
    let denom: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / denom).collect()
}

/// Eval-mode prediction over a candidate set: (argmax index, softmax
/// probabilities). Ties go to the lowest candidate index.
pub fn predict(model: &MlpModel, candidates: &[Vec<f64>]) -> Result<(usize, Vec<f64>)> {
    if candidates.is_empty() {
        return Err(Error::InvalidArgument(
            "predict needs at least one candidate".to_string(),
        ));
    }
    let mut logits = Vec::with_capacity(candidates.len());
    for features in candidates {
        logits.push(model.logit(features, &mut ForwardMode::Eval)?);
    }
    let mut best = 0;
    for (i, &l) in logits.iter().enumerate() {
        if l > logits[best] {
            best = i;
        }
    }
    Ok((best, softmax_over_candidates(&logits)))
}

/// Gradients of the candidate-set cross-entropy, including the gradient
/// with respect to every candidate's feature vector (the hook the QA
/// fine-tuning path uses to reach the embeddings).
#[derive(Debug, Clone)]
pub struct MlpGrads {
    pub w1: Mat,
    pub b1: Vec<f64>,
    pub w2: Vec<f64>,
    pub b2: f64,
    pub features: Vec<Vec<f64>>,
}

impl MlpGrads {
    pub fn zeros(model: &MlpModel) -> Self {
        Self {
            w1: Mat::zeros(model.hidden_units(), model.feature_dim()),
            b1: vec![0.0; model.hidden_units()],
            w2: vec![0.0; model.hidden_units()],
            b2: 0.0,
            features: Vec::new(),
        }
    }

    /// Merge another example's gradients (feature grads are per-example and
    /// are not merged).
    pub fn accumulate(&mut self, other: &MlpGrads) {
        axpy(self.w1.as_mut_slice(), 1.0, other.w1.as_slice());
        axpy(&mut self.b1, 1.0, &other.b1);
        axpy(&mut self.w2, 1.0, &other.w2);
        self.b2 += other.b2;
    }
}

/// Cross-entropy loss and gradients for one example: the shared network
/// scores every candidate, softmax over the logits, `-log p[gold]`.
pub fn candidate_grads(
    model: &MlpModel,
    candidates: &[Vec<f64>],
    gold: usize,
    mode: &mut ForwardMode,
) -> Result<(f64, MlpGrads)> {
    if gold >= candidates.len() {
        return Err(Error::InvalidArgument(format!(
            "gold index {gold} outside candidate set of {}",
            candidates.len()
        )));
    }
    let mut caches = Vec::with_capacity(candidates.len());
    for features in candidates {
        caches.push(model.forward(features, mode)?);
    }
    let logits: Vec<f64> = caches.iter().map(|c| c.logit).collect();
    let probs = softmax_over_candidates(&logits);
    let loss = -probs[gold].max(f64::MIN_POSITIVE).ln();

    let mut grads = MlpGrads::zeros(model);
    for (i, (cache, features)) in caches.iter().zip(candidates).enumerate() {
        // d(loss)/d(logit_i) = p_i - [i == gold].
        let dlogit = probs[i] - if i == gold { 1.0 } else { 0.0 };
        grads.b2 += dlogit;
        axpy(&mut grads.w2, dlogit, &cache.hidden);
        let mut dpre: Vec<f64> = self_w2_backward(model, cache, dlogit);
        for (g, &pre) in dpre.iter_mut().zip(&cache.pre) {
            if pre <= 0.0 {
                *g = 0.0;
            }
        }
        grads.w1.add_outer(&dpre, features);
        axpy(&mut grads.b1, 1.0, &dpre);
        grads.features.push(model.w1.matvec_transpose(&dpre));
    }
    Ok((loss, grads))
}

fn self_w2_backward(model: &MlpModel, cache: &ForwardCache, dlogit: f64) -> Vec<f64> {
    // d(logit)/d(hidden) = w2; dropout contributes its scale per unit.
    match &cache.mask {
        Some(mask) => model
            .w2
            .iter()
            .zip(mask)
            .map(|(w, m)| dlogit * w * m)
            .collect(),
        None => model.w2.iter().map(|w| dlogit * w).collect(),
    }
}

/// RMSprop state over the four network parameter groups.
pub struct MlpOptimizer {
    w1: RmspropState,
    b1: RmspropState,
    w2: RmspropState,
    b2: RmspropState,
}

impl MlpOptimizer {
    pub fn new(model: &MlpModel, config: RmspropConfig) -> Self {
        Self {
            w1: RmspropState::new("mlp.w1", model.w1.as_slice().len(), config),
            b1: RmspropState::new("mlp.b1", model.b1.len(), config),
            w2: RmspropState::new("mlp.w2", model.w2.len(), config),
            b2: RmspropState::new("mlp.b2", 1, config),
        }
    }

    pub fn apply(&mut self, model: &mut MlpModel, grads: &MlpGrads) -> Result<()> {
        self.w1
            .update(model.w1.as_mut_slice(), grads.w1.as_slice())?;
        self.b1.update(&mut model.b1, &grads.b1)?;
        self.w2.update(&mut model.w2, &grads.w2)?;
        let mut b2 = [model.b2];
        self.b2.update(&mut b2, &[grads.b2])?;
        model.b2 = b2[0];
        Ok(())
    }
}

/// One SGD step on a single example; returns the example loss.
pub fn train_step(
    model: &mut MlpModel,
    candidates: &[Vec<f64>],
    gold: usize,
    optimizer: &mut MlpOptimizer,
    dropout_p: f64,
    rng: &mut Rng,
) -> Result<f64> {
    let mut mode = ForwardMode::Train { dropout_p, rng };
    let (loss, grads) = candidate_grads(model, candidates, gold, &mut mode)?;
    optimizer.apply(model, &grads)?;
    Ok(loss)
}
