//! Skip-gram with negative sampling over the entity-replaced token stream.
//!
//! Each annotated span in a document is replaced by a single entity token;
//! the rest of the text tokenizes to word tokens. Training the standard
//! skip-gram objective over this mixed stream produces word and entity
//! vectors in one space, which initialize the joint encoder.
//!
//! Negatives here are drawn from the unigram distribution raised to the
//! 3/4 power, the usual skip-gram choice. The joint encoder's own negative
//! sampling is uniform; the two must not be confused.

use std::sync::atomic::{AtomicU64, Ordering};

use crate::corpus::{tokenize_spans, AnnotatedDocument};
use crate::numerics::{axpy, dot, l2_norm, sigmoid, Mat, Rng};
use crate::vocab::Vocabulary;
use crate::{Error, Result};

/// Skip-gram hyperparameters. Defaults: window 10, 5 negatives, 300
/// dimensions, 5 epochs, initial learning rate 0.025 with linear decay,
/// no subsampling.
#[derive(Debug, Clone, PartialEq)]
pub struct SkipgramConfig {
    pub window: usize,
    pub negatives: usize,
    pub dim: usize,
    pub epochs: usize,
    /// Initial learning rate; decays linearly to 1e-4 of itself over
    /// training.
    pub learning_rate: f64,
    /// Frequent-word subsampling threshold; off when `None`.
    pub subsample_threshold: Option<f64>,
}

impl Default for SkipgramConfig {
    fn default() -> Self {
        Self {
            window: 10,
            negatives: 5,
            dim: 300,
            epochs: 5,
            learning_rate: 0.025,
            subsample_threshold: None,
        }
    }
}

impl SkipgramConfig {
    fn validate(&self) -> Result<()> {
        if self.window == 0 || self.negatives == 0 || self.dim == 0 || self.epochs == 0 {
            return Err(Error::InvalidArgument(
                "skip-gram window, negatives, dim, and epochs must all be >= 1".to_string(),
            ));
        }
        Ok(())
    }
}

/// Input and output vector tables over the unified vocabulary
/// (words first, then entities), one row per type.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    pub input_vectors: Mat,
    pub output_vectors: Mat,
}

/// Token-id sequences, one per document, with each annotation span replaced
/// by its entity id (unified id space). Out-of-vocabulary words and
/// entities are dropped; words covered by an annotation are consumed by the
/// replacement either way. Pseudo-annotations have no span and never appear
/// in the stream.
pub fn entity_replaced_stream(docs: &[AnnotatedDocument], vocab: &Vocabulary) -> Vec<Vec<usize>> {
    docs.iter()
        .map(|doc| {
            // (position, unified id) events, later sorted by position.
            let mut events: Vec<(usize, usize)> = Vec::new();
            for ann in &doc.annotations {
                if let Some(eid) = vocab.lookup_entity(&ann.entity) {
                    events.push((ann.start, vocab.unified_entity_id(eid)));
                }
            }
            for (token, start, end) in tokenize_spans(&doc.text) {
                let covered = doc
                    .annotations
                    .iter()
                    .any(|a| a.start < end && start < a.end);
                if !covered {
                    if let Some(wid) = vocab.lookup_word(&token) {
                        events.push((start, wid));
                    }
                }
            }
            events.sort_by_key(|&(pos, _)| pos);
            events.into_iter().map(|(_, id)| id).collect()
        })
        .collect()
}

/// The (center, context) pairs one training pass generates for a sequence.
/// The context radius is drawn uniformly in `1..=window` per center, as in
/// standard skip-gram training.
pub fn context_pairs(seq: &[usize], window: usize, rng: &mut Rng) -> Vec<(usize, usize)> {
    let mut pairs = Vec::new();
    for (i, &center) in seq.iter().enumerate() {
        let radius = 1 + rng.below(window);
        let lo = i.saturating_sub(radius);
        let hi = (i + radius + 1).min(seq.len());
        for (j, &ctx) in seq.iter().enumerate().take(hi).skip(lo) {
            if j != i {
                pairs.push((center, ctx));
            }
        }
    }
    pairs
}

/// Loss of one skip-gram pair:
/// `-log s(center . ctx) - sum_neg log s(-(center . neg))`.
pub fn sgns_pair_loss(center: &[f64], context: &[f64], negatives: &[&[f64]]) -> f64 {
    let mut loss = -sigmoid(dot(center, context)).ln();
    for neg in negatives {
        loss -= sigmoid(-dot(center, neg)).ln();
    }
    loss
}

/// Analytic gradients of [`sgns_pair_loss`] with respect to the center
/// vector, the context output vector, and each negative output vector.
pub fn sgns_pair_grads(
    center: &[f64],
    context: &[f64],
    negatives: &[&[f64]],
) -> (Vec<f64>, Vec<f64>, Vec<Vec<f64>>) {
    let d = center.len();
    let mut g_center = vec![0.0; d];
    // d/ds of -log s(s) is s(s) - 1.
    let coeff = sigmoid(dot(center, context)) - 1.0;
    axpy(&mut g_center, coeff, context);
    let g_context: Vec<f64> = center.iter().map(|c| coeff * c).collect();
    let mut g_negatives = Vec::with_capacity(negatives.len());
    for neg in negatives {
        // d/ds of -log s(-s) is s(s).
        let coeff = sigmoid(dot(center, neg));
        axpy(&mut g_center, coeff, neg);
        g_negatives.push(center.iter().map(|c| coeff * c).collect());
    }
    (g_center, g_context, g_negatives)
}

/// Cumulative distribution over unified ids proportional to
/// `count(stream)^(3/4)`.
struct NegativeTable {
    cdf: Vec<f64>,
}

impl NegativeTable {
    fn from_stream(stream: &[Vec<usize>], n_vocab: usize) -> Result<Self> {
        let mut counts = vec![0u64; n_vocab];
        for seq in stream {
            for &id in seq {
                counts[id] += 1;
            }
        }
        let mut cdf = Vec::with_capacity(n_vocab);
        let mut total = 0.0;
        for &c in &counts {
            total += (c as f64).powf(0.75);
            cdf.push(total);
        }
        if total <= 0.0 {
            return Err(Error::InvalidArgument(
                "empty token stream: nothing to train skip-gram on".to_string(),
            ));
        }
        Ok(Self { cdf })
    }

    fn draw(&self, rng: &mut Rng) -> usize {
        let total = *self.cdf.last().unwrap();
        let u = rng.next_f64() * total;
        self.cdf
            .partition_point(|&c| c <= u)
            .min(self.cdf.len() - 1)
    }

    /// Draw a negative, redrawing while it collides with the positive.
    fn draw_excluding(&self, rng: &mut Rng, positive: usize) -> usize {
        loop {
            let id = self.draw(rng);
            if id != positive {
                return id;
            }
        }
    }
}

fn subsample(
    seq: &[usize],
    threshold: f64,
    counts: &[u64],
    total: u64,
    rng: &mut Rng,
) -> Vec<usize> {
    seq.iter()
        .copied()
        .filter(|&id| {
            let f = counts[id] as f64;
            let k = threshold * total as f64;
            let keep = ((f / k).sqrt() + 1.0) * k / f;
            keep >= rng.next_f64()
        })
        .collect()
}

/// Trains skip-gram with negative sampling over the stream. Deterministic:
/// a fixed seed and single-threaded execution reproduce the tables bit for
/// bit. Input vectors start uniform in `[-0.5/d, 0.5/d)`, output vectors at
/// zero.
pub fn train_skipgram(
    stream: &[Vec<usize>],
    vocab: &Vocabulary,
    config: &SkipgramConfig,
    rng: &mut Rng,
) -> Result<EmbeddingTable> {
    config.validate()?;
    let n = vocab.len();
    let d = config.dim;
    let table = NegativeTable::from_stream(stream, n)?;
    let mut counts = vec![0u64; n];
    for seq in stream {
        for &id in seq {
            counts[id] += 1;
        }
    }
    let total_tokens: u64 = counts.iter().sum();

    let mut input = Mat::from_fn(n, d, |_, _| rng.uniform(-0.5 / d as f64, 0.5 / d as f64));
    let mut output = Mat::zeros(n, d);

    let schedule_total = (config.epochs as u64 * total_tokens).max(1) as f64;
    let mut processed = 0u64;
    for _epoch in 0..config.epochs {
        for seq in stream {
            let sen = match config.subsample_threshold {
                Some(t) => subsample(seq, t, &counts, total_tokens, rng),
                None => seq.clone(),
            };
            let pairs = context_pairs(&sen, config.window, rng);
            for (center, ctx) in pairs {
                let alpha =
                    config.learning_rate * (1.0 - processed as f64 / schedule_total).max(1e-4);
                let negs: Vec<usize> = (0..config.negatives)
                    .map(|_| table.draw_excluding(rng, ctx))
                    .collect();
                let neg_rows: Vec<&[f64]> = negs.iter().map(|&id| output.row(id)).collect();
                let (g_center, g_ctx, g_negs) =
                    sgns_pair_grads(input.row(center), output.row(ctx), &neg_rows);
                drop(neg_rows);
                axpy(output.row_mut(ctx), -alpha, &g_ctx);
                for (&id, g) in negs.iter().zip(&g_negs) {
                    axpy(output.row_mut(id), -alpha, g);
                }
                axpy(input.row_mut(center), -alpha, &g_center);
            }
            processed += seq.len() as u64;
        }
    }
    Ok(EmbeddingTable {
        input_vectors: input,
        output_vectors: output,
    })
}

/// L2-normalizes every entity row of the input vectors in place; zero rows
/// stay zero and word rows are untouched. Applied before the table is used
/// as a pre-trained initialization.
pub fn normalize_entity_rows(table: &mut EmbeddingTable, vocab: &Vocabulary) {
    for e in 0..vocab.n_entities() {
        let row = table.input_vectors.row_mut(vocab.unified_entity_id(e));
        let norm = l2_norm(row);
        if norm > 0.0 {
            for x in row {
                *x /= norm;
            }
        }
    }
}

/// f64 cell updated with relaxed atomics; the lock-free parallel trainer
/// tolerates lost updates the way word2vec does.
struct AtomicF64(AtomicU64);

impl AtomicF64 {
    fn new(v: f64) -> Self {
        Self(AtomicU64::new(v.to_bits()))
    }

    fn get(&self) -> f64 {
        f64::from_bits(self.0.load(Ordering::Relaxed))
    }

    fn add(&self, x: f64) {
        let v = self.get() + x;
        self.0.store(v.to_bits(), Ordering::Relaxed);
    }
}

/// Lock-free multi-threaded skip-gram training. Workers update the shared
/// tables without synchronization, so results are NOT deterministic; use
/// [`train_skipgram`] when reproducibility matters.
pub fn train_skipgram_parallel(
    stream: &[Vec<usize>],
    vocab: &Vocabulary,
    config: &SkipgramConfig,
    rng: &mut Rng,
    n_threads: usize,
) -> Result<EmbeddingTable> {
    config.validate()?;
    if n_threads <= 1 {
        return train_skipgram(stream, vocab, config, rng);
    }
    let n = vocab.len();
    let d = config.dim;
    let table = NegativeTable::from_stream(stream, n)?;
    let mut counts = vec![0u64; n];
    for seq in stream {
        for &id in seq {
            counts[id] += 1;
        }
    }
    let total_tokens: u64 = counts.iter().sum();

    let input: Vec<AtomicF64> = (0..n * d)
        .map(|_| AtomicF64::new(rng.uniform(-0.5 / d as f64, 0.5 / d as f64)))
        .collect();
    let output: Vec<AtomicF64> = (0..n * d).map(|_| AtomicF64::new(0.0)).collect();
    let seeds: Vec<u64> = (0..n_threads).map(|_| rng.next_u64()).collect();

    let schedule_total = (config.epochs as u64 * total_tokens).max(1) as f64;
    let processed = AtomicU64::new(0);

    let chunk = stream.len().div_ceil(n_threads);
    std::thread::scope(|scope| {
        for (tid, part) in stream.chunks(chunk.max(1)).enumerate() {
            let input = &input;
            let output = &output;
            let table = &table;
            let counts = &counts;
            let processed = &processed;
            let seed = seeds[tid];
            scope.spawn(move || {
                let mut rng = Rng::with_seed(seed);
                let read_row = |cells: &[AtomicF64], id: usize| -> Vec<f64> {
                    cells[id * d..(id + 1) * d]
                        .iter()
                        .map(AtomicF64::get)
                        .collect()
                };
                for _epoch in 0..config.epochs {
                    for seq in part {
                        let sen = match config.subsample_threshold {
                            Some(t) => subsample(seq, t, counts, total_tokens, &mut rng),
                            None => seq.clone(),
                        };
                        for (center, ctx) in context_pairs(&sen, config.window, &mut rng) {
                            let done = processed.load(Ordering::Relaxed);
                            let alpha = config.learning_rate
                                * (1.0 - done as f64 / schedule_total).max(1e-4);
                            let negs: Vec<usize> = (0..config.negatives)
                                .map(|_| table.draw_excluding(&mut rng, ctx))
                                .collect();
                            let v_center = read_row(input, center);
                            let u_ctx = read_row(output, ctx);
                            let neg_rows: Vec<Vec<f64>> =
                                negs.iter().map(|&id| read_row(output, id)).collect();
                            let neg_refs: Vec<&[f64]> =
                                neg_rows.iter().map(Vec::as_slice).collect();
                            let (g_center, g_ctx, g_negs) =
                                sgns_pair_grads(&v_center, &u_ctx, &neg_refs);
                            for (k, g) in g_ctx.iter().enumerate() {
                                output[ctx * d + k].add(-alpha * g);
                            }
                            for (&id, g) in negs.iter().zip(&g_negs) {
                                for (k, gk) in g.iter().enumerate() {
                                    output[id * d + k].add(-alpha * gk);
                                }
                            }
                            for (k, g) in g_center.iter().enumerate() {
                                input[center * d + k].add(-alpha * g);
                            }
                        }
                        processed.fetch_add(seq.len() as u64, Ordering::Relaxed);
                    }
                }
            });
        }
    });

    let to_mat = |cells: Vec<AtomicF64>| {
        Mat::from_vec(n, d, cells.into_iter().map(|c| c.get()).collect()).expect("sized above")
    };
    Ok(EmbeddingTable {
        input_vectors: to_mat(input),
        output_vectors: to_mat(output),
    })
}
