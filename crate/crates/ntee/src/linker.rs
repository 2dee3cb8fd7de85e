//! Entity linking: mention dictionary construction, candidate generation,
//! linking features, MLP disambiguation, and micro/macro accuracy.
//!
//! Candidate generation maps a lowercased mention surface to a
//! popularity-ranked list of entities collected from entity titles,
//! redirect titles, anchor names, and title tokens. Disambiguation scores
//! each candidate with the shared [`crate::mlp`] network over embedding
//! and statistics features; the encoder parameters stay frozen throughout.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::{tokenize, AnchorStats, AnnotatedDocument};
use crate::mlp::{
    candidate_grads, predict, ForwardMode, MlpConfig, MlpGrads, MlpModel, MlpOptimizer,
};
use crate::model::NteeModel;
use crate::numerics::{dot, l2_norm, Rng};
use crate::vocab::Vocabulary;
use crate::{Error, Result};

pub const DEFAULT_MAX_CANDIDATES: usize = 100;

/// A mention to disambiguate, with its gold entity for training and
/// evaluation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Mention {
    pub doc_id: String,
    pub surface: String,
    pub start: usize,
    pub end: usize,
    pub gold_entity: String,
}

/// Surface-to-candidates dictionary. Candidate lists are sorted by entity
/// popularity descending (ties by title ascending) and truncated to
/// `max_candidates`. `redirects` and `titles` are build-time inputs kept
/// for inspection; only the candidate lists persist to disk.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MentionDictionary {
    candidates: BTreeMap<String, Vec<(String, f64)>>,
    pub redirects: HashMap<String, String>,
    pub titles: BTreeSet<String>,
}

/// `log(|anchors pointing to e| + 1)`; 0 for an entity never anchored.
pub fn entity_popularity(stats: &AnchorStats, entity: &str) -> f64 {
    let count = stats.entity_counts.get(entity).copied().unwrap_or(0);
    ((count + 1) as f64).ln()
}

/// Fraction of the surface's anchors that point to the entity; 0 when the
/// surface was never an anchor. Sums to 1 over entities for any seen
/// surface.
pub fn prior_probability(stats: &AnchorStats, surface: &str, entity: &str) -> f64 {
    let surface = surface.to_lowercase();
    let total = stats.surface_counts.get(&surface).copied().unwrap_or(0);
    if total == 0 {
        return 0.0;
    }
    let hits = stats
        .pair_counts
        .get(&(surface, entity.to_string()))
        .copied()
        .unwrap_or(0);
    hits as f64 / total as f64
}

/// Strips one trailing parenthetical disambiguator: "Epic (genre)" -> "Epic".
fn strip_parenthetical(title: &str) -> &str {
    match title.rfind(" (") {
        Some(i) if title.ends_with(')') => &title[..i],
        _ => title,
    }
}

/// Builds the surface dictionary from (entity, title) pairs, redirects, and
/// anchor statistics. Surfaces come from (1) entity titles, (2) redirect
/// titles, (3) anchor names, plus the tokens of each title (parenthetical
/// disambiguators dropped, tokens shorter than 2 characters skipped).
pub fn build_mention_dictionary(
    kb_titles: &[(String, String)],
    redirects: &HashMap<String, String>,
    stats: &AnchorStats,
    max_candidates: usize,
) -> MentionDictionary {
    let mut surfaces: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
    let mut add = |surface: String, entity: &str| {
        if !surface.is_empty() {
            surfaces
                .entry(surface)
                .or_default()
                .insert(entity.to_string());
        }
    };
    let mut titles = BTreeSet::new();
    for (entity, title) in kb_titles {
        titles.insert(title.clone());
        add(title.to_lowercase(), entity);
        for token in tokenize(strip_parenthetical(title)) {
            if token.chars().count() >= 2 {
                add(token, entity);
            }
        }
    }
    for (alias, canonical) in redirects {
        add(alias.to_lowercase(), canonical);
    }
    for (surface, entity) in stats.pair_counts.keys() {
        add(surface.clone(), entity);
    }

    let candidates = surfaces
        .into_iter()
        .map(|(surface, entities)| {
            let mut list: Vec<(String, f64)> = entities
                .into_iter()
                .map(|e| {
                    let pop = entity_popularity(stats, &e);
                    (e, pop)
                })
                .collect();
            list.sort_by(|a, b| {
                b.1.partial_cmp(&a.1)
                    .expect("popularity is finite")
                    .then_with(|| a.0.cmp(&b.0))
            });
            list.truncate(max_candidates);
            (surface, list)
        })
        .collect();
    MentionDictionary {
        candidates,
        redirects: redirects.clone(),
        titles,
    }
}

/// Candidate entities for a mention: dictionary lookup on the lowercased
/// surface, empty when absent.
pub fn generate_candidates<'d>(
    dict: &'d MentionDictionary,
    mention: &Mention,
) -> &'d [(String, f64)] {
    dict.candidates
        .get(&mention.surface.to_lowercase())
        .map(Vec::as_slice)
        .unwrap_or(&[])
}

impl MentionDictionary {
    pub fn n_surfaces(&self) -> usize {
        self.candidates.len()
    }

    pub fn candidates_for(&self, surface: &str) -> &[(String, f64)] {
        self.candidates
            .get(&surface.to_lowercase())
            .map(Vec::as_slice)
            .unwrap_or(&[])
    }

    /// Sorted text persistence: `surface TAB entity TAB popularity`, one
    /// candidate per line, list order preserved.
    pub fn save(&self, path: &Path) -> Result<()> {
        let mut out = BufWriter::new(File::create(path)?);
        for (surface, list) in &self.candidates {
            for (entity, pop) in list {
                writeln!(out, "{surface}\t{entity}\t{pop}")?;
            }
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let reader = BufReader::new(File::open(path)?);
        let label = path.display().to_string();
        let mut dict = MentionDictionary::default();
        for (idx, line) in reader.lines().enumerate() {
            let line = line?;
            if line.is_empty() {
                continue;
            }
            let parts: Vec<&str> = line.split('\t').collect();
            let bad = |message: String| Error::MalformedRecord {
                path: label.clone(),
                line: idx + 1,
                message,
            };
            if parts.len() != 3 {
                return Err(bad(format!("expected 3 fields, got {}", parts.len())));
            }
            let pop: f64 = parts[2]
                .parse()
                .map_err(|_| bad(format!("bad popularity '{}'", parts[2])))?;
            dict.candidates
                .entry(parts[0].to_string())
                .or_default()
                .push((parts[1].to_string(), pop));
        }
        Ok(dict)
    }
}

/// String-similarity flags between an entity title and a mention surface,
/// case-folded: exact equality, title contains surface, title starts with
/// surface, title ends with surface.
pub fn strsim_flags(title: &str, surface: &str) -> [bool; 4] {
    let t = title.to_lowercase();
    let s = surface.to_lowercase();
    [t == s, t.contains(&s), t.starts_with(&s), t.ends_with(&s)]
}

/// Everything the linker needs besides the network itself. The encoder is
/// borrowed immutably: entity linking never updates it.
pub struct ElPipeline<'a> {
    pub model: &'a NteeModel,
    pub vocab: &'a Vocabulary,
    pub dict: &'a MentionDictionary,
    pub stats: &'a AnchorStats,
    pub use_strsim: bool,
}

impl ElPipeline<'_> {
    /// Normalized entity vector, document vector, their dot product, three
    /// statistics features, and optionally four string-similarity flags.
    pub fn feature_dim(&self) -> usize {
        2 * self.model.dim() + 1 + 3 + if self.use_strsim { 4 } else { 0 }
    }

    fn doc_tokens(&self, doc: &AnnotatedDocument) -> Vec<usize> {
        tokenize(&doc.text)
            .iter()
            .filter_map(|t| self.vocab.lookup_word(t))
            .collect()
    }

    /// Feature vector of one candidate for one mention. The document
    /// vector is the encoder applied to the entire document's tokens; a
    /// candidate outside the entity vocabulary contributes a zero vector
    /// and a zero dot product.
    pub fn build_feature_vector(
        &self,
        doc_tokens: &[usize],
        doc_mentions: &[&Mention],
        mention: &Mention,
        candidate: &str,
    ) -> Vec<f64> {
        let d = self.model.dim();
        let text_vec = self.model.encode_text(doc_tokens);
        let mut features = Vec::with_capacity(self.feature_dim());
        match self.vocab.lookup_entity(candidate) {
            Some(eid) => {
                let row = self.model.entity_emb.row(eid);
                let norm = l2_norm(row);
                if norm > 0.0 {
                    features.extend(row.iter().map(|x| x / norm));
                } else {
                    features.extend(std::iter::repeat_n(0.0, d));
                }
            }
            None => features.extend(std::iter::repeat_n(0.0, d)),
        }
        features.extend_from_slice(&text_vec);
        let dot_feature = dot(&features[..d], &text_vec);
        features.push(dot_feature);
        features.push(entity_popularity(self.stats, candidate));
        features.push(prior_probability(self.stats, &mention.surface, candidate));
        let max_prior = doc_mentions
            .iter()
            .map(|m| prior_probability(self.stats, &m.surface, candidate))
            .fold(0.0, f64::max);
        features.push(max_prior);
        if self.use_strsim {
            for flag in strsim_flags(candidate, &mention.surface) {
                features.push(if flag { 1.0 } else { 0.0 });
            }
        }
        features
    }
}

struct ElExample {
    doc_id: String,
    features: Vec<Vec<f64>>,
    gold_idx: Option<usize>,
}

#[derive(Debug, Clone, Default)]
pub struct ElTrainReport {
    /// Training mentions skipped because the candidates miss the gold.
    pub skipped: usize,
    /// Epoch whose checkpoint is returned (0-based); ties go to the later
    /// epoch.
    pub best_epoch: usize,
    pub best_dev_micro: Option<f64>,
    pub epoch_losses: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ElEvalReport {
    /// Accuracy aggregated over all mentions.
    pub micro: f64,
    /// Mean over documents of per-document accuracy.
    pub macro_: f64,
    pub n_mentions: usize,
    pub n_docs: usize,
}

fn index_docs(docs: &[AnnotatedDocument]) -> HashMap<&str, &AnnotatedDocument> {
    docs.iter().map(|d| (d.doc_id.as_str(), d)).collect()
}

fn mentions_by_doc(mentions: &[Mention]) -> BTreeMap<&str, Vec<&Mention>> {
    let mut by_doc: BTreeMap<&str, Vec<&Mention>> = BTreeMap::new();
    for m in mentions {
        by_doc.entry(m.doc_id.as_str()).or_default().push(m);
    }
    by_doc
}

fn build_examples(
    pipeline: &ElPipeline,
    docs: &[AnnotatedDocument],
    mentions: &[Mention],
    require_gold: bool,
) -> Result<(Vec<ElExample>, usize)> {
    let doc_index = index_docs(docs);
    let by_doc = mentions_by_doc(mentions);
    let mut examples = Vec::new();
    let mut skipped = 0;
    for (doc_id, doc_mentions) in &by_doc {
        let doc = doc_index.get(doc_id).ok_or_else(|| Error::Unknown {
            kind: "document",
            name: doc_id.to_string(),
        })?;
        let doc_tokens = pipeline.doc_tokens(doc);
        for mention in doc_mentions {
            let candidates = generate_candidates(pipeline.dict, mention);
            let gold_idx = candidates
                .iter()
                .position(|(e, _)| e == &mention.gold_entity);
            if require_gold && gold_idx.is_none() {
                skipped += 1;
                continue;
            }
            let features: Vec<Vec<f64>> = candidates
                .iter()
                .map(|(e, _)| pipeline.build_feature_vector(&doc_tokens, doc_mentions, mention, e))
                .collect();
            examples.push(ElExample {
                doc_id: doc_id.to_string(),
                features,
                gold_idx,
            });
        }
    }
    Ok((examples, skipped))
}

/// Trains the disambiguation network over candidate feature vectors with
/// mini-batch SGD under RMSprop. Mentions whose candidate list misses the
/// gold are skipped and counted. When a dev set is given, the checkpoint
/// with the best dev micro-accuracy is returned.
pub fn train_linker(
    pipeline: &ElPipeline,
    docs: &[AnnotatedDocument],
    train_mentions: &[Mention],
    dev_mentions: Option<&[Mention]>,
    config: &MlpConfig,
    rng: &mut Rng,
) -> Result<(MlpModel, ElTrainReport)> {
    let (examples, skipped) = build_examples(pipeline, docs, train_mentions, true)?;
    if examples.is_empty() {
        return Err(Error::InvalidArgument(
            "no trainable mentions: every gold entity is missing from its candidates".to_string(),
        ));
    }
    let mut model = MlpModel::new(config.hidden_units, pipeline.feature_dim(), rng)?;
    let mut optimizer = MlpOptimizer::new(&model, config.optimizer);
    let mut report = ElTrainReport {
        skipped,
        ..Default::default()
    };
    let mut best: Option<(f64, MlpModel)> = None;
    for epoch in 0..config.epochs {
        let mut order: Vec<usize> = (0..examples.len()).collect();
        rng.shuffle(&mut order);
        let mut epoch_loss = 0.0;
        for batch in order.chunks(config.batch_size.max(1)) {
            let mut batch_grads: Option<MlpGrads> = None;
            for &i in batch {
                let ex = &examples[i];
                let gold = ex.gold_idx.expect("filtered above");
                let mut mode = ForwardMode::Train {
                    dropout_p: config.dropout_p,
                    rng,
                };
                let (loss, grads) = candidate_grads(&model, &ex.features, gold, &mut mode)?;
                epoch_loss += loss;
                match &mut batch_grads {
                    Some(acc) => acc.accumulate(&grads),
                    None => batch_grads = Some(grads),
                }
            }
            if let Some(grads) = batch_grads {
                optimizer.apply(&mut model, &grads)?;
            }
        }
        report.epoch_losses.push(epoch_loss);
        if let Some(dev) = dev_mentions {
            let dev_report = evaluate_linker(pipeline, &model, docs, dev)?;
            let better = best
                .as_ref()
                .map(|(acc, _)| dev_report.micro >= *acc)
                .unwrap_or(true);
            if better {
                best = Some((dev_report.micro, model.clone()));
                report.best_epoch = epoch;
                report.best_dev_micro = Some(dev_report.micro);
            }
        } else {
            report.best_epoch = epoch;
        }
    }
    if let Some((_, checkpoint)) = best {
        model = checkpoint;
    }
    Ok((model, report))
}

/// Micro accuracy over all mentions and macro accuracy over documents.
/// A mention with no candidates counts as wrong.
pub fn evaluate_linker(
    pipeline: &ElPipeline,
    mlp: &MlpModel,
    docs: &[AnnotatedDocument],
    mentions: &[Mention],
) -> Result<ElEvalReport> {
    if mentions.is_empty() {
        return Err(Error::InvalidArgument(
            "evaluation needs at least one mention".to_string(),
        ));
    }
    let (examples, _) = build_examples(pipeline, docs, mentions, false)?;
    let mut correct_total = 0usize;
    let mut per_doc: BTreeMap<&str, (usize, usize)> = BTreeMap::new();
    for ex in &examples {
        // Correct iff a prediction exists and lands on the gold candidate;
        // mentions with no candidates or an out-of-candidates gold are wrong.
        let correct = if ex.features.is_empty() {
            false
        } else {
            let (idx, _) = predict(mlp, &ex.features)?;
            ex.gold_idx == Some(idx)
        };
        let entry = per_doc.entry(ex.doc_id.as_str()).or_insert((0, 0));
        entry.1 += 1;
        if correct {
            entry.0 += 1;
            correct_total += 1;
        }
    }
    let n_docs = per_doc.len();
    let macro_ = per_doc
        .values()
        .map(|(c, n)| *c as f64 / *n as f64)
        .sum::<f64>()
        / n_docs as f64;
    Ok(ElEvalReport {
        micro: correct_total as f64 / examples.len() as f64,
        macro_,
        n_mentions: examples.len(),
        n_docs,
    })
}

/// Loads line-delimited mention records.
pub fn load_mentions(path: &Path) -> Result<Vec<Mention>> {
    let reader = BufReader::new(File::open(path)?);
    let label = path.display().to_string();
    let mut mentions = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let mention: Mention = serde_json::from_str(&line).map_err(|e| Error::MalformedRecord {
            path: label.clone(),
            line: idx + 1,
            message: e.to_string(),
        })?;
        mentions.push(mention);
    }
    Ok(mentions)
}

pub fn save_mentions(path: &Path, mentions: &[Mention]) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    for m in mentions {
        serde_json::to_writer(&mut out, m).map_err(|e| Error::InvalidArgument(e.to_string()))?;
        writeln!(out)?;
    }
    Ok(())
}
