//! Semantic textual similarity and nearest-neighbor analysis.
//!
//! Sentence pairs are scored by the cosine of their encoder vectors and
//! compared to gold human ratings with Pearson and Spearman correlations
//! (Pearson is the primary score).

use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use crate::corpus::tokenize;
use crate::model::NteeModel;
use crate::numerics::cosine;
use crate::vocab::Vocabulary;
use crate::{Error, Result};

/// One evaluation pair with its gold rating in `[1, 5]`.
#[derive(Debug, Clone, PartialEq)]
pub struct StsPair {
    pub sentence_a: String,
    pub sentence_b: String,
    pub gold: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StsReport {
    pub pearson_r: f64,
    pub spearman_rho: f64,
    pub n: usize,
}

/// Cosine similarity of the two sentences' encoder vectors; 0 when either
/// vector is zero. Symmetric, and invariant under token duplication in
/// either sentence.
pub fn pair_score(model: &NteeModel, vocab: &Vocabulary, a: &str, b: &str) -> f64 {
    let encode = |s: &str| {
        let tokens: Vec<usize> = tokenize(s)
            .iter()
            .filter_map(|t| vocab.lookup_word(t))
            .collect();
        model.encode_text(&tokens)
    };
    cosine(&encode(a), &encode(b))
}

fn check_correlation_input(x: &[f64], y: &[f64]) -> Result<()> {
    if x.len() != y.len() {
        return Err(Error::ShapeMismatch(format!(
            "correlation inputs differ in length: {} vs {}",
            x.len(),
            y.len()
        )));
    }
    if x.len() < 2 {
        return Err(Error::InvalidArgument(
            "correlation needs at least 2 observations".to_string(),
        ));
    }
    let constant = |v: &[f64]| v.iter().all(|&a| a == v[0]);
    if constant(x) || constant(y) {
        return Err(Error::InvalidArgument(
            "correlation is undefined for a constant sequence".to_string(),
        ));
    }
    Ok(())
}

/// Pearson's r.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    check_correlation_input(x, y)?;
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let mut num = 0.0;
    let mut dx = 0.0;
    let mut dy = 0.0;
    for (a, b) in x.iter().zip(y) {
        num += (a - mx) * (b - my);
        dx += (a - mx) * (a - mx);
        dy += (b - my) * (b - my);
    }
    Ok(num / (dx * dy).sqrt())
}

/// Average ranks (1-based); tied values share the mean of their positions.
pub fn average_ranks(x: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..x.len()).collect();
    order.sort_by(|&a, &b| x[a].partial_cmp(&x[b]).expect("finite values"));
    let mut ranks = vec![0.0; x.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && x[order[j + 1]] == x[order[i]] {
            j += 1;
        }
        // Positions i..=j (0-based) share the average 1-based rank.
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &idx in &order[i..=j] {
            ranks[idx] = avg;
        }
        i = j + 1;
    }
    ranks
}

/// Spearman's rank correlation: Pearson over average ranks.
pub fn spearman(x: &[f64], y: &[f64]) -> Result<f64> {
    check_correlation_input(x, y)?;
    pearson(&average_ranks(x), &average_ranks(y))
}

/// Scores every pair and correlates the scores with the gold ratings.
pub fn evaluate_sts(model: &NteeModel, vocab: &Vocabulary, pairs: &[StsPair]) -> Result<StsReport> {
    let scores: Vec<f64> = pairs
        .iter()
        .map(|p| pair_score(model, vocab, &p.sentence_a, &p.sentence_b))
        .collect();
    let gold: Vec<f64> = pairs.iter().map(|p| p.gold).collect();
    Ok(StsReport {
        pearson_r: pearson(&scores, &gold)?,
        spearman_rho: spearman(&scores, &gold)?,
        n: pairs.len(),
    })
}

/// Loads tab-separated pairs: `sentence_a TAB sentence_b TAB gold`.
pub fn load_sts_pairs(path: &Path) -> Result<Vec<StsPair>> {
    let reader = BufReader::new(File::open(path)?);
    let label = path.display().to_string();
    let mut pairs = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let bad = |message: String| Error::MalformedRecord {
            path: label.clone(),
            line: idx + 1,
            message,
        };
        let parts: Vec<&str> = line.split('\t').collect();
        if parts.len() != 3 {
            return Err(bad(format!(
                "expected 3 tab-separated fields, got {}",
                parts.len()
            )));
        }
        let gold: f64 = parts[2]
            .parse()
            .map_err(|_| bad(format!("bad rating '{}'", parts[2])))?;
        if !(1.0..=5.0).contains(&gold) {
            return Err(bad(format!("rating {gold} outside [1, 5]")));
        }
        pairs.push(StsPair {
            sentence_a: parts[0].to_string(),
            sentence_b: parts[1].to_string(),
            gold,
        });
    }
    Ok(pairs)
}

/// What a nearest-neighbor query ranges over.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ItemKind {
    Word,
    Entity,
}

impl std::str::FromStr for ItemKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "word" => Ok(Self::Word),
            "entity" => Ok(Self::Entity),
            other => Err(Error::InvalidArgument(format!(
                "kind must be 'word' or 'entity', got '{other}'"
            ))),
        }
    }
}

/// Top `top_n` items of the same kind as the query, ranked by cosine
/// similarity descending (ties broken by id ascending), query excluded.
pub fn nearest_neighbors(
    model: &NteeModel,
    vocab: &Vocabulary,
    kind: ItemKind,
    query: &str,
    top_n: usize,
) -> Result<Vec<(String, f64)>> {
    let (table, query_id, n, name_of): (_, _, _, fn(&Vocabulary, usize) -> &str) = match kind {
        ItemKind::Word => (
            &model.word_emb,
            vocab.lookup_word(query).ok_or_else(|| Error::Unknown {
                kind: "word",
                name: query.to_string(),
            })?,
            vocab.n_words(),
            |v, id| v.word(id),
        ),
        ItemKind::Entity => (
            &model.entity_emb,
            vocab.lookup_entity(query).ok_or_else(|| Error::Unknown {
                kind: "entity",
                name: query.to_string(),
            })?,
            vocab.n_entities(),
            |v, id| v.entity(id),
        ),
    };
    let query_vec = table.row(query_id);
    let mut scored: Vec<(usize, f64)> = (0..n)
        .filter(|&id| id != query_id)
        .map(|id| (id, cosine(query_vec, table.row(id))))
        .collect();
    scored.sort_by(|a, b| {
        b.1.partial_cmp(&a.1)
            .expect("cosines are finite")
            .then(a.0.cmp(&b.0))
    });
    Ok(scored
        .into_iter()
        .take(top_n)
        .map(|(id, cos)| (name_of(vocab, id).to_string(), cos))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{Mat, Rng};

    fn tiny_world() -> (NteeModel, Vocabulary) {
        let docs = vec![crate::corpus::AnnotatedDocument {
            doc_id: "d".to_string(),
            source_entity: None,
            text: "red green blue cyan magenta".to_string(),
            annotations: Vec::new(),
            pseudo_entity: Some("Color".to_string()),
        }];
        let vocab = crate::vocab::build_vocab(&docs, 1, 1).unwrap();
        let model = NteeModel::new(
            vocab.n_words(),
            vocab.n_entities(),
            6,
            &mut Rng::with_seed(8),
        )
        .unwrap();
        (model, vocab)
    }

    #[test]
    fn pair_score_self_similarity_and_symmetry() {
        let (model, vocab) = tiny_world();
        let s = pair_score(&model, &vocab, "red green", "red green");
        assert!((s - 1.0).abs() <= 1e-12);
        let ab = pair_score(&model, &vocab, "red blue", "green cyan");
        let ba = pair_score(&model, &vocab, "green cyan", "red blue");
        assert_eq!(ab, ba);
    }

    #[test]
    fn pair_score_invariant_under_duplication_and_zero_on_zero_vector() {
        let (mut model, vocab) = tiny_world();
        let a = pair_score(&model, &vocab, "red green", "blue");
        let b = pair_score(&model, &vocab, "red green red green", "blue");
        assert!((a - b).abs() <= 1e-12);

        // Zero bias + unknown words -> zero vector -> score 0.
        model.bias = vec![0.0; 6];
        assert_eq!(pair_score(&model, &vocab, "unknownword", "red"), 0.0);
    }

    #[test]
    fn pair_score_orthogonal_vectors_is_zero() {
        let (mut model, vocab) = tiny_world();
        model.projection = Mat::identity(6);
        model.bias = vec![0.0; 6];
        let red = vocab.lookup_word("red").unwrap();
        let blue = vocab.lookup_word("blue").unwrap();
        model
            .word_emb
            .row_mut(red)
            .copy_from_slice(&[1.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        model
            .word_emb
            .row_mut(blue)
            .copy_from_slice(&[0.0, 1.0, 0.0, 0.0, 0.0, 0.0]);
        assert!(pair_score(&model, &vocab, "red", "blue").abs() <= 1e-12);
    }

    #[test]
    fn pearson_hand_values() {
        let x = [1.0, 2.0, 3.0];
        assert!((pearson(&x, &[3.0, 5.0, 7.0]).unwrap() - 1.0).abs() < 1e-12);
        assert!((pearson(&x, &[-1.0, -2.0, -3.0]).unwrap() + 1.0).abs() < 1e-12);
        assert!((pearson(&x, &[1.0, 3.0, 2.0]).unwrap() - 0.5).abs() < 1e-12);
        assert!(pearson(&x, &[2.0, 2.0, 2.0]).is_err());
        assert!(pearson(&x, &[1.0, 2.0]).is_err());
        assert!(pearson(&[1.0], &[1.0]).is_err());
    }

    #[test]
    fn spearman_hand_values_and_tie_ranks() {
        let x = [1.0, 2.0, 3.0];
        assert!((spearman(&x, &[10.0, 20.0, 400.0]).unwrap() - 1.0).abs() < 1e-12);
        assert!((spearman(&x, &[1.0, 3.0, 2.0]).unwrap() - 0.5).abs() < 1e-12);
        assert_eq!(average_ranks(&[1.0, 1.0, 2.0]), vec![1.5, 1.5, 3.0]);
    }

    #[test]
    fn pearson_invariant_under_positive_affine_transform() {
        let x = [0.3, -1.2, 4.4, 2.0, 0.0];
        let y = [1.0, 0.4, -2.0, 3.3, 1.1];
        let r = pearson(&x, &y).unwrap();
        let x2: Vec<f64> = x.iter().map(|v| 3.0 * v + 7.0).collect();
        assert!((pearson(&x2, &y).unwrap() - r).abs() < 1e-12);
        // Spearman invariant under strictly monotone transforms.
        let rho = spearman(&x, &y).unwrap();
        let x3: Vec<f64> = x.iter().map(|v| v.exp()).collect();
        assert!((spearman(&x3, &y).unwrap() - rho).abs() < 1e-12);
    }

    #[test]
    fn evaluate_sts_perfect_affine_agreement() {
        let (model, vocab) = tiny_world();
        let sentences = ["red green", "blue cyan", "magenta red", "green blue"];
        let mut pairs = Vec::new();
        for (i, a) in sentences.iter().enumerate() {
            let b = sentences[(i + 1) % sentences.len()];
            let score = pair_score(&model, &vocab, a, b);
            pairs.push(StsPair {
                sentence_a: a.to_string(),
                sentence_b: b.to_string(),
                // Affine transform with positive slope into [1, 5].
                gold: 3.0 + score,
            });
        }
        let report = evaluate_sts(&model, &vocab, &pairs).unwrap();
        assert!((report.pearson_r - 1.0).abs() < 1e-12);
        assert_eq!(report.n, 4);
    }

    #[test]
    fn sts_loader_validates_ratings() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("pairs.tsv");
        std::fs::write(&path, "a b\tc d\t4.5\ne f\tg h\t1\n").unwrap();
        let pairs = load_sts_pairs(&path).unwrap();
        assert_eq!(pairs.len(), 2);
        assert_eq!(pairs[0].gold, 4.5);

        std::fs::write(&path, "a\tb\t9.0\n").unwrap();
        assert!(load_sts_pairs(&path).is_err());
        std::fs::write(&path, "only two fields\t1.0\n").unwrap();
        assert!(load_sts_pairs(&path).is_err());
    }

    #[test]
    fn neighbors_duplicate_vector_ranks_first_and_top0_is_empty() {
        let (mut model, vocab) = tiny_world();
        let red = vocab.lookup_word("red").unwrap();
        let green = vocab.lookup_word("green").unwrap();
        let dup = model.word_emb.row(red).to_vec();
        model.word_emb.row_mut(green).copy_from_slice(&dup);
        let out = nearest_neighbors(&model, &vocab, ItemKind::Word, "red", 2).unwrap();
        assert_eq!(out[0].0, "green");
        assert!((out[0].1 - 1.0).abs() < 1e-12);
        assert!(nearest_neighbors(&model, &vocab, ItemKind::Word, "red", 0)
            .unwrap()
            .is_empty());
        assert!(nearest_neighbors(&model, &vocab, ItemKind::Word, "nope", 3).is_err());
    }

    #[test]
    fn neighbors_match_brute_force_scan() {
        let (model, vocab) = tiny_world();
        let query = "red";
        let qid = vocab.lookup_word(query).unwrap();
        let out =
            nearest_neighbors(&model, &vocab, ItemKind::Word, query, vocab.n_words()).unwrap();
        // Brute force oracle: exhaustive cosine scan with the same tie rule.
        let mut expected: Vec<(usize, f64)> = (0..vocab.n_words())
            .filter(|&id| id != qid)
            .map(|id| (id, cosine(model.word_emb.row(qid), model.word_emb.row(id))))
            .collect();
        expected.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
        assert_eq!(out.len(), expected.len());
        for ((name, cos), (id, ecos)) in out.iter().zip(&expected) {
            assert_eq!(name, vocab.word(*id));
            assert_eq!(cos, ecos);
        }
    }
}
