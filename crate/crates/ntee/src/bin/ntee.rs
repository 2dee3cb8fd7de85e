//! Command-line pipeline driver. All logic lives in the library; this
//! binary parses flags, resolves configuration (defaults < config file <
//! explicit flags), and wires files to library calls.
//!
//! Progress and the resolved configuration go to stderr; results go to
//! stdout as `key=value` lines. Every command is reproducible from
//! (config, seed, inputs).

use std::collections::BTreeMap;
use std::fmt::Display;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Parser, Subcommand};

use ntee::corpus::{self, Granularity};
use ntee::linker::{self, ElPipeline};
use ntee::mlp::MlpConfig;
use ntee::model::{self, NteeTrainConfig};
use ntee::model_io;
use ntee::numerics::{RmspropConfig, Rng};
use ntee::pretrain::{self, SkipgramConfig};
use ntee::qa::{self, QaTrainConfig, Split};
use ntee::similarity::{self, ItemKind};
use ntee::vocab::{self, Vocabulary};
use ntee::{Error, Result};

#[derive(Parser)]
#[command(
    name = "ntee",
    version,
    about = "Joint text and entity embeddings: training and evaluation pipelines",
    subcommand_required = true,
    arg_required_else_help = true
)]
struct Cli {
    /// Seed for every random choice the command makes.
    #[arg(long, global = true, default_value_t = 42)]
    seed: u64,

    /// key=value config file; explicit flags override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Worker threads. Only skip-gram pre-training uses more than one, and
    /// its parallel mode is not deterministic.
    #[arg(long, global = true, default_value_t = 1)]
    threads: usize,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build the word/entity vocabulary from an annotated corpus.
    BuildVocab {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        output: PathBuf,
        /// Minimum word frequency (default 5).
        #[arg(long)]
        min_word_count: Option<u64>,
        /// Minimum entity frequency (default 3).
        #[arg(long)]
        min_entity_count: Option<u64>,
    },
    /// Pre-train word and entity vectors with skip-gram negative sampling.
    Pretrain {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        vocab: PathBuf,
        #[arg(long)]
        output: PathBuf,
        /// Embedding dimension (default 300).
        #[arg(long)]
        dim: Option<usize>,
        /// Context window (default 10).
        #[arg(long)]
        window: Option<usize>,
        /// Negative samples per pair (default 5).
        #[arg(long)]
        negatives: Option<usize>,
        /// Epochs (default 5).
        #[arg(long)]
        epochs: Option<usize>,
        /// Initial learning rate (default 0.025, linear decay).
        #[arg(long)]
        learning_rate: Option<f64>,
        /// Frequent-word subsampling threshold (off by default).
        #[arg(long)]
        subsample: Option<f64>,
        /// Also write a text export of the vectors.
        #[arg(long)]
        text_export: Option<PathBuf>,
    },
    /// Train the joint text-entity model.
    Train {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        vocab: PathBuf,
        #[arg(long)]
        output: PathBuf,
        /// Pre-trained embeddings file; cold random init when absent.
        #[arg(long)]
        init_embeddings: Option<PathBuf>,
        /// Embedding dimension for cold init (default 300).
        #[arg(long)]
        dim: Option<usize>,
        /// Negatives per positive (default 30).
        #[arg(long)]
        negatives: Option<usize>,
        /// Mini-batch size (default 100).
        #[arg(long)]
        batch_size: Option<usize>,
        /// Epochs (default 1).
        #[arg(long)]
        epochs: Option<usize>,
        /// sentence | paragraph (default sentence).
        #[arg(long)]
        granularity: Option<String>,
        /// Freeze both embedding tables; train only the affine layer.
        #[arg(long)]
        fixed: bool,
        /// RMSprop learning rate (default 0.01).
        #[arg(long)]
        learning_rate: Option<f64>,
    },
    /// Score sentence pairs and report Pearson/Spearman against gold.
    EvalSts {
        #[arg(long)]
        model: PathBuf,
        /// TSV: sentence_a TAB sentence_b TAB rating.
        #[arg(long)]
        pairs: PathBuf,
        /// Also dump per-pair scores.
        #[arg(long)]
        dump: bool,
    },
    /// Nearest neighbors of a word or entity by cosine similarity.
    Neighbors {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        query: String,
        /// word | entity (default word).
        #[arg(long)]
        kind: Option<String>,
        /// Neighbors to print (default 5).
        #[arg(long)]
        top_n: Option<usize>,
    },
    /// Build the mention-candidate dictionary.
    BuildDict {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        output: PathBuf,
        /// TSV entity TAB title; derived from corpus annotations when absent.
        #[arg(long)]
        titles: Option<PathBuf>,
        /// TSV alias TAB canonical entity.
        #[arg(long)]
        redirects: Option<PathBuf>,
        /// Candidate list cap (default 100).
        #[arg(long)]
        max_candidates: Option<usize>,
    },
    /// Train the entity-linking disambiguator (the encoder stays frozen).
    TrainEl {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        mentions: PathBuf,
        #[arg(long)]
        dict: PathBuf,
        #[arg(long)]
        output: PathBuf,
        #[arg(long)]
        dev_mentions: Option<PathBuf>,
        /// Corpus for anchor statistics (defaults to --corpus).
        #[arg(long)]
        stats_corpus: Option<PathBuf>,
        /// on | off (default on): string-similarity features.
        #[arg(long)]
        strsim: Option<String>,
        /// Hidden units (default 100).
        #[arg(long)]
        hidden: Option<usize>,
        /// Dropout probability (default 0).
        #[arg(long)]
        dropout: Option<f64>,
        /// Epochs (default 50).
        #[arg(long)]
        epochs: Option<usize>,
        /// Mini-batch size (default 100).
        #[arg(long)]
        batch_size: Option<usize>,
        /// RMSprop learning rate (default 0.01).
        #[arg(long)]
        learning_rate: Option<f64>,
    },
    /// Evaluate entity linking: micro and macro accuracy.
    EvalEl {
        /// Model file with an attached disambiguator (from train-el).
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        mentions: PathBuf,
        #[arg(long)]
        dict: PathBuf,
        #[arg(long)]
        stats_corpus: Option<PathBuf>,
        /// Must match the flag used at training time.
        #[arg(long)]
        strsim: Option<String>,
    },
    /// Materialize the QA splits from raw question/answer records.
    BuildQa {
        #[arg(long)]
        examples: PathBuf,
        #[arg(long)]
        output: PathBuf,
        /// Minimum questions per retained answer (default 6).
        #[arg(long)]
        min_count: Option<usize>,
    },
    /// Train the QA classifier with full fine-tuning.
    TrainQa {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        examples: PathBuf,
        #[arg(long)]
        output: PathBuf,
        #[arg(long)]
        min_count: Option<usize>,
        #[arg(long)]
        hidden: Option<usize>,
        #[arg(long)]
        dropout: Option<f64>,
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long)]
        batch_size: Option<usize>,
        /// Freeze the encoder (linking-style ablation).
        #[arg(long)]
        fixed: bool,
        #[arg(long)]
        learning_rate: Option<f64>,
    },
    /// Evaluate QA accuracy on a split.
    EvalQa {
        /// Model file with an attached classifier (from train-qa).
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        examples: PathBuf,
        /// train | dev | test (default test).
        #[arg(long)]
        split: Option<String>,
        #[arg(long)]
        min_count: Option<usize>,
    },
    /// Verify every analytic gradient against finite differences.
    Gradcheck,
}

fn main() {
    let argv: Vec<String> = std::env::args().collect();
    std::process::exit(run(argv));
}

fn run(argv: Vec<String>) -> i32 {
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

/// key=value file, '#' comments, blank lines ignored.
struct KvConfig(BTreeMap<String, String>);

impl KvConfig {
    fn load(path: Option<&Path>) -> Result<Self> {
        let mut map = BTreeMap::new();
        if let Some(path) = path {
            let text = std::fs::read_to_string(path)?;
            for (idx, raw) in text.lines().enumerate() {
                let line = raw.trim();
                if line.is_empty() || line.starts_with('#') {
                    continue;
                }
                let (key, value) = line.split_once('=').ok_or_else(|| Error::MalformedRecord {
                    path: path.display().to_string(),
                    line: idx + 1,
                    message: "expected key=value".to_string(),
                })?;
                map.insert(key.trim().to_string(), value.trim().to_string());
            }
        }
        Ok(Self(map))
    }

    fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>> {
        match self.0.get(key) {
            None => Ok(None),
            Some(raw) => raw.parse::<T>().map(Some).map_err(|_| {
                Error::InvalidArgument(format!("config key '{key}' has unparsable value '{raw}'"))
            }),
        }
    }
}

/// Flag beats config file beats default.
fn resolve<T: FromStr>(flag: Option<T>, cfg: &KvConfig, key: &str, default: T) -> Result<T> {
    match flag {
        Some(v) => Ok(v),
        None => Ok(cfg.get(key)?.unwrap_or(default)),
    }
}

fn log_config(command: &str, entries: &[(&str, String)]) {
    let mut line = format!("config: command={command}");
    for (k, v) in entries {
        line.push_str(&format!(" {k}={v}"));
    }
    eprintln!("{line}");
}

fn fmt<T: Display>(v: &T) -> String {
    v.to_string()
}

fn fmt_path(p: &Path) -> String {
    p.display().to_string()
}

fn load_docs_with_pseudo(path: &Path) -> Result<Vec<corpus::AnnotatedDocument>> {
    let mut docs = corpus::load_corpus(path)?;
    corpus::add_pseudo_annotations(&mut docs);
    Ok(docs)
}

fn load_tsv_pairs(path: &Path) -> Result<Vec<(String, String)>> {
    let text = std::fs::read_to_string(path)?;
    let mut out = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let (a, b) = line
            .split_once('\t')
            .ok_or_else(|| Error::MalformedRecord {
                path: path.display().to_string(),
                line: idx + 1,
                message: "expected two tab-separated fields".to_string(),
            })?;
        out.push((a.to_string(), b.to_string()));
    }
    Ok(out)
}

fn parse_strsim(value: Option<String>, cfg: &KvConfig) -> Result<bool> {
    let raw = resolve(value, cfg, "strsim", "on".to_string())?;
    match raw.as_str() {
        "on" => Ok(true),
        "off" => Ok(false),
        other => Err(Error::InvalidArgument(format!(
            "--strsim must be 'on' or 'off', got '{other}'"
        ))),
    }
}

fn dispatch(cli: Cli) -> Result<i32> {
    let cfg = KvConfig::load(cli.config.as_deref())?;
    let seed = cli.seed;
    let threads = cli.threads;
    match cli.command {
        Command::BuildVocab {
            corpus: corpus_path,
            output,
            min_word_count,
            min_entity_count,
        } => {
            let min_word = resolve(
                min_word_count,
                &cfg,
                "min_word_count",
                vocab::DEFAULT_MIN_WORD_COUNT,
            )?;
            let min_entity = resolve(
                min_entity_count,
                &cfg,
                "min_entity_count",
                vocab::DEFAULT_MIN_ENTITY_COUNT,
            )?;
            log_config(
                "build-vocab",
                &[
                    ("corpus", fmt_path(&corpus_path)),
                    ("min_entity_count", fmt(&min_entity)),
                    ("min_word_count", fmt(&min_word)),
                    ("output", fmt_path(&output)),
                    ("seed", fmt(&seed)),
                ],
            );
            let docs = load_docs_with_pseudo(&corpus_path)?;
            let vocab = vocab::build_vocab(&docs, min_word, min_entity)?;
            vocab.save(&output)?;
            eprintln!(
                "vocabulary: {} words, {} entities -> {}",
                vocab.n_words(),
                vocab.n_entities(),
                output.display()
            );
            Ok(0)
        }
        Command::Pretrain {
            corpus: corpus_path,
            vocab: vocab_path,
            output,
            dim,
            window,
            negatives,
            epochs,
            learning_rate,
            subsample,
            text_export,
        } => {
            let defaults = SkipgramConfig::default();
            let config = SkipgramConfig {
                dim: resolve(dim, &cfg, "dim", defaults.dim)?,
                window: resolve(window, &cfg, "window", defaults.window)?,
                negatives: resolve(negatives, &cfg, "negatives", defaults.negatives)?,
                epochs: resolve(epochs, &cfg, "epochs", defaults.epochs)?,
                learning_rate: resolve(
                    learning_rate,
                    &cfg,
                    "learning_rate",
                    defaults.learning_rate,
                )?,
                subsample_threshold: match subsample {
                    Some(t) => Some(t),
                    None => cfg.get("subsample")?,
                },
            };
            log_config(
                "pretrain",
                &[
                    ("corpus", fmt_path(&corpus_path)),
                    ("dim", fmt(&config.dim)),
                    ("epochs", fmt(&config.epochs)),
                    ("learning_rate", fmt(&config.learning_rate)),
                    ("negatives", fmt(&config.negatives)),
                    ("output", fmt_path(&output)),
                    ("seed", fmt(&seed)),
                    ("threads", fmt(&threads)),
                    ("window", fmt(&config.window)),
                ],
            );
            let docs = load_docs_with_pseudo(&corpus_path)?;
            let vocab = Vocabulary::load(&vocab_path)?;
            let stream = pretrain::entity_replaced_stream(&docs, &vocab);
            let mut rng = Rng::with_seed(seed);
            let mut table = if threads > 1 {
                eprintln!("warning: threads={threads} makes pre-training non-deterministic");
                pretrain::train_skipgram_parallel(&stream, &vocab, &config, &mut rng, threads)?
            } else {
                pretrain::train_skipgram(&stream, &vocab, &config, &mut rng)?
            };
            pretrain::normalize_entity_rows(&mut table, &vocab);
            model_io::save_embeddings(&output, &table)?;
            if let Some(text_path) = text_export {
                model_io::export_embeddings_text(&text_path, &table, &vocab)?;
            }
            eprintln!(
                "embeddings: {} x {} -> {}",
                vocab.len(),
                config.dim,
                output.display()
            );
            Ok(0)
        }
        Command::Train {
            corpus: corpus_path,
            vocab: vocab_path,
            output,
            init_embeddings,
            dim,
            negatives,
            batch_size,
            epochs,
            granularity,
            fixed,
            learning_rate,
        } => {
            let defaults = NteeTrainConfig::default();
            let config = NteeTrainConfig {
                negatives: resolve(negatives, &cfg, "negatives", defaults.negatives)?,
                batch_size: resolve(batch_size, &cfg, "batch_size", defaults.batch_size)?,
                epochs: resolve(epochs, &cfg, "epochs", defaults.epochs)?,
                fixed_embeddings: fixed || cfg.get("fixed")?.unwrap_or(false),
                optimizer: RmspropConfig::with_learning_rate(resolve(
                    learning_rate,
                    &cfg,
                    "learning_rate",
                    defaults.optimizer.learning_rate,
                )?),
            };
            let dim = resolve(dim, &cfg, "dim", 300)?;
            let granularity: Granularity =
                resolve(granularity, &cfg, "granularity", "sentence".to_string())?.parse()?;
            log_config(
                "train",
                &[
                    ("batch_size", fmt(&config.batch_size)),
                    ("corpus", fmt_path(&corpus_path)),
                    ("dim", fmt(&dim)),
                    ("epochs", fmt(&config.epochs)),
                    ("fixed", fmt(&config.fixed_embeddings)),
                    (
                        "granularity",
                        match granularity {
                            Granularity::Sentence => "sentence".to_string(),
                            Granularity::Paragraph => "paragraph".to_string(),
                        },
                    ),
                    ("learning_rate", fmt(&config.optimizer.learning_rate)),
                    ("negatives", fmt(&config.negatives)),
                    ("output", fmt_path(&output)),
                    ("seed", fmt(&seed)),
                ],
            );
            let docs = load_docs_with_pseudo(&corpus_path)?;
            let vocab = Vocabulary::load(&vocab_path)?;
            let pairs = corpus::make_training_pairs(&docs, granularity, &vocab);
            eprintln!("training pairs: {}", pairs.len());
            let mut rng = Rng::with_seed(seed);
            let init = match init_embeddings {
                Some(path) => {
                    let table = model_io::load_embeddings(&path)?;
                    model::NteeModel::from_pretrained(&table, &vocab, &mut rng)?
                }
                None => model::NteeModel::new(vocab.n_words(), vocab.n_entities(), dim, &mut rng)?,
            };
            let (model, losses) = model::train(init, &pairs, &config, &mut rng)?;
            for (epoch, loss) in losses.iter().enumerate() {
                eprintln!("epoch={} loss={loss}", epoch + 1);
            }
            model_io::save_model(&output, &model, &vocab, None)?;
            eprintln!(
                "model: {} parameters -> {}",
                model.param_count(),
                output.display()
            );
            Ok(0)
        }
        Command::EvalSts { model, pairs, dump } => {
            log_config(
                "eval-sts",
                &[
                    ("dump", fmt(&dump)),
                    ("model", fmt_path(&model)),
                    ("pairs", fmt_path(&pairs)),
                    ("seed", fmt(&seed)),
                ],
            );
            let (model, vocab, _) = model_io::load_model(&model)?;
            let sts_pairs = similarity::load_sts_pairs(&pairs)?;
            if dump {
                for (idx, pair) in sts_pairs.iter().enumerate() {
                    let score =
                        similarity::pair_score(&model, &vocab, &pair.sentence_a, &pair.sentence_b);
                    println!("{idx}\t{score}\t{}", pair.gold);
                }
            }
            let report = similarity::evaluate_sts(&model, &vocab, &sts_pairs)?;
            println!(
                "pearson={} spearman={} n={}",
                report.pearson_r, report.spearman_rho, report.n
            );
            Ok(0)
        }
        Command::Neighbors {
            model,
            query,
            kind,
            top_n,
        } => {
            let kind_str = resolve(kind, &cfg, "kind", "word".to_string())?;
            let kind: ItemKind = kind_str.parse()?;
            let top_n = resolve(top_n, &cfg, "top_n", 5)?;
            log_config(
                "neighbors",
                &[
                    ("kind", kind_str.clone()),
                    ("model", fmt_path(&model)),
                    ("query", query.clone()),
                    ("top_n", fmt(&top_n)),
                ],
            );
            let (model, vocab, _) = model_io::load_model(&model)?;
            for (item, cos) in similarity::nearest_neighbors(&model, &vocab, kind, &query, top_n)? {
                println!("{item}\t{cos}");
            }
            Ok(0)
        }
        Command::BuildDict {
            corpus: corpus_path,
            output,
            titles,
            redirects,
            max_candidates,
        } => {
            let max_candidates = resolve(
                max_candidates,
                &cfg,
                "max_candidates",
                linker::DEFAULT_MAX_CANDIDATES,
            )?;
            log_config(
                "build-dict",
                &[
                    ("corpus", fmt_path(&corpus_path)),
                    ("max_candidates", fmt(&max_candidates)),
                    ("output", fmt_path(&output)),
                ],
            );
            let docs = load_docs_with_pseudo(&corpus_path)?;
            let stats = corpus::collect_anchor_stats(&docs);
            let kb_titles: Vec<(String, String)> = match titles {
                Some(path) => load_tsv_pairs(&path)?,
                None => {
                    // Identity titles for every entity the corpus mentions.
                    let mut entities: Vec<String> = docs
                        .iter()
                        .flat_map(|d| {
                            d.annotations
                                .iter()
                                .map(|a| a.entity.clone())
                                .chain(d.pseudo_entity.clone())
                        })
                        .collect();
                    entities.sort();
                    entities.dedup();
                    entities.into_iter().map(|e| (e.clone(), e)).collect()
                }
            };
            let redirects = match redirects {
                Some(path) => load_tsv_pairs(&path)?.into_iter().collect(),
                None => std::collections::HashMap::new(),
            };
            let dict =
                linker::build_mention_dictionary(&kb_titles, &redirects, &stats, max_candidates);
            dict.save(&output)?;
            eprintln!(
                "dictionary: {} surfaces -> {}",
                dict.n_surfaces(),
                output.display()
            );
            Ok(0)
        }
        Command::TrainEl {
            model,
            corpus: corpus_path,
            mentions,
            dict,
            output,
            dev_mentions,
            stats_corpus,
            strsim,
            hidden,
            dropout,
            epochs,
            batch_size,
            learning_rate,
        } => {
            let use_strsim = parse_strsim(strsim, &cfg)?;
            let defaults = MlpConfig::default();
            let mlp_config = MlpConfig {
                hidden_units: resolve(hidden, &cfg, "hidden", defaults.hidden_units)?,
                dropout_p: resolve(dropout, &cfg, "dropout", defaults.dropout_p)?,
                epochs: resolve(epochs, &cfg, "epochs", defaults.epochs)?,
                batch_size: resolve(batch_size, &cfg, "batch_size", defaults.batch_size)?,
                optimizer: RmspropConfig::with_learning_rate(resolve(
                    learning_rate,
                    &cfg,
                    "learning_rate",
                    defaults.optimizer.learning_rate,
                )?),
            };
            log_config(
                "train-el",
                &[
                    ("batch_size", fmt(&mlp_config.batch_size)),
                    ("corpus", fmt_path(&corpus_path)),
                    ("dict", fmt_path(&dict)),
                    ("dropout", fmt(&mlp_config.dropout_p)),
                    ("epochs", fmt(&mlp_config.epochs)),
                    ("hidden", fmt(&mlp_config.hidden_units)),
                    ("learning_rate", fmt(&mlp_config.optimizer.learning_rate)),
                    ("mentions", fmt_path(&mentions)),
                    ("model", fmt_path(&model)),
                    ("output", fmt_path(&output)),
                    ("seed", fmt(&seed)),
                    ("strsim", if use_strsim { "on" } else { "off" }.to_string()),
                ],
            );
            let (ntee_model, vocab, _) = model_io::load_model(&model)?;
            let docs = load_docs_with_pseudo(&corpus_path)?;
            let stats_docs = match &stats_corpus {
                Some(path) => load_docs_with_pseudo(path)?,
                None => docs.clone(),
            };
            let stats = corpus::collect_anchor_stats(&stats_docs);
            let dict = linker::MentionDictionary::load(&dict)?;
            let train_mentions = linker::load_mentions(&mentions)?;
            let dev = dev_mentions
                .map(|p| linker::load_mentions(&p))
                .transpose()?;
            let pipeline = ElPipeline {
                model: &ntee_model,
                vocab: &vocab,
                dict: &dict,
                stats: &stats,
                use_strsim,
            };
            let mut rng = Rng::with_seed(seed);
            let (mlp, report) = linker::train_linker(
                &pipeline,
                &docs,
                &train_mentions,
                dev.as_deref(),
                &mlp_config,
                &mut rng,
            )?;
            for (epoch, loss) in report.epoch_losses.iter().enumerate() {
                eprintln!("epoch={} loss={loss}", epoch + 1);
            }
            eprintln!(
                "skipped={} best_epoch={} best_dev_micro={:?}",
                report.skipped, report.best_epoch, report.best_dev_micro
            );
            model_io::save_model(&output, &ntee_model, &vocab, Some(&mlp))?;
            Ok(0)
        }
        Command::EvalEl {
            model,
            corpus: corpus_path,
            mentions,
            dict,
            stats_corpus,
            strsim,
        } => {
            let use_strsim = parse_strsim(strsim, &cfg)?;
            log_config(
                "eval-el",
                &[
                    ("corpus", fmt_path(&corpus_path)),
                    ("dict", fmt_path(&dict)),
                    ("mentions", fmt_path(&mentions)),
                    ("model", fmt_path(&model)),
                    ("strsim", if use_strsim { "on" } else { "off" }.to_string()),
                ],
            );
            let (ntee_model, vocab, mlp) = model_io::load_model(&model)?;
            let mlp = mlp.ok_or_else(|| {
                Error::InvalidArgument(
                    "model file has no disambiguator; run train-el first".to_string(),
                )
            })?;
            let docs = load_docs_with_pseudo(&corpus_path)?;
            let stats_docs = match &stats_corpus {
                Some(path) => load_docs_with_pseudo(path)?,
                None => docs.clone(),
            };
            let stats = corpus::collect_anchor_stats(&stats_docs);
            let dict = linker::MentionDictionary::load(&dict)?;
            let eval_mentions = linker::load_mentions(&mentions)?;
            let pipeline = ElPipeline {
                model: &ntee_model,
                vocab: &vocab,
                dict: &dict,
                stats: &stats,
                use_strsim,
            };
            let report = linker::evaluate_linker(&pipeline, &mlp, &docs, &eval_mentions)?;
            println!(
                "micro={} macro={} n_mentions={} n_docs={}",
                report.micro, report.macro_, report.n_mentions, report.n_docs
            );
            Ok(0)
        }
        Command::BuildQa {
            examples,
            output,
            min_count,
        } => {
            let min_count = resolve(min_count, &cfg, "min_count", qa::DEFAULT_MIN_ANSWER_COUNT)?;
            log_config(
                "build-qa",
                &[
                    ("examples", fmt_path(&examples)),
                    ("min_count", fmt(&min_count)),
                    ("output", fmt_path(&output)),
                    ("seed", fmt(&seed)),
                ],
            );
            let raw = qa::load_qa_examples(&examples)?;
            let mut rng = Rng::with_seed(seed);
            let dataset = qa::build_qa_dataset(&raw, min_count, &mut rng)?;
            qa::save_qa_dataset(&output, &dataset)?;
            eprintln!(
                "dataset: {} answers, {}/{}/{} train/dev/test -> {}",
                dataset.answers.len(),
                dataset.train.len(),
                dataset.dev.len(),
                dataset.test.len(),
                output.display()
            );
            Ok(0)
        }
        Command::TrainQa {
            model,
            examples,
            output,
            min_count,
            hidden,
            dropout,
            epochs,
            batch_size,
            fixed,
            learning_rate,
        } => {
            let min_count = resolve(min_count, &cfg, "min_count", qa::DEFAULT_MIN_ANSWER_COUNT)?;
            let defaults = MlpConfig::default();
            let config = QaTrainConfig {
                mlp: MlpConfig {
                    hidden_units: resolve(hidden, &cfg, "hidden", defaults.hidden_units)?,
                    dropout_p: resolve(dropout, &cfg, "dropout", defaults.dropout_p)?,
                    epochs: resolve(epochs, &cfg, "epochs", defaults.epochs)?,
                    batch_size: resolve(batch_size, &cfg, "batch_size", defaults.batch_size)?,
                    optimizer: RmspropConfig::with_learning_rate(resolve(
                        learning_rate,
                        &cfg,
                        "learning_rate",
                        defaults.optimizer.learning_rate,
                    )?),
                },
                fixed_embeddings: fixed || cfg.get("fixed")?.unwrap_or(false),
                encoder_optimizer: RmspropConfig::default(),
            };
            log_config(
                "train-qa",
                &[
                    ("batch_size", fmt(&config.mlp.batch_size)),
                    ("dropout", fmt(&config.mlp.dropout_p)),
                    ("epochs", fmt(&config.mlp.epochs)),
                    ("examples", fmt_path(&examples)),
                    ("fixed", fmt(&config.fixed_embeddings)),
                    ("hidden", fmt(&config.mlp.hidden_units)),
                    ("learning_rate", fmt(&config.mlp.optimizer.learning_rate)),
                    ("min_count", fmt(&min_count)),
                    ("model", fmt_path(&model)),
                    ("output", fmt_path(&output)),
                    ("seed", fmt(&seed)),
                ],
            );
            let (ntee_model, vocab, _) = model_io::load_model(&model)?;
            let raw = qa::load_qa_examples(&examples)?;
            // The dataset split consumes the seed's first draws, so eval-qa
            // with the same seed reconstructs identical splits.
            let mut rng = Rng::with_seed(seed);
            let dataset = qa::build_qa_dataset(&raw, min_count, &mut rng)?;
            let (mlp, tuned, report) =
                qa::train_qa(ntee_model, &vocab, &dataset, &config, &mut rng)?;
            for (epoch, loss) in report.epoch_losses.iter().enumerate() {
                eprintln!("epoch={} loss={loss}", epoch + 1);
            }
            eprintln!(
                "best_epoch={} best_dev_accuracy={:?}",
                report.best_epoch, report.best_dev_accuracy
            );
            model_io::save_model(&output, &tuned, &vocab, Some(&mlp))?;
            Ok(0)
        }
        Command::EvalQa {
            model,
            examples,
            split,
            min_count,
        } => {
            let min_count = resolve(min_count, &cfg, "min_count", qa::DEFAULT_MIN_ANSWER_COUNT)?;
            let split_str = resolve(split, &cfg, "split", "test".to_string())?;
            let split: Split = split_str.parse()?;
            log_config(
                "eval-qa",
                &[
                    ("examples", fmt_path(&examples)),
                    ("min_count", fmt(&min_count)),
                    ("model", fmt_path(&model)),
                    ("seed", fmt(&seed)),
                    ("split", split_str.clone()),
                ],
            );
            let (ntee_model, vocab, mlp) = model_io::load_model(&model)?;
            let mlp = mlp.ok_or_else(|| {
                Error::InvalidArgument(
                    "model file has no classifier; run train-qa first".to_string(),
                )
            })?;
            let raw = qa::load_qa_examples(&examples)?;
            let mut rng = Rng::with_seed(seed);
            let dataset = qa::build_qa_dataset(&raw, min_count, &mut rng)?;
            let part = dataset.split(split);
            let accuracy = qa::evaluate_qa(&mlp, &ntee_model, &vocab, part, &dataset.answers)?;
            println!("split={split_str} accuracy={accuracy} n={}", part.len());
            Ok(0)
        }
        Command::Gradcheck => {
            log_config("gradcheck", &[("seed", fmt(&seed))]);
            let reports = ntee::gradcheck::run_all()?;
            let mut all_passed = true;
            for r in &reports {
                println!("group={} max_rel_err={}", r.group, r.max_rel_err);
                all_passed &= r.passed();
            }
            println!(
                "gradcheck={} tolerance={}",
                if all_passed { "pass" } else { "fail" },
                ntee::gradcheck::GRAD_TOLERANCE
            );
            Ok(if all_passed { 0 } else { 1 })
        }
    }
}
