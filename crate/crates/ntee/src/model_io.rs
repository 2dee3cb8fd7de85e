//! Binary persistence for embedding tables and trained models.
//!
//! Model file layout (all integers and floats little-endian):
//!
//! ```text
//! magic "NTEE" | version u32 | n_words u64 | n_entities u64 | d u64
//! word_emb (n_words*d f64) | entity_emb (n_entities*d f64)
//! projection (d*d f64) | bias (d f64)
//! vocab block: byte length u64 + the vocabulary text format
//! mlp flag u8; when 1: "MLP1" | hidden u64 | feature_dim u64
//!                      w1 | b1 | w2 | b2
//! ```
//!
//! Embedding files use magic "NTEV" with `n_rows`/`d` and the input and
//! output tables back to back. Round-trips are bit-exact.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::mlp::MlpModel;
use crate::model::NteeModel;
use crate::numerics::Mat;
use crate::pretrain::EmbeddingTable;
use crate::vocab::Vocabulary;
use crate::{Error, Result};

const MODEL_MAGIC: &[u8; 4] = b"NTEE";
const EMBEDDING_MAGIC: &[u8; 4] = b"NTEV";
const MLP_MAGIC: &[u8; 4] = b"MLP1";
const FORMAT_VERSION: u32 = 1;

fn file_error(path: &Path, message: impl Into<String>) -> Error {
    Error::ModelFile {
        path: path.display().to_string(),
        message: message.into(),
    }
}

fn write_u32<W: Write>(out: &mut W, v: u32) -> Result<()> {
    out.write_all(&v.to_le_bytes())?;
    Ok(())
}

fn write_u64<W: Write>(out: &mut W, v: u64) -> Result<()> {
    out.write_all(&v.to_le_bytes())?;
    Ok(())
}

fn write_f64s<W: Write>(out: &mut W, values: &[f64]) -> Result<()> {
    for v in values {
        out.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

fn read_exact(reader: &mut impl Read, buf: &mut [u8], path: &Path) -> Result<()> {
    reader
        .read_exact(buf)
        .map_err(|_| file_error(path, "truncated file"))
}

fn read_u32(reader: &mut impl Read, path: &Path) -> Result<u32> {
    let mut buf = [0u8; 4];
    read_exact(reader, &mut buf, path)?;
    Ok(u32::from_le_bytes(buf))
}

fn read_u64(reader: &mut impl Read, path: &Path) -> Result<u64> {
    let mut buf = [0u8; 8];
    read_exact(reader, &mut buf, path)?;
    Ok(u64::from_le_bytes(buf))
}

fn read_f64s(reader: &mut impl Read, n: usize, path: &Path) -> Result<Vec<f64>> {
    let mut bytes = vec![0u8; n * 8];
    read_exact(reader, &mut bytes, path)?;
    Ok(bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunked by 8")))
        .collect())
}

fn read_mat(reader: &mut impl Read, rows: usize, cols: usize, path: &Path) -> Result<Mat> {
    Mat::from_vec(rows, cols, read_f64s(reader, rows * cols, path)?)
}

fn check_magic(reader: &mut impl Read, expected: &[u8; 4], path: &Path) -> Result<()> {
    let mut magic = [0u8; 4];
    read_exact(reader, &mut magic, path)?;
    if &magic != expected {
        return Err(file_error(
            path,
            format!("bad magic {magic:?}, expected {expected:?}"),
        ));
    }
    Ok(())
}

fn check_version(reader: &mut impl Read, path: &Path) -> Result<()> {
    let version = read_u32(reader, path)?;
    if version != FORMAT_VERSION {
        return Err(file_error(
            path,
            format!(
                "unsupported format version {version}, this build reads version {FORMAT_VERSION}"
            ),
        ));
    }
    Ok(())
}

/// Saves a model, its vocabulary, and optionally an attached candidate
/// scorer into one file.
pub fn save_model(
    path: &Path,
    model: &NteeModel,
    vocab: &Vocabulary,
    mlp: Option<&MlpModel>,
) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    out.write_all(MODEL_MAGIC)?;
    write_u32(&mut out, FORMAT_VERSION)?;
    write_u64(&mut out, model.n_words() as u64)?;
    write_u64(&mut out, model.n_entities() as u64)?;
    write_u64(&mut out, model.dim() as u64)?;
    write_f64s(&mut out, model.word_emb.as_slice())?;
    write_f64s(&mut out, model.entity_emb.as_slice())?;
    write_f64s(&mut out, model.projection.as_slice())?;
    write_f64s(&mut out, &model.bias)?;

    let mut vocab_block = Vec::new();
    vocab.write_to(&mut vocab_block)?;
    write_u64(&mut out, vocab_block.len() as u64)?;
    out.write_all(&vocab_block)?;

    match mlp {
        None => out.write_all(&[0u8])?,
        Some(mlp) => {
            out.write_all(&[1u8])?;
            out.write_all(MLP_MAGIC)?;
            write_u64(&mut out, mlp.hidden_units() as u64)?;
            write_u64(&mut out, mlp.feature_dim() as u64)?;
            write_f64s(&mut out, mlp.w1.as_slice())?;
            write_f64s(&mut out, &mlp.b1)?;
            write_f64s(&mut out, &mlp.w2)?;
            write_f64s(&mut out, &[mlp.b2])?;
        }
    }
    Ok(())
}

/// Loads a model file written by [`save_model`].
pub fn load_model(path: &Path) -> Result<(NteeModel, Vocabulary, Option<MlpModel>)> {
    let mut reader = BufReader::new(File::open(path)?);
    check_magic(&mut reader, MODEL_MAGIC, path)?;
    check_version(&mut reader, path)?;
    let n_words = read_u64(&mut reader, path)? as usize;
    let n_entities = read_u64(&mut reader, path)? as usize;
    let d = read_u64(&mut reader, path)? as usize;
    let word_emb = read_mat(&mut reader, n_words, d, path)?;
    let entity_emb = read_mat(&mut reader, n_entities, d, path)?;
    let projection = read_mat(&mut reader, d, d, path)?;
    let bias = read_f64s(&mut reader, d, path)?;
    let model = NteeModel {
        word_emb,
        entity_emb,
        projection,
        bias,
    };

    let vocab_len = read_u64(&mut reader, path)? as usize;
    let mut vocab_block = vec![0u8; vocab_len];
    read_exact(&mut reader, &mut vocab_block, path)?;
    let vocab = Vocabulary::read_from(vocab_block.as_slice(), &path.display().to_string())?;
    if vocab.n_words() != n_words || vocab.n_entities() != n_entities {
        return Err(file_error(
            path,
            format!(
                "vocabulary block ({} words, {} entities) disagrees with header ({n_words}, {n_entities})",
                vocab.n_words(),
                vocab.n_entities()
            ),
        ));
    }

    let mut flag = [0u8; 1];
    read_exact(&mut reader, &mut flag, path)?;
    let mlp = match flag[0] {
        0 => None,
        1 => {
            check_magic(&mut reader, MLP_MAGIC, path)?;
            let hidden = read_u64(&mut reader, path)? as usize;
            let feature_dim = read_u64(&mut reader, path)? as usize;
            let w1 = read_mat(&mut reader, hidden, feature_dim, path)?;
            let b1 = read_f64s(&mut reader, hidden, path)?;
            let w2 = read_f64s(&mut reader, hidden, path)?;
            let b2 = read_f64s(&mut reader, 1, path)?[0];
            Some(MlpModel { w1, b1, w2, b2 })
        }
        other => return Err(file_error(path, format!("bad MLP flag {other}"))),
    };
    Ok((model, vocab, mlp))
}

/// Saves pre-trained embedding tables.
pub fn save_embeddings(path: &Path, table: &EmbeddingTable) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    out.write_all(EMBEDDING_MAGIC)?;
    write_u32(&mut out, FORMAT_VERSION)?;
    write_u64(&mut out, table.input_vectors.rows() as u64)?;
    write_u64(&mut out, table.input_vectors.cols() as u64)?;
    write_f64s(&mut out, table.input_vectors.as_slice())?;
    write_f64s(&mut out, table.output_vectors.as_slice())?;
    Ok(())
}

pub fn load_embeddings(path: &Path) -> Result<EmbeddingTable> {
    let mut reader = BufReader::new(File::open(path)?);
    check_magic(&mut reader, EMBEDDING_MAGIC, path)?;
    check_version(&mut reader, path)?;
    let rows = read_u64(&mut reader, path)? as usize;
    let d = read_u64(&mut reader, path)? as usize;
    let input_vectors = read_mat(&mut reader, rows, d, path)?;
    let output_vectors = read_mat(&mut reader, rows, d, path)?;
    Ok(EmbeddingTable {
        input_vectors,
        output_vectors,
    })
}

/// Text export of the input vectors: one line per type, surface then the
/// vector entries, space separated. Entity surfaces are prefixed with
/// `ENTITY:` and have spaces replaced by underscores.
pub fn export_embeddings_text(
    path: &Path,
    table: &EmbeddingTable,
    vocab: &Vocabulary,
) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    for (id, entry) in vocab.words().iter().enumerate() {
        write!(out, "{}", entry.surface)?;
        for v in table.input_vectors.row(id) {
            write!(out, " {v}")?;
        }
        writeln!(out)?;
    }
    for (id, entry) in vocab.entities().iter().enumerate() {
        write!(out, "ENTITY:{}", entry.surface.replace(' ', "_"))?;
        for v in table.input_vectors.row(vocab.unified_entity_id(id)) {
            write!(out, " {v}")?;
        }
        writeln!(out)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::Rng;
    use crate::vocab::build_vocab;

    fn sample_world() -> (NteeModel, Vocabulary) {
        let docs = vec![crate::corpus::AnnotatedDocument {
            doc_id: "d".to_string(),
            source_entity: None,
            text: "one two three four".to_string(),
            annotations: Vec::new(),
            pseudo_entity: Some("Thing One".to_string()),
        }];
        let vocab = build_vocab(&docs, 1, 1).unwrap();
        let model = NteeModel::new(
            vocab.n_words(),
            vocab.n_entities(),
            3,
            &mut Rng::with_seed(1),
        )
        .unwrap();
        (model, vocab)
    }

    #[test]
    fn model_round_trip_is_bit_exact() {
        let (model, vocab) = sample_world();
        let mlp = MlpModel::new(4, 7, &mut Rng::with_seed(2)).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.bin");
        save_model(&path, &model, &vocab, Some(&mlp)).unwrap();
        let (m2, v2, mlp2) = load_model(&path).unwrap();
        assert!(model.word_emb.bits_eq(&m2.word_emb));
        assert!(model.entity_emb.bits_eq(&m2.entity_emb));
        assert!(model.projection.bits_eq(&m2.projection));
        assert_eq!(model.bias, m2.bias);
        assert_eq!(vocab, v2);
        let mlp2 = mlp2.unwrap();
        assert!(mlp.w1.bits_eq(&mlp2.w1));
        assert_eq!(mlp.w2, mlp2.w2);
        assert_eq!(mlp.b2, mlp2.b2);

        // Saving twice produces identical bytes.
        let path_b = dir.path().join("model2.bin");
        save_model(&path_b, &model, &vocab, Some(&mlp)).unwrap();
        assert_eq!(
            std::fs::read(&path).unwrap(),
            std::fs::read(&path_b).unwrap()
        );
    }

    #[test]
    fn corrupted_magic_and_future_version_are_rejected() {
        let (model, vocab) = sample_world();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.bin");
        save_model(&path, &model, &vocab, None).unwrap();

        let mut bytes = std::fs::read(&path).unwrap();
        bytes[0] = b'X';
        std::fs::write(&path, &bytes).unwrap();
        let err = load_model(&path).unwrap_err().to_string();
        assert!(err.contains("bad magic"), "{err}");

        let mut bytes = std::fs::read(&path).unwrap();
        bytes[0] = b'N';
        bytes[4..8].copy_from_slice(&99u32.to_le_bytes());
        std::fs::write(&path, &bytes).unwrap();
        let err = load_model(&path).unwrap_err().to_string();
        assert!(err.contains("version 99"), "{err}");
    }

    #[test]
    fn truncated_file_is_rejected() {
        let (model, vocab) = sample_world();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.bin");
        save_model(&path, &model, &vocab, None).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        std::fs::write(&path, &bytes[..bytes.len() / 2]).unwrap();
        let err = load_model(&path).unwrap_err().to_string();
        assert!(err.contains("truncated"), "{err}");
    }

    #[test]
    fn embedding_round_trip_and_text_export() {
        let (_, vocab) = sample_world();
        let mut rng = Rng::with_seed(3);
        let table = EmbeddingTable {
            input_vectors: Mat::from_fn(vocab.len(), 3, |_, _| rng.uniform(-1.0, 1.0)),
            output_vectors: Mat::from_fn(vocab.len(), 3, |_, _| rng.uniform(-1.0, 1.0)),
        };
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("emb.bin");
        save_embeddings(&path, &table).unwrap();
        let loaded = load_embeddings(&path).unwrap();
        assert!(table.input_vectors.bits_eq(&loaded.input_vectors));
        assert!(table.output_vectors.bits_eq(&loaded.output_vectors));

        let text_path = dir.path().join("emb.txt");
        export_embeddings_text(&text_path, &table, &vocab).unwrap();
        let text = std::fs::read_to_string(&text_path).unwrap();
        assert_eq!(text.lines().count(), vocab.len());
        assert!(text.contains("ENTITY:Thing_One"));
    }
}
