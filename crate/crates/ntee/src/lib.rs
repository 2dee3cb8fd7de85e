//! Joint text and knowledge-base entity embeddings.
//!
//! This crate trains a text encoder to predict the entities annotated in
//! each text, producing fixed-length vectors for texts and entities that
//! live in the same space. On top of the learned representations it ships
//! three evaluation pipelines: semantic textual similarity, entity linking,
//! and factoid question answering.
//!
//! The training pipeline, end to end:
//!
//! 1. [`corpus`] loads line-delimited annotated documents and turns them
//!    into training pairs of (token sequence, entity set).
//! 2. [`vocab`] builds frequency-thresholded word and entity vocabularies.
//! 3. [`pretrain`] runs skip-gram with negative sampling over the
//!    entity-replaced token stream to initialize all embeddings.
//! 4. [`model`] trains the joint encoder: a text is the sum of its word
//!    vectors, L2-normalized and passed through an affine layer; the loss
//!    is a sampled softmax over annotated entities.
//! 5. [`similarity`], [`linker`], and [`qa`] evaluate the result.
//!
//! Every step is deterministic given a seed: see [`numerics::Rng`].
//!
//! The `examples/` directory contains one runnable example per capability;
//! start with `cargo run --example end_to_end`.

pub mod corpus;
pub mod error;
pub mod gradcheck;
pub mod linker;
pub mod mlp;
pub mod model;
pub mod model_io;
pub mod numerics;
pub mod pretrain;
pub mod qa;
pub mod similarity;
pub mod synthetic;
pub mod vocab;

pub use error::{Error, Result};
pub use model::{NteeModel, NteeTrainConfig};
pub use numerics::{Mat, RmspropConfig, RmspropState, Rng};
pub use vocab::Vocabulary;
