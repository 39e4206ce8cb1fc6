//! Unsupervised word alignment with count-based and neural IBM-1 / HMM models.
//!
//! The crate provides the full pipeline: parallel corpus ingestion and
//! vocabulary construction ([`corpus`]), a small reverse-mode autodiff kernel
//! ([`tensor`]), count-based baselines trained with exact EM ([`discrete`]),
//! neural translation and jump models ([`neural`]), the EM + gradient training
//! loop ([`trainer`]), Viterbi/argmax decoding with grow-diag-final
//! symmetrization ([`decoder`]), and AER scoring plus error analyses
//! ([`eval`]).

pub mod corpus;
pub mod checkpoint;
pub mod decoder;
pub mod discrete;
pub mod error;
pub mod eval;
pub mod inference;
pub mod jump;
pub mod neural;
pub mod oracle;
pub mod synth;
pub mod tensor;
pub mod trainer;

pub use error::{AlignError, Result};
