//! Typed-decoder question generation for open-domain dialogue.
//!
//! The crate covers the full desk-scale pipeline: corpus distillation and
//! word-type tagging, PMI topic prediction, a GRU encoder-decoder with
//! attention and soft/hard typed decoders, type-supervised training, and
//! the automatic evaluation metrics.

pub mod autodiff;
pub mod corpus;
pub mod model;
pub mod pmi;
pub mod error;
pub mod fsio;
pub mod rng;

pub use autodiff::{gradient_check, softmax, AdamState, Tape, Tensor, Var};
pub use error::{Error, Result};
