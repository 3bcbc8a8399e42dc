//! Interlocutor-aware response generation for multi-party conversations.
//!
//! The crate is `no_std` (it needs `alloc`) and holds everything that is pure
//! computation:
//!
//! * [`tensor`], [`tape`], [`gru`], [`adam`], [`gradcheck`]: a small dense
//!   tensor layer with reverse-mode differentiation and the optimizer.
//! * [`corpus`]: chat-log parsing, addressee extraction, context windows,
//!   vocabulary, splits, statistics and the synthetic addressee-copy corpus.
//! * [`model`]: the encoder / speaker-interaction / addressee-memory /
//!   decoder network, its ablation variants and interlocutor prediction.
//! * [`trainer`]: the mini-batch Adam loop with early stopping.
//! * [`metrics`]: BLEU, ROUGE-L, length, noun counts and ablation reports.
//!
//! File formats, threads and the command line live in the `icred` crate.

#![no_std]

extern crate alloc;

pub mod adam;
pub mod corpus;
pub mod error;
pub mod gradcheck;
pub mod gru;
mod math;
pub mod metrics;
pub mod model;
pub mod tape;
pub mod tensor;
pub mod trainer;

pub use error::{Error, Result};
