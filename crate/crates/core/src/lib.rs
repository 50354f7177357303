//! Core algorithms of the comment moderation suite.
//!
//! Everything here is pure computation over in-memory data and builds without
//! `std` (an allocator is required). File formats, transports, the HTTP service
//! and the command line live in the `commentguard` crate.
//!
//! Module map:
//!
//! - [`corpus`]: comment records, the three-way label taxonomy and its binary collapse.
//! - [`split`]: deterministic (optionally stratified) train/validation/test splitting.
//! - [`textproc`]: tokenizer, vocabulary, smoothed IDF and TF-IDF vectors.
//! - [`classifiers`]: naive Bayes, logistic regression, CART tree and random forest.
//! - [`metrics`]: confusion matrices, derived metrics, ROC AUC, Fleiss kappa,
//!   confusion reconstruction and report rendering.
//! - [`annotation`]: multi-rater annotation sessions and per-group agreement.
//! - [`llm`]: zero-shot prompt construction and reply parsing.

#![cfg_attr(not(any(test, feature = "std")), no_std)]
#![forbid(unsafe_code)]

extern crate alloc;

pub mod annotation;
pub mod classifiers;
pub mod corpus;
pub mod llm;
pub mod metrics;
pub mod split;
pub mod textproc;

pub use corpus::{BinaryLabel, Comment, LabeledComment, RawLabel};
