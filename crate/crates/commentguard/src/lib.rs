//! Std companion to `commentguard-core`: corpus and model files, remote
//! backends, the HTTP service, annotation logs and the command line.

#![forbid(unsafe_code)]

pub mod annotation_log;
pub mod backend;
pub mod cli;
pub mod corpus;
pub mod llm;
pub mod model_io;
pub mod service;
