//! Prompt-recovery pipeline: corpus construction, LLM gateways, prompt
//! templates, synthetic instruction generation, prompt recovery, metric
//! evaluation, LoRA preparation and annotation.

pub mod annostudio;
pub mod corpus;
pub mod digest;
pub mod error;
pub mod evalsuite;
pub mod llmgate;
pub mod lorapack;
pub mod promptkit;
pub mod recover;
pub mod synthgen;
pub mod text;

pub use error::{Error, Result};
