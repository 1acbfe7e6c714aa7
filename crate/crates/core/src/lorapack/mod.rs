//! LoRA fine-tuning preparation: adapter sizing, prompt-masked training
//! examples, a desk-scale adapter with gradient checks, and job bundles for
//! an external trainer.

mod adapter;
mod job;

use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, Split};
use crate::error::{Error, Result};
use crate::promptkit::{render_zero_shot, RecoveryVariant};

pub use adapter::ToyAdapter;
pub use job::{export_finetune_job, FinetuneHyperparams, JobManifest, DEFAULT_BACKBONE};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TargetMatrix {
    pub name: String,
    pub d_in: u64,
    pub d_out: u64,
}

impl TargetMatrix {
    pub fn new(name: impl Into<String>, d_in: u64, d_out: u64) -> Self {
        Self { name: name.into(), d_in, d_out }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoraSpec {
    pub rank: u64,
    pub alpha: f64,
    pub target_matrices: Vec<TargetMatrix>,
}

pub const MISTRAL_7B_LAYERS: u64 = 32;
const MISTRAL_HIDDEN: u64 = 4096;
const MISTRAL_KV: u64 = 1024;
const MISTRAL_FFN: u64 = 14336;

impl LoraSpec {
    pub fn new(rank: u64, alpha: f64, target_matrices: Vec<TargetMatrix>) -> Result<Self> {
        let spec = Self { rank, alpha, target_matrices };
        spec.validate()?;
        Ok(spec)
    }

    /// All seven linear projections of every Mistral-7B decoder layer,
    /// r = 32, alpha = 64.
    pub fn mistral_7b_all_linear() -> Self {
        Self::mistral_7b_all_linear_with(32, 64.0)
    }

    pub fn mistral_7b_all_linear_with(rank: u64, alpha: f64) -> Self {
        let per_layer = [
            ("q_proj", MISTRAL_HIDDEN, MISTRAL_HIDDEN),
            ("k_proj", MISTRAL_HIDDEN, MISTRAL_KV),
            ("v_proj", MISTRAL_HIDDEN, MISTRAL_KV),
            ("o_proj", MISTRAL_HIDDEN, MISTRAL_HIDDEN),
            ("gate_proj", MISTRAL_HIDDEN, MISTRAL_FFN),
            ("up_proj", MISTRAL_HIDDEN, MISTRAL_FFN),
            ("down_proj", MISTRAL_FFN, MISTRAL_HIDDEN),
        ];
        let target_matrices = (0..MISTRAL_7B_LAYERS)
            .flat_map(|layer| {
                per_layer
                    .iter()
                    .map(move |(name, d_in, d_out)| TargetMatrix::new(format!("layers.{layer}.{name}"), *d_in, *d_out))
            })
            .collect();
        Self { rank, alpha, target_matrices }
    }

    pub fn validate(&self) -> Result<()> {
        if self.rank == 0 {
            return Err(Error::InvalidArgument("LoRA rank must be >= 1".into()));
        }
        if !(self.alpha.is_finite() && self.alpha > 0.0) {
            return Err(Error::InvalidArgument("LoRA alpha must be > 0".into()));
        }
        if let Some(t) = self.target_matrices.iter().find(|t| t.d_in == 0 || t.d_out == 0) {
            return Err(Error::InvalidArgument(format!("target {} has a zero dimension", t.name)));
        }
        Ok(())
    }

    pub fn scaling(&self) -> f64 {
        self.alpha / self.rank as f64
    }
}

/// Σ r·(d_in + d_out) over the target matrices.
pub fn trainable_params(spec: &LoraSpec) -> u64 {
    spec.target_matrices
        .iter()
        .map(|t| spec.rank * (t.d_in + t.d_out))
        .sum()
}

/// One training example; tokens are whitespace-delimited words of `full_text`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MaskedExample {
    pub record_id: String,
    pub full_text: String,
    /// Length in characters of the rendered recovery prompt at the start of
    /// `full_text`; everything from here on is the target.
    pub prompt_char_end: usize,
    /// One entry per whitespace token; `true` tokens contribute to the loss.
    pub loss_mask: Vec<bool>,
}

impl MaskedExample {
    /// Builds an example from the rendered prompt and the target text,
    /// joined by a single space.
    pub fn new(record_id: impl Into<String>, prompt: &str, target: &str) -> Result<Self> {
        if target.split_whitespace().next().is_none() {
            return Err(Error::Precondition("training target must contain a token".into()));
        }
        let full_text = format!("{prompt} {target}");
        let prompt_bytes = prompt.len();
        let base = full_text.as_ptr() as usize;
        let loss_mask = full_text
            .split_whitespace()
            .map(|tok| tok.as_ptr() as usize - base >= prompt_bytes)
            .collect();
        Ok(Self {
            record_id: record_id.into(),
            prompt_char_end: prompt.chars().count(),
            full_text,
            loss_mask,
        })
    }

    pub fn tokens(&self) -> Vec<&str> {
        self.full_text.split_whitespace().collect()
    }

    pub fn prompt_text(&self) -> &str {
        let end = self
            .full_text
            .char_indices()
            .nth(self.prompt_char_end)
            .map(|(i, _)| i)
            .unwrap_or(self.full_text.len());
        &self.full_text[..end]
    }
}

/// Emits one prompt-masked example per train record: the zero-shot recovery
/// prompt over the response, followed by the original instruction.
pub fn emit_training_data(corpus: &Corpus, variant: RecoveryVariant) -> Result<Vec<MaskedExample>> {
    corpus
        .in_split(Split::Train)
        .map(|r| {
            let response = r
                .response
                .as_deref()
                .filter(|t| !t.trim().is_empty())
                .ok_or_else(|| Error::Precondition(format!("train record {:?} has no response", r.id)))?;
            let prompt = render_zero_shot(variant, response)?;
            MaskedExample::new(r.id.clone(), &prompt, &r.instruction)
        })
        .collect()
}
