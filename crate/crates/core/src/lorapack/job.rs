use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{trainable_params, LoraSpec, MaskedExample};
use crate::corpus::write_atomic;
use crate::digest::sha256_hex;
use crate::error::{Error, Result};

pub const DEFAULT_BACKBONE: &str = "mistralai/Mistral-7B-Instruct-v0.1";

pub const EXAMPLES_FILE: &str = "examples.jsonl";
pub const SPEC_FILE: &str = "lora_spec.json";
pub const TRAIN_CONFIG_FILE: &str = "train_config.json";
pub const MANIFEST_FILE: &str = "manifest.json";

/// Settings handed to the external trainer. Learning rate, batch size and
/// optimizer are left to the trainer's defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FinetuneHyperparams {
    pub epochs: u32,
    pub backbone: String,
    /// Which recovery prompt the examples were rendered with.
    pub prompt_variant: String,
}

impl Default for FinetuneHyperparams {
    fn default() -> Self {
        Self {
            epochs: 3,
            backbone: DEFAULT_BACKBONE.into(),
            prompt_variant: "q2".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct JobManifest {
    pub files: BTreeMap<String, String>,
    pub n_examples: usize,
    pub trainable_params: u64,
    /// SHA-256 over the per-file digests, in file-name order.
    pub digest: String,
}

#[derive(Serialize)]
struct SpecFile<'a> {
    #[serde(flatten)]
    spec: &'a LoraSpec,
    scaling: f64,
    trainable_params: u64,
}

/// Writes a self-contained bundle: `examples.jsonl` (full_text,
/// prompt_char_end, loss_mask per line), `lora_spec.json`,
/// `train_config.json` and `manifest.json`.
pub fn export_finetune_job(
    dir: &Path,
    spec: &LoraSpec,
    examples: &[MaskedExample],
    hyperparams: &FinetuneHyperparams,
) -> Result<JobManifest> {
    spec.validate()?;
    if examples.is_empty() {
        return Err(Error::Precondition("refusing to export a job with no training examples".into()));
    }
    let examples_body: String = examples
        .iter()
        .map(|e| serde_json::to_string(e).expect("example serializes") + "\n")
        .collect();
    let spec_body = serde_json::to_string_pretty(&SpecFile {
        spec,
        scaling: spec.scaling(),
        trainable_params: trainable_params(spec),
    })? + "\n";
    let config_body = serde_json::to_string_pretty(hyperparams)? + "\n";

    let bodies = [
        (EXAMPLES_FILE, examples_body),
        (SPEC_FILE, spec_body),
        (TRAIN_CONFIG_FILE, config_body),
    ];
    let mut files = BTreeMap::new();
    for (name, body) in &bodies {
        write_atomic(&dir.join(name), body.as_bytes())?;
        files.insert(name.to_string(), sha256_hex(body));
    }
    let digest = sha256_hex(files.iter().map(|(k, v)| format!("{k}:{v}\n")).collect::<String>());
    let manifest = JobManifest {
        files,
        n_examples: examples.len(),
        trainable_params: trainable_params(spec),
        digest,
    };
    write_atomic(&dir.join(MANIFEST_FILE), (serde_json::to_string_pretty(&manifest)? + "\n").as_bytes())?;
    Ok(manifest)
}
