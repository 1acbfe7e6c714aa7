//! Pipeline configuration: built-in defaults, then an optional TOML file,
//! then command-line flags.

use std::path::{Path, PathBuf};

use chrono::{DateTime, TimeZone, Utc};
use reprompt_core::corpus::SplitConfig;
use reprompt_core::llmgate::{
    Gateway, GenerationParams, LiveConfig, LiveGateway, MockGateway, DEFAULT_API_KEY_ENV,
};
use serde::Deserialize;

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum GatewayMode {
    Mock,
    Live,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GatewayFile {
    pub mode: Option<GatewayMode>,
    pub fixtures: Option<PathBuf>,
    pub endpoint: Option<String>,
    pub model: Option<String>,
    pub embedding_model: Option<String>,
    pub max_in_flight: Option<usize>,
    pub timeout_secs: Option<u64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamsFile {
    pub temperature: Option<f64>,
    pub top_p: Option<f64>,
    pub top_k: Option<u32>,
    pub max_tokens: Option<u32>,
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StageParamsFile {
    pub response: Option<ParamsFile>,
    pub synthetic: Option<ParamsFile>,
    pub recovery: Option<ParamsFile>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitFile {
    pub train: Option<f64>,
    pub val: Option<f64>,
    pub test: Option<f64>,
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LoraFile {
    pub rank: Option<u64>,
    pub alpha: Option<f64>,
    pub epochs: Option<u32>,
    pub backbone: Option<String>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnnotateFile {
    pub server: Option<String>,
    pub count: Option<usize>,
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    #[serde(default)]
    pub gateway: GatewayFile,
    #[serde(default)]
    pub params: StageParamsFile,
    #[serde(default)]
    pub split: SplitFile,
    #[serde(default)]
    pub lora: LoraFile,
    #[serde(default)]
    pub annotate: AnnotateFile,
    pub exemplar_seed: Option<u64>,
}

impl ConfigFile {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::new("io", format!("{}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| CliError::new("invalid_config", format!("{}: {e}", path.display())))
    }
}

/// Collects configuration problems so they can be reported together.
#[derive(Debug, Default)]
pub struct Problems(Vec<String>);

impl Problems {
    pub fn push(&mut self, p: impl Into<String>) {
        self.0.push(p.into());
    }

    pub fn check_params(&mut self, stage: &str, params: &GenerationParams) {
        if let Err(e) = params.validate() {
            self.push(format!("{stage} params: {e}"));
        }
    }

    pub fn finish(self) -> Result<(), CliError> {
        if self.0.is_empty() {
            Ok(())
        } else {
            Err(CliError::invalid_config(self.0))
        }
    }
}

/// Gateway flags shared by every stage that calls a model.
#[derive(Debug, Clone, Default, clap::Args)]
pub struct GatewayArgs {
    /// Backend: `mock` answers from a fixture file, `live` calls an endpoint.
    #[arg(long, value_enum)]
    pub gateway: Option<GatewayMode>,
    /// Mock fixture file (JSONL of prompt_hash/completion records).
    #[arg(long)]
    pub fixtures: Option<PathBuf>,
    /// Chat-completions base URL, e.g. http://localhost:8000/v1.
    #[arg(long)]
    pub endpoint: Option<String>,
    #[arg(long)]
    pub model: Option<String>,
    /// Model name for the embeddings endpoint (live mode).
    #[arg(long)]
    pub embedding_model: Option<String>,
    #[arg(long)]
    pub max_in_flight: Option<usize>,
}

/// Sampling overrides for the stage being run.
#[derive(Debug, Clone, Default, clap::Args)]
pub struct ParamArgs {
    #[arg(long, allow_negative_numbers = true)]
    pub temperature: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub top_p: Option<f64>,
    #[arg(long)]
    pub top_k: Option<u32>,
    #[arg(long)]
    pub max_tokens: Option<u32>,
    /// Generation seed passed to the backend.
    #[arg(long = "gen-seed")]
    pub seed: Option<u64>,
}

pub fn resolve_params(base: GenerationParams, file: Option<&ParamsFile>, flags: &ParamArgs) -> GenerationParams {
    let mut p = base;
    if let Some(f) = file {
        p.temperature = f.temperature.unwrap_or(p.temperature);
        p.top_p = f.top_p.unwrap_or(p.top_p);
        p.top_k = f.top_k.or(p.top_k);
        p.max_tokens = f.max_tokens.unwrap_or(p.max_tokens);
        p.seed = f.seed.unwrap_or(p.seed);
    }
    p.temperature = flags.temperature.unwrap_or(p.temperature);
    p.top_p = flags.top_p.unwrap_or(p.top_p);
    p.top_k = flags.top_k.or(p.top_k);
    p.max_tokens = flags.max_tokens.unwrap_or(p.max_tokens);
    p.seed = flags.seed.unwrap_or(p.seed);
    p
}

#[derive(Debug, Clone, PartialEq)]
pub enum GatewaySettings {
    Mock { fixtures: PathBuf },
    Live(LiveConfig),
}

impl GatewaySettings {
    /// Merges file and flags, recording every missing or invalid setting.
    pub fn resolve(file: &GatewayFile, flags: &GatewayArgs, problems: &mut Problems) -> Option<Self> {
        let mode = flags.gateway.or(file.mode).unwrap_or(GatewayMode::Mock);
        let max_in_flight = flags.max_in_flight.or(file.max_in_flight);
        if max_in_flight == Some(0) {
            problems.push("gateway max_in_flight must be >= 1");
        }
        match mode {
            GatewayMode::Mock => match flags.fixtures.clone().or_else(|| file.fixtures.clone()) {
                Some(fixtures) => Some(GatewaySettings::Mock { fixtures }),
                None => {
                    problems.push("mock gateway requires a fixture path (--fixtures or gateway.fixtures)");
                    None
                }
            },
            GatewayMode::Live => {
                let endpoint = flags.endpoint.clone().or_else(|| file.endpoint.clone());
                let model = flags.model.clone().or_else(|| file.model.clone());
                if endpoint.as_deref().is_none_or(|e| e.trim().is_empty()) {
                    problems.push("live gateway requires an endpoint (--endpoint or gateway.endpoint)");
                }
                if model.as_deref().is_none_or(|m| m.trim().is_empty()) {
                    problems.push("live gateway requires a model (--model or gateway.model)");
                }
                let (Some(endpoint), Some(model)) = (endpoint, model) else {
                    return None;
                };
                let mut cfg = LiveConfig::new(endpoint, model).with_api_key_from_env(DEFAULT_API_KEY_ENV);
                cfg.embedding_model = flags.embedding_model.clone().or_else(|| file.embedding_model.clone());
                if let Some(n) = max_in_flight {
                    cfg.max_in_flight = n;
                }
                if let Some(t) = file.timeout_secs {
                    cfg.timeout_secs = t;
                }
                Some(GatewaySettings::Live(cfg))
            }
        }
    }

    pub fn build(&self) -> Result<Box<dyn Gateway>, CliError> {
        match self {
            GatewaySettings::Mock { fixtures } => Ok(Box::new(MockGateway::from_fixture_file(fixtures)?)),
            GatewaySettings::Live(cfg) => Ok(Box::new(LiveGateway::new(cfg.clone()).map_err(reprompt_core::Error::from)?)),
        }
    }

    pub fn is_mock(&self) -> bool {
        matches!(self, GatewaySettings::Mock { .. })
    }
}

/// Timestamp written into run manifests: `SOURCE_DATE_EPOCH` when set, the
/// Unix epoch for mock runs (keeping reruns byte-identical), otherwise now.
pub fn manifest_timestamp(mock: bool) -> Result<DateTime<Utc>, CliError> {
    if let Ok(raw) = std::env::var("SOURCE_DATE_EPOCH") {
        let secs: i64 = raw
            .trim()
            .parse()
            .map_err(|_| CliError::new("invalid_config", format!("SOURCE_DATE_EPOCH {raw:?} is not an integer")))?;
        return Utc
            .timestamp_opt(secs, 0)
            .single()
            .ok_or_else(|| CliError::new("invalid_config", format!("SOURCE_DATE_EPOCH {secs} is out of range")));
    }
    Ok(if mock { DateTime::<Utc>::UNIX_EPOCH } else { Utc::now() })
}

pub fn resolve_split(file: &SplitFile, train: Option<f64>, val: Option<f64>, test: Option<f64>, seed: Option<u64>) -> SplitConfig {
    let d = SplitConfig::default();
    SplitConfig {
        train_frac: train.or(file.train).unwrap_or(d.train_frac),
        validation_frac: val.or(file.val).unwrap_or(d.validation_frac),
        test_frac: test.or(file.test).unwrap_or(d.test_frac),
        seed: seed.or(file.seed).unwrap_or(d.seed),
    }
}
