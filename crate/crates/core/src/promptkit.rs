//! Byte-exact prompt rendering for recovery, few-shot and synthetic
//! generation, plus few-shot exemplar selection.
//!
//! Templates live in `templates/` and are compiled in. Placeholders are
//! `{name}`; substituted values are never re-scanned, so a response that
//! happens to contain `{generatedText}` is inserted literally.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, Split};
use crate::digest::{seeded_key, sha256_hex};
use crate::error::{Error, Result};

const RECOVERY_Q1: &str = include_str!("../templates/recovery_q1.txt");
const RECOVERY_Q2: &str = include_str!("../templates/recovery_q2.txt");
const RECOVERY_FEWSHOT: &str = include_str!("../templates/recovery_fewshot.txt");
const SYNTH_META: &str = include_str!("../templates/synth_meta.txt");
const INSTRUCT_WRAP: &str = include_str!("../templates/instruct_wrap.txt");

pub const Q1_TASK: &str = "What prompt was used to generate this Text using LLM?";
pub const Q2_TASK: &str = "Predict and return only the prompt which was used to generate the Text.";

pub const EXEMPLAR_COUNT: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TemplateName {
    RecoveryQ1,
    RecoveryQ2,
    RecoveryFewshot,
    SynthMeta,
    InstructWrap,
}

impl TemplateName {
    pub const ALL: [TemplateName; 5] = [
        TemplateName::RecoveryQ1,
        TemplateName::RecoveryQ2,
        TemplateName::RecoveryFewshot,
        TemplateName::SynthMeta,
        TemplateName::InstructWrap,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            TemplateName::RecoveryQ1 => "recovery_q1",
            TemplateName::RecoveryQ2 => "recovery_q2",
            TemplateName::RecoveryFewshot => "recovery_fewshot",
            TemplateName::SynthMeta => "synth_meta",
            TemplateName::InstructWrap => "instruct_wrap",
        }
    }

    pub fn body(self) -> &'static str {
        match self {
            TemplateName::RecoveryQ1 => RECOVERY_Q1,
            TemplateName::RecoveryQ2 => RECOVERY_Q2,
            TemplateName::RecoveryFewshot => RECOVERY_FEWSHOT,
            TemplateName::SynthMeta => SYNTH_META,
            TemplateName::InstructWrap => INSTRUCT_WRAP,
        }
    }
}

/// SHA-256 of every template body, for run manifests.
pub fn template_digests() -> BTreeMap<String, String> {
    TemplateName::ALL
        .iter()
        .map(|t| (t.as_str().to_string(), sha256_hex(t.body())))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RecoveryVariant {
    /// Question form: "What prompt was used ...?"
    Q1,
    /// Request form: "Predict and return only the prompt ..."
    Q2,
}

impl RecoveryVariant {
    pub fn task(self) -> &'static str {
        match self {
            RecoveryVariant::Q1 => Q1_TASK,
            RecoveryVariant::Q2 => Q2_TASK,
        }
    }

    fn zero_shot_template(self) -> TemplateName {
        match self {
            RecoveryVariant::Q1 => TemplateName::RecoveryQ1,
            RecoveryVariant::Q2 => TemplateName::RecoveryQ2,
        }
    }
}

impl fmt::Display for RecoveryVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RecoveryVariant::Q1 => "q1",
            RecoveryVariant::Q2 => "q2",
        })
    }
}

impl FromStr for RecoveryVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "q1" | "1" => Ok(RecoveryVariant::Q1),
            "q2" | "2" => Ok(RecoveryVariant::Q2),
            other => Err(Error::InvalidArgument(format!("unknown prompt variant {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FewShotExemplar {
    pub sample_text: String,
    pub sample_prompt: String,
    pub source_record_id: String,
}

/// Substitutes `{name}` placeholders. Every placeholder in the template must
/// be bound.
pub fn render(template: &str, bindings: &[(&str, &str)]) -> Result<String> {
    let mut out = String::with_capacity(template.len() + bindings.iter().map(|b| b.1.len()).sum::<usize>());
    let mut rest = template;
    while let Some(open) = rest.find('{') {
        out.push_str(&rest[..open]);
        let after = &rest[open + 1..];
        let name_len = after
            .find(|c: char| !(c.is_ascii_alphanumeric() || c == '_'))
            .unwrap_or(after.len());
        if name_len > 0 && after[name_len..].starts_with('}') {
            let name = &after[..name_len];
            let value = bindings
                .iter()
                .find(|(k, _)| *k == name)
                .map(|(_, v)| *v)
                .ok_or_else(|| Error::Template(format!("unbound placeholder {{{name}}}")))?;
            out.push_str(value);
            rest = &after[name_len + 1..];
        } else {
            out.push('{');
            rest = after;
        }
    }
    out.push_str(rest);
    Ok(out)
}

pub fn render_zero_shot(variant: RecoveryVariant, generated_text: &str) -> Result<String> {
    if generated_text.is_empty() {
        return Err(Error::Precondition("generated text must be non-empty".into()));
    }
    render(variant.zero_shot_template().body(), &[("generatedText", generated_text)])
}

pub fn render_few_shot(
    variant: RecoveryVariant,
    exemplars: &[FewShotExemplar],
    generated_text: &str,
) -> Result<String> {
    if exemplars.len() != EXEMPLAR_COUNT {
        return Err(Error::Precondition(format!(
            "few-shot rendering needs exactly {EXEMPLAR_COUNT} exemplars, got {}",
            exemplars.len()
        )));
    }
    if generated_text.is_empty() {
        return Err(Error::Precondition("generated text must be non-empty".into()));
    }
    let [e1, e2, e3] = [&exemplars[0], &exemplars[1], &exemplars[2]];
    render(
        RECOVERY_FEWSHOT,
        &[
            ("task", variant.task()),
            ("sampleText1", &e1.sample_text),
            ("samplePrompt1", &e1.sample_prompt),
            ("sampleText2", &e2.sample_text),
            ("samplePrompt2", &e2.sample_prompt),
            ("sampleText3", &e3.sample_text),
            ("samplePrompt3", &e3.sample_prompt),
            ("generatedText", generated_text),
        ],
    )
}

/// The synthetic-instruction meta-prompt, verbatim.
pub fn render_synth_meta() -> &'static str {
    SYNTH_META
}

/// Wraps a plain instruction in the instruction-model markers.
pub fn wrap_instruction(instruction: &str) -> Result<String> {
    if instruction.is_empty() {
        return Err(Error::Precondition("instruction must be non-empty".into()));
    }
    render(INSTRUCT_WRAP, &[("instruction", instruction)])
}

/// Picks three train-split exemplars with responses, deterministically for
/// a seed, preferring distinct categories.
pub fn select_exemplars(corpus: &Corpus, seed: u64) -> Result<Vec<FewShotExemplar>> {
    let mut pool: Vec<_> = corpus
        .in_split(Split::Train)
        .filter(|r| r.has_response())
        .collect();
    if pool.len() < EXEMPLAR_COUNT {
        return Err(Error::Precondition(format!(
            "need at least {EXEMPLAR_COUNT} train records with responses, found {}",
            pool.len()
        )));
    }
    pool.sort_by_cached_key(|r| (seeded_key(seed, &[r.id.as_str()]), r.id.clone()));

    let mut chosen = Vec::with_capacity(EXEMPLAR_COUNT);
    let mut categories = HashSet::new();
    for (i, r) in pool.iter().enumerate() {
        if chosen.len() == EXEMPLAR_COUNT {
            break;
        }
        if categories.insert(r.category) {
            chosen.push(i);
        }
    }
    for i in 0..pool.len() {
        if chosen.len() == EXEMPLAR_COUNT {
            break;
        }
        if !chosen.contains(&i) {
            chosen.push(i);
        }
    }
    Ok(chosen
        .into_iter()
        .map(|i| FewShotExemplar {
            sample_text: pool[i].response.clone().unwrap_or_default(),
            sample_prompt: pool[i].instruction.clone(),
            source_record_id: pool[i].id.clone(),
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{Category, InstructionRecord};

    #[test]
    fn zero_shot_examples() {
        assert_eq!(
            render_zero_shot(RecoveryVariant::Q2, "T").unwrap(),
            "<s>[INST] Predict and return only the prompt which was used to generate the Text.\nText: T\nPrompt: [/INST]"
        );
        assert_eq!(
            render_zero_shot(RecoveryVariant::Q1, "T").unwrap(),
            "<s>[INST] What prompt was used to generate this Text using LLM?\nText: T\nPrompt: [/INST]"
        );
        assert!(render_zero_shot(RecoveryVariant::Q1, "").is_err());
    }

    #[test]
    fn substituted_values_are_not_rescanned() {
        let out = render_zero_shot(RecoveryVariant::Q2, "see {generatedText} and {x").unwrap();
        assert!(out.contains("Text: see {generatedText} and {x\n"));
    }

    #[test]
    fn unbound_placeholder_is_an_error() {
        assert!(matches!(render("a {b} c", &[]), Err(Error::Template(_))));
        assert_eq!(render("{ not a placeholder }", &[]).unwrap(), "{ not a placeholder }");
    }

    fn ex(t: &str, p: &str) -> FewShotExemplar {
        FewShotExemplar { sample_text: t.into(), sample_prompt: p.into(), source_record_id: "x".into() }
    }

    #[test]
    fn few_shot_markers_and_order() {
        let exs = [ex("t1", "p1"), ex("t2", "p2"), ex("t3", "p3")];
        let out = render_few_shot(RecoveryVariant::Q2, &exs, "query").unwrap();
        assert_eq!(out.matches("Text:").count(), 4);
        assert_eq!(out.matches("Prompt:").count(), 4);
        let positions: Vec<usize> = ["p1", "p2", "p3"].iter().map(|p| out.find(p).unwrap()).collect();
        assert!(positions.windows(2).all(|w| w[0] < w[1]));
        assert!(out.starts_with("<s>[INST] Predict and return only the prompt"));
        assert!(out.ends_with("Text: query\nPrompt: [/INST]"));
        assert!(render_few_shot(RecoveryVariant::Q2, &exs[..2], "query").is_err());
    }

    #[test]
    fn few_shot_with_empty_exemplars_keeps_scaffolding() {
        let exs = [ex("", ""), ex("", ""), ex("", "")];
        let out = render_few_shot(RecoveryVariant::Q1, &exs, "q").unwrap();
        assert_eq!(out.matches("Text:").count(), 4);
        assert_eq!(out.matches("Prompt:").count(), 4);
        assert!(out.contains("[/INST]"));
    }

    #[test]
    fn synth_meta_is_stable() {
        let m = render_synth_meta();
        assert!(m.starts_with("You are asked to come up with"));
        assert!(m.contains("set of 20 creative task instructions"));
        assert!(m.contains("Write a poem inspired by the colors of a sunset"));
        assert_eq!(m, render_synth_meta());
    }

    fn train_record(id: &str, cat: Category) -> InstructionRecord {
        let mut r = InstructionRecord::human(id, cat, format!("instruction {id}"));
        r.response = Some(format!("response {id}"));
        r.split = Split::Train;
        r
    }

    #[test]
    fn exemplars_forced_when_exactly_three() {
        let mut recs = vec![
            train_record("a", Category::OpenQa),
            train_record("b", Category::OpenQa),
            train_record("c", Category::Brainstorming),
        ];
        let mut test = train_record("t", Category::Summarization);
        test.split = Split::Test;
        recs.push(test);
        let c = Corpus::new(recs).unwrap();
        let mut ids: Vec<String> = select_exemplars(&c, 1).unwrap().into_iter().map(|e| e.source_record_id).collect();
        ids.sort();
        assert_eq!(ids, ["a", "b", "c"]);
    }

    #[test]
    fn exemplars_deterministic_diverse_and_seed_sensitive() {
        let cats = Category::RETAINED;
        let recs: Vec<_> = (0..100).map(|i| train_record(&format!("r{i:03}"), cats[i % 5])).collect();
        let c = Corpus::new(recs).unwrap();
        let a = select_exemplars(&c, 1).unwrap();
        assert_eq!(a, select_exemplars(&c, 1).unwrap());
        let cats_seen: HashSet<_> = a.iter().map(|e| c.get(&e.source_record_id).unwrap().category).collect();
        assert_eq!(cats_seen.len(), 3);
        let differing = (2..12).filter(|&s| select_exemplars(&c, s).unwrap() != a).count();
        assert!(differing >= 9);
    }

    #[test]
    fn exemplars_need_three_train_records() {
        let c = Corpus::new(vec![train_record("a", Category::OpenQa)]).unwrap();
        assert!(matches!(select_exemplars(&c, 0), Err(Error::Precondition(_))));
    }
}
