use reprompt_core::promptkit::{render_few_shot, render_synth_meta, render_zero_shot, FewShotExemplar, RecoveryVariant};

const QUERY: &str = "The sun set slowly over the quiet hills.";

fn golden(name: &str) -> String {
    let path = format!("{}/tests/golden/{name}", env!("CARGO_MANIFEST_DIR"));
    std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{path}: {e}"))
}

fn exemplars() -> Vec<FewShotExemplar> {
    [
        ("Paris is the capital of France.", "What is the capital of France?"),
        ("Roses are red, violets are blue.", "Write a short rhyming poem."),
        ("1. Hiking 2. Reading 3. Cooking", "List three hobbies."),
    ]
    .iter()
    .enumerate()
    .map(|(i, (t, p))| FewShotExemplar {
        sample_text: t.to_string(),
        sample_prompt: p.to_string(),
        source_record_id: format!("ex{i}"),
    })
    .collect()
}

#[test]
fn zero_shot_prompts_match_golden_files() {
    assert_eq!(render_zero_shot(RecoveryVariant::Q1, QUERY).unwrap(), golden("recovery_q1.txt"));
    assert_eq!(render_zero_shot(RecoveryVariant::Q2, QUERY).unwrap(), golden("recovery_q2.txt"));
}

#[test]
fn three_shot_prompt_matches_golden_file() {
    let rendered = render_few_shot(RecoveryVariant::Q2, &exemplars(), QUERY).unwrap();
    assert_eq!(rendered, golden("recovery_fewshot_q2.txt"));
    assert_eq!(rendered.matches("Text:").count(), 4);
    assert_eq!(rendered.matches("Prompt:").count(), 4);
}

#[test]
fn synth_meta_prompt_matches_golden_file() {
    let meta = render_synth_meta();
    assert_eq!(meta, golden("synth_meta.txt"));
    assert!(meta.contains("set of 20 creative task instructions"));
}
