use std::fmt::Write;

use reprompt_core::corpus::{filter_retrievable, ingest_str, Category, IngestFormat};

/// Per-category sizes of the public Dolly release.
const DOLLY_COUNTS: [(&str, usize); 8] = [
    ("open_qa", 3742),
    ("general_qa", 2191),
    ("classification", 2136),
    ("closed_qa", 1773),
    ("brainstorming", 1766),
    ("information_extraction", 1506),
    ("summarization", 1188),
    ("creative_writing", 709),
];

#[test]
fn filtering_a_dolly_sized_corpus() {
    let mut text = String::new();
    for (cat, n) in DOLLY_COUNTS {
        for i in 0..n {
            let line = serde_json::json!({
                "instruction": format!("{cat} instruction {i}"),
                "context": if i % 3 == 0 { "some context" } else { "" },
                "response": "human response",
                "category": cat,
            });
            writeln!(text, "{line}").unwrap();
        }
    }
    let outcome = ingest_str(&text, IngestFormat::DollyJsonl);
    assert_eq!(outcome.corpus.len(), 15_011);
    assert_eq!(outcome.malformed + outcome.unknown_category, 0);

    let kept = filter_retrievable(&outcome.corpus);
    assert_eq!(kept.len(), 3742 + 2191 + 1766 + 1188 + 709);
    assert_eq!(kept.len(), 9_596);
    assert!(kept.iter().all(|r| Category::RETAINED.contains(&r.category)));
    assert!(kept.iter().all(|r| r.response.is_none()));
}
