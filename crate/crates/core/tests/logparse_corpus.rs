use std::collections::HashSet;

use opsforge::logparse::{
    joint_parse, load_annotated, mine_semantics, score_ci_extraction, KnowledgeDb, Lexicon, Provenance,
};
use opsforge::telemetry::{LogLevel, LogRecord};
use proptest::prelude::*;

fn data(name: &str) -> String {
    format!("{}/data/{name}", env!("CARGO_MANIFEST_DIR"))
}

#[test]
fn bundled_corpus_ci_f1() {
    let corpus = load_annotated(data("ci_corpus.jsonl")).unwrap();
    assert_eq!(corpus.len(), 50);
    let lexicon = Lexicon::load(data("lexicon.txt")).unwrap();
    let c = score_ci_extraction(&corpus, &lexicon);
    println!(
        "ci extraction: {c:?} p={:.3} r={:.3} f1={:.3}",
        c.precision(),
        c.recall(),
        c.f1()
    );
    assert!(c.f1() >= 0.9, "f1 {}", c.f1());
}

const NOUNS: &[&str] = &["cell", "host", "volume", "user", "block", "port"];
const FILLER: &[&str] = &[
    "started", "failed", "on", "in", "for", "to", "from", "=", "retrying", "after",
];

fn token() -> impl Strategy<Value = String> {
    prop_oneof![
        prop::sample::select(NOUNS).prop_map(str::to_string),
        prop::sample::select(FILLER).prop_map(str::to_string),
        "[0-9a-f]{6,8}",
        "[0-9]{2,4}",
        (0u8..4, 0u8..4).prop_map(|(a, b)| format!("10.0.{a}.{b}")),
    ]
}

fn message() -> impl Strategy<Value = String> {
    prop::collection::vec(token(), 1..8).prop_map(|t| t.join(" "))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(20))]

    // Every implicit (c, i) must have been recorded as explicit (c, i)
    // earlier, and the knowledge base never shrinks.
    #[test]
    fn implicit_inference_is_sound(batch in prop::collection::vec(message(), 500)) {
        let lexicon = Lexicon::new(NOUNS);
        let mut db = KnowledgeDb::new();
        let mut explicit_seen: HashSet<(String, String)> = HashSet::new();
        let mut last_len = 0;
        for (i, msg) in batch.iter().enumerate() {
            let rec = LogRecord::new(i as i64, "svc", LogLevel::Info, msg.as_str());
            let mined = mine_semantics(&rec, &lexicon);
            let parsed = joint_parse(&rec, &mined, &mut db);
            // a message's own explicit pairs are recorded before inference
            for p in parsed.ci_pairs.iter().filter(|p| p.provenance == Provenance::Explicit) {
                explicit_seen.insert((p.concept.clone(), p.instance.clone()));
            }
            for p in parsed.ci_pairs.iter().filter(|p| p.provenance == Provenance::Implicit) {
                let key = (p.concept.clone(), p.instance.clone());
                prop_assert!(explicit_seen.contains(&key), "unsound implicit pair {:?}", key);
            }
            prop_assert_eq!(parsed.restore_message(), msg.clone());
            prop_assert!(db.len() >= last_len);
            last_len = db.len();
        }
    }
}
