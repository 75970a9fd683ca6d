//! Semantic log parsing.
//!
//! A semantics miner tags concept nouns and instance tokens in each
//! message and binds co-located pairs. The joint parser resolves instances
//! the miner could not bind through a knowledge base of previously seen
//! explicit pairs, and renders conceptualized templates. A Drain parser
//! provides the purely syntactic baseline.

mod drain;
mod joint;
mod knowledge;
mod miner;

use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use serde::{Deserialize, Serialize};

pub use drain::{syntax_parse, Drain, LogGroup, SyntaxParse, DEFAULT_DEPTH, DEFAULT_SIM_THRESHOLD};
pub use joint::{joint_parse, CiPair, ParsedLog, Provenance, WILDCARD};
pub use knowledge::{Conflict, KnowledgeDb, KnowledgeEntry};
pub use miner::{
    mine_message, mine_semantics, tokenize, ExplicitPair, Instance, InstanceClass, Lexicon, MinedSemantics, Token,
};

use crate::error::{Error, Result};
use crate::eval::Confusion;
use crate::telemetry::LogRecord;

/// Mines and jointly parses a batch in order, accumulating knowledge.
pub fn parse_batch(records: &[LogRecord], lexicon: &Lexicon, db: &mut KnowledgeDb) -> Vec<ParsedLog> {
    records
        .iter()
        .map(|r| joint_parse(r, &mine_semantics(r, lexicon), db))
        .collect()
}

/// Parsed logs whose templates come from the syntax parser; no concept
/// information is attached.
pub fn syntax_parsed(records: &[LogRecord], depth: usize, sim_threshold: f64) -> Result<Vec<ParsedLog>> {
    let messages: Vec<&str> = records.iter().map(|r| r.message.as_str()).collect();
    let parse = syntax_parse(&messages, depth, sim_threshold)?;
    Ok(records
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let template = parse.template_of(i);
            ParsedLog {
                ts: r.ts,
                service_id: r.service_id.clone(),
                session_id: r.session_id.clone(),
                conceptualized_template: template.clone(),
                template,
                ci_pairs: Vec::new(),
                orphan_concepts: Vec::new(),
                orphan_instances: Vec::new(),
                params: Vec::new(),
            }
        })
        .collect())
}

/// One line of the annotated CI-pair corpus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotatedMessage {
    pub message: String,
    /// Gold `(concept, instance)` pairs.
    pub ci_pairs: Vec<(String, String)>,
}

pub fn load_annotated(path: impl AsRef<Path>) -> Result<Vec<AnnotatedMessage>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    parse_annotated(BufReader::new(file))
}

pub fn parse_annotated(reader: impl BufRead) -> Result<Vec<AnnotatedMessage>> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::Malformed {
            line: i + 1,
            message: e.to_string(),
        })?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| Error::Malformed {
            line: i + 1,
            message: e.to_string(),
        })?);
    }
    Ok(out)
}

/// Micro-averaged CI-pair extraction scores over a corpus parsed in order
/// with a fresh knowledge base. Pairs are compared as multisets.
pub fn score_ci_extraction(corpus: &[AnnotatedMessage], lexicon: &Lexicon) -> Confusion {
    let mut db = KnowledgeDb::new();
    let mut total = Confusion::default();
    for (i, item) in corpus.iter().enumerate() {
        let record = LogRecord::new(
            i as i64,
            "corpus",
            crate::telemetry::LogLevel::Info,
            item.message.as_str(),
        );
        let parsed = joint_parse(&record, &mine_semantics(&record, lexicon), &mut db);
        let mut gold: Vec<(String, String)> = item.ci_pairs.clone();
        for p in &parsed.ci_pairs {
            match gold.iter().position(|(c, inst)| c == &p.concept && inst == &p.instance) {
                Some(pos) => {
                    gold.swap_remove(pos);
                    total.tp += 1;
                }
                None => total.fp += 1,
            }
        }
        total.fn_ += gold.len();
    }
    total
}
