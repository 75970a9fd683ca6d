use serde::{Deserialize, Serialize};

use super::knowledge::KnowledgeDb;
use super::miner::MinedSemantics;
use crate::telemetry::LogRecord;

pub const WILDCARD: &str = "<*>";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Provenance {
    Explicit,
    Implicit,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CiPair {
    pub concept: String,
    pub instance: String,
    pub provenance: Provenance,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParsedLog {
    pub ts: i64,
    pub service_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub session_id: Option<String>,
    /// Message with every instance replaced by `<*>`.
    pub template: String,
    /// Message with paired instances replaced by `<concept>` and orphan
    /// instances by `<*>`.
    pub conceptualized_template: String,
    pub ci_pairs: Vec<CiPair>,
    pub orphan_concepts: Vec<String>,
    pub orphan_instances: Vec<String>,
    /// All instances in message order; substituting them into `template`
    /// restores the message.
    pub params: Vec<String>,
}

impl ParsedLog {
    /// Rebuilds the original message from the template and parameters.
    pub fn restore_message(&self) -> String {
        let mut out = String::new();
        let mut rest = self.template.as_str();
        for p in &self.params {
            match rest.find(WILDCARD) {
                Some(pos) => {
                    out.push_str(&rest[..pos]);
                    out.push_str(p);
                    rest = &rest[pos + WILDCARD.len()..];
                }
                None => break,
            }
        }
        out.push_str(rest);
        out
    }
}

/// Combines miner output with the knowledge base: explicit pairs are
/// recorded, unpaired instances known to the base become implicit pairs,
/// and whatever stays unpaired is reported as orphans.
pub fn joint_parse(record: &LogRecord, mined: &MinedSemantics, db: &mut KnowledgeDb) -> ParsedLog {
    for pair in &mined.explicit {
        db.record_explicit(&mined.instances[pair.instance].text, &pair.concept, record.ts);
    }

    let mut ci_pairs = Vec::new();
    let mut orphan_instances = Vec::new();
    // (token index, placeholder) per instance
    let mut slots: Vec<(usize, String)> = Vec::with_capacity(mined.instances.len());
    for (k, inst) in mined.instances.iter().enumerate() {
        let explicit = mined.explicit.iter().find(|p| p.instance == k);
        let (concept, provenance) = match explicit {
            Some(p) => (Some(p.concept.clone()), Provenance::Explicit),
            None => (db.concept_of(&inst.text).map(str::to_string), Provenance::Implicit),
        };
        match concept {
            Some(concept) => {
                slots.push((inst.token, format!("<{concept}>")));
                ci_pairs.push(CiPair {
                    concept,
                    instance: inst.text.clone(),
                    provenance,
                });
            }
            None => {
                slots.push((inst.token, WILDCARD.to_string()));
                orphan_instances.push(inst.text.clone());
            }
        }
    }

    let mut orphan_concepts: Vec<String> = Vec::new();
    for c in &mined.concepts {
        let inferred = ci_pairs
            .iter()
            .any(|p| p.provenance == Provenance::Implicit && &p.concept == c);
        if !inferred && !orphan_concepts.contains(c) {
            orphan_concepts.push(c.clone());
        }
    }

    let message = &record.message;
    let mut template = String::with_capacity(message.len());
    let mut conceptualized = String::with_capacity(message.len());
    let mut cursor = 0;
    for (token, placeholder) in &slots {
        let t = &mined.tokens[*token];
        template.push_str(&message[cursor..t.start]);
        conceptualized.push_str(&message[cursor..t.start]);
        template.push_str(WILDCARD);
        conceptualized.push_str(placeholder);
        cursor = t.end;
    }
    template.push_str(&message[cursor..]);
    conceptualized.push_str(&message[cursor..]);

    ParsedLog {
        ts: record.ts,
        service_id: record.service_id.clone(),
        session_id: record.session_id.clone(),
        template,
        conceptualized_template: conceptualized,
        ci_pairs,
        orphan_concepts,
        orphan_instances,
        params: mined.instances.iter().map(|i| i.text.clone()).collect(),
    }
}
