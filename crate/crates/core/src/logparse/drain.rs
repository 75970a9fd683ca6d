//! Fixed-depth prefix-tree template miner (Drain), used as the syntax-only
//! baseline and for coarse alert grouping.
//!
//! The first tree level splits by token count, the next `depth - 2` levels
//! by leading tokens (tokens containing digits route through `<*>`). Each
//! leaf holds log groups; a message joins the most similar group of its
//! leaf when the share of positions it matches exactly reaches the
//! similarity threshold, and mismatched positions become `<*>`.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::joint::WILDCARD;
use crate::error::{Error, Result};

pub const DEFAULT_DEPTH: usize = 4;
pub const DEFAULT_SIM_THRESHOLD: f64 = 0.5;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LogGroup {
    pub tokens: Vec<String>,
    pub size: usize,
}

impl LogGroup {
    pub fn template(&self) -> String {
        self.tokens.join(" ")
    }
}

#[derive(Debug, Default)]
struct Node {
    children: BTreeMap<String, Node>,
    groups: Vec<usize>,
}

/// Incremental Drain parser.
#[derive(Debug)]
pub struct Drain {
    depth: usize,
    sim_threshold: f64,
    root: BTreeMap<usize, Node>,
    groups: Vec<LogGroup>,
}

impl Drain {
    pub fn new(depth: usize, sim_threshold: f64) -> Result<Self> {
        if depth < 2 {
            return Err(Error::param("depth", "must be at least 2"));
        }
        if !(sim_threshold > 0.0 && sim_threshold < 1.0) {
            return Err(Error::param("sim_threshold", "must lie in (0, 1)"));
        }
        Ok(Drain {
            depth,
            sim_threshold,
            root: BTreeMap::new(),
            groups: Vec::new(),
        })
    }

    pub fn groups(&self) -> &[LogGroup] {
        &self.groups
    }

    /// Adds a message and returns the id of the group it joined.
    pub fn add(&mut self, message: &str) -> usize {
        let tokens: Vec<String> = message.split_whitespace().map(str::to_string).collect();
        let mut node = self.root.entry(tokens.len()).or_default();
        for tok in tokens.iter().take(self.depth - 2) {
            let key = if tok.bytes().any(|b| b.is_ascii_digit()) {
                WILDCARD.to_string()
            } else {
                tok.clone()
            };
            node = node.children.entry(key).or_default();
        }

        let mut best: Option<(usize, f64, usize)> = None;
        for &gid in &node.groups {
            let (sim, wildcards) = similarity(&self.groups[gid].tokens, &tokens);
            let better = match best {
                None => true,
                Some((_, bs, bw)) => sim > bs || (sim == bs && wildcards > bw),
            };
            if better {
                best = Some((gid, sim, wildcards));
            }
        }

        match best {
            Some((gid, sim, _)) if sim >= self.sim_threshold => {
                let group = &mut self.groups[gid];
                for (t, m) in group.tokens.iter_mut().zip(&tokens) {
                    if t != m {
                        *t = WILDCARD.to_string();
                    }
                }
                group.size += 1;
                gid
            }
            _ => {
                self.groups.push(LogGroup { tokens, size: 1 });
                let gid = self.groups.len() - 1;
                node.groups.push(gid);
                gid
            }
        }
    }
}

// Share of positions where template and message agree exactly (wildcards
// never count as agreement), plus the template's wildcard count.
fn similarity(template: &[String], tokens: &[String]) -> (f64, usize) {
    if template.is_empty() {
        return (1.0, 0);
    }
    let mut same = 0;
    let mut wildcards = 0;
    for (t, m) in template.iter().zip(tokens) {
        if t == WILDCARD {
            wildcards += 1;
        } else if t == m {
            same += 1;
        }
    }
    (same as f64 / template.len() as f64, wildcards)
}

/// Template assignment for a batch of messages.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SyntaxParse {
    pub groups: Vec<LogGroup>,
    /// Group id per input message.
    pub assignment: Vec<usize>,
}

impl SyntaxParse {
    /// Final template of message `i`.
    pub fn template_of(&self, i: usize) -> String {
        self.groups[self.assignment[i]].template()
    }

    pub fn templates(&self) -> Vec<String> {
        (0..self.assignment.len()).map(|i| self.template_of(i)).collect()
    }
}

pub fn syntax_parse<S: AsRef<str>>(messages: &[S], depth: usize, sim_threshold: f64) -> Result<SyntaxParse> {
    let mut drain = Drain::new(depth, sim_threshold)?;
    let assignment = messages.iter().map(|m| drain.add(m.as_ref())).collect();
    Ok(SyntaxParse {
        groups: drain.groups,
        assignment,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_messages_share_template() {
        let p = syntax_parse(&["disk quota ok", "disk quota ok"], 4, 0.5).unwrap();
        assert_eq!(p.groups.len(), 1);
        assert_eq!(p.template_of(1), "disk quota ok");
    }

    #[test]
    fn differing_parameter_becomes_wildcard() {
        // Trace: both have 2 tokens; "connect" routes the same child, and the
        // second token holds digits, so both land in leaf [2, connect, <*>].
        // Similarity of the second message to group 0 is 1/2 >= 0.5.
        let p = syntax_parse(&["connect 10.0.0.1", "connect 10.0.0.2"], 4, 0.5).unwrap();
        assert_eq!(p.groups.len(), 1);
        assert_eq!(p.template_of(0), "connect <*>");
        assert_eq!(p.template_of(1), "connect <*>");
    }

    #[test]
    fn token_count_partitions() {
        let p = syntax_parse(&["job done", "job done now"], 4, 0.1).unwrap();
        assert_eq!(p.groups.len(), 2);
    }

    #[test]
    fn below_threshold_founds_new_group() {
        let p = syntax_parse(&["a b c d", "a x y z"], 3, 0.5).unwrap();
        assert_eq!(p.groups.len(), 2);
        assert_eq!(p.assignment, vec![0, 1]);
    }

    #[test]
    fn depth_must_be_at_least_two() {
        assert!(syntax_parse(&["x"], 1, 0.5).is_err());
        assert!(syntax_parse(&["x", "x"], 2, 0.5).unwrap().groups.len() == 1);
    }
}
