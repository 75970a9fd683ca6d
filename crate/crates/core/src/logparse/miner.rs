//! Lexicon- and token-class based semantics miner.

use std::collections::BTreeSet;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::telemetry::LogRecord;

/// Instance token classes, most specific first.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InstanceClass {
    Uuid,
    Ip,
    Path,
    HexId,
    Integer,
}

impl InstanceClass {
    pub fn classify(token: &str) -> Option<InstanceClass> {
        if is_uuid(token) {
            Some(InstanceClass::Uuid)
        } else if is_ip(token) {
            Some(InstanceClass::Ip)
        } else if is_path(token) {
            Some(InstanceClass::Path)
        } else if is_hex_id(token) {
            Some(InstanceClass::HexId)
        } else if is_integer(token) {
            Some(InstanceClass::Integer)
        } else {
            None
        }
    }
}

fn is_hex_run(s: &str) -> bool {
    !s.is_empty() && s.bytes().all(|b| b.is_ascii_digit() || (b'a'..=b'f').contains(&b))
}

fn is_uuid(s: &str) -> bool {
    let parts: Vec<&str> = s.split('-').collect();
    parts.len() == 5
        && parts.iter().map(|p| p.len()).eq([8, 4, 4, 4, 12])
        && parts.iter().all(|p| is_hex_run(&p.to_ascii_lowercase()))
}

fn is_ip(s: &str) -> bool {
    let (addr, port) = match s.rsplit_once(':') {
        Some((a, p)) => (a, Some(p)),
        None => (s, None),
    };
    if let Some(p) = port {
        if p.is_empty() || p.len() > 5 || !p.bytes().all(|b| b.is_ascii_digit()) {
            return false;
        }
    }
    let octets: Vec<&str> = addr.split('.').collect();
    octets.len() == 4
        && octets.iter().all(|o| {
            !o.is_empty()
                && o.len() <= 3
                && o.bytes().all(|b| b.is_ascii_digit())
                && o.parse::<u16>().is_ok_and(|v| v <= 255)
        })
}

fn is_path(s: &str) -> bool {
    s.len() > 1 && s.starts_with('/') && !s.contains("//") && s[1..].bytes().any(|b| b.is_ascii_alphanumeric())
}

fn is_hex_id(s: &str) -> bool {
    s.len() >= 6 && is_hex_run(s)
}

fn is_integer(s: &str) -> bool {
    let digits = s.strip_prefix('-').unwrap_or(s);
    digits.len() >= 2 && digits.bytes().all(|b| b.is_ascii_digit())
}

/// A token of a message with its byte span.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Token {
    pub text: String,
    pub start: usize,
    pub end: usize,
}

const LEADING: &[char] = &['(', '[', '{', '"', '\'', '<'];
const TRAILING: &[char] = &[',', '.', ';', ':', ')', ']', '}', '"', '\'', '!', '?', '>'];

/// Splits on whitespace, trims surrounding punctuation and separates
/// `key=value` / `key:value` into three tokens.
pub fn tokenize(message: &str) -> Vec<Token> {
    let mut out = Vec::new();
    let mut offset = 0;
    for chunk in message.split_inclusive(char::is_whitespace) {
        let chunk_start = offset;
        offset += chunk.len();
        let raw = chunk.trim_end();
        let core = raw.trim_start_matches(LEADING);
        let start = chunk_start + (raw.len() - core.len());
        let core = core.trim_end_matches(TRAILING);
        if core.is_empty() {
            continue;
        }
        push_split(&mut out, core, start);
    }
    out
}

fn push_split(out: &mut Vec<Token>, core: &str, start: usize) {
    if let Some(pos) = core.find(['=', ':']) {
        let (key, rest) = core.split_at(pos);
        let value = &rest[1..];
        if !key.is_empty() && key.bytes().all(|b| b.is_ascii_alphabetic() || b == b'_') && !value.is_empty() {
            out.push(Token {
                text: key.to_string(),
                start,
                end: start + key.len(),
            });
            out.push(Token {
                text: rest[..1].to_string(),
                start: start + pos,
                end: start + pos + 1,
            });
            let value_start = start + pos + 1;
            push_split(out, value, value_start);
            return;
        }
    }
    out.push(Token {
        text: core.to_string(),
        start,
        end: start + core.len(),
    });
}

/// Concept nouns, matched case-insensitively; a trailing plural `s` is
/// tolerated.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Lexicon {
    nouns: BTreeSet<String>,
}

impl Lexicon {
    pub fn new<I, S>(nouns: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        Lexicon {
            nouns: nouns
                .into_iter()
                .map(|n| n.as_ref().trim().to_ascii_lowercase())
                .filter(|n| !n.is_empty())
                .collect(),
        }
    }

    /// One noun per line; blank lines and `#` comments are skipped.
    pub fn parse(text: &str) -> Self {
        Lexicon::new(
            text.lines()
                .map(str::trim)
                .filter(|l| !l.is_empty() && !l.starts_with('#')),
        )
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(Lexicon::parse(&text))
    }

    /// The cloud-operations noun list shipped with the crate.
    pub fn bundled() -> Self {
        Lexicon::parse(include_str!("../../data/lexicon.txt"))
    }

    pub fn len(&self) -> usize {
        self.nouns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nouns.is_empty()
    }

    /// The lexicon form of `token`, if it names a concept.
    pub fn concept_of(&self, token: &str) -> Option<&str> {
        let lower = token.to_ascii_lowercase();
        if let Some(n) = self.nouns.get(&lower) {
            return Some(n);
        }
        let singular = lower.strip_suffix('s')?;
        self.nouns.get(singular).map(String::as_str)
    }
}

const LINK_WORDS: &[&str] = &["in", "of", "for", "=", ":"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Instance {
    pub token: usize,
    pub text: String,
    pub class: InstanceClass,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExplicitPair {
    pub concept: String,
    /// Index into [`MinedSemantics::instances`].
    pub instance: usize,
}

/// Miner output for one message.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct MinedSemantics {
    pub tokens: Vec<Token>,
    /// Lexicon nouns not bound to an instance, in order of appearance.
    pub concepts: Vec<String>,
    pub explicit: Vec<ExplicitPair>,
    /// Every detected instance, in order of appearance.
    pub instances: Vec<Instance>,
}

impl MinedSemantics {
    pub fn is_paired(&self, instance: usize) -> bool {
        self.explicit.iter().any(|p| p.instance == instance)
    }
}

pub fn mine_semantics(record: &LogRecord, lexicon: &Lexicon) -> MinedSemantics {
    mine_message(&record.message, lexicon)
}

pub fn mine_message(message: &str, lexicon: &Lexicon) -> MinedSemantics {
    let tokens = tokenize(message);
    let mut instances = Vec::new();
    for (i, tok) in tokens.iter().enumerate() {
        if let Some(class) = InstanceClass::classify(&tok.text) {
            instances.push(Instance {
                token: i,
                text: tok.text.clone(),
                class,
            });
        }
    }
    let is_instance = |i: usize| instances.iter().any(|inst| inst.token == i);

    // A concept binds the instance right after it, or the one after a
    // single link word ("cell 949e1227", "user=42", "port of 80").
    let mut explicit = Vec::new();
    let mut bound_nouns = Vec::new();
    for (k, inst) in instances.iter().enumerate() {
        let i = inst.token;
        let noun_at = |j: usize| -> Option<(usize, String)> {
            if is_instance(j) {
                return None;
            }
            lexicon.concept_of(&tokens[j].text).map(|c| (j, c.to_string()))
        };
        let mut found = None;
        if i >= 1 {
            found = noun_at(i - 1);
            if found.is_none() && i >= 2 && LINK_WORDS.contains(&tokens[i - 1].text.to_ascii_lowercase().as_str()) {
                found = noun_at(i - 2);
            }
        }
        if let Some((j, concept)) = found {
            explicit.push(ExplicitPair { concept, instance: k });
            bound_nouns.push(j);
        }
    }

    let concepts = tokens
        .iter()
        .enumerate()
        .filter(|(i, _)| !bound_nouns.contains(i) && !is_instance(*i))
        .filter_map(|(_, t)| lexicon.concept_of(&t.text).map(str::to_string))
        .collect();

    MinedSemantics {
        tokens,
        concepts,
        explicit,
        instances,
    }
}
