//! Bag-of-words TF-IDF vectors and cosine similarity for short texts.

use std::collections::{BTreeMap, HashMap, HashSet};

const STOPWORDS: &[&str] = &[
    "a", "an", "and", "are", "as", "at", "be", "been", "but", "by", "can", "cannot", "for", "from", "has", "have", "i",
    "in", "is", "it", "its", "me", "my", "not", "of", "on", "or", "our", "so", "that", "the", "this", "to", "was",
    "we", "were", "with", "you", "your", "all", "any", "again", "since", "now", "when", "just", "very",
];

fn stem(word: &str) -> String {
    for suffix in ["ing", "ed", "es", "s"] {
        if let Some(root) = word.strip_suffix(suffix) {
            if root.len() >= 3 {
                return root.to_string();
            }
        }
    }
    word.to_string()
}

/// Lowercased alphabetic word stems, stopwords and placeholders removed.
pub fn terms(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_ascii_alphanumeric())
        .filter(|w| w.len() >= 2 && w.bytes().all(|b| b.is_ascii_alphabetic()))
        .map(|w| w.to_ascii_lowercase())
        .filter(|w| !STOPWORDS.contains(&w.as_str()))
        .map(|w| stem(&w))
        .collect()
}

/// Smoothed inverse document frequencies fitted on a document collection.
#[derive(Debug, Clone, Default)]
pub struct TfIdf {
    idf: HashMap<String, f64>,
    n_docs: usize,
}

pub type SparseVec = BTreeMap<String, f64>;

impl TfIdf {
    pub fn fit<'a>(docs: impl IntoIterator<Item = &'a str>) -> Self {
        let mut df: HashMap<String, usize> = HashMap::new();
        let mut n_docs = 0;
        for d in docs {
            n_docs += 1;
            let unique: HashSet<String> = terms(d).into_iter().collect();
            for t in unique {
                *df.entry(t).or_default() += 1;
            }
        }
        let idf = df
            .into_iter()
            .map(|(t, f)| (t, ((1.0 + n_docs as f64) / (1.0 + f as f64)).ln() + 1.0))
            .collect();
        TfIdf { idf, n_docs }
    }

    pub fn vectorize(&self, text: &str) -> SparseVec {
        let mut tf: SparseVec = BTreeMap::new();
        for t in terms(text) {
            *tf.entry(t).or_default() += 1.0;
        }
        // unseen terms get the maximum idf
        let unseen = (1.0 + self.n_docs as f64).ln() + 1.0;
        for (t, v) in tf.iter_mut() {
            *v *= self.idf.get(t).copied().unwrap_or(unseen);
        }
        tf
    }
}

pub fn cosine(a: &SparseVec, b: &SparseVec) -> f64 {
    let dot: f64 = a.iter().filter_map(|(k, v)| b.get(k).map(|w| v * w)).sum();
    let na = a.values().map(|v| v * v).sum::<f64>().sqrt();
    let nb = b.values().map(|v| v * v).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        (dot / (na * nb)).clamp(0.0, 1.0)
    }
}
