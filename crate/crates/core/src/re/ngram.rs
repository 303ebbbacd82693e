//! Bag-of-n-gram featurization for the random-forest baseline: lowercasing,
//! stop-word removal, unigram/bigram presence features over the surface
//! tokens, plus a second view with the queried DS and Event spans collapsed
//! to placeholder tokens so the classifier sees which pair is asked about.

use std::collections::BTreeSet;

use crate::corpus::RelationInstance;

/// Fixed function-word stop list (~50 entries) applied before n-gram
/// extraction. Placeholder tokens are never removed.
pub const STOP_WORDS: &[&str] = &[
    "a", "an", "the", "and", "or", "but", "if", "while", "with", "without", "for", "of", "in",
    "on", "at", "by", "to", "from", "after", "before", "during", "under", "over", "into",
    "about", "per", "is", "was", "are", "were", "be", "been", "has", "have", "had", "do",
    "does", "did", "will", "would", "can", "could", "no", "not", "nor", "so", "her", "his",
    "its", "their", "she", "he", "it", "they", "this", "that",
];

pub const DS_PLACEHOLDER: &str = "<ds>";
pub const EVENT_PLACEHOLDER: &str = "<event>";

fn is_stop(token: &str) -> bool {
    STOP_WORDS.contains(&token)
}

fn ngrams_into(tokens: &[String], orders: &[usize], prefix_u: &str, prefix_b: &str, out: &mut BTreeSet<String>) {
    for &n in orders {
        match n {
            1 => {
                for t in tokens {
                    out.insert(format!("{prefix_u}{t}"));
                }
            }
            2 => {
                for w in tokens.windows(2) {
                    out.insert(format!("{prefix_b}{}_{}", w[0], w[1]));
                }
            }
            3 => {
                for w in tokens.windows(3) {
                    out.insert(format!("t{prefix_b}{}_{}_{}", w[0], w[1], w[2]));
                }
            }
            _ => {}
        }
    }
}

/// Sparse binary features of one instance, deterministically ordered.
pub fn ngram_featurize(instance: &RelationInstance, orders: &[usize]) -> Vec<String> {
    let lower: Vec<String> = instance
        .sentence
        .tokens
        .iter()
        .map(|t| t.to_lowercase())
        .collect();
    let mut features = BTreeSet::new();

    // Surface view.
    let surface: Vec<String> = lower.iter().filter(|t| !is_stop(t)).cloned().collect();
    ngrams_into(&surface, orders, "u=", "b=", &mut features);

    // Placeholder view: collapse the queried spans.
    let mut masked: Vec<String> = Vec::with_capacity(lower.len());
    let mut i = 0;
    while i < lower.len() {
        if i == instance.ds.start {
            masked.push(DS_PLACEHOLDER.to_string());
            i = instance.ds.end;
        } else if i == instance.event.start {
            masked.push(EVENT_PLACEHOLDER.to_string());
            i = instance.event.end;
        } else {
            masked.push(lower[i].clone());
            i += 1;
        }
    }
    let masked: Vec<String> = masked
        .into_iter()
        .filter(|t| t == DS_PLACEHOLDER || t == EVENT_PLACEHOLDER || !is_stop(t))
        .collect();
    ngrams_into(&masked, orders, "pu=", "pb=", &mut features);

    features.into_iter().collect()
}
