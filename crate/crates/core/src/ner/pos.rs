//! Coarse part-of-speech tagging over ~12 classes, by closed-class word
//! lists plus suffix rules. A deliberately small approximation: it exists to
//! feed categorical context features to the baseline tagger, not to be a
//! real POS tagger.

use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CoarsePos {
    Det,
    Prep,
    Pron,
    Conj,
    Aux,
    Verb,
    Adv,
    Adj,
    Noun,
    Num,
    Punct,
    Other,
}

impl fmt::Display for CoarsePos {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            CoarsePos::Det => "DET",
            CoarsePos::Prep => "PREP",
            CoarsePos::Pron => "PRON",
            CoarsePos::Conj => "CONJ",
            CoarsePos::Aux => "AUX",
            CoarsePos::Verb => "VERB",
            CoarsePos::Adv => "ADV",
            CoarsePos::Adj => "ADJ",
            CoarsePos::Noun => "NOUN",
            CoarsePos::Num => "NUM",
            CoarsePos::Punct => "PUNCT",
            CoarsePos::Other => "OTHER",
        };
        f.write_str(s)
    }
}

const DETS: &[&str] = &[
    "the", "a", "an", "this", "that", "these", "those", "her", "his", "its", "their", "my",
    "your", "our", "some", "any", "each", "every",
];
const PREPS: &[&str] = &[
    "of", "in", "on", "for", "with", "to", "at", "by", "from", "after", "before", "during",
    "without", "under", "over", "into", "about", "per",
];
const PRONS: &[&str] = &[
    "he", "she", "it", "they", "we", "i", "you", "him", "them", "us", "who", "which", "me",
];
const CONJS: &[&str] = &["and", "or", "but", "nor", "so", "yet", "while", "because", "if"];
const AUXES: &[&str] = &[
    "is", "was", "are", "were", "be", "been", "being", "has", "have", "had", "does", "did",
    "do", "will", "would", "can", "could", "may", "might", "should", "must",
];
const ADVS: &[&str] = &[
    "not", "no", "very", "daily", "twice", "also", "now", "then", "previously", "recently",
    "currently", "today", "considerably", "again", "often",
];
const VERBS: &[&str] = &[
    "takes", "take", "taking", "took", "taken", "causes", "cause", "caused", "causing",
    "started", "start", "starting", "stopped", "stop", "reports", "report", "denies", "deny",
    "uses", "use", "using", "helped", "help", "helps", "relieved", "relieve", "recommend",
    "continues", "continue", "developed", "develop", "resolved", "noted", "discussed", "held",
    "attributes", "improved", "manage", "monitoring", "seen", "reviewed", "includes",
    "refilled",
];

/// Tag one word in isolation (a pure function of the word).
pub fn tag_word(word: &str) -> CoarsePos {
    let lower = word.to_lowercase();
    let is_punct = word.chars().all(|c| c.is_ascii_punctuation());
    if !word.is_empty() && is_punct {
        return CoarsePos::Punct;
    }
    if word.chars().all(|c| c.is_ascii_digit() || c == '.' || c == ',')
        && word.chars().any(|c| c.is_ascii_digit())
    {
        return CoarsePos::Num;
    }
    for (list, pos) in [
        (DETS, CoarsePos::Det),
        (PREPS, CoarsePos::Prep),
        (PRONS, CoarsePos::Pron),
        (CONJS, CoarsePos::Conj),
        (AUXES, CoarsePos::Aux),
        (ADVS, CoarsePos::Adv),
        (VERBS, CoarsePos::Verb),
    ] {
        if list.contains(&lower.as_str()) {
            return pos;
        }
    }
    if lower.ends_with("ly") {
        return CoarsePos::Adv;
    }
    if lower.ends_with("ing") || lower.ends_with("ed") {
        return CoarsePos::Verb;
    }
    if lower.ends_with("ous")
        || lower.ends_with("ful")
        || lower.ends_with("ive")
        || lower.ends_with("al")
        || lower.ends_with("ic")
    {
        return CoarsePos::Adj;
    }
    if lower.chars().all(|c| c.is_ascii_alphabetic()) {
        return CoarsePos::Noun;
    }
    CoarsePos::Other
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn closed_classes_and_rules() {
        assert_eq!(tag_word("the"), CoarsePos::Det);
        assert_eq!(tag_word("for"), CoarsePos::Prep);
        assert_eq!(tag_word("takes"), CoarsePos::Verb);
        assert_eq!(tag_word("500"), CoarsePos::Num);
        assert_eq!(tag_word(";"), CoarsePos::Punct);
        assert_eq!(tag_word("quickly"), CoarsePos::Adv);
        assert_eq!(tag_word("itching"), CoarsePos::Verb); // suffix rule fires first
        assert_eq!(tag_word("turmeric"), CoarsePos::Adj); // -ic
        assert_eq!(tag_word("nausea"), CoarsePos::Noun);
        assert_eq!(tag_word("b12"), CoarsePos::Other);
    }

    #[test]
    fn case_insensitive() {
        assert_eq!(tag_word("The"), tag_word("the"));
        assert_eq!(tag_word("TAKES"), CoarsePos::Verb);
    }
}
