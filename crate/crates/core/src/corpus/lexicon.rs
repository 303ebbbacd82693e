//! Supplement term lexicon: surface form → canonical name, covering
//! synonyms, brand names, abbreviations, and misspellings. Lookup is
//! case-insensitive and canonical names always map to themselves.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Default)]
pub struct Lexicon {
    canonical: BTreeMap<String, String>,
}

impl Lexicon {
    pub fn new() -> Lexicon {
        Lexicon::default()
    }

    /// Register a surface form for a canonical name (both stored lowercased).
    pub fn insert(&mut self, surface: &str, canonical: &str) {
        let canonical = canonical.to_lowercase();
        self.canonical
            .insert(canonical.clone(), canonical.clone());
        self.canonical.insert(surface.to_lowercase(), canonical);
    }

    /// Canonical name for a surface form, if known.
    pub fn canonicalize(&self, surface: &str) -> Option<&str> {
        self.canonical
            .get(&surface.to_lowercase())
            .map(|s| s.as_str())
    }

    /// Canonical name, falling back to the lowercased surface form.
    pub fn canonicalize_or_self(&self, surface: &str) -> String {
        match self.canonicalize(surface) {
            Some(c) => c.to_string(),
            None => surface.to_lowercase(),
        }
    }

    /// All (surface, canonical) entries in sorted order.
    pub fn entries(&self) -> impl Iterator<Item = (&str, &str)> {
        self.canonical.iter().map(|(s, c)| (s.as_str(), c.as_str()))
    }

    /// Distinct canonical names.
    pub fn canonical_names(&self) -> Vec<String> {
        let mut names: Vec<String> = self.canonical.values().cloned().collect();
        names.sort();
        names.dedup();
        names
    }

    /// Surface forms (including the canonical itself) of one canonical name.
    pub fn surfaces_of(&self, canonical: &str) -> Vec<String> {
        let canonical = canonical.to_lowercase();
        self.canonical
            .iter()
            .filter(|(_, c)| **c == canonical)
            .map(|(s, _)| s.clone())
            .collect()
    }

    pub fn len(&self) -> usize {
        self.canonical.len()
    }

    pub fn is_empty(&self) -> bool {
        self.canonical.is_empty()
    }
}

/// Two tab-separated columns: surface form, canonical name.
pub fn parse_lexicon(text: &str, source: &str) -> Result<Lexicon> {
    let mut lex = Lexicon::new();
    for (i, line) in text.lines().enumerate() {
        if line.is_empty() {
            continue;
        }
        let (surface, canonical) = line.split_once('\t').ok_or_else(|| {
            Error::parse(source, i + 1, format!("expected surface<TAB>canonical, got {line:?}"))
        })?;
        lex.insert(surface, canonical);
    }
    Ok(lex)
}

pub fn read_lexicon(path: impl AsRef<Path>) -> Result<Lexicon> {
    let path = path.as_ref();
    let text = fs::read_to_string(path)?;
    parse_lexicon(&text, &path.display().to_string())
}

pub fn write_lexicon(path: impl AsRef<Path>, lexicon: &Lexicon) -> Result<()> {
    let mut s = String::new();
    for (surface, canonical) in lexicon.entries() {
        s.push_str(surface);
        s.push('\t');
        s.push_str(canonical);
        s.push('\n');
    }
    fs::write(path, s)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn case_insensitive_and_self_mapping() {
        let mut lex = Lexicon::new();
        lex.insert("Cran", "Cranberry");
        assert_eq!(lex.canonicalize("CRAN"), Some("cranberry"));
        assert_eq!(lex.canonicalize("cranberry"), Some("cranberry"));
        assert_eq!(lex.canonicalize("unknown"), None);
        assert_eq!(lex.canonicalize_or_self("Ginko Biloba"), "ginko biloba");
    }

    #[test]
    fn parse_rejects_missing_column() {
        assert!(parse_lexicon("cran cranberry\n", "lex.tsv").is_err());
        let lex = parse_lexicon("cran\tcranberry\ntumeric\tturmeric\n", "lex.tsv").unwrap();
        assert_eq!(lex.canonicalize("tumeric"), Some("turmeric"));
    }
}
