//! Column-format BIO files: one `token<TAB>tag` per line, a blank line after
//! each sentence, UTF-8. Gold files must be strictly legal BIO; violations
//! are reported with their location rather than repaired.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

use super::{spans_to_tags, tags_to_spans, DecodeMode, Sentence, Tag, TagSequence};

/// Parse BIO text. `source` names the input in error messages.
pub fn parse_bio(text: &str, source: &str) -> Result<Vec<(Sentence, TagSequence)>> {
    let mut out: Vec<(Sentence, TagSequence)> = Vec::new();
    let mut tokens: Vec<String> = Vec::new();
    let mut tags: Vec<Tag> = Vec::new();
    let mut block_start_line = 1usize;
    let mut saw_line_in_block = false;

    let flush = |tokens: &mut Vec<String>,
                     tags: &mut Vec<Tag>,
                     start_line: usize,
                     out: &mut Vec<(Sentence, TagSequence)>|
     -> Result<()> {
        if tokens.is_empty() {
            return Err(Error::parse(source, start_line, "empty sentence block"));
        }
        let id = format!("s{}", out.len());
        let sentence = Sentence::new(id, std::mem::take(tokens))
            .map_err(|e| Error::parse(source, start_line, e.to_string()))?;
        let seq = std::mem::take(tags);
        if let Err(Error::IllegalTagSequence { indices }) =
            tags_to_spans(&seq, DecodeMode::Strict)
        {
            return Err(Error::parse(
                source,
                start_line,
                format!("illegal tag sequence at token indices {indices:?}"),
            ));
        }
        out.push((sentence, seq));
        Ok(())
    };

    let mut line_no = 0usize;
    for line in text.lines() {
        line_no += 1;
        if line.is_empty() {
            flush(&mut tokens, &mut tags, block_start_line, &mut out)?;
            block_start_line = line_no + 1;
            saw_line_in_block = false;
            continue;
        }
        if !saw_line_in_block {
            block_start_line = line_no;
            saw_line_in_block = true;
        }
        let (token, tag_str) = line.split_once('\t').ok_or_else(|| {
            Error::parse(source, line_no, format!("expected token<TAB>tag, got {line:?}"))
        })?;
        if token.is_empty() || token.contains(char::is_whitespace) {
            return Err(Error::parse(
                source,
                line_no,
                format!("bad token {token:?}"),
            ));
        }
        let tag = Tag::parse(tag_str).ok_or_else(|| {
            Error::parse(source, line_no, format!("unknown tag {tag_str:?}"))
        })?;
        tokens.push(token.to_string());
        tags.push(tag);
    }
    if !tokens.is_empty() {
        flush(&mut tokens, &mut tags, block_start_line, &mut out)?;
    }
    Ok(out)
}

/// Render sentences in the BIO column format (trailing blank line after every
/// sentence, so write∘parse∘write is byte-identical).
pub fn bio_to_string(items: &[(Sentence, TagSequence)]) -> String {
    let mut s = String::new();
    for (sentence, tags) in items {
        debug_assert_eq!(sentence.len(), tags.len());
        for (token, tag) in sentence.tokens.iter().zip(tags) {
            s.push_str(token);
            s.push('\t');
            s.push_str(tag.as_str());
            s.push('\n');
        }
        s.push('\n');
    }
    s
}

pub fn read_bio(path: impl AsRef<Path>) -> Result<Vec<(Sentence, TagSequence)>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path)?;
    parse_bio(&text, &path.display().to_string())
}

pub fn write_bio(path: impl AsRef<Path>, items: &[(Sentence, TagSequence)]) -> Result<()> {
    for (sentence, tags) in items {
        if sentence.len() != tags.len() {
            return Err(Error::InvalidArgument {
                op: "write_bio",
                msg: format!(
                    "sentence {} has {} tokens but {} tags",
                    sentence.id,
                    sentence.len(),
                    tags.len()
                ),
            });
        }
        // Gold output must be legal.
        tags_to_spans(tags, DecodeMode::Strict)?;
    }
    fs::write(path, bio_to_string(items))?;
    Ok(())
}

/// Convenience: gold spans of every sentence in a BIO corpus.
pub fn corpus_spans(
    items: &[(Sentence, TagSequence)],
) -> Vec<(String, Vec<super::EntitySpan>)> {
    items
        .iter()
        .map(|(s, tags)| {
            let spans = tags_to_spans(tags, DecodeMode::Strict)
                .expect("gold corpus is strictly legal");
            (s.id.clone(), spans)
        })
        .collect()
}

/// Build a (sentence, tags) pair from gold spans.
pub fn sentence_with_spans(
    id: &str,
    tokens: &[&str],
    spans: &[super::EntitySpan],
) -> Result<(Sentence, TagSequence)> {
    let sentence = Sentence::new(id, tokens.iter().map(|t| t.to_string()).collect())?;
    let tags = spans_to_tags(spans, sentence.len())?;
    Ok((sentence, tags))
}
