//! Sentence-level corpus model and file formats.
//!
//! Sentences are pre-tokenized (whitespace); no tokenizer ships here.
//! Entity spans are token-index ranges (start inclusive, end exclusive) over
//! two classes, supplement (DS) and sign/symptom (Event), serialized through
//! the BIO tagging scheme. Relation instances pair one DS span with one
//! Event span under a three-way label.

use serde::{Deserialize, Serialize};

mod bio;
mod lexicon;
mod relations;
mod synthetic;

pub use bio::{bio_to_string, corpus_spans, parse_bio, read_bio, sentence_with_spans, write_bio};
pub use lexicon::{read_lexicon, write_lexicon, Lexicon};
pub use relations::{
    parse_relations, read_relations, relations_to_string, write_relations,
};
pub use synthetic::{generate_synthetic, SyntheticConfig, SyntheticCorpus};

use std::fmt;

use crate::error::{Error, Result};

/// One pre-tokenized sentence with a stable identifier.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Sentence {
    pub id: String,
    pub tokens: Vec<String>,
}

impl Sentence {
    pub fn new(id: impl Into<String>, tokens: Vec<String>) -> Result<Sentence> {
        if tokens.is_empty() {
            return Err(Error::InvalidArgument {
                op: "Sentence::new",
                msg: "empty token list".into(),
            });
        }
        if let Some(t) = tokens.iter().find(|t| t.is_empty() || t.contains(char::is_whitespace)) {
            return Err(Error::InvalidArgument {
                op: "Sentence::new",
                msg: format!("token {t:?} is empty or contains whitespace"),
            });
        }
        Ok(Sentence {
            id: id.into(),
            tokens,
        })
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn text(&self) -> String {
        self.tokens.join(" ")
    }
}

/// Entity classes tagged by the NER stage.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EntityLabel {
    Ds,
    Event,
}

impl fmt::Display for EntityLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EntityLabel::Ds => write!(f, "DS"),
            EntityLabel::Event => write!(f, "Event"),
        }
    }
}

/// Token-index span, start inclusive, end exclusive.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct EntitySpan {
    pub label: EntityLabel,
    pub start: usize,
    pub end: usize,
}

impl EntitySpan {
    pub fn new(label: EntityLabel, start: usize, end: usize) -> EntitySpan {
        EntitySpan { label, start, end }
    }

    pub fn ds(start: usize, end: usize) -> EntitySpan {
        EntitySpan::new(EntityLabel::Ds, start, end)
    }

    pub fn event(start: usize, end: usize) -> EntitySpan {
        EntitySpan::new(EntityLabel::Event, start, end)
    }

    pub fn validate(&self, sentence_len: usize) -> Result<()> {
        if self.start >= self.end || self.end > sentence_len {
            return Err(Error::InvalidSpan {
                start: self.start,
                end: self.end,
                len: sentence_len,
            });
        }
        Ok(())
    }

    /// Representative token used for relative-distance features: the last
    /// token of the span.
    pub fn head(&self) -> usize {
        self.end - 1
    }

    /// Surface form over the sentence's tokens, space-joined.
    pub fn surface(&self, sentence: &Sentence) -> String {
        sentence.tokens[self.start..self.end].join(" ")
    }
}

/// Per-token BIO tags over the two entity classes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Tag {
    O,
    BDs,
    IDs,
    BEvent,
    IEvent,
}

/// Tags in index order; the tag index doubles as the CRF state index.
pub const TAGS: [Tag; 5] = [Tag::O, Tag::BDs, Tag::IDs, Tag::BEvent, Tag::IEvent];

/// Number of distinct tags.
pub const NUM_TAGS: usize = TAGS.len();

impl Tag {
    pub fn index(self) -> usize {
        match self {
            Tag::O => 0,
            Tag::BDs => 1,
            Tag::IDs => 2,
            Tag::BEvent => 3,
            Tag::IEvent => 4,
        }
    }

    pub fn from_index(i: usize) -> Tag {
        TAGS[i]
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Tag::O => "O",
            Tag::BDs => "B-DS",
            Tag::IDs => "I-DS",
            Tag::BEvent => "B-Event",
            Tag::IEvent => "I-Event",
        }
    }

    pub fn parse(s: &str) -> Option<Tag> {
        match s {
            "O" => Some(Tag::O),
            "B-DS" => Some(Tag::BDs),
            "I-DS" => Some(Tag::IDs),
            "B-Event" => Some(Tag::BEvent),
            "I-Event" => Some(Tag::IEvent),
            _ => None,
        }
    }

    /// The entity class this tag opens or continues, if any.
    pub fn entity(self) -> Option<EntityLabel> {
        match self {
            Tag::O => None,
            Tag::BDs | Tag::IDs => Some(EntityLabel::Ds),
            Tag::BEvent | Tag::IEvent => Some(EntityLabel::Event),
        }
    }

    pub fn is_begin(self) -> bool {
        matches!(self, Tag::BDs | Tag::BEvent)
    }

    pub fn is_inside(self) -> bool {
        matches!(self, Tag::IDs | Tag::IEvent)
    }

    /// BIO legality of `self` followed by `next`: I-X is only allowed after
    /// B-X or I-X.
    pub fn may_precede(self, next: Tag) -> bool {
        if next.is_inside() {
            self.entity() == next.entity()
        } else {
            true
        }
    }

    /// Whether a sequence may legally start with this tag.
    pub fn may_start(self) -> bool {
        !self.is_inside()
    }
}

impl fmt::Display for Tag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

pub type TagSequence = Vec<Tag>;

/// Span-decoding strictness: gold files must be legal; model outputs are
/// repaired by reading a dangling I-X as B-X.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DecodeMode {
    Strict,
    Lenient,
}

/// Expand non-overlapping spans into a BIO tag sequence.
pub fn spans_to_tags(spans: &[EntitySpan], len: usize) -> Result<TagSequence> {
    let mut sorted: Vec<&EntitySpan> = spans.iter().collect();
    sorted.sort_by_key(|s| s.start);
    for w in sorted.windows(2) {
        if w[1].start < w[0].end {
            return Err(Error::InvalidArgument {
                op: "spans_to_tags",
                msg: format!("overlapping spans {:?} and {:?}", w[0], w[1]),
            });
        }
    }
    let mut tags = vec![Tag::O; len];
    for span in sorted {
        span.validate(len)?;
        let (b, i) = match span.label {
            EntityLabel::Ds => (Tag::BDs, Tag::IDs),
            EntityLabel::Event => (Tag::BEvent, Tag::IEvent),
        };
        tags[span.start] = b;
        for t in tags.iter_mut().take(span.end).skip(span.start + 1) {
            *t = i;
        }
    }
    Ok(tags)
}

/// Decode a BIO tag sequence into spans. Strict mode rejects illegal
/// sequences, listing every offending index; lenient mode opens a new span
/// at a dangling I-X.
pub fn tags_to_spans(tags: &[Tag], mode: DecodeMode) -> Result<Vec<EntitySpan>> {
    let mut bad: Vec<usize> = Vec::new();
    let mut spans: Vec<EntitySpan> = Vec::new();
    let mut open: Option<(EntityLabel, usize)> = None;
    for (i, &tag) in tags.iter().enumerate() {
        let legal = match i {
            0 => tag.may_start(),
            _ => tags[i - 1].may_precede(tag),
        };
        if !legal {
            bad.push(i);
        }
        match tag {
            Tag::O => {
                if let Some((label, start)) = open.take() {
                    spans.push(EntitySpan::new(label, start, i));
                }
            }
            t if t.is_begin() => {
                if let Some((label, start)) = open.take() {
                    spans.push(EntitySpan::new(label, start, i));
                }
                open = Some((t.entity().unwrap(), i));
            }
            t => {
                // I-X: continues a span of the same class, otherwise (lenient)
                // starts one.
                let class = t.entity().unwrap();
                match open {
                    Some((label, _)) if label == class => {}
                    _ => {
                        if let Some((label, start)) = open.take() {
                            spans.push(EntitySpan::new(label, start, i));
                        }
                        open = Some((class, i));
                    }
                }
            }
        }
    }
    if let Some((label, start)) = open {
        spans.push(EntitySpan::new(label, start, tags.len()));
    }
    if mode == DecodeMode::Strict && !bad.is_empty() {
        return Err(Error::IllegalTagSequence { indices: bad });
    }
    Ok(spans)
}

/// Three-way relation classes between a DS span and an Event span.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RelationLabel {
    /// Indication: the DS is taken for the Event.
    Positive,
    /// Adverse event: the DS caused the Event.
    Negative,
    /// No direct relationship in this sentence.
    NotRelated,
}

/// Relation labels in index order (also the classifier's output order).
pub const RELATION_LABELS: [RelationLabel; 3] = [
    RelationLabel::Positive,
    RelationLabel::Negative,
    RelationLabel::NotRelated,
];

impl RelationLabel {
    pub fn index(self) -> usize {
        match self {
            RelationLabel::Positive => 0,
            RelationLabel::Negative => 1,
            RelationLabel::NotRelated => 2,
        }
    }

    pub fn from_index(i: usize) -> RelationLabel {
        RELATION_LABELS[i]
    }

    pub fn as_str(self) -> &'static str {
        match self {
            RelationLabel::Positive => "positive",
            RelationLabel::Negative => "negative",
            RelationLabel::NotRelated => "not_related",
        }
    }

    pub fn parse(s: &str) -> Option<RelationLabel> {
        match s {
            "positive" => Some(RelationLabel::Positive),
            "negative" => Some(RelationLabel::Negative),
            "not_related" => Some(RelationLabel::NotRelated),
            _ => None,
        }
    }
}

impl fmt::Display for RelationLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One classification unit: a sentence, one DS span, one Event span, and the
/// relation between them.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RelationInstance {
    pub sentence: Sentence,
    pub ds: EntitySpan,
    pub event: EntitySpan,
    pub label: RelationLabel,
}

impl RelationInstance {
    pub fn new(
        sentence: Sentence,
        ds: EntitySpan,
        event: EntitySpan,
        label: RelationLabel,
    ) -> Result<RelationInstance> {
        if ds.label != EntityLabel::Ds {
            return Err(Error::InvalidArgument {
                op: "RelationInstance::new",
                msg: format!("ds span has label {}", ds.label),
            });
        }
        if event.label != EntityLabel::Event {
            return Err(Error::InvalidArgument {
                op: "RelationInstance::new",
                msg: format!("event span has label {}", event.label),
            });
        }
        ds.validate(sentence.len())?;
        event.validate(sentence.len())?;
        Ok(RelationInstance {
            sentence,
            ds,
            event,
            label,
        })
    }
}
