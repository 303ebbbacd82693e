//! Signal discovery over unlabeled sentences: tag entities, enumerate
//! DS×Event pairs, classify every pair, canonicalize and aggregate
//! frequencies, apply a source-sentence frequency threshold, and flag each
//! remaining signal as known or unknown against a knowledge-base file.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::{EntityLabel, Lexicon, RelationInstance, RelationLabel, Sentence};
use crate::error::{Error, Result};
use crate::ner::NerTagger;
use crate::re::RelationClassifier;
use crate::tensor::Rng;

/// An aggregated (DS, Event, relation) candidate signal with its
/// source-sentence frequency. `relation` is never `NotRelated`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SignalPair {
    pub ds: String,
    pub event: String,
    pub relation: RelationLabel,
    pub frequency: usize,
    pub known: Option<bool>,
    pub source_ids: Vec<String>,
}

/// Reference set of known (ds, event, relation) triples, all lowercase.
#[derive(Debug, Clone, Default)]
pub struct KnowledgeBase {
    entries: BTreeSet<(String, String, RelationLabel)>,
}

impl KnowledgeBase {
    pub fn new() -> KnowledgeBase {
        KnowledgeBase::default()
    }

    pub fn insert(&mut self, ds: &str, event: &str, relation: RelationLabel) {
        self.entries
            .insert((ds.to_lowercase(), event.to_lowercase(), relation));
    }

    pub fn contains(&self, ds: &str, event: &str, relation: RelationLabel) -> bool {
        self.entries
            .contains(&(ds.to_lowercase(), event.to_lowercase(), relation))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &(String, String, RelationLabel)> {
        self.entries.iter()
    }
}

/// Three tab-separated lowercase columns: ds, event, relation
/// (positive|negative).
pub fn parse_kb(text: &str, source: &str) -> Result<KnowledgeBase> {
    let mut kb = KnowledgeBase::new();
    for (i, line) in text.lines().enumerate() {
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 3 {
            return Err(Error::parse(
                source,
                i + 1,
                format!("expected ds<TAB>event<TAB>relation, got {line:?}"),
            ));
        }
        let relation = match fields[2] {
            "positive" => RelationLabel::Positive,
            "negative" => RelationLabel::Negative,
            other => {
                return Err(Error::parse(
                    source,
                    i + 1,
                    format!("relation must be positive or negative, got {other:?}"),
                ))
            }
        };
        kb.insert(fields[0], fields[1], relation);
    }
    Ok(kb)
}

pub fn read_kb(path: impl AsRef<Path>) -> Result<KnowledgeBase> {
    let path = path.as_ref();
    parse_kb(&fs::read_to_string(path)?, &path.display().to_string())
}

pub fn write_kb(path: impl AsRef<Path>, kb: &KnowledgeBase) -> Result<()> {
    let mut s = String::new();
    for (ds, event, relation) in kb.iter() {
        s.push_str(&format!("{ds}\t{event}\t{relation}\n"));
    }
    fs::write(path, s)?;
    Ok(())
}

/// Run the taggers over raw sentences and classify every DS×Event pair.
/// Sentences lacking a DS or an Event mention contribute nothing; a sentence
/// with m DS and n Event mentions yields m·n classified instances.
pub fn extract_pairs(
    sentences: &[Sentence],
    ner: &dyn NerTagger,
    re: &dyn RelationClassifier,
) -> Result<Vec<(RelationInstance, RelationLabel)>> {
    let mut out = Vec::new();
    for sentence in sentences {
        let spans = ner.tag(sentence)?;
        let ds_spans: Vec<_> = spans.iter().filter(|s| s.label == EntityLabel::Ds).collect();
        let event_spans: Vec<_> = spans
            .iter()
            .filter(|s| s.label == EntityLabel::Event)
            .collect();
        if ds_spans.is_empty() || event_spans.is_empty() {
            continue;
        }
        for &ds in &ds_spans {
            for &event in &event_spans {
                // Placeholder label; the classifier's prediction is returned
                // alongside the instance.
                let instance =
                    RelationInstance::new(sentence.clone(), *ds, *event, RelationLabel::NotRelated)?;
                let label = re.classify(&instance)?;
                out.push((instance, label));
            }
        }
    }
    Ok(out)
}

/// Canonicalize and aggregate classified pairs into signals. DS surfaces go
/// through the lexicon; Event surfaces are lowercased, with an optional
/// event-synonym lexicon applied first. `NotRelated` pairs are dropped, and a
/// pair occurring several times in one sentence counts that sentence once.
pub fn aggregate(
    classified: &[(RelationInstance, RelationLabel)],
    ds_lexicon: &Lexicon,
    event_synonyms: Option<&Lexicon>,
) -> Vec<SignalPair> {
    let mut sources: BTreeMap<(String, String, RelationLabel), BTreeSet<String>> = BTreeMap::new();
    for (instance, label) in classified {
        if *label == RelationLabel::NotRelated {
            continue;
        }
        let ds = ds_lexicon.canonicalize_or_self(&instance.ds.surface(&instance.sentence));
        let event_surface = instance.event.surface(&instance.sentence);
        let event = match event_synonyms {
            Some(lex) => lex.canonicalize_or_self(&event_surface),
            None => event_surface.to_lowercase(),
        };
        sources
            .entry((ds, event, *label))
            .or_default()
            .insert(instance.sentence.id.clone());
    }
    sources
        .into_iter()
        .map(|((ds, event, relation), ids)| SignalPair {
            ds,
            event,
            relation,
            frequency: ids.len(),
            known: None,
            source_ids: ids.into_iter().collect(),
        })
        .collect()
}

pub const DEFAULT_MIN_FREQ: usize = 11;

/// Keep signals whose source-sentence frequency is at least `min_freq`
/// (default 11, i.e. strictly more than ten source sentences).
pub fn filter_threshold(pairs: Vec<SignalPair>, min_freq: usize) -> Vec<SignalPair> {
    pairs.into_iter().filter(|p| p.frequency >= min_freq).collect()
}

/// Per-relation known/unknown tally after KB comparison.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KbSummaryRow {
    pub relation: RelationLabel,
    pub total: usize,
    pub known: usize,
    pub unknown: usize,
}

impl KbSummaryRow {
    pub fn render(&self) -> String {
        format!(
            "{}: {} signals, {} ({}) known, {} ({}) unknown",
            self.relation,
            self.total,
            self.known,
            percent(self.known, self.total),
            self.unknown,
            percent(self.unknown, self.total),
        )
    }
}

fn percent(part: usize, total: usize) -> String {
    if total == 0 {
        "0.0%".to_string()
    } else {
        format!("{:.1}%", 100.0 * part as f64 / total as f64)
    }
}

/// Flag each signal against the knowledge base and tally per relation.
pub fn compare_kb(pairs: &mut [SignalPair], kb: &KnowledgeBase) -> Vec<KbSummaryRow> {
    for p in pairs.iter_mut() {
        p.known = Some(kb.contains(&p.ds, &p.event, p.relation));
    }
    [RelationLabel::Positive, RelationLabel::Negative]
        .iter()
        .map(|&relation| {
            let of_rel: Vec<_> = pairs.iter().filter(|p| p.relation == relation).collect();
            let known = of_rel.iter().filter(|p| p.known == Some(true)).count();
            KbSummaryRow {
                relation,
                total: of_rel.len(),
                known,
                unknown: of_rel.len() - known,
            }
        })
        .collect()
}

/// Report order: relation, then frequency descending, then ds, then event.
pub fn sort_for_report(pairs: &mut [SignalPair]) {
    pairs.sort_by(|a, b| {
        a.relation
            .index()
            .cmp(&b.relation.index())
            .then(b.frequency.cmp(&a.frequency))
            .then(a.ds.cmp(&b.ds))
            .then(a.event.cmp(&b.event))
    });
}

/// One row of the final signal report, with example source sentences for
/// manual review.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReportRow {
    pub ds: String,
    pub event: String,
    pub relation: RelationLabel,
    pub frequency: usize,
    pub known: Option<bool>,
    pub examples: Vec<String>,
}

/// Build the sorted signal report. Up to `max_examples` source sentences per
/// pair are attached, sampled deterministically from the given seed.
pub fn build_report(
    pairs: &[SignalPair],
    sentences_by_id: &BTreeMap<String, Sentence>,
    max_examples: usize,
    rng: &Rng,
) -> Vec<ReportRow> {
    let mut sorted = pairs.to_vec();
    sort_for_report(&mut sorted);
    sorted
        .iter()
        .map(|p| {
            let mut ids = p.source_ids.clone();
            let mut sub = rng.fork(&format!("examples/{}/{}/{}", p.ds, p.event, p.relation));
            sub.shuffle(&mut ids);
            let examples = ids
                .iter()
                .take(max_examples)
                .filter_map(|id| sentences_by_id.get(id).map(|s| s.text()))
                .collect();
            ReportRow {
                ds: p.ds.clone(),
                event: p.event.clone(),
                relation: p.relation,
                frequency: p.frequency,
                known: p.known,
                examples,
            }
        })
        .collect()
}

/// TSV rendering of a report: ds, event, relation, frequency, kb flag,
/// ;-joined examples.
pub fn report_to_tsv(rows: &[ReportRow]) -> String {
    let mut s = String::from("ds\tevent\trelation\tfrequency\tkb\texamples\n");
    for r in rows {
        let kb = match r.known {
            Some(true) => "known",
            Some(false) => "unknown",
            None => "-",
        };
        s.push_str(&format!(
            "{}\t{}\t{}\t{}\t{}\t{}\n",
            r.ds,
            r.event,
            r.relation,
            r.frequency,
            kb,
            r.examples.join(" ; ")
        ));
    }
    s
}

/// Parse the TSV report back; inverse of [`report_to_tsv`].
pub fn parse_report_tsv(text: &str, source: &str) -> Result<Vec<ReportRow>> {
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate().skip(1) {
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 6 {
            return Err(Error::parse(source, i + 1, "expected 6 columns"));
        }
        let relation = RelationLabel::parse(fields[2])
            .ok_or_else(|| Error::parse(source, i + 1, format!("bad relation {:?}", fields[2])))?;
        let frequency: usize = fields[3]
            .parse()
            .map_err(|_| Error::parse(source, i + 1, "bad frequency"))?;
        let known = match fields[4] {
            "known" => Some(true),
            "unknown" => Some(false),
            "-" => None,
            other => return Err(Error::parse(source, i + 1, format!("bad kb flag {other:?}"))),
        };
        rows.push(ReportRow {
            ds: fields[0].to_string(),
            event: fields[1].to_string(),
            relation,
            frequency,
            known,
            examples: if fields[5].is_empty() {
                Vec::new()
            } else {
                fields[5].split(" ; ").map(|s| s.to_string()).collect()
            },
        });
    }
    Ok(rows)
}
