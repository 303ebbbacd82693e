//! Evaluation: exact-match entity-level P/R/F1 for tagging, per-class and
//! micro-averaged P/R/F1 for relation classification, and table rendering in
//! the P / R / F1 / Num layout with optional mean ± std cells.

use std::collections::{BTreeMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::corpus::{EntityLabel, EntitySpan, RelationLabel, RELATION_LABELS};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrfScore {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// Count of gold items (Num).
    pub support: usize,
    /// True when the class never occurs in gold or predictions; the zeros
    /// are then a convention, not a measurement.
    pub undefined: bool,
}

impl PrfScore {
    pub fn from_counts(tp: usize, fp: usize, fn_: usize) -> PrfScore {
        let precision = if tp + fp > 0 {
            tp as f64 / (tp + fp) as f64
        } else {
            0.0
        };
        let recall = if tp + fn_ > 0 {
            tp as f64 / (tp + fn_) as f64
        } else {
            0.0
        };
        let f1 = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        PrfScore {
            precision,
            recall,
            f1,
            support: tp + fn_,
            undefined: tp + fp + fn_ == 0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NerReport {
    pub per_label: Vec<(EntityLabel, PrfScore)>,
    pub micro: PrfScore,
}

impl NerReport {
    pub fn label(&self, label: EntityLabel) -> &PrfScore {
        &self
            .per_label
            .iter()
            .find(|(l, _)| *l == label)
            .expect("label present")
            .1
    }
}

/// Entity-level scoring: a prediction is a true positive iff label, start,
/// and end all match a gold span of the same sentence. Micro pools TP/FP/FN
/// over both labels. Gold and predictions must cover the same sentence ids.
pub fn ner_score(
    gold: &[(String, Vec<EntitySpan>)],
    pred: &[(String, Vec<EntitySpan>)],
) -> Result<NerReport> {
    let gold_map: BTreeMap<&str, &Vec<EntitySpan>> =
        gold.iter().map(|(id, s)| (id.as_str(), s)).collect();
    let pred_map: BTreeMap<&str, &Vec<EntitySpan>> =
        pred.iter().map(|(id, s)| (id.as_str(), s)).collect();
    if gold_map.len() != gold.len() || pred_map.len() != pred.len() {
        return Err(Error::InvalidArgument {
            op: "ner_score",
            msg: "duplicate sentence ids".into(),
        });
    }
    if gold_map.keys().ne(pred_map.keys()) {
        return Err(Error::InvalidArgument {
            op: "ner_score",
            msg: "gold and predictions cover different sentence ids".into(),
        });
    }
    let labels = [EntityLabel::Ds, EntityLabel::Event];
    let mut tp = BTreeMap::new();
    let mut fp = BTreeMap::new();
    let mut fn_ = BTreeMap::new();
    for label in labels {
        tp.insert(label, 0usize);
        fp.insert(label, 0usize);
        fn_.insert(label, 0usize);
    }
    for (id, gold_spans) in &gold_map {
        let pred_spans = pred_map[id];
        let gold_set: HashSet<&EntitySpan> = gold_spans.iter().collect();
        let pred_set: HashSet<&EntitySpan> = pred_spans.iter().collect();
        for span in &pred_set {
            if gold_set.contains(*span) {
                *tp.get_mut(&span.label).unwrap() += 1;
            } else {
                *fp.get_mut(&span.label).unwrap() += 1;
            }
        }
        for span in &gold_set {
            if !pred_set.contains(*span) {
                *fn_.get_mut(&span.label).unwrap() += 1;
            }
        }
    }
    let per_label: Vec<(EntityLabel, PrfScore)> = labels
        .iter()
        .map(|&l| (l, PrfScore::from_counts(tp[&l], fp[&l], fn_[&l])))
        .collect();
    let micro = PrfScore::from_counts(
        tp.values().sum(),
        fp.values().sum(),
        fn_.values().sum(),
    );
    Ok(NerReport { per_label, micro })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReReport {
    pub per_class: Vec<(RelationLabel, PrfScore)>,
    pub micro: PrfScore,
    pub accuracy: f64,
}

impl ReReport {
    pub fn class(&self, label: RelationLabel) -> &PrfScore {
        &self
            .per_class
            .iter()
            .find(|(l, _)| *l == label)
            .expect("class present")
            .1
    }
}

/// One-vs-rest P/R/F1 per class plus micro over all decisions; for
/// single-label multiclass the micro precision, recall, and accuracy
/// coincide.
pub fn re_score(gold: &[RelationLabel], pred: &[RelationLabel]) -> Result<ReReport> {
    if gold.len() != pred.len() {
        return Err(Error::InvalidArgument {
            op: "re_score",
            msg: format!("{} gold vs {} predicted labels", gold.len(), pred.len()),
        });
    }
    if gold.is_empty() {
        return Err(Error::InvalidArgument {
            op: "re_score",
            msg: "empty label lists".into(),
        });
    }
    let mut per_class = Vec::new();
    for &class in &RELATION_LABELS {
        let tp = gold
            .iter()
            .zip(pred)
            .filter(|(g, p)| **g == class && **p == class)
            .count();
        let fp = gold
            .iter()
            .zip(pred)
            .filter(|(g, p)| **g != class && **p == class)
            .count();
        let fn_ = gold
            .iter()
            .zip(pred)
            .filter(|(g, p)| **g == class && **p != class)
            .count();
        per_class.push((class, PrfScore::from_counts(tp, fp, fn_)));
    }
    let correct = gold.iter().zip(pred).filter(|(g, p)| g == p).count();
    let wrong = gold.len() - correct;
    let micro = PrfScore::from_counts(correct, wrong, wrong);
    let accuracy = correct as f64 / gold.len() as f64;
    Ok(ReReport {
        per_class,
        micro,
        accuracy,
    })
}

/// Sample mean and (n-1) standard deviation; std is 0 for fewer than two
/// values.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (0.0, 0.0);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, var.sqrt())
}

// ── Report tables ─────────────────────────────────────────────────────

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellStat {
    pub mean: f64,
    /// Present in mean ± std mode (multi-run reports).
    pub std: Option<f64>,
}

impl CellStat {
    pub fn single(v: f64) -> CellStat {
        CellStat { mean: v, std: None }
    }

    pub fn over_runs(values: &[f64]) -> CellStat {
        let (mean, std) = mean_std(values);
        CellStat {
            mean,
            std: if values.len() > 1 { Some(std) } else { None },
        }
    }

    pub fn render(&self) -> String {
        match self.std {
            Some(std) => format!("{:.3} ± {:.3}", self.mean, std),
            None => format!("{:.3}", self.mean),
        }
    }

    pub fn parse(s: &str) -> Option<CellStat> {
        match s.split_once(" ± ") {
            Some((m, d)) => Some(CellStat {
                mean: m.parse().ok()?,
                std: Some(d.parse().ok()?),
            }),
            None => Some(CellStat {
                mean: s.parse().ok()?,
                std: None,
            }),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassCells {
    pub class: String,
    pub p: CellStat,
    pub r: CellStat,
    pub f1: CellStat,
    pub support: usize,
}

/// One model's row: per-class cell groups plus the overall micro group.
#[derive(Debug, Clone, PartialEq)]
pub struct TableRow {
    pub model: String,
    pub groups: Vec<ClassCells>,
}

pub const MICRO_GROUP: &str = "Overall (micro)";

fn prf_group(class: &str, scores: &[&PrfScore]) -> ClassCells {
    let collect = |f: fn(&PrfScore) -> f64| -> Vec<f64> { scores.iter().map(|s| f(s)).collect() };
    ClassCells {
        class: class.to_string(),
        p: CellStat::over_runs(&collect(|s| s.precision)),
        r: CellStat::over_runs(&collect(|s| s.recall)),
        f1: CellStat::over_runs(&collect(|s| s.f1)),
        support: scores[0].support,
    }
}

/// Aggregate NER reports from repeated runs into one mean ± std row.
pub fn ner_table_row(model: &str, runs: &[NerReport]) -> TableRow {
    assert!(!runs.is_empty());
    let mut groups = Vec::new();
    for (i, (label, _)) in runs[0].per_label.iter().enumerate() {
        let scores: Vec<&PrfScore> = runs.iter().map(|r| &r.per_label[i].1).collect();
        groups.push(prf_group(&label.to_string(), &scores));
    }
    let micro: Vec<&PrfScore> = runs.iter().map(|r| &r.micro).collect();
    groups.push(prf_group(MICRO_GROUP, &micro));
    TableRow {
        model: model.to_string(),
        groups,
    }
}

/// Aggregate RE reports from repeated runs into one mean ± std row.
pub fn re_table_row(model: &str, runs: &[ReReport]) -> TableRow {
    assert!(!runs.is_empty());
    let mut groups = Vec::new();
    for (i, (label, _)) in runs[0].per_class.iter().enumerate() {
        let scores: Vec<&PrfScore> = runs.iter().map(|r| &r.per_class[i].1).collect();
        groups.push(prf_group(&label.to_string(), &scores));
    }
    let micro: Vec<&PrfScore> = runs.iter().map(|r| &r.micro).collect();
    groups.push(prf_group(MICRO_GROUP, &micro));
    TableRow {
        model: model.to_string(),
        groups,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TableFormat {
    Tsv,
    Markdown,
}

/// Render rows (which must share the same class groups).
pub fn render_table(rows: &[TableRow], format: TableFormat) -> String {
    if rows.is_empty() {
        return String::new();
    }
    let mut header = vec!["model".to_string()];
    for g in &rows[0].groups {
        for col in ["P", "R", "F1", "Num"] {
            header.push(format!("{}:{}", g.class, col));
        }
    }
    let body: Vec<Vec<String>> = rows
        .iter()
        .map(|row| {
            let mut cells = vec![row.model.clone()];
            for g in &row.groups {
                cells.push(g.p.render());
                cells.push(g.r.render());
                cells.push(g.f1.render());
                cells.push(g.support.to_string());
            }
            cells
        })
        .collect();
    match format {
        TableFormat::Tsv => {
            let mut s = header.join("\t");
            s.push('\n');
            for row in body {
                s.push_str(&row.join("\t"));
                s.push('\n');
            }
            s
        }
        TableFormat::Markdown => {
            let mut s = format!("| {} |\n", header.join(" | "));
            s.push_str(&format!("|{}\n", " --- |".repeat(header.len())));
            for row in body {
                s.push_str(&format!("| {} |\n", row.join(" | ")));
            }
            s
        }
    }
}

/// Parse a TSV table back into rows; inverse of [`render_table`] with
/// [`TableFormat::Tsv`].
pub fn parse_table_tsv(text: &str) -> Result<Vec<TableRow>> {
    let mut lines = text.lines();
    let header: Vec<&str> = lines
        .next()
        .ok_or_else(|| Error::InvalidArgument {
            op: "parse_table_tsv",
            msg: "empty table".into(),
        })?
        .split('\t')
        .collect();
    if header.len() < 5 || (header.len() - 1) % 4 != 0 {
        return Err(Error::InvalidArgument {
            op: "parse_table_tsv",
            msg: "malformed header".into(),
        });
    }
    let classes: Vec<String> = header[1..]
        .chunks(4)
        .map(|c| c[0].trim_end_matches(":P").to_string())
        .collect();
    let mut rows = Vec::new();
    for line in lines {
        if line.is_empty() {
            continue;
        }
        let cells: Vec<&str> = line.split('\t').collect();
        if cells.len() != header.len() {
            return Err(Error::InvalidArgument {
                op: "parse_table_tsv",
                msg: format!("row has {} cells, header {}", cells.len(), header.len()),
            });
        }
        let mut groups = Vec::new();
        for (ci, chunk) in cells[1..].chunks(4).enumerate() {
            let parse = |s: &str| {
                CellStat::parse(s).ok_or_else(|| Error::InvalidArgument {
                    op: "parse_table_tsv",
                    msg: format!("bad cell {s:?}"),
                })
            };
            groups.push(ClassCells {
                class: classes[ci].clone(),
                p: parse(chunk[0])?,
                r: parse(chunk[1])?,
                f1: parse(chunk[2])?,
                support: chunk[3].parse().map_err(|_| Error::InvalidArgument {
                    op: "parse_table_tsv",
                    msg: format!("bad support {:?}", chunk[3]),
                })?,
            });
        }
        rows.push(TableRow {
            model: cells[0].to_string(),
            groups,
        });
    }
    Ok(rows)
}
