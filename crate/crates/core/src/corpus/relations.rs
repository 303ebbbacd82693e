//! Relation-instance files: one tab-separated record per line with fields
//! `id`, space-joined tokens, `ds_start`, `ds_end`, `event_start`,
//! `event_end`, `label` (positive|negative|not_related).

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

use super::{EntitySpan, RelationInstance, RelationLabel, Sentence};

pub fn parse_relations(text: &str, source: &str) -> Result<Vec<RelationInstance>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 7 {
            return Err(Error::parse(
                source,
                line_no,
                format!("expected 7 tab-separated fields, got {}", fields.len()),
            ));
        }
        let id = fields[0];
        let tokens: Vec<String> = fields[1].split(' ').map(|t| t.to_string()).collect();
        let nums: Vec<usize> = fields[2..6]
            .iter()
            .map(|f| {
                f.parse::<usize>().map_err(|_| {
                    Error::parse(source, line_no, format!("bad span index {f:?}"))
                })
            })
            .collect::<Result<_>>()?;
        let label = RelationLabel::parse(fields[6]).ok_or_else(|| {
            Error::parse(source, line_no, format!("unknown label {:?}", fields[6]))
        })?;
        let sentence = Sentence::new(id, tokens)
            .map_err(|e| Error::parse(source, line_no, e.to_string()))?;
        let instance = RelationInstance::new(
            sentence,
            EntitySpan::ds(nums[0], nums[1]),
            EntitySpan::event(nums[2], nums[3]),
            label,
        )
        .map_err(|e| Error::parse(source, line_no, e.to_string()))?;
        out.push(instance);
    }
    Ok(out)
}

pub fn relations_to_string(instances: &[RelationInstance]) -> String {
    let mut s = String::new();
    for inst in instances {
        s.push_str(&format!(
            "{}\t{}\t{}\t{}\t{}\t{}\t{}\n",
            inst.sentence.id,
            inst.sentence.text(),
            inst.ds.start,
            inst.ds.end,
            inst.event.start,
            inst.event.end,
            inst.label
        ));
    }
    s
}

pub fn read_relations(path: impl AsRef<Path>) -> Result<Vec<RelationInstance>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path)?;
    parse_relations(&text, &path.display().to_string())
}

pub fn write_relations(path: impl AsRef<Path>, instances: &[RelationInstance]) -> Result<()> {
    fs::write(path, relations_to_string(instances))?;
    Ok(())
}
