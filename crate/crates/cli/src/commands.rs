//! Subcommand implementations.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use supsig::artifact::{load_artifact, save_artifact};
use supsig::corpus::{
    corpus_spans, generate_synthetic, read_bio, read_relations, write_bio, write_lexicon,
    write_relations, Lexicon, RelationLabel, Sentence, TagSequence,
};
use supsig::discovery::{
    aggregate, build_report, compare_kb, extract_pairs, filter_threshold, parse_kb, read_kb,
    report_to_tsv, write_kb, KnowledgeBase,
};
use supsig::error::{Error, Result};
use supsig::evaluation::{
    ner_score, ner_table_row, re_score, re_table_row, render_table, NerReport, ReReport,
    TableFormat, TableRow,
};
use supsig::ner::NerVariant;
use supsig::pipeline::{train_ner_once, train_re_once, ReModelKind};
use supsig::training::{log_to_string, seeds_for};
use supsig::tensor::Rng;

use crate::config::ExperimentConfig;

fn ensure_out_dir(out: &Path) -> Result<()> {
    fs::create_dir_all(out)?;
    Ok(())
}

fn write_manifest(
    out: &Path,
    command: &str,
    seed: u64,
    config: &ExperimentConfig,
    extra: serde_json::Value,
) -> Result<()> {
    let config_json = config.canonical_json()?;
    let mut hasher = Sha256::new();
    hasher.update(config_json.as_bytes());
    let manifest = serde_json::json!({
        "tool": "supsig",
        "version": env!("CARGO_PKG_VERSION"),
        "artifact_format_version": supsig::error::ARTIFACT_VERSION,
        "command": command,
        "seed": seed,
        "config_sha256": format!("{:x}", hasher.finalize()),
        "details": extra,
    });
    fs::write(
        out.join("manifest.json"),
        serde_json::to_string_pretty(&manifest)?,
    )?;
    Ok(())
}

// ── gen-synthetic ─────────────────────────────────────────────────────

pub fn gen_synthetic(config: &ExperimentConfig, seed: u64, out: &Path) -> Result<()> {
    ensure_out_dir(out)?;
    let synthetic = config.corpus.to_synthetic();
    let corpus = generate_synthetic(&synthetic, &Rng::seed_from(seed))?;

    write_bio(out.join("ner.bio"), &corpus.ner)?;
    write_relations(out.join("relations.tsv"), &corpus.relations)?;
    write_lexicon(out.join("lexicon.tsv"), &corpus.ds_lexicon)?;
    write_lexicon(out.join("event_synonyms.tsv"), &corpus.event_synonyms)?;

    let mut sentences = String::new();
    for (sentence, _) in &corpus.ner {
        sentences.push_str(&format!("{}\t{}\n", sentence.id, sentence.text()));
    }
    fs::write(out.join("sentences.tsv"), sentences)?;

    let gold_rows: Vec<supsig::discovery::ReportRow> = corpus
        .gold_signals
        .iter()
        .map(|g| supsig::discovery::ReportRow {
            ds: g.ds.clone(),
            event: g.event.clone(),
            relation: g.relation,
            frequency: g.frequency,
            known: None,
            examples: Vec::new(),
        })
        .collect();
    fs::write(out.join("gold_signals.tsv"), report_to_tsv(&gold_rows))?;

    // A synthetic knowledge base: roughly 70% of the planted signals are
    // marked known, plus a few triples that never occur.
    let mut kb = KnowledgeBase::new();
    let mut kb_rng = Rng::seed_from(seed).fork("kb");
    for g in &corpus.gold_signals {
        if kb_rng.bernoulli(0.7) {
            kb.insert(&g.ds, &g.event, g.relation);
        }
    }
    kb.insert("selenium", "metallic taste", RelationLabel::Negative);
    kb.insert("kava", "liver damage", RelationLabel::Negative);
    kb.insert("echinacea", "rash", RelationLabel::Negative);
    write_kb(out.join("kb.tsv"), &kb)?;

    write_manifest(
        out,
        "gen-synthetic",
        seed,
        config,
        serde_json::json!({
            "ner_sentences": corpus.ner.len(),
            "relation_instances": corpus.relations.len(),
            "gold_signals": corpus.gold_signals.len(),
        }),
    )?;
    println!(
        "wrote {} sentences, {} relation instances, {} gold signals to {}",
        corpus.ner.len(),
        corpus.relations.len(),
        corpus.gold_signals.len(),
        out.display()
    );
    Ok(())
}

// ── train-ner / train-re ──────────────────────────────────────────────

fn resolve_input(flag: Option<&Path>, config_path: &Option<PathBuf>, what: &str) -> Result<PathBuf> {
    match flag.map(Path::to_path_buf).or_else(|| config_path.clone()) {
        Some(p) if p.exists() => Ok(p),
        Some(p) => Err(Error::Config(format!(
            "{what} file {} does not exist",
            p.display()
        ))),
        None => Err(Error::Config(format!(
            "no {what} file given (flag or config [data] section)"
        ))),
    }
}

pub struct TrainNerArgs<'a> {
    pub variant: Option<&'a str>,
    pub runs: usize,
    pub seed: u64,
    pub out: &'a Path,
    pub train_file: Option<&'a Path>,
}

pub fn train_ner(config: &ExperimentConfig, args: &TrainNerArgs) -> Result<()> {
    ensure_out_dir(args.out)?;
    let variant = match args.variant {
        Some(v) => NerVariant::parse(v).ok_or_else(|| {
            Error::Config(format!(
                "unknown variant {v:?}; expected word_only, char_lstm, char_cnn, or baseline_crf"
            ))
        })?,
        None => config.ner_variant()?,
    };
    let corpus_path = resolve_input(args.train_file, &config.data.ner_corpus, "ner corpus")?;
    let corpus = read_bio(&corpus_path)?;
    let pipeline = config.ner_pipeline(variant);
    let seeds = seeds_for(args.seed, args.runs);
    let mut reports: Vec<NerReport> = Vec::new();
    for (i, &run_seed) in seeds.iter().enumerate() {
        let outcome = train_ner_once(&corpus, &pipeline, run_seed)?;
        save_artifact(args.out.join(format!("model_run{i}.json")), &outcome.artifact)?;
        if let Some(o) = &outcome.outcome {
            fs::write(
                args.out.join(format!("train_log_run{i}.tsv")),
                log_to_string(&o.log),
            )?;
        }
        eprintln!(
            "run {i}: seed {run_seed}, {:.1}s, dev F1 {:.3}, test micro F1 {:.3}",
            outcome.train_seconds, outcome.dev_f1, outcome.test.micro.f1
        );
        reports.push(outcome.test);
    }
    let row = ner_table_row(variant.as_str(), &reports);
    finish_training_report(args.out, row, config, "train-ner", args.seed, variant.as_str())
}

pub struct TrainReArgs<'a> {
    pub variant: Option<&'a str>,
    pub runs: usize,
    pub seed: u64,
    pub out: &'a Path,
    pub train_file: Option<&'a Path>,
}

pub fn train_re(config: &ExperimentConfig, args: &TrainReArgs) -> Result<()> {
    ensure_out_dir(args.out)?;
    let kind = match args.variant {
        Some(v) => ReModelKind::parse(v).ok_or_else(|| {
            Error::Config(format!(
                "unknown variant {v:?}; expected cnn, att_blstm, or rf"
            ))
        })?,
        None => config.re_kind()?,
    };
    let corpus_path = resolve_input(args.train_file, &config.data.re_corpus, "relation corpus")?;
    let instances = read_relations(&corpus_path)?;
    let pipeline = config.re_pipeline(kind);
    let seeds = seeds_for(args.seed, args.runs);
    let mut reports: Vec<ReReport> = Vec::new();
    for (i, &run_seed) in seeds.iter().enumerate() {
        let outcome = train_re_once(&instances, &pipeline, run_seed)?;
        save_artifact(args.out.join(format!("model_run{i}.json")), &outcome.artifact)?;
        if let Some(o) = &outcome.outcome {
            fs::write(
                args.out.join(format!("train_log_run{i}.tsv")),
                log_to_string(&o.log),
            )?;
        }
        eprintln!(
            "run {i}: seed {run_seed}, {:.1}s, dev F1 {:.3}, test accuracy {:.3}",
            outcome.train_seconds, outcome.dev_f1, outcome.test.accuracy
        );
        reports.push(outcome.test);
    }
    let row = re_table_row(kind.as_str(), &reports);
    finish_training_report(args.out, row, config, "train-re", args.seed, kind.as_str())
}

fn finish_training_report(
    out: &Path,
    row: TableRow,
    config: &ExperimentConfig,
    command: &str,
    seed: u64,
    model: &str,
) -> Result<()> {
    let tsv = render_table(std::slice::from_ref(&row), TableFormat::Tsv);
    fs::write(out.join("report.tsv"), &tsv)?;
    fs::write(
        out.join("report.md"),
        render_table(std::slice::from_ref(&row), TableFormat::Markdown),
    )?;
    write_manifest(out, command, seed, config, serde_json::json!({ "model": model }))?;
    print!("{tsv}");
    Ok(())
}

// ── eval ──────────────────────────────────────────────────────────────

fn sniff_relations_file(path: &Path) -> Result<bool> {
    let text = fs::read_to_string(path)?;
    Ok(text
        .lines()
        .find(|l| !l.is_empty())
        .map(|l| l.split('\t').count() == 7)
        .unwrap_or(false))
}

pub fn eval(
    model: Option<&Path>,
    pred_file: Option<&Path>,
    test_file: &Path,
    format: TableFormat,
) -> Result<()> {
    if !test_file.exists() {
        return Err(Error::Config(format!(
            "test file {} does not exist",
            test_file.display()
        )));
    }
    let row = match (model, pred_file) {
        (Some(model_path), None) => {
            let artifact = load_artifact(model_path)?;
            if artifact.is_ner() {
                let tagger = artifact.tagger()?;
                let corpus = read_bio(test_file)?;
                let gold = corpus_spans(&corpus);
                let pred: Vec<_> = corpus
                    .iter()
                    .map(|(s, _)| Ok((s.id.clone(), tagger.tag(s)?)))
                    .collect::<Result<_>>()?;
                ner_table_row(artifact.family(), &[ner_score(&gold, &pred)?])
            } else {
                let classifier = artifact.classifier()?;
                let instances = read_relations(test_file)?;
                let gold: Vec<_> = instances.iter().map(|i| i.label).collect();
                let pred: Vec<_> = instances
                    .iter()
                    .map(|i| classifier.classify(i))
                    .collect::<Result<_>>()?;
                re_table_row(artifact.family(), &[re_score(&gold, &pred)?])
            }
        }
        (None, Some(pred_path)) => {
            if sniff_relations_file(test_file)? {
                let gold_instances = read_relations(test_file)?;
                let pred_instances = read_relations(pred_path)?;
                if gold_instances.len() != pred_instances.len() {
                    return Err(Error::Config(
                        "test and prediction files have different record counts".into(),
                    ));
                }
                let gold: Vec<_> = gold_instances.iter().map(|i| i.label).collect();
                let pred: Vec<_> = pred_instances.iter().map(|i| i.label).collect();
                re_table_row("predictions", &[re_score(&gold, &pred)?])
            } else {
                let gold = corpus_spans(&read_bio(test_file)?);
                let pred = corpus_spans(&read_bio(pred_path)?);
                ner_table_row("predictions", &[ner_score(&gold, &pred)?])
            }
        }
        _ => {
            return Err(Error::Config(
                "pass exactly one of --model or --pred-file".into(),
            ))
        }
    };
    print!("{}", render_table(&[row], format));
    Ok(())
}

// ── discover ──────────────────────────────────────────────────────────

pub struct DiscoverArgs<'a> {
    pub ner_model: &'a Path,
    pub re_model: &'a Path,
    pub sentences: &'a Path,
    pub kb: Option<&'a Path>,
    pub lexicon: Option<&'a Path>,
    pub event_synonyms: Option<&'a Path>,
    /// Keep pairs whose frequency is strictly greater than this.
    pub threshold: usize,
    pub examples: usize,
    pub seed: u64,
    pub out: &'a Path,
}

pub fn read_sentences_file(path: &Path) -> Result<Vec<Sentence>> {
    let text = fs::read_to_string(path)?;
    let source = path.display().to_string();
    let mut sentences = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.is_empty() {
            continue;
        }
        let (id, body) = match line.split_once('\t') {
            Some((id, body)) => (id.to_string(), body),
            None => (format!("line{}", i + 1), line),
        };
        let tokens: Vec<String> = body.split(' ').map(|t| t.to_string()).collect();
        sentences.push(
            Sentence::new(id, tokens)
                .map_err(|e| Error::parse(&source, i + 1, e.to_string()))?,
        );
    }
    Ok(sentences)
}

pub fn discover(config: &ExperimentConfig, args: &DiscoverArgs) -> Result<()> {
    ensure_out_dir(args.out)?;
    let ner = load_artifact(args.ner_model)?;
    let re = load_artifact(args.re_model)?;
    let tagger = ner.tagger()?;
    let classifier = re.classifier()?;
    let sentences = read_sentences_file(args.sentences)?;
    let lexicon = match args.lexicon.map(Path::to_path_buf).or_else(|| config.data.lexicon.clone()) {
        Some(p) => supsig::corpus::read_lexicon(&p)?,
        None => Lexicon::new(),
    };
    let synonyms = match args
        .event_synonyms
        .map(Path::to_path_buf)
        .or_else(|| config.data.event_synonyms.clone())
    {
        Some(p) => Some(supsig::corpus::read_lexicon(&p)?),
        None => None,
    };
    let kb = match args.kb.map(Path::to_path_buf).or_else(|| config.data.kb.clone()) {
        Some(p) => read_kb(&p)?,
        None => KnowledgeBase::new(),
    };

    let classified = extract_pairs(&sentences, tagger.as_ref(), classifier.as_ref())?;
    let by_label = |label: RelationLabel| classified.iter().filter(|(_, l)| *l == label).count();
    let counts = (
        by_label(RelationLabel::Positive),
        by_label(RelationLabel::Negative),
        by_label(RelationLabel::NotRelated),
    );
    let pairs = aggregate(&classified, &lexicon, synonyms.as_ref());
    let total_signal_freq: usize = pairs.iter().map(|p| p.frequency).sum();
    let mut kept = filter_threshold(pairs, args.threshold + 1);
    let summary = compare_kb(&mut kept, &kb);

    let sentences_by_id: BTreeMap<String, Sentence> = sentences
        .iter()
        .map(|s| (s.id.clone(), s.clone()))
        .collect();
    let rows = build_report(
        &kept,
        &sentences_by_id,
        args.examples,
        &Rng::seed_from(args.seed),
    );
    fs::write(args.out.join("signals.tsv"), report_to_tsv(&rows))?;
    fs::write(args.out.join("signals.json"), serde_json::to_string_pretty(&rows)?)?;

    let mut text = String::new();
    text.push_str(&format!(
        "sentences: {}\nclassified pairs: {} ({} positive, {} negative, {} not related)\n",
        sentences.len(),
        classified.len(),
        counts.0,
        counts.1,
        counts.2,
    ));
    text.push_str(&format!(
        "aggregated signal frequency: {}\nsignals above threshold {}: {}\n",
        total_signal_freq,
        args.threshold,
        kept.len()
    ));
    for row in &summary {
        text.push_str(&row.render());
        text.push('\n');
    }
    fs::write(args.out.join("summary.txt"), &text)?;
    print!("{text}");

    write_manifest(
        args.out,
        "discover",
        args.seed,
        config,
        serde_json::json!({
            "threshold": args.threshold,
            "signals": kept.len(),
        }),
    )?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sentences_file_accepts_both_layouts() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.tsv");
        fs::write(&path, "s0\ttakes garlic for nausea\nplain line here\n").unwrap();
        let sentences = read_sentences_file(&path).unwrap();
        assert_eq!(sentences.len(), 2);
        assert_eq!(sentences[0].id, "s0");
        assert_eq!(sentences[0].tokens.len(), 4);
        assert_eq!(sentences[1].id, "line2");
        assert_eq!(sentences[1].tokens, vec!["plain", "line", "here"]);
    }
}
