//! Deterministic template-based corpus generator.
//!
//! Stands in for the protected clinical notes: sentences are drawn from cue
//! templates per relation class, slots are filled from supplement and event
//! lexicons with misspelling/abbreviation variants plus occasional on-the-fly
//! character typos, and every planted (DS, Event, relation) is recorded in a
//! gold signal table keyed the way discovery aggregation keys it.
//!
//! A deliberate slice of the templates forms minimal pairs whose bag of
//! stop-filtered n-grams is identical across classes (e.g. "takes X for Y"
//! vs "takes X with no Y"), so order-aware classifiers have headroom over
//! bag-of-n-gram baselines.

use std::collections::BTreeMap;

use crate::discovery::SignalPair;
use crate::error::{Error, Result};
use crate::tensor::Rng;

use super::{
    spans_to_tags, EntityLabel, EntitySpan, Lexicon, RelationInstance, RelationLabel, Sentence,
    TagSequence,
};

/// One sentence template. `{ds}` and `{ev}` mark entity slots; `{ds2}` marks
/// a second, unpaired supplement mention.
#[derive(Debug, Clone)]
pub struct Template {
    pub pattern: &'static str,
    pub weight: f64,
}

fn t(pattern: &'static str, weight: f64) -> Template {
    Template { pattern, weight }
}

pub fn default_positive_templates() -> Vec<Template> {
    vec![
        t("patient takes {ds} for {ev}", 1.5),
        t("she takes {ds} daily for {ev} relief", 1.0),
        t("started {ds} for {ev} control", 1.5),
        t("he uses {ds} to manage his {ev}", 1.0),
        t("{ds} has helped her {ev} considerably", 1.0),
        t("continues {ds} for {ev} prevention", 1.0),
        t("recommend {ds} supplement for ongoing {ev}", 1.0),
        t("her {ev} improved after she started {ds}", 1.0),
        t("takes {ds} 500 mg daily for {ev}", 1.0),
    ]
}

pub fn default_negative_templates() -> Vec<Template> {
    vec![
        t("reports {ev} after taking {ds}", 1.5),
        t("{ds} caused {ev} last month", 1.0),
        t("developed {ev} after starting {ds}", 1.0),
        t("stopped {ds} because of {ev}", 1.0),
        t("patient attributes her {ev} to {ds} use", 1.0),
        t("{ds} was held due to {ev}", 1.0),
        t("allergy to {ds} with {ev} noted", 1.0),
    ]
}

pub fn default_not_related_templates() -> Vec<Template> {
    vec![
        // Minimal pairs of positive/negative cue templates: identical token
        // skeletons after stop-word removal, distinguishable only by the
        // function words.
        t("patient takes {ds} with no {ev}", 3.0),
        t("reports no {ev} after taking {ds}", 3.0),
        t("started {ds} not for {ev} control", 2.0),
        t("denies {ev} and continues {ds}", 1.0),
        t("takes {ds} ; {ev} resolved years ago", 1.0),
        t("{ds} refilled today ; chronic {ev} stable", 1.0),
    ]
}

pub fn default_ds_only_templates() -> Vec<Template> {
    vec![
        t("patient takes {ds} every morning", 1.0),
        t("{ds} was refilled at visit", 1.0),
        t("continues {ds} twice daily", 1.0),
        t("plan to start {ds} next week", 1.0),
        t("denies taking {ds} currently", 1.0),
        t("takes {ds} and {ds2} daily", 1.0),
        t("medication list includes {ds} 500 mg", 1.0),
    ]
}

pub fn default_event_only_templates() -> Vec<Template> {
    vec![
        t("patient reports {ev} this week", 1.0),
        t("her {ev} has resolved", 1.0),
        t("no further {ev} noted today", 1.0),
        t("monitoring for {ev} at follow up", 1.0),
    ]
}

pub fn default_plain_templates() -> Vec<Template> {
    vec![
        t("follow up in two weeks", 1.0),
        t("plan discussed with patient today", 1.0),
        t("labs reviewed and stable", 1.0),
        t("patient seen in clinic for routine visit", 1.0),
        t("will continue current plan for now", 1.0),
    ]
}

pub fn default_ds_lexicon() -> Lexicon {
    let entries: &[(&str, &[&str])] = &[
        ("turmeric", &["tumeric", "tumric"]),
        ("cranberry", &["cran"]),
        ("folic acid", &["folate", "folic"]),
        ("garlic", &["garlique"]),
        ("black cohosh", &["cohosh"]),
        ("valerian", &["valerian root"]),
        ("chamomile", &["chamomille"]),
        ("fish oil", &["fishoil"]),
        ("vitamin c", &["vit c", "ascorbic acid"]),
        ("vitamin e", &["vit e"]),
        ("zinc", &["zinc sulfate"]),
        ("niacin", &["niacine"]),
        ("biotin", &[]),
        ("psyllium", &["psylium"]),
        ("peppermint", &["peppermint oil"]),
        ("melatonin", &["melatonine"]),
        ("ginger", &[]),
        ("ginkgo", &["ginko", "ginkgo biloba"]),
        ("ginseng", &[]),
        ("glucosamine", &["glucosamin"]),
        ("green tea", &[]),
        ("milk thistle", &[]),
        ("saw palmetto", &[]),
        ("lavender", &[]),
    ];
    let mut lex = Lexicon::new();
    for (canonical, variants) in entries {
        lex.insert(canonical, canonical);
        for v in *variants {
            lex.insert(v, canonical);
        }
    }
    lex
}

pub fn default_event_lexicon() -> Lexicon {
    let entries: &[(&str, &[&str])] = &[
        ("nausea", &["nausia", "nasea"]),
        ("rash", &["rashes"]),
        ("hives", &["hive"]),
        ("bleeding", &["bleding"]),
        ("itching", &["iching", "itchiness"]),
        ("flushing", &["flusing"]),
        ("diarrhea", &["diarrhoea", "diarhea"]),
        ("constipation", &["constipaton"]),
        ("headache", &["headaches", "headach"]),
        ("dizziness", &["dizzyness"]),
        ("insomnia", &["insomia"]),
        ("hot flashes", &["hot flash", "hotflashes"]),
        ("hair loss", &["hairloss"]),
        ("anemia", &["anaemia"]),
        ("hyperlipidemia", &["hyperlipidaemia"]),
        ("hypertension", &["htn"]),
        ("fatigue", &["fatique"]),
        ("anxiety", &["anxiousness"]),
        ("depression", &["depresion"]),
        ("cramping", &["cramps", "cramp"]),
        ("vomiting", &["vomitting"]),
        ("heartburn", &["heart burn"]),
        ("swelling", &["sweling"]),
        ("palpitations", &["palpitation"]),
        ("drowsiness", &["drowsyness"]),
        ("bruising", &["brusing"]),
        ("wound healing", &["wound"]),
        ("liver damage", &["liver injury"]),
        ("gi upset", &["gi disturbance"]),
        ("bloating", &["bloat"]),
    ];
    let mut lex = Lexicon::new();
    for (canonical, variants) in entries {
        lex.insert(canonical, canonical);
        for v in *variants {
            lex.insert(v, canonical);
        }
    }
    lex
}

#[derive(Debug, Clone)]
pub struct SyntheticConfig {
    /// Sentences in the NER corpus (also the discovery input).
    pub ner_sentences: usize,
    /// Instances (one per sentence) in the relation corpus.
    pub re_sentences: usize,
    /// Positive / negative / not-related shares of pair-bearing sentences.
    pub relation_mix: [f64; 3],
    /// Pair / ds-only / event-only / no-entity shares of the NER corpus.
    pub ner_mix: [f64; 4],
    /// Planted (DS, Event, relation) signal triples.
    pub signal_count: usize,
    /// Probability of sampling a lexicon variant instead of the canonical.
    pub variant_prob: f64,
    /// Probability of applying a one-character typo to an event mention.
    pub typo_prob: f64,
    pub ds_lexicon: Lexicon,
    pub event_lexicon: Lexicon,
    pub positive_templates: Vec<Template>,
    pub negative_templates: Vec<Template>,
    pub not_related_templates: Vec<Template>,
    pub ds_only_templates: Vec<Template>,
    pub event_only_templates: Vec<Template>,
    pub plain_templates: Vec<Template>,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        SyntheticConfig {
            ner_sentences: 7000,
            re_sentences: 3000,
            relation_mix: [0.67, 0.21, 0.12],
            ner_mix: [0.40, 0.38, 0.12, 0.10],
            signal_count: 72,
            variant_prob: 0.35,
            typo_prob: 0.08,
            ds_lexicon: default_ds_lexicon(),
            event_lexicon: default_event_lexicon(),
            positive_templates: default_positive_templates(),
            negative_templates: default_negative_templates(),
            not_related_templates: default_not_related_templates(),
            ds_only_templates: default_ds_only_templates(),
            event_only_templates: default_event_only_templates(),
            plain_templates: default_plain_templates(),
        }
    }
}

impl SyntheticConfig {
    fn validate(&self) -> Result<()> {
        if self.ds_lexicon.is_empty() || self.event_lexicon.is_empty() {
            return Err(Error::Config("empty lexicon".into()));
        }
        for (name, templates) in [
            ("positive", &self.positive_templates),
            ("negative", &self.negative_templates),
            ("not_related", &self.not_related_templates),
            ("ds_only", &self.ds_only_templates),
            ("event_only", &self.event_only_templates),
            ("plain", &self.plain_templates),
        ] {
            if templates.is_empty() {
                return Err(Error::Config(format!("no {name} templates")));
            }
        }
        let rel: f64 = self.relation_mix.iter().sum();
        if (rel - 1.0).abs() > 1e-9 {
            return Err(Error::Config(format!(
                "relation mix sums to {rel}, expected 1"
            )));
        }
        let ner: f64 = self.ner_mix.iter().sum();
        if (ner - 1.0).abs() > 1e-9 {
            return Err(Error::Config(format!("ner mix sums to {ner}, expected 1")));
        }
        Ok(())
    }
}

/// Everything the generator emits.
#[derive(Debug, Clone)]
pub struct SyntheticCorpus {
    pub ner: Vec<(Sentence, TagSequence)>,
    pub relations: Vec<RelationInstance>,
    /// Planted positive/negative signals in the NER corpus, with true
    /// source-sentence frequencies.
    pub gold_signals: Vec<SignalPair>,
    pub ds_lexicon: Lexicon,
    /// Every event surface that occurs (variants and typos) → canonical.
    pub event_synonyms: Lexicon,
}

/// Largest-remainder allocation of n items to the given fractions.
pub fn allocate(n: usize, fractions: &[f64]) -> Vec<usize> {
    let mut counts: Vec<usize> = fractions.iter().map(|f| (f * n as f64) as usize).collect();
    let assigned: usize = counts.iter().sum();
    let mut remainders: Vec<(usize, f64)> = fractions
        .iter()
        .enumerate()
        .map(|(i, f)| (i, f * n as f64 - counts[i] as f64))
        .collect();
    remainders.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
    for k in 0..n - assigned {
        counts[remainders[k % remainders.len()].0] += 1;
    }
    counts
}

/// A planted signal: a (canonical ds, canonical event) combination with a
/// sampling weight; the relation is fixed by which pool it lives in.
#[derive(Debug, Clone)]
struct PlantedSignal {
    ds: String,
    event: String,
    weight: f64,
}

struct Generator {
    config: SyntheticConfig,
    positive_signals: Vec<PlantedSignal>,
    negative_signals: Vec<PlantedSignal>,
    /// (ds, event) combinations reserved for not-related sentences, disjoint
    /// from the signal combinations.
    unrelated_pool: Vec<(String, String)>,
    event_synonyms: Lexicon,
}

impl Generator {
    fn new(config: SyntheticConfig, rng: &Rng) -> Result<Generator> {
        config.validate()?;
        let ds_names = config.ds_lexicon.canonical_names();
        let event_names = config.event_lexicon.canonical_names();
        let mut combos: Vec<(String, String)> = Vec::new();
        for ds in &ds_names {
            for ev in &event_names {
                combos.push((ds.clone(), ev.clone()));
            }
        }
        if combos.len() < config.signal_count + 1 {
            return Err(Error::Config(format!(
                "signal_count {} exceeds available ds×event combinations {}",
                config.signal_count,
                combos.len()
            )));
        }
        let mut pool_rng = rng.fork("signals");
        pool_rng.shuffle(&mut combos);
        let n_pos = (config.signal_count * 2) / 3;
        let n_neg = config.signal_count - n_pos;
        let mk = |slice: &[(String, String)]| -> Vec<PlantedSignal> {
            slice
                .iter()
                .enumerate()
                .map(|(rank, (ds, event))| PlantedSignal {
                    ds: ds.clone(),
                    event: event.clone(),
                    weight: 1.0 / (rank + 1) as f64,
                })
                .collect()
        };
        let positive_signals = mk(&combos[..n_pos]);
        let negative_signals = mk(&combos[n_pos..n_pos + n_neg]);
        let unrelated_pool = combos[n_pos + n_neg..].to_vec();
        Ok(Generator {
            config,
            positive_signals,
            negative_signals,
            unrelated_pool,
            event_synonyms: Lexicon::new(),
        })
    }

    /// Sample a surface form of a canonical term and apply optional typo
    /// noise (events only).
    fn surface(&mut self, lexicon_is_event: bool, canonical: &str, rng: &mut Rng) -> String {
        let lex = if lexicon_is_event {
            &self.config.event_lexicon
        } else {
            &self.config.ds_lexicon
        };
        let mut surfaces = lex.surfaces_of(canonical);
        surfaces.sort();
        let mut surface = if surfaces.len() > 1 && rng.bernoulli(self.config.variant_prob) {
            let variants: Vec<String> =
                surfaces.iter().filter(|s| *s != canonical).cloned().collect();
            rng.choose(&variants).clone()
        } else {
            canonical.to_string()
        };
        if lexicon_is_event {
            if rng.bernoulli(self.config.typo_prob) {
                surface = typo(&surface, rng);
            }
            self.event_synonyms.insert(&surface, canonical);
        }
        surface
    }

    fn pick_template<'a>(templates: &'a [Template], rng: &mut Rng) -> &'a Template {
        let weights: Vec<f64> = templates.iter().map(|t| t.weight).collect();
        &templates[rng.weighted(&weights)]
    }

    /// Instantiate a template. Returns tokens, spans, and the slot spans for
    /// {ds} and {ev} if present.
    fn instantiate(
        &mut self,
        template: &Template,
        ds: Option<&str>,
        event: Option<&str>,
        rng: &mut Rng,
    ) -> (Vec<String>, Vec<EntitySpan>, Option<EntitySpan>, Option<EntitySpan>) {
        let mut tokens: Vec<String> = Vec::new();
        let mut spans: Vec<EntitySpan> = Vec::new();
        let mut ds_span = None;
        let mut event_span = None;
        for piece in template.pattern.split(' ') {
            match piece {
                "{ds}" => {
                    let surface = self.surface(false, ds.expect("template needs ds"), rng);
                    let start = tokens.len();
                    tokens.extend(surface.split(' ').map(|s| s.to_string()));
                    let span = EntitySpan::ds(start, tokens.len());
                    ds_span = Some(span);
                    spans.push(span);
                }
                "{ds2}" => {
                    let names = self.config.ds_lexicon.canonical_names();
                    let other = rng.choose(&names).clone();
                    let surface = self.surface(false, &other, rng);
                    let start = tokens.len();
                    tokens.extend(surface.split(' ').map(|s| s.to_string()));
                    spans.push(EntitySpan::ds(start, tokens.len()));
                }
                "{ev}" => {
                    let surface = self.surface(true, event.expect("template needs event"), rng);
                    let start = tokens.len();
                    tokens.extend(surface.split(' ').map(|s| s.to_string()));
                    let span = EntitySpan::new(EntityLabel::Event, start, tokens.len());
                    event_span = Some(span);
                    spans.push(span);
                }
                word => tokens.push(word.to_string()),
            }
        }
        (tokens, spans, ds_span, event_span)
    }

    fn pair_for(&self, label: RelationLabel, rng: &mut Rng) -> (String, String) {
        match label {
            RelationLabel::Positive => {
                let w: Vec<f64> = self.positive_signals.iter().map(|s| s.weight).collect();
                let s = &self.positive_signals[rng.weighted(&w)];
                (s.ds.clone(), s.event.clone())
            }
            RelationLabel::Negative => {
                let w: Vec<f64> = self.negative_signals.iter().map(|s| s.weight).collect();
                let s = &self.negative_signals[rng.weighted(&w)];
                (s.ds.clone(), s.event.clone())
            }
            RelationLabel::NotRelated => {
                // Mix the signal pools in so pair identity alone carries no
                // class information.
                match rng.weighted(&[0.45, 0.30, 0.25]) {
                    0 => {
                        let w: Vec<f64> = self.positive_signals.iter().map(|s| s.weight).collect();
                        let s = &self.positive_signals[rng.weighted(&w)];
                        (s.ds.clone(), s.event.clone())
                    }
                    1 => {
                        let w: Vec<f64> = self.negative_signals.iter().map(|s| s.weight).collect();
                        let s = &self.negative_signals[rng.weighted(&w)];
                        (s.ds.clone(), s.event.clone())
                    }
                    _ => {
                        let (ds, ev) = rng.choose(&self.unrelated_pool);
                        (ds.clone(), ev.clone())
                    }
                }
            }
        }
    }

    fn templates_for(&self, label: RelationLabel) -> &[Template] {
        match label {
            RelationLabel::Positive => &self.config.positive_templates,
            RelationLabel::Negative => &self.config.negative_templates,
            RelationLabel::NotRelated => &self.config.not_related_templates,
        }
    }
}

fn typo(surface: &str, rng: &mut Rng) -> String {
    let words: Vec<&str> = surface.split(' ').collect();
    let wi = rng.below(words.len());
    let chars: Vec<char> = words[wi].chars().collect();
    if chars.len() < 3 {
        return surface.to_string();
    }
    let mut chars = chars;
    match rng.below(3) {
        0 => {
            // drop an interior character
            let i = 1 + rng.below(chars.len() - 2);
            chars.remove(i);
        }
        1 => {
            // double a character
            let i = rng.below(chars.len());
            chars.insert(i, chars[i]);
        }
        _ => {
            // swap adjacent interior characters
            let i = 1 + rng.below(chars.len() - 2);
            chars.swap(i, i + 1);
        }
    }
    let mutated: String = chars.into_iter().collect();
    let mut out: Vec<String> = words.iter().map(|w| w.to_string()).collect();
    out[wi] = mutated;
    out.join(" ")
}

/// Generate the NER corpus, relation corpus, and gold signal table.
/// Deterministic for a given seed.
pub fn generate_synthetic(config: &SyntheticConfig, rng: &Rng) -> Result<SyntheticCorpus> {
    let mut generator = Generator::new(config.clone(), rng)?;

    // ── NER corpus ────────────────────────────────────────────────────
    let kinds = allocate(config.ner_sentences, &config.ner_mix);
    let rel_counts = allocate(kinds[0], &config.relation_mix);
    // 0,1,2 → pair sentence of that relation class; 3 ds-only; 4 event-only;
    // 5 plain.
    let mut plan: Vec<u8> = Vec::with_capacity(config.ner_sentences);
    for (class, &count) in rel_counts.iter().enumerate() {
        plan.extend(std::iter::repeat(class as u8).take(count));
    }
    plan.extend(std::iter::repeat(3).take(kinds[1]));
    plan.extend(std::iter::repeat(4).take(kinds[2]));
    plan.extend(std::iter::repeat(5).take(kinds[3]));
    let mut order_rng = rng.fork("ner/order");
    order_rng.shuffle(&mut plan);

    let mut ner: Vec<(Sentence, TagSequence)> = Vec::with_capacity(config.ner_sentences);
    let mut gold: BTreeMap<(String, String, RelationLabel), Vec<String>> = BTreeMap::new();
    let mut fill_rng = rng.fork("ner/fill");
    for (i, &kind) in plan.iter().enumerate() {
        let id = format!("s{i}");
        let (tokens, spans) = match kind {
            0 | 1 | 2 => {
                let label = RelationLabel::from_index(kind as usize);
                let (ds, event) = generator.pair_for(label, &mut fill_rng);
                let template = Generator::pick_template(generator.templates_for(label), &mut fill_rng);
                let template = template.clone();
                let (tokens, spans, _, _) =
                    generator.instantiate(&template, Some(&ds), Some(&event), &mut fill_rng);
                if label != RelationLabel::NotRelated {
                    gold.entry((ds, event, label)).or_default().push(id.clone());
                }
                (tokens, spans)
            }
            3 => {
                let names = generator.config.ds_lexicon.canonical_names();
                let ds = fill_rng.choose(&names).clone();
                let template =
                    Generator::pick_template(&generator.config.ds_only_templates, &mut fill_rng)
                        .clone();
                let (tokens, spans, _, _) =
                    generator.instantiate(&template, Some(&ds), None, &mut fill_rng);
                (tokens, spans)
            }
            4 => {
                let names = generator.config.event_lexicon.canonical_names();
                let event = fill_rng.choose(&names).clone();
                let template =
                    Generator::pick_template(&generator.config.event_only_templates, &mut fill_rng)
                        .clone();
                let (tokens, spans, _, _) =
                    generator.instantiate(&template, None, Some(&event), &mut fill_rng);
                (tokens, spans)
            }
            _ => {
                let template =
                    Generator::pick_template(&generator.config.plain_templates, &mut fill_rng)
                        .clone();
                let (tokens, spans, _, _) =
                    generator.instantiate(&template, None, None, &mut fill_rng);
                (tokens, spans)
            }
        };
        let sentence = Sentence::new(id, tokens)?;
        let tags = spans_to_tags(&spans, sentence.len())?;
        ner.push((sentence, tags));
    }

    let gold_signals: Vec<SignalPair> = gold
        .into_iter()
        .map(|((ds, event, relation), ids)| SignalPair {
            ds,
            event,
            relation,
            frequency: ids.len(),
            known: None,
            source_ids: ids,
        })
        .collect();

    // ── Relation corpus ───────────────────────────────────────────────
    let re_counts = allocate(config.re_sentences, &config.relation_mix);
    let mut re_plan: Vec<u8> = Vec::with_capacity(config.re_sentences);
    for (class, &count) in re_counts.iter().enumerate() {
        re_plan.extend(std::iter::repeat(class as u8).take(count));
    }
    let mut re_order = rng.fork("re/order");
    re_order.shuffle(&mut re_plan);
    let mut re_rng = rng.fork("re/fill");
    let mut relations: Vec<RelationInstance> = Vec::with_capacity(config.re_sentences);
    for (i, &class) in re_plan.iter().enumerate() {
        let label = RelationLabel::from_index(class as usize);
        let (ds, event) = generator.pair_for(label, &mut re_rng);
        let template = Generator::pick_template(generator.templates_for(label), &mut re_rng).clone();
        let (tokens, _, ds_span, event_span) =
            generator.instantiate(&template, Some(&ds), Some(&event), &mut re_rng);
        let sentence = Sentence::new(format!("r{i}"), tokens)?;
        relations.push(RelationInstance::new(
            sentence,
            ds_span.expect("pair template has a ds slot"),
            event_span.expect("pair template has an event slot"),
            label,
        )?);
    }

    Ok(SyntheticCorpus {
        ner,
        relations,
        gold_signals,
        ds_lexicon: config.ds_lexicon.clone(),
        event_synonyms: generator.event_synonyms.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::DecodeMode;

    fn small_config() -> SyntheticConfig {
        SyntheticConfig {
            ner_sentences: 400,
            re_sentences: 300,
            signal_count: 24,
            ..SyntheticConfig::default()
        }
    }

    #[test]
    fn deterministic_under_seed() {
        let config = small_config();
        let a = generate_synthetic(&config, &Rng::seed_from(9)).unwrap();
        let b = generate_synthetic(&config, &Rng::seed_from(9)).unwrap();
        assert_eq!(a.ner, b.ner);
        assert_eq!(a.relations, b.relations);
        assert_eq!(a.gold_signals, b.gold_signals);
        let c = generate_synthetic(&config, &Rng::seed_from(10)).unwrap();
        assert_ne!(a.ner, c.ner);
    }

    #[test]
    fn class_counts_match_largest_remainder_allocation() {
        // 5131 instances at (0.67, 0.21, 0.12) → 3438 / 1077 / 616, each
        // within ±2% of 3451 / 1071 / 609.
        let counts = allocate(5131, &[0.67, 0.21, 0.12]);
        assert_eq!(counts.iter().sum::<usize>(), 5131);
        assert_eq!(counts, vec![3438, 1077, 616]);
        for (got, want) in counts.iter().zip([3451.0, 1071.0, 609.0]) {
            assert!((*got as f64 - want).abs() <= 0.02 * want);
        }
    }

    #[test]
    fn relation_corpus_mix_is_exact() {
        let config = small_config();
        let corpus = generate_synthetic(&config, &Rng::seed_from(3)).unwrap();
        let want = allocate(300, &config.relation_mix);
        for (i, label) in [
            RelationLabel::Positive,
            RelationLabel::Negative,
            RelationLabel::NotRelated,
        ]
        .iter()
        .enumerate()
        {
            let got = corpus.relations.iter().filter(|r| r.label == *label).count();
            assert_eq!(got, want[i]);
        }
    }

    #[test]
    fn gold_frequencies_sum_to_signal_bearing_sentences() {
        let config = small_config();
        let corpus = generate_synthetic(&config, &Rng::seed_from(4)).unwrap();
        let total: usize = corpus.gold_signals.iter().map(|g| g.frequency).sum();
        let pair_kinds = allocate(config.ner_sentences, &config.ner_mix)[0];
        let rel = allocate(pair_kinds, &config.relation_mix);
        assert_eq!(total, rel[0] + rel[1]);
        for g in &corpus.gold_signals {
            assert_eq!(g.frequency, g.source_ids.len());
            assert_ne!(g.relation, RelationLabel::NotRelated);
        }
    }

    #[test]
    fn gold_tags_are_legal_and_spans_nonoverlapping() {
        let config = small_config();
        let corpus = generate_synthetic(&config, &Rng::seed_from(5)).unwrap();
        for (sentence, tags) in &corpus.ner {
            assert_eq!(sentence.len(), tags.len());
            let spans = crate::corpus::tags_to_spans(tags, DecodeMode::Strict).unwrap();
            let mut sorted = spans.clone();
            sorted.sort_by_key(|s| s.start);
            for w in sorted.windows(2) {
                assert!(w[0].end <= w[1].start, "overlap in {}", sentence.id);
            }
        }
    }

    #[test]
    fn positive_sentences_contain_their_cue_phrase() {
        let config = small_config();
        let corpus = generate_synthetic(&config, &Rng::seed_from(6)).unwrap();
        // Cue-word skeletons of the default positive templates: every
        // positive instance must match one of them in order.
        let skeletons: Vec<Vec<&str>> = config
            .positive_templates
            .iter()
            .map(|t| {
                t.pattern
                    .split(' ')
                    .filter(|p| !p.starts_with('{'))
                    .collect()
            })
            .collect();
        for inst in corpus
            .relations
            .iter()
            .filter(|r| r.label == RelationLabel::Positive)
        {
            let tokens: Vec<&str> = inst.sentence.tokens.iter().map(|s| s.as_str()).collect();
            let matched = skeletons.iter().any(|skel| is_subsequence(skel, &tokens));
            assert!(matched, "no cue skeleton matches {:?}", inst.sentence.tokens);
        }
    }

    fn is_subsequence(needle: &[&str], haystack: &[&str]) -> bool {
        let mut it = haystack.iter();
        needle.iter().all(|n| it.any(|h| h == n))
    }

    #[test]
    fn event_synonyms_cover_all_event_surfaces() {
        let config = small_config();
        let corpus = generate_synthetic(&config, &Rng::seed_from(7)).unwrap();
        for (sentence, tags) in &corpus.ner {
            let spans = crate::corpus::tags_to_spans(tags, DecodeMode::Strict).unwrap();
            for span in spans.iter().filter(|s| s.label == EntityLabel::Event) {
                let surface = span.surface(sentence);
                assert!(
                    corpus.event_synonyms.canonicalize(&surface).is_some(),
                    "missing synonym entry for {surface:?}"
                );
            }
        }
    }

    #[test]
    fn bad_config_rejected() {
        let mut config = small_config();
        config.relation_mix = [0.5, 0.2, 0.2];
        assert!(generate_synthetic(&config, &Rng::seed_from(1)).is_err());

        let mut config = small_config();
        config.ds_lexicon = Lexicon::new();
        assert!(generate_synthetic(&config, &Rng::seed_from(1)).is_err());

        let mut config = small_config();
        config.positive_templates = vec![];
        assert!(generate_synthetic(&config, &Rng::seed_from(1)).is_err());
    }

    #[test]
    fn typo_preserves_tokenization() {
        let mut rng = Rng::seed_from(2);
        for _ in 0..200 {
            let out = typo("hot flashes", &mut rng);
            assert!(!out.is_empty());
            assert!(!out.contains("  "));
            assert_eq!(out.split(' ').count(), 2);
        }
    }
}
