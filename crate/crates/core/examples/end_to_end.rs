//! Train every model family on a generated corpus and print timing and test
//! scores. Knobs via env vars for quick experiments:
//!   E2E_SENTENCES, E2E_HIDDEN, E2E_FILTERS, E2E_MAX_STEPS, E2E_PATIENCE,
//!   E2E_BATCH, E2E_LR, E2E_SEED, E2E_ONLY (comma list of model names)

use supsig::corpus::{generate_synthetic, SyntheticConfig};
use supsig::ner::{BaselineCrfHyper, NerHyper, NerVariant};
use supsig::pipeline::*;
use supsig::re::{ReHyper, RfHyper};
use supsig::tensor::Rng;
use supsig::training::{AdamConfig, SplitSpec, TrainConfig};

fn env_usize(key: &str, default: usize) -> usize {
    std::env::var(key).ok().and_then(|v| v.parse().ok()).unwrap_or(default)
}

fn env_f64(key: &str, default: f64) -> f64 {
    std::env::var(key).ok().and_then(|v| v.parse().ok()).unwrap_or(default)
}

fn main() {
    let sentences = env_usize("E2E_SENTENCES", 7000);
    let hidden = env_usize("E2E_HIDDEN", 64);
    let filters = env_usize("E2E_FILTERS", 64);
    let max_steps = env_usize("E2E_MAX_STEPS", 1200);
    let patience = env_usize("E2E_PATIENCE", 200);
    let batch = env_usize("E2E_BATCH", 16);
    let lr = env_f64("E2E_LR", 2e-3);
    let seed = env_usize("E2E_SEED", 17) as u64;
    let only = std::env::var("E2E_ONLY").unwrap_or_default();
    let want = |name: &str| only.is_empty() || only.split(',').any(|m| m == name);

    let config = SyntheticConfig {
        ner_sentences: sentences,
        re_sentences: 3000,
        ..SyntheticConfig::default()
    };
    let t0 = std::time::Instant::now();
    let corpus = generate_synthetic(&config, &Rng::seed_from(seed)).unwrap();
    println!(
        "generated {} ner sentences, {} relation instances, {} gold signals in {:.2}s",
        corpus.ner.len(),
        corpus.relations.len(),
        corpus.gold_signals.len(),
        t0.elapsed().as_secs_f64()
    );

    let train_config = TrainConfig {
        batch_size: batch,
        eval_every: 25,
        patience,
        max_steps,
        optimizer: AdamConfig {
            lr,
            ..AdamConfig::default()
        },
        clip_norm: 5.0,
    };
    let split = SplitSpec::new(1234);

    for variant in [
        NerVariant::WordOnly,
        NerVariant::CharCnn,
        NerVariant::CharLstm,
        NerVariant::BaselineCrf,
    ] {
        if !want(variant.as_str()) {
            continue;
        }
        let cfg = NerPipelineConfig {
            hyper: NerHyper {
                variant,
                word_dim: 50,
                word_lstm_hidden: hidden,
                char_dim: 25,
                char_lstm_hidden: 25,
                char_cnn_filters: filters,
                char_cnn_kernel: 5,
                dropout: 0.5,
            },
            baseline: BaselineCrfHyper::default(),
            train: train_config,
            split,
            words: WordSource::Random { dim: 50 },
        };
        let out = train_ner_once(&corpus.ner, &cfg, seed + 1).unwrap();
        let steps = out.outcome.as_ref().map(|o| o.steps_run).unwrap_or(0);
        println!(
            "ner/{:<12} {:>7.1}s steps {:>5} dev {:.4} | test micro P {:.4} R {:.4} F1 {:.4} | DS F1 {:.4} | Event P {:.4} R {:.4} F1 {:.4}",
            variant.as_str(),
            out.train_seconds,
            steps,
            out.dev_f1,
            out.test.micro.precision,
            out.test.micro.recall,
            out.test.micro.f1,
            out.test.per_label[0].1.f1,
            out.test.per_label[1].1.precision,
            out.test.per_label[1].1.recall,
            out.test.per_label[1].1.f1,
        );
    }

    for kind in [ReModelKind::Cnn, ReModelKind::AttBlstm, ReModelKind::RandomForest] {
        if !want(kind.as_str()) {
            continue;
        }
        let cfg = RePipelineConfig {
            kind,
            hyper: ReHyper {
                word_dim: 50,
                pos_dim: 20,
                cnn_filter_sizes: vec![2, 3, 4],
                cnn_filters_per_size: 32,
                cnn_dropout: 0.3,
                lstm_hidden: 32,
                l2: 1e-4,
                clip: 30,
            },
            rf: RfHyper::default(),
            train: train_config,
            split,
            words: WordSource::Random { dim: 50 },
        };
        let out = train_re_once(&corpus.relations, &cfg, seed + 2).unwrap();
        let steps = out.outcome.as_ref().map(|o| o.steps_run).unwrap_or(0);
        println!(
            "re/{:<13} {:>7.1}s steps {:>5} dev {:.4} | test acc {:.4} micro F1 {:.4} | P F1 {:.4} N F1 {:.4} NR F1 {:.4}",
            kind.as_str(),
            out.train_seconds,
            steps,
            out.dev_f1,
            out.test.accuracy,
            out.test.micro.f1,
            out.test.per_class[0].1.f1,
            out.test.per_class[1].1.f1,
            out.test.per_class[2].1.f1,
        );
    }
}
