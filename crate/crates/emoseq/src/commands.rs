//! Command implementations behind the CLI: end-to-end training, evaluation
//! of stored models, single-text prediction, and the ablation table.
//!
//! Seeding: the config's master seed feeds a SplitMix64 stream that yields
//! three derived seeds (split, init, shuffle), so one number pins every
//! source of randomness in a run.

use std::fs;
use std::path::Path;

use crate::artifact::{load_model, save_model, ModelArtifact};
use crate::config::{Overrides, RunConfig};
use crate::eval::{evaluate, score_dataset, EvalReport};
use crate::model::{forward, init_params};
use crate::rng::SplitMix64;
use crate::textpipe::{
    build_vocab, encode, fit_idf, load_csv, split_shuffle, Document, EncodedExample,
};
use crate::train::{train, EpochRecord, TrainLog};
use crate::{Error, Result};

/// (split, init, shuffle) seeds derived from the master seed; exposed so a
/// run's data split can be reproduced outside the pipeline.
pub fn derived_seeds(seed: u64) -> (u64, u64, u64) {
    let mut s = SplitMix64::new(seed);
    (s.next_u64(), s.next_u64(), s.next_u64())
}

fn encode_all(
    docs: &[Document],
    art_vocab: &crate::Vocabulary,
    tfidf: &crate::TfidfModel,
    max_len: usize,
) -> Vec<EncodedExample> {
    docs.iter().map(|d| encode(d, art_vocab, tfidf, max_len)).collect()
}

/// Everything a training run produces.
#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub artifact: ModelArtifact,
    pub log: TrainLog,
    pub train_report: EvalReport,
    pub test_report: EvalReport,
}

/// Full pipeline: load CSV, split per seed, fit vocabulary and IDF on the
/// training split only, init, train, evaluate both splits.
pub fn run_training(
    cfg: &RunConfig,
    progress: impl FnMut(&EpochRecord),
) -> Result<TrainOutcome> {
    cfg.validate()?;
    let data_path = cfg
        .data
        .as_ref()
        .ok_or_else(|| Error::Config("data: dataset path is required for training".into()))?;
    let docs = load_csv(Path::new(data_path), cfg.model.num_classes)?;
    let (split_seed, init_seed, shuffle_seed) = derived_seeds(cfg.seed);
    let (train_docs, test_docs) = split_shuffle(&docs, cfg.train_fraction, split_seed)?;
    let vocab = build_vocab(&train_docs, cfg.vocab.max_size, cfg.vocab.min_freq)?;
    let tfidf = fit_idf(&train_docs, &vocab)?;
    let model_cfg = cfg.to_model_config(vocab.size(), init_seed);
    model_cfg.validate()?;
    let mut params = init_params(&model_cfg, init_seed);
    let train_enc = encode_all(&train_docs, &vocab, &tfidf, model_cfg.max_len);
    let test_enc = encode_all(&test_docs, &vocab, &tfidf, model_cfg.max_len);
    let train_cfg = cfg.to_train_config(shuffle_seed);
    let log = train(&mut params, &model_cfg, &train_enc, &train_cfg, progress)?;
    let (tr_scores, tr_truth) = score_dataset(&params, &model_cfg, &train_enc)?;
    let train_report = evaluate(&tr_scores, &tr_truth, model_cfg.num_classes)?;
    let (te_scores, te_truth) = score_dataset(&params, &model_cfg, &test_enc)?;
    let test_report = evaluate(&te_scores, &te_truth, model_cfg.num_classes)?;
    Ok(TrainOutcome {
        artifact: ModelArtifact { config: cfg.clone(), vocab, tfidf, params },
        log,
        train_report,
        test_report,
    })
}

/// Persist a training run. Unsuffixed report files carry the test split;
/// `_train`/`_test` variants carry both.
pub fn write_training_outputs(out: &TrainOutcome, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| {
        Error::Io(std::io::Error::new(
            e.kind(),
            format!("cannot create output directory '{}': {e}", dir.display()),
        ))
    })?;
    save_model(&dir.join("model.art"), &out.artifact)?;
    fs::write(dir.join("trainlog.csv"), out.log.to_csv_string())?;
    let names = out.artifact.config.class_names.as_deref();
    for (report, tag) in [(&out.train_report, "train"), (&out.test_report, "test")] {
        fs::write(dir.join(format!("report_{tag}.json")), report.to_json_string(names))?;
        fs::write(
            dir.join(format!("confusion_{tag}.csv")),
            report.confusion.to_csv_string(),
        )?;
        fs::write(
            dir.join(format!("metrics_fig5_{tag}.csv")),
            report.to_metrics_csv(names),
        )?;
    }
    fs::write(dir.join("report.json"), out.test_report.to_json_string(names))?;
    fs::write(dir.join("confusion.csv"), out.test_report.confusion.to_csv_string())?;
    fs::write(dir.join("metrics_fig5.csv"), out.test_report.to_metrics_csv(names))?;
    Ok(())
}

fn load_config(config_path: Option<&Path>, overrides: &Overrides) -> Result<RunConfig> {
    let mut cfg = match config_path {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    cfg.apply_overrides(overrides);
    Ok(cfg)
}

pub fn cmd_train(config_path: Option<&Path>, overrides: &Overrides, quiet: bool) -> Result<()> {
    let cfg = load_config(config_path, overrides)?;
    let out = run_training(&cfg, |r| {
        if !quiet {
            println!(
                "epoch {} loss {:.6} acc {:.4} lr {} {:.2}s",
                r.epoch, r.loss, r.train_acc, r.lr, r.seconds
            );
        }
    })?;
    let dir = Path::new(&cfg.output_dir);
    write_training_outputs(&out, dir)?;
    println!(
        "train CA {:.4} | test CA {:.4} | artifacts in {}",
        out.train_report.accuracy,
        out.test_report.accuracy,
        dir.display()
    );
    Ok(())
}

/// Score a stored model against a labeled CSV.
pub fn eval_artifact(art: &ModelArtifact, docs: &[Document]) -> Result<EvalReport> {
    let cfg = art.model_config();
    let enc = encode_all(docs, &art.vocab, &art.tfidf, cfg.max_len);
    let (scores, truths) = score_dataset(&art.params, &cfg, &enc)?;
    evaluate(&scores, &truths, cfg.num_classes)
}

pub fn cmd_eval(model_path: &Path, data_path: &Path) -> Result<()> {
    let art = load_model(model_path)?;
    let docs = load_csv(data_path, art.config.model.num_classes)?;
    let report = eval_artifact(&art, &docs)?;
    println!("{}", report.to_json_string(art.config.class_names.as_deref()));
    Ok(())
}

/// Class probabilities for one text, sorted descending (ties by class id).
pub fn predict_ranked(art: &ModelArtifact, text: &str) -> Result<Vec<(usize, f64)>> {
    let cfg = art.model_config();
    let doc = Document { text: text.to_string(), label: 0 };
    let ex = encode(&doc, &art.vocab, &art.tfidf, cfg.max_len);
    let cache = forward(&ex, &art.params, &cfg)?;
    let mut ranked: Vec<(usize, f64)> = cache.probs.row(0).iter().copied().enumerate().collect();
    ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    Ok(ranked)
}

pub fn cmd_predict(model_path: &Path, text: &str) -> Result<()> {
    let art = load_model(model_path)?;
    let names = art.config.class_names.clone();
    for (c, p) in predict_ranked(&art, text)? {
        let label = match &names {
            Some(ns) if c < ns.len() => ns[c].clone(),
            _ => c.to_string(),
        };
        println!("{label} {p:.6}");
    }
    Ok(())
}

/// The four architecture variants, in the order they appear in the table.
pub const ABLATION_VARIANTS: [(&str, bool, bool); 4] = [
    ("full", true, true),
    ("no_attention", false, true),
    ("no_tfidf_gate", true, false),
    ("plain_lstm", false, false),
];

#[derive(Debug, Clone, PartialEq)]
pub struct AblationRow {
    pub variant: &'static str,
    pub test_ca: f64,
    pub test_macro_fm: f64,
    pub delta_ca: f64,
    pub delta_fm: f64,
}

/// Train all four variants with the same seed (hence identical split and
/// shared init stream); deltas are variant minus full.
pub fn run_ablation(
    base: &RunConfig,
    mut progress: impl FnMut(&'static str, &EpochRecord),
) -> Result<Vec<AblationRow>> {
    let mut results: Vec<(&'static str, f64, f64)> = Vec::new();
    for (name, attn, gate) in ABLATION_VARIANTS {
        let mut cfg = base.clone();
        cfg.model.enable_attention = attn;
        cfg.model.enable_tfidf_gate = gate;
        let out = run_training(&cfg, |r| progress(name, r))?;
        results.push((name, out.test_report.accuracy, out.test_report.macro_avg.fm));
    }
    let (full_ca, full_fm) = (results[0].1, results[0].2);
    Ok(results
        .into_iter()
        .map(|(variant, ca, fm)| AblationRow {
            variant,
            test_ca: ca,
            test_macro_fm: fm,
            delta_ca: ca - full_ca,
            delta_fm: fm - full_fm,
        })
        .collect())
}

pub fn ablation_csv(rows: &[AblationRow]) -> String {
    let mut s = String::from("variant,test_ca,test_macro_fm,delta_ca_vs_full,delta_fm_vs_full\n");
    for r in rows {
        s.push_str(&format!(
            "{},{},{},{},{}\n",
            r.variant, r.test_ca, r.test_macro_fm, r.delta_ca, r.delta_fm
        ));
    }
    s
}

pub fn cmd_ablate(config_path: Option<&Path>, overrides: &Overrides, quiet: bool) -> Result<()> {
    let cfg = load_config(config_path, overrides)?;
    let rows = run_ablation(&cfg, |name, r| {
        if !quiet {
            println!(
                "[{name}] epoch {} loss {:.6} acc {:.4}",
                r.epoch, r.loss, r.train_acc
            );
        }
    })?;
    fs::create_dir_all(&cfg.output_dir)?;
    let csv = ablation_csv(&rows);
    fs::write(Path::new(&cfg.output_dir).join("ablation.csv"), &csv)?;
    println!("variant          test_ca  test_macro_fm  delta_ca  delta_fm");
    for r in &rows {
        println!(
            "{:<16} {:>7.4}  {:>13.4}  {:>+8.4}  {:>+8.4}",
            r.variant, r.test_ca, r.test_macro_fm, r.delta_ca, r.delta_fm
        );
    }
    println!("wrote {}/ablation.csv", cfg.output_dir);
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write as _;

    /// Tiny 3-class corpus with class-correlated words, big enough to
    /// split and fit on.
    fn write_corpus(dir: &Path) -> std::path::PathBuf {
        let words = [
            ["glad", "smile", "bright"],
            ["angry", "shout", "storm"],
            ["tired", "slow", "gray"],
        ];
        let fillers = ["the", "a", "day", "it", "was"];
        let mut rng = SplitMix64::new(77);
        let path = dir.join("corpus.csv");
        let mut f = std::fs::File::create(&path).unwrap();
        writeln!(f, "text,label").unwrap();
        for i in 0..36 {
            let label = i % 3;
            let mut toks: Vec<&str> = Vec::new();
            for _ in 0..3 {
                toks.push(fillers[rng.below(fillers.len())]);
                toks.push(words[label][rng.below(3)]);
            }
            writeln!(f, "{},{label}", toks.join(" ")).unwrap();
        }
        path
    }

    fn small_cfg(data: &Path, out: &Path) -> RunConfig {
        let mut cfg = RunConfig::default();
        cfg.data = Some(data.to_string_lossy().into_owned());
        cfg.output_dir = out.to_string_lossy().into_owned();
        cfg.seed = 5;
        cfg.vocab.min_freq = 1;
        cfg.model.embed_dim = 8;
        cfg.model.hidden_dim = 8;
        cfg.model.num_heads = 2;
        cfg.model.num_classes = 3;
        cfg.model.max_len = 12;
        cfg.train.epochs = 2;
        cfg.train.batch_size = 8;
        cfg
    }

    #[test]
    fn training_pipeline_runs_and_persists() {
        let dir = tempfile::tempdir().unwrap();
        let data = write_corpus(dir.path());
        let out_dir = dir.path().join("out");
        let cfg = small_cfg(&data, &out_dir);
        let out = run_training(&cfg, |_| {}).unwrap();
        assert_eq!(out.log.records.len(), 2);
        assert_eq!(out.train_report.per_class.len(), 3);
        write_training_outputs(&out, &out_dir).unwrap();
        for f in [
            "model.art",
            "trainlog.csv",
            "report_train.json",
            "report_test.json",
            "confusion_train.csv",
            "confusion_test.csv",
            "metrics_fig5_train.csv",
            "metrics_fig5_test.csv",
            "report.json",
            "confusion.csv",
            "metrics_fig5.csv",
        ] {
            assert!(out_dir.join(f).exists(), "missing {f}");
        }
        // Stored artifact reproduces the test report exactly.
        let art = load_model(&out_dir.join("model.art")).unwrap();
        let docs = load_csv(&data, 3).unwrap();
        let (_, test_docs) =
            split_shuffle(&docs, cfg.train_fraction, derived_seeds(cfg.seed).0).unwrap();
        let report = eval_artifact(&art, &test_docs).unwrap();
        assert_eq!(report.accuracy, out.test_report.accuracy);
    }

    #[test]
    fn reruns_are_byte_identical() {
        let dir = tempfile::tempdir().unwrap();
        let data = write_corpus(dir.path());
        let cfg = small_cfg(&data, &dir.path().join("out"));
        let a = run_training(&cfg, |_| {}).unwrap();
        let b = run_training(&cfg, |_| {}).unwrap();
        assert_eq!(a.artifact.to_text(), b.artifact.to_text());
        assert_eq!(
            a.test_report.to_json_string(None),
            b.test_report.to_json_string(None)
        );
        assert_eq!(
            a.train_report.to_json_string(None),
            b.train_report.to_json_string(None)
        );
        // TrainLog matches in every column except wall-clock seconds.
        for (ra, rb) in a.log.records.iter().zip(&b.log.records) {
            assert_eq!(ra.loss.to_bits(), rb.loss.to_bits());
            assert_eq!(ra.train_acc.to_bits(), rb.train_acc.to_bits());
            assert_eq!(ra.lr.to_bits(), rb.lr.to_bits());
        }
    }

    #[test]
    fn ablation_rows_line_up_with_direct_runs() {
        let dir = tempfile::tempdir().unwrap();
        let data = write_corpus(dir.path());
        let mut cfg = small_cfg(&data, &dir.path().join("out"));
        cfg.train.epochs = 1;
        let rows = run_ablation(&cfg, |_, _| {}).unwrap();
        assert_eq!(rows.len(), 4);
        assert_eq!(rows[0].variant, "full");
        assert_eq!(rows[0].delta_ca, 0.0);
        // plain_lstm equals a direct run with both flags off.
        let mut plain = cfg.clone();
        plain.model.enable_attention = false;
        plain.model.enable_tfidf_gate = false;
        let direct = run_training(&plain, |_| {}).unwrap();
        let row = rows.iter().find(|r| r.variant == "plain_lstm").unwrap();
        assert_eq!(row.test_ca.to_bits(), direct.test_report.accuracy.to_bits());
        let csv = ablation_csv(&rows);
        assert!(csv.starts_with("variant,test_ca"));
        assert_eq!(csv.lines().count(), 5);
    }

    #[test]
    fn prediction_is_ranked_normalized_and_deterministic() {
        let dir = tempfile::tempdir().unwrap();
        let data = write_corpus(dir.path());
        let cfg = small_cfg(&data, &dir.path().join("out"));
        let out = run_training(&cfg, |_| {}).unwrap();
        let a = predict_ranked(&out.artifact, "a bright glad smile").unwrap();
        let b = predict_ranked(&out.artifact, "a bright glad smile").unwrap();
        assert_eq!(a, b);
        let total: f64 = a.iter().map(|(_, p)| p).sum();
        assert!((total - 1.0).abs() < 1e-10);
        assert!(a.windows(2).all(|w| w[0].1 >= w[1].1));
        // Degenerate input: bias-only path, still a distribution.
        let empty = predict_ranked(&out.artifact, "").unwrap();
        let total: f64 = empty.iter().map(|(_, p)| p).sum();
        assert!((total - 1.0).abs() < 1e-10);
    }

    #[test]
    fn missing_data_path_is_a_config_error() {
        let cfg = RunConfig::default();
        let err = run_training(&cfg, |_| {}).unwrap_err();
        assert!(matches!(err, Error::Config(_)));
        assert_eq!(err.exit_code(), 2);
        // Nonexistent file maps to the data exit code.
        let mut cfg = RunConfig::default();
        cfg.data = Some("definitely-not-here.csv".into());
        let err = run_training(&cfg, |_| {}).unwrap_err();
        assert_eq!(err.exit_code(), 3);
    }
}
