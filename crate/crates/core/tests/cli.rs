use std::collections::HashSet;
use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use apimap::alignment::{read_pairs, EmbeddingIndex};
use apimap::corpus::{load_corpus, parse_records, write_records, Language};
use apimap::seq2seq::{embed_corpus, load_checkpoint};

const SMALL: &str = "\
seed = 3
[synth]
n_per_concept = 4
[model]
embedding_dim = 8
hidden_units = 8
batch_size = 8
[training]
epochs = 2
early_stop = false
";

fn apimap(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_apimap"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Writes the small config and a synthetic corpus into `dir`.
fn setup(dir: &Path) -> String {
    let config = dir.join("small.toml");
    fs::write(&config, SMALL).unwrap();
    let out = apimap(&["synth", "--config", s(&config), "--out", s(&dir.join("corpus.tsv"))]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    s(&config).to_string()
}

#[test]
fn synth_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let config = setup(dir.path());
    let again = dir.path().join("again");
    fs::create_dir(&again).unwrap();
    let out = apimap(&["synth", "--config", &config, "--out", s(&again.join("corpus.tsv"))]);
    assert_eq!(code(&out), 0);
    for f in ["corpus.tsv", "concepts.tsv", "truth_method.tsv", "truth_class.tsv", "migration_truth.tsv"] {
        assert_eq!(
            fs::read(dir.path().join(f)).unwrap(),
            fs::read(again.join(f)).unwrap(),
            "{f} differs"
        );
    }
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("160 records (20 concepts)"), "{stdout}");
}

#[test]
fn missing_specs_is_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = apimap(&[
        "synth",
        "--specs",
        "/nonexistent/specs.toml",
        "--out",
        s(&dir.path().join("corpus.tsv")),
    ]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("does not exist"));
    assert!(!dir.path().join("corpus.tsv").exists());
}

#[test]
fn bad_threshold_rejected_before_any_output() {
    let dir = tempfile::tempdir().unwrap();
    let config = setup(dir.path());
    let corpus = dir.path().join("corpus.tsv");
    let pairs = dir.path().join("pairs.tsv");
    fs::write(&pairs, "src-copy_file-0000\ttgt-copy_file-0000\t1.0\n").unwrap();
    let rules = dir.path().join("rules.tsv");
    let out = apimap(&[
        "mine", "--config", &config, "--corpus", s(&corpus), "--pairs", s(&pairs), "--out", s(&rules),
        "--threshold", "1.5",
    ]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("threshold"));
    assert!(!rules.exists());
}

#[test]
fn unknown_flag_is_usage_error() {
    assert_eq!(code(&apimap(&["train", "--bogus"])), 2);
    assert_eq!(code(&apimap(&["align", "--checkpoint", "x", "--direction", "sideways"])), 2);
}

#[test]
fn zero_epochs_writes_initial_model() {
    let dir = tempfile::tempdir().unwrap();
    let config = setup(dir.path());
    let ckpt = dir.path().join("m.ckpt");
    let out = apimap(&[
        "train", "--config", &config, "--corpus", s(&dir.path().join("corpus.tsv")), "--out", s(&ckpt),
        "--epochs", "0",
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let model = load_checkpoint(&ckpt).unwrap();
    assert_eq!(model.epochs_trained(), 0);
    assert_eq!(model.config.hidden_units, 8);
    assert_eq!(model.config.seed, 3);
}

#[test]
fn single_language_corpus_fails_with_data_error() {
    let dir = tempfile::tempdir().unwrap();
    let config = setup(dir.path());
    let text = fs::read_to_string(dir.path().join("corpus.tsv")).unwrap();
    let source_only: Vec<_> = parse_records(&text)
        .unwrap()
        .into_iter()
        .filter(|r| r.language == Language::Source)
        .collect();
    let path = dir.path().join("source.tsv");
    write_records(&path, &source_only).unwrap();
    let ckpt = dir.path().join("m.ckpt");
    let out = apimap(&["train", "--config", &config, "--corpus", s(&path), "--out", s(&ckpt)]);
    assert_eq!(code(&out), 3);
    let err = stderr(&out);
    assert!(err.contains("train:") && err.contains("both languages"), "{err}");
    assert!(!ckpt.exists());
}

fn log_losses(path: &Path) -> Vec<f64> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.split('\t').nth(1).unwrap().parse().unwrap())
        .collect()
}

#[test]
fn resumed_training_matches_uninterrupted_run() {
    let dir = tempfile::tempdir().unwrap();
    let config = setup(dir.path());
    let corpus = dir.path().join("corpus.tsv");
    let run = |name: &str, epochs: &str, resume: Option<&Path>| {
        let ckpt = dir.path().join(format!("{name}.ckpt"));
        let log = dir.path().join(format!("{name}.tsv"));
        let mut args = vec![
            "train", "--config", &config, "--corpus", s(&corpus), "--out", s(&ckpt), "--log", s(&log),
            "--epochs", epochs, "--no-timestamps",
        ];
        if let Some(r) = resume {
            args.extend(["--resume", s(r)]);
        }
        let out = apimap(&args);
        assert_eq!(code(&out), 0, "{}", stderr(&out));
        (ckpt, log)
    };
    let (_, full_log) = run("full", "3", None);
    let (first, _) = run("first", "2", None);
    let (_, resumed_log) = run("resumed", "1", Some(&first));
    let full = log_losses(&full_log);
    let resumed = log_losses(&resumed_log);
    assert_eq!(full.len(), 3);
    assert_eq!(resumed.len(), 3);
    for (a, b) in full.iter().zip(&resumed) {
        assert!((a - b).abs() <= 1e-9, "{a} vs {b}");
    }
}

#[test]
fn mutual_alignment_keeps_only_mutual_neighbours() {
    let dir = tempfile::tempdir().unwrap();
    let config = setup(dir.path());
    let corpus = dir.path().join("corpus.tsv");
    let ckpt = dir.path().join("m.ckpt");
    assert_eq!(
        code(&apimap(&["train", "--config", &config, "--corpus", s(&corpus), "--out", s(&ckpt)])),
        0
    );
    let pairs = dir.path().join("pairs.tsv");
    let out = apimap(&[
        "align", "--config", &config, "--checkpoint", s(&ckpt), "--corpus", s(&corpus), "--out", s(&pairs),
        "--direction", "both", "--mutual", "--concepts", s(&dir.path().join("concepts.tsv")),
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert!(String::from_utf8_lossy(&out.stdout).contains("neural accuracy"));

    let model = load_checkpoint(&ckpt).unwrap();
    let (c, _) = load_corpus(&corpus, model.config.corpus_config()).unwrap();
    let vectors = embed_corpus(&model, &c).unwrap();
    let (src, tgt) = EmbeddingIndex::split(&vectors).unwrap();
    let best = |from: &EmbeddingIndex, to: &EmbeddingIndex| -> Vec<usize> {
        (0..from.len())
            .map(|i| to.nearest(from.vector(i), from.norm(i)).unwrap().0)
            .collect()
    };
    let (fwd, bwd) = (best(&src, &tgt), best(&tgt, &src));
    let expected: HashSet<(String, String)> = (0..src.len())
        .filter(|&i| bwd[fwd[i]] == i)
        .map(|i| (src.ids()[i].clone(), tgt.ids()[fwd[i]].clone()))
        .collect();
    let got: Vec<(String, String)> = read_pairs(&pairs)
        .unwrap()
        .into_iter()
        .map(|p| (p.source_id, p.target_id))
        .collect();
    assert_eq!(got.len(), expected.len(), "a mutual pair is emitted once");
    assert_eq!(got.into_iter().collect::<HashSet<_>>(), expected);
}

#[test]
fn stages_chain_through_files() {
    let dir = tempfile::tempdir().unwrap();
    let config = setup(dir.path());
    let p = |f: &str| dir.path().join(f);
    let ok = |args: &[&str]| {
        let out = apimap(args);
        assert_eq!(code(&out), 0, "{args:?}: {}", stderr(&out));
        String::from_utf8_lossy(&out.stdout).into_owned()
    };
    ok(&["train", "--config", &config, "--corpus", s(&p("corpus.tsv")), "--out", s(&p("m.ckpt"))]);
    assert!(p("train_log.tsv").exists());
    ok(&[
        "align", "--config", &config, "--checkpoint", s(&p("m.ckpt")), "--corpus", s(&p("corpus.tsv")),
        "--out", s(&p("pairs.tsv")),
    ]);
    let mined = ok(&[
        "mine", "--config", &config, "--corpus", s(&p("corpus.tsv")), "--pairs", s(&p("pairs.tsv")),
        "--out", s(&p("rules.tsv")),
    ]);
    assert!(mined.contains("source length 2-3"));
    let report = ok(&[
        "eval", "--config", &config, "--rules", s(&p("rules.tsv")), "--truth", s(&p("truth_method.tsv")),
        "--migration", s(&p("migration_truth.tsv")), "--cost-model", "levenshtein", "--out",
        s(&p("report.txt")), "--no-timestamps",
    ]);
    assert_eq!(report, fs::read_to_string(p("report.txt")).unwrap());
    for needle in [
        "exact match against synthetic ground truth",
        "== method-level mappings ==",
        "== class-level mappings ==",
        "levenshtein cost model",
        "mappings.method.all.f=",
    ] {
        assert!(report.contains(needle), "missing {needle}\n{report}");
    }
}

#[test]
fn judgments_replace_exact_match() {
    let dir = tempfile::tempdir().unwrap();
    let p = |f: &str| dir.path().join(f);
    let (rules, migration, judged) = (p("rules.tsv"), p("migration.tsv"), p("judged.txt"));
    fs::write(&rules, "A.x\tB.x\t0.800000\t4\t4\n").unwrap();
    fs::write(&migration, "A.x\tB.x\nA.y\tB.y\n").unwrap();
    fs::write(&judged, "true\ntrue\n").unwrap();
    let run = |extra: &[&str]| {
        let mut args = vec![
            "eval", "--rules", s(&rules), "--migration", s(&migration), "--no-timestamps",
        ];
        args.extend_from_slice(extra);
        let out = apimap(&args);
        assert_eq!(code(&out), 0, "{}", stderr(&out));
        String::from_utf8_lossy(&out.stdout).into_owned()
    };
    assert!(run(&[]).contains("correctness (exact match): 0.500000"));
    assert!(run(&["--judgments", s(&judged)]).contains("correctness (supplied judgments): 1.000000"));
}

#[test]
fn pipeline_report_has_every_section() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("small.toml");
    fs::write(&config, SMALL).unwrap();
    let out_dir = dir.path().join("run");
    let out = apimap(&["pipeline", "--config", s(&config), "--out-dir", s(&out_dir), "--no-timestamps"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    for f in [
        "corpus.tsv", "concepts.tsv", "truth_method.tsv", "truth_class.tsv", "migration_truth.tsv",
        "model.ckpt", "train_log.tsv", "pairs.tsv", "rules.tsv", "report.txt",
    ] {
        assert!(out_dir.join(f).exists(), "{f} missing");
    }
    let report = fs::read_to_string(out_dir.join("report.txt")).unwrap();
    for needle in [
        "== alignment accuracy ==",
        "neural ",
        "ir ",
        "source phrase length 1:",
        "source phrase length 8+:",
        "== method-level mappings ==",
        "delete-add cost model",
        "alignment.ir.mean=",
    ] {
        assert!(report.contains(needle), "missing {needle}\n{report}");
    }
    assert!(!report.contains("generated_at"));
}
