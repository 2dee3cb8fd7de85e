//! Exit-code and diagnostics contract of the command-line driver.

use std::path::Path;
use std::process::{Command, Output};

use ntee::corpus;
use ntee::numerics::Rng;
use ntee::synthetic;

fn ntee_cmd(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ntee"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

#[test]
fn no_arguments_prints_usage_and_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let out = ntee_cmd(dir.path(), &[]);
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("Usage"), "{stderr}");
}

#[test]
fn unknown_flag_exits_2_and_help_exits_0() {
    let dir = tempfile::tempdir().unwrap();
    let out = ntee_cmd(dir.path(), &["build-vocab", "--no-such-flag"]);
    assert_eq!(out.status.code(), Some(2));
    let out = ntee_cmd(dir.path(), &["--help"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stdout).contains("build-vocab"));
}

#[test]
fn data_errors_exit_1_with_diagnostic() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("bad.jsonl"), "{\"id\": 1}\n").unwrap();
    let out = ntee_cmd(
        dir.path(),
        &["build-vocab", "--corpus", "bad.jsonl", "--output", "v.txt"],
    );
    assert_eq!(out.status.code(), Some(1));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("error:"), "{stderr}");
    assert!(stderr.contains("bad.jsonl:1"), "{stderr}");

    // Missing file is also a data error.
    let out = ntee_cmd(
        dir.path(),
        &[
            "build-vocab",
            "--corpus",
            "absent.jsonl",
            "--output",
            "v.txt",
        ],
    );
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn corrupted_model_file_is_rejected_with_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("model.bin"), b"JUNKJUNKJUNK").unwrap();
    std::fs::write(dir.path().join("sts.tsv"), "a\tb\t3.0\nc\td\t4.0\n").unwrap();
    let out = ntee_cmd(
        dir.path(),
        &["eval-sts", "--model", "model.bin", "--pairs", "sts.tsv"],
    );
    assert_eq!(out.status.code(), Some(1));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("bad magic"), "{stderr}");
}

#[test]
fn config_file_supplies_defaults_and_flags_override() {
    let dir = tempfile::tempdir().unwrap();
    let (docs, _) = synthetic::two_topic_corpus(5, 0, &mut Rng::with_seed(5));
    corpus::save_corpus(&dir.path().join("corpus.jsonl"), &docs).unwrap();
    std::fs::write(
        dir.path().join("run.conf"),
        "min_word_count = 1\nmin_entity_count = 1\n",
    )
    .unwrap();

    // Config file lowers both thresholds.
    let out = ntee_cmd(
        dir.path(),
        &[
            "build-vocab",
            "--config",
            "run.conf",
            "--corpus",
            "corpus.jsonl",
            "--output",
            "from-config.txt",
        ],
    );
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("min_word_count=1"), "{stderr}");

    // An explicit flag wins over the config file: a huge word threshold
    // empties the word vocabulary but keeps the entities.
    let out = ntee_cmd(
        dir.path(),
        &[
            "build-vocab",
            "--config",
            "run.conf",
            "--corpus",
            "corpus.jsonl",
            "--output",
            "flag-wins.txt",
            "--min-word-count",
            "1000",
        ],
    );
    assert_eq!(out.status.code(), Some(0));
    let text = std::fs::read_to_string(dir.path().join("flag-wins.txt")).unwrap();
    assert!(!text.contains("word\t"), "{text}");
    assert!(text.contains("entity\t"), "{text}");

    // The resolved configuration is logged.
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("min_word_count=1000"), "{stderr}");
}

#[test]
fn gradcheck_subcommand_reports_per_group_errors() {
    let dir = tempfile::tempdir().unwrap();
    let out = ntee_cmd(dir.path(), &["gradcheck"]);
    assert_eq!(out.status.code(), Some(0));
    let stdout = String::from_utf8_lossy(&out.stdout);
    for group in [
        "sgns.center",
        "ntee.projection",
        "ntee.word_rows",
        "ntee.entity_rows.positive",
        "ntee.entity_rows.negative",
        "mlp.w1",
        "qa.entity_rows",
    ] {
        assert!(stdout.contains(&format!("group={group} ")), "{stdout}");
    }
    assert!(stdout.contains("gradcheck=pass"), "{stdout}");
}
