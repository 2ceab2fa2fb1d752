use std::collections::BTreeSet;
use std::time::Duration;

use serde_json::Value;

use cidiff::corpus::{load_corpus, write_case};
use cidiff::eval::{run_corpus, write_metrics_csv, AlgorithmKind, Builtin, CaseAlgorithm};
use cidiff::log::{load_log, TimestampStripper};
use cidiff::synth::{synthetic_corpus, MutationRates};
use cidiff::{cidiff, lcs_diff, SimilarityParams};

#[test]
fn crlf_and_timestamped_files_diff_cleanly() {
    let tmp = tempfile::tempdir().unwrap();
    let a = tmp.path().join("a.log");
    let b = tmp.path().join("b.log");
    std::fs::write(
        &a,
        "2024-05-01T08:00:00.0000001Z Build started\r\n2024-05-01T08:00:02.5000000Z took 2.5 s\r\n",
    )
    .unwrap();
    std::fs::write(
        &b,
        "2024-05-02T09:10:00.0000001Z Build started\n2024-05-02T09:10:03.1000000Z took 3.1 s\n",
    )
    .unwrap();
    let s = TimestampStripper::Default;
    let (a, b) = (load_log(&a, &s).unwrap(), load_log(&b, &s).unwrap());
    assert!(a.line(0).raw.ends_with('\r'));
    assert_eq!(a.line(0).stripped, "Build started");
    let script = cidiff(&a, &b, &SimilarityParams::default());
    assert_eq!(script.size(), 1);
    assert_eq!(lcs_diff(&a, &b).size(), 2);
}

#[test]
fn json_contract() {
    let a = cidiff::Log::from_lines(
        "pass.log",
        ["start", "took 1 s", "one", "moved here", "gone", "end"],
    );
    let b = cidiff::Log::from_lines(
        "fail.log",
        ["start", "took 2 s", "moved here", "one", "new", "end"],
    );
    let script = cidiff(&a, &b, &SimilarityParams::default());
    let v: Value = serde_json::from_str(&script.to_json().unwrap()).unwrap();
    let top: BTreeSet<&str> = v.as_object().unwrap().keys().map(String::as_str).collect();
    assert_eq!(
        top,
        BTreeSet::from(["algorithm", "params", "reference", "modified", "actions"])
    );
    assert_eq!(v["reference"]["source"], "pass.log");
    assert_eq!(v["reference"]["line_count"], 6);
    let kinds: BTreeSet<&str> = v["actions"]
        .as_array()
        .unwrap()
        .iter()
        .map(|a| a["kind"].as_str().unwrap())
        .collect();
    assert_eq!(
        kinds,
        BTreeSet::from(["unchanged", "updated", "added", "deleted", "moved-unchanged"])
    );
    for a in v["actions"].as_array().unwrap() {
        let kind = a["kind"].as_str().unwrap();
        assert_eq!(a["ref"].is_null(), kind == "added", "{a}");
        assert_eq!(a["mod"].is_null(), kind == "deleted", "{a}");
        assert_eq!(
            a.get("tokens_changed").is_some(),
            kind.ends_with("updated"),
            "{a}"
        );
    }
}

#[test]
fn generated_corpus_round_trips_through_disk() {
    let tmp = tempfile::tempdir().unwrap();
    let generated: Vec<_> = synthetic_corpus(9, 4, 250, MutationRates::default()).collect();
    for case in &generated {
        write_case(tmp.path(), case).unwrap();
    }
    let corpus = load_corpus(tmp.path(), &TimestampStripper::Default).unwrap();
    assert!(corpus.skipped.is_empty());
    assert_eq!(corpus.cases.len(), 4);
    for (loaded, original) in corpus.cases.iter().zip(&generated) {
        assert_eq!(loaded.id, original.id);
        assert_eq!(loaded.annotations, original.annotations);
    }

    let builtins: Vec<Builtin> = AlgorithmKind::ALL
        .into_iter()
        .map(|k| {
            Builtin::new(
                k,
                SimilarityParams::default(),
                cidiff::baselines::default_keywords(),
            )
        })
        .collect();
    let algs: Vec<&dyn CaseAlgorithm> = builtins.iter().map(|b| b as &dyn CaseAlgorithm).collect();
    let from_disk = run_corpus(&corpus.cases, &algs, Duration::from_secs(60), 2).unwrap();
    let in_memory = run_corpus(&generated, &algs, Duration::from_secs(60), 1).unwrap();
    let sizes = |m: &[cidiff::eval::CaseMetrics]| {
        m.iter()
            .flat_map(|c| {
                c.rows
                    .iter()
                    .map(|r| (r.script_size, r.added_count, r.precision, r.recall))
            })
            .collect::<Vec<_>>()
    };
    assert_eq!(sizes(&from_disk), sizes(&in_memory));
    for case in &from_disk {
        let ci = case.row("cidiff").unwrap();
        assert!((-100.0..=0.0).contains(&ci.p_size.unwrap()));
        assert!((-100.0..=0.0).contains(&ci.p_added.unwrap()));
    }
    let mut csv = Vec::new();
    write_metrics_csv(&mut csv, &from_disk).unwrap();
    assert_eq!(String::from_utf8(csv).unwrap().lines().count(), 1 + 4 * 4);
}
