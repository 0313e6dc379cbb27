use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use uee_core::synth::{standard_criteria, GroundTruth};

fn ueescan(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ueescan")).args(args).output().expect("binary runs")
}

fn ok(args: &[&str]) {
    let out = ueescan(args);
    assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn corpus(dir: &Path) -> PathBuf {
    let c = dir.join("corpus");
    ok(&["synth", "--seed", "3", "--small", "--out", s(&c)]);
    c
}

fn tree(dir: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in fs::read_dir(&d).unwrap() {
            let p = entry.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.insert(p.strip_prefix(dir).unwrap().to_path_buf(), fs::read(&p).unwrap());
            }
        }
    }
    out
}

fn manifest(dir: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap()
}

fn run_full(c: &Path, out: &Path) {
    let (trades, quotes) = (c.join("trades"), c.join("quotes"));
    let args = vec![
        "run",
        "--trades",
        s(&trades),
        "--quotes",
        s(&quotes),
        "--max-duration",
        "1.5s",
        "--max-duration",
        "2s",
        "--out",
        s(out),
    ];
    ok(&args);
}

#[test]
fn run_recovers_planted_events() {
    let tmp = tempfile::tempdir().unwrap();
    let c = corpus(tmp.path());
    let out = tmp.path().join("run");
    run_full(&c, &out);

    let truth = GroundTruth::from_json(&fs::read_to_string(c.join("ground_truth.json")).unwrap()).unwrap();
    let m = manifest(&out);
    assert_eq!(m["status"], "complete");
    for criteria in standard_criteria() {
        let expected = truth.expected_events(&criteria).len() as u64;
        assert_eq!(m["events"][criteria.label()].as_u64(), Some(expected));
        assert!(out.join(criteria.label()).join("spread_profile.csv").exists());
    }
    assert_eq!(m["subset_checks"][0]["holds"], true);
    let outputs: Vec<&str> = m["outputs"].as_array().unwrap().iter().map(|v| v.as_str().unwrap()).collect();
    assert!(outputs.contains(&"1.5s/event_analytics.json"));
    assert!(outputs.iter().all(|o| out.join(o).exists()));
}

#[test]
fn staged_run_is_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let c = corpus(tmp.path());
    let one = tmp.path().join("one");
    let two = tmp.path().join("two");
    run_full(&c, &one);
    ok(&["detect", "--trades", s(&c.join("trades")), "--max-duration", "2s", "--max-duration", "1.5s", "--out", s(&two)]);
    ok(&["--workers", "1", "analyze", "--out", s(&two), "--quotes", s(&c.join("quotes"))]);
    assert_eq!(tree(&one), tree(&two));

    let before = tree(&one);
    ok(&["report", "--out", s(&one)]);
    assert_eq!(tree(&one), before);
}

#[test]
fn skip_quotes_omits_quote_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let c = corpus(tmp.path());
    let out = tmp.path().join("run");
    ok(&["run", "--trades", s(&c.join("trades")), "--skip-quotes", "--out", s(&out)]);
    let d = out.join("1.5s");
    assert!(d.join("recovery_curves.csv").exists());
    assert!(!d.join("spread_profile.csv").exists());
    assert!(!d.join("volume_return_hist2d.csv").exists());
    assert!(!out.join("validation_quotes.json").exists());
}

#[test]
fn missing_quotes_abort_and_mark_incomplete() {
    let tmp = tempfile::tempdir().unwrap();
    let c = corpus(tmp.path());
    let out = tmp.path().join("run");
    let r = ueescan(&["run", "--trades", s(&c.join("trades")), "--out", s(&out)]);
    assert!(!r.status.success());
    assert!(String::from_utf8_lossy(&r.stderr).contains("--skip-quotes"));
    let m = manifest(&out);
    assert_eq!(m["status"], "incomplete");
    assert!(m["error"].as_str().unwrap().contains("--quotes"));

    // Detection output survives; a corrected analyze completes the run.
    ok(&["analyze", "--out", s(&out), "--quotes", s(&c.join("quotes"))]);
    assert_eq!(manifest(&out)["status"], "complete");
}

#[test]
fn analyze_rejects_changed_trades() {
    let tmp = tempfile::tempdir().unwrap();
    let c = corpus(tmp.path());
    let out = tmp.path().join("run");
    ok(&["detect", "--trades", s(&c.join("trades")), "--out", s(&out)]);
    let file = c.join("trades").join("trades_20140107.csv");
    let mut bytes = fs::read(&file).unwrap();
    bytes.extend_from_slice(b"09:00:00.000000000,SYNA,100.0,1\n");
    fs::write(&file, bytes).unwrap();
    let r = ueescan(&["analyze", "--out", s(&out), "--skip-quotes"]);
    assert!(!r.status.success());
    assert!(String::from_utf8_lossy(&r.stderr).contains("changed"));
}

#[test]
fn universe_restricts_symbols() {
    let tmp = tempfile::tempdir().unwrap();
    let c = corpus(tmp.path());
    let uni = tmp.path().join("universe.csv");
    fs::write(&uni, "symbol,company,sector\nZZZZ,\"Other, Inc.\",Tech\n").unwrap();
    let out = tmp.path().join("run");
    ok(&["detect", "--trades", s(&c.join("trades")), "--universe", s(&uni), "--out", s(&out)]);
    assert_eq!(manifest(&out)["events"]["1.5s"], 0);
}

#[test]
fn usage_errors_exit_with_code_two() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("x");
    for args in [
        vec!["detect", "--trades", "t.csv", "--max-duration", "1.5x", "--out", s(&out)],
        vec!["synth", "--seed", "-3", "--out", s(&out)],
        vec!["synth", "--seed", "abc", "--out", s(&out)],
        vec!["detect", "--out", s(&out)],
    ] {
        assert_eq!(ueescan(&args).status.code(), Some(2), "{args:?}");
    }
    assert!(!out.exists());
}

#[test]
fn unreadable_input_fails_cleanly() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("run");
    let r = ueescan(&["detect", "--trades", s(&tmp.path().join("missing.csv")), "--out", s(&out)]);
    assert_eq!(r.status.code(), Some(1));
    assert_eq!(manifest(&out)["status"], "incomplete");
}
