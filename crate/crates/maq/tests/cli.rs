//! The `maq` binary: flags, outputs and exit codes.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const SAMPLE_FASTA: &str = ">Base\nNVRLMLRL\n>Control\nNVRLMLRL\n>Insertion\nMNVRLMLRL\n\
>Deletion\nNRLMLRL\n>Point\nNVMLRLNL\n>InsertionAndDeletion\nMNVRLRL\n";

fn maq(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_maq")).args(args).output().unwrap()
}

fn write_input(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn aligned_fasta_on_stdout() {
    let dir = tempfile::tempdir().unwrap();
    let input = write_input(dir.path(), "sample.fasta", SAMPLE_FASTA);
    let out = maq(&["--input", &input, "--cutoff", "0.98"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    let headers: Vec<&str> = text.lines().filter(|l| l.starts_with('>')).collect();
    assert_eq!(headers.len(), 6);
    assert!(text.lines().filter(|l| !l.starts_with('>')).all(|l| l.len() == 9));
}

#[test]
fn writes_every_output_to_a_directory() {
    let dir = tempfile::tempdir().unwrap();
    let input = write_input(dir.path(), "sample.fasta", SAMPLE_FASTA);
    let out_dir = dir.path().join("out");
    let qubo_dir = dir.path().join("qubo");
    let distances = dir.path().join("d.tsv");
    let out = maq(&[
        "--input",
        &input,
        "--cutoff",
        "0.98",
        "--emit",
        "fasta,table,scores,report",
        "--out-dir",
        out_dir.to_str().unwrap(),
        "--dump-qubo",
        qubo_dir.to_str().unwrap(),
        "--distances",
        distances.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(out.stdout.is_empty());
    for suffix in ["aligned.fasta", "table.txt", "scores.tsv", "report.json"] {
        assert!(out_dir.join(format!("sample.{suffix}")).is_file(), "{suffix}");
    }
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out_dir.join("sample.report.json")).unwrap()).unwrap();
    assert_eq!(report["clusters"].as_array().unwrap().len(), 3);
    assert_eq!(report["max_single_call_spins"], 216);
    assert!(report.get("timings").is_none());

    let scores = fs::read_to_string(out_dir.join("sample.scores.tsv")).unwrap();
    assert_eq!(
        scores.lines().last().unwrap(),
        format!("total\t{}", report["score_total"])
    );
    for i in 0..3 {
        let dump = fs::read_to_string(qubo_dir.join(format!("cluster{i}.qubo.txt"))).unwrap();
        assert!(dump.lines().last().unwrap().starts_with("offset "));
    }
    assert!(fs::read_to_string(distances).unwrap().starts_with("\tBase\tControl"));
}

#[test]
fn baseline_report() {
    let dir = tempfile::tempdir().unwrap();
    let input = write_input(dir.path(), "sample.fasta", SAMPLE_FASTA);
    let out = maq(&["--input", &input, "--baseline", "--emit", "report"]);
    assert!(out.status.success());
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["mode"], "baseline");
    assert_eq!(report["max_single_call_spins"], 423);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("missing.fasta");
    assert_eq!(maq(&["--input", missing.to_str().unwrap()]).status.code(), Some(2));

    let bad = write_input(dir.path(), "bad.fasta", ">a\nAC1G\n");
    let out = maq(&["--input", &bad]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("maq: "));

    let ok = write_input(dir.path(), "ok.fasta", ">a\nACG\n>b\nAG\n");
    assert_eq!(maq(&["--input", &ok, "--gap-penalty", "1.5"]).status.code(), Some(2));

    // a fixed schedule this cold cannot leave the random start
    let stuck = write_input(dir.path(), "stuck.fasta", ">a\nACGTAC\n>b\nACGTAC\n");
    let out = maq(&[
        "--input",
        &stuck,
        "--backend",
        "sa",
        "--sweeps",
        "1",
        "--restarts",
        "1",
        "--retries",
        "0",
        "--beta-min",
        "50",
        "--beta-max",
        "100",
    ]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn same_flags_same_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let input = write_input(dir.path(), "sample.fasta", SAMPLE_FASTA);
    let args = [
        "--input",
        &input,
        "--emit",
        "fasta,report",
        "--backend",
        "sa",
        "--seed",
        "4",
    ];
    let (a, b) = (maq(&args), maq(&args));
    assert_eq!(a.status.code(), b.status.code());
    assert_eq!(a.stdout, b.stdout);
}
