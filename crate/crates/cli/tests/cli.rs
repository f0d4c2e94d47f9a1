use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const PAGE: &str = r#"<html><head><title>shop</title></head><body>
<div id="nav"><a href="/">home</a><a href="/cart" class="cart">cart</a></div>
<ul class="items"><li class="item">one</li><li class="item">two</li><li class="item sale">three</li></ul>
<div id="footer"><p>contact us</p></div></body></html>"#;

fn sftm(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sftm"))
        .args(args)
        .current_dir(dir)
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn page(dir: &Path) -> PathBuf {
    let path = dir.join("page.html");
    fs::write(&path, PAGE).unwrap();
    path
}

#[test]
fn matching_a_page_with_itself() {
    let dir = tempfile::tempdir().unwrap();
    page(dir.path());
    let out = sftm(&["match", "page.html", "page.html"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(stdout(&out).contains("rate: 1.0000"));
    assert!(String::from_utf8_lossy(&out.stderr).contains("params: alpha=0.5"));
    let json: serde_json::Value = serde_json::from_slice(&fs::read(dir.path().join("matching.json")).unwrap()).unwrap();
    assert_eq!(json["pairs"].as_array().unwrap().len(), 13);
    assert_eq!(json["unmatched_t1"].as_array().unwrap().len(), 0);
}

#[test]
fn ted_baseline_from_the_command_line() {
    let dir = tempfile::tempdir().unwrap();
    page(dir.path());
    let out = sftm(&["match", "page.html", "page.html", "--algorithm", "ted", "-o", "ted.json"], dir.path());
    assert!(out.status.success());
    assert!(stdout(&out).contains("distance: 0.000000"));
    assert!(dir.path().join("ted.json").exists());
}

#[test]
fn failures_exit_nonzero() {
    let dir = tempfile::tempdir().unwrap();
    page(dir.path());
    let missing = sftm(&["match", "page.html", "nope.html"], dir.path());
    assert_eq!(missing.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&missing.stderr).contains("error: reading"));
    let bad = sftm(&["match", "page.html", "page.html", "--alpha", "1.5"], dir.path());
    assert_eq!(bad.status.code(), Some(1));
    assert!(!dir.path().join("matching.json").exists());
}

#[test]
fn mutants_are_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    page(dir.path());
    for out in ["a", "b"] {
        let o = sftm(&["mutate", "page.html", "--count", "4", "--seed", "7", "-o", out], dir.path());
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    for k in 0..4 {
        for file in ["source.html.json", "mutant.html.json", "mutations.json"] {
            let a = fs::read(dir.path().join(format!("a/{k:02}/{file}"))).unwrap();
            let b = fs::read(dir.path().join(format!("b/{k:02}/{file}"))).unwrap();
            assert_eq!(a, b, "{k} {file}");
        }
    }
    let log: serde_json::Value =
        serde_json::from_slice(&fs::read(dir.path().join("a/03/mutations.json")).unwrap()).unwrap();
    assert_eq!(log["ratio"], 0.375);
    assert_eq!(log["seed"], 10);
}

#[test]
fn bench_and_sweep_over_a_small_corpus() {
    let dir = tempfile::tempdir().unwrap();
    page(dir.path());
    assert!(sftm(&["mutate", "page.html", "--count", "3", "-o", "corpus"], dir.path()).status.success());

    let o = sftm(&["bench", "corpus", "-o", "b.csv", "--algorithm", "sftm", "--algorithm", "ted"], dir.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(dir.path().join("b.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 6);
    assert!(csv.lines().next().unwrap().starts_with("page,algorithm,n_nodes,mutation_ratio,elapsed_s"));
    let sidecar: serde_json::Value =
        serde_json::from_slice(&fs::read(dir.path().join("b.csv.config.json")).unwrap()).unwrap();
    assert_eq!(sidecar["algorithms"], serde_json::json!(["sftm", "ted"]));

    let o = sftm(&["sweep", "corpus", "--alphas", "0.3,0.5,1", "-o", "s.csv"], dir.path());
    assert!(o.status.success());
    let sweep = fs::read_to_string(dir.path().join("s.csv")).unwrap();
    assert_eq!(sweep.lines().count(), 1 + 3);
}

#[test]
fn empty_corpus_gives_header_only() {
    let dir = tempfile::tempdir().unwrap();
    fs::create_dir(dir.path().join("empty")).unwrap();
    let o = sftm(&["bench", "empty", "-o", "b.csv"], dir.path());
    assert!(o.status.success());
    let csv = fs::read_to_string(dir.path().join("b.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1);
}
