use std::process::{Command, Output};

fn seqmod(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_seqmod"))
        .args(args)
        .output()
        .unwrap()
}

fn corpus(name: &str) -> String {
    format!("{}/../core/corpus/{}.seq", env!("CARGO_MANIFEST_DIR"), name)
}

#[test]
fn proved_exits_zero_with_json_report() {
    let out = seqmod(&[
        "prove",
        &corpus("06_drinker"),
        "--check",
        "--output",
        "json",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["outcome"], "proved");
    assert!(v["proof"].is_object());
}

#[test]
fn unproved_exits_one() {
    let out = seqmod(&["prove", &corpus("24_empty_interval"), "--theory", "lra"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stdout).contains("outcome: unknown"));
}

#[test]
fn bad_input_exits_two() {
    assert_eq!(
        seqmod(&["prove", "/nonexistent/file.seq"]).status.code(),
        Some(2)
    );
    let dir = std::env::temp_dir().join(format!("seqmod-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let f = dir.join("broken.seq");
    std::fs::write(&f, "goal: forall x. (p(x) &").unwrap();
    assert_eq!(
        seqmod(&["prove", f.to_str().unwrap()]).status.code(),
        Some(2)
    );
    assert_eq!(seqmod(&["conformance", "nosuch"]).status.code(), Some(2));
    std::fs::remove_dir_all(dir).ok();
}

#[test]
fn conformance_text_report_for_one_axiom() {
    let out = seqmod(&["conformance", "fol", "--cases", "20", "--axiom", "AX_meet"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("AX_meet"), "{}", text);
    assert!(text.contains("result: PASS"), "{}", text);
}
