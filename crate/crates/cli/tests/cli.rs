use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn demo(file: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../demo")
        .join(file)
}

fn run(style: &Path, out: &Path, extra: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_commentate"))
        .arg("--log")
        .arg(demo("match.log"))
        .arg("--character")
        .arg(demo("byrne.profile"))
        .arg("--style")
        .arg(style)
        .arg("--out")
        .arg(out)
        .args(extra)
        .output()
        .unwrap()
}

fn contents(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let p = e.unwrap().path();
            (
                p.file_name().unwrap().to_string_lossy().into_owned(),
                std::fs::read(&p).unwrap(),
            )
        })
        .collect()
}

#[test]
fn demo_matches_golden_and_reruns_identically() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    for dir in [&a, &b] {
        let out = run(&demo("style.ini"), dir, &[]);
        assert!(
            out.status.success(),
            "{}",
            String::from_utf8_lossy(&out.stderr)
        );
    }
    assert_eq!(contents(&a), contents(&b));
    assert_eq!(contents(&a), contents(&demo("golden")));
}

#[test]
fn missing_style_exits_with_one() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run(&tmp.path().join("absent.ini"), tmp.path(), &[]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("commentate: "));
}

#[test]
fn missing_aural_sound_exits_with_two() {
    let tmp = tempfile::tempdir().unwrap();
    let style = std::fs::read_to_string(demo("style.ini")).unwrap();
    let stripped: String = style
        .lines()
        .filter(|l| !l.starts_with("gasp"))
        .map(|l| format!("{l}\n"))
        .collect();
    let path = tmp.path().join("style.ini");
    std::fs::write(&path, stripped).unwrap();
    let out = run(&path, &tmp.path().join("out"), &[]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("gasp"));
}

#[test]
fn trace_flag_prints_commentary_events() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run(&demo("style.ini"), tmp.path(), &["--trace"]);
    assert!(out.status.success());
    let stdout = String::from_utf8(out.stdout).unwrap();
    let trace = std::fs::read_to_string(tmp.path().join("commentary.trace")).unwrap();
    let body: Vec<&str> = trace.lines().skip(1).collect();
    assert_eq!(stdout.lines().collect::<Vec<_>>(), body);
    assert!(stdout.lines().next().unwrap().contains("START\tutt-1"));
}

#[test]
fn rejects_non_positive_tick() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run(&demo("style.ini"), tmp.path(), &["--tick-seconds", "0"]);
    assert!(!out.status.success());
}
