//! Runs the built executable, including the thread-cap environment variable.

use std::process::Command;

#[test]
fn binary_honours_thread_cap() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("v.json");
    std::fs::write(&p, r#"{"L":1, "entries":[{"n":0,"re":[[1.5]],"im":[[0.0]]}]}"#).unwrap();
    let run = |threads: &str| {
        Command::new(env!("CARGO_BIN_EXE_levinson-lab"))
            .args(["levinson", "--potential", p.to_str().unwrap(), "--quad-points", "128"])
            .env("LEVINSON_LAB_THREADS", threads)
            .output()
            .unwrap()
    };
    let one = run("1");
    let four = run("4");
    assert_eq!(one.status.code(), Some(0));
    assert_eq!(one.stdout, four.stdout);
    assert_eq!(run("zero").status.code(), Some(2));
}
