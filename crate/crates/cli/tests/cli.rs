//! Exit-code contract of the binary: 0 success, 2 usage/config, 3 data or
//! layout problems. (4, numeric divergence, needs a diverging training run
//! and is covered by the error mapping unit tests.)

use std::path::Path;
use std::process::{Command, Output};

fn dbel(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dbel"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("no exit code")
}

#[test]
fn usage_problems_exit_2() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(code(&dbel(tmp.path(), &[])), 2);
    assert_eq!(code(&dbel(tmp.path(), &["no-such-command"])), 2);
    assert_eq!(code(&dbel(tmp.path(), &["predict"])), 2);
}

#[test]
fn missing_config_exits_2() {
    let tmp = tempfile::tempdir().unwrap();
    let out = dbel(tmp.path(), &["--config", "absent.conf", "enhance"]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("absent.conf"));
}

#[test]
fn bad_config_values_exit_2() {
    let tmp = tempfile::tempdir().unwrap();
    std::fs::write(tmp.path().join("dbel.conf"), "test_ratio = 1.5\n").unwrap();
    assert_eq!(code(&dbel(tmp.path(), &["train"])), 2);
}

#[test]
fn bad_seed_override_exits_2() {
    let tmp = tempfile::tempdir().unwrap();
    std::fs::write(tmp.path().join("dbel.conf"), "").unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_dbel"))
        .current_dir(tmp.path())
        .args(["enhance"])
        .env("DBEL_SEED", "not-a-number")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("DBEL_SEED"));
}

#[test]
fn missing_data_exits_3() {
    let tmp = tempfile::tempdir().unwrap();
    std::fs::write(
        tmp.path().join("dbel.conf"),
        "data_root = data\noutput_dir = out\n",
    )
    .unwrap();
    // data_root absent entirely.
    assert_eq!(code(&dbel(tmp.path(), &["enhance"])), 3);
    // Present but without the class layout or any image.
    std::fs::create_dir(tmp.path().join("data")).unwrap();
    assert_eq!(code(&dbel(tmp.path(), &["enhance"])), 3);
    // Training without enhanced output in place.
    assert_eq!(code(&dbel(tmp.path(), &["train"])), 3);
    // Prediction without a trained model.
    assert_eq!(code(&dbel(tmp.path(), &["predict", "some.png"])), 3);
}
