use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn obcsim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_obcsim"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn default_scenario() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios/default.toml")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn default_run_reaches_sun_pointing() {
    let dir = TempDir::new().unwrap();
    let o = obcsim(&["run", s(&default_scenario()), "--out", s(dir.path())]);
    assert!(o.status.success(), "{}", stderr(&o));
    let out = stdout(&o);
    assert!(out.contains("Detumble -> SunPointing"), "{out}");
    assert!(out.contains("power cycles"), "{out}");
    assert!(out.contains("compression ratios"), "{out}");
    let telemetry = fs::read_to_string(dir.path().join("telemetry.jsonl")).unwrap();
    let first: serde_json::Value = serde_json::from_str(telemetry.lines().next().unwrap()).unwrap();
    assert_eq!(first["type"], "header");
    assert!(dir.path().join("summary.txt").exists());
}

#[test]
fn same_seed_gives_identical_telemetry() {
    let a = TempDir::new().unwrap();
    let b = TempDir::new().unwrap();
    for d in [&a, &b] {
        let o = obcsim(&["run", s(&default_scenario()), "--duration", "30", "--seed", "9", "--out", s(d.path())]);
        assert!(o.status.success(), "{}", stderr(&o));
    }
    let ta = fs::read(a.path().join("telemetry.jsonl")).unwrap();
    let tb = fs::read(b.path().join("telemetry.jsonl")).unwrap();
    assert_eq!(ta, tb);
}

#[test]
fn validation_errors_exit_2_naming_the_problem() {
    let dir = TempDir::new().unwrap();
    let src = fs::read_to_string(default_scenario()).unwrap();

    let clash = dir.path().join("clash.toml");
    fs::write(
        &clash,
        format!("{src}\n[[task]]\nname = \"spin\"\nbody = \"bdot-control\"\nperiod_ms = 100\nduration_ms = 5\nmodes = [\"Imaging\"]\n"),
    )
    .unwrap();
    let o = obcsim(&["run", s(&clash), "--out", s(dir.path())]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("Imaging"), "{}", stderr(&o));

    let unknown = dir.path().join("unknown.toml");
    fs::write(&unknown, src.replacen("[run]\n", "[run]\nbogus_key = 3\n", 1)).unwrap();
    let o = obcsim(&["run", s(&unknown)]);
    assert_eq!(o.status.code(), Some(2));
    let line = src.lines().position(|l| l == "[run]").unwrap() + 2;
    let err = stderr(&o);
    assert!(err.contains(&format!("line {line}")) && err.contains("bogus_key"), "{err}");

    let o = obcsim(&["run", s(&default_scenario()), "--duration", "-1"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn unwritable_output_exits_3() {
    let dir = TempDir::new().unwrap();
    let blocker = dir.path().join("file");
    fs::write(&blocker, b"x").unwrap();
    let o = obcsim(&["run", s(&default_scenario()), "--duration", "1", "--out", s(&blocker.join("sub"))]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
}

#[test]
fn compress_decompress_round_trip_is_byte_identical() {
    let dir = TempDir::new().unwrap();
    let cube = dir.path().join("cube.raw");
    let o = obcsim(&["synth-cube", "band-correlated", s(&cube), "--width", "16", "--height", "16", "--bands", "8"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let stream = dir.path().join("cube.hsc");
    let o = obcsim(&["compress", s(&cube), s(&stream)]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("ratio"));
    let back = dir.path().join("back.raw");
    let o = obcsim(&["decompress", s(&stream), s(&back)]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(fs::read(&cube).unwrap(), fs::read(&back).unwrap());
    assert_eq!(fs::read(dir.path().join("cube.raw.hdr")).unwrap(), fs::read(dir.path().join("back.raw.hdr")).unwrap());
}

#[test]
fn malformed_streams_report_offsets() {
    let dir = TempDir::new().unwrap();
    let cube = dir.path().join("c.raw");
    assert!(obcsim(&["synth-cube", "gradient", s(&cube), "--width", "8", "--height", "8", "--bands", "4"]).status.success());
    let stream = dir.path().join("c.hsc");
    assert!(obcsim(&["compress", s(&cube), s(&stream)]).status.success());
    let bytes = fs::read(&stream).unwrap();

    let cut = dir.path().join("cut.hsc");
    fs::write(&cut, &bytes[..bytes.len() - 3]).unwrap();
    let o = obcsim(&["decompress", s(&cut), s(&dir.path().join("x.raw"))]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains(&format!("offset {}", bytes.len() - 3)), "{}", stderr(&o));

    let mut wrong = bytes.clone();
    wrong[4] = wrong[4].wrapping_add(1);
    let bad = dir.path().join("ver.hsc");
    fs::write(&bad, &wrong).unwrap();
    let o = obcsim(&["decompress", s(&bad), s(&dir.path().join("y.raw"))]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("version mismatch"), "{}", stderr(&o));
}

#[test]
fn ecc_check_and_inject() {
    let dir = TempDir::new().unwrap();
    let data = dir.path().join("data.bin");
    fs::write(&data, (0..=255u8).cycle().take(800).collect::<Vec<_>>()).unwrap();
    let dump = dir.path().join("bank.ecc");
    assert!(obcsim(&["ecc", "encode", s(&data), s(&dump)]).status.success());

    let o = obcsim(&["ecc", "check", s(&dump)]);
    assert!(o.status.success());
    assert!(stdout(&o).starts_with("corrected=0 uncorrectable=0"), "{}", stdout(&o));

    assert!(obcsim(&["ecc", "inject", s(&dump), "0:5"]).status.success());
    let o = obcsim(&["ecc", "check", s(&dump)]);
    assert!(stdout(&o).starts_with("corrected=1 uncorrectable=0"), "{}", stdout(&o));

    assert!(obcsim(&["ecc", "inject", s(&dump), "3:1,3:70"]).status.success());
    let o = obcsim(&["ecc", "check", s(&dump)]);
    assert!(stdout(&o).contains("uncorrectable=1"), "{}", stdout(&o));

    let o = obcsim(&["ecc", "inject", s(&dump), "0:72"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("out of range"), "{}", stderr(&o));
    let o = obcsim(&["ecc", "inject", s(&dump), "100000:1"]);
    assert_eq!(o.status.code(), Some(2));
}
