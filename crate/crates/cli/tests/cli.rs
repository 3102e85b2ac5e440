//! End-to-end runs of the `rotorfall` binary.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use rotorfall::checkpoint::Checkpoint;
use rotorfall::logs::{read_metrics, read_trajectory};

const SMALL: &str = r#"
[sac]
hidden_width = 16
batch_size = 32
warmup_steps = 100

[train]
log_interval = 100
eval_interval = 200
checkpoint_interval = 200
"#;

fn rotorfall(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rotorfall"))
        .args(args)
        .current_dir(dir)
        .env_remove("ROTORFALL_SEED")
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn ok(out: &Output) {
    assert!(out.status.success(), "status {:?}\nstdout {}\nstderr {}", out.status, String::from_utf8_lossy(&out.stdout), String::from_utf8_lossy(&out.stderr));
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn small_config(dir: &Path) -> String {
    fs::write(dir.join("small.toml"), SMALL).unwrap();
    "small.toml".into()
}

/// A zero-step run: its initial checkpoint is an untrained policy.
fn untrained(dir: &Path) -> String {
    let cfg = small_config(dir);
    ok(&rotorfall(&["train", "--steps", "0", "--out", "base", "--config", &cfg], dir));
    "base/checkpoints/initial.json".into()
}

#[test]
fn train_zero_steps_creates_run_layout() {
    let dir = tempfile::tempdir().unwrap();
    let out = rotorfall(&["train", "--steps", "0", "--out", "run1"], dir.path());
    ok(&out);
    let run = dir.path().join("run1");
    assert!(run.join("config.echo").is_file());
    assert!(run.join("checkpoints").is_dir());
    assert_eq!(Checkpoint::load(&run.join("checkpoints/initial.json")).unwrap().step, 0);
    assert!(read_metrics(fs::File::open(run.join("metrics.csv")).unwrap()).unwrap().is_empty());
}

#[test]
fn seeded_training_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    for out in ["a", "b"] {
        ok(&rotorfall(&["train", "--seed", "7", "--steps", "400", "--config", &cfg, "--out", out], dir.path()));
    }
    let a = fs::read(dir.path().join("a/metrics.csv")).unwrap();
    let b = fs::read(dir.path().join("b/metrics.csv")).unwrap();
    assert_eq!(a, b);
    assert_eq!(read_metrics(&a[..]).unwrap().len(), 4);
}

#[test]
fn echoed_config_reproduces_the_run() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    ok(&rotorfall(&["train", "--seed", "3", "--steps", "300", "--failed-rotor", "4", "--config", &cfg, "--out", "a"], dir.path()));
    fs::copy(dir.path().join("a/config.echo"), dir.path().join("echo.toml")).unwrap();
    ok(&rotorfall(&["train", "--config", "echo.toml", "--out", "b"], dir.path()));
    assert_eq!(fs::read(dir.path().join("a/metrics.csv")).unwrap(), fs::read(dir.path().join("b/metrics.csv")).unwrap());
}

#[test]
fn seed_falls_back_to_environment() {
    let dir = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_rotorfall"))
        .args(["train", "--steps", "0", "--out", "r"])
        .current_dir(dir.path())
        .env("ROTORFALL_SEED", "5")
        .env("RUST_LOG", "warn")
        .output()
        .unwrap();
    ok(&out);
    assert_eq!(Checkpoint::load(&dir.path().join("r/checkpoints/initial.json")).unwrap().seed, 5);
    let echo = fs::read_to_string(dir.path().join("r/config.echo")).unwrap();
    assert!(echo.contains("seed = 5"), "{echo}");

    let out = Command::new(env!("CARGO_BIN_EXE_rotorfall"))
        .args(["train", "--steps", "0", "--out", "r2"])
        .current_dir(dir.path())
        .env("ROTORFALL_SEED", "five")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("ROTORFALL_SEED"));
}

#[test]
fn failed_rotor_flag_pins_that_rotor() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    ok(&rotorfall(&["train", "--steps", "200", "--failed-rotor", "2", "--config", &cfg, "--out", "r"], dir.path()));
    let rows = read_trajectory(fs::File::open(dir.path().join("r/eval_latest.csv")).unwrap()).unwrap();
    assert!(!rows.is_empty());
    for r in &rows {
        assert_eq!(r.state.rotor_speeds[1], 0.0);
    }
    assert!(rows[0].state.rotor_speeds[0] > 0.0);
}

#[test]
fn invalid_config_names_the_key() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("bad.toml"), "[sac]\nlearning_rate = 0.1\n").unwrap();
    let out = rotorfall(&["train", "--config", "bad.toml", "--steps", "0"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("learning_rate"), "{}", stderr(&out));

    fs::write(dir.path().join("bad2.toml"), "[reward]\nc2 = -1.0\n").unwrap();
    let out = rotorfall(&["train", "--config", "bad2.toml", "--steps", "0"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("reward."), "{}", stderr(&out));

    let out = rotorfall(&["train", "--failed-rotor", "7", "--steps", "0"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("episode.failed_rotor"), "{}", stderr(&out));

    let out = rotorfall(&["config", "--config", "missing.toml"], dir.path());
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn eval_hover_writes_report_and_log() {
    let dir = tempfile::tempdir().unwrap();
    let ck = untrained(dir.path());
    let out = rotorfall(&["eval", "--maneuver", "hover", "--wind", "0", "--ckpt", &ck, "--out", "ev"], dir.path());
    ok(&out);
    let csv = fs::read_to_string(dir.path().join("ev/report.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 2);
    assert!(lines[1].starts_with("hover,"), "{csv}");
    assert!(dir.path().join("ev/report.txt").is_file());
    assert!(dir.path().join("ev/config.echo").is_file());
    let rows = read_trajectory(fs::File::open(dir.path().join("ev/trajectory.csv")).unwrap()).unwrap();
    assert!(!rows.is_empty());
}

#[test]
fn eval_land_untrained_falls_before_the_descent() {
    let dir = tempfile::tempdir().unwrap();
    let ck = untrained(dir.path());
    ok(&rotorfall(&["eval", "--maneuver", "land", "--ckpt", &ck, "--failed-rotor", "0", "--out", "ev"], dir.path()));
    let rows = read_trajectory(fs::File::open(dir.path().join("ev/trajectory.csv")).unwrap()).unwrap();
    let report = fs::read_to_string(dir.path().join("ev/report.csv")).unwrap();
    let f: Vec<&str> = report.lines().nth(1).unwrap().split(',').collect();
    // passing the floor during the hold phase is a fall, not a landing
    assert_eq!((f[8], f[9]), ("true", "false"), "{report}");
    assert!(rows.last().unwrap().t < 5.0);
    assert!(rows.iter().all(|r| r.goal.unwrap()[2] == 0.0));
}

#[test]
fn eval_with_wind_uses_ten_second_window() {
    let dir = tempfile::tempdir().unwrap();
    let ck = untrained(dir.path());
    ok(&rotorfall(&["eval", "--maneuver", "saddle", "--wind", "2.0", "--ckpt", &ck, "--out", "ev"], dir.path()));
    let csv = fs::read_to_string(dir.path().join("ev/report.csv")).unwrap();
    let row: Vec<&str> = csv.lines().nth(1).unwrap().split(',').collect();
    assert_eq!(row[0], "saddle");
    assert_eq!(row[1], "2.0");
    assert_eq!(row[2], "10.0");
}

#[test]
fn unknown_maneuver_lists_valid_names() {
    let dir = tempfile::tempdir().unwrap();
    let ck = untrained(dir.path());
    let out = rotorfall(&["eval", "--maneuver", "barrel-roll", "--ckpt", &ck], dir.path());
    assert_eq!(out.status.code(), Some(1));
    let err = stderr(&out);
    for name in ["hover", "land", "circle-xy", "circle-yz", "saddle"] {
        assert!(err.contains(name), "{err}");
    }
}

#[test]
fn missing_checkpoint_is_a_runtime_failure() {
    let dir = tempfile::tempdir().unwrap();
    let out = rotorfall(&["eval", "--maneuver", "hover", "--ckpt", "nope.json"], dir.path());
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn suite_reports_five_rows_and_repeats() {
    let dir = tempfile::tempdir().unwrap();
    let ck = untrained(dir.path());
    for out in ["s1", "s2"] {
        ok(&rotorfall(&["suite", "--ckpt", &ck, "--seed", "4", "--out", out], dir.path()));
    }
    let strip_timing = |p: &str| -> Vec<String> {
        fs::read_to_string(dir.path().join(p))
            .unwrap()
            .lines()
            .map(|l| {
                let mut f: Vec<&str> = l.split(',').collect();
                f.remove(14);
                f.join(",")
            })
            .collect()
    };
    let a = strip_timing("s1/summary.csv");
    assert_eq!(a.len(), 6);
    assert_eq!(a, strip_timing("s2/summary.csv"));
    // untrained policy: every maneuver ends in a crash, none in a landing
    for line in &a[1..] {
        let f: Vec<&str> = line.split(',').collect();
        assert_eq!((f[8], f[9]), ("true", "false"), "{line}");
    }
    for m in ["hover", "land", "circle-xy", "circle-yz", "saddle"] {
        assert_eq!(fs::read(dir.path().join(format!("s1/{m}.csv"))).unwrap(), fs::read(dir.path().join(format!("s2/{m}.csv"))).unwrap());
    }
}

#[test]
fn plots_are_well_formed_and_pure() {
    let dir = tempfile::tempdir().unwrap();
    let ck = untrained(dir.path());
    ok(&rotorfall(&["eval", "--maneuver", "hover", "--ckpt", &ck, "--failed-rotor", "0", "--duration", "3", "--out", "ev"], dir.path()));
    for kind in ["coords", "pwm", "traj3d"] {
        ok(&rotorfall(&["plot", "--log", "ev/trajectory.csv", "--kind", kind, "--out", "a.svg"], dir.path()));
        ok(&rotorfall(&["plot", "--log", "ev/trajectory.csv", "--kind", kind, "--out", "b.svg"], dir.path()));
        let a = fs::read_to_string(dir.path().join("a.svg")).unwrap();
        assert_eq!(a.as_bytes(), fs::read(dir.path().join("b.svg")).unwrap());
        roxmltree::Document::parse(&a).unwrap_or_else(|e| panic!("{kind}: {e}"));
    }
    ok(&rotorfall(&["plot", "--log", "ev/trajectory.csv", "--kind", "pwm"], dir.path()));
    assert!(dir.path().join("ev/trajectory.pwm.svg").is_file());
}

#[test]
fn hover_coords_goal_lines_are_flat() {
    let dir = tempfile::tempdir().unwrap();
    let ck = untrained(dir.path());
    ok(&rotorfall(&["eval", "--maneuver", "hover", "--ckpt", &ck, "--duration", "2", "--out", "ev"], dir.path()));
    ok(&rotorfall(&["plot", "--log", "ev/trajectory.csv", "--kind", "coords", "--out", "c.svg"], dir.path()));
    let svg = fs::read_to_string(dir.path().join("c.svg")).unwrap();
    let doc = roxmltree::Document::parse(&svg).unwrap();
    let goals: Vec<_> = doc
        .descendants()
        .filter(|n| n.has_tag_name("polyline") && n.attribute("stroke-dasharray").is_some())
        .collect();
    assert_eq!(goals.len(), 3);
    for g in goals {
        let ys: Vec<&str> = g.attribute("points").unwrap().split(' ').map(|p| p.split(',').nth(1).unwrap()).collect();
        assert!(ys.windows(2).all(|w| w[0] == w[1]), "goal line not flat");
    }
}

#[test]
fn malformed_log_reports_line_number() {
    let dir = tempfile::tempdir().unwrap();
    let header = "t,x,y,z,qw,qx,qy,qz,vx,vy,vz,p,q,r,w1,w2,w3,w4,pwm1,pwm2,pwm3,pwm4\n";
    let good = "0,0,0,0,1,0,0,0,0,0,0,0,0,0,1,1,1,1,0.5,0.5,0.5,0.5\n";
    fs::write(dir.path().join("bad.csv"), format!("{header}{good}{good}0,0,zz\n")).unwrap();
    let out = rotorfall(&["plot", "--log", "bad.csv", "--kind", "coords"], dir.path());
    assert_ne!(out.status.code(), Some(0));
    assert!(stderr(&out).contains("line 4"), "{}", stderr(&out));

    let out = rotorfall(&["plot", "--log", "bad.csv", "--kind", "bars"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("traj3d"));
}

#[test]
fn config_command_prints_parseable_defaults() {
    let dir = tempfile::tempdir().unwrap();
    let out = rotorfall(&["config"], dir.path());
    ok(&out);
    let text = String::from_utf8(out.stdout).unwrap();
    let cfg = rotorfall::config::Config::from_toml_str(&text).unwrap();
    assert_eq!(cfg, rotorfall::config::Config::default());
}
