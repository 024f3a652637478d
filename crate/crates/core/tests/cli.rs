use std::path::Path;
use std::process::{Command, Output};

use neuromimic::defenses::{self, Origin, SecureLog, Update};

const TINY: &str = r#"
schema_version = 1
root_seed = 3

[task]
test_per_class = 10

[attacks]
tamper_scenarios = 3
poison_scenarios = 3

[dataset]
n_samples = 120
windows_per_scenario = 4

[detectors]
ids_prestudy_windows = 30
"#;

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_neuromimic"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("spawn neuromimic")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn help_and_usage_errors() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&run(dir.path(), &["--help"])), 0);
    assert_eq!(code(&run(dir.path(), &["frobnicate"])), 1);
    assert_eq!(code(&run(dir.path(), &["attack", "--kind", "sideways"])), 1);
    assert_eq!(code(&run(dir.path(), &["verify-log", "--log", "missing.bin"])), 1);
    let o = run(dir.path(), &["--format", "pdf", "experiment"]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("pdf"));
}

#[test]
fn config_typos_are_usage_errors() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("bad.toml"), "schema_version = 1\n[sim]\nn_nerons = 10\n").unwrap();
    let o = run(dir.path(), &["--config", "bad.toml", "gen-dataset"]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("n_nerons"), "{}", stderr(&o));

    std::fs::write(dir.path().join("old.toml"), "schema_version = 99\n").unwrap();
    assert_eq!(code(&run(dir.path(), &["--config", "old.toml", "gen-dataset"])), 1);
}

#[test]
fn verify_log_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let key = defenses::session_key(21);
    let mut log = SecureLog::new();
    for k in 0..5u32 {
        let u = Update {
            i: k,
            j: k + 1,
            delta_w: 0.01,
            t_sim: f64::from(k),
            origin: Origin::Stdp,
        };
        log.append(&u, &key);
    }
    let mut bytes = log.to_bytes();
    std::fs::write(dir.path().join("good.bin"), &bytes).unwrap();
    assert_eq!(code(&run(dir.path(), &["--seed", "21", "verify-log", "--log", "good.bin"])), 0);
    // A different root seed means a different session key.
    assert_eq!(code(&run(dir.path(), &["--seed", "22", "verify-log", "--log", "good.bin"])), 3);

    let hex: String = key.iter().map(|b| format!("{b:02x}")).collect();
    assert_eq!(code(&run(dir.path(), &["verify-log", "--log", "good.bin", "--key", &hex])), 0);
    assert_eq!(code(&run(dir.path(), &["verify-log", "--log", "good.bin", "--key", "zz"])), 1);

    // Flip one bit of the fourth record's delta_w.
    let at = 8 + 3 * (4 + defenses::RECORD_LEN) + 4 + 16;
    bytes[at] ^= 0x01;
    std::fs::write(dir.path().join("bad.bin"), &bytes).unwrap();
    let o = run(dir.path(), &["--seed", "21", "verify-log", "--log", "bad.bin"]);
    assert_eq!(code(&o), 3);
    assert!(stderr(&o).contains("seq 3"), "{}", stderr(&o));
}

#[test]
fn attack_writes_an_audit_trail_that_fails_verification() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("tiny.toml"), TINY).unwrap();
    let o = run(dir.path(), &["--config", "tiny.toml", "--out", "t", "attack", "--kind", "tamper", "--id", "2"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    for f in ["scenario.json", "tamper_log.csv", "update_log.bin"] {
        assert!(dir.path().join("t").join(f).exists(), "{f}");
    }
    // Most writes were never signed.
    let o = run(dir.path(), &["--config", "tiny.toml", "verify-log", "--log", "t/update_log.bin"]);
    assert_eq!(code(&o), 3);
}

#[test]
fn experiment_output_is_independent_of_jobs() {
    // Same config, including the output directory; only the worker count differs.
    let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    for (dir, jobs) in dirs.iter().zip(["1", "3"]) {
        std::fs::write(dir.path().join("tiny.toml"), TINY).unwrap();
        let o = run(dir.path(), &["--config", "tiny.toml", "--jobs", jobs, "--out", "out", "experiment"]);
        assert_eq!(code(&o), 0, "{}", stderr(&o));
    }
    let (a, b) = (dirs[0].path().join("out"), dirs[1].path().join("out"));
    for f in ["report.json", "dataset.csv", "table1.csv", "table2.csv", "table3.csv", "table3.md", "fig1_spike_hist.csv", "fig3_success.csv", "fig4_latency.csv"] {
        let x = std::fs::read(a.join(f)).unwrap();
        let y = std::fs::read(b.join(f)).unwrap();
        assert!(x == y, "{f} differs between job counts");
    }

    // Re-emitting from the saved report reproduces the tables.
    let o = run(&a, &["report", "--input", "report.json", "--out", "again"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    for f in ["table1.csv", "table2.csv", "table3.csv", "fig4_latency.csv"] {
        assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(a.join("again").join(f)).unwrap(), "{f}");
    }
}

#[test]
fn unmet_calibration_bands_exit_three() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = format!("{TINY}\n[calibration]\nbudget = 1\n[calibration.accuracy]\ntarget = 20.0\ntol = 0.5\n");
    std::fs::write(dir.path().join("cal.toml"), cfg).unwrap();
    let o = run(dir.path(), &["--config", "cal.toml", "--out", "cal", "calibrate"]);
    assert_eq!(code(&o), 3, "{}", stderr(&o));
    assert!(dir.path().join("cal/calibration.csv").exists());
}
