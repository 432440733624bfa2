use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use entecho_cli::output::{read_csv, SeriesRow, SpectrumCsvRow, TransitionRow};

fn write_config(dir: &Path, name: &str, body: &str) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, body).unwrap();
    path
}

fn entecho(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_entecho"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn chain(m0: f64, m1: f64, extra: &str) -> String {
    format!(
        "[model]\nkind = \"chain\"\nl = 20\n[pre]\nmass = {m0}\n[post]\nmass = {m1}\n\
         [time]\nmax = 6.0\nsteps = 60\n[[subsystem]]\nname = \"A\"\nlen = 6\n{extra}"
    )
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let out = out.to_str().unwrap();

    let good = write_config(dir.path(), "good.toml", &chain(1.5, 0.3, ""));
    let res = entecho(&["quench", "--config", good.to_str().unwrap(), "--out-dir", out]);
    assert_eq!(res.status.code(), Some(0), "{}", String::from_utf8_lossy(&res.stderr));

    let bad = write_config(dir.path(), "bad.toml", "[model]\nkind = \"chain\"\nl = 20\n");
    let res = entecho(&["quench", "--config", bad.to_str().unwrap(), "--out-dir", out]);
    assert_eq!(res.status.code(), Some(2));

    let unknown = write_config(dir.path(), "unknown.toml", &chain(1.5, 0.3, "colour = 1\n"));
    let res = entecho(&["quench", "--config", unknown.to_str().unwrap(), "--out-dir", out]);
    assert_eq!(res.status.code(), Some(2));

    // gap closes at k = 0
    let closed = write_config(dir.path(), "closed.toml", &chain(1.0, 0.3, ""));
    let res = entecho(&["quench", "--config", closed.to_str().unwrap(), "--out-dir", out]);
    assert_eq!(res.status.code(), Some(3), "{}", String::from_utf8_lossy(&res.stderr));

    let missing = dir.path().join("missing.toml");
    let res = entecho(&["quench", "--config", missing.to_str().unwrap(), "--out-dir", out]);
    assert_ne!(res.status.code(), Some(0));
}

#[test]
fn trivial_quench_has_flat_rate_and_no_transitions() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "c.toml", &chain(1.5, 1.5, ""));
    let res = entecho(&[
        "quench",
        "--config",
        config.to_str().unwrap(),
        "--out-dir",
        dir.path().to_str().unwrap(),
    ]);
    assert!(res.status.success());
    let series: Vec<SeriesRow> = read_csv(&dir.path().join("A_series.csv")).unwrap();
    assert!(series.iter().all(|r| r.gamma.abs() < 1e-10));
    assert!(series.iter().all(|r| (r.echo_mag - 1.0).abs() < 1e-10));
    assert!(series.iter().all(|r| r.lambda_rate.unwrap().abs() < 1e-10));
    let events: Vec<TransitionRow> = read_csv(&dir.path().join("A_transitions.csv")).unwrap();
    assert!(events.is_empty(), "{events:?}");
}

#[test]
fn table_sizes_follow_the_grid() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "c.toml", &chain(1.5, 0.3, ""));
    let res = entecho(&[
        "quench",
        "--config",
        config.to_str().unwrap(),
        "--out-dir",
        dir.path().to_str().unwrap(),
    ]);
    assert!(res.status.success());
    let series: Vec<SeriesRow> = read_csv(&dir.path().join("A_series.csv")).unwrap();
    assert_eq!(series.len(), 61);
    let spectrum: Vec<SpectrumCsvRow> = read_csv(&dir.path().join("A_spectrum.csv")).unwrap();
    assert_eq!(spectrum.len(), 61 * 2 * 6);
    assert!(dir.path().join("loschmidt.csv").exists());
}

#[test]
fn seeded_runs_are_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let body = "[model]\nkind = \"chain\"\nl = 24\n\
                [pre]\nrandom = { low = 1.2, high = 1.8 }\n[post]\nmass = 0.3\n\
                [time]\nmax = 4.0\nsteps = 40\n[[subsystem]]\nname = \"A\"\nlen = 8\n";
    let config = write_config(dir.path(), "c.toml", body);
    let run = |sub: &str, seed: &str| {
        let out = dir.path().join(sub);
        let res = entecho(&[
            "quench",
            "--config",
            config.to_str().unwrap(),
            "--out-dir",
            out.to_str().unwrap(),
            "--seed",
            seed,
        ]);
        assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
        std::fs::read(out.join("A_series.csv")).unwrap()
    };
    let first = run("a", "7");
    assert_eq!(first, run("b", "7"));
    assert_ne!(first, run("c", "8"));
}

#[test]
fn transitions_subcommand_reproduces_quench_events() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(
        dir.path(),
        "c.toml",
        "[model]\nkind = \"chain\"\nl = 40\n[pre]\nmass = 1.5\n[post]\nmass = 0.3\n\
         [time]\nmax = 8.0\nsteps = 160\n[[subsystem]]\nname = \"A\"\nlen = 12\n",
    );
    let first = dir.path().join("first");
    let res = entecho(&[
        "quench",
        "--config",
        config.to_str().unwrap(),
        "--out-dir",
        first.to_str().unwrap(),
    ]);
    assert!(res.status.success());
    let again = dir.path().join("again");
    let series = first.join("A_series.csv");
    let res = entecho(&[
        "transitions",
        "--config",
        config.to_str().unwrap(),
        "--out-dir",
        again.to_str().unwrap(),
        "--series",
        series.to_str().unwrap(),
    ]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let original: Vec<TransitionRow> = read_csv(&first.join("A_transitions.csv")).unwrap();
    let redone: Vec<TransitionRow> = read_csv(&again.join("A_transitions.csv")).unwrap();
    let times = |rows: &[TransitionRow]| -> Vec<(String, f64)> {
        rows.iter().map(|r| (r.kind.clone(), r.t_c)).collect()
    };
    let (a, b) = (times(&original), times(&redone));
    assert_eq!(a.len(), b.len(), "{a:?} vs {b:?}");
    for ((ka, ta), (kb, tb)) in a.iter().zip(&b) {
        assert_eq!(ka, kb);
        assert!((ta - tb).abs() < 1e-3, "{ta} vs {tb}");
    }
}

#[test]
fn oracle_check_passes_on_small_ring() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(
        dir.path(),
        "c.toml",
        "[model]\nkind = \"chain\"\nl = 6\n[pre]\nmass = 0.3\n[post]\nmass = 1.5\n\
         [time]\nmax = 5.0\nsteps = 25\n[[subsystem]]\nlen = 3\n",
    );
    let res = entecho(&[
        "oracle-check",
        "--config",
        config.to_str().unwrap(),
        "--out-dir",
        dir.path().to_str().unwrap(),
    ]);
    let stdout = String::from_utf8_lossy(&res.stdout);
    assert_eq!(res.status.code(), Some(0), "{stdout}");
    assert!(!stdout.contains("FAIL"));
    assert!(dir.path().join("oracle_report.csv").exists());

    let too_big = write_config(dir.path(), "big.toml", &chain(1.5, 0.3, ""));
    let res = entecho(&["oracle-check", "--config", too_big.to_str().unwrap()]);
    assert_eq!(res.status.code(), Some(2));
}
