use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const SMALL: &str = r#"
[grid.omega]
min = -1.2
max = -0.4
points = 6

[grid.epsilon]
min = 2.0
max = 30.0
points = 4
log = true
"#;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_hybrid-swap"))
}

fn write_config(dir: &Path, text: &str) -> PathBuf {
    let p = dir.join("config.toml");
    fs::write(&p, text).unwrap();
    p
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn csvs(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut v: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == "csv"))
        .map(|p| {
            (
                p.file_name().unwrap().to_string_lossy().into_owned(),
                fs::read(&p).unwrap(),
            )
        })
        .collect();
    v.sort();
    v
}

fn entries(dir: &Path) -> Vec<String> {
    let mut v: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    v.sort();
    v
}

#[test]
fn reruns_are_byte_identical_for_any_worker_count() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), SMALL);
    let cfg = cfg.to_str().unwrap();
    for cmd in ["swap-map", "bandwidth-sweep", "collision-compare"] {
        let (a, b) = (
            tmp.path().join(format!("{cmd}-1")),
            tmp.path().join(format!("{cmd}-4")),
        );
        let oa = run(&[
            cmd,
            "--config",
            cfg,
            "--out",
            a.to_str().unwrap(),
            "--workers",
            "1",
            "--seed",
            "5",
        ]);
        let ob = run(&[
            cmd,
            "--config",
            cfg,
            "--out",
            b.to_str().unwrap(),
            "--workers",
            "4",
            "--seed",
            "5",
        ]);
        assert_eq!(code(&oa), 0, "{}", String::from_utf8_lossy(&oa.stderr));
        assert_eq!(code(&ob), 0);
        let (ca, cb) = (csvs(&a), csvs(&b));
        assert!(!ca.is_empty());
        assert_eq!(ca, cb, "{cmd} output depends on the worker count");
    }
}

#[test]
fn metadata_snapshot_reproduces_the_run() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        &format!("{SMALL}\n[node_b]\nbec_coupling = 0.0\n"),
    );
    let first = tmp.path().join("first");
    let o = run(&[
        "swap-map",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        first.to_str().unwrap(),
        "--seed",
        "9",
        "--tolerance",
        "1e-7",
        "--pair",
        "mirror_A,mirror_B",
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let meta = first.join("metadata.toml");
    let second = tmp.path().join("second");
    let o = run(&[
        "swap-map",
        "--config",
        meta.to_str().unwrap(),
        "--out",
        second.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(csvs(&first), csvs(&second));

    let config_of = |p: &Path| -> toml::Value {
        let t: toml::Table =
            toml::from_str(&fs::read_to_string(p.join("metadata.toml")).unwrap()).unwrap();
        t["config"].clone()
    };
    let c = config_of(&first);
    assert_eq!(c, config_of(&second));
    assert_eq!(c["seed"].as_integer(), Some(9));
    assert_eq!(c["tolerance"].as_float(), Some(1e-7));
    assert_eq!(c["node_b"]["bec_coupling"].as_float(), Some(0.0));
    // every emitted file is listed exactly once
    let t: toml::Table = toml::from_str(&fs::read_to_string(meta).unwrap()).unwrap();
    let mut listed: Vec<String> = t["run"]["files"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_str().unwrap().to_string())
        .collect();
    listed.sort();
    assert_eq!(listed, entries(&first));
}

#[test]
fn swap_map_columns_follow_the_requested_pairs() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), SMALL);
    let out = tmp.path().join("o");
    let o = run(&[
        "swap-map",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--pair",
        "bec_A,bec_B",
        "--pair",
        "bec_A,mirror_B",
    ]);
    assert_eq!(code(&o), 0);
    let text = fs::read_to_string(out.join("swap_map.csv")).unwrap();
    let mut data = text.lines().filter(|l| !l.starts_with('#'));
    assert_eq!(
        data.next(),
        Some("omega_a,omega_b,en_bec_A_bec_B,en_bec_A_mirror_B,flag")
    );
    let rows: Vec<&str> = data.collect();
    assert_eq!(rows.len(), 36);
    for r in rows {
        let cells: Vec<&str> = r.split(',').collect();
        assert_eq!(cells.len(), 5);
        assert_eq!(cells[4], "ok");
        for c in &cells[..4] {
            c.parse::<f64>().unwrap();
        }
    }
}

#[test]
fn configuration_errors_exit_2_before_writing() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("o");
    let cases = [
        "[grid.omega]\nmin = -1.0\nmax = -0.5\npoints = 0\n",
        "[node]\npump_pwer = 0.01\n",
        "[grid.omega]\nmin = -0.5\nmax = -1.0\npoints = 4\n",
        "[swap]\npairs = []\n",
    ];
    for text in cases {
        let cfg = write_config(tmp.path(), text);
        let o = run(&[
            "node-entanglement",
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
        ]);
        assert_eq!(
            code(&o),
            2,
            "{text}: {}",
            String::from_utf8_lossy(&o.stderr)
        );
        assert!(!out.exists());
    }
    let o = run(&[
        "swap-map",
        "--pair",
        "bec_A,bec_C",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 2);
    let o = run(&[
        "swap-map",
        "--config",
        "/nonexistent/config.toml",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 2);
    assert!(!out.exists());
}

#[test]
fn unstable_parameters_exit_3_with_the_stability_report() {
    let tmp = tempfile::tempdir().unwrap();
    // blue detuning at full drive
    let cfg = write_config(
        tmp.path(),
        &format!("{SMALL}\n[node_b]\ndetuning = -62831853.071795866\n"),
    );
    let out = tmp.path().join("o");
    let o = run(&[
        "swap-map",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 3);
    assert_eq!(entries(&out), ["metadata.toml", "stability.csv"]);
    let meta = fs::read_to_string(out.join("metadata.toml")).unwrap();
    assert!(meta.contains("status = \"unstable\""));
    let report = fs::read_to_string(out.join("stability.csv")).unwrap();
    assert!(report
        .lines()
        .any(|l| l.starts_with("node_b,") && l.ends_with(",unstable")));
}

#[test]
fn unwritable_output_leaves_no_partial_files() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), SMALL);

    // output path below a regular file
    let blocker = tmp.path().join("blocker");
    fs::write(&blocker, "x").unwrap();
    let o = run(&[
        "spectrum",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        blocker.join("o").to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 1);
    assert_eq!(fs::read(&blocker).unwrap(), b"x");

    // the second file cannot be moved into place: the first must be rolled back
    let out = tmp.path().join("o");
    fs::create_dir_all(out.join("collision_bec_A_mirror_B.csv")).unwrap();
    let o = run(&[
        "collision-compare",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--pair",
        "bec_A,bec_B",
        "--pair",
        "bec_A,mirror_B",
    ]);
    assert_eq!(code(&o), 1, "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(entries(&out), ["collision_bec_A_mirror_B.csv"]);
}

#[test]
fn monte_carlo_check_is_seeded() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        &format!("{SMALL}\n[swap]\nmc_samples = 20000\npairs = [\"bec_A,bec_B\"]\n"),
    );
    let z = |seed: &str, name: &str| -> f64 {
        let out = tmp.path().join(name);
        let o = run(&[
            "swap-map",
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
            "--seed",
            seed,
        ]);
        assert_eq!(code(&o), 0);
        let t: toml::Table =
            toml::from_str(&fs::read_to_string(out.join("metadata.toml")).unwrap()).unwrap();
        t["summary"]["bec_A-bec_B"]["mc_max_abs_z"]
            .as_float()
            .unwrap()
    };
    let (a, b, c) = (z("1", "a"), z("1", "b"), z("2", "c"));
    assert_eq!(a, b);
    assert_ne!(a, c);
    assert!(a < 5.0 && c < 5.0, "z-scores {a} {c}");
}

#[test]
fn configuration_example_in_the_guide_is_valid() {
    let guide = fs::read_to_string(
        Path::new(env!("CARGO_MANIFEST_DIR")).join("../../book/src/running-experiments.md"),
    )
    .unwrap();
    let block = guide
        .split("```toml\n")
        .nth(1)
        .unwrap()
        .split("```")
        .next()
        .unwrap();
    let c = hybrid_swap_cli::Config::from_toml(block).unwrap();
    c.validate().unwrap();
    assert_eq!(c.node_b.mirror_coupling, Some(0.0));
}
