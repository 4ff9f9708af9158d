use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn qpol(args: &[&str], env_seed: Option<&str>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_qpol"));
    cmd.args(args).env_remove("QPOL_SEED");
    if let Some(s) = env_seed {
        cmd.env("QPOL_SEED", s);
    }
    cmd.output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn out_dir(root: &Path, name: &str) -> String {
    root.join(name).to_str().unwrap().to_string()
}

fn summary(dir: &str) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(Path::new(dir).join("summary.json")).unwrap()).unwrap()
}

#[test]
fn malus_writes_csv_and_summary() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = out_dir(tmp.path(), "m");
    let o = qpol(&["malus", "--count", "2000", "--output", &dir], None);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let csv = fs::read_to_string(Path::new(&dir).join("results.csv")).unwrap();
    assert_eq!(csv.lines().count(), 20);
    assert!(!csv.contains('\r'));
    assert!(csv.starts_with("theta_deg,n_pp,n_pm,n_mp,n_mm,malus_plus_ref,malus_minus_ref\n"));
    let s = summary(&dir);
    assert_eq!(s["pass"], true);
    assert_eq!(s["seed"], 1);
    assert!(String::from_utf8_lossy(&o.stdout).contains("verdict: PASS"));
}

#[test]
fn chsh_reports_bell_violation() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("chsh.json");
    fs::write(&cfg, r#"{"experiment": "chsh", "chsh_angles_deg": [0, 45, 22.5, 67.5], "count_per_angle": 20000}"#).unwrap();
    let dir = out_dir(tmp.path(), "c");
    let o = qpol(
        &["chsh", "--config", cfg.to_str().unwrap(), "--output", &dir],
        None,
    );
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let s = summary(&dir);
    assert_eq!(s["exceeds_bell_limit"], true);
    assert!((s["s_value"].as_f64().unwrap() - 2.828).abs() < 0.06);
    let csv = fs::read_to_string(Path::new(&dir).join("results.csv")).unwrap();
    assert_eq!(csv.lines().count(), 5);
}

#[test]
fn same_seed_gives_identical_bytes_across_thread_counts() {
    let tmp = tempfile::tempdir().unwrap();
    let mut files = Vec::new();
    for (name, threads) in [("a", "1"), ("b", "8"), ("c", "3")] {
        let dir = out_dir(tmp.path(), name);
        let o = qpol(
            &[
                "coincidence",
                "--seed",
                "42",
                "--count",
                "3000",
                "--threads",
                threads,
                "--output",
                &dir,
            ],
            None,
        );
        assert_eq!(code(&o), 0, "{}", stderr(&o));
        let read = |f: &str| fs::read(Path::new(&dir).join(f)).unwrap();
        files.push((read("results.csv"), read("summary.json")));
    }
    assert_eq!(files[0], files[1]);
    assert_eq!(files[0], files[2]);
}

#[test]
fn seed_environment_variable_and_flag_precedence() {
    let tmp = tempfile::tempdir().unwrap();
    let run = |name: &str, extra: &[&str], env: Option<&str>| {
        let dir = out_dir(tmp.path(), name);
        let mut args = vec!["malus", "--count", "500", "--output", &dir];
        args.extend_from_slice(extra);
        assert_eq!(code(&qpol(&args, env)), 0);
        summary(&dir)["seed"].as_u64().unwrap()
    };
    assert_eq!(run("d", &[], None), 1);
    assert_eq!(run("e", &[], Some("77")), 77);
    assert_eq!(run("f", &["--seed", "5"], Some("77")), 5);

    let o = qpol(
        &["malus", "--output", &out_dir(tmp.path(), "g")],
        Some("abc"),
    );
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("QPOL_SEED"));
}

#[test]
fn different_seeds_differ() {
    let tmp = tempfile::tempdir().unwrap();
    let read = |seed: &str| {
        let dir = out_dir(tmp.path(), seed);
        let o = qpol(
            &["malus", "--count", "1000", "--seed", seed, "--output", &dir],
            None,
        );
        assert_eq!(code(&o), 0);
        fs::read(Path::new(&dir).join("results.csv")).unwrap()
    };
    assert_ne!(read("1"), read("2"));
}

#[test]
fn malformed_config_is_located() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("bad.json");
    fs::write(
        &cfg,
        "{\n  \"seed\": 3,\n  \"count_per_angle\": \"many\"\n}\n",
    )
    .unwrap();
    let o = qpol(&["malus", "--config", cfg.to_str().unwrap()], None);
    assert_eq!(code(&o), 1);
    let err = stderr(&o);
    assert!(err.contains("bad.json:3:"), "{err}");
    assert!(err.contains("invalid type"), "{err}");
}

#[test]
fn configuration_errors_exit_1() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = out_dir(tmp.path(), "x");
    for args in [
        vec!["malus", "--count", "0", "--output", &dir],
        vec!["malus", "--angles", "90:0:5", "--output", &dir],
        vec!["chsh", "--angles", "0:90:5", "--output", &dir],
        vec!["malus", "--config", "/nonexistent/run.json"],
        vec!["teleport"],
        vec![],
    ] {
        let o = qpol(&args, None);
        assert_eq!(code(&o), 1, "{args:?}: {}", stderr(&o));
    }
    assert!(!Path::new(&dir).exists());
}

#[test]
fn help_and_version_exit_0() {
    assert_eq!(code(&qpol(&["--help"], None)), 0);
    assert_eq!(code(&qpol(&["--version"], None)), 0);
}

#[test]
fn unwritable_output_exits_3() {
    let tmp = tempfile::tempdir().unwrap();
    let blocker = tmp.path().join("file");
    fs::write(&blocker, "").unwrap();
    let o = qpol(
        &[
            "malus",
            "--count",
            "100",
            "--output",
            blocker.join("sub").to_str().unwrap(),
        ],
        None,
    );
    assert_eq!(code(&o), 3, "{}", stderr(&o));
}

#[test]
fn failed_fit_exits_2_and_still_writes_results() {
    // two angles leave one degree of freedom, so the reduced chi-square
    // falls outside its band for a sizeable fraction of seeds
    let tmp = tempfile::tempdir().unwrap();
    let mut seen = [false; 2];
    for seed in 1..40 {
        let dir = out_dir(tmp.path(), &format!("s{seed}"));
        let seed = seed.to_string();
        let o = qpol(
            &[
                "malus", "--angles", "30:60:30", "--count", "200", "--seed", &seed, "--output",
                &dir,
            ],
            None,
        );
        let pass = summary(&dir)["pass"].as_bool().unwrap();
        match code(&o) {
            0 => {
                assert!(pass);
                seen[0] = true;
            }
            2 => {
                assert!(!pass);
                assert!(String::from_utf8_lossy(&o.stdout).contains("verdict: FAIL"));
                seen[1] = true;
            }
            c => panic!("unexpected exit {c}"),
        }
    }
    assert_eq!(seen, [true, true]);
}

#[test]
fn svg_charts_follow_run_size() {
    let tmp = tempfile::tempdir().unwrap();
    let small = out_dir(tmp.path(), "small");
    assert_eq!(
        code(&qpol(
            &["malus", "--count", "100", "--svg", "--output", &small],
            None
        )),
        0
    );
    assert!(Path::new(&small).join("fig1.svg").exists());
    assert!(!Path::new(&small).join("fig2.svg").exists());

    let large = out_dir(tmp.path(), "large");
    assert_eq!(
        code(&qpol(
            &["malus", "--count", "1000", "--svg", "--output", &large],
            None
        )),
        0
    );
    assert!(Path::new(&large).join("fig2.svg").exists());

    let pairs = out_dir(tmp.path(), "pairs");
    assert_eq!(
        code(&qpol(
            &["coincidence", "--count", "500", "--svg", "--output", &pairs],
            None
        )),
        0
    );
    for f in ["fig3.svg", "fig4.svg"] {
        let svg = fs::read_to_string(Path::new(&pairs).join(f)).unwrap();
        assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
    }

    let plain = out_dir(tmp.path(), "plain");
    assert_eq!(
        code(&qpol(
            &["malus", "--count", "100", "--output", &plain],
            None
        )),
        0
    );
    assert!(!Path::new(&plain).join("fig1.svg").exists());
}

#[test]
fn verify_passes_and_lists_checks() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = out_dir(tmp.path(), "v");
    let o = qpol(&["verify", "--output", &dir], None);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));
    let csv = fs::read_to_string(Path::new(&dir).join("results.csv")).unwrap();
    assert!(csv.starts_with("check,value,threshold,passed\n"));
    assert!(csv.lines().skip(1).all(|l| l.ends_with(",true")));
    assert_eq!(summary(&dir)["pass"], true);
    assert_eq!(code(&qpol(&["verify", "--count", "5"], None)), 1);
}

#[test]
fn uncoupled_and_probabilistic_runs_pass_their_own_model() {
    let tmp = tempfile::tempdir().unwrap();
    for (name, json) in [
        ("u", r#"{"coupled": false}"#),
        ("p", r#"{"criterion": "malus_probabilistic"}"#),
        ("g", r#"{"distribution": {"type": "gaussian"}}"#),
    ] {
        let cfg = tmp.path().join(format!("{name}.json"));
        fs::write(&cfg, json).unwrap();
        let dir = out_dir(tmp.path(), name);
        let o = qpol(
            &[
                "coincidence",
                "--count",
                "4000",
                "--config",
                cfg.to_str().unwrap(),
                "--output",
                &dir,
            ],
            None,
        );
        assert_eq!(
            code(&o),
            0,
            "{name}: {}",
            String::from_utf8_lossy(&o.stdout)
        );
    }
}
