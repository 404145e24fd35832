use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use lisa_core::experiment::{prepare_replication, DataSource};
use lisa_core::{load_csv, CategoricalPolicy, Generator};

fn lisa(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lisa"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = lisa(args);
    assert!(
        out.status.success(),
        "{args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn header(path: &Path) -> Vec<String> {
    let text = fs::read_to_string(path).unwrap();
    text.lines()
        .next()
        .unwrap()
        .split(',')
        .map(str::to_string)
        .collect()
}

#[test]
fn simulate_shapes_and_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let fr = dir.path().join("fr");
    ok(&[
        "simulate",
        "--generator",
        "friedman",
        "--n",
        "300",
        "--n-test",
        "20",
        "--sigma2",
        "9",
        "--seed",
        "4",
        "--out",
        p(&fr),
    ]);
    assert_eq!(header(&fr.join("train.csv")).len(), 11);
    assert_eq!(
        fs::read_to_string(fr.join("train.csv"))
            .unwrap()
            .lines()
            .count(),
        301
    );
    // load_csv reproduces the generated dataset exactly
    let source = DataSource::Simulated {
        generator: Generator::Friedman,
        n_train: 300,
        n_test: 20,
        sigma2: 9.0,
    };
    let expected = prepare_replication(&source, 4).unwrap();
    let loaded = load_csv(&fr.join("train.csv"), "y", &CategoricalPolicy::Reject).unwrap();
    assert_eq!(loaded.predictors(), expected.train.predictors());
    assert_eq!(loaded.response(), expected.train.response());

    let pw = dir.path().join("pw");
    ok(&[
        "simulate",
        "--generator",
        "piecewise",
        "--n",
        "100",
        "--out",
        p(&pw),
    ]);
    let truth = fs::read_to_string(pw.join("truth.csv")).unwrap();
    for line in truth.lines().skip(1) {
        let f: f64 = line.split(',').nth(1).unwrap().parse().unwrap();
        assert!([1.0, 2.0, 3.0, 4.0, 5.0].contains(&f), "{f}");
    }

    let po = dir.path().join("po");
    ok(&[
        "simulate",
        "--generator",
        "poly",
        "--n",
        "100",
        "--sigma2",
        "1",
        "--out",
        p(&po),
    ]);
    assert_eq!(header(&po.join("train.csv")).len(), 5);
}

fn small_run(sim: &Path, out: &Path, methods: &str) -> String {
    ok(&[
        "run",
        "--data-dir",
        p(sim),
        "--method",
        methods,
        "--k",
        "2",
        "--iters",
        "120",
        "--burn-in",
        "60",
        "--trees",
        "8",
        "--seed",
        "7",
        "--workers",
        "2",
        "--out",
        p(out),
    ])
}

fn draw_files(run: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    for method in ["full", "lisa", "modlisa", "cmc"] {
        let d = run.join("rep0").join(method);
        for e in fs::read_dir(&d).unwrap() {
            let e = e.unwrap();
            let name = e.file_name().into_string().unwrap();
            if name.ends_with(".csv") {
                out.push((format!("{method}/{name}"), fs::read(e.path()).unwrap()));
            }
        }
    }
    out.sort();
    out
}

#[test]
fn run_is_deterministic_and_reports() {
    let dir = tempfile::tempdir().unwrap();
    let sim = dir.path().join("sim");
    ok(&["simulate", "--n", "150", "--n-test", "30", "--out", p(&sim)]);
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    small_run(&sim, &a, "full,lisa,modlisa,cmc");
    small_run(&sim, &b, "full,lisa,modlisa,cmc");
    for m in ["full", "lisa", "modlisa", "cmc"] {
        assert!(a.join("rep0").join(m).join("manifest.txt").is_file(), "{m}");
    }
    let (fa, fb) = (draw_files(&a), draw_files(&b));
    assert_eq!(fa.len(), 3 + 3 * 4);
    assert_eq!(
        fa, fb,
        "rerun with the same settings must give identical draw files"
    );

    let report = ok(&["report", p(&a), "--ecdf-points", "0,2"]);
    assert!(report.contains("modlisa") && report.contains("TestRMSE"));
    let ecdf = fs::read_to_string(a.join("report/ecdf_rep0_point2.csv")).unwrap();
    let series: std::collections::BTreeSet<&str> = ecdf
        .lines()
        .skip(1)
        .map(|l| l.split(',').next().unwrap())
        .collect();
    assert_eq!(series.len(), 4);
    assert!(a.join("report/omega_rep0.csv").is_file());
    assert!(a.join("report/metrics.csv").is_file());

    // re-combination adds a method and leaves the original untouched
    let before = fs::read(a.join("rep0/lisa/combined_f.csv")).unwrap();
    let msg = ok(&[
        "combine",
        p(&a),
        "--method",
        "lisa",
        "--combine-rule",
        "inverse-variance",
    ]);
    assert!(msg.contains("lisa-inverse-variance"));
    assert_eq!(
        before,
        fs::read(a.join("rep0/lisa/combined_f.csv")).unwrap()
    );
    let table = ok(&["report", p(&a)]);
    assert!(table.contains("lisa-inverse-variance"));
}

#[test]
fn config_file_and_single_method_report() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("study.toml");
    let out = dir.path().join("study");
    fs::write(
        &cfg,
        format!(
            r#"
[data]
generator = "poly"
n_train = 80
n_test = 20
sigma2 = 1.0

[run]
out = "{}"
replications = 2
seed = 3
methods = ["full"]

[defaults]
iterations = 60
burn_in = 20
trees = 5
"#,
            out.display()
        ),
    )
    .unwrap();
    ok(&["run", "--config", p(&cfg)]);
    assert!(out.join("rep1/full/chain_0.csv").is_file());
    let manifest = fs::read_to_string(out.join("rep0/full/manifest.txt")).unwrap();
    assert!(manifest.contains("trees = 5"), "{manifest}");
    let table = ok(&["report", p(&out)]);
    let fit = table.split("\n\n").next().unwrap();
    assert_eq!(fit.lines().count(), 2, "header plus one row:\n{fit}");

    // flags override the file
    let out2 = dir.path().join("study2");
    ok(&[
        "run",
        "--config",
        p(&cfg),
        "--trees",
        "3",
        "--replications",
        "1",
        "--out",
        p(&out2),
    ]);
    let manifest = fs::read_to_string(out2.join("rep0/full/manifest.txt")).unwrap();
    assert!(manifest.contains("trees = 3"), "{manifest}");
    assert!(!out2.join("rep1").exists());
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let code = |args: &[&str]| lisa(args).status.code().unwrap();
    assert_eq!(code(&["--help"]), 0);
    assert_eq!(code(&["run", "--help"]), 0);
    assert_eq!(code(&[]), 1);
    assert_eq!(code(&["run", "--no-such-flag"]), 1);
    assert_eq!(
        code(&[
            "simulate",
            "--generator",
            "sine",
            "--n",
            "5",
            "--out",
            p(dir.path())
        ]),
        1
    );
    assert_eq!(
        code(&["run", "--method", "gibbs", "--out", p(dir.path())]),
        1
    );
    assert_eq!(
        code(&[
            "run",
            "--method",
            "full",
            "--k",
            "2",
            "--iters",
            "10",
            "--burn-in",
            "20",
            "--out",
            p(dir.path())
        ]),
        1
    );
    let bad = dir.path().join("bad.toml");
    fs::write(&bad, "[defaults]\nnot_a_key = 1\n").unwrap();
    assert_eq!(code(&["run", "--config", p(&bad)]), 1);
    assert_eq!(
        code(&[
            "combine",
            p(dir.path()),
            "--method",
            "lisa",
            "--combine-rule",
            "median"
        ]),
        1
    );

    // runtime failures
    assert_eq!(code(&["report", p(&dir.path().join("missing"))]), 2);
    let missing_csv = dir.path().join("nope.csv");
    assert_eq!(
        code(&[
            "run",
            "--data",
            p(&missing_csv),
            "--out",
            p(&dir.path().join("r"))
        ]),
        2
    );
}

#[test]
fn incomplete_run_lists_missing_pieces() {
    let dir = tempfile::tempdir().unwrap();
    let sim = dir.path().join("sim");
    ok(&["simulate", "--n", "60", "--n-test", "10", "--out", p(&sim)]);
    let run = dir.path().join("run");
    small_run(&sim, &run, "full,lisa");
    fs::remove_file(run.join("rep0/lisa/chain_1.csv")).unwrap();
    let out = lisa(&["report", p(&run)]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("chain_1.csv"), "{err}");
}
