use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_shiftstable"))
}

fn run(dir: &Path, args: &[&str]) -> Output {
    bin()
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn data(name: &str) -> String {
    let p = PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../data")
        .join(name);
    p.to_str().unwrap().to_owned()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

fn rows(csv_text: &str) -> (Vec<String>, Vec<Vec<String>>) {
    let mut r = csv::Reader::from_reader(csv_text.as_bytes());
    let header = r.headers().unwrap().iter().map(str::to_owned).collect();
    let body = r
        .records()
        .map(|rec| rec.unwrap().iter().map(str::to_owned).collect())
        .collect();
    (header, body)
}

#[test]
fn help_and_bad_args() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run(dir.path(), &["--help"]).status.code(), Some(0));
    assert_eq!(run(dir.path(), &["no-such-command"]).status.code(), Some(1));
    // tradeoff needs an explicit seed
    assert_eq!(
        run(dir.path(), &["tradeoff", "--preset", "triangle"])
            .status
            .code(),
        Some(1)
    );
    let o = run(
        dir.path(),
        &["sweep", "--preset", "triangle", "--lambda-grid", "1:2:0"],
    );
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("steps >= 1"));
}

#[test]
fn stability_on_pneumonia() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(
        dir.path(),
        &[
            "stability",
            "--preset",
            "pneumonia",
            "--condition",
            "Pneumonia,Asthma",
        ],
    );
    assert_eq!(o.status.code(), Some(0));
    assert!(
        stdout(&o).contains("path criterion: unstable"),
        "{}",
        stdout(&o)
    );
    assert!(stdout(&o).contains("Asthma -!-> ICU"));
    let o = run(
        dir.path(),
        &[
            "stability",
            "--preset",
            "pneumonia",
            "--condition",
            "Pneumonia,Asthma,ICU",
        ],
    );
    assert!(stdout(&o).contains("path criterion: stable"));

    let o = run(
        dir.path(),
        &[
            "stability",
            "--graph",
            &data("pneumonia.json"),
            "--condition",
            "Pneumonia",
            "--out",
            "s.json",
        ],
    );
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value =
        serde_json::from_slice(&std::fs::read(dir.path().join("s.json")).unwrap()).unwrap();
    assert_eq!(v["target"], "Mortality");
    assert_eq!(v["stable"], v["selection_diagram_stable"]);
}

#[test]
fn unknown_node_is_a_spec_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(
        dir.path(),
        &["stability", "--preset", "triangle", "--condition", "Nope"],
    );
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn malformed_json_reports_location() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("bad.json"), "{\n  \"nodes\": [\n").unwrap();
    let o = run(dir.path(), &["stability", "--graph", "bad.json"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("line"), "{}", stderr(&o));

    let o = run(dir.path(), &["stability", "--graph", "missing.json"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn hierarchy_marks_one_optimal_row() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(
        dir.path(),
        &["hierarchy", "--preset", "style-shift", "--out", "h.csv"],
    );
    assert_eq!(o.status.code(), Some(0));
    let (header, body) = rows(&std::fs::read_to_string(dir.path().join("h.csv")).unwrap());
    assert_eq!(header[0], "level");
    let opt = header.iter().position(|h| h == "optimal").unwrap();
    let optimal: Vec<_> = body.iter().filter(|r| r[opt] == "true").collect();
    assert_eq!(optimal.len(), 1);
    assert!(optimal[0][3].contains("W -> X"));
}

#[test]
fn sweep_csv_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let args = [
        "sweep",
        "--scm",
        &data("triangle-scm.json"),
        "--lambda-grid=-10:10:21",
        "--out",
        "s.csv",
    ];
    assert_eq!(run(dir.path(), &args).status.code(), Some(0));
    let text = std::fs::read_to_string(dir.path().join("s.csv")).unwrap();
    let (header, body) = rows(&text);
    assert_eq!(
        header,
        ["lambda", "oracle_mse", "stable_mse", "unstable_fixed_mse"]
    );
    assert_eq!(body.len(), 21);
    for r in &body {
        let v: Vec<f64> = r.iter().map(|x| x.parse().unwrap()).collect();
        assert!(v[1] <= v[2] + 1e-12 && v[1] <= v[3] + 1e-12);
    }
    // the stable column is flat
    let s: Vec<f64> = body.iter().map(|r| r[2].parse().unwrap()).collect();
    assert!(s.iter().all(|x| (x - s[0]).abs() < 1e-9));
    let meta: serde_json::Value =
        serde_json::from_slice(&std::fs::read(dir.path().join("s.csv.meta.json")).unwrap())
            .unwrap();
    let c = meta["crossover"].as_array().unwrap();
    assert!(c[0].as_f64().unwrap() < 5.0 && 5.0 < c[1].as_f64().unwrap());
}

#[test]
fn tradeoff_at_zero_spread_favours_unstable() {
    let dir = tempfile::tempdir().unwrap();
    let args = [
        "tradeoff",
        "--preset",
        "random-triangle",
        "--seed",
        "4",
        "--sigma-grid",
        "0",
        "--n-mc",
        "50",
        "--out",
        "t.csv",
    ];
    assert_eq!(run(dir.path(), &args).status.code(), Some(0));
    let (header, body) = rows(&std::fs::read_to_string(dir.path().join("t.csv")).unwrap());
    let regret = header.iter().position(|h| h == "avg_regret").unwrap();
    let get = |name: &str| -> f64 {
        body.iter().find(|r| r[1] == name).unwrap()[regret]
            .parse()
            .unwrap()
    };
    assert!(get("unstable") <= get("stable") + 1e-12);
    assert!(get("stepwise") <= get("stable") + 1e-12);
}

#[test]
fn seeded_runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let tradeoff = |out: &str, seed: &str| {
        let args = [
            "tradeoff",
            "--preset",
            "random-triangle",
            "--seed",
            seed,
            "--sigma-grid",
            "1:3:3",
            "--n-mc",
            "40",
            "--out",
            out,
            "--trace-out",
            &format!("{out}.trace"),
        ];
        assert_eq!(run(dir.path(), &args).status.code(), Some(0));
        std::fs::read(dir.path().join(out)).unwrap()
    };
    let a = tradeoff("a.csv", "9");
    assert_eq!(a, tradeoff("b.csv", "9"));
    assert_ne!(a, tradeoff("c.csv", "10"));
    assert_eq!(
        std::fs::read(dir.path().join("a.csv.trace")).unwrap(),
        std::fs::read(dir.path().join("b.csv.trace")).unwrap()
    );

    let sim = |seed: &str| {
        stdout(&run(
            dir.path(),
            &[
                "simulate", "--preset", "triangle", "--seed", seed, "--n", "5",
            ],
        ))
    };
    assert_eq!(sim("1"), sim("1"));
    assert_ne!(sim("1"), sim("2"));
}

#[test]
fn simulate_single_row_and_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(
        dir.path(),
        &[
            "simulate", "--preset", "triangle", "--seed", "0", "--n", "1",
        ],
    );
    assert_eq!(o.status.code(), Some(0));
    let (header, body) = rows(&stdout(&o));
    assert_eq!(header, ["Y", "X", "Z"]);
    assert_eq!(body.len(), 1);

    let base = rows(&stdout(&run(
        dir.path(),
        &[
            "simulate", "--preset", "triangle", "--seed", "0", "--n", "3",
        ],
    )))
    .1;
    let o = run(
        dir.path(),
        &[
            "simulate",
            "--preset",
            "triangle",
            "--seed",
            "0",
            "--n",
            "3",
            "--coefficients",
            "Y->X=0",
        ],
    );
    let shifted = rows(&stdout(&o)).1;
    // same noise, so Y is unchanged while X loses its dependence on Y
    for (b, s) in base.iter().zip(&shifted) {
        assert_eq!(b[0], s[0]);
        assert_ne!(b[1], s[1]);
    }
    let o = run(
        dir.path(),
        &[
            "simulate",
            "--preset",
            "triangle",
            "--seed",
            "0",
            "--n",
            "1",
            "--coefficients",
            "Y->Q=1",
        ],
    );
    assert_eq!(o.status.code(), Some(3));
}
