use std::process::{Command, Output};

fn lcent(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lcent")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

#[test]
fn stats_geometric_half() {
    let o = lcent(&["stats", "--family", "geometric", "--params", "0.5"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    let line = |q: &str| text.lines().find(|l| l.starts_with(q)).unwrap_or_default().to_string();
    assert!(line("entropy").contains("1.38629"), "{text}");
    assert!(line("q ").contains("0.500000"), "{text}");

    let o = lcent(&["stats", "--family", "geometric", "--params", "0.5", "--format", "csv"]);
    let csv = stdout(&o);
    let fields: Vec<f64> = csv
        .lines()
        .find(|l| l.starts_with("entropy,"))
        .unwrap()
        .split(',')
        .skip(1)
        .map(|x| x.parse().unwrap())
        .collect();
    let (entropy, err) = (fields[0], fields[1]);
    assert!(err < 1e-12);
    assert!((entropy - 4f64.ln()).abs() <= err, "{entropy} +/- {err}");
}

#[test]
fn convolve_bernoulli_csv() {
    let o = lcent(&["convolve", "--family", "bernoulli", "--params", "0.5", "--n", "2", "--format", "csv"]);
    assert_eq!(o.status.code(), Some(0));
    let rows: Vec<(i64, f64)> = stdout(&o)
        .lines()
        .skip(1)
        .map(|l| {
            let (k, p) = l.split_once(',').unwrap();
            (k.parse().unwrap(), p.parse().unwrap())
        })
        .collect();
    assert_eq!(rows, vec![(0, 0.25), (1, 0.5), (2, 0.25)]);
}

#[test]
fn bad_pmf_file_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    std::fs::write(&path, r#"{"offset": 0, "weights": [0.5, 0.2]}"#).unwrap();
    let o = lcent(&["stats", "--pmf-file", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("error"));

    let o = lcent(&["stats", "--pmf-file", dir.path().join("missing.json").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn unknown_check_exits_2() {
    let o = lcent(&["verify", "--family", "geometric", "--params", "0.5", "--checks", "prop9"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn non_log_concave_pmf_skips_lemma2() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bimodal.json");
    std::fs::write(&path, r#"{"offset": 0, "weights": [0.4, 0.1, 0.1, 0.4]}"#).unwrap();
    let o = lcent(&[
        "verify", "--pmf-file", path.to_str().unwrap(), "--checks", "lemma2", "--n", "2..3", "--format", "csv",
    ]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    let rows: Vec<&str> = text.lines().skip(1).collect();
    assert_eq!(rows.len(), 2, "{text}");
    assert!(rows.iter().all(|r| r.contains("precondition-skip")), "{text}");
}

#[test]
fn families_lists_all() {
    let o = lcent(&["families", "--format", "csv"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o).lines().count(), 9);
}

#[test]
fn smooth_one_uniform_matches_entropy() {
    let o = lcent(&["smooth", "--family", "poisson", "--params", "4.5", "--n", "1", "--format", "json"]);
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    let row = &v[0];
    let gap = row["gap"].as_f64().unwrap();
    let cert = row["certified_error"].as_f64().unwrap();
    assert!(gap <= cert, "gap {gap} cert {cert}");
}
