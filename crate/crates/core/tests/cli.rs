use std::fs;
use std::path::Path;

use crs::cli::main_with_args;
use crs::rate::RateTable;
use crs::schedule::NoiseSchedule;

fn run(args: &[&str]) -> i32 {
    main_with_args(std::iter::once("crs").chain(args.iter().copied()))
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

/// Data rows of a report CSV as (column name -> value) maps.
fn report_rows(path: &Path) -> Vec<std::collections::HashMap<String, String>> {
    let text = fs::read_to_string(path).unwrap();
    let body: String = text.lines().filter(|l| !l.starts_with('#')).map(|l| format!("{l}\n")).collect();
    let mut r = csv::Reader::from_reader(body.as_bytes());
    let headers = r.headers().unwrap().clone();
    r.records()
        .map(|rec| headers.iter().map(String::from).zip(rec.unwrap().iter().map(String::from)).collect())
        .collect()
}

#[test]
fn rate_then_schedule() {
    let dir = tempfile::tempdir().unwrap();
    let rate = dir.path().join("vx.csv");
    assert_eq!(run(&["compute-rate", "--dataset", "toy3", "--metric", "v_x", "--out", p(&rate)]), 0);
    let table = RateTable::load(&rate).unwrap();
    assert_eq!(table.len(), 1001);
    let side: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("vx.meta.json")).unwrap()).unwrap();
    assert_eq!(side["std_errors"].as_array().unwrap().len(), 1001);
    assert_eq!(side["metric"], "v_x");

    let sched = dir.path().join("sched.csv");
    assert_eq!(run(&["solve-schedule", "--rate", p(&rate), "--xi", "1.2", "--out", p(&sched)]), 0);
    let s = NoiseSchedule::load(&sched).unwrap();
    assert_eq!(s.alpha(0.0), 1.0);
    assert!((s.alpha(1.0) - 0.01).abs() < 1e-12);

    // the same table twice with equal weights combines to itself
    let twice = dir.path().join("twice.csv");
    assert_eq!(run(&["solve-schedule", "--rate", p(&rate), "--rate", p(&rate), "--out", p(&twice)]), 0);
    let once = dir.path().join("once.csv");
    assert_eq!(run(&["solve-schedule", "--rate", p(&rate), "--out", p(&once)]), 0);
    let d = NoiseSchedule::load(&twice).unwrap().sup_distance(&NoiseSchedule::load(&once).unwrap());
    assert!(d < 1e-9, "{d}");
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("x.csv");
    assert_eq!(run(&["compute-rate", "--metric", "v_q", "--out", p(&out)]), 2);
    assert_eq!(run(&["compute-rate", "--steps", "0", "--out", p(&out)]), 2);
    assert_eq!(run(&["compute-rate", "--dataset", "no-such-set", "--out", p(&out)]), 2);
    assert_eq!(run(&["no-such-command"]), 2);
    assert_eq!(run(&["--help"]), 0);

    let rate = dir.path().join("r.csv");
    assert_eq!(run(&["compute-rate", "--steps", "50", "--samples", "200", "--out", p(&rate)]), 0);
    assert_eq!(run(&["solve-schedule", "--rate", p(&rate), "--rate", p(&rate), "--weight=-0.5", "--weight=1.5", "--out", p(&out)]), 2);
    assert_eq!(run(&["solve-schedule", "--rate", p(&rate), "--weight", "0.7", "--out", p(&out)]), 2);
    assert_eq!(run(&["solve-schedule", "--rate", p(&rate), "--rate", p(&rate), "--weight", "0.2", "--weight", "0.2", "--out", p(&out)]), 2);
    assert_eq!(run(&["solve-schedule", "--rate", p(&rate), "--weight", "0.5", "--weight", "0.5", "--out", p(&out)]), 2);
    assert_eq!(run(&["sample", "--sampler", "euler", "--out", p(&out)]), 2);
    assert_eq!(run(&["sample", "--nfe", "0", "--out", p(&out)]), 2);

    let missing = dir.path().join("absent.csv");
    assert_eq!(run(&["solve-schedule", "--rate", p(&missing), "--out", p(&out)]), 1);
    let cfg = dir.path().join("cfg.json");
    fs::write(&cfg, r#"{"dataset": "two-point", "typo_field": 1}"#).unwrap();
    assert_eq!(run(&["evaluate", "--config", p(&cfg), "--output-dir", p(dir.path())]), 2);
}

#[test]
fn sampling_is_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    let args = |out: &Path| {
        run(&[
            "sample", "--dataset", "toy3", "--schedule", "crs", "--sampler", "dpmpp2m", "--nfe", "8",
            "--n-samples", "500", "--seed", "3", "--out", p(out),
        ])
    };
    assert_eq!(args(&a), 0);
    assert_eq!(args(&b), 0);
    let text = fs::read(&a).unwrap();
    assert_eq!(text, fs::read(&b).unwrap());
    assert_eq!(String::from_utf8(text).unwrap().lines().count(), 501);
}

#[test]
fn evaluation_improves_with_nfe_and_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let (d1, d2) = (dir.path().join("one"), dir.path().join("two"));
    for d in [&d1, &d2] {
        let code = run(&[
            "evaluate", "--dataset", "two-point", "--schedule", "uniform", "--schedule", "uniform",
            "--sampler", "ddim:0", "--nfe", "5,10,100", "--n-samples", "10000", "--output-dir", p(d),
        ]);
        assert_eq!(code, 0);
    }
    let text = fs::read_to_string(d1.join("evaluate.csv")).unwrap();
    assert_eq!(text, fs::read_to_string(d2.join("evaluate.csv")).unwrap());
    assert!(text.lines().next().unwrap().contains(" config "));

    let rows = report_rows(&d1.join("evaluate.csv"));
    assert_eq!(rows.len(), 6);
    let dist = |r: &std::collections::HashMap<String, String>| r["distance"].parse::<f64>().unwrap();
    // a schedule listed twice is scored on identical samples
    for k in 0..3 {
        assert_eq!(rows[k]["distance"], rows[k + 3]["distance"]);
    }
    for k in 0..2 {
        assert!(dist(&rows[k + 1]) < dist(&rows[k]), "{} then {}", dist(&rows[k]), dist(&rows[k + 1]));
    }
}

#[test]
fn sweep_ranks_each_cell_once() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("sweep.json");
    fs::write(
        &cfg,
        r#"{
            "dataset": "two-point",
            "metrics": [{"metric": "v_x"}, {"metric": "v_eps"}],
            "samplers": ["ddim:0"],
            "nfe": [5],
            "n_samples": 2000,
            "rate": {"steps": 200, "samples": 2000, "alpha_start": 1.0, "alpha_end": 0.0001},
            "bootstrap": 50,
            "sweep": {"weights": [0.3, 0.7], "xis": [1.0, 1.2]}
        }"#,
    )
    .unwrap();
    assert_eq!(run(&["sweep", "--config", p(&cfg), "--output-dir", p(dir.path())]), 0);
    let rows = report_rows(&dir.path().join("sweep.csv"));
    // two weights, then four exponent pairs minus the one already scored
    assert_eq!(rows.len(), 5);
    let mut ranks: Vec<usize> = rows.iter().map(|r| r["rank"].parse().unwrap()).collect();
    ranks.sort();
    assert_eq!(ranks, vec![1, 2, 3, 4, 5]);
}

#[test]
fn toy_figure_rows_are_densities() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run(&["toy-figure", "--alpha-points", "50", "--output-dir", p(dir.path())]), 0);
    let text = fs::read_to_string(dir.path().join("density.csv")).unwrap();
    let mut lines = text.lines();
    let xs: Vec<f64> = lines.next().unwrap().split(',').skip(1).map(|v| v.parse().unwrap()).collect();
    assert_eq!(xs.len(), 2048);
    let first: Vec<f64> = lines.next().unwrap().split(',').map(|v| v.parse().unwrap()).collect();
    assert_eq!(first[0], 0.0);
    let ys = &first[1..];
    let integral: f64 = xs.windows(2).zip(ys.windows(2)).map(|(x, y)| 0.5 * (x[1] - x[0]) * (y[0] + y[1])).sum();
    assert!((integral - 1.0).abs() <= 1e-3, "{integral}");

    let modes = fs::read_to_string(dir.path().join("modes.csv")).unwrap();
    let counts: Vec<usize> = modes.lines().skip(1).map(|l| l.split(',').nth(1).unwrap().parse().unwrap()).collect();
    assert_eq!(counts.len(), 50);
    assert_eq!((counts[0], counts[49]), (1, 3));
}
