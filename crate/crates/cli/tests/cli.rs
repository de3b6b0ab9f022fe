use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_collapse"));
    c.env_remove("COLLAPSE_OUT_DIR");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

const BERNOULLI_SIM: [&str; 13] = [
    "simulate",
    "--family",
    "bernoulli",
    "--p0",
    "0.1",
    "--n",
    "10",
    "--ks",
    "1,5,10",
    "--trials",
    "2000",
    "--seed",
    "7",
];

#[test]
fn simulate_matches_golden_file() {
    let o = run(&BERNOULLI_SIM);
    assert!(o.status.success());
    assert_eq!(stdout(&o), std::fs::read_to_string(fixture("bernoulli_summary.csv")).unwrap());
    let digest = String::from_utf8(o.stderr).unwrap();
    assert!(digest.contains("family=bernoulli") && digest.contains("trials=2000") && digest.contains("wall="));
}

#[test]
fn simulate_is_identical_across_runs_and_workers() {
    let dir = tempfile::tempdir().unwrap();
    let mut outputs = Vec::new();
    for workers in ["1", "2", "1"] {
        let path = dir.path().join(format!("s{}.json", outputs.len()));
        let mut args: Vec<&str> = BERNOULLI_SIM.to_vec();
        let p = path.to_str().unwrap();
        args.extend(["--workers", workers, "--format", "json", "--out", p]);
        assert!(run(&args).status.success());
        outputs.push(std::fs::read(&path).unwrap());
    }
    assert_eq!(outputs[0], outputs[1]);
    assert_eq!(outputs[0], outputs[2]);
}

#[test]
fn single_trial_runs() {
    let o = run(&["simulate", "--family", "poisson", "--lambda0", "1", "--n", "5", "--K", "3", "--trials", "1"]);
    assert!(o.status.success());
    assert_eq!(stdout(&o).lines().filter(|l| !l.starts_with('#')).count(), 4);
}

#[test]
fn poisson_bounds_match_golden_file_and_closed_form() {
    let o = run(&["bounds", "--family", "poisson", "--lambda0", "0.5", "--n", "10", "--ks", "1,2,5,10,50"]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert_eq!(text, std::fs::read_to_string(fixture("poisson_bounds.csv")).unwrap());

    let mut g = vec![1.0f64];
    for _ in 1..50 {
        let last = *g.last().unwrap();
        g.push(1.0 - (-last).exp());
    }
    let mut seen = 0;
    for line in text.lines().filter(|l| !l.starts_with('#')).skip(1) {
        let cols: Vec<&str> = line.split(',').collect();
        if cols[2] != "poisson_survival_exact" {
            continue;
        }
        let k: usize = cols[0].parse().unwrap();
        let v: f64 = cols[1].parse().unwrap();
        let want = 1.0 - (-10.0 * 0.5 * g[k - 1]).exp();
        assert!((v - want).abs() <= 1e-14 * want, "k={k}: {v} vs {want}");
        seen += 1;
    }
    assert_eq!(seen, 5);
}

#[test]
fn bounds_header_is_stable() {
    let o = run(&["bounds", "--family", "bernoulli", "--p0", "0.2", "--n", "10", "--K", "4"]);
    let text = stdout(&o);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("# schema: collapse-bounds/v1"));
    assert!(lines.next().unwrap().starts_with("# meta: "));
    assert_eq!(lines.next(), Some("k,value,source,clamped"));
    assert!(text.contains("\"sandwich_holds\":true"));
}

#[test]
fn absorbed_bernoulli_start_gives_zero_curves() {
    let o = run(&["bounds", "--family", "bernoulli", "--p0", "0", "--n", "10", "--K", "5"]);
    assert!(o.status.success());
    let rows: Vec<String> = stdout(&o).lines().filter(|l| !l.starts_with('#')).skip(1).map(String::from).collect();
    assert!(!rows.is_empty());
    for r in rows {
        assert_eq!(r.split(',').nth(1), Some("0"), "{r}");
    }
}

#[test]
fn verify_passes_on_matching_fixture() {
    let o = run(&[
        "verify",
        fixture("bernoulli_summary.csv").to_str().unwrap(),
        fixture("bernoulli_bounds.csv").to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("0 failed"));
}

#[test]
fn verify_fails_on_negative_control() {
    let o = run(&[
        "verify",
        fixture("negative_summary.csv").to_str().unwrap(),
        fixture("bernoulli_bounds.csv").to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stdout(&o).contains("FAIL"));
}

#[test]
fn verify_empty_inputs_pass_with_empty_report() {
    let dir = tempfile::tempdir().unwrap();
    let (s, c) = (dir.path().join("s.csv"), dir.path().join("c.csv"));
    std::fs::write(&s, "").unwrap();
    std::fs::write(&c, "").unwrap();
    let o = run(&["verify", s.to_str().unwrap(), c.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("0 checks"));
}

#[test]
fn usage_errors_exit_with_one_and_name_the_field() {
    let o = run(&["simulate", "--family", "bernoulli", "--n", "10"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8(o.stderr).unwrap().contains("--p0"));

    let o = run(&["simulate", "--family", "bernoulli", "--p0", "1.5", "--n", "10"]);
    assert_eq!(o.status.code(), Some(1));

    let o = run(&["simulate", "--family", "gaussian", "--sigma0", "1", "--n", "10", "--eps", "0.1", "--format", "xml"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8(o.stderr).unwrap().contains("--format"));

    assert_eq!(run(&["simulate", "--bogus"]).status.code(), Some(1));
    assert_eq!(run(&["figure", "fig99"]).status.code(), Some(1));
    assert_eq!(run(&["--help"]).status.code(), Some(0));
}

#[test]
fn config_file_values_yield_to_flags() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.conf");
    std::fs::write(
        &cfg,
        "# bernoulli run\nfamily = bernoulli\np0 = 0.5\nn = 10\nks = 1,5,10\ntrials = 2000\nseed = 7\n",
    )
    .unwrap();
    let o = run(&["simulate", "--config", cfg.to_str().unwrap(), "--p0", "0.1"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(stdout(&o), std::fs::read_to_string(fixture("bernoulli_summary.csv")).unwrap());
}

#[test]
fn output_directory_comes_from_the_environment() {
    let dir = tempfile::tempdir().unwrap();
    let o = bin()
        .env("COLLAPSE_OUT_DIR", dir.path())
        .args(["bounds", "--family", "poisson", "--lambda0", "1", "--n", "4", "--K", "3", "--format", "json"])
        .output()
        .unwrap();
    assert!(o.status.success());
    assert!(o.stdout.is_empty());
    let text = std::fs::read_to_string(dir.path().join("bounds.json")).unwrap();
    assert!(text.contains("collapse-bounds/v1"));
}

#[test]
fn fig3_preset_output_passes_verification() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["figure", "fig3", "--trials", "20000", "--seed", "3", "--out", dir.path().to_str().unwrap()]);
    assert!(o.status.success());
    let mut pairs = 0;
    for entry in std::fs::read_dir(dir.path()).unwrap() {
        let path = entry.unwrap().path();
        let name = path.file_name().unwrap().to_str().unwrap().to_string();
        let Some(stem) = name.strip_suffix(".summary.csv") else { continue };
        let curves = dir.path().join(format!("{stem}.bounds.csv"));
        let v = run(&["verify", path.to_str().unwrap(), curves.to_str().unwrap()]);
        assert_eq!(v.status.code(), Some(0), "{stem}: {}", stdout(&v));
        pairs += 1;
    }
    assert_eq!(pairs, 12);
}

#[test]
fn fig7_preset_records_its_constants() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["figure", "fig7", "--trials", "50", "--K", "20", "--out", dir.path().to_str().unwrap()]);
    assert!(o.status.success());
    let s = std::fs::read_to_string(dir.path().join("fig7_approx.summary.csv")).unwrap();
    assert!(s.contains("\"eps\":0.1"));
    assert!(s.contains("\"initial\":{\"family\":\"gmm\",\"mu\":1.0,\"sigma2\":1.0},\"n\":10"));
    assert!(s.contains("\"trials\":50"));
}

#[test]
fn ngram_and_compare_and_trajectory_write_their_formats() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = dir.path().join("c.txt");
    std::fs::write(&corpus, "a b a c a b d e a a b c").unwrap();
    let o = run(&["ngram", "--corpus", corpus.to_str().unwrap(), "--order", "2", "--K", "5", "--seed", "1"]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(text.starts_with("# schema: collapse-ngram/v1"));
    assert_eq!(text.lines().filter(|l| !l.starts_with('#')).count(), 7);

    let o = run(&["gmm-compare", "--mu0", "1", "--sigma0", "1", "--n", "16", "--trials", "5", "--format", "json"]);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["rows"].as_array().unwrap().len(), 5);

    let o = run(&["trajectory", "--family", "bernoulli", "--p0", "0.5", "--n", "4", "--K", "3", "--seed", "2"]);
    assert!(o.status.success());
    let lines: Vec<serde_json::Value> = stdout(&o).lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(lines.len(), 4);
    assert_eq!(lines[0]["p"], 0.5);
}
