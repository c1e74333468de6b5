use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn hc(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hyperclust")).args(args).current_dir(dir).env_remove("HYPERCLUST_THREADS").output().unwrap()
}

fn ok(out: &Output) -> String {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn err_line(out: &Output) -> String {
    let e = String::from_utf8_lossy(&out.stderr).to_string();
    assert_eq!(e.trim_end().lines().count(), 1, "{e}");
    e
}

fn report_value(report: &str, key: &str) -> f64 {
    report.lines().find_map(|l| l.strip_prefix(&format!("{key}: "))).unwrap().parse().unwrap()
}

#[test]
fn simulate_fit_evaluate_recovers_the_clusters() {
    let t = tempfile::tempdir().unwrap();
    let d = t.path();
    ok(&hc(&["simulate", "--design", "1", "--seed", "7", "--data", "d.csv", "--labels", "t.csv"], d));
    ok(&hc(&["fit", "-i", "d.csv", "-g", "2", "--structure", "VVV", "--seed", "7", "--starts", "2", "-o", "out", "--truth", "t.csv"], d));
    let report = fs::read_to_string(d.join("out/report.txt")).unwrap();
    assert!(report_value(&report, "ari") >= 0.85, "{report}");
    let eval = ok(&hc(&["evaluate", "--truth", "t.csv", "--predicted", "out/labels.csv"], d));
    assert_eq!(report_value(&eval, "ari"), report_value(&report, "ari"));
    let labels = fs::read_to_string(d.join("out/labels.csv")).unwrap();
    assert!(labels.starts_with("label\n") && labels.lines().skip(1).all(|l| l == "1" || l == "2"));
}

#[test]
fn evaluate_identical_labels_is_one() {
    let t = tempfile::tempdir().unwrap();
    fs::write(t.path().join("a.csv"), "label\n1\n1\n2\n3\n").unwrap();
    let out = ok(&hc(&["evaluate", "--truth", "a.csv", "--predicted", "a.csv", "-o", "ari.txt"], t.path()));
    assert_eq!(out, "ari: 1\n");
    assert_eq!(fs::read_to_string(t.path().join("ari.txt")).unwrap(), out);
}

#[test]
fn bad_structure_is_a_usage_error() {
    let t = tempfile::tempdir().unwrap();
    let out = hc(&["fit", "-i", "x.csv", "-g", "2", "--structure", "XYZ", "-o", "o"], t.path());
    assert_eq!(code(&out), 1);
    let e = err_line(&out);
    assert!(e.starts_with("hyperclust: error[usage]:") && e.contains("EII") && e.contains("VVV"), "{e}");
    assert_eq!(code(&hc(&["fit", "-i", "x.csv"], t.path())), 1);
    assert_eq!(code(&hc(&["frobnicate"], t.path())), 1);
    assert_eq!(code(&hc(&["simulate", "--design", "1", "--rate", "1.5", "--data", "a", "--labels", "b"], t.path())), 1);
    assert_eq!(code(&hc(&["simulate", "--design", "9", "--data", "a", "--labels", "b"], t.path())), 1);
    assert!(hc(&["--help"], t.path()).status.success());
}

#[test]
fn data_problems_exit_with_two() {
    let t = tempfile::tempdir().unwrap();
    let d = t.path();
    fs::write(d.join("text.csv"), "a,b\n1,2\n3,x\n").unwrap();
    let out = hc(&["fit", "-i", "text.csv", "-g", "1", "-o", "o"], d);
    assert_eq!(code(&out), 2);
    assert!(err_line(&out).contains("line 3, column 'b'"));
    fs::write(d.join("empty_row.csv"), "a,b\n1,2\nNA,?\n").unwrap();
    let out = hc(&["fit", "-i", "empty_row.csv", "-g", "1", "-o", "o"], d);
    assert_eq!(code(&out), 2);
    assert!(err_line(&out).contains("error[data]"));
    let out = hc(&["fit", "-i", "missing.csv", "-g", "1", "-o", "o"], d);
    assert_eq!(code(&out), 2);
    assert!(!d.join("o").exists());
}

#[test]
fn degenerate_fit_exits_with_three() {
    let t = tempfile::tempdir().unwrap();
    fs::write(t.path().join("tiny.csv"), "a,b\n0,0\n1,1\n5,5\n").unwrap();
    let out = hc(&["fit", "-i", "tiny.csv", "-g", "2", "-o", "o"], t.path());
    assert_eq!(code(&out), 3);
    assert!(err_line(&out).starts_with("hyperclust: error[numerical]:"));
}

#[test]
fn na_tokens_and_scaling() {
    let t = tempfile::tempdir().unwrap();
    let d = t.path();
    let mut csv = String::from("a,b,c\n");
    for i in 0..40 {
        let x = i as f64 * 0.37 % 5.0;
        let b = if i % 7 == 0 { "?".to_string() } else { format!("{}", 100.0 + 3.0 * x + (i % 3) as f64) };
        let c = if i % 11 == 0 { "".to_string() } else { format!("{}", -x * 0.01 + 0.002 * (i % 5) as f64) };
        csv.push_str(&format!("{x},{b},{c}\n"));
    }
    fs::write(d.join("in.csv"), &csv).unwrap();
    let rep = ok(&hc(&["fit", "-i", "in.csv", "-g", "1", "--family", "mst", "--scale", "--starts", "1", "-o", "out"], d));
    assert!(rep.contains("scaled: true") && rep.contains("missing_cells: 10"), "{rep}");
    let model = fs::read_to_string(d.join("out/model.txt")).unwrap();
    assert!(model.starts_with("hyperclust-model v1\n") && model.contains("[scaling]"));
    // observed cells come back verbatim, imputed ones in original units
    let imputed = fs::read_to_string(d.join("out/imputed.csv")).unwrap();
    for (line_in, line_out) in csv.lines().zip(imputed.lines()).skip(1) {
        for (a, b) in line_in.split(',').zip(line_out.split(',')) {
            if a == "?" {
                let v: f64 = b.parse().unwrap();
                assert!((90.0..130.0).contains(&v), "{v}");
            } else if !a.is_empty() {
                assert_eq!(a.parse::<f64>().unwrap(), b.parse::<f64>().unwrap());
            }
        }
    }
    // restricting the NA tokens turns '?' into a parse error
    assert_eq!(code(&hc(&["fit", "-i", "in.csv", "-g", "1", "--na", "NA", "-o", "o2"], d)), 2);
}

#[test]
fn saved_model_reproduces_fit_outputs() {
    let t = tempfile::tempdir().unwrap();
    let d = t.path();
    ok(&hc(&["simulate", "--design", "3", "--seed", "2", "--rate", "0.15", "--mechanism", "mar1", "--data", "d.csv", "--labels", "t.csv"], d));
    ok(&hc(&["fit", "-i", "d.csv", "-g", "2", "--family", "mst", "--structure", "VEI", "--starts", "1", "-o", "out"], d));
    ok(&hc(&["impute", "-i", "d.csv", "-m", "out/model.txt", "-o", "imp.csv", "--labels", "lab.csv"], d));
    ok(&hc(&["impute", "-i", "d.csv", "-m", "out/model.txt", "-o", "imp2.csv"], d));
    let read = |p: &str| fs::read(d.join(p)).unwrap();
    assert_eq!(read("imp.csv"), read("out/imputed.csv"));
    assert_eq!(read("lab.csv"), read("out/labels.csv"));
    assert_eq!(read("imp.csv"), read("imp2.csv"));
    let data = fs::read_to_string(d.join("d.csv")).unwrap();
    assert_eq!(data.matches("NA").count(), 60);
    assert!(!fs::read_to_string(d.join("imp.csv")).unwrap().contains("NA"));
    fs::write(d.join("broken.txt"), "hyperclust-model v0\n").unwrap();
    assert_eq!(code(&hc(&["impute", "-i", "d.csv", "-m", "broken.txt", "-o", "x.csv"], d)), 2);
}

#[test]
fn pipeline_is_deterministic() {
    let run = |dir: &Path| {
        ok(&hc(&["simulate", "--design", "5", "--seed", "3", "--rate", "0.05", "--data", "d.csv", "--labels", "t.csv"], dir));
        ok(&hc(&["fit", "-i", "d.csv", "-g", "2", "--family", "mst", "--seed", "3", "--starts", "2", "-o", "out", "--truth", "t.csv"], dir));
        ok(&hc(&["evaluate", "--truth", "t.csv", "--predicted", "out/labels.csv", "-o", "ari.txt"], dir));
        ["d.csv", "t.csv", "out/report.txt", "out/model.txt", "out/labels.csv", "out/imputed.csv", "ari.txt"].map(|f| fs::read(dir.join(f)).unwrap())
    };
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    assert_eq!(run(a.path()), run(b.path()));
}

#[test]
fn search_and_study_write_tables() {
    let t = tempfile::tempdir().unwrap();
    let d = t.path();
    ok(&hc(&["simulate", "--design", "3", "--seed", "4", "--per-component", "60", "--data", "d.csv", "--labels", "t.csv"], d));
    let out = ok(&hc(&["search", "-i", "d.csv", "-g", "1,2", "--families", "mst", "--structures", "VEI,EII", "--starts", "1", "-o", "grid.csv"], d));
    assert!(out.contains("best_bic: MST"), "{out}");
    let grid = fs::read_to_string(d.join("grid.csv")).unwrap();
    assert_eq!(grid.lines().count(), 5);
    assert!(grid.starts_with("family,structure,G,loglik,rho,bic,icl,converged,status\n"));

    ok(&hc(
        &[
            "study", "--design", "3", "--replications", "2", "--rates", "0.1", "--mechanisms", "mcar", "--families", "mst",
            "-g", "2", "--per-component", "60", "--starts", "1", "--seed", "5", "-o", "study",
        ],
        d,
    ));
    let summary = fs::read_to_string(d.join("study/summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 2, "{summary}");
    assert!(summary.lines().nth(1).unwrap().starts_with("Sim3,MST,MCAR,0.1,2,"));
    let params = fs::read_to_string(d.join("study/parameters.csv")).unwrap();
    assert!(params.contains(",nu_1,7,") && params.contains(",mu+beta_1[1],"), "{params}");
}

#[test]
fn thread_override_is_validated() {
    let t = tempfile::tempdir().unwrap();
    fs::write(t.path().join("a.csv"), "label\n1\n2\n").unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_hyperclust"))
        .args(["evaluate", "--truth", "a.csv", "--predicted", "a.csv"])
        .current_dir(t.path())
        .env("HYPERCLUST_THREADS", "0")
        .output()
        .unwrap();
    assert_eq!(code(&out), 1);
    let out = Command::new(env!("CARGO_BIN_EXE_hyperclust"))
        .args(["--threads", "2", "evaluate", "--truth", "a.csv", "--predicted", "a.csv"])
        .current_dir(t.path())
        .output()
        .unwrap();
    assert!(out.status.success());
}
