use std::io::Write;
use std::process::{Command, Output, Stdio};

fn fdp(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fdp")).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn error_json(o: &Output) -> serde_json::Value {
    serde_json::from_slice(&o.stderr).unwrap()
}

#[test]
fn topk_simulated_envelope() {
    let o = fdp(&["topk", "--m", "50", "--seed", "3", "--methods", "simes,wellner-adapt,kr-interp"]);
    assert!(o.status.success());
    let text = stdout(&o);
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "k,index,pvalue,simes,wellner-adapt,kr-interp");
    assert_eq!(lines.count(), 50);
}

#[test]
fn real_data_from_file() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("p.csv");
    std::fs::write(&input, "index,pvalue\n0,0.001\n1,0.002\n2,0.04\n3,0.7\n").unwrap();
    let out = dir.path().join("r.csv");
    let o = fdp(&["real-data", "--input", input.to_str().unwrap(), "--alpha", "0.1", "--methods", "simes,kr", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(out).unwrap();
    assert!(text.starts_with("alpha,method,k_hat,bound\n0.1,simes,3,0.4\n"), "{text}");
}

#[test]
fn bad_pvalue_gives_json_error() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("p.csv");
    std::fs::write(&input, "index,pvalue\n0,0.5\n1,1.2\n").unwrap();
    let o = fdp(&["real-data", "--input", input.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    let e = error_json(&o);
    assert_eq!(e["error"], "parse");
    assert!(e["message"].as_str().unwrap().contains("line 3"));
}

#[test]
fn online_reads_stdin() {
    let mut child = Command::new(env!("CARGO_BIN_EXE_fdp"))
        .args(["online", "--alpha", "0.1"])
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .spawn()
        .unwrap();
    child.stdin.take().unwrap().write_all(b"0.0001\n0.9\n0.00001\n").unwrap();
    let o = child.wait_with_output().unwrap();
    assert!(o.status.success());
    let text = stdout(&o);
    assert_eq!(text.lines().next().unwrap(), "k,alpha_k,rejected,R_k,bound_freed,bound_kr,bound_kru");
    assert_eq!(text.lines().count(), 4);
}

#[test]
fn preordered_simulated() {
    let o = fdp(&["preordered", "--m", "40", "--seed", "1"]);
    assert!(o.status.success());
    assert!(stdout(&o).starts_with("k,pvalue,A_k,N_k,freedman,kr,kru\n"));
}

#[test]
fn coverage_passes_and_is_deterministic() {
    let args = ["coverage", "--m", "100", "--reps", "200", "--methods", "simes,kr,wellner-interp", "--seed", "4"];
    let a = fdp(&args);
    assert!(a.status.success(), "{}", String::from_utf8_lossy(&a.stderr));
    assert_eq!(stdout(&a), stdout(&fdp(&args)));
    assert_eq!(stdout(&a).lines().count(), 4);
}

#[test]
fn method_not_in_setting_is_a_config_error() {
    let o = fdp(&["coverage", "--m", "100", "--reps", "10", "--methods", "kru"]);
    assert_eq!(o.status.code(), Some(1));
    assert_eq!(error_json(&o)["error"], "config");
}

#[test]
fn consistency_needs_three_m() {
    let o = fdp(&["consistency", "--m", "100,200", "--reps", "5", "--methods", "simes"]);
    assert_eq!(o.status.code(), Some(1));
    assert_eq!(error_json(&o)["error"], "insufficient_grid");
    let o = fdp(&["consistency", "--m", "100,200,400", "--reps", "5", "--methods", "simes"]);
    assert!(o.status.success());
    assert!(stdout(&o).starts_with("method,alpha,m,gap,slope\n"));
}

#[test]
fn config_file_is_honoured() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("exp.toml");
    std::fs::write(
        &cfg,
        r#"
setting = "online"
m_grid = [300]
alpha_grid = [0.1, 0.2]
replications = 20
methods = ["freedman", "kru-interp"]
seed = 11
[model]
kind = "mixture"
pi1 = 0.3
mu = 3.0
"#,
    )
    .unwrap();
    let o = fdp(&["coverage", "--config", cfg.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(stdout(&o).lines().count(), 5);
}
