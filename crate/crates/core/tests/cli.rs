use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn sf2el(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sf2el")).args(args).output().unwrap()
}

fn small_config(dir: &Path) -> String {
    let path = dir.join("cfg.toml");
    fs::write(
        &path,
        "[dataset]\nn = 300\n[schedule]\nt1 = 120\noverlap = 10\nt2 = 80\n[model]\nbuffer = 12\n[run]\nseeds = 2\n",
    )
    .unwrap();
    path.to_str().unwrap().to_owned()
}

fn header(path: &Path) -> String {
    fs::read_to_string(path).unwrap().lines().next().unwrap().to_owned()
}

#[test]
fn run_writes_all_result_files() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let out = dir.path().join("out");
    let res = sf2el(&["run", "--config", &cfg, "--out-dir", out.to_str().unwrap(), "--buffer-trace"]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));

    assert_eq!(header(&out.join("summary.csv")), "method,accuracy_mean,accuracy_std,final_cum_risk");
    let summary = fs::read_to_string(out.join("summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 9);
    for m in ["NOGD", "NOGD_MR", "uROGD", "uROGD_MR", "fROGD", "fROGD_MR", "FESL_Variant", "SF2EL"] {
        let trend = out.join(format!("risk_trend_{m}.csv"));
        assert_eq!(header(&trend), "t,J_t,avg_cum_risk");
        assert_eq!(fs::read_to_string(&trend).unwrap().lines().count(), 81);
    }
    assert_eq!(header(&out.join("weights.csv")), "t,alpha1,alpha2");
    assert!(fs::read_to_string(out.join("weights.csv")).unwrap().contains("\n1,0.5,0.5\n"));
    assert_eq!(
        header(&out.join("bound_check.csv")),
        "t,ens_cum_clipped,min_base_cum_clipped,bound"
    );
    for f in ["buffer_trace_f1.csv", "buffer_trace_f2.csv"] {
        let text = fs::read_to_string(out.join(f)).unwrap();
        assert_eq!(text.lines().next().unwrap(), "round,decision,victim");
        assert!(text.lines().skip(1).all(|l| l.contains(",append,") || l.contains(",replace,") || l.contains(",skip,")));
    }
    // f1 sees every round of both phases
    let f1 = fs::read_to_string(out.join("buffer_trace_f1.csv")).unwrap();
    assert_eq!(f1.lines().count(), 1 + 200);
}

#[test]
fn flags_override_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let out = dir.path().join("out");
    let res = sf2el(&[
        "run", "--config", &cfg, "--out-dir", out.to_str().unwrap(), "--methods", "NOGD,fROGD", "--seed", "5",
        "--p-l", "0.5", "--lambda1", "0.02", "--lambda2", "0.0", "--sigma", "0.4", "--eta", "0.1",
    ]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let summary = fs::read_to_string(out.join("summary.csv")).unwrap();
    let methods: Vec<&str> = summary.lines().skip(1).map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(methods, vec!["NOGD", "fROGD"]);
    // no ensemble, no weight files
    assert!(!out.join("weights.csv").exists());
}

#[test]
fn sweep_writes_one_row_per_size_and_method() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let out = dir.path().join("out");
    let res = sf2el(&[
        "sweep-buffer", "--config", &cfg, "--out-dir", out.to_str().unwrap(), "--methods", "SF2EL,NOGD", "--sizes", "5,10",
    ]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let text = fs::read_to_string(out.join("sweep_buffer.csv")).unwrap();
    assert_eq!(text.lines().next().unwrap(), "buffer,method,accuracy_mean,accuracy_std");
    assert_eq!(text.lines().count(), 5);
}

#[test]
fn gen_stream_trace_columns() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let out = dir.path().join("out");
    let res = sf2el(&["gen-stream", "--config", &cfg, "--out-dir", out.to_str().unwrap()]);
    assert!(res.status.success());
    let text = fs::read_to_string(out.join("stream_trace.csv")).unwrap();
    assert_eq!(text.lines().next().unwrap(), "step,period,labeled,true_label");
    assert_eq!(text.lines().count(), 201);
    assert!(text.lines().nth(111).unwrap().starts_with("111,overlap,"));

    let res = sf2el(&["gen-stream", "--config", &cfg, "--out-dir", out.to_str().unwrap(), "--dump-features"]);
    assert!(res.status.success());
    let text = fs::read_to_string(out.join("stream_trace.csv")).unwrap();
    assert!(text.lines().next().unwrap().len() > "step,period,labeled,true_label".len());
}

#[test]
fn make_swiss_then_run_from_csv() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("swiss.csv");
    let res = sf2el(&["make-swiss", "--n", "300", "--seed", "4", "--out", data.to_str().unwrap()]);
    assert!(res.status.success());
    let text = fs::read_to_string(&data).unwrap();
    assert_eq!(text.lines().next().unwrap(), "x0,x1,label");
    assert_eq!(text.lines().count(), 301);

    let extra = format!(
        "[dataset]\nsource = \"csv\"\npath = {:?}\nhas_header = true\n",
        data.to_str().unwrap()
    );
    let path = dir.path().join("csv.toml");
    fs::write(
        &path,
        format!("{extra}[schedule]\nt1 = 120\nt2 = 80\n[run]\nseeds = 1\nmethods = [\"SF2EL\"]\n"),
    )
    .unwrap();
    let out = dir.path().join("out");
    let res = sf2el(&["run", "--config", path.to_str().unwrap(), "--out-dir", out.to_str().unwrap()]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
}

#[test]
fn exit_code_for_bad_configuration() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    fs::write(&bad, "[model]\nbuffer = 0\n").unwrap();
    assert_eq!(sf2el(&["run", "--config", bad.to_str().unwrap()]).status.code(), Some(2));
    fs::write(&bad, "[model\n").unwrap();
    assert_eq!(sf2el(&["run", "--config", bad.to_str().unwrap()]).status.code(), Some(2));
    assert_eq!(sf2el(&["run", "--methods", "svm"]).status.code(), Some(2));
    assert_eq!(sf2el(&["run", "--p-l", "0"]).status.code(), Some(2));
}

#[test]
fn exit_code_for_bad_input() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope.toml");
    assert_eq!(sf2el(&["run", "--config", missing.to_str().unwrap()]).status.code(), Some(3));

    let data = dir.path().join("three.csv");
    fs::write(&data, "1,2,0\n3,4,1\n5,6,2\n").unwrap();
    let cfg = dir.path().join("c.toml");
    fs::write(&cfg, format!("[dataset]\nsource = \"csv\"\npath = {:?}\n", data.to_str().unwrap())).unwrap();
    let res = sf2el(&["run", "--config", cfg.to_str().unwrap()]);
    assert_eq!(res.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&res.stderr).contains("label"));

    // too few rows for the schedule
    let short = dir.path().join("short.toml");
    fs::write(&short, "[dataset]\nn = 100\n[schedule]\nt1 = 120\nt2 = 80\n").unwrap();
    let res = sf2el(&["gen-stream", "--config", short.to_str().unwrap(), "--out-dir", dir.path().join("o").to_str().unwrap()]);
    assert_eq!(res.status.code(), Some(3), "{}", String::from_utf8_lossy(&res.stderr));
}

#[test]
fn exit_code_for_numerical_failure() {
    // an unregularized mapping fit from fewer overlap pairs than d2 + 1
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    fs::write(
        &cfg,
        "[dataset]\nn = 300\nd2 = 3\nswap_spaces = true\n[schedule]\nt1 = 100\noverlap = 2\nt2 = 50\n[model]\nmapping_ridge = 0.0\n[run]\nseeds = 1\nmethods = [\"uROGD\"]\n",
    )
    .unwrap();
    let res = sf2el(&["run", "--config", cfg.to_str().unwrap(), "--out-dir", dir.path().join("o").to_str().unwrap()]);
    assert_eq!(res.status.code(), Some(4), "{}", String::from_utf8_lossy(&res.stderr));
}
