use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use autoencode::architecture::{build_plain_schedule, TimeGrid};
use autoencode::data_io::{save_checkpoint, Checkpoint, Provenance};
use autoencode::dynamics::{Activation, ControlParams, Network};

fn aode(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_aode"))
        .args(args)
        .env_remove("AODE_THREADS")
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

const SMALL_CLASSIFY: &str = r#"
task = "classify2d"
seed = 3

[architecture]
kind = "autoencoder"
encoder = [[2, 2], [1, 2]]
decoder = [[2, 2]]
activation = "tanh"

[grid]
dt = 0.2
n_steps = 6

[trainer]
lambda = 1e-3
tau = 0.5
n_outer = 5
init = { gaussian = { scale = 0.5, seed = 1 } }

[data]
n = 40
"#;

fn write_config(dir: &Path, name: &str, text: &str) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path
}

fn trained(dir: &Path) -> PathBuf {
    let cfg = write_config(dir, "small.toml", SMALL_CLASSIFY);
    let ck = dir.join("run/model.aode");
    let out = aode(&["train", "--config", p(&cfg), "--out", p(&ck)]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    ck
}

#[test]
fn train_missing_config_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    let out = aode(&["train", "--config", p(&dir.path().join("absent.toml")), "--out", p(&dir.path().join("m"))]);
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).contains("error"));
}

#[test]
fn train_writes_checkpoint_and_history() {
    let dir = tempfile::tempdir().unwrap();
    let ck = trained(dir.path());
    assert!(ck.exists());
    let history = std::fs::read_to_string(dir.path().join("run/history.csv")).unwrap();
    let mut lines = history.lines();
    assert_eq!(lines.next(), Some("iter,cost,data_term,reg_term,fp_iters,step_norm,tau"));
    assert_eq!(lines.count(), 6);
}

#[test]
fn shipped_classification_config_trains() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = Path::new(env!("CARGO_MANIFEST_DIR")).join("configs/classify2d.toml");
    let ck = dir.path().join("model.aode");
    let out = aode(&["train", "--config", p(&cfg), "--out", p(&ck)]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert!(ck.exists() && dir.path().join("history.csv").exists());
    assert!(dir.path().join("hessian.csv").exists());
}

#[test]
fn nonpositive_dt_exits_1_with_message() {
    let dir = tempfile::tempdir().unwrap();
    let text = SMALL_CLASSIFY.replace("dt = 0.2", "dt = -0.2");
    let cfg = write_config(dir.path(), "bad.toml", &text);
    let out = aode(&["train", "--config", p(&cfg), "--out", p(&dir.path().join("m"))]);
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).contains("grid.dt must be positive"), "{}", stderr(&out));
}

#[test]
fn unknown_config_key_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    let text = SMALL_CLASSIFY.replace("[trainer]", "[trainer]\ntua = 0.1");
    let cfg = write_config(dir.path(), "bad.toml", &text);
    let out = aode(&["train", "--config", p(&cfg), "--out", p(&dir.path().join("m"))]);
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).contains("tua"), "{}", stderr(&out));
}

#[test]
fn numerical_failure_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let text = SMALL_CLASSIFY.replace("tau = 0.5", "tau = 0.5\nmax_retries = 0\nblowup_bound = 1e-12");
    let cfg = write_config(dir.path(), "blowup.toml", &text);
    let out = aode(&["train", "--config", p(&cfg), "--out", p(&dir.path().join("m"))]);
    assert_eq!(code(&out), 2, "{}", stderr(&out));
}

#[test]
fn training_is_reproducible_bitwise() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let ka = trained(a.path());
    let kb = trained(b.path());
    let (ba, bb) = (std::fs::read(ka).unwrap(), std::fs::read(kb).unwrap());
    // the stored config differs only in absolute paths, and this config has none
    assert_eq!(ba, bb);
}

#[test]
fn seed_and_split_flags() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "small.toml", SMALL_CLASSIFY);
    let ck = dir.path().join("m.aode");
    let out = aode(&["train", "--config", p(&cfg), "--out", p(&ck), "--seed", "9", "--split", "0.75"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let text = stdout(&out);
    assert!(text.contains("train,30,") && text.contains("test,10,"), "{text}");
    let out = aode(&["eval", p(&ck)]);
    assert_eq!(code(&out), 0);
    let text = stdout(&out);
    assert!(text.contains("train,30,") && text.contains("test,10,"), "{text}");
}

#[test]
fn eval_reports_accuracy() {
    let dir = tempfile::tempdir().unwrap();
    let ck = trained(dir.path());
    let out = aode(&["eval", p(&ck)]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let text = stdout(&out);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("split,n,mse,accuracy"));
    let row: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(row[0], "all");
    let acc: f64 = row[3].parse().unwrap();
    assert!((0.0..=1.0).contains(&acc));
}

#[test]
fn eval_rejects_mismatched_dimension() {
    let dir = tempfile::tempdir().unwrap();
    let ck = trained(dir.path());
    let data = dir.path().join("wide.csv");
    std::fs::write(&data, "x0,x1,x2,y0,y1,y2\n0.1,0.2,0.3,1,0,0\n").unwrap();
    let out = aode(&["eval", p(&ck), "--data", p(&data)]);
    assert_eq!(code(&out), 1);
}

fn plain_checkpoint(dir: &Path, weight: f64) -> PathBuf {
    let grid = TimeGrid::from_steps(0.1, 4).unwrap();
    let net = Network::new(grid, build_plain_schedule(2, &grid).unwrap(), Activation::Tanh).unwrap();
    let mut theta = ControlParams::zeros(net.schedule());
    for node in theta.nodes_mut() {
        node.weight.fill(weight);
    }
    let ck = Checkpoint::new(&net, 1e-3, theta, Provenance::default()).unwrap();
    let path = dir.join(format!("plain_{weight}.aode"));
    save_checkpoint(&path, &ck).unwrap();
    path
}

fn gendata(dir: &Path, kind: &str, n: &str, name: &str) -> (Output, PathBuf) {
    let path = dir.join(name);
    (aode(&["gendata", kind, "--n", n, "--seed", "7", "--out", p(&path)]), path)
}

#[test]
fn zero_controls_on_target_data_have_zero_mse() {
    let dir = tempfile::tempdir().unwrap();
    let ck = plain_checkpoint(dir.path(), 0.0);
    let (out, data) = gendata(dir.path(), "parabola", "50", "p.bin");
    assert_eq!(code(&out), 0);
    let out = aode(&["eval", p(&ck), "--data", p(&data)]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let row = stdout(&out).lines().nth(1).unwrap().to_string();
    let fields: Vec<&str> = row.split(',').collect();
    assert_eq!(fields[2].parse::<f64>().unwrap(), 0.0);
    assert_eq!(fields[3], "");
}

#[test]
fn eval_without_stored_config_needs_data() {
    let dir = tempfile::tempdir().unwrap();
    let ck = plain_checkpoint(dir.path(), 0.0);
    assert_eq!(code(&aode(&["eval", p(&ck)])), 1);
}

#[test]
fn diagnose_gradient_check_on_fresh_model() {
    let dir = tempfile::tempdir().unwrap();
    let ck = trained(dir.path());
    let out_dir = dir.path().join("diag");
    let out = aode(&["diagnose", p(&ck), "--checks", "grad", "--out", p(&out_dir)]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let csv = std::fs::read_to_string(out_dir.join("grad.csv")).unwrap();
    let err: f64 = csv.lines().nth(1).unwrap().split(',').next().unwrap().parse().unwrap();
    assert!(err <= 1e-6, "{err}");
    assert!(out_dir.join("summary.txt").exists());
}

#[test]
fn diagnose_zero_controls_report_infinite_delta() {
    let dir = tempfile::tempdir().unwrap();
    let ck = plain_checkpoint(dir.path(), 0.0);
    let (_, data) = gendata(dir.path(), "classify2d", "20", "c.csv");
    let out_dir = dir.path().join("diag");
    let out = aode(&["diagnose", p(&ck), "--data", p(&data), "--checks", "lip", "--out", p(&out_dir)]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let csv = std::fs::read_to_string(out_dir.join("delta.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("node,delta,flag"));
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 4);
    assert!(rows.iter().all(|r| r.ends_with(",inf,0")), "{csv}");
}

#[test]
fn strict_flags_unstable_steps() {
    let dir = tempfile::tempdir().unwrap();
    let ck = plain_checkpoint(dir.path(), 40.0);
    let (_, data) = gendata(dir.path(), "classify2d", "20", "c.bin");
    let args = |strict: bool| {
        let mut v = vec!["diagnose", p(&ck), "--data", p(&data), "--checks", "lip", "--out", p(dir.path())];
        if strict {
            v.push("--strict");
        }
        v.iter().map(|s| s.to_string()).collect::<Vec<_>>()
    };
    let run = |a: Vec<String>| aode(&a.iter().map(String::as_str).collect::<Vec<_>>());
    assert_eq!(code(&run(args(false))), 0);
    let out = run(args(true));
    assert_eq!(code(&out), 3, "{}", stderr(&out));
    let csv = std::fs::read_to_string(dir.path().join("delta.csv")).unwrap();
    assert!(csv.lines().skip(1).any(|r| r.ends_with(",1")));
}

#[test]
fn failed_gradient_check_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let ck = trained(dir.path());
    let strict = write_config(
        dir.path(),
        "strict.toml",
        &SMALL_CLASSIFY.replace("[data]", "[diagnostics]\ngrad_tol = 1e-300\n\n[data]"),
    );
    let out = aode(&["diagnose", p(&ck), "--checks", "grad", "--config", p(&strict), "--out", p(dir.path())]);
    assert_eq!(code(&out), 3, "{}", stderr(&out));
}

#[test]
fn diagnose_all_checks_write_csvs() {
    let dir = tempfile::tempdir().unwrap();
    let ck = trained(dir.path());
    let out_dir = dir.path().join("all");
    let out = aode(&["diagnose", p(&ck), "--out", p(&out_dir)]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    for (file, header) in [
        ("grad.csv", "max_rel_err,tol,coords,samples"),
        ("delta.csv", "node,delta,flag"),
        ("hessian.csv", "iter,lambda_min,lambda_max"),
        ("entropy.csv", "node,H,E_cluster"),
        ("w1.csv", "label,N,value"),
        ("latent.csv", "node,latent_width,modal_support_size,consistency,union_support_size,mean_support_size,modal_support"),
    ] {
        let text = std::fs::read_to_string(out_dir.join(file)).unwrap();
        assert_eq!(text.lines().next(), Some(header), "{file}");
    }
    let entropy = std::fs::read_to_string(out_dir.join("entropy.csv")).unwrap();
    assert_eq!(entropy.lines().count(), 1 + 7);
    assert!(stdout(&out).contains("gradient check"));
}

#[test]
fn corrupted_checkpoint_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    let ck = trained(dir.path());
    let mut bytes = std::fs::read(&ck).unwrap();
    let mid = bytes.len() / 2;
    bytes[mid] ^= 0xff;
    std::fs::write(&ck, bytes).unwrap();
    let out = aode(&["diagnose", p(&ck), "--out", p(dir.path())]);
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).contains("checksum"), "{}", stderr(&out));
    assert_eq!(code(&aode(&["eval", p(&ck)])), 1);
}

#[test]
fn gendata_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let (o1, a) = gendata(dir.path(), "parabola", "100", "a.bin");
    let (o2, b) = gendata(dir.path(), "parabola", "100", "b.bin");
    assert_eq!((code(&o1), code(&o2)), (0, 0));
    assert_eq!(std::fs::read(a).unwrap(), std::fs::read(b).unwrap());
    let (o3, c) = gendata(dir.path(), "parabola", "100", "c.csv");
    assert_eq!(code(&o3), 0);
    assert!(std::fs::read_to_string(c).unwrap().starts_with("x0,x1,y0,y1"));
}

#[test]
fn gendata_rejects_bad_requests() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&gendata(dir.path(), "spiral", "10", "x.bin").0), 1);
    assert_eq!(code(&gendata(dir.path(), "parabola", "0", "x.bin").0), 1);
    assert_eq!(code(&gendata(dir.path(), "mnist", "10", "x.bin").0), 1);
    assert_eq!(code(&aode(&["gendata", "parabola", "--n", "ten", "--out", "x"])), 1);
}

#[test]
fn thread_caps() {
    let dir = tempfile::tempdir().unwrap();
    let (out, _) = (
        aode(&["--threads", "2", "gendata", "parabola", "--n", "5", "--out", p(&dir.path().join("t.bin"))]),
        (),
    );
    assert_eq!(code(&out), 0);
    assert_eq!(code(&aode(&["--threads", "0", "gendata", "parabola", "--n", "5", "--out", "x"])), 1);
    let out = Command::new(env!("CARGO_BIN_EXE_aode"))
        .args(["gendata", "parabola", "--n", "5", "--out", p(&dir.path().join("e.bin"))])
        .env("AODE_THREADS", "1")
        .output()
        .unwrap();
    assert_eq!(code(&out), 0);
}

#[test]
fn help_and_usage() {
    assert_eq!(code(&aode(&["--help"])), 0);
    assert_eq!(code(&aode(&[])), 1);
    assert_eq!(code(&aode(&["frobnicate"])), 1);
}
