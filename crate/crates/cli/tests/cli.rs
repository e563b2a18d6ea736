use std::path::PathBuf;
use std::process::Command;

fn phl() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_phl"));
    c.env_remove("PHL_THREADS");
    c
}

fn configs() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("phl-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir.join(name)
}

#[test]
fn theory_reports_example1_rho() {
    let out = phl().args(["theory", "--horizon", "5", "--config"]).arg(configs().join("example1.json")).output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let rho: f64 = text
        .lines()
        .find(|l| l.starts_with("rho "))
        .and_then(|l| l.split_whitespace().nth(1))
        .unwrap()
        .parse()
        .unwrap();
    assert!((rho - 0.99).abs() < 0.005, "{text}");
    assert!(text.contains("rho_a             0.900000"), "{text}");
}

#[test]
fn missing_config_exits_2() {
    let out = phl().args(["fig2", "--config", "/definitely/not/here.json"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("not found"));
}

#[test]
fn usage_error_exits_2() {
    assert_eq!(phl().arg("fig7").output().unwrap().status.code(), Some(2));
    assert_eq!(phl().args(["fig2", "--reps", "many"]).output().unwrap().status.code(), Some(2));
}

#[test]
fn bad_config_is_an_error() {
    let path = scratch("bad.json");
    std::fs::write(&path, r#"{"experiment":"fig2","unknown":1}"#).unwrap();
    let out = phl().arg("fig2").arg("--config").arg(&path).output().unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("unknown"));
}

#[test]
fn fig2_is_byte_deterministic() {
    let run = |threads: &str| {
        let out = phl().args(["fig2", "--reps", "10", "--seed", "7", "--threads", threads]).output().unwrap();
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        out.stdout
    };
    let a = run("1");
    assert_eq!(a, run("1"));
    assert_eq!(a, run("3"));
    let text = String::from_utf8(a).unwrap();
    assert!(text.starts_with("experiment,a,H,N,predictor,metric,mean,stderr,reps,seed,notes\n"));
}

#[test]
fn threads_env_is_validated() {
    let out = phl().env("PHL_THREADS", "lots").args(["fig1"]).output().unwrap();
    assert!(!out.status.success());
    let out = phl().env("PHL_THREADS", "2").args(["fig1", "--threads", "1"]).output().unwrap();
    assert!(out.status.success());
}

#[test]
fn simulate_then_fit_round_trip() {
    let data = scratch("traj.csv");
    let model = scratch("model.json");
    std::fs::write(
        &model,
        r#"{"A":[[0.5,1.0],[0.0,0.75]],"B":[[0.0],[1.0]],"B_w":[[1,0],[0,1]],"C":[[1,0],[0,1]],"D_v":[[0,0],[0,0]]}"#,
    )
    .unwrap();
    let st = phl().args(["simulate", "--n", "400", "--seed", "2", "--config"]).arg(&model).arg("--out").arg(&data).status().unwrap();
    assert!(st.success());
    let pred = scratch("pred.json");
    let st = phl().args(["fit", "--horizon", "3", "--predictor", "multi-step", "--data"]).arg(&data).arg("--out").arg(&pred).status().unwrap();
    assert!(st.success());
    let p = phl_core::Predictor::from_json(&std::fs::read_to_string(&pred).unwrap()).unwrap();
    assert_eq!((p.horizon, p.output_dim, p.input_dim), (3, 2, 1));
}
