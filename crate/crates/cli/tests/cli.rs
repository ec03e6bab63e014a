use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn steklov(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_steklov"))
        .args(args)
        .arg("--out-dir")
        .arg(out)
        .env_remove("STEKLOV_OUT_DIR")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn read_json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn bounds_prints_moser_exponents() {
    let dir = tempfile::tempdir().unwrap();
    let o = steklov(&["bounds", "--n", "3", "--p", "2"], dir.path());
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("chi=1.25 gamma=4 beta=11.2"), "{}", stdout(&o));
    let j = read_json(&dir.path().join("bounds.json"));
    assert_eq!(j["moser"]["beta"], 11.2);
}

#[test]
fn solve_on_the_disk_matches_bessel_values() {
    let dir = tempfile::tempdir().unwrap();
    let o = steklov(&["solve", "--domain", "disk", "--level", "5", "--p", "2", "--k", "3", "--weight", "constant:1"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let j = read_json(&dir.path().join("solve.json"));
    let lam: Vec<f64> = j.as_array().unwrap().iter().map(|e| e["lambda"].as_f64().unwrap()).collect();
    assert_eq!(lam.len(), 3);
    assert!((lam[0] - 0.446378).abs() < 1e-3);
    assert!((lam[1] - 1.240193).abs() < 2e-3);
    assert!((lam[2] - 1.240193).abs() < 2e-3);
}

#[test]
fn usage_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(steklov(&["solve", "--bogus"], dir.path()).status.code(), Some(2));
    assert_eq!(steklov(&["frobnicate"], dir.path()).status.code(), Some(2));
    assert_eq!(steklov(&["solve", "--domain", "blob"], dir.path()).status.code(), Some(2));
    assert_eq!(steklov(&["solve", "--p", "0.5"], dir.path()).status.code(), Some(2));
    assert_eq!(steklov(&["solve", "--set", "nonsense"], dir.path()).status.code(), Some(2));
}

#[test]
fn emitted_config_reproduces_the_run() {
    let first = tempfile::tempdir().unwrap();
    let o = steklov(&["solve", "--domain", "square", "--size", "12", "--k", "4", "--epsilon", "0.1"], first.path());
    assert_eq!(o.status.code(), Some(0));
    let second = tempfile::tempdir().unwrap();
    let cfg = first.path().join("config.ini");
    let o = steklov(&["solve", "--config", cfg.to_str().unwrap()], second.path());
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(fs::read_to_string(first.path().join("solve.json")).unwrap(), fs::read_to_string(second.path().join("solve.json")).unwrap());
}

#[test]
fn flags_override_the_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.ini");
    fs::write(&cfg, "[problem]\ndomain = square\nsize = 8\nk = 2\n").unwrap();
    let o = steklov(&["solve", "--config", cfg.to_str().unwrap(), "--k", "5"], dir.path());
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(read_json(&dir.path().join("solve.json")).as_array().unwrap().len(), 5);
    let emitted = fs::read_to_string(dir.path().join("config.ini")).unwrap();
    assert!(emitted.contains("k=5") && emitted.contains("size=8"), "{emitted}");
}

#[test]
fn out_dir_comes_from_the_environment() {
    let dir = tempfile::tempdir().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_steklov"))
        .args(["bounds", "--n", "2", "--p", "3"])
        .env("STEKLOV_OUT_DIR", dir.path())
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0));
    assert!(dir.path().join("bounds.json").exists());
}

#[test]
fn sweep_output_does_not_depend_on_threads() {
    let args = ["sweep", "--domain", "square", "--size", "16", "--k", "2", "--eps", "0.25,0.2,0.15,0.125"];
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let oa = steklov(&[&args[..], &["--threads", "1"]].concat(), a.path());
    let ob = steklov(&[&args[..], &["--threads", "2"]].concat(), b.path());
    assert!(matches!(oa.status.code(), Some(0 | 1)));
    assert_eq!(oa.status.code(), ob.status.code());
    let csv_a = fs::read_to_string(a.path().join("sweep.csv")).unwrap();
    assert_eq!(csv_a, fs::read_to_string(b.path().join("sweep.csv")).unwrap());
    assert!(csv_a.starts_with("eps,k,p,lambda_eps,lambda_0,gap,h,disc_err_est,resolved"));
    assert!(a.path().join("verdict.json").exists() && a.path().join("sweep.svg").exists());

    let r = tempfile::tempdir().unwrap();
    let csv = a.path().join("sweep.csv");
    let o = steklov(&["report", csv.to_str().unwrap()], r.path());
    assert_eq!(o.status.code(), oa.status.code());
    let j = read_json(&r.path().join("report.json"));
    assert_eq!(j["verdicts"].as_array().unwrap().len(), 2);
    assert!(r.path().join("report.svg").exists());
}

#[test]
fn fucik_curve_on_the_disk_is_monotone() {
    let dir = tempfile::tempdir().unwrap();
    let o = steklov(&["fucik", "--domain", "disk", "--level", "3", "--weight", "constant:1"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    let csv = fs::read_to_string(dir.path().join("fucik.csv")).unwrap();
    assert_eq!(csv.lines().count(), 6);
}

#[test]
fn neumann_study_writes_its_table() {
    let dir = tempfile::tempdir().unwrap();
    let o = steklov(&["neumann", "--domain", "square", "--size", "32", "--eps", "0.25,0.2,0.125"], dir.path());
    assert!(matches!(o.status.code(), Some(0 | 1)));
    let csv = fs::read_to_string(dir.path().join("neumann.csv")).unwrap();
    assert_eq!(csv.lines().count(), 4);
    assert!(dir.path().join("neumann.json").exists());
}
