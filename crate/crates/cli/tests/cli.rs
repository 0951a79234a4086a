use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use mce_core::io::read_trajectories;

fn mce(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mce")).args(args).current_dir(dir).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    assert_eq!(mce(&["--version"], p).status.code(), Some(0));
    assert_eq!(mce(&["frobnicate"], p).status.code(), Some(1));
    assert_eq!(mce(&["simulate", "--chains", "x"], p).status.code(), Some(1));
    assert_eq!(mce(&["experiment", "nope"], p).status.code(), Some(1));
    fs::write(p.join("bad.cfg"), "unknown_key = 3\n").unwrap();
    assert_eq!(mce(&["experiment", "tradeoff", "--config", "bad.cfg"], p).status.code(), Some(1));
    assert_eq!(mce(&["spectral", "--size", "1"], p).status.code(), Some(2));
    assert_eq!(mce(&["simulate", "--eps=-1"], p).status.code(), Some(1));
    assert_eq!(mce(&["estimate", "missing.txt"], p).status.code(), Some(2));
    fs::write(p.join("m.txt"), "states 2\ntarget\n0.5 0.6\n0.5 0.5\n").unwrap();
    let o = mce(&["bounds", "m.txt", "--horizon", "10"], p);
    assert_eq!(o.status.code(), Some(2));
    assert!(!o.stderr.is_empty());
}

#[test]
fn simulate_then_estimate() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    let sim = [
        "simulate", "--size", "5", "--gamma", "0.3", "--chains", "40", "--horizon", "200", "--seed", "7",
        "--corrupt-count", "4", "--out", "traj.txt", "--split-out", "bad.txt",
    ];
    assert!(mce(&sim, p).status.success());
    let first = fs::read(p.join("traj.txt")).unwrap();
    assert!(mce(&sim, p).status.success());
    assert_eq!(fs::read(p.join("traj.txt")).unwrap(), first);

    let traj = read_trajectories(p.join("traj.txt")).unwrap();
    assert_eq!((traj.chains(), traj.horizon(), traj.state_count()), (40, 200, 5));
    let bad: Vec<usize> = fs::read_to_string(p.join("bad.txt")).unwrap().lines().map(|l| l.parse().unwrap()).collect();
    assert_eq!(bad.len(), 4);
    for &m in &bad {
        assert!(traj.row(m).iter().all(|&s| s == 0));
    }

    let o = mce(&["estimate", "traj.txt", "--split-file", "bad.txt", "--out", "est"], p);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    for f in ["p_hat.txt", "pi_hat.txt", "p_hat_clean.txt", "pi_hat_clean.txt"] {
        assert!(p.join("est").join(f).exists(), "{f}");
    }
    let pi_line = |f: &str| -> Vec<f64> {
        let text = fs::read_to_string(p.join("est").join(f)).unwrap();
        text.lines().nth(1).unwrap().split_whitespace().map(|v| v.parse().unwrap()).collect()
    };
    let clean = pi_line("pi_hat_clean.txt");
    assert!(clean.iter().all(|v| (v - 0.2).abs() < 0.1), "{clean:?}");
    assert!(pi_line("pi_hat.txt")[0] > clean[0]);
}

#[test]
fn spectral_of_lazy_cycle() {
    let dir = tempfile::tempdir().unwrap();
    let o = mce(&["spectral", "--size", "4", "--gamma", "0.5"], dir.path());
    assert!(o.status.success());
    let text = stdout(&o);
    let value = |key: &str| -> f64 {
        let line = text.lines().find(|l| l.starts_with(&format!("{key} "))).unwrap();
        line.split_whitespace().nth(1).unwrap().parse().unwrap()
    };
    assert!((value("gamma_abs") - 0.5).abs() < 1e-12);
    assert!((value("gamma_ps") - 0.75).abs() < 1e-12);
    assert!(text.contains("pi 0.25 0.25 0.25 0.25"));
}

#[test]
fn bounds_csv() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    fs::write(p.join("m.txt"), "states 2\ntarget\n0.5 0.5\n0.5 0.5\nclean 100\n").unwrap();
    let o = mce(&["bounds", "m.txt", "--horizon", "100", "--csv"], p);
    assert!(o.status.success());
    let mut rdr = csv::Reader::from_reader(o.stdout.as_slice());
    assert_eq!(rdr.headers().unwrap(), vec!["quantity", "value", "threshold", "status"]);
    let rows: Vec<csv::StringRecord> = rdr.records().map(|r| r.unwrap()).collect();
    let get = |q: &str| rows.iter().find(|r| &r[0] == q).unwrap().clone();
    let bound: f64 = get("transition_bound")[1].parse().unwrap();
    assert!((bound - 0.3154).abs() < 5e-4);
    let cond = get("transition_condition");
    assert!((cond[2].parse::<f64>().unwrap() - 1461.7).abs() < 0.5);
    assert_eq!(&cond[3], "met");
    assert!(rows.iter().filter(|r| r[0].starts_with("consistency.")).count() >= 5);
}

#[test]
fn experiment_output_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    fs::write(p.join("c.cfg"), "# small\ntrials = 3\nchains_grid = 2, 10, 50\n").unwrap();
    let run = |out: &str, threads: &str| {
        let o = mce(&["experiment", "tradeoff", "--config", "c.cfg", "--out", out, "--threads", threads], p);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        fs::read(p.join(out).join("tradeoff.csv")).unwrap()
    };
    let a = run("a", "1");
    assert_eq!(a, run("b", "3"));
    assert_eq!(a, run("c", "1"));
    let text = String::from_utf8(a).unwrap();
    let header = text.lines().find(|l| !l.starts_with('#')).unwrap();
    assert_eq!(header, "M,T,eps,mean,std");
    assert_eq!(text.lines().filter(|l| !l.starts_with('#')).count(), 7);

    let o = mce(&["experiment", "tradeoff", "--config", "c.cfg", "--out", "d", "--seed", "5"], p);
    assert!(o.status.success());
    assert_ne!(fs::read(p.join("d/tradeoff.csv")).unwrap(), fs::read(p.join("a/tradeoff.csv")).unwrap());
}
