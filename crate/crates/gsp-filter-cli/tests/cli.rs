use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use gsp_filter::io::write_operator_binary;
use gsp_filter::linalg::CMat;
use gsp_filter::{Grid, C64};
use serde_json::Value;
use tempfile::TempDir;

fn data(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data").join(name)
}

fn run(args: &[&str], config: Option<&Path>, out: &Path, envs: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_gsp-filter"));
    cmd.args(args).arg("--quiet").arg("--out").arg(out);
    if let Some(c) = config {
        cmd.arg("--config").arg(c);
    }
    cmd.env_remove("GSP_THREADS");
    for (k, v) in envs {
        cmd.env(k, v);
    }
    cmd.output().expect("binary runs")
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn write_config(dir: &Path, text: &str) -> PathBuf {
    let path = dir.join("run.toml");
    fs::write(&path, text).unwrap();
    path
}

#[test]
fn golden_filter_runs() {
    let update = std::env::var_os("UPDATE_GOLDEN").is_some();
    for name in ["lowpass", "derivative", "disjoint"] {
        let tmp = TempDir::new().unwrap();
        let res = run(&["filter"], Some(&data(&format!("{name}.toml"))), tmp.path(), &[]);
        assert_eq!(res.status.code(), Some(0), "{name}: {}", String::from_utf8_lossy(&res.stderr));
        let golden = data("golden").join(name);
        for file in ["summary.json", "mse.csv", "fhat.csv"] {
            let got = fs::read(tmp.path().join(file)).unwrap();
            if update {
                fs::create_dir_all(&golden).unwrap();
                fs::write(golden.join(file), &got).unwrap();
            } else {
                let want = fs::read(golden.join(file)).unwrap_or_else(|_| panic!("missing golden {name}/{file}"));
                assert!(got == want, "{name}/{file} differs from the golden copy");
            }
        }
    }
}

#[test]
fn disjoint_spectra_give_zero_error() {
    let tmp = TempDir::new().unwrap();
    run(&["filter"], Some(&data("disjoint.toml")), tmp.path(), &[]);
    let mut rows = csv::Reader::from_path(tmp.path().join("mse.csv")).unwrap();
    for row in rows.records() {
        let row = row.unwrap();
        let j: f64 = row[2].parse().unwrap();
        assert!(j.abs() <= 1e-12, "{row:?}");
    }
    let summary = json(&tmp.path().join("summary.json"));
    assert_eq!(summary["routes"]["general"]["status"], "skipped");
    assert_eq!(summary["routes"]["douglas"]["status"], "solved");
}

#[test]
fn outputs_are_deterministic() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "[grid]\nn = 48\nL = 6.0\n[run]\nsamples = 4000\n[gabor]\nn2 = 40\n");
    let runs: Vec<Vec<u8>> = [("a", "1"), ("b", "2"), ("c", "1")]
        .iter()
        .map(|(dir, threads)| {
            let out = tmp.path().join(dir);
            let res = run(&["verify", "--seed", "5"], Some(&cfg), &out, &[("GSP_THREADS", threads)]);
            assert_eq!(res.status.code(), Some(0), "{}", String::from_utf8_lossy(&res.stderr));
            let mut bytes = fs::read(out.join("verify.json")).unwrap();
            bytes.extend(fs::read(out.join("verify.csv")).unwrap());
            bytes
        })
        .collect();
    assert_eq!(runs[0], runs[1]);
    assert_eq!(runs[0], runs[2]);
    let other = tmp.path().join("d");
    run(&["verify", "--seed", "6"], Some(&cfg), &other, &[]);
    assert_ne!(fs::read(other.join("verify.json")).unwrap(), fs::read(tmp.path().join("a/verify.json")).unwrap());
}

#[test]
fn default_verify_passes() {
    let tmp = TempDir::new().unwrap();
    let res = run(&["verify"], None, tmp.path(), &[]);
    assert_eq!(res.status.code(), Some(0), "{}", String::from_utf8_lossy(&res.stderr));
    let report = json(&tmp.path().join("verify.json"));
    assert_eq!(report["pass"], true);
    assert_eq!(report["checks"].as_array().unwrap().len(), 6);
}

#[test]
fn injected_fault_breaks_orthogonality() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "[grid]\nn = 48\nL = 6.0\n[run]\nfault = 1e-3\nsamples = 0\n[gabor]\nn2 = 40\n");
    let res = run(&["verify"], Some(&cfg), &tmp.path().join("out"), &[]);
    assert_eq!(res.status.code(), Some(1));
    let report = json(&tmp.path().join("out/verify.json"));
    let checks = report["checks"].as_array().unwrap();
    let orth = checks.iter().find(|c| c["name"] == "residual orthogonality").unwrap();
    assert_eq!(orth["pass"], false);
    assert!(checks.iter().filter(|c| c["name"] != "residual orthogonality").all(|c| c["pass"] == true));
}

#[test]
fn non_psd_operator_is_rejected() {
    let tmp = TempDir::new().unwrap();
    let g = Grid::new(16, 3.0).unwrap();
    let mut k = CMat::identity(16, 16);
    k[(3, 3)] = C64::new(-0.5, 0.0);
    write_operator_binary(fs::File::create(tmp.path().join("kw.bin")).unwrap(), &g, &k).unwrap();
    let cfg = write_config(tmp.path(), "[grid]\nn = 16\nL = 3.0\n[noise]\noperator = \"kw.bin\"\n");
    let res = run(&["filter"], Some(&cfg), &tmp.path().join("out"), &[]);
    assert_eq!(res.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&res.stderr);
    assert!(stderr.contains("noise covariance rejected") && stderr.contains("positive semidefinite"), "{stderr}");
    assert_eq!(json(&tmp.path().join("out/summary.json"))["pass"], false);
}

#[test]
fn non_stationary_operator_input() {
    let tmp = TempDir::new().unwrap();
    let g = Grid::new(16, 3.0).unwrap();
    let k = CMat::from_fn(16, 16, |i, j| {
        let d = i as f64 - j as f64;
        C64::new((1.0 + 0.1 * i as f64) * (-d * d / 4.0).exp() * (1.0 + 0.1 * j as f64), 0.0)
    });
    write_operator_binary(fs::File::create(tmp.path().join("ku.bin")).unwrap(), &g, &k).unwrap();
    let cfg = write_config(tmp.path(), "[grid]\nn = 16\nL = 3.0\n[signal]\noperator = \"ku.bin\"\n[noise]\nmeasure = \"lebesgue 0.3\"\n");
    let res = run(&["filter"], Some(&cfg), &tmp.path().join("out"), &[]);
    assert_eq!(res.status.code(), Some(0), "{}", String::from_utf8_lossy(&res.stderr));
    let summary = json(&tmp.path().join("out/summary.json"));
    assert_eq!(summary["stationary"], false);
    assert_eq!(summary["routes"]["wss"]["status"], "skipped");
    assert_eq!(summary["routes"]["general"]["status"], "solved");
    assert!(tmp.path().join("out/filter_general.bin").exists());

    let cfg = write_config(tmp.path(), "[grid]\nn = 16\nL = 3.0\n[signal]\noperator = \"ku.bin\"\n[solver]\nroutes = \"wss\"\n");
    assert_eq!(run(&["filter"], Some(&cfg), &tmp.path().join("out2"), &[]).status.code(), Some(1));
}

#[test]
fn empty_symbol_decay_and_truncation_sweep() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "[decay]\nsymbols = \"zero; rough 12\"\ncolumns = \"0 0 0 0; 1 0 -1 1\"\nsweep = \"0.25, 0.5, 1.5\"\n");
    let res = run(&["decay"], Some(&cfg), &tmp.path().join("out"), &[]);
    assert_eq!(res.status.code(), Some(0), "{}", String::from_utf8_lossy(&res.stderr));
    let report = json(&tmp.path().join("out/decay.json"));
    assert_eq!(report["symbols"][0]["max_abs"], 0.0);
    assert_eq!(report["symbols"][0]["violations"], 0);
    let mut rows = csv::Reader::from_path(tmp.path().join("out/truncation.csv")).unwrap();
    let rough: Vec<(f64, f64)> = rows
        .records()
        .map(|r| r.unwrap())
        .filter(|r| &r[0] == "rough 12")
        .map(|r| (r[2].parse().unwrap(), r[3].parse().unwrap()))
        .collect();
    assert_eq!(rough.len(), 3);
    assert!(rough[0].1 > rough[1].1 && rough[1].1 > rough[2].1);
    assert!(rough[2].1 < 1e-12);
    assert!(rough[0].0 > rough[1].0);
}

#[test]
fn bad_configs_exit_with_usage_error() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "[signal]\nmeasure = \"pink 3\"\n");
    assert_eq!(run(&["filter"], Some(&cfg), &tmp.path().join("o"), &[]).status.code(), Some(2));
    let cfg = write_config(tmp.path(), "[gabor]\nn2 = 40\na = 2.0\nb = 2.0\n");
    assert_eq!(run(&["decay"], Some(&cfg), &tmp.path().join("o"), &[]).status.code(), Some(2));
    assert_eq!(run(&["filter"], Some(&tmp.path().join("missing.toml")), &tmp.path().join("o"), &[]).status.code(), Some(2));
}
