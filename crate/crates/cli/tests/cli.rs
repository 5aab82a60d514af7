use std::fs;
use std::io::BufReader;
use std::path::Path;
use std::process::{Command, Output};

use nanowire_core::io::read_field;
use nanowire_core::integrate;
use serde_json::Value;
use tempfile::TempDir;

fn nanowire(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nanowire"))
        .args(args)
        .env("NANOWIRE_THREADS", "1")
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, name: &str, body: &str) -> String {
    let path = dir.join(name);
    fs::write(&path, body).unwrap();
    path.to_str().unwrap().to_owned()
}

const SMALL_TF: &str = "model = \"tf-regularized\"\na = 4.0\nb = 4.0\nna = 21\nnb = 21\n\
                        mu = \"gaussian(0,0,0.7,2)\"\nepsilon = 1e-8\nseed = 7\n";

const SMALL_RHF: &str = "model = \"rhf\"\na = 4.0\nb = 4.0\nna = 13\nnb = 13\n\
                         mu = \"gaussian(0,0,0.7,1)\"\nepsilon = 1e-9\n";

fn summary(dir: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(dir.join("summary.json")).unwrap()).unwrap()
}

fn field_at(path: &Path) -> nanowire_core::ScalarField {
    read_field(BufReader::new(fs::File::open(path).unwrap())).unwrap()
}

#[test]
fn repeated_runs_are_byte_identical_apart_from_timing() {
    let tmp = TempDir::new().unwrap();
    for (name, body, files) in [
        ("tf.toml", SMALL_TF, &["mu.csv", "rho.csv", "potential.csv", "history.csv"][..]),
        ("rhf.toml", SMALL_RHF, &["mu.csv", "rho.csv", "potential.csv", "history.csv", "eigenvalues.csv"][..]),
    ] {
        let cfg = write_config(tmp.path(), name, body);
        let dirs: Vec<_> = ["one", "two"].iter().map(|d| tmp.path().join(format!("{name}-{d}"))).collect();
        for d in &dirs {
            let out = nanowire(&["solve", "--config", &cfg, "--out", d.to_str().unwrap()]);
            assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
        }
        for f in files {
            assert_eq!(fs::read(dirs[0].join(f)).unwrap(), fs::read(dirs[1].join(f)).unwrap(), "{name}: {f}");
        }
        let (mut a, mut b) = (summary(&dirs[0]), summary(&dirs[1]));
        assert!(a["wall_time_s"].as_f64().unwrap() >= 0.0);
        a.as_object_mut().unwrap().remove("wall_time_s");
        b.as_object_mut().unwrap().remove("wall_time_s");
        assert_eq!(a, b);
        assert_eq!(a["converged"], Value::Bool(true));
        assert!(a["config"].is_object());
    }
}

#[test]
fn summary_records_the_run() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "tf.toml", SMALL_TF);
    let out_dir = tmp.path().join("run");
    let out = nanowire(&["solve", "--config", &cfg, "--out", out_dir.to_str().unwrap(), "--seed", "11"]);
    assert_eq!(out.status.code(), Some(0));
    let s = summary(&out_dir);
    assert_eq!(s["model"], "tf-regularized");
    assert_eq!(s["config"]["seed"], 11);
    assert_eq!(s["config"]["mu"], "gaussian(0,0,0.7,2)");
    assert_eq!(s["grid"]["na"], 21);
    let e = &s["energy"];
    let total = e["total"].as_f64().unwrap();
    assert!((e["kinetic"].as_f64().unwrap() + e["hartree"].as_f64().unwrap() - total).abs() < 1e-12 * total.abs());
    let rho = field_at(&out_dir.join("rho.csv"));
    let z = s["charge"].as_f64().unwrap();
    assert!((integrate(&rho) - z).abs() < 1e-6 * z);
}

#[test]
fn flags_override_the_file() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "tf.toml", &format!("{SMALL_TF}out = \"ignored\"\n"));
    let out_dir = tmp.path().join("log");
    let out = nanowire(&["solve", "--config", &cfg, "--model", "tf-log", "--out", out_dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(summary(&out_dir)["model"], "tf-log");
    assert!(!Path::new("ignored").exists());
}

#[test]
fn malformed_config_exits_1_without_outputs() {
    let tmp = TempDir::new().unwrap();
    let out_dir = tmp.path().join("never");
    for body in [
        "model = \"tf-regularized\"\nna = \n",
        "model = \"tf-regularized\"\ncolour = \"red\"\n",
        "model = \"quantum\"\n",
        "model = \"tf-regularized\"\nmu = \"triangle\"\n",
        "model = \"tf-regularized\"\nmu = \"missing.csv\"\n",
        "model = \"tf-regularized\"\nna = 40\nnb = 41\n",
        "model = \"tf-regularized\"\nepsilon = 0.0\n",
    ] {
        let cfg = write_config(tmp.path(), "bad.toml", body);
        let out = nanowire(&["solve", "--config", &cfg, "--out", out_dir.to_str().unwrap()]);
        assert_eq!(out.status.code(), Some(1), "{body}");
        assert!(!out_dir.exists(), "{body}");
    }
    let out = nanowire(&["solve", "--config", tmp.path().join("absent.toml").to_str().unwrap(), "--out", "x"]);
    assert_eq!(out.status.code(), Some(1));
    let out = nanowire(&["solve", "--out", out_dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(!out_dir.exists());
}

#[test]
fn non_convergence_exits_2_and_still_writes() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "short.toml", &format!("{SMALL_TF}max_iter = 1\n"));
    let out_dir = tmp.path().join("short");
    let out = nanowire(&["solve", "--config", &cfg, "--out", out_dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    for f in ["rho.csv", "potential.csv", "history.csv", "summary.json"] {
        assert!(out_dir.join(f).is_file(), "{f}");
    }
    assert_eq!(summary(&out_dir)["converged"], Value::Bool(false));
}

#[test]
fn comparing_a_run_with_itself_gives_zero_errors() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "tf.toml", SMALL_TF);
    let run = tmp.path().join("run");
    assert_eq!(nanowire(&["solve", "--config", &cfg, "--out", run.to_str().unwrap()]).status.code(), Some(0));
    let cmp = tmp.path().join("cmp");
    let r = run.to_str().unwrap();
    let out = nanowire(&["compare", r, r, "--out", cmp.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let report: Value = serde_json::from_str(&fs::read_to_string(cmp.join("comparison.json")).unwrap()).unwrap();
    for key in ["energy_gap_rel", "density_err_rel", "potential_err_rel"] {
        assert_eq!(report[key].as_f64(), Some(0.0), "{key}");
    }
    assert_eq!(field_at(&cmp.join("dV.csv")).max_abs(), 0.0);
    assert_eq!(field_at(&cmp.join("drho.csv")).max_abs(), 0.0);
}

#[test]
fn comparing_different_grids_fails() {
    let tmp = TempDir::new().unwrap();
    let a = write_config(tmp.path(), "a.toml", SMALL_TF);
    let b = write_config(tmp.path(), "b.toml", &SMALL_TF.replace("na = 21\nnb = 21", "na = 23\nnb = 23"));
    let (ra, rb) = (tmp.path().join("a"), tmp.path().join("b"));
    assert_eq!(nanowire(&["solve", "--config", &a, "--out", ra.to_str().unwrap()]).status.code(), Some(0));
    let out = nanowire(&["solve", "--config", &b, "--model", "tf-log", "--out", rb.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let cmp = tmp.path().join("cmp");
    let out = nanowire(&["compare", ra.to_str().unwrap(), rb.to_str().unwrap(), "--out", cmp.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn emit_mu_writes_presets_and_rejects_unknown_names() {
    let tmp = TempDir::new().unwrap();
    let square = tmp.path().join("square.csv");
    let out = nanowire(&["emit-mu", "--preset", "square-nanowire", "--grid", "8,8,41,41", "--out", square.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stdout).contains("analytic 16.000000000000"));
    let mu = field_at(&square);
    assert_eq!(mu.grid().na(), 41);
    assert!((integrate(&mu) - 81.0 * 0.16).abs() < 1e-12);

    let gauss = tmp.path().join("gauss.csv");
    let out = nanowire(&["emit-mu", "--preset", "gaussian(0,0,0.5,1)", "--grid", "8,8,41,41", "--out", gauss.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    assert!((integrate(&field_at(&gauss)) - 1.0).abs() < 1e-6);

    let none = tmp.path().join("none.csv");
    let out = nanowire(&["emit-mu", "--preset", "hexagon", "--grid", "8,8,41,41", "--out", none.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(!none.exists());
}

#[test]
fn charge_file_feeds_a_run() {
    let tmp = TempDir::new().unwrap();
    let mu = tmp.path().join("mu.csv");
    let out = nanowire(&["emit-mu", "--preset", "gaussian(0,0,0.7,2)", "--grid", "4,4,21,21", "--out", mu.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let cfg = write_config(
        tmp.path(),
        "file.toml",
        &SMALL_TF.replace("mu = \"gaussian(0,0,0.7,2)\"", &format!("mu = {:?}", mu.to_str().unwrap())),
    );
    let from_file = tmp.path().join("from-file");
    assert_eq!(nanowire(&["solve", "--config", &cfg, "--out", from_file.to_str().unwrap()]).status.code(), Some(0));
    let cfg_preset = write_config(tmp.path(), "preset.toml", SMALL_TF);
    let from_preset = tmp.path().join("from-preset");
    assert_eq!(nanowire(&["solve", "--config", &cfg_preset, "--out", from_preset.to_str().unwrap()]).status.code(), Some(0));
    assert_eq!(fs::read(from_file.join("rho.csv")).unwrap(), fs::read(from_preset.join("rho.csv")).unwrap());
}
