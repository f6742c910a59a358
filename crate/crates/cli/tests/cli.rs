use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use knotfit::evalbench::{sample_observations, ExperimentConfig, Observations};
use knotfit::metrics::{cartesian, unit_axis};
use knotfit_cli::model_file::ModelFile;
use tempfile::TempDir;

fn knotfit(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_knotfit"))
        .args(args)
        .current_dir(dir)
        .env_remove("RUST_LOG")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn write_line_sample(dir: &Path) -> PathBuf {
    let config = ExperimentConfig::preset("f1-noise", None, 1, 3).unwrap();
    let Observations::Line { points, responses } = sample_observations(&config, 100, 0).unwrap() else { unreachable!() };
    let mut text = String::from("x,y\n");
    for (x, y) in points.iter().zip(&responses) {
        text += &format!("{x},{y}\n");
    }
    let path = dir.join("line.csv");
    fs::write(&path, text).unwrap();
    path
}

fn data_rows(csv_text: &str) -> Vec<Vec<String>> {
    csv_text
        .lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(|l| l.split(',').map(str::to_owned).collect())
        .collect()
}

#[test]
fn fits_a_line_sample() {
    let dir = TempDir::new().unwrap();
    write_line_sample(dir.path());
    let out = knotfit(&["fit", "line.csv", "--degree", "2", "--bounds", "0:1", "--out", "model.json"], dir.path());
    assert!(out.status.success(), "{}", stderr(&out));
    let model = ModelFile::load(&dir.path().join("model.json")).unwrap();
    let k = model.axes[0].knots.len();
    assert!((4..=8).contains(&k), "{k} knots");
    assert!(stdout(&out).contains("mode=line"));
}

#[test]
fn missing_response_names_the_row() {
    let dir = TempDir::new().unwrap();
    fs::write(dir.path().join("bad.csv"), "x,y\n0.1,1.0\n0.2,2.0\n0.3,\n0.4,1.0\n").unwrap();
    let out = knotfit(&["fit", "bad.csv", "--out", "model.json"], dir.path());
    assert!(!out.status.success());
    assert!(stderr(&out).contains("row 3"), "{}", stderr(&out));
    assert!(!dir.path().join("model.json").exists());
}

#[test]
fn full_grid_uses_the_grid_fit() {
    let dir = TempDir::new().unwrap();
    let axis: Vec<f64> = (0..40).map(|i| i as f64 / 39.0).collect();
    let mut text = String::from("x1,x2,y\n");
    for p in cartesian(&[axis.clone(), axis]) {
        text += &format!("{},{},{}\n", p[0], p[1], (p[0] - 0.3).abs() * p[1]);
    }
    fs::write(dir.path().join("grid.csv"), text).unwrap();
    let out = knotfit(&["-v", "fit", "grid.csv", "--dims", "2", "--out", "model.json"], dir.path());
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(stdout(&out).contains("mode=grid"), "{}", stdout(&out));
    assert!(stderr(&out).contains("using the grid fit"));
}

#[test]
fn scattered_input_uses_the_clustered_fit() {
    let dir = TempDir::new().unwrap();
    let mut text = String::from("a,b,y\n");
    for i in 0..60 {
        let (u, v) = ((i as f64 * 0.618034) % 1.0, (i as f64 * 0.414214) % 1.0);
        text += &format!("{u},{v},{}\n", 1.0 + u + 0.5 * v);
    }
    fs::write(dir.path().join("pts.csv"), text).unwrap();
    let out = knotfit(&["fit", "pts.csv", "--dims", "2", "--out", "model.json"], dir.path());
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(stdout(&out).contains("mode=cluster"), "{}", stdout(&out));
    let grid = knotfit(&["fit", "pts.csv", "--dims", "2", "--mode", "grid", "--out", "g.json"], dir.path());
    assert!(!grid.status.success());
}

#[test]
fn predictions_survive_save_and_load_bit_for_bit() {
    let dir = TempDir::new().unwrap();
    write_line_sample(dir.path());
    let fit = knotfit(&["fit", "line.csv", "--bounds", "0:1", "--out", "model.json"], dir.path());
    assert!(fit.status.success(), "{}", stderr(&fit));

    let file = ModelFile::load(&dir.path().join("model.json")).unwrap();
    let before = file.to_model().unwrap();
    file.save(&dir.path().join("copy.json")).unwrap();
    let after = ModelFile::load(&dir.path().join("copy.json")).unwrap().to_model().unwrap();
    let probe = unit_axis(1001);
    for &x in &probe {
        assert_eq!(before.predict(&[x]).unwrap().to_bits(), after.predict(&[x]).unwrap().to_bits(), "x = {x}");
    }

    let mut text = String::from("x\n");
    for x in &probe {
        text += &format!("{x}\n");
    }
    fs::write(dir.path().join("probe.csv"), text).unwrap();
    let out = knotfit(&["predict", "copy.json", "probe.csv", "--out", "pred.csv"], dir.path());
    assert!(out.status.success(), "{}", stderr(&out));
    let rows = data_rows(&fs::read_to_string(dir.path().join("pred.csv")).unwrap());
    assert_eq!(rows.len(), probe.len());
    for (row, &x) in rows.iter().zip(&probe) {
        let p: f64 = row[1].parse().unwrap();
        assert_eq!(p.to_bits(), before.predict(&[x]).unwrap().to_bits());
    }
}

#[test]
fn empty_points_give_a_header_only() {
    let dir = TempDir::new().unwrap();
    write_line_sample(dir.path());
    assert!(knotfit(&["fit", "line.csv", "--out", "model.json"], dir.path()).status.success());
    fs::write(dir.path().join("none.csv"), "x\n").unwrap();
    let out = knotfit(&["predict", "model.json", "none.csv", "--out", "pred.csv"], dir.path());
    assert!(out.status.success(), "{}", stderr(&out));
    let text = fs::read_to_string(dir.path().join("pred.csv")).unwrap();
    let lines: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(lines, vec!["x,prediction"]);
}

#[test]
fn out_of_domain_points_are_named() {
    let dir = TempDir::new().unwrap();
    write_line_sample(dir.path());
    assert!(knotfit(&["fit", "line.csv", "--bounds", "0:1", "--out", "model.json"], dir.path()).status.success());
    fs::write(dir.path().join("pts.csv"), "x\n0.5\n1.5\n0.2\n-0.1\n").unwrap();
    let out = knotfit(&["predict", "model.json", "pts.csv", "--out", "pred.csv"], dir.path());
    assert!(!out.status.success());
    assert!(stderr(&out).contains("rows 2, 4"), "{}", stderr(&out));
    assert!(!dir.path().join("pred.csv").exists());
}

#[test]
fn bench_runs_are_reproducible() {
    let dir = TempDir::new().unwrap();
    let args = |out: &'static str| ["bench", "--experiment", "f1-noise", "--reps", "1", "--seed", "7", "--out", out];
    assert!(knotfit(&args("a"), dir.path()).status.success());
    assert!(knotfit(&args("b"), dir.path()).status.success());
    for file in ["results.csv", "summary.csv"] {
        let a = fs::read(dir.path().join("a").join(file)).unwrap();
        let b = fs::read(dir.path().join("b").join(file)).unwrap();
        assert_eq!(a, b, "{file} differs");
    }
    let text = fs::read_to_string(dir.path().join("a/results.csv")).unwrap();
    assert!(text.lines().any(|l| l == "# seed=7"));
}

#[test]
fn noisier_f1_still_finds_the_knots() {
    let dir = TempDir::new().unwrap();
    let out = knotfit(
        &["bench", "--experiment", "f1-noise", "--sigma", "0.25", "--reps", "10", "--schedule", "50,100", "--out", "b"],
        dir.path(),
    );
    assert!(out.status.success(), "{}", stderr(&out));
    let mut d2: Vec<f64> = data_rows(&fs::read_to_string(dir.path().join("b/results.csv")).unwrap())
        .into_iter()
        .filter(|r| r[1] == "100")
        .map(|r| r[8].parse().unwrap())
        .collect();
    assert_eq!(d2.len(), 10);
    d2.sort_by(f64::total_cmp);
    let median = 0.5 * (d2[4] + d2[5]);
    assert!(median <= 0.05, "median d2 {median}");
}

#[test]
fn unknown_experiment_lists_the_valid_ones() {
    let dir = TempDir::new().unwrap();
    let out = knotfit(&["bench", "--experiment", "f9", "--out", "b"], dir.path());
    assert!(!out.status.success());
    let err = stderr(&out);
    for name in ["f1-noise", "f1-sampling", "f2-noise", "f2-sampling", "f2-cluster"] {
        assert!(err.contains(name), "{err}");
    }
}

#[test]
fn thread_count_from_the_environment() {
    let dir = TempDir::new().unwrap();
    write_line_sample(dir.path());
    let out = Command::new(env!("CARGO_BIN_EXE_knotfit"))
        .args(["fit", "line.csv", "--out", "model.json"])
        .current_dir(dir.path())
        .env("KNOTFIT_THREADS", "2")
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", stderr(&out));
    let zero = knotfit(&["--threads", "0", "fit", "line.csv", "--out", "m.json"], dir.path());
    assert!(!zero.status.success());
}
