//! End-to-end checks of the command-line surface: run -> rates -> export,
//! plus the documented failure modes.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn afem(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_afem"))
        .args(args)
        .output()
        .expect("spawn afem")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

#[test]
fn run_rates_export_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("out");
    let cfg_path = dir.path().join("run.cfg");
    fs::write(
        &cfg_path,
        format!(
            "# small smoke run\n\
             preset = example1\n\
             p = 1.6\n\
             n_iterations = 12\n\
             snapshot_every = 5\n\
             export_vtk = true\n\
             output_dir = {}\n",
            out_dir.display()
        ),
    )
    .unwrap();

    let run = afem(&["run", cfg_path.to_str().unwrap()]);
    assert!(run.status.success(), "run failed: {}", stderr(&run));
    assert!(stdout(&run).contains("finished 12 adaptive iterations"));

    for name in [
        "record.csv",
        "final.snap",
        "final.vtk",
        "snapshot_0000.snap",
        "snapshot_0000.vtk",
        "snapshot_0005.snap",
        "snapshot_0010.snap",
    ] {
        assert!(out_dir.join(name).exists(), "missing {name}");
    }

    // The record embeds the config as comments and has one row per round
    // plus the initial solve.
    let csv = fs::read_to_string(out_dir.join("record.csv")).unwrap();
    assert!(csv.starts_with("# preset = example1"));
    assert_eq!(csv.lines().filter(|l| !l.starts_with('#')).count(), 1 + 13);

    let rates = afem(&["rates", out_dir.join("record.csv").to_str().unwrap()]);
    assert!(rates.status.success(), "rates failed: {}", stderr(&rates));
    let slope: f64 = stdout(&rates).trim().parse().unwrap();
    assert!(slope < 0.0, "estimator should decay, got slope {slope}");

    // A shorter tail gives a (possibly different) finite slope.
    let rates4 = afem(&[
        "rates",
        out_dir.join("record.csv").to_str().unwrap(),
        "--tail",
        "4",
    ]);
    assert!(rates4.status.success());
    let _: f64 = stdout(&rates4).trim().parse().unwrap();

    let vtk_out = dir.path().join("exported.vtk");
    let export = afem(&[
        "export",
        out_dir.join("final.snap").to_str().unwrap(),
        vtk_out.to_str().unwrap(),
    ]);
    assert!(export.status.success(), "export failed: {}", stderr(&export));
    let vtk = fs::read_to_string(&vtk_out).unwrap();
    assert!(vtk.starts_with("# vtk DataFile Version 3.0"));
    assert!(vtk.contains("SCALARS temperature double"));
    assert!(vtk.contains("VECTORS velocity double"));
    // Exporting the stored snapshot reproduces the run's own VTK output.
    assert_eq!(vtk, fs::read_to_string(out_dir.join("final.vtk")).unwrap());
}

#[test]
fn rates_rejects_short_records() {
    let dir = tempfile::tempdir().unwrap();
    let record = dir.path().join("short.csv");
    fs::write(
        &record,
        "iter,nv,nt,ndof,est_heat,est_darcy,est_total,picard_iters,marked\n\
         0,13,16,51,1.0,1.0,2.0,3,4\n",
    )
    .unwrap();
    let out = afem(&["rates", record.to_str().unwrap()]);
    assert!(!out.status.success());
    assert!(stderr(&out).contains("error:"));
}

#[test]
fn run_rejects_bad_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.cfg");
    fs::write(&cfg, "preset = example1\np = 1.4\nn_iterations = 1\nturbo = yes\n").unwrap();
    let out = afem(&["run", cfg.to_str().unwrap()]);
    assert!(!out.status.success());
    assert!(stderr(&out).contains("unknown key"));
}

#[test]
fn export_rejects_missing_snapshot() {
    let dir = tempfile::tempdir().unwrap();
    let out = afem(&[
        "export",
        dir.path().join("nope.snap").to_str().unwrap(),
        dir.path().join("out.vtk").to_str().unwrap(),
    ]);
    assert!(!out.status.success());
}
