use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn crossdetect(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_crossdetect"))
        .args(args)
        .arg("--out")
        .arg(dir)
        .env_remove("CROSSDETECT_THREADS")
        .output()
        .unwrap()
}

fn ok(o: &Output) {
    assert!(o.status.success(), "stderr: {}", String::from_utf8_lossy(&o.stderr));
}

const SMALL: &[&str] = &["--m", "4", "--n-h0", "1000", "--n-mc", "200", "--snr", "0:10:5", "--theta", "-30:30:15"];

fn with_small<'a>(args: &[&'a str]) -> Vec<&'a str> {
    args.iter().chain(SMALL).copied().collect()
}

#[test]
fn pfa_smoke_writes_preamble_and_config() {
    let d = tempfile::tempdir().unwrap();
    ok(&crossdetect(d.path(), &with_small(&["pfa", "--detector", "m-nmf-r", "--clutter", "gaussian"])));
    let csv = fs::read_to_string(d.path().join("pfa_m-nmf-r.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert!(lines[0].starts_with("# config_fingerprint="));
    assert_eq!(lines[1], "# seed=1");
    assert_eq!(lines[2], "threshold,pfa");
    assert!(d.path().join("pfa.config.toml").exists());
}

#[test]
fn resolved_config_reproduces_outputs() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    ok(&crossdetect(a.path(), &with_small(&["pd-snr", "--detectors", "nmf1,m-anmf-r-scm", "--seed", "4"])));
    let cfg = a.path().join("pd-snr.config.toml");
    ok(&crossdetect(b.path(), &["pd-snr", "--config", cfg.to_str().unwrap()]));
    for f in ["pd_snr_nmf1.csv", "pd_snr_m-anmf-r-scm.csv"] {
        assert_eq!(fs::read(a.path().join(f)).unwrap(), fs::read(b.path().join(f)).unwrap(), "{f}");
    }
}

#[test]
fn thread_env_does_not_change_bytes() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let args = with_small(&["pd-theta", "--detectors", "m-anmf-g-tyl", "--clutter", "k,nu=0.5", "--threads", "4"]);
    ok(&crossdetect(a.path(), &args));
    let o = Command::new(env!("CARGO_BIN_EXE_crossdetect"))
        .args(&args)
        .arg("--out")
        .arg(b.path())
        .env("CROSSDETECT_THREADS", "1")
        .output()
        .unwrap();
    ok(&o);
    let f = "pd_theta_m-anmf-g-tyl.csv";
    assert_eq!(fs::read(a.path().join(f)).unwrap(), fs::read(b.path().join(f)).unwrap());
}

#[test]
fn unknown_detector_is_config_error() {
    let d = tempfile::tempdir().unwrap();
    let o = crossdetect(d.path(), &["pfa", "--detector", "bogus"]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("bogus") && err.contains("m-anmf-r-tyl"), "{err}");
}

#[test]
fn bad_config_field_reports_location() {
    let d = tempfile::tempdir().unwrap();
    let p = d.path().join("bad.toml");
    fs::write(&p, "seed = 3\n\n[scene]\nbeta = \"large\"\nrho1 = 0.4\nrho2 = 0.9\n").unwrap();
    let o = crossdetect(d.path(), &["calibrate", "--config", p.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("line 4") && err.contains("beta"), "{err}");
}

#[test]
fn invalid_values_exit_2() {
    let d = tempfile::tempdir().unwrap();
    for args in [&["pfa", "--pfa", "1.5"][..], &["pfa", "--k", "3"], &["pfa", "--clutter", "k,nu=-1"], &["pfa", "--set", "nope=1"]] {
        assert_eq!(crossdetect(d.path(), args).status.code(), Some(2), "{args:?}");
    }
}

#[test]
fn corrupt_cube_is_runtime_error() {
    let d = tempfile::tempdir().unwrap();
    let p = d.path().join("junk.pcub");
    fs::write(&p, b"not a cube").unwrap();
    let o = crossdetect(d.path(), &["detect-cube", "--cube", p.to_str().unwrap(), "--detector", "m-anmf-r-scm"]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn cube_round_trip_and_detection() {
    let d = tempfile::tempdir().unwrap();
    let cube = d.path().join("c.pcub");
    let c = cube.to_str().unwrap();
    ok(&crossdetect(d.path(), &["synth-cube", "--m", "8", "--bins", "120", "--inject", "60:15:-30:10", "--output", c]));
    ok(&crossdetect(
        d.path(),
        &["detect-cube", "--cube", c, "--m", "8", "--detector", "m-nmf-r", "--estimator", "scm", "--theta", "-45:45:15", "--bins", "30,60,90"],
    ));
    let csv = fs::read_to_string(d.path().join("detections.csv")).unwrap();
    let rows: Vec<Vec<&str>> = csv.lines().skip(3).map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 3 * 7 * 7);
    let best = rows.iter().max_by(|a, b| a[3].parse::<f64>().unwrap().total_cmp(&b[3].parse().unwrap())).unwrap();
    assert_eq!((best[0], best[1], best[2]), ("60", "15", "-30"));
}

#[test]
fn remaining_subcommands_run() {
    let d = tempfile::tempdir().unwrap();
    ok(&crossdetect(d.path(), &with_small(&["calibrate", "--detectors", "nmf1,m-nmf-g"])));
    ok(&crossdetect(d.path(), &with_small(&["converge", "--clutter", "k"])));
    ok(&crossdetect(d.path(), &with_small(&["corrupt-exp", "--target", "15,0"])));
    for f in ["thresholds.csv", "convergence.csv", "corruption.csv"] {
        let text = fs::read_to_string(d.path().join(f)).unwrap();
        assert!(text.starts_with("# config_fingerprint="), "{f}");
    }
    let conv = fs::read_to_string(d.path().join("convergence.csv")).unwrap();
    assert_eq!(conv.lines().nth(2), Some("iter,rel_dev"));
}
