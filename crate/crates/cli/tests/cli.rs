use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_nodal-lab"));
    c.env_remove("NODAL_LAB_CACHE_DIR");
    c
}

fn run(args: &[&str], out: &Path) -> Output {
    bin().args(args).arg("--out").arg(out).output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn files(dir: &Path, ext: &str) -> Vec<PathBuf> {
    let mut v: Vec<PathBuf> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == ext))
        .collect();
    v.sort();
    v
}

fn report(dir: &Path) -> serde_json::Value {
    let j = files(dir, "json");
    assert_eq!(j.len(), 1, "{j:?}");
    serde_json::from_str(&fs::read_to_string(&j[0]).unwrap()).unwrap()
}

#[test]
fn empty_spectrum_warns_and_passes() {
    let d = tempfile::tempdir().unwrap();
    let o = run(&["spectrum", "--domain", "box2", "--mu-max", "0.5"], d.path());
    assert_eq!(code(&o), 0);
    assert!(String::from_utf8_lossy(&o.stderr).contains("warning"));
    let r = report(d.path());
    assert_eq!(r["schema"], 1);
    assert_eq!(r["cells"].as_array().unwrap().len(), 0);
}

#[test]
fn interval_tube_family_ratio_two() {
    let d = tempfile::tempdir().unwrap();
    let o = run(
        &["tube", "--domain", "interval", "--mu-min", "10", "--mu-max", "14", "--mu-delta", "0.1"],
        d.path(),
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(&files(d.path(), "csv")[0]).unwrap();
    let mut lines = csv.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let col = header.iter().position(|h| *h == "ratio").unwrap();
    let rows: Vec<f64> = lines.map(|l| l.split(',').nth(col).unwrap().parse().unwrap()).collect();
    assert_eq!(rows.len(), 5);
    for r in rows {
        assert!((r - 2.0).abs() < 0.04, "{r}");
    }
}

#[test]
fn identical_config_gives_identical_bytes() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let args = ["dioph", "--domain", "interval", "--mu-max", "20000", "--points", "30", "--seed", "5"];
    assert_eq!(code(&run(&args, a.path())), 0);
    bin().args(args).arg("--out").arg(b.path()).arg("--jobs").arg("1").output().unwrap();
    let (ja, jb) = (files(a.path(), "json"), files(b.path(), "json"));
    assert_eq!(ja[0].file_name(), jb[0].file_name());
    assert_eq!(fs::read(&ja[0]).unwrap(), fs::read(&jb[0]).unwrap());
    let (ca, cb) = (files(a.path(), "csv"), files(b.path(), "csv"));
    assert_eq!(fs::read(&ca[0]).unwrap(), fs::read(&cb[0]).unwrap());
}

#[test]
fn config_file_and_flag_precedence() {
    let d = tempfile::tempdir().unwrap();
    let conf = d.path().join("run.conf");
    fs::write(&conf, "domain = interval\nmu-max = 1000\npoints = 5\nseed = 7\n").unwrap();
    let out = d.path().join("out");
    let o = bin()
        .args(["dioph", "--config"])
        .arg(&conf)
        .args(["--seed", "9", "--out"])
        .arg(&out)
        .output()
        .unwrap();
    assert!(o.status.code().is_some_and(|c| c <= 1), "{}", String::from_utf8_lossy(&o.stderr));
    let r = report(&out);
    assert_eq!(r["provenance"]["seed"], 9);
    assert_eq!(r["config"]["seed"], "9");
    assert_eq!(r["config"]["mu-max"], "1000.0");
}

#[test]
fn invalid_input_exits_two() {
    let d = tempfile::tempdir().unwrap();
    for args in [
        &["tube", "--domain", "torus2", "--m", "3,4", "--delta", "-0.1"][..],
        &["tube", "--domain", "torus2", "--m", "3,4", "--delta", "x"],
        &["tube", "--domain", "torus2", "--bogus", "1"],
        &["tube", "--m", "3,4"],
        &["spectrum", "--domain", "interval"],
        &["yau", "--domain", "sphere3", "--m", "1"],
    ] {
        let o = run(args, d.path());
        assert_eq!(code(&o), 2, "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
    }
    let conf = d.path().join("bad.conf");
    fs::write(&conf, "domain=interval\ncolour=red\n").unwrap();
    let o = bin().args(["tube", "--config"]).arg(&conf).output().unwrap();
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("colour"));
}

#[test]
fn guard_exits_three_and_names_cell() {
    let d = tempfile::tempdir().unwrap();
    let o = run(&["yau", "--domain", "torus2", "--m", "3000,4000"], d.path());
    assert_eq!(code(&o), 3);
    assert!(String::from_utf8_lossy(&o.stderr).contains("m=3000:4000"));
    let o = run(&["tube", "--domain", "interval", "--mu-max", "1000"], d.path());
    assert_eq!(code(&o), 3);
}

#[test]
fn failed_gate_exits_one() {
    let d = tempfile::tempdir().unwrap();
    let o = run(&["yau", "--domain", "torus2", "--m", "3,4", "--ppw", "4"], d.path());
    assert_eq!(code(&o), 1);
    assert_eq!(report(d.path())["passed"], false);
    let o = run(&["report"], d.path());
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stdout).contains("FAIL"));
}

#[test]
fn cache_does_not_change_results() {
    let d = tempfile::tempdir().unwrap();
    let cache = d.path().join("cache");
    let args = ["density", "--domain", "torus2", "--m", "3,4;2,5", "--cache-dir", cache.to_str().unwrap()];
    let mut outs = Vec::new();
    for (i, extra) in [&[][..], &[], &["--no-cache"]].iter().enumerate() {
        let out = d.path().join(format!("o{i}"));
        let o = bin().args(args).args(*extra).arg("--out").arg(&out).output().unwrap();
        assert_eq!(code(&o), 0);
        outs.push(fs::read(&files(&out, "json")[0]).unwrap());
    }
    assert_eq!(files(&cache, "nldf").len(), 2);
    assert_eq!(outs[0], outs[1]);
    assert_eq!(outs[0], outs[2]);
}

#[test]
fn interval_exponents_near_two() {
    let d = tempfile::tempdir().unwrap();
    let o = run(&["dioph", "--domain", "interval", "--mu-max", "100000", "--points", "100"], d.path());
    assert_eq!(code(&o), 0);
    let mean = report(d.path())["summary"]["mean_b_hat"].as_f64().unwrap();
    assert!((1.8..=2.2).contains(&mean), "{mean}");
}

#[test]
fn dioph_event_listing() {
    let d = tempfile::tempdir().unwrap();
    let o = run(
        &["dioph", "--domain", "interval", "--mu-max", "200", "--points", "3", "--b", "1", "--c", "3.2"],
        d.path(),
    );
    assert!(code(&o) <= 1);
    let events: Vec<PathBuf> = files(d.path(), "csv")
        .into_iter()
        .filter(|p| p.to_string_lossy().ends_with("-events.csv"))
        .collect();
    assert_eq!(events.len(), 1);
    let body = fs::read_to_string(&events[0]).unwrap();
    assert!(body.starts_with("x0,k,mu,dist"));
    // with C > π every mode of every point is an event at b = 1
    assert_eq!(body.lines().count(), 1 + 3 * 200);
}
