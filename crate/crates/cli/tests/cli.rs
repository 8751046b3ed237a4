use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn landis(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_landis")).args(args).output().unwrap()
}

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn cfg(name: &str) -> String {
    configs().join(name).display().to_string()
}

fn csv_rows(path: &Path) -> Vec<Vec<String>> {
    let mut rd = csv::Reader::from_path(path).unwrap();
    let header: Vec<String> = rd.headers().unwrap().iter().map(str::to_string).collect();
    let mut rows = vec![header];
    rows.extend(rd.records().map(|r| r.unwrap().iter().map(str::to_string).collect()));
    rows
}

#[test]
fn harmonic_config_certifies_each_degree() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = landis(&["order", "--config", &cfg("harmonic.toml"), "--out", out]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let rows = csv_rows(&dir.path().join("certificate.csv"));
    let col = |name: &str| rows[0].iter().position(|c| c == name).unwrap();
    for c in ["M", "K", "seed", "E_certified", "E_empirical", "slack", "premultiplier"] {
        col(c);
    }
    assert_eq!(rows.len(), 7);
    for (n, row) in rows[1..].iter().enumerate() {
        let e: f64 = row[col("E_certified")].parse().unwrap();
        assert!(e >= (n + 1) as f64, "degree {}: {e}", n + 1);
        // Floats carry 17 significant digits.
        assert!(row[col("E_certified")].contains('e'));
        assert_eq!(row[col("E_certified")].split('e').next().unwrap().replace(['-', '.'], "").len(), 17);
    }
}

#[test]
fn fixed_seed_runs_are_byte_identical() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    for d in [&a, &b] {
        let o = landis(&["multiplier", "--config", &cfg("multiplier.toml"), "--out", d.path().to_str().unwrap()]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        let o = landis(&["carleman", "--config", &cfg("carleman.toml"), "--grid-n", "128", "--out", d.path().to_str().unwrap()]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    for f in ["phi.csv", "psi.csv", "carleman.csv"] {
        let x = std::fs::read(a.path().join(f)).unwrap();
        let y = std::fs::read(b.path().join(f)).unwrap();
        assert!(!x.is_empty());
        assert!(x == y, "{f} differs");
    }
}

#[test]
fn seeds_change_random_potentials() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    for (d, seed) in [(&a, "1"), (&b, "2")] {
        let o = landis(&["multiplier", "--config", &cfg("multiplier.toml"), "--seed", seed, "--out", d.path().to_str().unwrap()]);
        assert!(o.status.success());
    }
    assert_ne!(std::fs::read(a.path().join("phi.csv")).unwrap(), std::fs::read(b.path().join("phi.csv")).unwrap());
}

#[test]
fn config_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = landis(&["order", "--config", "/nonexistent/harmonic.toml", "--out", out]);
    assert_eq!(o.status.code(), Some(2));
    let o = landis(&["multiplier", "--config", &cfg("harmonic.toml"), "--out", out]);
    assert_eq!(o.status.code(), Some(2));
    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "command = \"order\"\ncolour = \"red\"\n").unwrap();
    let o = landis(&["order", "--config", bad.to_str().unwrap(), "--out", out]);
    assert_eq!(o.status.code(), Some(2));
    let o = landis(&["order", "--tol", "-1", "--out", out]);
    assert_eq!(o.status.code(), Some(2));
    let o = landis(&["frobnicate"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(!dir.path().join("failure.json").exists());
}

#[test]
fn invariant_failures_exit_with_one_and_leave_a_report() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("few_sweeps.toml");
    std::fs::write(&bad, "command = \"multiplier\"\npotential = \"constant\"\nmax_sweeps = 1\ngrid_n = 64\n").unwrap();
    let out = dir.path().join("out");
    let o = landis(&["multiplier", "--config", bad.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1), "{}", String::from_utf8_lossy(&o.stderr));
    let report: serde_json::Value = serde_json::from_slice(&std::fs::read(out.join("failure.json")).unwrap()).unwrap();
    assert_eq!(report["command"], "multiplier");
    assert_eq!(report["invariant"], "convergence");
}

#[test]
fn list_prints_one_line_per_subcommand() {
    let o = landis(&["list"]);
    assert!(o.status.success());
    let text = String::from_utf8(o.stdout).unwrap();
    let names: Vec<&str> = text.lines().map(|l| l.split_whitespace().next().unwrap()).collect();
    assert_eq!(names, ["multiplier", "cauchy", "reduce", "order", "scale", "exterior", "carleman"]);
}

#[test]
fn exterior_flags_override_the_config() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let conf = dir.path().join("e.toml");
    std::fs::write(&conf, "command = \"exterior\"\nr_list = [1000]\nctilde = 3.0\n").unwrap();
    let o = landis(&["exterior", "--config", conf.to_str().unwrap(), "--R-list", "12.5", "--Ctilde", "10", "--out", out]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let rows = csv_rows(&dir.path().join("exterior_terms.csv"));
    assert_eq!(rows.len(), 2);
    let r = rows[0].iter().position(|c| c == "R").unwrap();
    assert_eq!(rows[1][r].parse::<f64>().unwrap(), 12.5);
}

#[test]
fn reduce_reads_fields_written_by_other_commands() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let conf = dir.path().join("m.toml");
    std::fs::write(&conf, "command = \"multiplier\"\npotential = \"constant\"\nm = 1.0\nk = 1.0\ngrid_n = 64\n").unwrap();
    let o = landis(&["multiplier", "--config", conf.to_str().unwrap(), "--out", out]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    // u = e^x solves Δu = u.
    let mut u = String::from("x,y,value\n");
    for row in csv_rows(&dir.path().join("phi.csv")).iter().skip(1) {
        let x: f64 = row[0].parse().unwrap();
        u.push_str(&format!("{},{},{:.16e}\n", row[0], row[1], x.exp()));
    }
    let upath = dir.path().join("u.csv");
    std::fs::write(&upath, u).unwrap();
    let phi = dir.path().join("phi.csv");
    let o = landis(&["reduce", "--u", upath.to_str().unwrap(), "--multiplier", phi.to_str().unwrap(), "--out", out]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(dir.path().join("g.csv").exists() && dir.path().join("coeff.csv").exists());
}
