use std::path::Path;
use std::process::Command as Proc;

use tsvpdn::config::{load_config, RunConfig};
use tsvpdn::geometry::Design;
use tsvpdn_cli::{bundled_workloads, ohms, run_command, Command};

fn bin() -> Proc {
    Proc::new(env!("CARGO_BIN_EXE_tsvpdn"))
}

fn repo(rel: &str) -> String {
    format!("{}/../../{rel}", env!("CARGO_MANIFEST_DIR"))
}

fn files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out: Vec<_> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let p = e.unwrap().path();
            (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap())
        })
        .collect();
    out.sort();
    out
}

#[test]
fn napsaa_prints_one_line_per_design() {
    let tmp = tempfile::tempdir().unwrap();
    let out = bin()
        .args(["napsaa", "--config", &repo("configs/canonical.conf")])
        .current_dir(tmp.path())
        .output()
        .unwrap();
    assert!(out.status.success());
    assert_eq!(String::from_utf8(out.stdout).unwrap(), "clustered: 4\ndistributed: 32\n");
}

#[test]
fn irmap_records_violation_at_eight() {
    let tmp = tempfile::tempdir().unwrap();
    let out = bin()
        .args(["irmap", "--design", "clustered", "--n", "8", "--out"])
        .arg(tmp.path())
        .output()
        .unwrap();
    assert!(out.status.success());
    let text = std::fs::read_to_string(tmp.path().join("irmap_clustered_n8.csv")).unwrap();
    let header = text.lines().next().unwrap();
    let mv: f64 = header.rsplit('=').next().unwrap().parse().unwrap();
    assert!(header.starts_with("# design=clustered,n_saa=8,") && mv > 75.0, "{header}");
}

#[test]
fn bad_config_fails_with_one_line() {
    let tmp = tempfile::tempdir().unwrap();
    let conf = tmp.path().join("bad.conf");
    std::fs::write(&conf, "margin_mv = banana\n").unwrap();
    let out = bin().arg("rw").arg("--config").arg(&conf).output().unwrap();
    assert!(!out.status.success());
    let err = String::from_utf8(out.stderr).unwrap();
    assert_eq!(err.lines().count(), 1);
    assert!(err.contains("line 1") && err.contains("margin_mv"), "{err}");
}

#[test]
fn failed_command_leaves_no_partial_output() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = RunConfig { out: tmp.path().join("o"), ..RunConfig::default() };
    cfg.distributed.tsvs_per_line = 10_000;
    assert!(run_command(Command::Layout, &cfg, None).is_err());
    let left = std::fs::read_dir(&cfg.out).map(|d| d.count()).unwrap_or(0);
    assert_eq!(left, 0);
}

#[test]
fn light_commands_are_byte_identical() {
    let cfg = load_config(Path::new(&repo("configs/canonical.conf"))).unwrap();
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    for cmd in [Command::Layout, Command::Netlist, Command::Rw] {
        let ra = run_command(cmd, &RunConfig { out: a.path().into(), ..cfg.clone() }, None).unwrap();
        let rb = run_command(cmd, &RunConfig { out: b.path().into(), ..cfg.clone() }, None).unwrap();
        let strip = |s: &str, d: &Path| s.replace(&d.display().to_string(), "");
        assert_eq!(strip(&ra.stdout, a.path()), strip(&rb.stdout, b.path()));
    }
    assert_eq!(files(a.path()), files(b.path()));
    assert_eq!(files(a.path()).len(), 4);
}

#[test]
fn layout_csv_has_header_and_all_sites() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = RunConfig { out: tmp.path().into(), ..RunConfig::default() };
    run_command(Command::Layout, &cfg, None).unwrap();
    for d in Design::ALL {
        let text = std::fs::read_to_string(tmp.path().join(format!("layout_{d}.csv"))).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("x_um,y_um,polarity"));
        assert_eq!(lines.count(), 128);
    }
}

#[test]
fn bundled_profiles_are_nine() {
    assert_eq!(bundled_workloads().unwrap().len(), 9);
}

#[test]
fn ohm_formatting_keeps_six_digits() {
    assert_eq!(ohms(0.123417), "0.123417");
    assert_eq!(ohms(0.0294009), "0.0294009");
    assert_eq!(ohms(20.04795), "20.0480");
    assert_eq!(ohms(100.0), "100.000");
    assert_eq!(ohms(f64::INFINITY), "inf");
}
