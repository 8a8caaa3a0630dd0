use std::fs;
use std::process::{Command, Output};

fn maiora(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_maiora")).args(args).output().expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn rows(text: &str) -> Vec<Vec<String>> {
    text.lines().map(|l| l.split(',').map(str::to_owned).collect()).collect()
}

const SMALL: &[&str] = &["--nodes", "50", "--gateways", "1", "--mp", "10", "--seed", "1", "--sim-time", "600"];

#[test]
fn single_run_prints_one_row() {
    let out = maiora(&[SMALL, &["--allocator", "adr"]].concat());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let table = rows(&stdout(&out));
    assert_eq!(table.len(), 2);
    let der_col = table[0].iter().position(|h| h == "der").unwrap();
    let der: f64 = table[1][der_col].parse().unwrap();
    assert!((0.0..=1.0).contains(&der));
    for (h, v) in [("nodes", "50"), ("gateways", "1"), ("allocator", "adr"), ("seed", "1")] {
        let col = table[0].iter().position(|x| x == h).unwrap();
        assert_eq!(table[1][col], v);
    }
}

#[test]
fn same_flags_same_output() {
    let args = [SMALL, &["--allocator", "admaiora"]].concat();
    assert_eq!(stdout(&maiora(&args)), stdout(&maiora(&args)));
}

#[test]
fn allocators_differ_only_in_allocation_fields() {
    let base = ["--nodes", "300", "--gateways", "4", "--sim-time", "600", "--seed", "3"];
    let adr = rows(&stdout(&maiora(&[&base[..], &["--allocator", "adr"]].concat())));
    let adm = rows(&stdout(&maiora(&[&base[..], &["--allocator", "admaiora"]].concat())));
    assert_eq!(adr[0], adm[0]);
    let inputs = ["nodes", "gateways", "topology", "mp_s", "duty_cycle", "payload_bytes", "sim_time_s", "seed"];
    for (i, h) in adr[0].iter().enumerate() {
        if inputs.contains(&h.as_str()) {
            assert_eq!(adr[1][i], adm[1][i], "{h}");
        }
    }
    let differing: Vec<&String> = adr[0].iter().enumerate().filter(|(i, _)| adr[1][*i] != adm[1][*i]).map(|(_, h)| h).collect();
    assert!(differing.contains(&&"allocator".to_string()));
    assert!(differing.iter().any(|h| h.starts_with("sf")), "{differing:?}");
}

#[test]
fn sweep_writes_long_and_aggregate_tables() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("out");
    let out = maiora(&[
        "--nodes", "40", "--gateways", "2", "--sim-time", "300", "--allocator", "adr,prob-adr,admaiora",
        "--seeds", "2", "--sweep", "mp=10,100,900", "--jobs", "3", "--out", out_dir.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let count = |name: &str| fs::read_to_string(out_dir.join(name)).unwrap().lines().count() - 1;
    assert_eq!(count("runs.csv"), 18);
    assert_eq!(count("aggregate.csv"), 9);
    assert_eq!(count("per_gw.csv"), 36);
    assert_eq!(count("sf_histogram.csv"), 18 * 7);
    assert!(out_dir.join("scenario.toml").exists());

    // canonical order does not depend on thread count
    let serial = dir.path().join("serial");
    let again = maiora(&[
        "--nodes", "40", "--gateways", "2", "--sim-time", "300", "--allocator", "adr,prob-adr,admaiora",
        "--seeds", "2", "--sweep", "mp=10,100,900", "--jobs", "1", "--out", serial.to_str().unwrap(),
    ]);
    assert!(again.status.success());
    assert_eq!(fs::read(out_dir.join("runs.csv")).unwrap(), fs::read(serial.join("runs.csv")).unwrap());
}

#[test]
fn config_file_and_event_log() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("s.toml");
    fs::write(&cfg, "n_nodes = 20\nn_gateways = 2\n[traffic]\nsim_duration_s = 120.0\n").unwrap();
    let log = dir.path().join("events.csv");
    let out = maiora(&["--config", cfg.to_str().unwrap(), "--event-log", log.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let table = rows(&stdout(&out));
    assert_eq!(table[1][0], "20");
    let events = fs::read_to_string(&log).unwrap();
    assert!(events.starts_with("time,node,sf,gateway,rssi_dbm,verdict"));
    assert!(events.lines().count() > 1);
}

#[test]
fn exit_codes() {
    assert_eq!(maiora(&["--help"]).status.code(), Some(0));
    assert_eq!(maiora(&["--allocator", "magic"]).status.code(), Some(1));
    assert_eq!(maiora(&["--duty-cycle", "0.5"]).status.code(), Some(1));
    assert_eq!(maiora(&["--sweep", "colour=1,2"]).status.code(), Some(1));
    assert_eq!(maiora(&["--config", "/nonexistent/scenario.toml"]).status.code(), Some(1));

    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("taken");
    fs::write(&file, "").unwrap();
    let out = maiora(&[SMALL, &["--out", file.to_str().unwrap()]].concat());
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(String::from_utf8_lossy(&out.stderr).lines().count(), 1);
}

#[test]
fn single_topology_defaults_to_one_gateway() {
    let out = maiora(&["--topology", "single", "--nodes", "30", "--sim-time", "60"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let table = rows(&stdout(&out));
    let col = table[0].iter().position(|h| h == "gateways").unwrap();
    assert_eq!(table[1][col], "1");
}

#[test]
fn seed_comes_from_the_config_unless_overridden() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("s.toml");
    fs::write(&cfg, "n_nodes = 10\nn_gateways = 1\nseed = 42\n[traffic]\nsim_duration_s = 60.0\n").unwrap();
    let seed_of = |extra: &[&str]| {
        let out = maiora(&[&["--config", cfg.to_str().unwrap()][..], extra].concat());
        let table = rows(&stdout(&out));
        let col = table[0].iter().position(|h| h == "seed").unwrap();
        table[1][col].clone()
    };
    assert_eq!(seed_of(&[]), "42");
    assert_eq!(seed_of(&["--seed", "7"]), "7");
}
