use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_srv6bench"));
    c.env_remove("SRV6BENCH_LOG");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

const SIM_TESTBED: &str = "
forwarder_kind: sim
sim:
  loss_at_capacity: 0
  capacities:
    End: 4000000
    End.DT6: 3000000
";

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn lpr_for_the_usual_sizes() {
    let o = run(&["lpr", "--ip-packet-size", "64", "104", "144"]);
    assert!(o.status.success());
    let out = stdout(&o);
    let kpps: Vec<&str> = out.lines().skip(1).map(|l| l.rsplit(' ').next().unwrap()).collect();
    assert_eq!(kpps, ["12255", "8803", "6868"]);
    assert!(out.contains("12254901.96"));
}

#[test]
fn lpr_rejects_bad_link() {
    let o = run(&["lpr", "--bit-rate", "0", "--ip-packet-size", "64"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn behaviors_json_lists_catalog() {
    let o = run(&["behaviors", "--format", "json"]);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    let rows = v.as_array().unwrap();
    assert_eq!(rows.len(), 34);
    let dt4 = rows.iter().find(|r| r["id"] == "End.DT4").unwrap();
    assert_eq!(dt4["linux_supported"], false);
    assert_eq!(dt4["vpp_supported"], true);

    let o = run(&["behaviors"]);
    assert_eq!(stdout(&o).lines().count(), 35);
}

#[test]
fn packet_hex_for_end() {
    let o = run(&["packet", "--behavior", "End", "--hex"]);
    assert!(o.status.success());
    let bytes: usize = stdout(&o)
        .lines()
        .map(|l| l.split_once(": ").unwrap().1.split_whitespace().count())
        .sum();
    assert_eq!(bytes, 158);
}

#[test]
fn packet_for_unimplemented_behavior_fails() {
    let o = run(&["packet", "--behavior", "End.AD"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("End.AD"));
    let o = run(&["packet", "--behavior", "End.Nope"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn sim_campaign_writes_results() {
    let dir = tempfile::tempdir().unwrap();
    let exp = write(dir.path(), "exp.yaml", "behaviors: [End, End.DT6]\nruns: 3\n");
    let tb = write(dir.path(), "tb.yaml", SIM_TESTBED);
    let out = dir.path().join("out");
    let o = run(&["run", "--experiment", s(&exp), "--testbed", s(&tb), "--out", s(&out)]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    for f in [
        "campaign.json",
        "campaign.csv",
        "plot_data.csv",
        "trace_end.jsonl",
        "trace_end_dt6.jsonl",
    ] {
        assert!(out.join(f).is_file(), "{f}");
    }
    let csv = fs::read_to_string(out.join("campaign.csv")).unwrap();
    assert_eq!(stdout(&o), csv);
    assert_eq!(csv.lines().count(), 3);

    let o = run(&["report", s(&out.join("campaign.json"))]);
    assert!(o.status.success());
    assert_eq!(stdout(&o), csv);
    let o = run(&["report", s(&out.join("campaign.json")), "--kind", "plot"]);
    assert_eq!(stdout(&o), fs::read_to_string(out.join("plot_data.csv")).unwrap());
}

#[test]
fn partial_campaign_exit_code() {
    let dir = tempfile::tempdir().unwrap();
    let exp = write(dir.path(), "exp.yaml", "behaviors: [End, End.AD]\nruns: 1\n");
    let tb = write(dir.path(), "tb.yaml", SIM_TESTBED);
    let out = dir.path().join("out");
    let o = run(&["run", "--experiment", s(&exp), "--testbed", s(&tb), "--out", s(&out)]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("End.AD"));
    let csv = fs::read_to_string(out.join("campaign.csv")).unwrap();
    assert!(csv.lines().any(|l| l == "End.AD,sim,,,,,,error"));
}

#[test]
fn config_errors_exit_2_with_field_path() {
    let dir = tempfile::tempdir().unwrap();
    let tb = write(dir.path(), "tb.yaml", SIM_TESTBED);
    let exp = write(
        dir.path(),
        "exp.yaml",
        "behaviors: [End]\nsearch:\n  accuracy_percent: -1\n",
    );
    let o = run(&["run", "--experiment", s(&exp), "--testbed", s(&tb)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("search"), "{}", stderr(&o));

    let exp = write(
        dir.path(),
        "typo.yaml",
        "behaviors: [End]\nsearch:\n  acuracy_percent: 1\n",
    );
    let o = run(&["run", "--experiment", s(&exp), "--testbed", s(&tb)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("acuracy_percent"), "{}", stderr(&o));

    let missing = dir.path().join("nope.yaml");
    let o = run(&["run", "--experiment", s(&missing), "--testbed", s(&tb)]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn recipe_shows_linux_commands() {
    let dir = tempfile::tempdir().unwrap();
    let tb = write(
        dir.path(),
        "linux.yaml",
        "forwarder_kind: linux\nconnection:\n  host: sut\n  user: bench\n",
    );
    let o = run(&["recipe", "--testbed", s(&tb), "--behavior", "End"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let out = stdout(&o);
    assert!(out.contains("ip -6 route add fcf0:0:1::1/128 encap seg6local action End dev eth2"));
    let o = run(&["recipe", "--testbed", s(&tb), "--behavior", "End.DT4"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("not supported on linux"));
}

#[test]
fn shipped_configs_parse() {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let dir = tempfile::tempdir().unwrap();
    for tb in ["linux-testbed.yaml", "vpp-testbed.yaml"] {
        let o = run(&["recipe", "--testbed", s(&root.join(tb)), "--behavior", "End.X"]);
        assert!(o.status.success(), "{tb}: {}", stderr(&o));
    }
    let exp = write(
        dir.path(),
        "exp.yaml",
        &fs::read_to_string(root.join("experiment.yaml"))
            .unwrap()
            .replace("runs: 10", "runs: 1"),
    );
    let o = run(&[
        "run",
        "--experiment",
        s(&exp),
        "--testbed",
        s(&root.join("sim-testbed.yaml")),
        "--out",
        s(&dir.path().join("out")),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
}
