//! End-to-end checks of the binary: exit codes, key=value stdout, file
//! outputs, and a live coordinator/node round over loopback.

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufRead, BufReader};
use std::path::Path;
use std::process::{Child, Command, Output, Stdio};

fn bin() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_silotrain"));
    cmd.env("SILOTRAIN_LOG", "quiet");
    cmd
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("spawn silotrain")
}

fn kv(stdout: &[u8]) -> BTreeMap<String, String> {
    let text = String::from_utf8(stdout.to_vec()).expect("stdout is utf-8");
    let mut map = BTreeMap::new();
    for line in text.lines() {
        let (k, v) = line
            .split_once('=')
            .unwrap_or_else(|| panic!("stdout line is not key=value: {line:?}"));
        map.insert(k.to_string(), v.to_string());
    }
    map
}

fn write_plan(dir: &Path, body: &str) -> std::path::PathBuf {
    let path = dir.join("plan.txt");
    fs::write(&path, body).unwrap();
    path
}

const TINY_PLAN: &str = "\
mode = distributed
n_nodes = 2
depth = 2
epochs = 6
batch_size = 16
learning_rate = 0.2
patience = 6
seed = 5
data = synthetic:45
";

#[test]
fn usage_errors_exit_one_with_single_stderr_line() {
    let out = run(&[]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8(out.stderr).unwrap();
    assert_eq!(err.trim_end().lines().count(), 1, "stderr was: {err:?}");
    assert!(out.stdout.is_empty());

    let out = run(&["synth", "--no-such-flag"]);
    assert_eq!(out.status.code(), Some(1));

    let out = run(&["--help"]);
    assert_eq!(out.status.code(), Some(0));
}

#[test]
fn runtime_errors_exit_two() {
    let out = run(&["ingest-check", "--data-dir", "/nonexistent-path-for-test"]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.starts_with("error: "), "stderr was: {err:?}");

    let dir = tempfile::tempdir().unwrap();
    let plan = write_plan(dir.path(), "mode = sideways\ndata = synthetic:10\n");
    let out = run(&["simulate", "--plan-file", plan.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn synth_then_ingest_check_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("images");
    let out = run(&[
        "synth",
        "--n-per-class",
        "5",
        "--seed",
        "3",
        "--out-dir",
        data.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "stderr: {:?}", String::from_utf8_lossy(&out.stderr));
    let pairs = kv(&out.stdout);
    assert_eq!(pairs["images"], "10");

    let mut names: Vec<String> = fs::read_dir(&data)
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    names.sort();
    assert_eq!(names.len(), 10);
    assert!(names.iter().all(|n| n.ends_with(".pgm")));
    assert!(names.iter().all(|n| n.starts_with('0') || n.starts_with('1')));

    let out = run(&["ingest-check", "--data-dir", data.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let pairs = kv(&out.stdout);
    assert_eq!(pairs["images"], "10");
    assert_eq!(pairs["skipped"], "0");
    assert_eq!(pairs["class0"], "5");
    assert_eq!(pairs["class1"], "5");
}

#[test]
fn keygen_is_deterministic_under_a_seed() {
    let dir = tempfile::tempdir().unwrap();
    let base_a = dir.path().join("a/alice");
    let base_b = dir.path().join("b/alice");
    fs::create_dir_all(base_a.parent().unwrap()).unwrap();
    fs::create_dir_all(base_b.parent().unwrap()).unwrap();

    let out_a = run(&["keygen", "--name", base_a.to_str().unwrap(), "--seed", "42"]);
    let out_b = run(&["keygen", "--name", base_b.to_str().unwrap(), "--seed", "42"]);
    assert_eq!(out_a.status.code(), Some(0));
    let kv_a = kv(&out_a.stdout);
    let kv_b = kv(&out_b.stdout);
    assert_eq!(kv_a["key_id"], kv_b["key_id"]);
    assert_eq!(kv_a["key_id"].len(), 16);
    assert!(Path::new(&kv_a["public"]).exists());
    assert!(Path::new(&kv_a["private"]).exists());
    assert_eq!(
        fs::read(dir.path().join("a/alice.key")).unwrap(),
        fs::read(dir.path().join("b/alice.key")).unwrap()
    );

    // Unseeded keys differ run to run.
    let base_c = dir.path().join("c1");
    let base_d = dir.path().join("c2");
    let out_c = run(&["keygen", "--name", base_c.to_str().unwrap()]);
    let out_d = run(&["keygen", "--name", base_d.to_str().unwrap()]);
    assert_ne!(kv(&out_c.stdout)["key_id"], kv(&out_d.stdout)["key_id"]);
}

#[test]
fn simulate_writes_the_report_bundle() {
    let dir = tempfile::tempdir().unwrap();
    let plan = write_plan(dir.path(), TINY_PLAN);
    let out_dir = dir.path().join("out");
    let out = run(&[
        "simulate",
        "--plan-file",
        plan.to_str().unwrap(),
        "--out-dir",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "stderr: {:?}", String::from_utf8_lossy(&out.stderr));
    let pairs = kv(&out.stdout);
    assert_eq!(pairs["run"], "distributed");
    assert!(pairs.contains_key("final_accuracy"));
    assert!(out_dir.join("summary.csv").exists());
    assert!(out_dir.join("decisions.log").exists());
    assert!(out_dir.join("timings.txt").exists());
    assert!(out_dir.join("distributed-node-1.csv").exists());
    assert!(out_dir.join("distributed-node-2.csv").exists());

    // The plan's out_dir works as the fallback when the flag is omitted.
    let fallback_dir = dir.path().join("fallback");
    let plan2 = write_plan(
        &dir.path().join("."),
        &format!("{TINY_PLAN}out_dir = {}\n", fallback_dir.display()),
    );
    let out = run(&["simulate", "--plan-file", plan2.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    assert!(fallback_dir.join("summary.csv").exists());
}

#[test]
fn compare_is_reproducible_byte_for_byte() {
    let dir = tempfile::tempdir().unwrap();
    let plan = write_plan(dir.path(), TINY_PLAN);
    let out_a = dir.path().join("a");
    let out_b = dir.path().join("b");
    for out_dir in [&out_a, &out_b] {
        let out = run(&[
            "compare",
            "--plan-file",
            plan.to_str().unwrap(),
            "--out-dir",
            out_dir.to_str().unwrap(),
        ]);
        assert_eq!(out.status.code(), Some(0), "stderr: {:?}", String::from_utf8_lossy(&out.stderr));
        let pairs = kv(&out.stdout);
        assert!(pairs.contains_key("distributed_accuracy"));
        assert!(pairs.contains_key("centralized_accuracy"));
        assert!(pairs.contains_key("accuracy_gap"));
    }
    for name in [
        "summary.csv",
        "decisions.log",
        "centralized.csv",
        "distributed-node-1.csv",
        "distributed-node-2.csv",
    ] {
        let a = fs::read(out_a.join(name)).unwrap();
        let b = fs::read(out_b.join(name)).unwrap();
        assert_eq!(a, b, "{name} differs between runs");
    }
}

struct KillOnDrop(Child);

impl Drop for KillOnDrop {
    fn drop(&mut self) {
        let _ = self.0.kill();
        let _ = self.0.wait();
    }
}

fn start_coordinator(dir: &Path) -> (KillOnDrop, String) {
    let coord_data = dir.join("coord-data");
    let out = run(&[
        "synth",
        "--n-per-class",
        "20",
        "--seed",
        "7",
        "--out-dir",
        coord_data.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let key_base = dir.join("coord");
    let out = run(&["keygen", "--name", key_base.to_str().unwrap(), "--seed", "11"]);
    assert_eq!(out.status.code(), Some(0));

    let child = bin()
        .args([
            "coordinator",
            "--listen-addr",
            "127.0.0.1:0",
            "--data-dir",
            coord_data.to_str().unwrap(),
            "--key-file",
            dir.join("coord.key").to_str().unwrap(),
            "--arch-depth",
            "2",
        ])
        .stdout(Stdio::piped())
        .stderr(Stdio::null())
        .spawn()
        .expect("spawn coordinator");
    let mut child = KillOnDrop(child);

    let stdout = child.0.stdout.take().expect("coordinator stdout");
    let mut reader = BufReader::new(stdout);
    let mut addr = None;
    for _ in 0..8 {
        let mut line = String::new();
        if reader.read_line(&mut line).unwrap() == 0 {
            break;
        }
        if let Some(rest) = line.trim().strip_prefix("listen=") {
            addr = Some(rest.to_string());
            break;
        }
    }
    let addr = addr.expect("coordinator printed listen=");
    (child, addr)
}

#[test]
fn live_round_over_tcp_records_decisions() {
    let dir = tempfile::tempdir().unwrap();
    let (_coordinator, addr) = start_coordinator(dir.path());

    let node_data = dir.path().join("node-1");
    let out = run(&[
        "synth",
        "--n-per-class",
        "20",
        "--seed",
        "8",
        "--out-dir",
        node_data.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));

    let pub_key = dir.path().join("coord.pub");
    let out = run(&[
        "node",
        "--coordinator-addr",
        &addr,
        "--data-dir",
        node_data.to_str().unwrap(),
        "--key-file",
        pub_key.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "stderr: {:?}", String::from_utf8_lossy(&out.stderr));
    let pairs = kv(&out.stdout);
    assert_eq!(pairs["node"], "node-1");
    assert!(pairs["epochs"].parse::<usize>().unwrap() > 0);
    let candidates: usize = pairs["candidates"].parse().unwrap();

    // Decisions only appear once a candidate arrived; the log line count
    // matches what the node reports.
    let log_path = dir.path().join("coord-data/decisions.log");
    if candidates > 0 {
        for _ in 0..50 {
            if log_path.exists()
                && fs::read_to_string(&log_path).unwrap().lines().count() >= candidates
            {
                break;
            }
            std::thread::sleep(std::time::Duration::from_millis(100));
        }
        let log = fs::read_to_string(&log_path).unwrap();
        assert_eq!(log.lines().count(), candidates);
        assert!(log.lines().all(|l| l.contains("origin=node-1")));
    }
}

#[test]
fn spooled_round_stages_files_before_sending() {
    let dir = tempfile::tempdir().unwrap();
    let (_coordinator, addr) = start_coordinator(dir.path());

    let node_data = dir.path().join("node-2");
    let out = run(&[
        "synth",
        "--n-per-class",
        "20",
        "--seed",
        "9",
        "--out-dir",
        node_data.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));

    let spool = dir.path().join("spool");
    let out = run(&[
        "node",
        "--coordinator-addr",
        &addr,
        "--data-dir",
        node_data.to_str().unwrap(),
        "--key-file",
        dir.path().join("coord.pub").to_str().unwrap(),
        "--spool-dir",
        spool.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "stderr: {:?}", String::from_utf8_lossy(&out.stderr));
    let pairs = kv(&out.stdout);
    let candidates: usize = pairs["candidates"].parse().unwrap();

    let inbox = spool.join("inbox");
    let sent = fs::read_dir(&inbox)
        .unwrap()
        .filter(|e| {
            e.as_ref()
                .unwrap()
                .file_name()
                .to_string_lossy()
                .ends_with(".dmdl.sent")
        })
        .count();
    assert_eq!(sent, candidates, "every sent candidate came off the spool");
    // Nothing is left pending.
    let pending = fs::read_dir(&inbox)
        .unwrap()
        .filter(|e| {
            e.as_ref()
                .unwrap()
                .file_name()
                .to_string_lossy()
                .ends_with(".dmdl")
        })
        .count();
    assert_eq!(pending, 0);
}
