use std::path::Path;
use std::process::{Command, Output};

fn run(bin: &str, args: &[&str]) -> Output {
    Command::new(bin).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn root(dir: &Path) -> String {
    dir.join("mb").display().to_string()
}

const RUN: &str = env!("CARGO_BIN_EXE_fcm-run");
const BENCH: &str = env!("CARGO_BIN_EXE_fcm-bench");
const MSG: &str = env!("CARGO_BIN_EXE_fcm-msg");

#[test]
fn every_rank_sees_its_own_environment() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("ranks");
    std::fs::create_dir(&out).unwrap();
    let script = format!("echo $FCM_RANK/$FCM_SIZE > {}/$FCM_RANK", out.display());
    let o = run(RUN, &["--triples", "2x2", "--root", &root(dir.path()), "--", "sh", "-c", &script]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    for r in 0..4 {
        assert_eq!(std::fs::read_to_string(out.join(r.to_string())).unwrap(), format!("{r}/4\n"));
    }
}

#[test]
fn failing_rank_status_propagates() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(
        RUN,
        &["--triples", "1x3", "--root", &root(dir.path()), "--", "sh", "-c", "[ $FCM_RANK = 1 ] && exit 3; exit 0"],
    );
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn hello_over_four_ranks() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(RUN, &["--triples", "2x2", "--root", &root(dir.path()), "--", MSG, "hello"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(stdout(&o).lines().count(), 4);
}

#[test]
fn dry_run_resolves_hostfile_placement() {
    let dir = tempfile::tempdir().unwrap();
    let hosts = dir.path().join("hosts");
    std::fs::write(&hosts, "a\nb\n").unwrap();
    let o = run(
        RUN,
        &["--hostfile", hosts.to_str().unwrap(), "--size", "5", "--root", &root(dir.path()), "--dry-run", "--", "true"],
    );
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(text.contains("node-of: [0, 0, 1, 1, 1]"), "{text}");
    assert_eq!(text.lines().filter(|l| l.starts_with("rank ")).count(), 5);
}

#[test]
fn conflicting_size_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(RUN, &["--triples", "2x2", "--size", "3", "--root", &root(dir.path()), "--dry-run", "--", "true"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn batch_script_reproduces_the_launch() {
    let dir = tempfile::tempdir().unwrap();
    let job = dir.path().join("job.sh");
    let o = run(
        RUN,
        &["--triples", "2x3", "--root", &root(dir.path()), "--emit-batch", job.to_str().unwrap(), "--", "prog", "x"],
    );
    assert!(o.status.success());
    let text = std::fs::read_to_string(job).unwrap();
    assert!(text.contains("--nodes=2") && text.contains("--ntasks=6") && text.contains("--ntasks-per-node=3"));
    assert!(text.contains("--triples 2x3") && text.trim_end().ends_with("-- prog x"), "{text}");
}

#[test]
fn map_dump_prints_owned_extents() {
    let o = run(BENCH, &["map-dump", "--dims", "6,4", "--grid", "2,2", "--dists", "block,cyclic"]);
    assert!(o.status.success());
    assert_eq!(
        stdout(&o),
        "rank 0: [0,3) x [0,1),[2,3)\nrank 1: [0,3) x [1,2),[3,4)\nrank 2: [3,6) x [0,1),[2,3)\nrank 3: [3,6) x [1,2),[3,4)\n"
    );
}

#[test]
fn probe_and_purge() {
    let dir = tempfile::tempdir().unwrap();
    let mb = root(dir.path());
    let env = |rank: &str| {
        let mut c = Command::new(MSG);
        c.env("FCM_RANK", rank).env("FCM_SIZE", "2").env("FCM_ROOT", &mb);
        c.env("FCM_MODE", "shared-dir").env("FCM_NODEMAP", "triples:1x2");
        c
    };
    assert!(env("0").args(["send", "--to", "1", "--tag", "9", "--text", "x"]).status().unwrap().success());
    assert_eq!(env("1").args(["probe", "--from", "0", "--tag", "9"]).status().unwrap().code(), Some(0));
    assert!(env("1").arg("purge").status().unwrap().success());
    assert_eq!(env("1").args(["probe", "--from", "0", "--tag", "9"]).status().unwrap().code(), Some(1));
}
