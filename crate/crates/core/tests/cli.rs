use std::path::Path;
use std::process::Command;

fn ergolab(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_ergolab")).args(args).output().unwrap()
}

fn write_config(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_string_lossy().into_owned()
}

fn read(dir: &Path, name: &str) -> String {
    std::fs::read_to_string(dir.join(name)).unwrap()
}

const DUALITY: &str = "[map]\nfamily = \"boole_like\"\n[run]\ntrajectories = 20\ngrid_max = 2000\n";

#[test]
fn passing_run_writes_tables_and_metadata() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "d.toml", DUALITY);
    let out = tmp.path().join("out");
    let res = ergolab(&["duality", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(res.status.code(), Some(0), "{}", String::from_utf8_lossy(&res.stderr));
    let csv = read(&out, "duality_violations.csv");
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("statistic,n,value,se,verdict"));
    assert!(lines.next().unwrap().ends_with("pass:DUAL-EXACT"));
    let meta: toml::Table = read(&out, "run_metadata.toml").parse().unwrap();
    assert_eq!(meta["command"].as_str(), Some("duality"));
    assert_eq!(meta["trajectories"].as_integer(), Some(20));
    assert_eq!(meta["config_digest"].as_str().unwrap().len(), 64);
}

#[test]
fn failed_verdict_exits_with_one() {
    let tmp = tempfile::tempdir().unwrap();
    let text = "[map]\nfamily = \"thaler\"\ngamma = 0.5\n[tail]\nn_max = 1000\nslope_tol = 1e-9\n";
    let cfg = write_config(tmp.path(), "t.toml", text);
    let out = tmp.path().join("out");
    let res = ergolab(&["tail", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(res.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&res.stdout).contains("fail:TAIL-SLOPE"));
    assert!(read(&out, "tail_slope.csv").contains("fail:TAIL-SLOPE"));
}

#[test]
fn bad_input_exits_with_two() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "bad.toml", "[map]\nfamily = \"thaler\"\ngamma = 1.5\n");
    let res = ergolab(&["tail", "--config", &cfg, "--out", tmp.path().to_str().unwrap()]);
    assert_eq!(res.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&res.stderr).starts_with("error:"));
    let typo = write_config(tmp.path(), "typo.toml", "[map]\nfamily = \"boole_like\"\n[run]\ntrajectorys = 3\n");
    assert_eq!(ergolab(&["duality", "--config", &typo]).status.code(), Some(2));
    assert_eq!(ergolab(&["duality"]).status.code(), Some(2));
    assert_eq!(ergolab(&["no-such-command"]).status.code(), Some(2));
}

#[test]
fn overrides_and_thread_count() {
    let tmp = tempfile::tempdir().unwrap();
    let text = "[map]\nfamily = \"thaler\"\ngamma = 0.5\n[run]\ntrajectories = 40\ngrid_max = 100000\n";
    let cfg = write_config(tmp.path(), "s.toml", text);
    let run = |name: &str, extra: &[&str]| {
        let out = tmp.path().join(name);
        let mut args = vec!["simulate", "--config", &cfg, "--out", out.to_str().unwrap()];
        args.extend_from_slice(extra);
        assert_eq!(ergolab(&args).status.code(), Some(0));
        out
    };
    let one = run("one", &["--threads", "1", "--grid-max", "4096"]);
    let three = run("three", &["--threads", "3", "--grid-max", "4096"]);
    let reseeded = run("seed", &["--threads", "1", "--grid-max", "4096", "--seed", "99"]);
    let mean = read(&one, "occupation_mean.csv");
    assert_eq!(mean, read(&three, "occupation_mean.csv"));
    assert_ne!(mean, read(&reseeded, "occupation_mean.csv"));
    assert_eq!(mean.lines().last().unwrap().split(',').nth(1), Some("4096"));
    let digest = |d: &Path| read(d, "run_metadata.toml").lines().find(|l| l.starts_with("config_digest")).unwrap().to_string();
    assert_eq!(digest(&one), digest(&three));
    assert_ne!(digest(&one), digest(&reseeded));
}
