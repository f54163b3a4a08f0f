use std::fs;
use std::process::{Command, Output};

fn bwconv(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bwconv"))
        .args(args)
        .env("RUST_LOG", "error")
        .output()
        .expect("run bwconv")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn vgg19_low_voltage_row() {
    let o = bwconv(&["--format", "csv", "network", "vgg19", "--vdd", "0.6"]);
    assert!(o.status.success());
    let text = stdout(&o);
    let row: Vec<&str> = text.lines().nth(1).unwrap().split(',').collect();
    assert_eq!(row[0], "vgg19");
    let en_eff: f64 = row[2].parse().unwrap();
    let theta: f64 = row[3].parse().unwrap();
    let energy: f64 = row[5].parse().unwrap();
    assert!((en_eff / 55.9 - 1.0).abs() <= 0.10, "{en_eff}");
    assert!((theta / 18.9 - 1.0).abs() <= 0.10, "{theta}");
    assert!((energy / 684.0 - 1.0).abs() <= 0.10, "{energy}");
}

#[test]
fn empty_network_is_fine() {
    let dir = tempfile::tempdir().unwrap();
    let net = dir.path().join("empty.net");
    fs::write(&net, "network empty\ninput 3 32 32\n").unwrap();
    let o = bwconv(&["network", net.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("empty"));
}

#[test]
fn invalid_inputs_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.net");
    fs::write(&bad, "network bad\nl1 3 8 16 16 3 same\nl2 4 8 16 16 3 same\n").unwrap();
    for args in [
        vec!["network", bad.to_str().unwrap()],
        vec!["network", "no-such-net"],
        vec!["network", "vgg19", "--vdd", "2.0"],
        vec!["--variant", "nope", "points"],
        vec!["simulate", "--layer", "3,4,8"],
        vec!["simulate", "--layer", "3,4,16,16,9"],
        vec!["simulate", "--layer", "3,4,4,4,7,valid"],
        vec!["frobnicate"],
    ] {
        let o = bwconv(&args);
        assert_eq!(o.status.code(), Some(1), "{args:?}");
        let err = String::from_utf8_lossy(&o.stderr);
        assert_eq!(err.trim_end().lines().count(), 1, "{args:?}: {err}");
    }
}

#[test]
fn simulate_verifies_against_golden() {
    let o = bwconv(&["--format", "json", "simulate", "--verify", "--layer", "12,20,13,11,5", "--seed", "3"]);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["verified"], true);
    assert_eq!(v["mismatches"], 0);
    assert!(v["max_active_banks"].as_u64().unwrap() <= 7);
}

#[test]
fn split_kernel_verifies() {
    let o = bwconv(&["simulate", "--split", "--verify", "--layer", "2,2,14,14,11"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn mismatching_fixture_exits_two() {
    // Strict saturation per block versus the whole-layer strict reference
    // differs once a layer spans several input blocks with saturating sums.
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("accel.toml");
    fs::write(&cfg, "n_ch = 1\n").unwrap();
    let input = dir.path().join("in.fxt");
    let mut t = String::from("FXT1 Q2.9 2 7 7\n");
    for v in ["2047", "-2048"] {
        t.push_str(&format!("{}\n", [v; 7].join(" ")).repeat(7));
    }
    fs::write(&input, &t).unwrap();
    let filters = dir.path().join("f.bwf");
    fs::write(&filters, format!("BWF1 1 2 7\n{}", "+++++++\n".repeat(14))).unwrap();
    let o = bwconv(&[
        "--config",
        cfg.to_str().unwrap(),
        "simulate",
        "--strict",
        "--verify",
        "--input",
        input.to_str().unwrap(),
        "--filters",
        filters.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(2), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn out_dir_is_deterministic() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for d in [&a, &b] {
        let o = bwconv(&[
            "--out",
            d.path().to_str().unwrap(),
            "simulate",
            "--layer",
            "4,6,9,9,3",
            "--seed",
            "7",
            "--trace",
        ]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    for f in ["manifest.json", "simulate.txt", "output.fxt", "banks.txt", "trace.txt"] {
        let x = fs::read(a.path().join(f)).unwrap();
        let y = fs::read(b.path().join(f)).unwrap();
        assert_eq!(x, y, "{f}");
    }
    let m: serde_json::Value = serde_json::from_slice(&fs::read(a.path().join("manifest.json")).unwrap()).unwrap();
    assert_eq!(m["status"], "ok");
    assert_eq!(m["args"]["seed"], 7);
    assert_eq!(m["outputs"].as_array().unwrap().len(), 4);
}

#[test]
fn sweep_order_is_fixed() {
    let o = bwconv(&["--format", "csv", "sweep", "--network", "bc-svhn,bc-cifar10", "--vdd", "1.2,0.6"]);
    assert!(o.status.success());
    let names: Vec<String> = stdout(&o)
        .lines()
        .skip(1)
        .map(|l| {
            let c: Vec<&str> = l.split(',').collect();
            format!("{}@{}", c[0], c[6])
        })
        .collect();
    assert_eq!(names, ["bc-svhn@1.2", "bc-cifar10@1.2", "bc-svhn@0.6", "bc-cifar10@0.6"]);
}
