use std::process::{Command, Output};

fn tiwork(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tiwork"))
        .args(args)
        .output()
        .expect("spawn tiwork")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn check_builtin_f_is_uniform() {
    let o = tiwork(&["check", "builtin:F"]);
    assert!(o.status.success());
    let s = stdout(&o);
    assert!(s.contains("correct: true"), "{s}");
    assert!(s.contains("non-complete: true"), "{s}");
    assert!(s.contains("uniform: true"), "{s}");
}

#[test]
fn check_uncorrected_g_is_not_uniform() {
    let o = tiwork(&["check", "--sharing", "builtin:G_uncorrected"]);
    assert!(o.status.success());
    assert!(stdout(&o).contains("uniform: false"));
}

#[test]
fn encrypt_reference_vector() {
    let o = tiwork(&["encrypt", "--pt", "0", "--key", "0"]);
    assert!(o.status.success());
    assert_eq!(stdout(&o).trim(), "5579C1387B228445");
    let o = tiwork(&["encrypt", "--pt", "0", "--key", "0", "--ti", "--mode", "triggered", "--seed", "9"]);
    assert_eq!(stdout(&o).trim(), "5579C1387B228445");
}

#[test]
fn overclocked_encryption_is_a_data_error() {
    let o = tiwork(&["encrypt", "--pt", "0", "--key", "0", "--ti", "--mode", "overclocked"]);
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(String::from_utf8_lossy(&o.stderr).lines().count(), 1);
}

#[test]
fn unknown_config_key_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    std::fs::write(&cfg, "seed = 1\ncolour = blue\n").unwrap();
    let o = tiwork(&["--config", cfg.to_str().unwrap(), "check", "builtin:F"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("colour"));
}

#[test]
fn bad_flags_exit_1_and_help_exits_0() {
    assert_eq!(tiwork(&["check", "--nope"]).status.code(), Some(1));
    assert_eq!(tiwork(&["--help"]).status.code(), Some(0));
    assert_eq!(tiwork(&["check", "builtin:H"]).status.code(), Some(1));
}

#[test]
fn share_round_trips_through_check() {
    let dir = tempfile::tempdir().unwrap();
    let f = dir.path().join("g.txt");
    let o = tiwork(&["share", "--table", "7E92B04D5CA1836F", "--plain", "--out", f.to_str().unwrap()]);
    assert!(o.status.success());
    let o = tiwork(&["check", f.to_str().unwrap(), "--table", "7E92B04D5CA1836F"]);
    let s = stdout(&o);
    assert!(s.contains("correct: true") && s.contains("non-complete: true"), "{s}");
}

#[test]
fn campaign_then_ttest_and_attack() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    std::fs::write(&cfg, "n_traces = 3000\nprng = off\nseed = 4\n").unwrap();
    let traces = dir.path().join("t.bin");
    let c = cfg.to_str().unwrap();
    let t = traces.to_str().unwrap();
    let o = tiwork(&["--config", c, "campaign", "--out", t]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let meta = std::fs::read_to_string(dir.path().join("t.bin.csv")).unwrap();
    assert!(meta.starts_with("# tiwork "));
    assert_eq!(meta.lines().count(), 3002);

    let csv = dir.path().join("t.csv");
    let o = tiwork(&["ttest", "--in", t, "--order", "1", "--out", csv.to_str().unwrap()]);
    assert!(o.status.success());
    let body = std::fs::read_to_string(&csv).unwrap();
    assert!(body.lines().nth(1).unwrap().starts_with("sample,t_m1"));

    let o = tiwork(&["dpa", "--in", t, "--key", "0123456789ABCDEF0123"]);
    assert!(o.status.success());
    assert!(stdout(&o).starts_with("# tiwork "));
}

#[test]
fn netlist_generation_parses_back() {
    let o = tiwork(&["netlist", "gen-sharedg"]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(text.contains("cb2_g1"));
    let n: tiwork::netlist::Netlist = text.parse().unwrap();
    assert_eq!(n.inputs().len(), 12);
}

#[test]
fn sweep_with_nominal_delays_never_triggers() {
    let o = tiwork(&["netlist", "sweep", "--vectors", "300", "--steps", "41"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let s = stdout(&o);
    assert!(s.contains("ordered: true"), "{s}");
    assert!(!s.contains('③'), "{s}");
}
