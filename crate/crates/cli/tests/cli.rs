use std::process::{Command, Output};

use meshnoc_cli::CSV_HEADER;

fn meshnoc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_meshnoc"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn header_matches_golden_file() {
    let golden = include_str!("golden/sweep_header.csv");
    assert_eq!(CSV_HEADER, golden.trim_end());

    let o = meshnoc(&[
        "sweep",
        "--cols",
        "2",
        "--rows",
        "2",
        "--rates",
        "0.05,0.1",
        "--measure",
        "100",
        "--warmup",
        "20",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some(golden.trim_end()));
    assert_eq!(lines.count(), 2);
}

#[test]
fn golden_exits_zero_with_monitor_lines() {
    let o = meshnoc(&["golden"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    assert!(text.contains("cycle 7, returned=00000000, expected=000"));
    assert!(text.contains("cycle 9, returned=00000002, expected=002"));
}

#[test]
fn configuration_errors_exit_two() {
    assert_eq!(meshnoc(&["bounds", "--k", "1"]).status.code(), Some(2));
    assert_eq!(
        meshnoc(&["sweep", "--cols", "2", "--rows", "2"])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(
        meshnoc(&["sweep", "--rates", "0.3,0.1"]).status.code(),
        Some(2)
    );
    assert_eq!(
        meshnoc(&["sweep", "--rates", "0.1", "--pattern", "zigzag"])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(meshnoc(&["frobnicate"]).status.code(), Some(2));
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("missing").join("out.csv");
    let o = meshnoc(&["sweep", "--rates", "0.1", "--output", bad.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("cannot write"));
}

#[test]
fn config_file_mirrors_flags() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("plan.toml");
    let out = dir.path().join("curve.csv");
    std::fs::write(
        &cfg,
        format!(
            "cols = 2\nrows = 2\npattern = \"nearest-neighbor\"\nrates = [0.05, 0.1, 0.2]\n\
             seeds = [7]\nrouter_fifo_depth = 3\nendpoint_fifo_depth = 4\ncredits = 8\n\
             warmup = 20\nmeasure = 100\nload_fraction = 0.5\nmax_cycles = 5000\noutput = {:?}\n",
            out.to_str().unwrap()
        ),
    )
    .unwrap();
    let o = meshnoc(&["sweep", "--config", cfg.to_str().unwrap(), "--seeds", "9"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let mut r = csv::Reader::from_path(&out).unwrap();
    let rows: Vec<meshnoc_cli::SweepRow> = r.deserialize().map(Result::unwrap).collect();
    assert_eq!(rows.len(), 3);
    assert!(rows
        .iter()
        .all(|x| x.seed == 9 && x.pattern == "nearest-neighbor"));

    std::fs::write(&cfg, "cols = 2\nspeed = 3\n").unwrap();
    let o = meshnoc(&["sweep", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn bounds_and_demos_print() {
    let o = meshnoc(&["bounds", "--k", "16"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("1 per 4 cycles"));
    let o = meshnoc(&["ordering-demo"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("overtook"));
    let o = meshnoc(&["freeze-demo"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("freeze=1"));
}
