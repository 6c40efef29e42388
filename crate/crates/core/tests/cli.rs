use std::path::PathBuf;
use std::process::{Command, Output};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_optstop"));
    c.env_remove("OPTSTOP_LOG");
    c
}

fn example(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("examples").join(format!("{name}.json"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn tmp(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join(name)
}

#[test]
fn solve_prints_threshold() {
    let o = run(&["solve", "--config", example("taylor_bm").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("x* = 1.0000000000"), "{}", stdout(&o));
}

#[test]
fn solve_writes_value_table() {
    let out = tmp("taylor_values.csv");
    let o = run(&["solve", "--config", example("taylor_bm").to_str().unwrap(), "--out", out.to_str().unwrap(), "--samples", "11"]);
    assert_eq!(o.status.code(), Some(0));
    let csv = std::fs::read_to_string(out).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("x,g,v,in_stopping_region,dv_left,dv_right"));
    assert_eq!(lines.count(), 11);
}

#[test]
fn quintic_prints_three_continuation_intervals() {
    let o = run(&["solve", "--config", example("quintic_bm").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    let line = text.lines().find(|l| l.starts_with("continuation:")).unwrap();
    assert_eq!(line.matches('∪').count(), 2, "{line}");
}

#[test]
fn plot_csv_is_deterministic_and_matches_reward_beyond_threshold() {
    let cfg = example("taylor_bm");
    let args = ["plot", "--config", cfg.to_str().unwrap(), "--range", "-2:3", "--samples", "51"];
    let (a, b) = (run(&args), run(&args));
    assert_eq!(a.stdout, b.stdout);
    let text = stdout(&a);
    for line in text.lines().skip(1) {
        let f: Vec<&str> = line.split(',').collect();
        let (x, g, v): (f64, f64, f64) = (f[0].parse().unwrap(), f[1].parse().unwrap(), f[2].parse().unwrap());
        assert_eq!(f[3] == "true", x >= 1.0);
        if x >= 1.0 {
            assert_eq!(v, g);
        } else {
            assert!((v - (x - 1.0).exp()).abs() < 1e-12);
        }
    }
}

#[test]
fn plot_svg_when_extension_says_so() {
    let out = tmp("abs.svg");
    let o = run(&["plot", "--config", example("abs_two_sided_mu0").to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let svg = std::fs::read_to_string(out).unwrap();
    assert!(svg.starts_with("<svg") && svg.contains("stroke=\"gray\""));
}

#[test]
fn sticky_kink_shows_in_derivative_columns() {
    let o = run(&["plot", "--config", example("sticky_bm").to_str().unwrap(), "--range", "-1:1", "--samples", "3"]);
    let text = stdout(&o);
    let at_zero = text.lines().find(|l| l.starts_with("0.0,")).unwrap();
    let f: Vec<f64> = at_zero.split(',').skip(4).map(|s| s.parse().unwrap()).collect();
    assert!((f[0] - f[1]).abs() > 0.1, "{at_zero}");
}

#[test]
fn green_rows() {
    let o = run(&["green", "--config", example("taylor_bm").to_str().unwrap(), "--x", "0", "--range", "-1:1", "--samples", "3"]);
    assert_eq!(stdout(&o), "y,green,density\n-1.0,0.18393972058572117,0.36787944117144233\n0.0,0.5,1.0\n1.0,0.18393972058572117,0.36787944117144233\n");

    let o = run(&["green", "--config", example("ou_jump_no_jumps").to_str().unwrap(), "--x", "0.3"]);
    assert_eq!(o.status.code(), Some(0));
    let rows: Vec<(f64, f64)> = stdout(&o)
        .lines()
        .skip(1)
        .map(|l| {
            let f: Vec<f64> = l.split(',').map(|s| s.parse().unwrap()).collect();
            (f[0], f[1])
        })
        .collect();
    let dy = rows[1].0 - rows[0].0;
    let mass: f64 = rows.iter().map(|r| r.1).sum::<f64>() * dy;
    assert!((mass - 1.0).abs() < 0.01, "{mass}");
    assert!(rows.iter().all(|r| r.1 >= -1e-6));
}

#[test]
fn smoothfit_table() {
    let o = run(&["smoothfit", "--config", example("skew_bm").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    assert!(text.contains("quantity,continuation_side,stopping_side,smooth"));
    assert!(text.lines().filter(|l| l.ends_with(",true")).count() == 3, "{text}");
    let o = run(&["smoothfit", "--config", example("quintic_bm").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn verify_small_batch() {
    let o = run(&["verify", "--config", example("taylor_bm").to_str().unwrap(), "--samples", "4000", "--seed", "7"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    assert!(text.contains("rule,mean,std_err"));
    assert!(text.contains("dominance holds"));
}

#[test]
fn exit_codes() {
    assert_eq!(run(&[]).status.code(), Some(1));
    assert_eq!(run(&["solve"]).status.code(), Some(1));
    assert_eq!(run(&["solve", "--config", "/no/such/file.json"]).status.code(), Some(1));
    assert_eq!(run(&["--help"]).status.code(), Some(0));
    assert_eq!(run(&["plot", "--config", example("taylor_bm").to_str().unwrap(), "--range", "3:1"]).status.code(), Some(1));

    // a right-sided solve of a put: the majorant hypothesis fails
    let cfg = tmp("put_right.json");
    std::fs::write(
        &cfg,
        r#"{ "process": { "name": "bm" }, "reward": { "form": "put", "k": 1 }, "alpha": 0.5,
             "solver": { "method": "one_sided", "side": "right", "bracket": { "lo": -3, "hi": 0.9 } } }"#,
    )
    .unwrap();
    let o = run(&["solve", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn config_errors_name_the_line() {
    let cfg = tmp("bad.json");
    std::fs::write(&cfg, "{\n  \"process\": { \"name\": \"bm\" },\n  \"alfa\": 1\n}\n").unwrap();
    let o = run(&["solve", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("line 3") && err.contains("alfa"), "{err}");
}

#[test]
fn log_level_from_environment() {
    let o = bin().env("OPTSTOP_LOG", "info").args(["solve", "--config", example("taylor_bm").to_str().unwrap()]).output().unwrap();
    assert!(String::from_utf8_lossy(&o.stderr).contains("INFO"));
    let o = run(&["solve", "--config", example("taylor_bm").to_str().unwrap()]);
    assert!(o.stderr.is_empty());
}
