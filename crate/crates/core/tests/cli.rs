use std::process::{Command, Output};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_sparsedetect"));
    c.env_remove("SPARSEDETECT_SEED");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn tmp(name: &str) -> std::path::PathBuf {
    let dir = std::env::temp_dir().join(format!("sparsedetect-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir.join(name)
}

const SMALL: [&str; 8] = ["--n-streams", "10", "--window-k1", "5", "--trials", "6", "--format", "csv"];

#[test]
fn bounds_prints_regime_and_value() {
    let o = run(&["bounds", "--beta", "0.35", "--zeta", "0.4"]);
    assert_eq!(o.status.code(), Some(0));
    let s = stdout(&o);
    assert!(s.contains("moderate") && s.contains("0.460517"), "{s}");

    let o = run(&["bounds", "--beta", "0.7", "--zeta", "0.5", "--subset-size", "2", "--format", "csv"]);
    assert!(stdout(&o).lines().any(|l| l.contains("delay_lower_bound,10,")));
}

#[test]
fn config_errors_exit_2() {
    assert_eq!(run(&["bounds", "--beta", "0.5", "--zeta", "0.5"]).status.code(), Some(2));
    assert_eq!(run(&["calibrate", "--lambda2", "0"]).status.code(), Some(2));
    assert_eq!(run(&["delay", "--threshold", "5", "--subset-sizes", "0"]).status.code(), Some(2));
    assert_eq!(run(&["delay"]).status.code(), Some(2));
    assert_eq!(run(&["calibrate", "--model", "poisson", "--rule", "sl1"]).status.code(), Some(2));
    assert_eq!(run(&["table", "7"]).status.code(), Some(2));
    assert_eq!(run(&["calibrate", "--format", "xml"]).status.code(), Some(2));
}

#[test]
fn calibration_failure_exits_3() {
    // Every threshold in this bracket stops at once, so the target cannot be met.
    let cfg = write_config("bracket.cfg", "bracket_lo = -60\nbracket_hi = -50\ngamma = 50\n");
    let mut args = vec!["calibrate", "--config", cfg];
    args.extend(SMALL);
    let o = run(&args);
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(String::from_utf8_lossy(&o.stderr).contains("does not bracket"));
    assert!(stdout(&o).contains(",threshold,NaN,"));
}

fn write_config(name: &str, text: &str) -> &'static str {
    let path = tmp(name);
    std::fs::write(&path, text).unwrap();
    Box::leak(path.to_string_lossy().into_owned().into_boxed_str())
}

#[test]
fn flags_override_config_and_env_seed() {
    let cfg = write_config("delay.cfg", "# reference run\nthreshold = 4\nsubset_sizes = 10\nseed = 11\n");
    let base = ["delay", "--config", cfg, "--n-streams", "10", "--window-k1", "5", "--trials", "6", "--format", "csv"];

    let from_file = stdout(&run(&base));
    assert!(from_file.lines().nth(1).unwrap().ends_with(",6,11"), "{from_file}");

    let o = bin().args(base).env("SPARSEDETECT_SEED", "99").output().unwrap();
    assert_eq!(stdout(&o), from_file, "file seed beats the env default");

    let mut with_flag = base.to_vec();
    with_flag.extend(["--seed", "12", "--threshold", "-1e9"]);
    let s = stdout(&run(&with_flag));
    let row = s.lines().nth(1).unwrap();
    assert!(row.ends_with(",6,12") && row.contains(",-1e9,delay,1,"), "{row}");

    let no_seed = write_config("noseed.cfg", "threshold = 4\nsubset_sizes = 10\n");
    let o = bin()
        .args(["delay", "--config", no_seed, "--n-streams", "10", "--window-k1", "5", "--trials", "6", "--format", "csv"])
        .env("SPARSEDETECT_SEED", "99")
        .output()
        .unwrap();
    assert!(stdout(&o).lines().nth(1).unwrap().ends_with(",6,99"));
}

#[test]
fn out_file_gets_csv_and_stdout_text() {
    let out = tmp("delay.csv");
    let o = run(&[
        "delay", "--threshold", "3", "--n-streams", "10", "--window-k1", "5", "--trials", "6", "--subset-sizes", "1,10",
        "--out", out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0));
    let csv = std::fs::read_to_string(&out).unwrap();
    let lines: Vec<_> = csv.lines().collect();
    assert_eq!(lines[0], "rule,params,model,subset_size,threshold,metric,value,std_error,trials,seed");
    assert!(lines.len() >= 3);
    let text = stdout(&o);
    assert!(text.contains('±') && !text.contains(",delay,"), "{text}");
}

#[test]
fn results_do_not_depend_on_workers() {
    let mut args = vec!["calibrate", "--gamma", "40", "--n-streams", "10", "--window-k1", "5", "--trials", "24"];
    args.extend(["--format", "csv"]);
    let one = run(&[args.as_slice(), &["--workers", "1"]].concat());
    let three = run(&[args.as_slice(), &["--workers", "3"]].concat());
    assert_eq!(one.status.code(), Some(0), "{}", String::from_utf8_lossy(&one.stderr));
    assert_eq!(one.stdout, three.stdout);
}
