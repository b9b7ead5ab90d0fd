use std::process::{Command, Output};

fn vortex(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_vortex"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(args: &[&str]) -> String {
    let out = vortex(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn first_number(s: &str) -> f64 {
    s.lines().next().unwrap().trim().parse().unwrap()
}

#[test]
fn exact_fixation_example() {
    let out = stdout(&[
        "fixation",
        "--method",
        "exact",
        "--b",
        "2",
        "--d",
        "1",
        "--c",
        "0.5",
        "--delta",
        "0",
        "--delta-prime",
        "0",
        "--k",
        "3",
        "--m",
        "2",
        "--n",
        "1",
        "--nmax",
        "80",
    ]);
    assert!((first_number(&out) - 1.0 / 3.0).abs() <= 1e-8);
}

#[test]
fn neutral_tau_example() {
    let out = stdout(&[
        "tau",
        "--b",
        "1",
        "--d",
        "1",
        "--c",
        "1",
        "--delta",
        "0",
        "--delta-prime",
        "0",
        "--mu",
        "0.5",
    ]);
    let tau: f64 = out
        .lines()
        .next()
        .unwrap()
        .strip_prefix("tau = ")
        .unwrap()
        .parse()
        .unwrap();
    assert!((tau - 0.5).abs() <= 1e-8);
}

#[test]
fn first_order_close_to_exact() {
    let common = [
        "--b",
        "0.02",
        "--d",
        "1",
        "--c",
        "1",
        "--delta",
        "0.01",
        "--delta-prime",
        "0.02",
        "--k",
        "3",
        "--m",
        "2",
        "--n",
        "1",
    ];
    let run = |method: &str, nmax: &str| {
        let mut args = vec!["fixation", "--method", method, "--nmax", nmax];
        args.extend(common);
        first_number(&stdout(&args))
    };
    let (fo, ex) = (run("first-order", "20"), run("exact", "40"));
    assert!((fo - ex).abs() < 1e-4, "{fo} vs {ex}");
}

#[test]
fn stationary_csv_sums_to_one() {
    let out = stdout(&["stationary", "--b", "2", "--d", "1", "--c", "0.5"]);
    let mut lines = out.lines().skip_while(|l| l.starts_with('#'));
    assert_eq!(lines.next(), Some("N,prob"));
    let total: f64 = lines
        .map(|l| l.split(',').nth(1).unwrap().parse::<f64>().unwrap())
        .sum();
    assert!((total - 1.0).abs() < 1e-12);
}

#[test]
fn vortex_curve_small_b_decreasing() {
    let out = stdout(&[
        "vortex-curve",
        "--b",
        "0.5",
        "--c",
        "1",
        "--delta",
        "0.05",
        "--delta-prime",
        "0.1",
        "--mu",
        "1",
        "--d-grid",
        "0.5:3:0.5",
        "--method",
        "linear",
    ]);
    let mut lines = out.lines();
    assert!(lines
        .next()
        .unwrap()
        .starts_with("# b=0.5 c=1 delta=0.05 delta_prime=0.1 mu=1"));
    assert_eq!(lines.next(), Some("d,tau,T"));
    let t: Vec<f64> = lines
        .map(|l| l.split(',').nth(2).unwrap().parse().unwrap())
        .collect();
    assert_eq!(t.len(), 6);
    assert!(t.windows(2).all(|w| w[1] < w[0]), "{t:?}");
}

#[test]
fn vortex_curve_figure_regime() {
    // Coarse version of the b = 10, c = 0.1 grid; the full grid runs in the acceptance suite.
    let out = stdout(&[
        "vortex-curve",
        "--b",
        "10",
        "--c",
        "0.1",
        "--delta",
        "0",
        "--delta-prime",
        "0.1",
        "--mu",
        "1",
        "--d-grid",
        "0.5:3:1.25",
    ]);
    let t: Vec<f64> = out
        .lines()
        .skip(2)
        .map(|l| l.split(',').nth(2).unwrap().parse().unwrap())
        .collect();
    assert_eq!(t.len(), 3);
    assert!(t.windows(2).all(|w| w[1] < w[0]), "{t:?}");
}

#[test]
fn exit_codes() {
    let bad = vortex(&[
        "fixation", "--b", "-1", "--d", "1", "--c", "1", "--k", "1", "--m", "1", "--n", "1",
    ]);
    assert_eq!(bad.status.code(), Some(1));
    let msg = String::from_utf8(bad.stderr).unwrap();
    assert_eq!(msg.lines().count(), 1);
    assert!(msg.starts_with("error: validation:"));

    let unknown = vortex(&["tau", "--b", "1", "--d", "1", "--c", "1", "--bogus", "2"]);
    assert_eq!(unknown.status.code(), Some(1));

    let over = vortex(&[
        "tau",
        "--b",
        "1",
        "--d",
        "1",
        "--c",
        "1",
        "--delta",
        "0.2",
        "--delta-prime",
        "0.1",
    ]);
    assert_eq!(over.status.code(), Some(1));

    let censored = vortex(&[
        "fixation",
        "--method",
        "mc",
        "--b",
        "2",
        "--d",
        "1",
        "--c",
        "0.5",
        "--k",
        "10",
        "--m",
        "10",
        "--n",
        "10",
        "--reps",
        "20",
        "--event-cap",
        "3",
    ]);
    assert_eq!(censored.status.code(), Some(2));
    assert!(String::from_utf8(censored.stderr)
        .unwrap()
        .starts_with("error: numerical:"));

    let tiny = vortex(&[
        "fixation", "--b", "1", "--d", "1", "--c", "1", "--k", "5", "--m", "5", "--n", "5",
        "--nmax", "3",
    ]);
    assert_eq!(tiny.status.code(), Some(1));

    let ok = vortex(&["verify", "--only", "6,7"]);
    assert_eq!(ok.status.code(), Some(0));
    assert_eq!(
        String::from_utf8(ok.stdout)
            .unwrap()
            .lines()
            .filter(|l| l.starts_with("[PASS]"))
            .count(),
        2
    );
}

#[test]
fn seeded_commands_byte_identical_across_workers() {
    let cases: Vec<Vec<&str>> = vec![
        vec![
            "simulate",
            "--b",
            "2",
            "--d",
            "1",
            "--c",
            "0.5",
            "--delta",
            "0.1",
            "--delta-prime",
            "0.2",
            "--k",
            "4",
            "--m",
            "2",
            "--n",
            "1",
            "--seed",
            "9",
        ],
        vec![
            "fixation", "--method", "mc", "--b", "2", "--d", "1", "--c", "0.5", "--k", "3", "--m",
            "2", "--n", "1", "--reps", "3000", "--seed", "4",
        ],
        vec![
            "meltdown",
            "--b",
            "0.02",
            "--d",
            "0.5",
            "--c",
            "1",
            "--delta",
            "0.01",
            "--delta-prime",
            "0.02",
            "--reps",
            "20000",
            "--seed",
            "2",
        ],
        vec![
            "meltdown",
            "--b",
            "0.02",
            "--d",
            "0.5",
            "--c",
            "1",
            "--delta",
            "0.01",
            "--delta-prime",
            "0.02",
            "--seed",
            "2",
        ],
        vec![
            "micro",
            "--b",
            "2",
            "--d",
            "1",
            "--c",
            "0.5",
            "--mu",
            "0.3",
            "--delta",
            "0.01",
            "--delta-prime",
            "0.02",
            "--t-end",
            "40",
            "--seed",
            "6",
        ],
        vec![
            "vortex-curve",
            "--b",
            "0.02",
            "--c",
            "1",
            "--delta",
            "0.01",
            "--delta-prime",
            "0.02",
            "--d-grid",
            "0.5:3:0.5",
            "--method",
            "linear",
        ],
    ];
    for case in cases {
        let runs: Vec<String> = ["1", "3", "1"]
            .iter()
            .map(|w| {
                let mut args = vec!["--workers", *w];
                args.extend(&case);
                stdout(&args)
            })
            .collect();
        assert!(!runs[0].is_empty());
        assert_eq!(runs[0], runs[1], "{case:?} differs across worker counts");
        assert_eq!(runs[0], runs[2], "{case:?} differs between repeats");
    }
}

#[test]
fn out_flag_writes_file() {
    let dir = std::env::temp_dir().join(format!("vortex-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("law.csv");
    let printed = stdout(&["stationary", "--b", "1", "--d", "0", "--c", "1"]);
    stdout(&[
        "stationary",
        "--b",
        "1",
        "--d",
        "0",
        "--c",
        "1",
        "--out",
        path.to_str().unwrap(),
    ]);
    assert_eq!(std::fs::read_to_string(&path).unwrap(), printed);
    std::fs::remove_dir_all(dir).unwrap();
}
