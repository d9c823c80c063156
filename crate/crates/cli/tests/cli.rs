use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use pabcd::Problem64;

fn pabcd(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pabcd")).args(args).output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn write_config(dir: &Path, name: &str, body: &str) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, format!("version = 1\n{body}")).unwrap();
    path
}

fn report(path: &Path) -> toml::Table {
    fs::read_to_string(path).unwrap().parse().unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

const SCALAR_PROBLEM: &str = r#"format = "pabcd-problem"
version = 1
block_sizes = [1]
q = [[100.0]]
r = [0.0]
lower = [-inf]
upper = [inf]
delay_bounds = [[0]]
update_bounds = [0]
"#;

#[test]
fn generate_benchmark_instance() {
    let tmp = tempfile::tempdir().unwrap();
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    let o = pabcd(&["generate", "--seed", "4", "--out", s(&a)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let printed: f64 = stdout(&o)
        .lines()
        .find_map(|l| l.strip_prefix("L_global "))
        .and_then(|v| v.parse().ok())
        .unwrap();
    assert!((printed - 100.0).abs() <= 1e-9 * 100.0);
    assert!(stdout(&o).contains("B = "));
    let o = pabcd(&["generate", "--seed", "4", "--out", s(&b)]);
    assert_eq!(code(&o), 0);
    let text = fs::read(a.join("problem.toml")).unwrap();
    assert_eq!(text, fs::read(b.join("problem.toml")).unwrap());

    let p = Problem64::from_toml(std::str::from_utf8(&text).unwrap()).unwrap();
    assert!((p.lipschitz().global() - 100.0).abs() <= 1e-9 * 100.0);
    assert_eq!(p.num_agents(), 20);
    assert_eq!(p.seed(), Some(4));
}

#[test]
fn zero_agents_is_a_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "c.toml", "[problem]\nagents = 0\n");
    let o = pabcd(&["generate", "--config", s(&cfg), "--out", s(tmp.path())]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("agent"));
}

#[test]
fn bad_config_and_flags() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "c.toml", "[run]\nhorizn = 3\n");
    assert_eq!(code(&pabcd(&["run", "--config", s(&cfg)])), 2);
    fs::write(tmp.path().join("v.toml"), "version = 9\n").unwrap();
    assert_eq!(code(&pabcd(&["run", "--config", s(&tmp.path().join("v.toml"))])), 2);
    assert_eq!(code(&pabcd(&["run", "--rule", "fastest"])), 2);
    assert_eq!(code(&pabcd(&["run", "--safety", "0"])), 2);
}

#[test]
fn unwritable_output_reports_path() {
    let tmp = tempfile::tempdir().unwrap();
    let blocker = tmp.path().join("file");
    fs::write(&blocker, "").unwrap();
    let out = blocker.join("sub");
    let o = pabcd(&["generate", "--out", s(&out)]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains(s(&blocker)));
}

#[test]
fn local_then_global_on_same_instance() {
    // Seed 9 is an instance whose local run reaches a stationary point
    // within 500 steps.
    let tmp = tempfile::tempdir().unwrap();
    let local = tmp.path().join("local");
    let o = pabcd(&["run", "--seed", "9", "--rule", "local", "--out", s(&local)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(stdout(&o).contains("(stationary)"), "{}", stdout(&o));
    let r = report(&local.join("report.toml"));
    let run = r["run"].as_table().unwrap();
    assert_eq!(run["stop_reason"].as_str(), Some("stationary"));
    let t_local = run["stop_time"].as_integer().unwrap();
    assert!(t_local < 500);
    assert!(run["monitor"]["pass"].as_bool().unwrap());

    let global = tmp.path().join("global");
    let o = pabcd(&["run", "--seed", "9", "--rule", "global", "--out", s(&global)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let r = report(&global.join("report.toml"));
    let run_g = r["run"].as_table().unwrap();
    assert_eq!(run_g["schedule_hash"].as_str(), run["schedule_hash"].as_str());
    assert!(run_g["stop_time"].as_integer().unwrap() > t_local);

    let csv = fs::read_to_string(local.join("trace.csv")).unwrap();
    assert_eq!(csv.lines().count() as i64, t_local + 2);
}

#[test]
fn oversized_manual_stepsize_is_reported() {
    let tmp = tempfile::tempdir().unwrap();
    fs::write(tmp.path().join("scalar.toml"), SCALAR_PROBLEM).unwrap();
    let cfg = write_config(
        tmp.path(),
        "c.toml",
        "[problem]\nfile = \"scalar.toml\"\n[stepsize]\nrule = \"manual\"\ngammas = [0.04]\n[run]\ninitial = [1.0]\n",
    );
    // γ = 4/L: x ← −3x until the objective overflows.
    let o = pabcd(&["run", "--config", s(&cfg), "--out", s(&tmp.path().join("o"))]);
    assert_eq!(code(&o), 3);
    assert!(stderr(&o).contains("divergence at t = "), "{}", stderr(&o));

    let o = pabcd(&["run", "--config", s(&cfg), "--horizon", "20", "--out", s(&tmp.path().join("o"))]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(stdout(&o).contains("f = "));
}

#[test]
fn compare_writes_traces_report_and_plot() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("c");
    let o = pabcd(&["compare", "--seed", "9", "--out", s(&out)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let r = report(&out.join("compare.toml"));
    assert!(r["same_schedule"].as_bool().unwrap());
    assert_eq!(r["local"]["schedule_hash"].as_str(), r["schedule_hash"].as_str());
    assert_eq!(r["global"]["schedule_hash"].as_str(), r["schedule_hash"].as_str());
    let hit = |side: &str| -> Vec<Option<i64>> {
        r[side]["thresholds"]
            .as_array()
            .unwrap()
            .iter()
            .map(|t| t.get("t").and_then(|v| v.as_integer()))
            .collect()
    };
    let (l, g) = (hit("local"), hit("global"));
    assert!(l.iter().all(Option::is_some));
    assert!(g.last().unwrap().is_none());

    // Local reaches lower f earlier: compare f at the local stop time.
    let f_at = |name: &str, t: usize| -> f64 {
        let csv = fs::read_to_string(out.join(name)).unwrap();
        csv.lines().nth(t + 1).unwrap().split(',').nth(1).unwrap().parse().unwrap()
    };
    let t = r["local"]["stop_time"].as_integer().unwrap() as usize;
    assert!(f_at("local.csv", t) < f_at("global.csv", t));

    let svg = fs::read_to_string(out.join("compare.svg")).unwrap();
    assert_eq!(svg.matches("<polyline").count(), 2);
    assert!(svg.contains("stroke-dasharray"));

    let o = pabcd(&["compare", "--seed", "9", "--log-y", "--out", s(&out)]);
    assert_eq!(code(&o), 0);
    let svg = fs::read_to_string(out.join("compare.svg")).unwrap();
    assert!(svg.contains("f(x(t)) - min f"));
    assert!(svg.contains(">1e10<"));
}

#[test]
fn compare_zero_delay_and_single_agent() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "z.toml", "[problem]\nagents = 6\ndelay_max = 0\n[run]\nhorizon = 100\n");
    let out = tmp.path().join("z");
    assert_eq!(code(&pabcd(&["compare", "--config", s(&cfg), "--out", s(&out)])), 0);
    let r = report(&out.join("compare.toml"));
    let gammas = |side: &str| -> Vec<f64> {
        r[side]["plan"]["gammas"].as_array().unwrap().iter().map(|v| v.as_float().unwrap()).collect()
    };
    // Without delays the global rule is 0.95·2/L and the local one
    // 0.95·2/Σ_j L^i_j; some row sum of L is at least L, so the smallest
    // local stepsize never exceeds the global one.
    let g = gammas("global")[0];
    assert!((g - 0.95 * 2.0 / 100.0).abs() <= 1e-15);
    let local = gammas("local");
    assert!(local.iter().cloned().fold(f64::INFINITY, f64::min) <= g);
    let problem = Problem64::from_toml(&fs::read_to_string(out.join("problem.toml")).unwrap()).unwrap();
    for (i, &l) in local.iter().enumerate() {
        let row: f64 = problem.lipschitz().row(i).iter().sum();
        assert!((l - 0.95 * 2.0 / row).abs() <= 1e-15 * l);
    }

    let cfg = write_config(tmp.path(), "one.toml", "[problem]\nagents = 1\n");
    let out = tmp.path().join("one");
    assert_eq!(code(&pabcd(&["compare", "--config", s(&cfg), "--out", s(&out)])), 0);
    let r = report(&out.join("compare.toml"));
    let gl = r["local"]["plan"]["gammas"][0].as_float().unwrap();
    let gg = r["global"]["plan"]["gammas"][0].as_float().unwrap();
    assert_eq!(gl, gg);
    assert!((gl - 0.95 * 2.0 / 100.0).abs() <= 1e-15);
    assert_eq!(fs::read(out.join("local.csv")).unwrap(), fs::read(out.join("global.csv")).unwrap());
}

#[test]
fn verify_passes_for_both_rules() {
    let tmp = tempfile::tempdir().unwrap();
    for rule in ["local", "global"] {
        let out = tmp.path().join(rule);
        let o = pabcd(&["verify", "--rule", rule, "--seeds", "50", "--out", s(&out)]);
        assert_eq!(code(&o), 0, "{}", stderr(&o));
        assert!(stdout(&o).contains("50/50 runs passed"));
        let r = report(&out.join("verify.toml"));
        let runs = r["runs"].as_array().unwrap();
        let seeds: Vec<u64> = runs.iter().map(|r| r["seed"].as_str().unwrap().parse().unwrap()).collect();
        assert_eq!(seeds, (0..50).collect::<Vec<_>>());
        assert_eq!(fs::read_dir(out.join("traces")).unwrap().count(), 50);
    }
}

#[test]
fn verify_flags_adversarial_stepsizes() {
    let tmp = tempfile::tempdir().unwrap();
    fs::write(tmp.path().join("scalar.toml"), SCALAR_PROBLEM).unwrap();
    let cfg = write_config(
        tmp.path(),
        "adv.toml",
        "[problem]\nfile = \"scalar.toml\"\n[stepsize]\nsafety = 4.0\n[run]\ninitial = [1.0]\n",
    );
    let out = tmp.path().join("v");
    let o = pabcd(&["verify", "--config", s(&cfg), "--seeds", "5", "--out", s(&out)]);
    assert_eq!(code(&o), 4);
    assert!(stderr(&o).contains("first is seed 0: divergence"), "{}", stderr(&o));
    let r = report(&out.join("verify.toml"));
    assert_eq!(r["failed"].as_integer(), Some(5));
}

#[test]
fn every_subcommand_is_deterministic() {
    let tmp = tempfile::tempdir().unwrap();
    let runs: [&[&str]; 4] = [
        &["generate", "--seed", "3"],
        &["run", "--seed", "3", "--horizon", "200"],
        &["compare", "--seed", "3", "--horizon", "200", "--log-y"],
        &["verify", "--seed", "3", "--seeds", "4", "--horizon", "200"],
    ];
    for args in runs {
        let mut trees = Vec::new();
        for k in 0..2 {
            let out = tmp.path().join(format!("{}-{k}", args[0]));
            let mut full = args.to_vec();
            full.extend(["--out", s(&out)]);
            let o = pabcd(&full);
            assert_eq!(code(&o), 0, "{}", stderr(&o));
            trees.push(read_tree(&out));
        }
        assert!(!trees[0].is_empty());
        assert_eq!(trees[0], trees[1], "{}", args[0]);
    }
}

fn read_tree(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                let rel = p.strip_prefix(dir).unwrap().to_string_lossy().into_owned();
                files.push((rel, fs::read(&p).unwrap()));
            }
        }
    }
    files.sort();
    files
}
