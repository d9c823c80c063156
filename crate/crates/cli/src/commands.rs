use std::io::Write;
use std::path::Path;

use pabcd::{
    build_schedule, descent_constants, generate_problem, global_stepsize, local_stepsizes,
    manual_stepsizes, GeneratorParams, MonitorReport, Problem64, RunConfig, RunTrace64, Schedule,
    StepsizePlan64, StopCriteria,
};
use rayon::prelude::*;

use crate::args::Command;
use crate::config::{ExperimentConfig, RuleName};
use crate::error::CliError;
use crate::plot::{line_plot, Axes, Series};
use crate::report::{
    to_toml, CompareReport, RunReport, SeedReport, SingleReport, VerifyReport,
};

const REPORT_VERSION: u32 = 1;

pub fn execute(command: &Command, out: &mut dyn Write) -> Result<(), CliError> {
    let cfg = ExperimentConfig::resolve(command.common())?;
    match command {
        Command::Generate(_) => generate(&cfg, out),
        Command::Run(_) => run(&cfg, out),
        Command::Compare(_) => compare(&cfg, out),
        Command::Verify { seeds, .. } => verify(&cfg, seeds.unwrap_or(cfg.verify.seeds), out),
    }
}

fn say(out: &mut dyn Write, line: impl AsRef<str>) {
    // stdout going away is not worth failing a finished experiment over
    let _ = writeln!(out, "{}", line.as_ref());
}

fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(CliError::io(dir))?;
    }
    std::fs::write(path, contents).map_err(CliError::io(path))
}

pub fn build_problem(cfg: &ExperimentConfig) -> Result<Problem64, CliError> {
    let p = &cfg.problem;
    if let Some(file) = &p.file {
        let text = std::fs::read_to_string(file).map_err(CliError::io(file))?;
        return Ok(Problem64::from_toml(&text)?);
    }
    let params = GeneratorParams {
        seed: p.seed,
        block_sizes: p.block_sizes.clone().unwrap_or_else(|| vec![1; p.agents]),
        lipschitz: p.lipschitz,
        box_radius: p.box_radius,
        delay_max: p.delay_max,
        update_bound_max: p.update_bound_max,
    };
    Ok(generate_problem(&params)?)
}

pub fn build_plan(cfg: &ExperimentConfig, problem: &Problem64, rule: RuleName) -> Result<StepsizePlan64, CliError> {
    let safety = cfg.stepsize.safety;
    let (l, d) = (problem.lipschitz(), problem.delays());
    let plan = match rule {
        RuleName::Local => local_stepsizes(l, d, safety)?,
        RuleName::Global => global_stepsize(l.global(), problem.num_agents(), d.max_delay(), safety)?,
        RuleName::Manual => {
            let g = &cfg.stepsize.gammas;
            let gammas = if g.len() == 1 { vec![g[0]; problem.num_agents()] } else { g.clone() };
            manual_stepsizes(gammas, l, d)?
        }
    };
    Ok(plan)
}

fn run_config(cfg: &ExperimentConfig) -> RunConfig<f64> {
    let stop = StopCriteria { tolerance: cfg.run.tolerance, quiescence: cfg.run.quiescence };
    RunConfig { horizon: cfg.run.horizon, stop, initial: cfg.run.initial.clone() }
}

fn schedule_for(cfg: &ExperimentConfig, problem: &Problem64) -> Schedule {
    build_schedule(problem.delays(), cfg.run.horizon, cfg.schedule_seed(), cfg.schedule.mode)
}

fn execute_run(
    cfg: &ExperimentConfig,
    problem: &Problem64,
    schedule: &Schedule,
    plan: &StepsizePlan64,
) -> Result<(RunTrace64, MonitorReport<f64>), CliError> {
    let trace = pabcd::run(problem, schedule, plan, &run_config(cfg))?;
    let monitor = MonitorReport::evaluate(&trace, descent_constants(plan, problem.lipschitz(), problem.delays()));
    Ok((trace, monitor))
}

/// Monitor failures are errors only when the plan respects its bound;
/// oversized stepsizes are allowed to break the inequalities.
fn check_monitor(label: &str, plan: &StepsizePlan64, monitor: &MonitorReport<f64>, out: &mut dyn Write) -> Result<(), CliError> {
    if monitor.pass() {
        return Ok(());
    }
    let s = monitor.summary();
    let detail = format!(
        "{label}: descent {} (worst margin {:e} at m = {}), update margins {} ({} failures), square-summable {}, staleness violations {}",
        verdict(s.theorem1_pass),
        s.theorem1_worst_margin,
        s.theorem1_worst_prefix,
        verdict(s.lemma3_pass),
        s.lemma3_failures,
        verdict(s.square_summable_pass),
        s.staleness_violations
    );
    if plan.within_bound() {
        Err(CliError::Monitor(detail))
    } else {
        say(out, format!("warning: stepsizes exceed the local bound; {detail}"));
        Ok(())
    }
}

fn verdict(pass: bool) -> &'static str {
    if pass {
        "pass"
    } else {
        "FAIL"
    }
}

fn generate(cfg: &ExperimentConfig, out: &mut dyn Write) -> Result<(), CliError> {
    let problem = build_problem(cfg)?;
    let path = cfg.output.dir.join("problem.toml");
    write_file(&path, &problem.to_toml())?;
    let (lo, hi) = problem.eigenvalue_extremes();
    let d = problem.delays();
    let n = problem.num_agents();
    let links: Vec<u32> = (0..n)
        .flat_map(|i| (0..n).map(move |j| (i, j)))
        .filter(|&(i, j)| d.has_link(i, j))
        .map(|(i, j)| d.bound(i, j))
        .collect();
    say(out, format!("wrote {}", path.display()));
    say(out, format!("agents {n}, dimension {}", problem.partition().dim()));
    say(out, format!("L_global {:e}", problem.lipschitz().global()));
    say(out, format!("eigenvalues of Q in [{lo:e}, {hi:e}]"));
    if links.is_empty() {
        say(out, "delay bounds: no links");
    } else {
        let mean = links.iter().map(|&v| v as f64).sum::<f64>() / links.len() as f64;
        say(
            out,
            format!(
                "delay bounds over {} links: min {}, mean {mean:.2}, max {}, B = {}",
                links.len(),
                links.iter().min().unwrap(),
                links.iter().max().unwrap(),
                d.max_delay()
            ),
        );
    }
    say(out, format!("hash {}", problem.hash()));
    Ok(())
}

fn summarize(out: &mut dyn Write, label: &str, trace: &RunTrace64, monitor: &MonitorReport<f64>) {
    let last = trace.last();
    let plan = &trace.meta.plan;
    let (gmin, gmax) = plan.gammas.iter().fold((f64::INFINITY, 0.0f64), |(a, b), &g| (a.min(g), b.max(g)));
    say(out, format!("{label}: rule {}, gamma in [{gmin:e}, {gmax:e}]", plan.rule));
    say(
        out,
        format!(
            "{label}: stopped at t = {} ({}), f = {:e}, residual = {:e}, disagreement = {:e}",
            trace.meta.stop_time, trace.meta.stop_reason, last.f, last.residual_unscaled_total, last.max_disagreement
        ),
    );
    let s = monitor.summary();
    say(
        out,
        format!(
            "{label}: monitors descent {}, update margins {}, square-summable {}, staleness violations {}",
            verdict(s.theorem1_pass),
            verdict(s.lemma3_pass),
            verdict(s.square_summable_pass),
            s.staleness_violations
        ),
    );
}

fn run(cfg: &ExperimentConfig, out: &mut dyn Write) -> Result<(), CliError> {
    let problem = build_problem(cfg)?;
    let schedule = schedule_for(cfg, &problem);
    let plan = build_plan(cfg, &problem, cfg.stepsize.rule)?;
    let (trace, monitor) = execute_run(cfg, &problem, &schedule, &plan)?;
    let dir = &cfg.output.dir;
    write_file(&dir.join("problem.toml"), &problem.to_toml())?;
    write_file(&dir.join("trace.csv"), &trace.to_csv())?;
    let report = SingleReport {
        format: "pabcd-run-report",
        version: REPORT_VERSION,
        problem_hash: problem.hash(),
        run: RunReport::new(&trace, monitor.summary(), &cfg.output.thresholds),
    };
    write_file(&dir.join("report.toml"), &to_toml(&report))?;
    summarize(out, "run", &trace, &monitor);
    say(out, format!("wrote {}", dir.display()));
    check_monitor("run", &plan, &monitor, out)
}

fn compare(cfg: &ExperimentConfig, out: &mut dyn Write) -> Result<(), CliError> {
    let problem = build_problem(cfg)?;
    let schedule = schedule_for(cfg, &problem);
    let local_plan = build_plan(cfg, &problem, RuleName::Local)?;
    let global_plan = build_plan(cfg, &problem, RuleName::Global)?;
    let (local, local_mon) = execute_run(cfg, &problem, &schedule, &local_plan)?;
    let (global, global_mon) = execute_run(cfg, &problem, &schedule, &global_plan)?;
    let same_schedule = local.meta.schedule_hash == global.meta.schedule_hash;
    assert!(same_schedule, "both rules must see the same schedule");

    let dir = &cfg.output.dir;
    write_file(&dir.join("problem.toml"), &problem.to_toml())?;
    write_file(&dir.join("local.csv"), &local.to_csv())?;
    write_file(&dir.join("global.csv"), &global.to_csv())?;
    let report = CompareReport {
        format: "pabcd-compare-report",
        version: REPORT_VERSION,
        problem_hash: problem.hash(),
        schedule_hash: schedule.hash(),
        same_schedule,
        local: RunReport::new(&local, local_mon.summary(), &cfg.output.thresholds),
        global: RunReport::new(&global, global_mon.summary(), &cfg.output.thresholds),
    };
    write_file(&dir.join("compare.toml"), &to_toml(&report))?;
    write_file(&dir.join("compare.svg"), &comparison_plot(&local, &global, cfg.output.log_y))?;

    summarize(out, "local", &local, &local_mon);
    summarize(out, "global", &global, &global_mon);
    for (l, g) in report.local.thresholds.iter().zip(&report.global.thresholds) {
        let show = |t: Option<usize>| t.map_or("-".to_string(), |t| t.to_string());
        say(out, format!("residual <= {:e}: local t = {}, global t = {}", l.residual, show(l.t), show(g.t)));
    }
    say(out, format!("wrote {}", dir.display()));
    check_monitor("local", &local_plan, &local_mon, out)?;
    check_monitor("global", &global_plan, &global_mon, out)
}

/// `f(x(t))` for both rules; on a log axis, `f − min f` over both runs.
pub fn comparison_plot(local: &RunTrace64, global: &RunTrace64, log_y: bool) -> String {
    let f_best = local.rows.iter().chain(&global.rows).map(|r| r.f).fold(f64::INFINITY, f64::min);
    let points = |trace: &RunTrace64| -> Vec<(f64, f64)> {
        trace
            .rows
            .iter()
            .map(|r| (r.t as f64, if log_y { r.f - f_best } else { r.f }))
            .collect()
    };
    let series = [
        Series { name: "local stepsizes".into(), color: "#1f77b4", dash: None, points: points(local) },
        Series { name: "global stepsize".into(), color: "#ff7f0e", dash: Some("8 5"), points: points(global) },
    ];
    let axes = Axes {
        title: "Objective value".into(),
        x_label: "t".into(),
        y_label: if log_y { "f(x(t)) - min f".into() } else { "f(x(t))".into() },
        log_y,
    };
    line_plot(&series, &axes)
}

fn verify(cfg: &ExperimentConfig, seeds: u64, out: &mut dyn Write) -> Result<(), CliError> {
    if seeds == 0 {
        return Err(CliError::Config("verify needs at least one seed".into()));
    }
    let first = cfg.problem.seed;
    let list: Vec<u64> = (0..seeds).map(|k| first.wrapping_add(k)).collect();
    let mut results: Vec<(SeedReport, Option<String>)> = list
        .par_iter()
        .map(|&seed| verify_one(&cfg.with_seed(seed), seed))
        .collect::<Result<_, _>>()?;
    results.sort_by_key(|(r, _)| r.seed.parse::<u64>().unwrap_or(0));

    let dir = &cfg.output.dir;
    for (r, csv) in &results {
        if let Some(csv) = csv {
            write_file(&dir.join("traces").join(format!("seed-{}.csv", r.seed)), csv)?;
        }
    }
    let runs: Vec<SeedReport> = results.into_iter().map(|(r, _)| r).collect();
    let passed = runs.iter().filter(|r| r.pass).count() as u64;
    let report = VerifyReport {
        format: "pabcd-verify-report",
        version: REPORT_VERSION,
        rule: format!("{:?}", cfg.stepsize.rule).to_lowercase(),
        safety: cfg.stepsize.safety,
        seeds,
        passed,
        failed: seeds - passed,
        runs,
    };
    write_file(&dir.join("verify.toml"), &to_toml(&report))?;
    say(out, format!("verify: {passed}/{seeds} runs passed ({} rule, safety {})", report.rule, report.safety));
    say(out, format!("wrote {}", dir.display()));
    match report.runs.iter().find(|r| !r.pass) {
        None => Ok(()),
        Some(r) => {
            let detail = match (&r.error, &r.monitor) {
                (Some(e), _) => e.clone(),
                (None, Some(m)) => format!(
                    "descent {} (worst margin {:e}), update margins {} ({} failures), square-summable {}, staleness violations {}",
                    verdict(m.theorem1_pass),
                    m.theorem1_worst_margin,
                    verdict(m.lemma3_pass),
                    m.lemma3_failures,
                    verdict(m.square_summable_pass),
                    m.staleness_violations
                ),
                (None, None) => "unknown".into(),
            };
            Err(CliError::Monitor(format!("{} of {seeds} runs failed; first is seed {}: {detail}", seeds - passed, r.seed)))
        }
    }
}

/// Divergence counts as a failed run; config problems abort the batch.
fn verify_one(cfg: &ExperimentConfig, seed: u64) -> Result<(SeedReport, Option<String>), CliError> {
    let problem = build_problem(cfg)?;
    let schedule = schedule_for(cfg, &problem);
    let plan = build_plan(cfg, &problem, cfg.stepsize.rule)?;
    match execute_run(cfg, &problem, &schedule, &plan) {
        Ok((trace, monitor)) => {
            let summary = monitor.summary();
            Ok((
                SeedReport {
                    seed: seed.to_string(),
                    pass: summary.pass,
                    error: None,
                    stop_reason: Some(trace.meta.stop_reason.to_string()),
                    stop_time: Some(trace.meta.stop_time),
                    final_residual: Some(trace.last().residual_unscaled_total),
                    monitor: Some(summary),
                },
                Some(trace.to_csv()),
            ))
        }
        Err(CliError::Core(e @ pabcd::Error::Divergence { .. })) => Ok((
            SeedReport {
                seed: seed.to_string(),
                pass: false,
                error: Some(e.to_string()),
                stop_reason: None,
                stop_time: None,
                final_residual: None,
                monitor: None,
            },
            None,
        )),
        Err(e) => Err(e),
    }
}
