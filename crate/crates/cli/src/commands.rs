use std::collections::HashMap;
use std::fs;
use std::io::Write;
use std::path::Path;
use std::process::ExitCode;

use anyhow::{bail, ensure, Context, Result};
use lana_core::baselines::{random_search, SamplerConfig};
use lana_core::lut_io::{parse_instance, parse_measured, parse_report, write_instance, write_report, zero_shot_pool};
use lana_core::proxy_eval::{kendall_tau, rank_candidates, selection_histogram, RankKey};
use lana_core::solver::{solve_k_diverse_run, MAX_K};
use lana_core::synthetic::{random_instance, SyntheticConfig};
use lana_core::{
    budget_from_ratio, solve, Budget, Error, SearchInstance, Selection, SolveReport, SolveStatus, SolverConfig,
};

use crate::{BudgetArgs, Command, GenerateArgs, RandomArgs, SearchArgs, SolveArgs, SweepArgs, ZeroshotArgs};

const INFEASIBLE: u8 = 2;

pub fn run(command: Command, threads: usize) -> Result<ExitCode> {
    match command {
        Command::Validate { instance } => validate(&instance),
        Command::Solve(args) => {
            let instance = load_instance(&args.instance)?;
            solve_cmd(&instance, &args, threads)
        }
        Command::Sweep(args) => sweep(&args, threads),
        Command::Rank {
            report,
            instance,
            measured,
            out,
        } => rank(&report, &instance, measured.as_deref(), out.as_deref()),
        Command::Stats {
            report,
            instance,
            top,
            out,
        } => stats(&report, &instance, top, out.as_deref()),
        Command::Random(args) => random(&args, threads),
        Command::Zeroshot(args) => zeroshot(&args, threads),
        Command::Generate(args) => generate(&args),
    }
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))
}

fn load_instance(path: &Path) -> Result<SearchInstance> {
    parse_instance(&read(path)?).with_context(|| format!("{}", path.display()))
}

fn load_report(path: &Path) -> Result<SolveReport> {
    parse_report(&read(path)?).with_context(|| format!("{}", path.display()))
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(path) => fs::write(path, text).with_context(|| format!("cannot write {}", path.display())),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(text.as_bytes())?;
            stdout.flush()?;
            Ok(())
        }
    }
}

fn csv_text(header: &[&str], rows: Vec<Vec<String>>) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for row in rows {
        w.write_record(&row)?;
    }
    Ok(String::from_utf8(w.into_inner()?)?)
}

fn budget(instance: &SearchInstance, args: &BudgetArgs) -> Result<Budget> {
    let b = match (args.budget_ratio, args.budget_ms) {
        (Some(r), None) => budget_from_ratio(instance, r)?,
        (None, Some(ms)) => Budget::new(ms)?,
        _ => bail!("exactly one of --budget-ratio and --budget-ms is required"),
    };
    Ok(b)
}

fn solver_config(search_time_limit: f64, threads: usize) -> SolverConfig {
    SolverConfig {
        time_limit_s: search_time_limit,
        threads,
        ..SolverConfig::default()
    }
}

fn capped_k(search: &SearchArgs) -> usize {
    let k = search.k.min(usize::MAX as u64) as usize;
    if k > MAX_K {
        eprintln!("warning: --k {k} capped at {MAX_K}");
        MAX_K
    } else {
        k
    }
}

fn validate(path: &Path) -> Result<ExitCode> {
    let instance = match parse_instance(&read(path)?) {
        Ok(inst) => inst,
        Err(Error::Validation(violations)) => {
            eprintln!("{}: {} violation(s)", path.display(), violations.len());
            for v in &violations {
                eprintln!("  {v}");
            }
            return Ok(ExitCode::from(1));
        }
        Err(e) => return Err(e).with_context(|| format!("{}", path.display())),
    };
    let ops: usize = instance.pool_sizes().iter().sum();
    println!(
        "{}: ok ({} layers, {} ops, teacher {} ms)",
        instance.name,
        instance.num_layers(),
        ops,
        instance.teacher_cost()
    );
    Ok(ExitCode::SUCCESS)
}

fn solve_cmd(instance: &SearchInstance, args: &SolveArgs, threads: usize) -> Result<ExitCode> {
    let budget = budget(instance, &args.budget)?;
    let k = capped_k(&args.search);
    let config = solver_config(args.search.time_limit, threads);
    let run = solve_k_diverse_run(instance, budget, k, args.search.overlap, &config, |i, r| {
        if r.status.has_solution() {
            eprintln!(
                "solution {}: objective {} cost_ms {} status {}",
                i + 1,
                r.objective,
                r.cost_ms,
                r.status
            );
        }
    })?;
    let stopped_by = run.stopped_by();
    let mut report = run.report;
    if args.omit_timing {
        report.wall_time_s = 0.0;
    }
    emit(args.out.as_deref(), &write_report(&report)?)?;

    if !report.solutions.is_empty() {
        if report.solutions.len() < k {
            eprintln!("found {} of {} requested solutions", report.solutions.len(), k);
        }
        return Ok(ExitCode::SUCCESS);
    }
    match stopped_by {
        Some(SolveStatus::Timeout) => {
            eprintln!("error: time limit reached before any solution was found");
            Ok(ExitCode::from(1))
        }
        _ => {
            eprintln!("infeasible: no selection fits {} ms", budget.limit);
            Ok(ExitCode::from(INFEASIBLE))
        }
    }
}

fn zeroshot(args: &ZeroshotArgs, threads: usize) -> Result<ExitCode> {
    let full = load_instance(&args.solve.instance)?;
    let instance = zero_shot_pool(&full, &args.identity_id, args.allow_missing_identity)?;
    solve_cmd(&instance, &args.solve, threads)
}

fn sweep(args: &SweepArgs, threads: usize) -> Result<ExitCode> {
    let instance = load_instance(&args.instance)?;
    for &r in &args.ratios {
        ensure!(r > 0.0 && r.is_finite(), "ratios must be positive, got {r}");
    }
    let k = capped_k(&args.search);
    let config = solver_config(args.search.time_limit, threads);
    let mut rows = Vec::with_capacity(args.ratios.len());
    let mut any = false;
    for &ratio in &args.ratios {
        let budget = budget_from_ratio(&instance, ratio)?;
        let run = solve_k_diverse_run(&instance, budget, k, args.search.overlap, &config, |_, _| {})?;
        match run.report.solutions.first() {
            Some(best) => {
                any = true;
                eprintln!(
                    "ratio {ratio}: objective {} cost_ms {} ({} solutions)",
                    best.objective,
                    best.cost_ms,
                    run.report.solutions.len()
                );
                rows.push(vec![
                    ratio.to_string(),
                    best.objective.to_string(),
                    best.cost_ms.to_string(),
                    best.status.to_string(),
                ]);
            }
            None => {
                let status = run.stopped_by().unwrap_or(SolveStatus::Infeasible);
                eprintln!("ratio {ratio}: {status}");
                rows.push(vec![ratio.to_string(), String::new(), String::new(), status.to_string()]);
            }
        }
    }
    emit(
        args.out.as_deref(),
        &csv_text(&["ratio", "best_objective", "cost_ms", "status"], rows)?,
    )?;
    Ok(if any {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(INFEASIBLE)
    })
}

/// Report solutions, after checking that they belong to `instance`.
fn report_selections(report: &SolveReport, instance: &SearchInstance) -> Result<Vec<Selection>> {
    ensure!(
        report.instance == instance.name,
        "report is for instance {:?}, not {:?}",
        report.instance,
        instance.name
    );
    report
        .solutions
        .iter()
        .enumerate()
        .map(|(i, s)| {
            s.selection
                .check(instance)
                .with_context(|| format!("report solution {i} does not match the instance"))?;
            Ok(s.selection.clone())
        })
        .collect()
}

fn rank(report: &Path, instance: &Path, measured: Option<&Path>, out: Option<&Path>) -> Result<ExitCode> {
    let instance = load_instance(instance)?;
    let selections = report_selections(&load_report(report)?, &instance)?;
    ensure!(!selections.is_empty(), "report has no solutions");

    let scores = match measured {
        None => None,
        Some(path) => {
            let file = parse_measured(&read(path)?).with_context(|| format!("{}", path.display()))?;
            ensure!(
                file.instance == instance.name,
                "measured scores are for instance {:?}, not {:?}",
                file.instance,
                instance.name
            );
            let mut by_choices = HashMap::new();
            for e in &file.entries {
                if by_choices.insert(e.choices.clone(), e.measured).is_some() {
                    bail!("duplicate measured entry for choices [{}]", e.choices.to_compact_string());
                }
            }
            let values = selections
                .iter()
                .map(|s| {
                    by_choices
                        .get(s)
                        .copied()
                        .with_context(|| format!("no measured score for choices [{}]", s.to_compact_string()))
                })
                .collect::<Result<Vec<f64>>>()?;
            Some(values)
        }
    };

    let ranked = rank_candidates(&instance, &selections, scores.as_deref())?;
    let rows = ranked
        .entries
        .iter()
        .enumerate()
        .map(|(i, e)| {
            vec![
                (i + 1).to_string(),
                e.input_index.to_string(),
                e.selection.to_compact_string(),
                e.proxy_objective.to_string(),
                e.cost_ms.to_string(),
                e.measured.map(|m| m.to_string()).unwrap_or_default(),
            ]
        })
        .collect();
    emit(
        out,
        &csv_text(
            &["rank", "input_index", "choices", "proxy_objective", "cost_ms", "measured"],
            rows,
        )?,
    )?;

    if ranked.key == RankKey::Measured {
        let proxy: Vec<f64> = ranked.entries.iter().map(|e| e.proxy_objective).collect();
        let meas: Vec<f64> = ranked.entries.iter().filter_map(|e| e.measured).collect();
        match kendall_tau(&proxy, &meas) {
            Ok(tau) => eprintln!(
                "kendall tau-b (proxy objective vs measured, tie-corrected, n = {}): {tau}",
                proxy.len()
            ),
            Err(Error::AllTied(which)) => eprintln!("kendall tau-b undefined: every {which} value is tied"),
            Err(e) => return Err(e.into()),
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn stats(report: &Path, instance: &Path, top: usize, out: Option<&Path>) -> Result<ExitCode> {
    ensure!(top >= 1, "--top must be at least 1");
    let instance = load_instance(instance)?;
    let mut selections = report_selections(&load_report(report)?, &instance)?;
    selections.truncate(top);
    let hist = selection_histogram(&instance, &selections)?;
    let rows = hist
        .rows()
        .into_iter()
        .map(|(op, count, fraction)| vec![op.to_string(), count.to_string(), fraction.to_string()])
        .collect();
    emit(out, &csv_text(&["op_id", "count", "fraction"], rows)?)?;
    Ok(ExitCode::SUCCESS)
}

fn random(args: &RandomArgs, threads: usize) -> Result<ExitCode> {
    let instance = load_instance(&args.instance)?;
    let budget = budget(&instance, &args.budget)?;
    ensure!(args.n >= 1, "--n must be at least 1");

    let ilp = solve(&instance, budget, &[], instance.num_layers(), &solver_config(args.time_limit, threads))?;
    if ilp.status == SolveStatus::Infeasible {
        eprintln!("infeasible: no selection fits {} ms", budget.limit);
        return Ok(ExitCode::from(INFEASIBLE));
    }

    let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build()?;
    let config = SamplerConfig {
        max_attempts_per_sample: args.max_attempts,
        ..SamplerConfig::new(args.seed)
    };
    let result = pool.install(|| random_search(&instance, budget, args.n, &config))?;
    emit(args.out.as_deref(), &result.population_csv())?;

    let best = &result.best;
    if ilp.status.has_solution() {
        eprintln!(
            "random min objective {} over {} samples ({} failed); solver objective {} ({}); solver <= random: {}",
            best.objective,
            result.population.len(),
            result.failures,
            ilp.objective,
            ilp.status,
            ilp.objective <= best.objective
        );
    } else {
        eprintln!(
            "random min objective {} over {} samples ({} failed); solver found no solution ({})",
            best.objective,
            result.population.len(),
            result.failures,
            ilp.status
        );
    }
    Ok(ExitCode::SUCCESS)
}

fn generate(args: &GenerateArgs) -> Result<ExitCode> {
    ensure!(args.layers >= 1, "--layers must be at least 1");
    ensure!(args.ops >= 1, "--ops must be at least 1");
    ensure!(
        args.max_cost_ratio > 0.0 && args.max_cost_ratio.is_finite(),
        "--max-cost-ratio must be positive"
    );
    ensure!(
        (0.0..=1.0).contains(&args.negative_fraction),
        "--negative-fraction must be in [0, 1]"
    );
    let cfg = SyntheticConfig {
        max_cost_ratio: args.max_cost_ratio,
        negative_fraction: args.negative_fraction,
        ..SyntheticConfig::new(args.layers, args.ops)
    };
    emit(args.out.as_deref(), &write_instance(&random_instance(&cfg, args.seed)))?;
    Ok(ExitCode::SUCCESS)
}
