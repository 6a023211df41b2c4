use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context, Result};

use hebb::harness::{
    run_scenario, run_scenario_detailed, sweep as run_sweep, write_csv, write_task_csv,
    ScenarioKind, ScenarioReport, SweepGrid,
};
use hebb::verify::{run_all, Fault, VerifyOptions};
use hebb::{dynamic_weight, Capacity, EpisodicMemory64};

use crate::config::{ConfigFile, RunPlan};
use crate::output::{resolve_out_dir, summary_table, write_atomic};
use crate::{InspectArgs, RunArgs, ScenarioArgs, SweepArgs, VerifyArgs};

fn load(args: &ScenarioArgs) -> Result<ConfigFile> {
    let mut file = match &args.config {
        Some(path) => ConfigFile::load(path)?,
        None => ConfigFile::default(),
    };
    if args.kind.is_some() {
        file.kind = args.kind.clone();
    }
    if !args.seeds.is_empty() {
        file.seeds = Some(args.seeds.clone());
    }
    if args.name.is_some() {
        file.name = args.name.clone();
    }
    if args.k.is_some() {
        file.adaptation.k = args.k;
    }
    Ok(file)
}

fn file_stem(s: &str) -> String {
    s.chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '-' || c == '.' {
                c
            } else {
                '_'
            }
        })
        .collect()
}

pub fn run(args: RunArgs) -> Result<ExitCode> {
    let mut file = load(&args.scenario)?;
    if !args.methods.is_empty() {
        file.methods = Some(args.methods.clone());
    }
    let a = &mut file.adaptation;
    a.eta = args.eta.or(a.eta);
    a.beta = args.beta.or(a.beta);
    a.lambda = args.lambda.or(a.lambda);
    a.steps = args.steps.or(a.steps);
    let RunPlan {
        name,
        out_dir,
        methods,
        base,
    } = file.resolve()?;
    let out_dir = resolve_out_dir(args.scenario.out_dir, out_dir);
    let stem = file_stem(&name);

    let mut reports = Vec::with_capacity(methods.len());
    for method in &methods {
        let mut cfg = base.clone();
        cfg.method = *method;
        let started = Instant::now();
        let report = match &args.save_memory {
            None => run_scenario(&cfg)?,
            Some(dir) => {
                let runs = run_scenario_detailed(&cfg)?;
                for (seed, run) in cfg.seeds.iter().zip(&runs) {
                    let path = dir.join(format!(
                        "{stem}_{}_seed{seed}.hebm",
                        file_stem(&method.to_string())
                    ));
                    let bytes = run.state.memory.to_bytes();
                    write_atomic(&path, |w| Ok(w.write_all(&bytes)?))?;
                }
                ScenarioReport::from_records(runs.into_iter().map(|r| r.record).collect())?
            }
        };
        log::info!("{method}: {:.2?}", started.elapsed());
        reports.push(report);
    }

    let csv_path = out_dir.join(format!("{stem}.csv"));
    write_atomic(&csv_path, |w| Ok(write_csv(&reports, w)?))?;
    let mut written = vec![csv_path];
    if matches!(base.kind, ScenarioKind::Continual { .. }) {
        let path = out_dir.join(format!("{stem}_tasks.csv"));
        write_atomic(&path, |w| Ok(write_task_csv(&reports, w)?))?;
        written.push(path);
    }

    print!("{}", summary_table(&reports));
    for p in written {
        println!("wrote {}", p.display());
    }
    Ok(ExitCode::SUCCESS)
}

pub fn sweep(args: SweepArgs) -> Result<ExitCode> {
    let mut file = load(&args.scenario)?;
    file.methods = Some(vec![args.method.clone()]);
    let grid = match (
        args.eta.is_empty(),
        args.beta.is_empty(),
        args.lambda.is_empty(),
        args.steps.is_empty(),
    ) {
        (false, false, true, true) => SweepGrid::EtaBeta {
            etas: args.eta.clone(),
            betas: args.beta.clone(),
        },
        (true, true, false, false) => SweepGrid::LambdaSteps {
            lambdas: args.lambda.clone(),
            steps: args.steps.clone(),
        },
        _ => bail!("give either --eta and --beta, or --lambda and --steps"),
    };
    let RunPlan {
        name,
        out_dir,
        methods,
        mut base,
    } = file.resolve()?;
    base.method = methods[0];
    let out_dir = resolve_out_dir(args.scenario.out_dir, out_dir);
    let result = run_sweep(&base, &grid)?;

    let path = out_dir.join(format!("{}_sweep.csv", file_stem(&name)));
    write_atomic(&path, |w| Ok(result.write_csv(w)?))?;

    let col_width = 9;
    print!(
        "{:>17}",
        format!("{} \\ {}", result.row_name, result.col_name)
    );
    for c in &result.cols {
        print!("{c:>col_width$}");
    }
    println!();
    for (r, row) in result.rows.iter().enumerate() {
        print!("{row:>17}");
        for c in 0..result.cols.len() {
            let acc = result.cell(r, c).mean.final_point().map(|p| p.acc_overall);
            match acc {
                Some(a) => print!("{a:>col_width$.4}"),
                None => print!("{:>col_width$}", "-"),
            }
        }
        println!();
    }
    println!("wrote {}", path.display());
    Ok(ExitCode::SUCCESS)
}

pub fn verify(args: VerifyArgs) -> Result<ExitCode> {
    let fault = if args.corrupt_gradient {
        Fault::CorruptGradient
    } else {
        Fault::None
    };
    let started = Instant::now();
    let report = run_all(&VerifyOptions {
        seed: args.seed,
        fault,
    });
    for c in &report.checks {
        let status = if c.ok() { "ok" } else { "FAILED" };
        println!("{:<34} {:>5}/{:<5} {status}", c.name, c.passed, c.total);
    }
    println!("elapsed {:.2?}", started.elapsed());
    if report.all_passed() {
        return Ok(ExitCode::SUCCESS);
    }
    for c in report.failures() {
        eprintln!(
            "invariant violated: {}: {}",
            c.name,
            c.failure.as_deref().unwrap_or("no detail")
        );
    }
    Ok(ExitCode::FAILURE)
}

pub fn inspect_memory(args: InspectArgs) -> Result<ExitCode> {
    dynamic_weight(0, args.beta).context("--beta")?;
    let bytes = std::fs::read(&args.path)
        .with_context(|| format!("cannot read snapshot {}", args.path.display()))?;
    let memory = EpisodicMemory64::from_bytes(&bytes)
        .with_context(|| format!("cannot decode snapshot {}", args.path.display()))?;
    println!("entries   {}", memory.len());
    println!("dim       {}", memory.dim());
    match memory.capacity() {
        Capacity::Unbounded => println!("capacity  unbounded"),
        Capacity::RingBuffer(n) => println!("capacity  ring buffer of {n}"),
    }
    if memory.is_empty() {
        println!("no classes stored");
        return Ok(ExitCode::SUCCESS);
    }
    println!(
        "{:>6}  {:>8}  {:>10}",
        "class",
        "count",
        format!("E(β={})", args.beta)
    );
    for (&class, &count) in memory.class_counts() {
        let e = dynamic_weight(count, args.beta)?;
        println!("{class:>6}  {count:>8}  {e:>10.6}");
    }
    Ok(ExitCode::SUCCESS)
}
