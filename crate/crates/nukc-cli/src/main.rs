//! Command-line front end: generate, solve, reduce, verify and benchmark
//! non-uniform k-center instances.
//!
//! Exit codes: 0 solved or verified, 2 proven infeasible (or failed
//! verification), 3 invalid input or configuration, 4 internal guarantee
//! violated.

use clap::{Args, Parser, Subcommand};
use nukc_core::exact::{
    brute_solve, plant_instance, PlantParams, PlantVariant, DEFAULT_BRUTE_BUDGET,
};
use nukc_core::greedy::GreedyOutput;
use nukc_core::model::{Instance, InstanceJson, Solution, SolutionJson};
use nukc_core::pipeline::{
    solve_4nukc, solve_colorful_restricted, solve_robust, DilationLedger, PipelineConfig,
    PipelineOutcome,
};
use nukc_core::wsdp::solve_ws;
use nukc_core::{verify_solution, Error};
use serde::Serialize;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "nukc", about = "Non-uniform k-center solvers", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a planted instance (feasible at dilation 1 by construction).
    Gen(GenArgs),
    /// Solve an instance; writes solution JSON with a verification report.
    Solve(SolveArgs),
    /// Exhaustive feasibility check at a given dilation.
    Brute(BruteArgs),
    /// Check a solution file against an instance file.
    Verify(VerifyArgs),
    /// Run one reduction step and dump the produced instances and contexts.
    Reduce(ReduceArgs),
    /// Sweep seeds and emit one CSV row per solved instance.
    Bench(BenchArgs),
}

#[derive(Args)]
struct GenArgs {
    #[arg(long, value_parser = ["nukc4", "nukc", "robust", "colorful"])]
    variant: String,
    #[arg(long, default_value_t = 12)]
    n: usize,
    #[arg(long, default_value_t = 4)]
    t: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 0)]
    outliers: usize,
    /// Radius ratio between adjacent levels.
    #[arg(long, default_value_t = 30.0)]
    ratio: f64,
    /// Per-level ball budget.
    #[arg(long, default_value_t = 2)]
    budget: usize,
    /// Output file; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SolveArgs {
    #[arg(long, value_parser = ["nukc4", "robust", "colorful", "ws-colorful"])]
    variant: String,
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    output: Option<PathBuf>,
    /// Write one JSON record per oracle invocation.
    #[arg(long)]
    trace: Option<PathBuf>,
    #[arg(long, default_value_t = 30.0)]
    beta: f64,
    #[arg(long, default_value_t = 1e-6)]
    eps: f64,
    #[arg(long)]
    iteration_cap: Option<usize>,
    /// Restrict case-2 subsets to points far from the tree roots.
    #[arg(long, default_value_t = false)]
    prune: bool,
}

#[derive(Args)]
struct BruteArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long, default_value_t = 1.0)]
    dilation: f64,
    #[arg(long, default_value_t = DEFAULT_BRUTE_BUDGET)]
    budget: u64,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long)]
    instance: PathBuf,
    #[arg(long)]
    solution: PathBuf,
}

#[derive(Args)]
struct ReduceArgs {
    #[arg(long, value_parser = ["net", "colorful", "selfcov"])]
    step: String,
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long, value_parser = ["nukc4"])]
    variant: String,
    #[arg(long, default_value_t = 12)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    seed_start: u64,
    #[arg(long, default_value_t = 10)]
    seeds: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn exit_code_for(err: &Error) -> u8 {
    match err {
        Error::Input(_) | Error::Config(_) | Error::Serde(_) | Error::BudgetExceeded(_) => 3,
        Error::ClaimViolation(_) | Error::Contract(_) | Error::Numerical(_) => 4,
    }
}

fn read_instance(path: &Path) -> Result<Instance, Error> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::Input(format!("cannot read {}: {e}", path.display())))?;
    let json: InstanceJson = serde_json::from_str(&text)?;
    Instance::from_json(&json)
}

fn write_out(path: &Option<PathBuf>, text: &str) -> Result<(), Error> {
    match path {
        Some(p) => fs::write(p, text)
            .map_err(|e| Error::Input(format!("cannot write {}: {e}", p.display()))),
        None => {
            println!("{text}");
            Ok(())
        }
    }
}

#[derive(Serialize)]
struct SolveOutput {
    #[serde(flatten)]
    solution: SolutionJson,
    #[serde(skip_serializing_if = "Option::is_none")]
    ledger: Option<DilationLedger>,
}

#[derive(Serialize)]
struct GreedyJson {
    order: Vec<usize>,
    clusters: Vec<Vec<usize>>,
    weights: Vec<u64>,
    captured: Vec<u64>,
    radius: f64,
    gamma: f64,
}

fn greedy_json(g: &GreedyOutput) -> GreedyJson {
    GreedyJson {
        order: g.order.clone(),
        clusters: g.clusters.clone(),
        weights: g.weights.clone(),
        captured: g.captured.clone(),
        radius: g.radius,
        gamma: g.gamma,
    }
}

fn run_gen(args: &GenArgs) -> Result<u8, Error> {
    let (variant, t) = match args.variant.as_str() {
        "nukc4" => (PlantVariant::Nukc, 4),
        "nukc" => (PlantVariant::Nukc, args.t),
        "robust" => (PlantVariant::Robust, args.t),
        "colorful" => (PlantVariant::Colorful, args.t),
        _ => unreachable!("clap filters variants"),
    };
    let params = PlantParams::new(args.seed, variant, args.n, t)
        .with_ratio(args.ratio)
        .with_outliers(args.outliers)
        .with_budgets(vec![args.budget; t]);
    let planted = plant_instance(&params)?;
    let text = serde_json::to_string_pretty(&planted.instance.to_json())?;
    write_out(&args.out, &text)?;
    Ok(0)
}

fn run_solve(args: &SolveArgs) -> Result<u8, Error> {
    let instance = read_instance(&args.input)?;
    let cfg = PipelineConfig {
        beta: args.beta,
        eps: args.eps,
        iteration_cap: args.iteration_cap,
        case2_prune: args.prune,
        collect_cuts: args.trace.is_some(),
        ..Default::default()
    };
    match (args.variant.as_str(), instance) {
        ("nukc4", Instance::Nukc(inst)) => match solve_4nukc(&inst, &cfg)? {
            PipelineOutcome::Solved {
                solution,
                report,
                ledger,
                roc_stats,
                ..
            } => {
                if let (Some(path), Some(rs)) = (&args.trace, &roc_stats) {
                    write_trace(path, &rs.trace)?;
                }
                let out = SolveOutput {
                    solution: solution.to_json(Some(report)),
                    ledger: Some(ledger),
                };
                write_out(&args.output, &serde_json::to_string(&out)?)?;
                Ok(0)
            }
            PipelineOutcome::Infeasible { roc_stats, .. } => {
                if let (Some(path), Some(rs)) = (&args.trace, &roc_stats) {
                    write_trace(path, &rs.trace)?;
                }
                eprintln!("instance proven infeasible");
                Ok(2)
            }
        },
        ("robust", Instance::Robust(inst)) => {
            let (answer, stats) = solve_robust(&inst, &cfg)?;
            if let Some(path) = &args.trace {
                write_trace(path, &stats.trace)?;
            }
            match answer {
                Some((solution, report)) => {
                    let out = SolveOutput {
                        solution: solution.to_json(Some(report)),
                        ledger: None,
                    };
                    write_out(&args.output, &serde_json::to_string(&out)?)?;
                    Ok(0)
                }
                None => {
                    eprintln!("instance proven infeasible");
                    Ok(2)
                }
            }
        }
        ("colorful", Instance::Colorful(inst)) => match solve_colorful_restricted(&inst)? {
            Some((solution, report)) => {
                let out = SolveOutput {
                    solution: solution.to_json(Some(report)),
                    ledger: None,
                };
                write_out(&args.output, &serde_json::to_string(&out)?)?;
                Ok(0)
            }
            None => {
                eprintln!("instance proven infeasible");
                Ok(2)
            }
        },
        ("ws-colorful", Instance::Colorful(inst)) => match solve_ws(&inst)? {
            Some(solution) => {
                let report = verify_solution(&Instance::Colorful(inst.clone()), &solution)?;
                let out = SolveOutput {
                    solution: solution.to_json(Some(report)),
                    ledger: None,
                };
                write_out(&args.output, &serde_json::to_string(&out)?)?;
                Ok(0)
            }
            None => {
                eprintln!("instance proven infeasible");
                Ok(2)
            }
        },
        (variant, _) => Err(Error::Input(format!(
            "instance kind does not match --variant {variant}"
        ))),
    }
}

fn write_trace(path: &Path, records: &[nukc_core::roc::TraceRecord]) -> Result<(), Error> {
    let mut text = String::new();
    for rec in records {
        text.push_str(&serde_json::to_string(rec)?);
        text.push('\n');
    }
    fs::write(path, text).map_err(|e| Error::Input(format!("cannot write trace: {e}")))
}

fn run_brute(args: &BruteArgs) -> Result<u8, Error> {
    let instance = read_instance(&args.input)?;
    let outcome = brute_solve(&instance, args.dilation, args.budget)?;
    let solution_json = outcome.witness.as_ref().map(|w| {
        let report = verify_solution(&instance, w).ok();
        w.to_json(report)
    });
    #[derive(Serialize)]
    struct BruteJson {
        feasible: bool,
        best_coverage: u64,
        #[serde(skip_serializing_if = "Option::is_none")]
        witness: Option<SolutionJson>,
    }
    let text = serde_json::to_string(&BruteJson {
        feasible: outcome.feasible,
        best_coverage: outcome.best_coverage,
        witness: solution_json,
    })?;
    write_out(&args.output, &text)?;
    Ok(if outcome.feasible { 0 } else { 2 })
}

fn run_verify(args: &VerifyArgs) -> Result<u8, Error> {
    let instance = read_instance(&args.instance)?;
    let text = fs::read_to_string(&args.solution)
        .map_err(|e| Error::Input(format!("cannot read solution: {e}")))?;
    let json: SolutionJson = serde_json::from_str(&text)?;
    let solution = Solution::from_json(&json, instance.levels())?;
    let report = verify_solution(&instance, &solution)?;
    println!("{}", serde_json::to_string(&report)?);
    Ok(if report.pass { 0 } else { 2 })
}

fn run_reduce(args: &ReduceArgs) -> Result<u8, Error> {
    let instance = read_instance(&args.input)?;
    let text = match (args.step.as_str(), instance) {
        ("net", Instance::Nukc(inst)) => {
            let (robust, ctx) = nukc_core::net::reduce_to_robust(&inst)?;
            #[derive(Serialize)]
            struct NetDump {
                instance: InstanceJson,
                net: Vec<usize>,
                assign: Vec<usize>,
                net_radius: f64,
            }
            serde_json::to_string_pretty(&NetDump {
                instance: Instance::Robust(robust).to_json(),
                net: ctx.net,
                assign: ctx.assign,
                net_radius: ctx.net_radius,
            })?
        }
        ("colorful", Instance::Robust(inst)) => {
            let (reduced, p1) = nukc_core::colorful::phase1(&inst)?;
            let splits = nukc_core::colorful::phase2_split(&reduced)?;
            #[derive(Serialize)]
            struct SplitDump {
                ell: usize,
                target_red: u64,
                target_blue: u64,
                instance: InstanceJson,
            }
            #[derive(Serialize)]
            struct ColorfulDump {
                phase1_instance: InstanceJson,
                greedy: GreedyJson,
                lambda: Vec<u64>,
                splits: Vec<SplitDump>,
            }
            serde_json::to_string_pretty(&ColorfulDump {
                phase1_instance: Instance::Robust(reduced.clone()).to_json(),
                greedy: greedy_json(&p1.greedy),
                lambda: p1.lambda.0.clone(),
                splits: splits
                    .into_iter()
                    .map(|(c, ctx)| SplitDump {
                        ell: ctx.ell,
                        target_red: ctx.target_red,
                        target_blue: ctx.target_blue,
                        instance: Instance::Colorful(c).to_json(),
                    })
                    .collect(),
            })?
        }
        ("selfcov", Instance::Colorful(inst)) => {
            let (intermediate, bctx) = nukc_core::selfcov::phase1_blue(&inst)?;
            let (fin, rctx) = nukc_core::selfcov::phase2_red(&intermediate)?;
            #[derive(Serialize)]
            struct SelfcovDump {
                intermediate: InstanceJson,
                final_instance: InstanceJson,
                blue_greedy: GreedyJson,
                red_greedy: GreedyJson,
                phi: Vec<usize>,
                chi_red: Vec<u64>,
                chi_blue: Vec<u64>,
            }
            serde_json::to_string_pretty(&SelfcovDump {
                intermediate: Instance::Colorful(intermediate.clone()).to_json(),
                final_instance: Instance::Colorful(fin).to_json(),
                blue_greedy: greedy_json(&bctx.greedy),
                red_greedy: greedy_json(&rctx.greedy),
                phi: rctx.phi.clone(),
                chi_red: rctx.chi_red.0.clone(),
                chi_blue: rctx.chi_blue.0.clone(),
            })?
        }
        (step, _) => {
            return Err(Error::Input(format!(
                "step {step} does not apply to this instance kind"
            )))
        }
    };
    write_out(&args.output, &text)?;
    Ok(0)
}

fn run_bench(args: &BenchArgs) -> Result<u8, Error> {
    let mut csv = String::from(
        "seed,n,t,merge_ms,reduce_ms,solve_ms,lift_ms,verify_ms,iterations,\
         dilation_l1,dilation_l2,dilation_l3,dilation_l4,outcome\n",
    );
    for seed in args.seed_start..args.seed_start + args.seeds {
        let params = PlantParams::new(seed, PlantVariant::Nukc, args.n, 4)
            .with_ratio(30.0)
            .with_budgets(vec![2; 4]);
        let planted = plant_instance(&params)?;
        let Instance::Nukc(inst) = &planted.instance else {
            unreachable!()
        };
        let cfg = PipelineConfig::default();
        match solve_4nukc(inst, &cfg)? {
            PipelineOutcome::Solved { ledger, stats, .. } => {
                let dils: Vec<String> = (0..4)
                    .map(|i| {
                        ledger
                            .levels
                            .get(i)
                            .map(|l| format!("{:.4}", l.dilation_realized))
                            .unwrap_or_default()
                    })
                    .collect();
                csv.push_str(&format!(
                    "{seed},{},{},{:.2},{:.2},{:.2},{:.2},{:.2},{},{},solved\n",
                    args.n,
                    4,
                    stats.merge_ms,
                    stats.reduce_ms,
                    stats.solve_ms,
                    stats.lift_ms,
                    stats.verify_ms,
                    stats.iterations,
                    dils.join(","),
                ));
            }
            PipelineOutcome::Infeasible { stats, .. } => {
                csv.push_str(&format!(
                    "{seed},{},{},{:.2},{:.2},{:.2},{:.2},{:.2},{},,,,,infeasible\n",
                    args.n,
                    4,
                    stats.merge_ms,
                    stats.reduce_ms,
                    stats.solve_ms,
                    stats.lift_ms,
                    stats.verify_ms,
                    stats.iterations,
                ));
            }
        }
    }
    write_out(&args.out, &csv)?;
    Ok(0)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Gen(args) => run_gen(args),
        Command::Solve(args) => run_solve(args),
        Command::Brute(args) => run_brute(args),
        Command::Verify(args) => run_verify(args),
        Command::Reduce(args) => run_reduce(args),
        Command::Bench(args) => run_bench(args),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(exit_code_for(&err))
        }
    }
}
