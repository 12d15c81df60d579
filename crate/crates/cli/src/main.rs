//! `flowmatch`: generate P2P trading instances on test-case grids, solve the
//! flow-matching QUBO, settle tariffs and run the benchmark protocols.

mod config;
mod report;
mod svg;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand, ValueEnum};

use flowmatch_core::bench::{
    compute_references, rho_sweep, sa_hyperparameter_sweep, timeout_benchmark, tts_benchmark,
    RunnerOptions, SolverSpec, TtsProtocol,
};
use flowmatch_core::instance::{
    builtin_cases, case_by_name, generate_with, CaseSpec, Instance, DEFAULT_ALPHA,
    DEFAULT_LOAD_MEAN_KWH, DEFAULT_LOAD_STDDEV_KWH, DEFAULT_PERIOD_H,
};
use flowmatch_core::matching::{
    build_qubo_with, export_ising, export_qubo, pair_flows, to_ising, Allocation,
};
use flowmatch_core::settlement::{Settlement, TariffScheme};
use flowmatch_core::solvers::{
    solve_with_split, ConvexSplit, ExactConfig, SaConfig, SolveResult, SolverConfig, SolverKind,
    TabuConfig,
};

use config::{resolve, resolve_opt, FileConfig};

#[derive(Parser)]
#[command(
    name = "flowmatch",
    version,
    about = "P2P grid cost allocation: power-flow matching, QUBO solvers, settlement, benchmarks"
)]
struct Cli {
    /// Configuration file (defaults to ./flowmatch.toml when present).
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a benchmark instance for a built-in case.
    Gen(GenArgs),
    /// Minimize the matching objective of an instance.
    Solve(SolveArgs),
    /// Settle tariffs for a solved assignment.
    Settle(SettleArgs),
    /// Export the optimization model in text form.
    #[command(subcommand)]
    Export(ExportCommand),
    /// Run a benchmark protocol over cases, solvers and seeds.
    #[command(subcommand)]
    Bench(BenchCommand),
    /// Run a parameter sweep.
    #[command(subcommand)]
    Sweep(SweepCommand),
    /// Render reports from persisted benchmark records.
    Report(ReportArgs),
}

#[derive(Args)]
struct GenArgs {
    /// Built-in case name (case9 ... case57).
    #[arg(long)]
    case: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Matching penalty in ct/kWh^2.
    #[arg(long)]
    alpha: Option<f64>,
    /// Grid fee in ct/kWh (defaults to the case value).
    #[arg(long)]
    rho: Option<f64>,
    /// Load distribution center in kWh.
    #[arg(long)]
    mean: Option<f64>,
    /// Load distribution spread in kWh.
    #[arg(long)]
    stddev: Option<f64>,
    /// Trading period in hours.
    #[arg(long)]
    period: Option<f64>,
    #[arg(long, value_name = "FILE")]
    out: PathBuf,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum SolverName {
    Sa,
    Tabu,
    Exact,
}

#[derive(Args)]
struct SolveArgs {
    #[arg(long = "in", value_name = "INSTANCE")]
    input: PathBuf,
    #[arg(long, value_enum)]
    solver: SolverName,
    /// Annealer sweeps per read.
    #[arg(long)]
    sweeps: Option<usize>,
    /// Annealing schedule as `beta_start:beta_end`.
    #[arg(long, value_name = "START:END")]
    beta: Option<String>,
    /// Tabu tenure (default max(10, n/10)).
    #[arg(long)]
    tenure: Option<usize>,
    /// Tabu restart stall (default 5n).
    #[arg(long)]
    stall: Option<usize>,
    #[arg(long)]
    reads: Option<usize>,
    /// Wall-clock budget in seconds.
    #[arg(long)]
    budget: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Replace the wall-clock budget with count budgets (reads / nodes).
    #[arg(long)]
    deterministic: bool,
    /// Node cap for the exact solver in deterministic mode.
    #[arg(long)]
    max_nodes: Option<u64>,
    #[arg(long, value_name = "FILE")]
    out: PathBuf,
}

#[derive(Args)]
struct SettleArgs {
    #[arg(long = "in", value_name = "INSTANCE")]
    input: PathBuf,
    /// Solver result JSON; its best assignment is settled.
    #[arg(long, value_name = "RESULT")]
    assignment: PathBuf,
    /// Output JSON path; a CSV mirror is written next to it.
    #[arg(long, value_name = "FILE")]
    out: PathBuf,
    /// Purchase tariff in ct/kWh.
    #[arg(long, default_value_t = 30.0)]
    lambda_buy: f64,
    /// Feed-in tariff in ct/kWh.
    #[arg(long, default_value_t = 8.0)]
    lambda_sell: f64,
    /// Grid operation share of the purchase tariff in ct/kWh.
    #[arg(long, default_value_t = 15.0)]
    grid_compound: f64,
}

#[derive(Subcommand)]
enum ExportCommand {
    /// Write the QUBO text format.
    Qubo(ExportArgs),
    /// Write the Ising text format.
    Ising(ExportArgs),
}

#[derive(Args)]
struct ExportArgs {
    #[arg(long = "in", value_name = "INSTANCE")]
    input: PathBuf,
    #[arg(long, value_name = "FILE")]
    out: PathBuf,
}

#[derive(Subcommand)]
enum BenchCommand {
    /// Solution quality within the per-case time limit.
    Timeout(BenchArgs),
    /// Expected time to reach a solution within 5% of the optimum.
    Tts(BenchArgs),
}

#[derive(Args)]
struct BenchArgs {
    /// Comma-separated case names.
    #[arg(long, value_name = "LIST")]
    cases: String,
    /// Comma-separated solvers (sa, tabu, exact).
    #[arg(long, value_name = "LIST", default_value = "sa,tabu,exact")]
    solvers: String,
    /// Seed list: `0..19` (inclusive) or `0,3,7`.
    #[arg(long, value_name = "RANGE", default_value = "0..19")]
    seeds: String,
    #[arg(long)]
    alpha: Option<f64>,
    /// Annealer sweeps override (default: per-case tuned value).
    #[arg(long)]
    sweeps: Option<usize>,
    /// Annealing schedule as `beta_start:beta_end`.
    #[arg(long, value_name = "START:END")]
    beta: Option<String>,
    /// Record output directory.
    #[arg(long, value_name = "DIR")]
    out: PathBuf,
    /// Reference solve budget in seconds.
    #[arg(long)]
    ref_budget: Option<f64>,
    #[arg(long)]
    workers: Option<usize>,
    /// Replace wall-clock budgets with count budgets.
    #[arg(long)]
    deterministic: bool,
    /// Reads per run in deterministic mode.
    #[arg(long, default_value_t = 50)]
    det_reads: usize,
    /// Exact-solver node cap in deterministic mode.
    #[arg(long, default_value_t = 200_000)]
    det_nodes: u64,
    /// Draw cap per TTS run in deterministic mode.
    #[arg(long, default_value_t = 200)]
    det_draws: u64,
    /// Acceptance threshold for the TTS protocol.
    #[arg(long, default_value_t = 0.05)]
    eps: f64,
    /// Render SVG plots next to the records.
    #[arg(long)]
    plot: bool,
}

#[derive(Subcommand)]
enum SweepCommand {
    /// Sweep the grid fee parameter and settle each point.
    Rho(RhoArgs),
    /// Sweep annealer hyperparameters with the TTS protocol.
    Sa(SaSweepArgs),
}

#[derive(Args)]
struct RhoArgs {
    #[arg(long)]
    case: String,
    /// Comma-separated alpha values.
    #[arg(long, value_name = "LIST", default_value = "100")]
    alphas: String,
    /// Rho grid as `start:stop:step` (inclusive) or a comma list.
    #[arg(long, value_name = "GRID", default_value = "0:120:5")]
    rho: String,
    #[arg(long, value_name = "RANGE", default_value = "0..0")]
    seeds: String,
    /// Exact solve budget per grid point in seconds.
    #[arg(long, default_value_t = 60.0)]
    budget: f64,
    /// Report the rho reaching this fraction of baseline fees.
    #[arg(long)]
    target_fraction: Option<f64>,
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long)]
    deterministic: bool,
    #[arg(long, value_name = "DIR")]
    out: PathBuf,
    #[arg(long)]
    plot: bool,
}

#[derive(Args)]
struct SaSweepArgs {
    #[arg(long)]
    case: String,
    #[arg(long, value_name = "RANGE", default_value = "0..19")]
    seeds: String,
    /// Comma-separated sweep counts.
    #[arg(long, value_name = "LIST", default_value = "10,30,100,300,1000")]
    sweeps: String,
    /// Comma-separated schedules, each `beta_start:beta_end`.
    #[arg(long, value_name = "LIST", default_value = "0.2:1000")]
    schedules: String,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    ref_budget: Option<f64>,
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long)]
    deterministic: bool,
    #[arg(long, default_value_t = 200)]
    det_draws: u64,
    #[arg(long, value_name = "DIR")]
    out: PathBuf,
    #[arg(long)]
    plot: bool,
}

#[derive(Args)]
struct ReportArgs {
    /// Directory of benchmark records.
    #[arg(long = "in", value_name = "DIR")]
    input: PathBuf,
    #[arg(long, value_name = "DIR")]
    out_dir: PathBuf,
    /// Comma-separated formats: csv, json, svg.
    #[arg(long, default_value = "csv")]
    format: String,
}

enum CliError {
    Usage(String),
    Data(String),
}

impl From<flowmatch_core::Error> for CliError {
    fn from(e: flowmatch_core::Error) -> Self {
        CliError::Data(e.to_string())
    }
}

type CliResult<T> = Result<T, CliError>;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e)
            if matches!(
                e.kind(),
                ErrorKind::DisplayHelp
                    | ErrorKind::DisplayVersion
                    | ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand
            ) =>
        {
            print!("{e}");
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            eprint!("error[usage]: {e}");
            return ExitCode::from(1);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(message)) => {
            eprintln!("error[usage]: {message}");
            ExitCode::from(1)
        }
        Err(CliError::Data(message)) => {
            eprintln!("error[data]: {message}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: Cli) -> CliResult<()> {
    let file = FileConfig::load(cli.config.as_deref()).map_err(CliError::Usage)?;
    match cli.command {
        Command::Gen(args) => cmd_gen(args, &file),
        Command::Solve(args) => cmd_solve(args, &file),
        Command::Settle(args) => cmd_settle(args),
        Command::Export(command) => cmd_export(command),
        Command::Bench(command) => cmd_bench(command, &file),
        Command::Sweep(command) => cmd_sweep(command, &file),
        Command::Report(args) => cmd_report(args),
    }
}

fn lookup_case(name: &str) -> CliResult<CaseSpec> {
    case_by_name(name).map_err(|_| {
        let known: Vec<String> = builtin_cases().into_iter().map(|c| c.name).collect();
        CliError::Usage(format!(
            "unknown case `{name}`; built-in cases: {}",
            known.join(", ")
        ))
    })
}

fn parse_seeds(text: &str) -> CliResult<Vec<u64>> {
    let text = text.trim();
    if let Some((start, end)) = text.split_once("..") {
        let start: u64 = start
            .trim()
            .parse()
            .map_err(|_| CliError::Usage(format!("bad seed range `{text}`")))?;
        let end: u64 = end
            .trim()
            .parse()
            .map_err(|_| CliError::Usage(format!("bad seed range `{text}`")))?;
        if end < start {
            return Err(CliError::Usage(format!("empty seed range `{text}`")));
        }
        return Ok((start..=end).collect());
    }
    text.split(',')
        .map(|s| {
            s.trim()
                .parse()
                .map_err(|_| CliError::Usage(format!("bad seed `{s}`")))
        })
        .collect()
}

fn parse_f64_list(text: &str, what: &str) -> CliResult<Vec<f64>> {
    let values: Result<Vec<f64>, _> = text.split(',').map(|s| s.trim().parse()).collect();
    let values = values.map_err(|_| CliError::Usage(format!("bad {what} list `{text}`")))?;
    if values.is_empty() {
        return Err(CliError::Usage(format!("empty {what} list")));
    }
    Ok(values)
}

/// `start:stop:step` (inclusive stop) or a plain comma list.
fn parse_grid(text: &str) -> CliResult<Vec<f64>> {
    let fields: Vec<&str> = text.split(':').collect();
    if fields.len() == 3 {
        let parse = |s: &str| -> CliResult<f64> {
            s.trim()
                .parse()
                .map_err(|_| CliError::Usage(format!("bad grid `{text}`")))
        };
        let (start, stop, step) = (parse(fields[0])?, parse(fields[1])?, parse(fields[2])?);
        if step <= 0.0 || stop < start {
            return Err(CliError::Usage(format!("bad grid `{text}`")));
        }
        let mut values = Vec::new();
        let mut v = start;
        while v <= stop + 1e-9 * step {
            values.push(v);
            v += step;
        }
        return Ok(values);
    }
    parse_f64_list(text, "grid")
}

fn parse_beta(text: &str) -> CliResult<(f64, f64)> {
    let (start, end) = text
        .split_once(':')
        .ok_or_else(|| CliError::Usage(format!("bad schedule `{text}`, expected START:END")))?;
    let parse = |s: &str| -> CliResult<f64> {
        s.trim()
            .parse()
            .map_err(|_| CliError::Usage(format!("bad schedule `{text}`")))
    };
    Ok((parse(start)?, parse(end)?))
}

fn parse_solvers(
    text: &str,
    sweeps: Option<usize>,
    beta: Option<&str>,
) -> CliResult<Vec<SolverSpec>> {
    let (beta_start, beta_end) = match beta {
        Some(b) => parse_beta(b)?,
        None => (0.2, 1000.0),
    };
    text.split(',')
        .map(|name| match name.trim() {
            "sa" => Ok(SolverSpec::Sa {
                sweeps,
                beta_start,
                beta_end,
            }),
            "tabu" => Ok(SolverSpec::Tabu {
                tenure: None,
                max_stall: None,
            }),
            "exact" => Ok(SolverSpec::Exact),
            other => Err(CliError::Usage(format!(
                "unknown solver `{other}` (expected sa, tabu or exact)"
            ))),
        })
        .collect()
}

fn workers_setting(flag: Option<usize>, file: &FileConfig) -> usize {
    resolve_opt(flag, file.workers)
        .or_else(|| {
            std::env::var("FLOWMATCH_WORKERS")
                .ok()
                .and_then(|v| v.parse().ok())
        })
        .unwrap_or_else(flowmatch_core::bench::default_workers)
}

fn load_instance(path: &Path) -> CliResult<Instance> {
    Instance::load(path).map_err(|e| CliError::Data(e.to_string()))
}

fn cmd_gen(args: GenArgs, file: &FileConfig) -> CliResult<()> {
    let case = lookup_case(&args.case)?;
    let alpha = resolve(args.alpha, file.alpha, DEFAULT_ALPHA);
    let rho = resolve(args.rho, file.rho, case.rho);
    let mean = resolve(args.mean, file.mean_kwh, DEFAULT_LOAD_MEAN_KWH);
    let stddev = resolve(args.stddev, file.stddev_kwh, DEFAULT_LOAD_STDDEV_KWH);
    let period = resolve(args.period, file.period_h, DEFAULT_PERIOD_H);
    let instance = generate_with(&case, args.seed, alpha, rho, mean, stddev, period)?;
    instance.save(&args.out)?;
    println!(
        "wrote {} ({} buses, {} lines, seed {})",
        args.out.display(),
        instance.grid.bus_count(),
        instance.grid.line_count(),
        args.seed
    );
    Ok(())
}

fn cmd_solve(args: SolveArgs, file: &FileConfig) -> CliResult<()> {
    let instance = load_instance(&args.input)?;
    let pf = pair_flows(&instance)?;
    let allocation = Allocation::compute(&instance, &pf)?;
    let qubo = build_qubo_with(&instance, &pf, &allocation)?;
    let split = ConvexSplit::from_pair_flows(&instance, &pf);

    let sweeps = resolve_opt(args.sweeps, file.sweeps);
    let beta = match args.beta.as_deref() {
        Some(b) => Some(parse_beta(b)?),
        None => file.beta_start.zip(file.beta_end),
    };
    let kind = match args.solver {
        SolverName::Sa => {
            let (beta_start, beta_end) = beta.unwrap_or((0.2, 1000.0));
            SolverKind::Sa(SaConfig {
                num_sweeps: sweeps.unwrap_or(1000),
                beta_start,
                beta_end,
            })
        }
        SolverName::Tabu => SolverKind::Tabu(TabuConfig {
            tenure: resolve_opt(args.tenure, file.tenure),
            max_stall_iterations: resolve_opt(args.stall, file.stall),
        }),
        SolverName::Exact => SolverKind::Exact(ExactConfig {
            max_nodes: if args.deterministic {
                Some(args.max_nodes.unwrap_or(200_000))
            } else {
                args.max_nodes
            },
            ..ExactConfig::default()
        }),
    };
    let budget_s = resolve_opt(args.budget, file.budget_s);
    let cfg = SolverConfig {
        kind,
        num_reads: resolve(args.reads, file.reads, 1),
        budget: if args.deterministic {
            None
        } else {
            budget_s.map(Duration::from_secs_f64)
        },
        seed: args.seed.unwrap_or(0),
    };
    let result =
        solve_with_split(&qubo, &cfg, Some(&split)).map_err(|e| CliError::Usage(e.to_string()))?;
    result.save(&args.out)?;
    println!(
        "best cost {:.6} ct over {} samples (proven optimal: {}, timed out: {}) -> {}",
        result.best.cost,
        result.samples.len(),
        result.proven_optimal,
        result.timed_out,
        args.out.display()
    );
    Ok(())
}

fn cmd_settle(args: SettleArgs) -> CliResult<()> {
    let instance = load_instance(&args.input)?;
    let result = SolveResult::load(&args.assignment).map_err(|e| CliError::Data(e.to_string()))?;
    let pf = pair_flows(&instance)?;
    if result.best.x.len() != pf.num_trades() {
        return Err(CliError::Data(format!(
            "assignment has {} variables but the instance defines {} trades",
            result.best.x.len(),
            pf.num_trades()
        )));
    }
    let allocation = Allocation::compute(&instance, &pf)?;
    let tariffs = TariffScheme::new(args.lambda_buy, args.lambda_sell, args.grid_compound)
        .map_err(|e| CliError::Usage(e.to_string()))?;
    let settlement = Settlement::compute(
        &result.best.x,
        &instance,
        pf.trades(),
        &allocation.trade_costs,
        &tariffs,
    )?;
    settlement.save(&args.out)?;
    let csv_path = args.out.with_extension("csv");
    std::fs::write(&csv_path, settlement.to_csv()).map_err(flowmatch_core::Error::from)?;
    let community = &settlement.community;
    println!(
        "p2p fees {:.2} ct, residual {:.2} ct, total {:.2} ct (baseline {:.2} ct), \
         p2p ratio {:.3} -> {}, {}",
        community.p2p_fees_ct,
        community.residual_fees_ct,
        community.total_dso_fees_ct,
        community.baseline_fees_ct,
        community.p2p_ratio,
        args.out.display(),
        csv_path.display()
    );
    Ok(())
}

fn cmd_export(command: ExportCommand) -> CliResult<()> {
    let (args, ising) = match command {
        ExportCommand::Qubo(args) => (args, false),
        ExportCommand::Ising(args) => (args, true),
    };
    let instance = load_instance(&args.input)?;
    let pf = pair_flows(&instance)?;
    let allocation = Allocation::compute(&instance, &pf)?;
    let qubo = build_qubo_with(&instance, &pf, &allocation)?;
    if ising {
        let model = to_ising(&qubo);
        export_ising(&model, &args.out)?;
        println!(
            "wrote {} ({} spins, {} entries)",
            args.out.display(),
            model.n,
            model.couplings.len() + model.fields.iter().filter(|h| **h != 0.0).count()
        );
    } else {
        export_qubo(&qubo, &args.out)?;
        println!(
            "wrote {} ({} variables, {} entries)",
            args.out.display(),
            qubo.num_variables(),
            qubo.num_entries()
        );
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn runner_options(
    alpha: Option<f64>,
    workers: Option<usize>,
    deterministic: bool,
    det_reads: usize,
    det_nodes: u64,
    det_draws: u64,
    ref_budget: Option<f64>,
    file: &FileConfig,
) -> RunnerOptions {
    RunnerOptions {
        alpha: resolve(alpha, file.alpha, DEFAULT_ALPHA),
        workers: workers_setting(workers, file),
        deterministic: deterministic || file.deterministic.unwrap_or(false),
        deterministic_reads: det_reads,
        deterministic_max_nodes: det_nodes,
        deterministic_max_draws: det_draws,
        reference_budget: Some(Duration::from_secs_f64(resolve(
            ref_budget,
            file.ref_budget_s,
            3600.0,
        ))),
    }
}

fn cmd_bench(command: BenchCommand, file: &FileConfig) -> CliResult<()> {
    let (args, tts) = match command {
        BenchCommand::Timeout(args) => (args, false),
        BenchCommand::Tts(args) => (args, true),
    };
    let cases: Vec<CaseSpec> = args
        .cases
        .split(',')
        .map(|name| lookup_case(name.trim()))
        .collect::<CliResult<_>>()?;
    let solvers = parse_solvers(&args.solvers, args.sweeps, args.beta.as_deref())?;
    let seeds = parse_seeds(&args.seeds)?;
    let options = runner_options(
        args.alpha,
        args.workers,
        args.deterministic,
        args.det_reads,
        args.det_nodes,
        args.det_draws,
        args.ref_budget,
        file,
    );

    let refs_dir = args.out.join("refs");
    let refs = compute_references(&cases, &seeds, &options, Some(&refs_dir))?;
    let unproven = refs.iter().filter(|r| !r.proven_optimal).count();
    if unproven > 0 {
        eprintln!("warning: {unproven} reference solutions are not proven optimal");
    }

    let records = if tts {
        let protocol = TtsProtocol {
            eps_threshold: args.eps,
            ..TtsProtocol::default()
        };
        let (records, skipped) =
            tts_benchmark(&cases, &solvers, &seeds, &refs, &protocol, &options, &args.out)?;
        for instance in skipped {
            eprintln!("warning: skipped {instance}: reference not proven optimal");
        }
        records
    } else {
        timeout_benchmark(&cases, &solvers, &seeds, &refs, &options, &args.out)?
    };

    let mut formats = vec!["csv".to_string()];
    if args.plot {
        formats.push("svg".to_string());
    }
    let written = report::emit(&records, &formats, &args.out)?;
    println!(
        "{} runs recorded in {}; wrote {}",
        records.len(),
        args.out.display(),
        written
            .iter()
            .map(|p| p.display().to_string())
            .collect::<Vec<_>>()
            .join(", ")
    );
    Ok(())
}

fn cmd_sweep(command: SweepCommand, file: &FileConfig) -> CliResult<()> {
    match command {
        SweepCommand::Rho(args) => cmd_sweep_rho(args, file),
        SweepCommand::Sa(args) => cmd_sweep_sa(args, file),
    }
}

fn cmd_sweep_rho(args: RhoArgs, file: &FileConfig) -> CliResult<()> {
    let case = lookup_case(&args.case)?;
    let alphas = parse_f64_list(&args.alphas, "alpha")?;
    let rho_grid = parse_grid(&args.rho)?;
    let seeds = parse_seeds(&args.seeds)?;
    let options = runner_options(
        None,
        args.workers,
        args.deterministic,
        50,
        200_000,
        200,
        None,
        file,
    );
    let rows = rho_sweep(
        &case,
        &seeds,
        &alphas,
        &rho_grid,
        Some(Duration::from_secs_f64(args.budget)),
        &TariffScheme::default(),
        &options,
    )?;
    std::fs::create_dir_all(&args.out).map_err(flowmatch_core::Error::from)?;
    let csv_path = args.out.join("rho_sweep.csv");
    std::fs::write(&csv_path, report::rho_sweep_csv(&rows))
        .map_err(flowmatch_core::Error::from)?;
    let json_path = args.out.join("rho_sweep.json");
    let json = serde_json::to_string_pretty(&rows).map_err(flowmatch_core::Error::from)?;
    std::fs::write(&json_path, json + "\n").map_err(flowmatch_core::Error::from)?;
    if args.plot {
        report::plot_rho_sweep(&rows, &args.out)?;
    }
    if let Some(fraction) = args.target_fraction {
        for &alpha in &alphas {
            for &seed in &seeds {
                let series: Vec<_> = rows
                    .iter()
                    .filter(|r| r.alpha == alpha && r.seed == seed)
                    .cloned()
                    .collect();
                match flowmatch_core::bench::find_rho_for_fee_fraction(&series, fraction) {
                    Some(rho) => println!(
                        "alpha {alpha} seed {seed}: {:.0}% of baseline at rho = {rho:.2}",
                        100.0 * fraction
                    ),
                    None => println!(
                        "alpha {alpha} seed {seed}: no {:.0}%-of-baseline crossing on the grid",
                        100.0 * fraction
                    ),
                }
            }
        }
    }
    println!("{} grid points -> {}", rows.len(), csv_path.display());
    Ok(())
}

fn cmd_sweep_sa(args: SaSweepArgs, file: &FileConfig) -> CliResult<()> {
    let case = lookup_case(&args.case)?;
    let seeds = parse_seeds(&args.seeds)?;
    let sweep_grid: Vec<usize> = args
        .sweeps
        .split(',')
        .map(|s| {
            s.trim()
                .parse()
                .map_err(|_| CliError::Usage(format!("bad sweeps list `{}`", args.sweeps)))
        })
        .collect::<CliResult<_>>()?;
    let schedule_grid: Vec<(f64, f64)> = args
        .schedules
        .split(',')
        .map(parse_beta)
        .collect::<CliResult<_>>()?;
    let options = runner_options(
        args.alpha,
        args.workers,
        args.deterministic,
        50,
        200_000,
        args.det_draws,
        args.ref_budget,
        file,
    );
    let refs_dir = args.out.join("refs");
    let refs = compute_references(&[case.clone()], &seeds, &options, Some(&refs_dir))?;
    let outcome = sa_hyperparameter_sweep(
        &case,
        &seeds,
        &sweep_grid,
        &schedule_grid,
        &refs,
        &TtsProtocol::default(),
        &options,
    )?;
    for warning in &outcome.warnings {
        eprintln!("warning: {warning}");
    }
    std::fs::create_dir_all(&args.out).map_err(flowmatch_core::Error::from)?;
    let csv_path = args.out.join("sa_sweep.csv");
    std::fs::write(&csv_path, report::sa_sweep_csv(&outcome.rows))
        .map_err(flowmatch_core::Error::from)?;
    if args.plot {
        report::plot_sa_sweep(&outcome.rows, &args.out)?;
    }
    println!("{} cells -> {}", outcome.rows.len(), csv_path.display());
    Ok(())
}

fn cmd_report(args: ReportArgs) -> CliResult<()> {
    let records = flowmatch_core::bench::load_records(&args.input)
        .map_err(|e| CliError::Data(e.to_string()))?;
    if records.is_empty() {
        return Err(CliError::Data(format!(
            "{}: {}",
            args.input.display(),
            flowmatch_core::Error::EmptyInput
        )));
    }
    let formats: Vec<String> = args
        .format
        .split(',')
        .map(|s| s.trim().to_string())
        .collect();
    let written = report::emit(&records, &formats, &args.out_dir)
        .map_err(|e| CliError::Usage(e.to_string()))?;
    println!(
        "{} records -> {}",
        records.len(),
        written
            .iter()
            .map(|p| p.display().to_string())
            .collect::<Vec<_>>()
            .join(", ")
    );
    Ok(())
}
