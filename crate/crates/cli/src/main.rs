use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use esgame_cli::solve::{current_ratio, PointResult};
use esgame_cli::{
    load_scenario, parse_sweep, solve_point, sweep, write_rows, write_trace, CliError, CliResult,
    Mechanism, SolveOptions, SweepRow,
};
use esgame_core::{CapPolicy, CentralConfig, Policy, Selector};

#[derive(Parser)]
#[command(
    name = "esgame",
    version,
    about = "Risk-aware energy sharing game solver"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve a scenario, or sweep its renewable capacity, and emit CSV rows.
    Solve(SolveArgs),
}

#[derive(clap::Args)]
struct SolveArgs {
    /// Scenario file (TOML).
    scenario: PathBuf,

    /// Allocation policy: pa or es.
    #[arg(long, default_value = "pa")]
    policy: Policy,

    /// Comma-separated mechanisms to report.
    #[arg(long, value_enum, value_delimiter = ',', default_value = "ne_worst")]
    mechanism: Vec<Mechanism>,

    /// Equilibrium profile for the ne mechanisms: worst, best or midpoint.
    #[arg(long)]
    selector: Option<Selector>,

    /// Cap of the distributed scheme: equal:<v>, random or none.
    #[arg(long, default_value = "none")]
    cap: CapPolicy,

    #[arg(long, default_value_t = 0)]
    seed: u64,

    /// Step budget of the distributed scheme.
    #[arg(long, default_value_t = 1000)]
    steps: usize,

    /// Convergence tolerance of the distributed scheme.
    #[arg(long, default_value_t = esgame_core::distalg::DEFAULT_TOL)]
    tol: f64,

    /// Write CSV here instead of standard output.
    #[arg(long)]
    out: Option<PathBuf>,

    /// Capacity sweep `start:stop:step` over RE / D_total.
    #[arg(long)]
    sweep_re: Option<String>,

    /// Points per axis of the equal-sharing central grid search.
    #[arg(long, default_value_t = CentralConfig::default().grid)]
    grid: usize,

    /// Write the distributed best-response trace as CSV.
    #[arg(long)]
    trace: Option<PathBuf>,
}

fn create(path: &PathBuf) -> CliResult<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| CliError::Output(format!("{}: {e}", path.display())))
}

fn summary(r: &SweepRow) -> String {
    let mut line = format!(
        "re_ratio={} policy={} mechanism={} cost_total={} demand_day={}",
        r.re_ratio, r.policy, r.mechanism, r.cost_total, r.demand_day
    );
    if let Some(poa) = r.poa {
        line += &format!(" poa={poa}");
    }
    if let Some(case) = &r.ne_case {
        line += &format!(" ne_case={case}");
    }
    if let Some(steps) = r.steps {
        line += &format!(" steps={steps}");
    }
    line
}

fn run_solve(args: SolveArgs) -> CliResult<()> {
    let mut opts = SolveOptions::new(args.policy, args.mechanism);
    opts.selector = args.selector;
    opts.cap = args.cap;
    opts.seed = args.seed;
    opts.steps = args.steps;
    opts.tol = args.tol;
    opts.central.grid = args.grid;
    opts.check()?;

    let ratios = args.sweep_re.as_deref().map(parse_sweep).transpose()?;
    if args.trace.is_some() {
        if !opts.mechanisms.contains(&Mechanism::Distributed) {
            return Err(CliError::Usage(
                "--trace needs --mechanism distributed".into(),
            ));
        }
        if ratios.is_some() {
            return Err(CliError::Usage(
                "--trace cannot be combined with --sweep-re".into(),
            ));
        }
    }

    let scenario = load_scenario(&args.scenario)?;
    let rows = match &ratios {
        Some(ratios) => sweep(&scenario, ratios, &opts)?,
        None => {
            let PointResult { rows, run } =
                solve_point(&scenario, current_ratio(&scenario)?, &opts)?;
            if let (Some(path), Some(run)) = (&args.trace, &run) {
                write_trace(create(path)?, &scenario, run)?;
            }
            rows
        }
    };

    match &args.out {
        Some(path) => {
            write_rows(create(path)?, &rows)?;
            let mut stdout = io::stdout().lock();
            for r in &rows {
                writeln!(stdout, "{}", summary(r))?;
            }
        }
        None => write_rows(io::stdout().lock(), &rows)?,
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Solve(args) => run_solve(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error[{}]: {e}", e.kind());
            ExitCode::from(e.exit_code())
        }
    }
}
