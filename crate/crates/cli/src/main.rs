use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use lossrank_core::datasets::{default_prostate_path, load_prostate, read_csv_file};
use lossrank_core::lasso_path::{compute_lars_path, default_max_steps};
use lossrank_core::selector::{criterion_traces, LambdaGrid, SelectOptions};
use lossrank_core::simbench::{run_study, SimDesign};
use lossrank_core::{select_with, standardize, Criterion, Dataset, Error};

mod render;

#[derive(Parser, Debug)]
#[command(name = "lossrank", version, about = "Lasso-path variable selection with the loss rank criterion")]
struct Cli {
    /// Output format.
    #[arg(long, value_enum, default_value_t = Format::Table, global = true)]
    output: Format,

    #[command(subcommand)]
    command: Command,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Table,
    Csv,
    Json,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Score every subset on the lasso path and report the choice of each criterion.
    Select {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        crit: CriteriaArg,
        /// GCV / BIC-tilde grid as MIN,MAX,COUNT (log-spaced).
        #[arg(long, value_parser = parse_grid)]
        lambda_grid: Option<LambdaGrid>,
    },
    /// List the breakpoints of the lasso path.
    Path {
        #[command(flatten)]
        data: DataArgs,
        /// Emit criterion values along the lambda grid instead of breakpoints
        /// (csv), or in addition to them (table, json).
        #[arg(long)]
        traces: bool,
        /// Grid as MIN,MAX,COUNT (log-spaced).
        #[arg(long, value_parser = parse_grid)]
        lambda_grid: Option<LambdaGrid>,
    },
    /// Monte Carlo study on an AR(1) Gaussian design.
    Simulate(SimArgs),
    /// Run all criteria on the prostate cancer data.
    DemoProstate {
        /// CSV with columns lcavol, lweight, age, lbph, svi, lcp, gleason, pgg45, lpsa.
        #[arg(long)]
        data: Option<PathBuf>,
    },
}

#[derive(Args, Debug)]
struct DataArgs {
    /// CSV file with a header row.
    input: PathBuf,
    /// Response column (default: last column).
    #[arg(long)]
    response: Option<String>,
}

#[derive(Args, Debug)]
struct CriteriaArg {
    /// Comma-separated criteria: LR, BIC, GCV, BIC_TILDE.
    #[arg(long, value_delimiter = ',', value_parser = parse_criterion, default_value = "LR,BIC,GCV,BIC_TILDE")]
    criteria: Vec<Criterion>,
}

#[derive(Args, Debug)]
struct SimArgs {
    /// beta = (3, 1.5, 0, 0, 2, 0, 0, 0) (default).
    #[arg(long, conflicts_with = "example2")]
    example1: bool,
    /// d = 300, every 30th coefficient equal to 10.
    #[arg(long)]
    example2: bool,
    #[arg(long, default_value_t = 1.0)]
    sigma: f64,
    /// Sample size (default: 100 for example1, 500 for example2).
    #[arg(long)]
    n: Option<usize>,
    #[arg(long, default_value_t = 100)]
    reps: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// AR(1) correlation between neighbouring covariates.
    #[arg(long, default_value_t = 0.5)]
    corr: f64,
    /// Worker threads (default: available cores).
    #[arg(long)]
    workers: Option<usize>,
    /// Draw one design and reuse it in every replication.
    #[arg(long)]
    fixed_design: bool,
    #[command(flatten)]
    crit: CriteriaArg,
}

fn parse_criterion(s: &str) -> Result<Criterion, String> {
    s.trim().parse::<Criterion>().map_err(|e| e.to_string())
}

fn parse_grid(s: &str) -> Result<LambdaGrid, String> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    if parts.len() != 3 {
        return Err("expected MIN,MAX,COUNT".into());
    }
    let min: f64 = parts[0].parse().map_err(|_| format!("bad MIN '{}'", parts[0]))?;
    let max: f64 = parts[1].parse().map_err(|_| format!("bad MAX '{}'", parts[1]))?;
    let count: usize = parts[2].parse().map_err(|_| format!("bad COUNT '{}'", parts[2]))?;
    LambdaGrid::absolute(min, max, count).map_err(|e| e.to_string())
}

/// Exit status: 1 usage, 2 data, 3 computation.
#[derive(Debug)]
enum Failure {
    Usage(String),
    Data(Error),
    Compute(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 1,
            Failure::Data(_) => 2,
            Failure::Compute(_) => 3,
        }
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Failure::Usage(m) | Failure::Compute(m) => f.write_str(m),
            Failure::Data(e) => write!(f, "{e}"),
        }
    }
}

fn compute(e: Error) -> Failure {
    Failure::Compute(e.to_string())
}

fn load(data: &DataArgs) -> Result<Dataset, Failure> {
    read_csv_file(&data.input, data.response.as_deref()).map_err(Failure::Data)
}

fn run(cli: Cli) -> Result<String, Failure> {
    let format = cli.output;
    match cli.command {
        Command::Select { data, crit, lambda_grid } => {
            let ds = load(&data)?;
            let opts = SelectOptions {
                criteria: crit.criteria,
                max_steps: None,
                grid: lambda_grid.unwrap_or_default(),
            };
            let report = select_with(&ds, &opts).map_err(|e| match e {
                Error::ConstantColumn(_) | Error::NonFiniteInput => Failure::Data(e),
                e => compute(e),
            })?;
            render::selection(&report, format)
        }
        Command::Path { data, traces, lambda_grid } => {
            let ds = load(&data)?;
            let std = standardize(&ds).map_err(Failure::Data)?;
            let path = compute_lars_path(&std, default_max_steps(std.n(), std.d())).map_err(compute)?;
            let trace = if traces {
                let grid = lambda_grid.unwrap_or_default().values(path.lambda_max);
                Some(criterion_traces(&std, &path, &grid).map_err(compute)?)
            } else {
                None
            };
            render::path(&std, &path, trace.as_deref(), format)
        }
        Command::Simulate(args) => {
            let mut design = if args.example2 {
                SimDesign::example2(args.sigma, args.n.unwrap_or(500))
            } else {
                SimDesign::example1(args.sigma, args.n.unwrap_or(100))
            };
            design.reps = args.reps;
            design.seed = args.seed;
            design.corr = args.corr;
            design.fixed_design = args.fixed_design;
            design.criteria = args.crit.criteria;
            design.validate().map_err(|e| Failure::Usage(e.to_string()))?;
            let workers = args
                .workers
                .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
            if workers == 0 {
                return Err(Failure::Usage("--workers must be at least 1".into()));
            }
            let tally = run_study(&design, workers).map_err(compute)?;
            let out = render::tally(&tally, format)?;
            if tally.failures.is_empty() {
                Ok(out)
            } else {
                print!("{out}");
                let detail: Vec<String> = tally.failures.iter().map(|f| format!("rep {}: {}", f.rep, f.error)).collect();
                Err(Failure::Compute(format!(
                    "{} replication(s) failed\n{}",
                    tally.failures.len(),
                    detail.join("\n")
                )))
            }
        }
        Command::DemoProstate { data } => {
            let path = data.unwrap_or_else(default_prostate_path);
            let ds = load_prostate(&path).map_err(Failure::Data)?;
            let demo = render::ProstateDemo::run(&ds).map_err(compute)?;
            let out = demo.render(format)?;
            match demo.check() {
                Ok(()) => Ok(out),
                Err(msg) => {
                    print!("{out}");
                    Err(Failure::Compute(msg))
                }
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(out) => {
            print!("{out}");
            ExitCode::SUCCESS
        }
        Err(f) => {
            eprintln!("error: {f}");
            ExitCode::from(f.code())
        }
    }
}
