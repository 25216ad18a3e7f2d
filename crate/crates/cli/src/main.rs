use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use meshnoc_cli::{
    cmd_bounds, cmd_freeze_demo, cmd_golden, cmd_ordering_demo, cmd_sweep, CliError,
    ExperimentPlan, PlanFile,
};

/// Cycle-accurate mesh network simulator.
#[derive(Parser)]
#[command(name = "meshnoc", version)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Write, fence and read back words across the two-router topology and
    /// check the response cycles.
    Golden {
        #[arg(long, default_value_t = 3)]
        words: u32,
        #[arg(long, default_value_t = 4)]
        endpoint_fifo_depth: usize,
    },
    /// Sweep injection rates and write one CSV row per rate and seed.
    Sweep(Box<SweepArgs>),
    /// Print bisection and credit sizing bounds for a k x k mesh.
    Bounds {
        #[arg(long)]
        k: u32,
    },
    /// Show a near reply overtaking an earlier far one.
    OrderingDemo,
    /// Freeze and thaw a streaming master through its config registers.
    FreezeDemo {
        #[arg(long, default_value_t = 150)]
        cycles: u64,
    },
}

#[derive(Args)]
struct SweepArgs {
    /// TOML file with any of the keys below; flags win over the file.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    cols: Option<u32>,
    #[arg(long)]
    rows: Option<u32>,
    /// uniform, transpose or nearest-neighbor.
    #[arg(long)]
    pattern: Option<String>,
    /// Comma-separated, ascending.
    #[arg(long, value_delimiter = ',')]
    rates: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    seeds: Option<Vec<u64>>,
    #[arg(long)]
    router_fifo_depth: Option<usize>,
    #[arg(long)]
    endpoint_fifo_depth: Option<usize>,
    /// Credits per endpoint; defaults to the longest round trip.
    #[arg(long)]
    credits: Option<u32>,
    #[arg(long)]
    warmup: Option<u64>,
    /// Packets to measure per point.
    #[arg(long)]
    measure: Option<u64>,
    #[arg(long)]
    load_fraction: Option<f64>,
    #[arg(long)]
    max_cycles: Option<u64>,
    /// CSV destination; stdout when absent.
    #[arg(long, short)]
    output: Option<PathBuf>,
}

impl SweepArgs {
    fn plan(self) -> Result<ExperimentPlan, CliError> {
        let base = match &self.config {
            Some(p) => PlanFile::load(p)?,
            None => PlanFile::default(),
        };
        let flags = PlanFile {
            cols: self.cols,
            rows: self.rows,
            pattern: self.pattern,
            rates: self.rates,
            seeds: self.seeds,
            router_fifo_depth: self.router_fifo_depth,
            endpoint_fifo_depth: self.endpoint_fifo_depth,
            credits: self.credits,
            warmup: self.warmup,
            measure: self.measure,
            load_fraction: self.load_fraction,
            max_cycles: self.max_cycles,
            output: self.output,
        };
        ExperimentPlan::from_file(flags.or(base))
    }
}

fn run(cli: Cli) -> Result<String, CliError> {
    match cli.cmd {
        Cmd::Golden {
            words,
            endpoint_fifo_depth,
        } => cmd_golden(words, endpoint_fifo_depth),
        Cmd::Sweep(args) => {
            let plan = args.plan()?;
            let rows = cmd_sweep(&plan, std::io::stdout().lock())?;
            let saturated = rows.iter().filter(|r| r.saturated).count();
            log::info!("{} points, {saturated} saturated", rows.len());
            Ok(String::new())
        }
        Cmd::Bounds { k } => cmd_bounds(k),
        Cmd::OrderingDemo => cmd_ordering_demo(),
        Cmd::FreezeDemo { cycles } => cmd_freeze_demo(cycles),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(out) => {
            print!("{out}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
