use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use triosc::config::parse_config;
use triosc::error::Error;
use triosc::runner::{run_dfs_scan, run_evolve, run_sweep};
use triosc::validate::run_validate;

/// Exact Gaussian dynamics and quantum-correlation measures for a
/// three-oscillator chain with a tunable mediator.
#[derive(Parser)]
#[command(name = "triosc", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Worker threads (default: available parallelism).
    #[arg(long, global = true)]
    workers: Option<usize>,

    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Evolve one configuration and emit the measure time series.
    Evolve {
        /// Path to the JSON configuration.
        #[arg(long)]
        config: PathBuf,
    },
    /// Evaluate long-time averages over a 2-D parameter grid.
    Sweep {
        #[arg(long)]
        config: PathBuf,
    },
    /// Scan the time-averaged fidelity susceptibility over the mediator
    /// frequency.
    DfsScan {
        #[arg(long)]
        config: PathBuf,
    },
    /// Run the randomized invariant suite and report residuals.
    Validate {
        /// Seed for the randomized corpora (physics is deterministic; the
        /// seed only selects the corpus).
        #[arg(long, default_value_t = 42)]
        seed: u64,
    },
}

fn load_config(path: &PathBuf) -> Result<triosc::config::RunConfig, Error> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    parse_config(&text)
}

fn main() -> ExitCode {
    let cli = Cli::parse();

    let threads = cli.workers.unwrap_or_else(|| {
        std::thread::available_parallelism()
            .map(|n| n.get())
            .unwrap_or(1)
    });
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(threads).build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: cannot build thread pool: {e}");
            return ExitCode::from(2);
        }
    };

    let result: Result<ExitCode, Error> = pool.install(|| match &cli.command {
        Command::Evolve { config } => {
            let cfg = load_config(config)?;
            let art = run_evolve(&cfg, &cli.out)?;
            println!(
                "evolve: {} samples, <E_N> = {:.6e}, <D> = {:.6e}, <chi_F> = {:.6e}",
                art.series.times.len(),
                art.summary.averages.e_n,
                art.summary.averages.discord,
                art.summary.averages.chi_f
            );
            println!("wrote {}/series.csv and summary.json", cli.out.display());
            Ok(ExitCode::SUCCESS)
        }
        Command::Sweep { config } => {
            let cfg = load_config(config)?;
            let art = run_sweep(&cfg, &cli.out)?;
            let failed = art
                .rows
                .iter()
                .filter(|r| r.values.iter().any(|v| v.is_none()))
                .count();
            println!(
                "sweep: {} rows ({} with null quantities)",
                art.rows.len(),
                failed
            );
            println!("wrote {}/sweep.csv", cli.out.display());
            Ok(ExitCode::SUCCESS)
        }
        Command::DfsScan { config } => {
            let cfg = load_config(config)?;
            let art = run_dfs_scan(&cfg, &cli.out)?;
            println!("dfs-scan: {} points", art.rows.len());
            println!("wrote {}/dfs_scan.csv", cli.out.display());
            Ok(ExitCode::SUCCESS)
        }
        Command::Validate { seed } => {
            let report = run_validate(*seed)?;
            print!("{}", report.render_lines());
            std::fs::create_dir_all(&cli.out)?;
            let json = serde_json::to_string_pretty(&report)
                .map_err(|e| Error::Numerical(format!("report serialization failed: {e}")))?;
            std::fs::write(cli.out.join("validation.json"), json + "\n")?;
            println!("wrote {}/validation.json", cli.out.display());
            if report.passed {
                Ok(ExitCode::SUCCESS)
            } else {
                Ok(ExitCode::from(3))
            }
        }
    });

    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
