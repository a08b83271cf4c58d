use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use maximin_bench::histogram::{read_trace_file, trace_histogram, DEFAULT_BINS};
use maximin_bench::runner::{summarize, write_csv, OUTPUT_DIR_ENV};
use maximin_bench::{run_experiment, BenchError, ExperimentConfig, Paths};

#[derive(Parser)]
#[command(name = "maximin-bench", version, about = "Run binary-weight regression experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the sweep described by a config file and write the results CSV.
    Run {
        config: PathBuf,
        /// Do not print the summary table.
        #[arg(long)]
        quiet: bool,
    },
    /// Validate a config file without running it.
    Check { config: PathBuf },
    /// Turn a trace CSV into per-iteration histograms of the weights over [-2, 2].
    Histogram {
        trace_file: PathBuf,
        #[arg(long, default_value_t = DEFAULT_BINS)]
        bins: usize,
        /// Write to a file instead of stdout.
        #[arg(long, short)]
        output: Option<PathBuf>,
    },
}

fn run(config: PathBuf, quiet: bool) -> Result<(), BenchError> {
    let cfg = ExperimentConfig::load(&config)?;
    let paths = Paths::for_config(&config);
    let rows = run_experiment(&cfg, &paths)?;
    let out = paths.results_file(&cfg);
    if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    let file = std::fs::File::create(&out)?;
    write_csv(std::io::BufWriter::new(file), &rows)?;
    if !quiet {
        print!("{}", summarize(&rows));
    }
    eprintln!("wrote {} rows to {}", rows.len(), out.display());
    Ok(())
}

fn check(config: PathBuf) -> Result<(), BenchError> {
    let cfg = ExperimentConfig::load(&config)?;
    let paths = Paths::for_config(&config);
    if let Some(d) = &cfg.dataset {
        let p = paths.input(&d.path);
        if !p.is_file() {
            return Err(BenchError::Config(format!("dataset {} not found", p.display())));
        }
    }
    println!(
        "ok: {} runs ({} methods x {} sweep points x {} repetitions) -> {}",
        cfg.run_count(),
        cfg.methods.list.len(),
        cfg.experiment.values.len(),
        cfg.experiment.repetitions,
        paths.results_file(&cfg).display()
    );
    if paths.output_dir.is_some() {
        println!("output directory overridden by {OUTPUT_DIR_ENV}");
    }
    Ok(())
}

fn histogram(trace_file: PathBuf, bins: usize, output: Option<PathBuf>) -> Result<(), BenchError> {
    let trace = read_trace_file(&trace_file)?;
    let h = trace_histogram(&trace, bins)?;
    match output {
        Some(path) => h.write_csv(std::io::BufWriter::new(std::fs::File::create(path)?)),
        None => {
            let stdout = std::io::stdout();
            let mut lock = stdout.lock();
            h.write_csv(&mut lock)?;
            lock.flush()?;
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run { config, quiet } => run(config, quiet),
        Command::Check { config } => check(config),
        Command::Histogram {
            trace_file,
            bins,
            output,
        } => histogram(trace_file, bins, output),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                BenchError::Config(_) => ExitCode::from(2),
                _ => ExitCode::FAILURE,
            }
        }
    }
}
