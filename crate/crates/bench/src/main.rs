use std::process::ExitCode;
use std::time::Duration;

use clap::{Parser, Subcommand};
use stwgc::heap::{ENV_N_PAGES, ENV_PAGE_SIZE};
use stwgc::RuntimeConfig;
use stwgc_bench::workloads::sieve_cml::suggested_pages;
use stwgc_bench::{
    run_churn, run_life, run_matmult, run_pi, run_seq_quicksort, run_sieve, run_sieve_cml,
    BenchError, RunConfig, RunReport,
};

/// Run a workload on the stwgc runtime and print `key=value` reports.
///
/// The heap is configured through GC_N_PAGES, GC_PAGE_SIZE, GC_SHARED_SIZE,
/// GC_MIN_SHARED_SIZE, GC_GROWTH_FACTOR and GC_ENABLE_PARTIAL.
#[derive(Parser, Debug)]
#[command(name = "bench", version)]
struct Cli {
    /// Worker threads.
    #[arg(long, global = true, default_value_t = 1)]
    threads: usize,

    /// Append collector statistics to each report.
    #[arg(long, global = true)]
    gc_stats: bool,

    /// Give up on a stop-the-world request after this many milliseconds.
    #[arg(long, global = true)]
    stw_timeout_ms: Option<u64>,

    /// Number of runs; one report each.
    #[arg(long, global = true, default_value_t = 1)]
    repeat: usize,

    #[arg(long, global = true, default_value_t = 42)]
    seed: u64,

    /// Skip the native reference check.
    #[arg(long, global = true)]
    no_verify: bool,

    #[command(subcommand)]
    workload: Workload,
}

#[derive(Subcommand, Debug)]
enum Workload {
    /// Shared-board sieve of Eratosthenes.
    Sieve {
        #[arg(long, default_value_t = 300_000)]
        limit: usize,
    },
    /// Row-parallel product of seeded square matrices.
    Matmult {
        #[arg(long, default_value_t = 200)]
        n: usize,
    },
    /// Game of life with one block per cell.
    Life {
        #[arg(long, default_value_t = 200)]
        size: usize,
        #[arg(long, default_value_t = 100)]
        steps: usize,
    },
    /// Monte-Carlo estimate of pi.
    Pi {
        #[arg(long, default_value_t = 10_000_000)]
        points: usize,
    },
    /// Sieve as a pipeline of filter threads; --threads is ignored.
    #[command(name = "sieve_cml", alias = "sieve-cml")]
    SieveCml {
        #[arg(long, default_value_t = 9000)]
        limit: usize,
        /// Capacity of each channel between filters.
        #[arg(long, default_value_t = 16)]
        chunk: usize,
    },
    /// Long-lived data plus short-lived allocation churn.
    Churn {
        #[arg(long, default_value_t = 100_000)]
        long_lived_words: usize,
        #[arg(long, default_value_t = 1_000_000)]
        allocs: usize,
    },
    /// In-place quicksort of 4 seeded arrays.
    #[command(name = "seq_quicksort", alias = "seq-quicksort")]
    SeqQuicksort {
        #[arg(long, default_value_t = 100_000)]
        n: usize,
    },
}

fn runtime_config(cli: &Cli) -> Result<RuntimeConfig, BenchError> {
    let mut rc = RuntimeConfig::from_env()?;
    if let Workload::SieveCml { limit, .. } = cli.workload {
        // One small page per filter thread unless the environment says
        // otherwise.
        if std::env::var_os(ENV_PAGE_SIZE).is_none() {
            rc.heap.page_size = 1024;
        }
        if std::env::var_os(ENV_N_PAGES).is_none() {
            rc.heap.n_pages = suggested_pages(limit);
        }
    }
    if let Some(ms) = cli.stw_timeout_ms {
        rc = rc.with_stw_timeout(Duration::from_millis(ms));
    }
    Ok(rc)
}

fn run_once(cli: &Cli, cfg: &RunConfig) -> Result<RunReport, BenchError> {
    match cli.workload {
        Workload::Sieve { limit } => run_sieve(cfg, limit),
        Workload::Matmult { n } => run_matmult(cfg, n),
        Workload::Life { size, steps } => run_life(cfg, size, steps),
        Workload::Pi { points } => run_pi(cfg, points),
        Workload::SieveCml { limit, chunk } => run_sieve_cml(cfg, limit, chunk),
        Workload::Churn { long_lived_words, allocs } => run_churn(cfg, long_lived_words, allocs),
        Workload::SeqQuicksort { n } => run_seq_quicksort(cfg, n),
    }
}

fn run(cli: &Cli) -> Result<(), BenchError> {
    if cli.threads == 0 {
        return Err(BenchError::InvalidArgs("--threads must be at least 1".into()));
    }
    let mut cfg = RunConfig::new(runtime_config(cli)?, cli.threads).with_seed(cli.seed);
    cfg.verify = !cli.no_verify;
    for i in 0..cli.repeat {
        if i > 0 {
            println!();
        }
        print!("{}", run_once(cli, &cfg)?.to_kv_lines(cli.gc_stats));
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
