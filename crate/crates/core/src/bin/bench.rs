use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Duration;

use clap::{Parser, Subcommand, ValueEnum};
use sepkv::bench::{self, KeyDist, Pattern, WorkloadSpec, YCSB_THETA};
use sepkv::{SeparationMode, WalMode};

#[derive(Parser)]
#[command(name = "bench", about = "Workload driver for the sepkv store")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum PatternArg {
    Randwrite,
    Seqwrite,
    Readrandom,
    #[value(name = "ycsb-a")]
    YcsbA,
}

#[derive(Clone, Copy, ValueEnum)]
enum WalArg {
    Sync,
    Async,
    Off,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Separated,
    Inline,
}

#[derive(Clone, Copy, ValueEnum)]
enum DistArg {
    Uniform,
    Zipfian,
}

#[derive(Subcommand)]
enum Command {
    /// Run one workload and write summary.txt, intervals.csv and metrics.txt.
    Run {
        #[arg(long, value_enum)]
        pattern: PatternArg,
        #[arg(long, value_enum, default_value = "sync")]
        wal: WalArg,
        #[arg(long, default_value_t = 4096)]
        value_size: usize,
        #[arg(long, default_value_t = 16)]
        key_size: usize,
        /// User bytes to write in the measured phase.
        #[arg(long, default_value_t = 1 << 30)]
        bytes: u64,
        /// Op count; overrides --bytes.
        #[arg(long)]
        ops: Option<u64>,
        /// Run for this many seconds instead of a fixed size.
        #[arg(long)]
        duration_s: Option<f64>,
        #[arg(long, value_enum, default_value = "separated")]
        mode: ModeArg,
        #[arg(long, default_value_t = 4)]
        lanes: usize,
        #[arg(long, default_value_t = 4096)]
        threshold: usize,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long)]
        dir: Option<PathBuf>,
        /// Allow a non-empty data directory.
        #[arg(long)]
        reuse: bool,
        #[arg(long, default_value_t = 100)]
        interval_ms: u64,
        #[arg(long, default_value = "report")]
        out: PathBuf,
        #[arg(long, default_value_t = 16)]
        memtable_mib: usize,
        /// L1 size target in MiB; 8 memtables when omitted.
        #[arg(long)]
        l1_target_mib: Option<u64>,
        /// Records loaded before readrandom and ycsb-a.
        #[arg(long, default_value_t = 5000)]
        preload: u64,
        /// Key distribution; defaults to zipfian for ycsb-a, uniform otherwise.
        #[arg(long, value_enum)]
        dist: Option<DistArg>,
        #[arg(long, default_value_t = 1)]
        threads: usize,
        /// Skip hashing the final contents.
        #[arg(long)]
        no_digest: bool,
        /// Read counters without flushing and finishing due compactions.
        #[arg(long)]
        no_settle: bool,
    },
    /// Compare big-value append throughput across lane counts.
    CompareLanes {
        #[arg(long, default_value_t = 65536)]
        value_size: usize,
        #[arg(long, value_delimiter = ',', default_value = "1,2,4,8")]
        lanes: Vec<usize>,
        #[arg(long, default_value_t = 64 << 20)]
        bytes: u64,
        #[arg(long, default_value = "bench-lanes")]
        dir: PathBuf,
    },
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("bench: {e}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> sepkv::Result<()> {
    match cli.command {
        Command::Run {
            pattern,
            wal,
            value_size,
            key_size,
            bytes,
            ops,
            duration_s,
            mode,
            lanes,
            threshold,
            seed,
            dir,
            reuse,
            interval_ms,
            out,
            memtable_mib,
            l1_target_mib,
            preload,
            dist,
            threads,
            no_digest,
            no_settle,
        } => {
            let pattern = match pattern {
                PatternArg::Randwrite => Pattern::RandomWrite,
                PatternArg::Seqwrite => Pattern::SequentialWrite,
                PatternArg::Readrandom => Pattern::ReadRandom,
                PatternArg::YcsbA => Pattern::MixedYcsbA,
            };
            let distribution = match dist {
                Some(DistArg::Zipfian) => KeyDist::Zipfian { theta: YCSB_THETA },
                Some(DistArg::Uniform) => KeyDist::Uniform,
                None if pattern == Pattern::MixedYcsbA => KeyDist::Zipfian { theta: YCSB_THETA },
                None => KeyDist::Uniform,
            };
            let spec = WorkloadSpec {
                pattern,
                wal_mode: match wal {
                    WalArg::Sync => WalMode::Sync,
                    WalArg::Async => WalMode::Async,
                    WalArg::Off => WalMode::Disabled,
                },
                key_size,
                value_size,
                total_bytes: Some(bytes),
                ops,
                duration: duration_s.map(Duration::from_secs_f64),
                preload,
                distribution,
                separation: match mode {
                    ModeArg::Separated => SeparationMode::Separated,
                    ModeArg::Inline => SeparationMode::Inline,
                },
                lanes,
                threshold,
                seed,
                memtable_size: memtable_mib << 20,
                level1_target: l1_target_mib.map(|m| m << 20),
                interval: Duration::from_millis(interval_ms.max(1)),
                threads,
                content_digest: !no_digest,
                settle: !no_settle,
            };
            let dir = dir.unwrap_or_else(|| bench::default_dir(&spec));
            let report = bench::run(&spec, &dir, reuse)?;
            report.write_to(&out)?;
            print!("{}", report.summary());
            println!("report={}", out.display());
        }
        Command::CompareLanes {
            value_size,
            lanes,
            bytes,
            dir,
        } => {
            let rows = bench::compare_lanes(&dir, value_size, &lanes, bytes)?;
            let _ = std::fs::remove_dir(&dir);
            print!("{}", bench::format_rows(&rows));
        }
    }
    Ok(())
}
