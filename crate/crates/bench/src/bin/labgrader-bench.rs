use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Duration;

use clap::Parser;
use labgrader_bench::{report, run_local, run_remote, BenchConfig, BenchError, Credentials, Target};

/// Submits batches of identical reference programs and reports grading
/// latency and throughput. Without --server it starts its own server and
/// coordinators on loopback.
#[derive(Parser)]
#[command(version)]
struct Args {
    /// Base URL of a running server. Its online testbeds must already be
    /// configured with the same --delay.
    #[arg(long)]
    server: Option<String>,
    /// Instructor account on --server, as user:password.
    #[arg(long, requires = "server")]
    instructor: Option<Credentials>,
    /// Student account on --server, as user:password.
    #[arg(long, requires = "server")]
    student: Option<Credentials>,
    /// Batch sizes.
    #[arg(long, value_delimiter = ',', default_value = "10,50,100,200")]
    n: Vec<usize>,
    /// Testbed counts. Exactly one with --server.
    #[arg(long, value_delimiter = ',', default_value = "1,2,3,4")]
    testbeds: Vec<usize>,
    /// Per-job service delay in seconds.
    #[arg(long, default_value_t = 0.3)]
    delay: f64,
    #[arg(long, default_value_t = 1)]
    reps: usize,
    #[arg(long, default_value = "bench-out")]
    out: PathBuf,
}

#[tokio::main]
async fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "labgrader_bench=info,warn".into()),
        )
        .init();
    let args = Args::parse();
    let cfg = BenchConfig {
        ns: args.n,
        testbeds: args.testbeds,
        delay: Duration::from_secs_f64(args.delay),
        reps: args.reps,
    };
    let result = match args.server {
        Some(base_url) => {
            let (Some(instructor), Some(student)) = (args.instructor, args.student) else {
                eprintln!("--server needs --instructor and --student");
                return ExitCode::from(64);
            };
            let target = Target {
                base_url,
                instructor,
                student,
            };
            run_remote(&target, &cfg).await
        }
        None => run_local(&cfg).await,
    };
    let result = match result {
        Ok(r) => r,
        Err(BenchError::Aborted { failed }) => {
            eprintln!("benchmark aborted, {} submission(s) failed:", failed.len());
            for id in failed {
                eprintln!("  {id}");
            }
            return ExitCode::from(2);
        }
        Err(e) => {
            eprintln!("{e}");
            return ExitCode::FAILURE;
        }
    };
    if let Err(e) = report::write_reports(&result, &args.out) {
        eprintln!("writing reports: {e}");
        return ExitCode::FAILURE;
    }
    print!("{}", report::summary_table(&result));
    ExitCode::SUCCESS
}
