use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};
use nudge_core::providers::write_jsonl;
use nudge_core::scenario::{compare_golden, run_script, write_log, Script};
use nudge_gateway::ServerConfig;

#[derive(Parser)]
#[command(name = "nudge", version, about = "Replay nudging scenarios or serve live sessions")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Replay a scenario script on the simulated clock.
    Run {
        script: PathBuf,
        /// Compare the session log with this golden; defaults to the script's own expectation.
        #[arg(long)]
        golden: Option<PathBuf>,
        /// Skip the golden comparison even if the script names one.
        #[arg(long, conflicts_with = "golden")]
        no_golden: bool,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        metrics: Option<PathBuf>,
        /// Write provider trace spans as JSON lines.
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Serve the websocket gateway.
    Serve {
        #[arg(long, default_value = "127.0.0.1:8765")]
        addr: SocketAddr,
        /// JSON server configuration (session settings, latencies, mock replies).
        #[arg(long)]
        config: Option<PathBuf>,
    },
}

const EXIT_MISMATCH: u8 = 1;
const EXIT_SCRIPT: u8 = 2;

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(tracing_subscriber::EnvFilter::from_default_env())
        .with_writer(std::io::stderr)
        .init();
    let cli = Cli::parse();
    match cli.command {
        Command::Run {
            script,
            golden,
            no_golden,
            out,
            metrics,
            trace,
        } => match run(&script, golden, no_golden, out, metrics, trace) {
            Ok(code) => code,
            Err(e) => {
                eprintln!("error: {e:#}");
                ExitCode::from(EXIT_SCRIPT)
            }
        },
        Command::Serve { addr, config } => match serve(addr, config) {
            Ok(()) => ExitCode::SUCCESS,
            Err(e) => {
                eprintln!("error: {e:#}");
                ExitCode::FAILURE
            }
        },
    }
}

fn run(
    path: &Path,
    golden: Option<PathBuf>,
    no_golden: bool,
    out: Option<PathBuf>,
    metrics: Option<PathBuf>,
    trace: Option<PathBuf>,
) -> anyhow::Result<ExitCode> {
    let script = Script::load(path)?;
    let result = run_script(&script)?;
    if let Some(out) = &out {
        write_log(&result.log, out)?;
    }
    if let Some(metrics) = &metrics {
        let text = serde_json::to_string_pretty(&result.metrics)?;
        std::fs::write(metrics, text + "\n").with_context(|| format!("writing {}", metrics.display()))?;
    }
    if let Some(trace) = &trace {
        let file = std::fs::File::create(trace).with_context(|| format!("creating {}", trace.display()))?;
        write_jsonl(&result.spans, std::io::BufWriter::new(file))?;
    }
    let m = &result.metrics;
    println!(
        "{}: {} events, {} nudges, {} frames kept / {} dropped",
        m.name,
        result.log.len(),
        m.nudge_count,
        m.frames_kept,
        m.frames_dropped
    );
    for n in &m.nudges {
        println!("  {:>7} ms  {:<14} {}", n.ts_ms, n.trigger_reason.as_str(), n.text);
    }
    let golden = if no_golden {
        None
    } else {
        golden.or_else(|| script.expectations.as_ref().map(|e| e.golden.clone()))
    };
    let Some(golden) = golden else {
        return Ok(ExitCode::SUCCESS);
    };
    match compare_golden(&result.log, &golden) {
        Ok(diff) if diff.matches() => {
            println!("golden {}: match", golden.display());
            Ok(ExitCode::SUCCESS)
        }
        Ok(diff) => {
            println!("golden {}: {diff}", golden.display());
            if let Some(d) = &diff.first_divergence {
                println!("  expected: {}", d.expected.as_ref().map_or("<none>".into(), |v| v.to_string()));
                println!("  actual:   {}", d.actual.as_ref().map_or("<none>".into(), |v| v.to_string()));
            }
            Ok(ExitCode::from(EXIT_MISMATCH))
        }
        Err(e) => Err(e.into()),
    }
}

fn serve(addr: SocketAddr, config: Option<PathBuf>) -> anyhow::Result<()> {
    let config = match config {
        Some(path) => {
            let text = std::fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
            serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?
        }
        None => ServerConfig::default(),
    };
    let rt = tokio::runtime::Runtime::new()?;
    rt.block_on(async move {
        let listener = tokio::net::TcpListener::bind(addr).await?;
        eprintln!("listening on ws://{}/ws", listener.local_addr()?);
        nudge_gateway::serve(listener, config).await?;
        anyhow::Ok(())
    })
}
