use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Duration;

use anyhow::Context;
use clap::{Parser, Subcommand};

use healsim::harness::{run_scenario, HarnessError, ScenarioConfig};
use healsim::planner::PlannerSpec;
use healsim::protocol::DEFAULT_PORT;
use healsim::rules::parse_rules;
use healsim::service::serve;

#[derive(Parser)]
#[command(name = "healsim", version, about = "Self-healing architecture simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a fault-injection scenario and write its reports.
    Run {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 10)]
        rounds: usize,
        /// `inproc` or `tcp://HOST:PORT`.
        #[arg(long, default_value = "inproc", value_parser = PlannerSpec::parse)]
        planner: PlannerSpec,
        #[arg(long)]
        rules: Option<PathBuf>,
        #[arg(long)]
        blueprint: Option<PathBuf>,
        /// JSON list of faults used for the first rounds.
        #[arg(long)]
        script: Option<PathBuf>,
        #[arg(long, default_value_t = 5)]
        exception_threshold: u32,
        #[arg(long, default_value_t = 3)]
        rootcause_threshold: u32,
        /// Remote planner timeout in milliseconds.
        #[arg(long, default_value_t = 1000)]
        timeout_ms: u64,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Serve plans over TCP until killed.
    ServePlanner {
        #[arg(long)]
        rules: PathBuf,
        #[arg(long, default_value_t = format!("127.0.0.1:{DEFAULT_PORT}"))]
        bind: String,
    },
    /// Parse a rule file and report the first error.
    ValidateRules { path: PathBuf },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Run {
            seed,
            rounds,
            planner,
            rules,
            blueprint,
            script,
            exception_threshold,
            rootcause_threshold,
            timeout_ms,
            out,
        } => {
            let config = ScenarioConfig {
                seed,
                rounds,
                exception_threshold,
                rootcause_threshold,
                planner,
                planner_timeout: Duration::from_millis(timeout_ms),
                rules_path: rules,
                blueprint_path: blueprint,
                script: None,
                script_path: script,
                out_dir: Some(out.clone()),
            };
            match run_scenario(&config) {
                Ok(report) => {
                    let healed = report.rounds.iter().filter(|r| r.verified()).count();
                    println!("rounds: {} ({} verified)", report.rounds.len(), healed);
                    println!("unhandled: {}", report.unhandled);
                    let suspects: Vec<_> = report
                        .suspects
                        .iter()
                        .map(|s| format!("{} ({})", s.slot, s.count))
                        .collect();
                    println!(
                        "suspects: {}",
                        if suspects.is_empty() {
                            "none".to_string()
                        } else {
                            suspects.join(", ")
                        }
                    );
                    println!("reports written to {}", out.display());
                    ExitCode::SUCCESS
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    if e.is_planner_unreachable() {
                        ExitCode::from(2)
                    } else {
                        ExitCode::from(1)
                    }
                }
            }
        }
        Command::ServePlanner { rules, bind } => match serve_planner(&rules, &bind) {
            Ok(()) => ExitCode::SUCCESS,
            Err(e) => {
                eprintln!("error: {e:#}");
                ExitCode::from(1)
            }
        },
        Command::ValidateRules { path } => match healsim::harness::load_rules(Some(&path)) {
            Ok(set) => {
                println!("{}: {} rule(s) ok", path.display(), set.len());
                ExitCode::SUCCESS
            }
            Err(HarnessError::Rules { path, source }) => {
                let (line, col) = source.position();
                eprintln!("{path}:{line}:{col}: {source}");
                ExitCode::from(1)
            }
            Err(e) => {
                eprintln!("error: {e}");
                ExitCode::from(1)
            }
        },
    }
}

fn serve_planner(rules: &PathBuf, bind: &str) -> anyhow::Result<()> {
    let text = std::fs::read_to_string(rules).with_context(|| format!("cannot read {}", rules.display()))?;
    let set = parse_rules(&text).map_err(|e| {
        let (line, col) = e.position();
        anyhow::anyhow!("{}:{line}:{col}: {e}", rules.display())
    })?;
    let server = serve(set, bind).with_context(|| format!("cannot bind {bind}"))?;
    let mut stdout = std::io::stdout();
    writeln!(stdout, "listening on {}", server.local_addr())?;
    stdout.flush()?;
    server.wait();
    Ok(())
}
