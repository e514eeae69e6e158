use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand, ValueEnum};
use log::info;

use srv6bench::catalog::{self, BehaviorId};
use srv6bench::orchestrator::config::PacketOverrides;
use srv6bench::orchestrator::{
    parse_experiment_config, parse_testbed_config, report, resolve, run_campaign, test_packet, ConfigError, Status,
};
use srv6bench::rate::{line_packet_rate, LinkSpec};

const EXIT_CONFIG: u8 = 2;
const EXIT_PARTIAL: u8 = 3;

#[derive(Parser)]
#[command(
    name = "srv6bench",
    version,
    about = "Throughput benchmarks for SRv6 forwarding behaviors"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a measurement campaign and write its results.
    Run {
        #[arg(long)]
        experiment: PathBuf,
        #[arg(long)]
        testbed: PathBuf,
        /// Output directory, created if missing.
        #[arg(long, default_value = "results")]
        out: PathBuf,
    },
    /// List the behavior catalog.
    Behaviors {
        #[arg(long, value_enum, default_value_t = Format::Table)]
        format: Format,
    },
    /// Line packet rate for an IP packet size.
    Lpr {
        #[arg(long, default_value_t = 10e9)]
        bit_rate: f64,
        /// IP packet size in bytes, without the Ethernet header.
        #[arg(long, required = true, num_args = 1..)]
        ip_packet_size: Vec<usize>,
    },
    /// Show the test packet used for a behavior.
    Packet {
        #[arg(long)]
        behavior: String,
        #[arg(long)]
        hex: bool,
    },
    /// Print the configuration commands for a behavior on a testbed.
    Recipe {
        #[arg(long)]
        testbed: PathBuf,
        #[arg(long)]
        behavior: String,
    },
    /// Re-render the CSV summary from a campaign.json.
    Report {
        campaign: PathBuf,
        #[arg(long, value_enum, default_value_t = ReportKind::Summary)]
        kind: ReportKind,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Table,
    Json,
}

#[derive(Clone, Copy, ValueEnum)]
enum ReportKind {
    Summary,
    Plot,
}

/// Errors that map to the configuration exit code.
#[derive(Debug)]
struct UsageError(String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

fn read_config(path: &Path) -> anyhow::Result<String> {
    fs::read_to_string(path).map_err(|e| usage(format!("{}: {e}", path.display())))
}

fn config_error(path: &Path, e: ConfigError) -> anyhow::Error {
    usage(format!("{}: {e}", path.display()))
}

fn behavior_arg(name: &str) -> anyhow::Result<BehaviorId> {
    name.parse::<BehaviorId>().map_err(|e| usage(e.to_string()))
}

fn run(cmd: Command) -> anyhow::Result<u8> {
    match cmd {
        Command::Run {
            experiment,
            testbed,
            out,
        } => {
            let exp = parse_experiment_config(&read_config(&experiment)?).map_err(|e| config_error(&experiment, e))?;
            let tb = parse_testbed_config(&read_config(&testbed)?).map_err(|e| config_error(&testbed, e))?;
            info!("running {} behaviors on {}", exp.behaviors.len(), tb.forwarder_kind);
            let result = run_campaign(&exp, &tb);
            let written = report::write_outputs(&result, &out).with_context(|| format!("writing {}", out.display()))?;
            print!("{}", report::to_csv(&result));
            for r in result.results.iter().filter(|r| r.status == Status::Error) {
                eprintln!("{}: {}", r.behavior, r.error.as_deref().unwrap_or("failed"));
            }
            info!("wrote {} files to {}", written.len(), out.display());
            Ok(if result.partial { EXIT_PARTIAL } else { 0 })
        }
        Command::Behaviors { format } => {
            match format {
                Format::Table => print!("{}", catalog::render_table()),
                Format::Json => println!("{}", serde_json::to_string_pretty(catalog::catalog())?),
            }
            Ok(0)
        }
        Command::Lpr {
            bit_rate,
            ip_packet_size,
        } => {
            let link = LinkSpec::new(bit_rate).map_err(|e| usage(e.to_string()))?;
            println!("ip_bytes frame_bytes pps kpps");
            for ip in ip_packet_size {
                let frame = link.frame_size_for_ip(ip);
                let pps = line_packet_rate(&link, frame).map_err(|e| usage(e.to_string()))?;
                println!("{ip} {frame} {pps:.2} {:.0}", pps / 1000.0);
            }
            Ok(0)
        }
        Command::Packet { behavior, hex } => {
            let id = behavior_arg(&behavior)?;
            let (_, template) = test_packet(id, &PacketOverrides::default())?;
            if hex {
                print!("{}", template.hex_dump());
            } else {
                println!("{}", serde_json::to_string_pretty(&template)?);
            }
            Ok(0)
        }
        Command::Recipe { testbed, behavior } => {
            let id = behavior_arg(&behavior)?;
            let tb = parse_testbed_config(&read_config(&testbed)?).map_err(|e| config_error(&testbed, e))?;
            let r = resolve(id, &tb, &PacketOverrides::default())?;
            println!("# setup");
            r.recipe.steps.iter().for_each(|s| println!("{s}"));
            println!("# teardown");
            r.recipe.teardown.iter().for_each(|s| println!("{s}"));
            Ok(0)
        }
        Command::Report { campaign, kind } => {
            let text = read_config(&campaign)?;
            let result = report::from_json(&text).map_err(|e| usage(format!("{}: {e}", campaign.display())))?;
            match kind {
                ReportKind::Summary => print!("{}", report::to_csv(&result)),
                ReportKind::Plot => print!("{}", report::plot_csv(&result)),
            }
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("SRV6BENCH_LOG", "warn")).init();
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.is::<UsageError>() {
                ExitCode::from(EXIT_CONFIG)
            } else {
                ExitCode::FAILURE
            }
        }
    }
}
