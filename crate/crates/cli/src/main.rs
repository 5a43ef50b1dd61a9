//! `twinops`: batch runs over a scenario file, and the edge service.

mod commands;
mod render;

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use commands::CliError;

#[derive(Debug, Parser)]
#[command(
    name = "twinops",
    version,
    about = "Network digital twin: fault localization, navigation, card identification, QoS simulation and the edge service"
)]
struct Cli {
    /// Scenario file.
    #[arg(long, global = true, env = "TWINOPS_SCENARIO")]
    scenario: Option<PathBuf>,

    /// Overrides every seed the scenario defines.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Leave out wall-clock fields so identical runs print identical bytes.
    #[arg(long, global = true)]
    deterministic: bool,

    #[arg(long, global = true, value_enum, default_value_t = OutputFormat::Text)]
    output: OutputFormat,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OutputFormat {
    Json,
    Text,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Switch {
    On,
    Off,
}

impl Switch {
    fn on(self) -> bool {
        self == Switch::On
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Algo {
    Coverage,
    Mp,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Rank alarmed elements by how well they explain the scenario's alarms.
    Localize {
        #[arg(long, value_enum, default_value_t = Algo::Coverage)]
        algo: Algo,
        /// Message-passing rounds.
        #[arg(long, default_value_t = 3)]
        iters: usize,
    },
    /// Route between named points, or to the rack holding a shelf or element.
    Navigate(NavigateArgs),
    /// Detect, match and colour the cards of a synthetic shelf layout.
    CardId {
        #[arg(long)]
        layout: String,
        #[arg(long)]
        threshold: Option<f64>,
    },
    /// Simulate AR and CBR traffic sharing one link.
    SimulateQos(QosArgs),
    /// Run the edge service.
    Serve {
        #[arg(long, default_value = "127.0.0.1:7600")]
        listen: String,
        /// Browser (WebSocket) endpoint.
        #[arg(long, default_value = "127.0.0.1:7601")]
        ws_listen: String,
        #[arg(long)]
        no_ws: bool,
        #[arg(long, default_value_t = twinops_edged::protocol::DEFAULT_MAX_FRAME_BYTES)]
        max_frame_bytes: usize,
    },
}

#[derive(Debug, Args)]
struct NavigateArgs {
    #[arg(long)]
    from: String,
    #[arg(long, group = "target")]
    to: Option<String>,
    #[arg(long, group = "target")]
    shelf: Option<String>,
    #[arg(long, group = "target")]
    element: Option<String>,
    /// 0 = lower, 1 = upper; defaults to the shelf's own level.
    #[arg(long)]
    shelf_level: Option<u8>,
    /// Draw the route on the grid.
    #[arg(long)]
    render: bool,
}

#[derive(Debug, Args)]
struct QosArgs {
    #[arg(long, value_enum)]
    meter: Option<Switch>,
    /// Simulated seconds.
    #[arg(long)]
    duration: Option<f64>,
    #[arg(long)]
    ar_gbps: Option<f64>,
    #[arg(long)]
    cbr_gbps: Option<f64>,
    #[arg(long)]
    capacity_gbps: Option<f64>,
    #[arg(long)]
    length_km: Option<f64>,
    #[arg(long)]
    cbr_cap_gbps: Option<f64>,
    #[arg(long)]
    burst_bytes: Option<u64>,
    /// Add the wireless hop at both ends.
    #[arg(long, value_enum)]
    wifi: Option<Switch>,
    /// Print an AR round-trip histogram with this bin width (ms).
    #[arg(long)]
    bin_width: Option<f64>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "warn".into()),
        )
        .with_writer(std::io::stderr)
        .init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let ctx = commands::Context {
        scenario_path: cli.scenario,
        seed: cli.seed,
        deterministic: cli.deterministic,
    };
    let out = match cli.command {
        Command::Localize { algo, iters } => commands::localize(&ctx, algo, iters)?,
        Command::Navigate(a) => commands::navigate(
            &ctx,
            commands::NavTarget {
                from: a.from,
                to: a.to,
                shelf: a.shelf,
                element: a.element,
                shelf_level: a.shelf_level,
                render: a.render,
            },
        )?,
        Command::CardId { layout, threshold } => commands::card_id(&ctx, &layout, threshold)?,
        Command::SimulateQos(q) => commands::simulate_qos(
            &ctx,
            commands::QosOverrides {
                meter: q.meter.map(Switch::on),
                duration_s: q.duration,
                ar_gbps: q.ar_gbps,
                cbr_gbps: q.cbr_gbps,
                capacity_gbps: q.capacity_gbps,
                length_km: q.length_km,
                cbr_cap_gbps: q.cbr_cap_gbps,
                burst_bytes: q.burst_bytes,
                wifi: q.wifi.map(Switch::on),
                bin_width_ms: q.bin_width,
            },
        )?,
        Command::Serve {
            listen,
            ws_listen,
            no_ws,
            max_frame_bytes,
        } => {
            return commands::serve(&ctx, listen, (!no_ws).then_some(ws_listen), max_frame_bytes);
        }
    };
    let mut stdout = std::io::stdout().lock();
    let text = match cli.output {
        OutputFormat::Json => {
            let mut s = serde_json::to_string_pretty(&out.json).expect("reports serialize");
            s.push('\n');
            s
        }
        OutputFormat::Text => out.text,
    };
    stdout
        .write_all(text.as_bytes())
        .and_then(|()| stdout.flush())
        .map_err(|e| CliError::Io(format!("stdout: {e}")))
}
