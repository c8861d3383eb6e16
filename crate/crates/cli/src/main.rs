use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use msmix::transport::FrictionKind;
use msmix::verify::Suite;
use msmix_cli::{cmd_chart, cmd_run, cmd_verify, exit, ChartQuery};

#[derive(Parser)]
#[command(
    name = "msmix",
    version,
    about = "Multicomponent Maxwell-Stefan mixtures: simulation and verification"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum SuiteArg {
    Thermo,
    Chart,
    Transport,
    Robust,
    Growth,
    All,
}

#[derive(Clone, Copy, ValueEnum)]
enum FrictionArg {
    Singular,
    Constant,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario and write its fields as CSV.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Override a config value, e.g. `--set sim.n_cells=256`.
        #[arg(long = "set", value_name = "SECTION.KEY=VALUE")]
        overrides: Vec<String>,
    },
    /// Check the library's invariants on random states.
    Verify {
        #[arg(long, value_enum)]
        suite: SuiteArg,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long, default_value_t = 1000)]
        samples: usize,
        #[arg(long)]
        report: PathBuf,
        /// `constant` swaps in pressure-independent friction as a
        /// falsification control; the affected checks stop gating.
        #[arg(long, value_enum, default_value = "singular")]
        friction: FrictionArg,
    },
    /// Print chart coordinates of a state, or the state at a chart point.
    Chart {
        #[arg(long)]
        config: PathBuf,
        /// Partial densities `r1,...,rN`.
        #[arg(
            long,
            value_delimiter = ',',
            allow_hyphen_values = true,
            conflicts_with = "point",
            required_unless_present = "point"
        )]
        state: Option<Vec<f64>>,
        /// Pressure and normalized state `s,w1,...,wN`.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        point: Option<Vec<f64>>,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() {
                exit::CONFIG
            } else {
                exit::OK
            };
            let _ = e.print();
            return ExitCode::from(code as u8);
        }
    };
    let code = match cli.command {
        Command::Run { config, overrides } => cmd_run(&config, &overrides),
        Command::Verify {
            suite,
            seed,
            samples,
            report,
            friction,
        } => {
            let suite = match suite {
                SuiteArg::Thermo => Suite::Thermo,
                SuiteArg::Chart => Suite::Chart,
                SuiteArg::Transport => Suite::Transport,
                SuiteArg::Robust => Suite::Robust,
                SuiteArg::Growth => Suite::Growth,
                SuiteArg::All => Suite::All,
            };
            let friction = match friction {
                FrictionArg::Singular => FrictionKind::Singular,
                FrictionArg::Constant => FrictionKind::Constant,
            };
            cmd_verify(suite, seed, samples, &report, friction)
        }
        Command::Chart {
            config,
            state,
            point,
        } => {
            let query = match (state, point) {
                (Some(r), _) => ChartQuery::State(r),
                (None, Some(p)) if p.len() >= 2 => ChartQuery::Point(p[0], p[1..].to_vec()),
                _ => {
                    eprintln!("msmix chart: --point needs s followed by N weights");
                    return ExitCode::from(exit::CONFIG as u8);
                }
            };
            cmd_chart(&config, &query)
        }
    };
    ExitCode::from(code as u8)
}
