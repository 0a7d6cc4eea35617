use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use catfilter::pipeline::{cmd_analyze, cmd_modes, cmd_report, cmd_simulate, cmd_spectra};
use catfilter::simulate::Channel;

#[derive(Parser)]
#[command(name = "catfilter", version, about = "Filtered photon-subtraction simulator and analyzer")]
struct Cli {
    #[command(subcommand)]
    verb: Verb,
}

#[derive(Clone, Copy, ValueEnum)]
enum ChannelArg {
    Post,
    Realtime,
}

#[derive(Subcommand)]
enum Verb {
    /// Simulate an acquisition and write the quadrature dataset.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value = "out")]
        out_dir: PathBuf,
    },
    /// Reconstruct states from a dataset CSV and write metrics.
    Analyze {
        dataset: PathBuf,
        #[arg(long, value_enum)]
        channel: Option<ChannelArg>,
        #[arg(long, default_value = "out")]
        out_dir: PathBuf,
    },
    /// Merge report fragments into a summary.
    Report {
        #[arg(required = true)]
        fragments: Vec<PathBuf>,
        #[arg(long, default_value = "out")]
        out_dir: PathBuf,
    },
    /// Dump the analytic temporal modes of a config.
    Modes {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value = "out")]
        out_dir: PathBuf,
    },
    /// Dump the squeezing spectra of a config.
    Spectra {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value = "out")]
        out_dir: PathBuf,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let result = match cli.verb {
        Verb::Simulate { config, seed, out_dir } => cmd_simulate(&config, seed, &out_dir),
        Verb::Analyze { dataset, channel, out_dir } => {
            let ch = channel.map(|c| match c {
                ChannelArg::Post => Channel::Post,
                ChannelArg::Realtime => Channel::Realtime,
            });
            cmd_analyze(&dataset, ch, &out_dir)
        }
        Verb::Report { fragments, out_dir } => cmd_report(&fragments, &out_dir),
        Verb::Modes { config, out_dir } => cmd_modes(&config, &out_dir).map(|p| vec![p]),
        Verb::Spectra { config, out_dir } => cmd_spectra(&config, &out_dir).map(|p| vec![p]),
    };
    match result {
        Ok(paths) => {
            for p in paths {
                println!("{}", p.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("{}", serde_json::json!({ "error": e.kind(), "message": e.to_string() }));
            ExitCode::FAILURE
        }
    }
}
