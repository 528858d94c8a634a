use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use lff_core::commands::{cmd_bench, cmd_export_filters, cmd_extract, cmd_toy};

/// Learnable frequency-filter front-ends: feature extraction, filter export,
/// stride/cost benchmarks and a toy speaker-verification experiment.
#[derive(Parser)]
#[command(name = "lff", version)]
struct Cli {
    /// Seed for every pseudo-random stream (overrides the seed in sweep/toy specs).
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Extract features from a WAV file or a directory of WAV files.
    Extract {
        /// lff-t, lff-b, mel, sinc or gabor.
        #[arg(long)]
        frontend: String,
        /// JSON front-end configuration.
        #[arg(long)]
        config: PathBuf,
        #[arg(long = "in")]
        input: PathBuf,
        /// Output directory for `.feat` files and the manifest.
        #[arg(long)]
        out: PathBuf,
    },
    /// Export the filters of a trained model as CSV.
    ExportFilters {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run a stride sweep and write MAC counts and timings as CSV.
    Bench {
        #[arg(long)]
        sweep: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train front-ends on synthetic speakers and write metrics JSON.
    Toy {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Extract {
            frontend,
            config,
            input,
            out,
        } => cmd_extract(frontend, config, input, out)
            .map(|files| format!("extracted {} file(s) into {}", files.len(), out.display())),
        Command::ExportFilters { model, out } => {
            cmd_export_filters(model, out).map(|m| format!("wrote {m} filters to {}", out.display()))
        }
        Command::Bench { sweep, out } => {
            cmd_bench(sweep, out, cli.seed).map(|rows| format!("wrote {} rows to {}", rows.len(), out.display()))
        }
        Command::Toy { spec, out } => cmd_toy(spec, out, cli.seed).map(|m| {
            m.frontends
                .iter()
                .map(|f| format!("{}: EER {:.4}, final loss {:.4}", f.name, f.eer, f.final_loss))
                .collect::<Vec<_>>()
                .join("\n")
        }),
    };
    match result {
        Ok(msg) => {
            println!("{msg}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("lff: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
