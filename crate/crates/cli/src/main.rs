use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use dbprior::commands::{self, Inputs};

#[derive(Parser)]
#[command(name = "dbprior", version, about = "Delay-beam prior training and prior-aided channel estimation")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate a dataset from a scenario config.
    Simulate(Flags),
    /// Train the prior on a dataset, or resume from --checkpoint.
    Train(Flags),
    /// Run the online estimator over the evaluation bursts.
    Evaluate(Flags),
    /// Dump the rendered delay-beam spectrum at --position.
    Render(Flags),
    /// Train and evaluate the four ablation variants.
    Ablate(Flags),
    /// Compare analytic and finite-difference loss gradients.
    Gradcheck(Flags),
}

#[derive(Args)]
struct Flags {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    dataset: Option<PathBuf>,
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    /// Output directory (default: output_dir from the config).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Comma list of geogs, zero, genie, omp.
    #[arg(long)]
    methods: Option<String>,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// UE position as "x,y,z" in meters.
    #[arg(long, allow_hyphen_values = true)]
    position: Option<String>,
}

impl From<Flags> for Inputs {
    fn from(f: Flags) -> Self {
        Inputs {
            config: f.config,
            dataset: f.dataset,
            checkpoint: f.checkpoint,
            out: f.out,
            methods: f.methods,
            seed: f.seed,
            position: f.position,
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let msg = e.to_string();
            let first = msg.lines().next().unwrap_or("invalid arguments");
            eprintln!("E_CONFIG: {}", first.trim_start_matches("error: "));
            return ExitCode::from(2);
        }
    };
    let result = match cli.cmd {
        Cmd::Simulate(f) => commands::simulate(&f.into()),
        Cmd::Train(f) => commands::train(&f.into()),
        Cmd::Evaluate(f) => commands::evaluate(&f.into()),
        Cmd::Render(f) => commands::render_cmd(&f.into()),
        Cmd::Ablate(f) => commands::ablate(&f.into()),
        Cmd::Gradcheck(f) => commands::gradcheck(&f.into()),
    };
    match result {
        Ok(report) => {
            for line in report.lines() {
                if line.starts_with("warning:") {
                    eprintln!("{line}");
                } else {
                    println!("{line}");
                }
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("{}", e.one_line());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
