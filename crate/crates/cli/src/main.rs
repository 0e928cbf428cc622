use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};
use nlosloc_core::pipeline::{run, Command, RawConfig};

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Cmd {
    Synth,
    Sample,
    Train,
    Reconstruct,
    Localize,
    Evaluate,
    AnalyzeSampling,
}

impl From<Cmd> for Command {
    fn from(c: Cmd) -> Self {
        match c {
            Cmd::Synth => Command::Synth,
            Cmd::Sample => Command::Sample,
            Cmd::Train => Command::Train,
            Cmd::Reconstruct => Command::Reconstruct,
            Cmd::Localize => Command::Localize,
            Cmd::Evaluate => Command::Evaluate,
            Cmd::AnalyzeSampling => Command::AnalyzeSampling,
        }
    }
}

/// Radio-map reconstruction and emitter localization experiments.
#[derive(Debug, Parser)]
#[command(name = "nlosloc", version)]
struct Args {
    #[arg(value_enum)]
    command: Cmd,
    /// Experiment configuration (key = value lines under [section] headers).
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads; 0 uses every core.
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Extra `section.key=value` overrides, applied after the file.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

fn execute(args: &Args) -> nlosloc_core::Result<()> {
    let mut raw = RawConfig::load(&args.config)?;
    for pair in &args.overrides {
        raw.set_pair(pair)?;
    }
    if let Some(seed) = args.seed {
        raw.set("output.seed", &seed.to_string())?;
    }
    if let Some(w) = args.workers {
        raw.set("output.workers", &w.to_string())?;
    }
    if let Some(out) = &args.out {
        raw.set("output.out", &out.to_string_lossy())?;
    }
    run(args.command.into(), &raw)
}

fn main() -> ExitCode {
    let args = Args::parse();
    match execute(&args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("nlosloc {}: {e}", Command::from(args.command));
            ExitCode::FAILURE
        }
    }
}
