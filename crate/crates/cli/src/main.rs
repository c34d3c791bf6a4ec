mod commands;
mod settings;

use std::process::ExitCode;

use clap::{Parser, Subcommand};
use lfext_core::ErrorKind;

use settings::Settings;

#[derive(Parser)]
#[command(name = "lfext", version, about = "Extend weak-supervision sources through embedding neighborhoods")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    settings: Settings,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Extend abstaining votes to nearby points
    Extend,
    /// Estimate source accuracies with the triplet method
    Fit,
    /// Posteriors and hard labels from fitted parameters
    Predict,
    /// Choose radii on the dev set
    Tune,
    /// Smoothness profile, bounds and per-source recommendations
    Diagnose,
    /// Write a synthetic checkerboard task
    Synth,
    /// Score predictions against gold labels
    Eval,
    /// extend, fit, predict and eval in one go
    Pipeline,
}

/// A failed run: exit code plus a one-line message.
pub struct Failure {
    pub code: u8,
    pub kind: &'static str,
    pub message: String,
}

impl Failure {
    pub fn usage(message: impl Into<String>) -> Self {
        Failure { code: 1, kind: "usage", message: message.into() }
    }
}

impl From<lfext_core::Error> for Failure {
    fn from(e: lfext_core::Error) -> Self {
        let (code, kind) = match e.kind() {
            ErrorKind::Usage => (1, "usage"),
            ErrorKind::Data => (2, "data"),
            ErrorKind::Numeric => (3, "numeric"),
        };
        Failure { code, kind, message: e.to_string() }
    }
}

impl From<String> for Failure {
    fn from(message: String) -> Self {
        Failure::usage(message)
    }
}

fn run() -> Result<(), Failure> {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            // help and version
            let _ = e.print();
            return Ok(());
        }
        Err(e) => {
            let text = e.to_string();
            let line = text.lines().map(str::trim).find(|l| !l.is_empty()).unwrap_or("invalid arguments");
            return Err(Failure::usage(line.trim_start_matches("error: ")));
        }
    };
    let mut settings = cli.settings;
    if let Some(path) = settings.config.clone() {
        let file: Settings = lfext_core::io::load_json(&path)?;
        settings = settings.merged(file);
    }
    if let Some(t) = settings.threads {
        if t == 0 {
            return Err(Failure::usage("--threads must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .map_err(|e| Failure::usage(format!("cannot set up {t} threads: {e}")))?;
    }
    match cli.command {
        Command::Extend => commands::extend(&settings),
        Command::Fit => commands::fit(&settings),
        Command::Predict => commands::predict(&settings),
        Command::Tune => commands::tune(&settings),
        Command::Diagnose => commands::diagnose(&settings),
        Command::Synth => commands::synth(&settings),
        Command::Eval => commands::eval(&settings),
        Command::Pipeline => commands::pipeline(&settings),
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            let line = serde_json::json!({ "error": f.kind, "message": f.message, "exit_code": f.code });
            eprintln!("{line}");
            ExitCode::from(f.code)
        }
    }
}
