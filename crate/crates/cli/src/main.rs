use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use mfhs::verify::GROUPS;
use mfhs_cli::{parse_config, CliError, ConfigError, Run, RunConfig};

/// Multifractal spectra of switched Moran cascades.
#[derive(Debug, Parser)]
#[command(name = "mfhs", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// run configuration; switched Bernoulli defaults when omitted
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// output directory, overriding `output.dir`
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// sampling seed, overriding `output.seed`
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// verify group to leave out; repeatable
    #[arg(long, global = true)]
    skip: Vec<String>,
    /// use full cylinder enumeration for partition sums
    #[arg(long, global = true)]
    oracle: bool,
}

#[derive(Debug, Clone, Copy, Subcommand)]
enum Command {
    /// closed-form dimension functions and moment estimates
    Spectra,
    /// covering and moment exponents against the closed forms
    Dims,
    /// coarse level-set spectrum against the Legendre transforms
    Levelset,
    /// run the checks and exit 1 when one fails
    Verify,
    /// letter frequencies of Fibonacci-word prefixes
    Fib,
}

fn load(cli: &Cli) -> Result<RunConfig, CliError> {
    let mut config = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
            parse_config(&text)?
        }
        None => RunConfig::default(),
    };
    if let Some(out) = &cli.out {
        config.out_dir = out.clone();
    }
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    if let Some(bad) = cli.skip.iter().find(|s| !GROUPS.contains(&s.as_str())) {
        return Err(ConfigError {
            line: 0,
            message: format!("--skip {bad}: expected one of {}", GROUPS.join(", ")),
        }
        .into());
    }
    Ok(config)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = load(&cli).and_then(|config| {
        let run = Run::new(config, cli.oracle, cli.skip.clone());
        match cli.command {
            Command::Spectra => run.spectra(),
            Command::Dims => run.dims(),
            Command::Levelset => run.levelset(),
            Command::Verify => run.verify(),
            Command::Fib => run.fib(),
        }
    });
    match result {
        Ok(outcome) => {
            for m in &outcome.messages {
                println!("{m}");
            }
            for f in &outcome.files {
                println!("wrote {}", f.display());
            }
            ExitCode::from(if outcome.failed { 1 } else { 0 })
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
