//! `ulx`: batch front end for the unitary control landscape library.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use commands::{CliError, Outcome};
use config::{ConfigError, ExperimentConfig, Settings};

#[derive(Parser, Debug)]
#[command(name = "ulx", version, about = "Control landscapes on U(N): critical-set atlas, checks and gate synthesis")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    #[command(flatten)]
    flags: Flags,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Command {
    /// Tabulate the critical strata of J_F or J_P.
    Strata,
    /// Run the numerical self-checks for the configured problem.
    Verify,
    /// Kinematic gradient flow on U(N).
    Flow,
    /// Gate synthesis over piecewise-constant control fields.
    Synth,
    /// Signature traces and nondegeneracy of the J_P global maximum.
    Maxset,
}

/// Every flag mirrors a config key and overrides the file value.
#[derive(Args, Debug)]
struct Flags {
    /// Config file with `key value` lines under `[section]` headers.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[arg(long = "N", global = true)]
    n: Option<String>,

    /// identity | projector <r> | diagonal <a,b,..> | file <path> | random <seed>
    #[arg(long = "A", global = true, num_args = 1..=2)]
    a: Option<Vec<String>>,

    /// identity | hadamard | cnot | qft | random <seed> | file <path>
    #[arg(long = "W", global = true, num_args = 1..=2)]
    w: Option<Vec<String>>,

    /// F | P | G | GP
    #[arg(long, global = true)]
    kind: Option<String>,

    #[arg(long, global = true)]
    seed: Option<String>,

    #[arg(long, alias = "output", global = true)]
    out: Option<PathBuf>,

    #[arg(long, global = true)]
    tau_cluster: Option<String>,
    #[arg(long, global = true)]
    tau_crit: Option<String>,
    #[arg(long, global = true)]
    tau_null: Option<String>,
    #[arg(long, global = true)]
    tau_grad: Option<String>,
    #[arg(long, global = true)]
    tau_match: Option<String>,
    #[arg(long, global = true)]
    tau_value: Option<String>,

    #[arg(long, global = true)]
    max_iter: Option<String>,
    #[arg(long, global = true)]
    step: Option<String>,

    /// random <seed> | identity | file <path>
    #[arg(long, global = true, num_args = 1..=2)]
    u0: Option<Vec<String>>,

    #[arg(long, global = true)]
    h0: Option<String>,
    #[arg(long, global = true)]
    mu: Option<String>,
    #[arg(long = "T", global = true)]
    t: Option<String>,
    #[arg(long = "m", global = true)]
    m: Option<String>,
    #[arg(long, global = true)]
    hbar: Option<String>,
    #[arg(long, global = true)]
    field: Option<String>,
}

impl Flags {
    fn apply(&self, s: &mut Settings) {
        let scalar = [
            ("n", &self.n),
            ("kind", &self.kind),
            ("seed", &self.seed),
            ("tau_cluster", &self.tau_cluster),
            ("tau_crit", &self.tau_crit),
            ("tau_null", &self.tau_null),
            ("tau_grad", &self.tau_grad),
            ("tau_match", &self.tau_match),
            ("tau_value", &self.tau_value),
            ("max_iter", &self.max_iter),
            ("step", &self.step),
            ("h0", &self.h0),
            ("mu", &self.mu),
            ("t", &self.t),
            ("m", &self.m),
            ("hbar", &self.hbar),
            ("field", &self.field),
        ];
        for (key, v) in scalar {
            if let Some(v) = v {
                s.set(key, v.clone());
            }
        }
        for (key, v) in [("a", &self.a), ("w", &self.w), ("u0", &self.u0)] {
            if let Some(parts) = v {
                s.set(key, parts.join(" "));
            }
        }
        if let Some(out) = &self.out {
            s.set("output", out.display().to_string());
        }
    }
}

fn load(cli: &Cli) -> Result<ExperimentConfig, ConfigError> {
    let mut settings = match &cli.flags.config {
        Some(path) => Settings::from_file(path)?,
        None => Settings::default(),
    };
    cli.flags.apply(&mut settings);
    ExperimentConfig::from_settings(&settings)
}

fn run(cli: &Cli) -> Result<(ExperimentConfig, Outcome), CliError> {
    let cfg = load(cli)?;
    let outcome = match cli.command {
        Command::Strata => commands::run_strata(&cfg)?,
        Command::Verify => commands::run_verify(&cfg)?,
        Command::Flow => commands::run_flow(&cfg)?,
        Command::Synth => commands::run_synth(&cfg)?,
        Command::Maxset => commands::run_maxset(&cfg)?,
    };
    Ok((cfg, outcome))
}

fn emit(cfg: &ExperimentConfig, outcome: &Outcome) -> std::io::Result<()> {
    match &cfg.output {
        Some(path) => {
            std::fs::write(path, &outcome.report)?;
            for (suffix, body) in &outcome.artifacts {
                let mut p = path.clone().into_os_string();
                p.push(suffix);
                std::fs::write(PathBuf::from(p), body)?;
            }
        }
        None => print!("{}", outcome.report),
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok((cfg, outcome)) => {
            if let Err(e) = emit(&cfg, &outcome) {
                eprintln!("error: cannot write report: {e}");
                return ExitCode::from(1);
            }
            if outcome.ok {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(e @ CliError::Config(_)) => {
            eprintln!("{e}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
