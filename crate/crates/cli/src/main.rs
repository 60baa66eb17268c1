use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};
use skms_cli::config::{self, Format};
use skms_cli::{exit, out_dir, run, CliError, Command};

#[derive(Parser)]
#[command(name = "skms", version, about = "Two-point functions of a massive scalar on the Schwarzschild exterior")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
    /// TOML config file, or a JSON report whose echoed config is reused.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override one config key, e.g. `--set params.M=0.5` (repeatable).
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    overrides: Vec<String>,
    /// Worker threads; results do not depend on this.
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Output directory (default: config, then $SKMS_OUT_DIR, then ./skms-out).
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    #[arg(long, value_enum, global = true)]
    format: Option<Format>,
    /// Print errors as JSON on stderr.
    #[arg(long, global = true)]
    error_json: bool,
}

#[derive(Subcommand, Clone, Copy)]
enum Cmd {
    /// Mode pairs, Wronskians and asymptotic fits.
    Modes,
    /// Channel Green's functions and spectral densities at real frequencies.
    Green,
    /// Position-space two-point function.
    Twopoint,
    /// KMS strip identity and detailed balance.
    KmsCheck,
    /// Spatial decay rate of the two-point function.
    Decay,
    /// Convergence of radial integrals of the two-point function.
    Integrability,
    /// Small-mass comparison with the flat oracles.
    FlatCompare,
}

impl From<Cmd> for Command {
    fn from(c: Cmd) -> Self {
        match c {
            Cmd::Modes => Command::Modes,
            Cmd::Green => Command::Green,
            Cmd::Twopoint => Command::Twopoint,
            Cmd::KmsCheck => Command::KmsCheck,
            Cmd::Decay => Command::Decay,
            Cmd::Integrability => Command::Integrability,
            Cmd::FlatCompare => Command::FlatCompare,
        }
    }
}

fn execute(cli: &Cli) -> Result<i32, CliError> {
    let cfg = config::load(cli.config.as_deref(), &cli.overrides)?;
    let workers = cli.workers.unwrap_or_else(|| std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1));
    if workers == 0 {
        return Err(config::ConfigError::new("--workers", "must be >= 1").into());
    }
    let start = Instant::now();
    let report = run(cli.command.into(), &cfg, workers)?;
    let dir = out_dir(cli.out_dir.clone(), &cfg);
    let format = cli.format.unwrap_or(cfg.output.format);
    let files = report.write(&dir, format, workers, start.elapsed())?;
    for v in &report.verdicts {
        println!("{} {}: {:e} (limit {:e})", if v.pass { "PASS" } else { "FAIL" }, v.name, v.value, v.limit);
    }
    for f in files {
        println!("wrote {}", f.display());
    }
    Ok(if report.pass { exit::OK } else { exit::VERIFICATION })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match execute(&cli) {
        Ok(c) => c,
        Err(e) => {
            if cli.error_json {
                eprintln!("{}", e.to_json());
            } else {
                eprintln!("skms: {e}");
            }
            e.exit_code()
        }
    };
    ExitCode::from(code as u8)
}
