use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use dr_online::config::Config;
use dr_online::verify::{cmd_run, cmd_sweep, cmd_verify, CliOptions};
use dr_online::Error;

#[derive(Parser)]
#[command(name = "dr-online", version, about = "Online non-monotone DR-submodular maximization experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the certification sweeps and print the min-slack table.
    Verify(Common),
    /// Run every (horizon, seed) pair of the config and persist CSV artifacts.
    Run(Common),
    /// Run a rate sweep and compare fitted slopes with their target exponents.
    Sweep(Common),
}

#[derive(Args)]
struct Common {
    /// Path to the TOML configuration.
    #[arg(long)]
    config: PathBuf,
    /// Output directory (overrides the config and DR_ONLINE_OUT).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads.
    #[arg(long)]
    jobs: Option<usize>,
    /// Gauss-Legendre nodes for the surrogate gradient.
    #[arg(long)]
    quad_nodes: Option<usize>,
    /// Emit log-log SVG plots.
    #[arg(long)]
    plots: bool,
    /// Negative control: flip the sign of every gradient estimate.
    #[arg(long, hide = true)]
    sabotage: bool,
}

impl Common {
    fn options(&self) -> CliOptions {
        CliOptions {
            out: self.out.clone(),
            jobs: self.jobs,
            quad_nodes: self.quad_nodes,
            plots: self.plots,
            sabotage: self.sabotage,
        }
    }
}

fn fail(err: Error) -> ExitCode {
    eprintln!("error: {err}");
    match err {
        Error::Config(_) | Error::Io { .. } => ExitCode::from(2),
        _ => ExitCode::FAILURE,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let (Command::Verify(c) | Command::Run(c) | Command::Sweep(c)) = &cli.command;
    let cfg = match Config::load(&c.config) {
        Ok(cfg) => cfg,
        Err(e) => return fail(e),
    };
    let opts = c.options();
    match &cli.command {
        Command::Verify(_) => match cmd_verify(&cfg, &opts) {
            Ok(v) => {
                print!("{}", v.table);
                match v.first_failure() {
                    None => ExitCode::SUCCESS,
                    Some(f) => {
                        eprintln!("failed: {}", f.name);
                        ExitCode::FAILURE
                    }
                }
            }
            Err(e) => fail(e),
        },
        Command::Run(_) | Command::Sweep(_) => {
            let sweep = matches!(cli.command, Command::Sweep(_));
            let result = if sweep { cmd_sweep(&cfg, &opts) } else { cmd_run(&cfg, &opts) };
            match result {
                Ok(o) => {
                    print!("{}", o.summary);
                    println!("wrote {} files to {}", o.files.len(), o.out.display());
                    ExitCode::SUCCESS
                }
                Err(e) => fail(e),
            }
        }
    }
}
