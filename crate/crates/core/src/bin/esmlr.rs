use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use esmlr::experiment::{cmd_emaps, cmd_experiment, cmd_sweep, ExperimentConfig};
use esmlr::EsmlrError;

#[derive(Parser)]
#[command(name = "esmlr", version, about = "Hyperspectral classification with extreme sparse MLR")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Dump the EMAP feature stack of a cube.
    Emaps(Common),
    /// Run a multi-trial experiment.
    Experiment(Common),
    /// Run one experiment per value of the configured sweep axis.
    Sweep(Common),
}

#[derive(Args)]
struct Common {
    /// JSON config file.
    #[arg(long)]
    config: PathBuf,
    /// Field overrides, e.g. `--trials 3 --variant k-esmlr --sweep.axis b`.
    #[arg(trailing_var_arg = true, allow_hyphen_values = true, value_name = "OVERRIDES")]
    overrides: Vec<String>,
}

fn run(cli: Cli) -> Result<(), EsmlrError> {
    let (Command::Emaps(c) | Command::Experiment(c) | Command::Sweep(c)) = &cli.command;
    let cfg = ExperimentConfig::load(&c.config, &c.overrides)?;
    match cli.command {
        Command::Emaps(_) => {
            let stack = cmd_emaps(&cfg)?;
            println!(
                "wrote {} EMAP features ({}x{}) to {}",
                stack.feature_count(),
                stack.height,
                stack.width,
                cfg.out_dir.join("emaps.f32").display()
            );
        }
        Command::Experiment(_) => {
            let res = cmd_experiment(&cfg)?;
            let s = &res.summary;
            println!(
                "{} / {}: OA {:.2} ± {:.2}  AA {:.2} ± {:.2}  kappa {:.4} ± {:.4}  ({} trials, {:.3} s train + {:.3} s test per trial)",
                cfg.variant,
                cfg.mode,
                100.0 * s.oa.mean,
                100.0 * s.oa.std,
                100.0 * s.aa.mean,
                100.0 * s.aa.std,
                s.kappa.mean,
                s.kappa.std,
                s.trials,
                s.mean_train_seconds,
                s.mean_test_seconds
            );
        }
        Command::Sweep(_) => {
            let sweep = cfg
                .sweep
                .clone()
                .ok_or_else(|| EsmlrError::Config("sweep command needs a `sweep` section".into()))?;
            for p in cmd_sweep(&cfg, &sweep)? {
                println!("{} = {}: OA {:.2}", sweep.axis.name(), p.value, 100.0 * p.summary.oa.mean);
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("esmlr: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
