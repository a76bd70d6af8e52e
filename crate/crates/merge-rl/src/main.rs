use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use log::info;

use merge_rl::checkpoint;
use merge_rl::config::Config;
use merge_rl::env::SPEED_LIMIT;
use merge_rl::error::Error;
use merge_rl::eval;
use merge_rl::gradcheck;
use merge_rl::metrics;
use merge_rl::oracle::oracle_q_iteration;
use merge_rl::trainer::{self, MergeTrainEnv};

#[derive(Parser)]
#[command(name = "merge-rl", about = "Continuous-action Q-learning for on-ramp merging")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a merging policy and write loss.csv, episodes.csv and a checkpoint.
    Train {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Overrides train.seed from the config file.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Evaluate a checkpoint with the greedy policy and write eval_report.json.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        episodes: usize,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// Optional config file for non-default scenario settings.
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Record one greedy episode as a trajectory CSV.
    Trace {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Run all finite-difference gradient suites.
    Gradcheck,
    /// Value-iteration oracle on the toy speed MDP, optionally compared
    /// against a trained checkpoint.
    Oracle {
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long, default_value_t = 200)]
        episodes: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn load_config(path: Option<&PathBuf>) -> Result<Config, Error> {
    match path {
        Some(p) => Config::load(p),
        None => Ok(Config::default()),
    }
}

fn run(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Train { config, out, seed } => {
            let mut config = Config::load(&config)?;
            if let Some(seed) = seed {
                config.train.seed = seed;
            }
            std::fs::create_dir_all(&out)?;
            info!("training for {} env steps (seed {})", config.train.total_steps, config.train.seed);
            let mut env = MergeTrainEnv::new(
                config.env.geometry,
                config.env.traffic,
                config.env.idm,
                config.reward,
            );
            let (pair, train_metrics) = trainer::train(&config.train, &mut env, config.net.hidden)?;
            metrics::write_loss_csv(&train_metrics.losses, &out.join("loss.csv"))?;
            metrics::write_episodes_csv(&train_metrics.episodes, &out.join("episodes.csv"))?;
            checkpoint::save(&pair, &out.join("checkpoint.json"))?;
            info!(
                "done: {} episodes, {} logged losses",
                train_metrics.episodes.len(),
                train_metrics.losses.len()
            );
            Ok(())
        }
        Command::Eval { checkpoint: ckpt, episodes, seed, out, config } => {
            let config = load_config(config.as_ref())?;
            let pair = checkpoint::load(&ckpt)?;
            std::fs::create_dir_all(&out)?;
            let report = eval::evaluate(&pair, &config, episodes, seed)?;
            let json = serde_json::to_string_pretty(&report)?;
            std::fs::write(out.join("eval_report.json"), json + "\n")?;
            println!("{}", serde_json::to_string_pretty(&report)?);
            Ok(())
        }
        Command::Trace { checkpoint: ckpt, seed, out, config } => {
            let config = load_config(config.as_ref())?;
            let pair = checkpoint::load(&ckpt)?;
            let rows = eval::run_trace(&pair, &config, seed)?;
            metrics::write_trace_csv(&rows, &out)?;
            info!("wrote {} trace rows to {}", rows.len(), out.display());
            Ok(())
        }
        Command::Gradcheck => {
            let results = gradcheck::run_all(2024, 20, 16);
            let mut ok = true;
            for (name, err) in &results {
                let pass = *err < gradcheck::FD_TOLERANCE;
                ok &= pass;
                println!(
                    "{} max relative error {err:.3e} [{}]",
                    name,
                    if pass { "ok" } else { "FAIL" }
                );
            }
            if ok {
                Ok(())
            } else {
                Err(Error::Numeric("gradient check exceeded tolerance".into()))
            }
        }
        Command::Oracle { checkpoint: ckpt, episodes, seed } => {
            let gamma = 0.95;
            let table = oracle_q_iteration(121, 29, gamma, 1e-8)?;
            println!(
                "oracle converged in {} sweeps, residual {:.3e}",
                table.iterations, table.max_residual
            );
            let oracle_return =
                eval::toy_mean_return(&|v| table.greedy_action(v), episodes, seed, gamma, 1);
            println!("oracle greedy mean return over {episodes} episodes: {oracle_return:.6}");
            if let Some(path) = ckpt {
                let pair = checkpoint::load(&path)?;
                // toy states occupy the first slot of the 6-vector
                let policy = move |v: f64| {
                    pair.prediction
                        .optimal_action(&[v / SPEED_LIMIT, 0.0, 0.0, 0.0, 0.0, 0.0])
                };
                let policy_return = eval::toy_mean_return(&policy, episodes, seed, gamma, 1);
                let gap = (policy_return - oracle_return).abs() / oracle_return.abs().max(1e-9);
                println!("checkpoint greedy mean return: {policy_return:.6}");
                println!("relative gap to oracle: {:.2}%", gap * 100.0);
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(
        env_logger::Env::new().filter_or("MERGE_RL_LOG", "info"),
    )
    .init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            // clap prints help/usage; usage problems exit with 1
            let _ = err.print();
            return if err.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err @ (Error::Usage(_) | Error::Config(_))) => {
            eprintln!("error: {err}");
            ExitCode::from(1)
        }
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(2)
        }
    }
}
