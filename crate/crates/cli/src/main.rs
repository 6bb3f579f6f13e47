use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use amrl::agents::{evaluate, render_episode, AgentCheckpoint};
use amrl::experiment::{
    aggregate_manifests, load_config, load_env, output_root, preset_names, preset_source, run_seed, train_oracle,
    write_aggregate, ExperimentConfig, LoadedManifest, OUTPUT_ENV,
};
use amrl::{Agent, Error, Real, Result};
use clap::{Parser, Subcommand};

const EXIT_CONFIG: u8 = 2;
const EXIT_RUNTIME: u8 = 3;

/// Modular reinforcement learning experiments on gridworlds.
#[derive(Parser)]
#[command(version, after_help = format!("The output root defaults to ${OUTPUT_ENV}, then the config's output_dir, then ./runs."))]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train every seed of a config (a TOML path or a preset name).
    Run {
        config: String,
        /// Train only this seed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train the oracle policy described by a config's [oracle] table.
    Oracle {
        config: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Mean/min/max of the 30-episode moving average across seeds.
    Aggregate {
        /// Run manifests, or run directories containing manifest.json.
        #[arg(required = true)]
        manifests: Vec<PathBuf>,
        /// Write `<name>-aggregate.csv` here instead of next to the seed directories.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Greedy evaluation of a checkpoint on an environment.
    Eval {
        checkpoint: PathBuf,
        /// Environment TOML (bare or with an [env] table) or a preset name.
        env_config: String,
        #[arg(long, default_value_t = 100)]
        episodes: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Print ASCII frames of the first evaluation episode.
        #[arg(long)]
        render: bool,
    },
    /// Print the embedded experiment presets.
    ListPresets,
}

fn main() -> ExitCode {
    let stdout = io::stdout();
    match dispatch(Cli::parse().command, &mut stdout.lock()) {
        Ok(()) => ExitCode::SUCCESS,
        // A closed pipe (e.g. `| head`) is not a failure of the command.
        Err(Error::Io { source, .. }) if source.kind() == io::ErrorKind::BrokenPipe => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_config() { EXIT_CONFIG } else { EXIT_RUNTIME })
        }
    }
}

fn dispatch(command: Command, out: &mut impl Write) -> Result<()> {
    match command {
        Command::Run { config, seed, out: dir } => run(&config, seed, dir.as_deref(), out),
        Command::Oracle { config, out: dir } => oracle(&config, dir.as_deref(), out),
        Command::Aggregate { manifests, out: dir } => aggregate(&manifests, dir.as_deref(), out),
        Command::Eval {
            checkpoint,
            env_config,
            episodes,
            seed,
            render,
        } => eval(&checkpoint, &env_config, episodes, seed, render, out),
        Command::ListPresets => {
            for name in preset_names() {
                let cfg = ExperimentConfig::from_toml(preset_source(name).unwrap_or_default(), name)?;
                writeln!(out, "{name:<26} {}", cfg.description).map_err(stdout_err)?;
            }
            Ok(())
        }
    }
}

fn run(config: &str, seed: Option<u64>, dir: Option<&Path>, out: &mut impl Write) -> Result<()> {
    let cfg = load_config(config)?;
    let seeds = match seed {
        Some(s) => vec![s],
        None => cfg.seeds.clone(),
    };
    let root = output_root(dir, &cfg);
    for seed in seeds {
        let (path, manifest) = run_seed(&cfg, seed, &root)?;
        let last = LoadedManifest::load(&path)?
            .metrics()?
            .last()
            .map_or(0.0, |r| r.moving_avg_30);
        writeln!(
            out,
            "seed {seed}: {} episodes, final moving average {last:.3}, manifest {}",
            manifest.episodes_completed,
            path.display()
        )
        .map_err(stdout_err)?;
    }
    Ok(())
}

fn oracle(config: &str, dir: Option<&Path>, out: &mut impl Write) -> Result<()> {
    let cfg = load_config(config)?;
    let root = output_root(dir, &cfg);
    let (path, manifest) = train_oracle(&cfg, &root)?;
    let outcome = manifest
        .oracle
        .ok_or_else(|| Error::Format("oracle run recorded no outcome".into()))?;
    writeln!(
        out,
        "oracle mean balls {:.2} at episode {}, gate {}, manifest {}",
        outcome.mean_balls,
        outcome.evaluated_at_episode,
        if outcome.gate_passed { "passed" } else { "NOT passed" },
        path.display()
    )
    .map_err(stdout_err)?;
    Ok(())
}

fn aggregate(paths: &[PathBuf], dir: Option<&Path>, out: &mut impl Write) -> Result<()> {
    let manifests = paths
        .iter()
        .map(|p| LoadedManifest::load(&if p.is_dir() { p.join("manifest.json") } else { p.clone() }))
        .collect::<Result<Vec<_>>>()?;
    for (name, rows) in aggregate_manifests(&manifests)? {
        let target = match dir {
            Some(dir) => dir.join(format!("{name}-aggregate.csv")),
            None => {
                // Seed directories live under `<root>/<name>/`.
                let first = manifests.iter().find(|m| m.manifest.config.name == name);
                let parent = first.and_then(|m| m.dir.parent()).unwrap_or(Path::new("."));
                parent.join("aggregate.csv")
            }
        };
        write_aggregate(&rows, &target)?;
        writeln!(out, "{name}: {} episodes -> {}", rows.len(), target.display()).map_err(stdout_err)?;
    }
    Ok(())
}

fn eval(
    checkpoint: &Path,
    env_config: &str,
    episodes: usize,
    seed: u64,
    render: bool,
    out: &mut impl Write,
) -> Result<()> {
    let ck = AgentCheckpoint::<Real>::load(checkpoint)?;
    let env = load_env(env_config)?;
    if env.view_size() != ck.env.view_size() || env.action_count() != ck.env.action_count() {
        return Err(Error::config(
            "env",
            format!(
                "checkpoint expects a {0}x{0} view and {1} actions",
                ck.env.view_size(),
                ck.env.action_count()
            ),
        ));
    }
    let mut agent = Agent::from_checkpoint(&ck)?;
    if render {
        for (t, frame) in render_episode(&mut agent, &env, seed)?.iter().enumerate() {
            writeln!(out, "t={t}\n{frame}").map_err(stdout_err)?;
        }
    }
    let stats = evaluate(&mut agent, &env, episodes, seed)?;
    writeln!(out, "{}", serde_json::to_string_pretty(&stats)?).map_err(stdout_err)?;
    Ok(())
}

fn stdout_err(e: io::Error) -> Error {
    Error::io("stdout", e)
}
