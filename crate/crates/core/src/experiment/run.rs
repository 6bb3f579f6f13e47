use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use super::metrics::{
    aggregate_curves, read_metrics, AggregateRow, MetricsRow, MetricsWriter, MovingAverage, MOVING_WINDOW,
};
use crate::agents::{evaluate, init_rng, AgentCheckpoint, EpisodeStats, AGENT_FORMAT_VERSION};
use crate::arbitration::{read_trace, SelectionRecord, TraceWriter};
use crate::error::{Error, Result};
use crate::knowledge::OracleCheckpoint;
use crate::nn::{load_json, save_json, Checkpointable};
use crate::replay::write_dump;
use crate::{Agent, Real, Trainer};

pub const MANIFEST_VERSION: u32 = 1;

/// Overrides the output root for every run when set.
pub const OUTPUT_ENV: &str = "AMRL_OUTPUT_DIR";

/// Precedence: explicit argument, then the environment variable, then the
/// config's `output_dir`, then `runs`.
pub fn output_root(explicit: Option<&Path>, cfg: &ExperimentConfig) -> PathBuf {
    explicit
        .map(Path::to_path_buf)
        .or_else(|| std::env::var_os(OUTPUT_ENV).map(PathBuf::from))
        .or_else(|| cfg.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from("runs"))
}

pub fn run_dir(root: &Path, cfg: &ExperimentConfig, seed: u64) -> PathBuf {
    root.join(&cfg.name).join(format!("seed-{seed}"))
}

/// Result of oracle training.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OracleOutcome {
    /// Relative to the run directory.
    pub checkpoint: PathBuf,
    pub gate_passed: bool,
    pub mean_balls: f64,
    /// Training episodes completed when the written network was evaluated.
    pub evaluated_at_episode: u64,
}

/// Record of one seed's run. Paths are relative to the manifest's
/// directory.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub format_version: u32,
    pub crate_version: String,
    pub checkpoint_format: u32,
    pub config: ExperimentConfig,
    pub seed: u64,
    pub complete: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub episodes_completed: u64,
    pub stopped_early: bool,
    pub metrics: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trace: Option<PathBuf>,
    pub checkpoints: Vec<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub replay_dump: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub oracle: Option<OracleOutcome>,
    pub wall_clock_secs: f64,
}

/// A manifest together with the directory its paths resolve against.
#[derive(Clone, Debug)]
pub struct LoadedManifest {
    pub dir: PathBuf,
    pub manifest: RunManifest,
}

impl LoadedManifest {
    pub fn load(path: &Path) -> Result<Self> {
        let manifest: RunManifest = load_json(path)?;
        if manifest.format_version != MANIFEST_VERSION {
            return Err(Error::Format(format!(
                "unsupported manifest version {}",
                manifest.format_version
            )));
        }
        Ok(Self {
            dir: path.parent().map(Path::to_path_buf).unwrap_or_default(),
            manifest,
        })
    }

    pub fn path(&self, rel: &Path) -> PathBuf {
        self.dir.join(rel)
    }

    pub fn metrics(&self) -> Result<Vec<MetricsRow>> {
        read_metrics(&self.path(&self.manifest.metrics))
    }

    pub fn trace(&self) -> Result<Option<Vec<SelectionRecord>>> {
        self.manifest
            .trace
            .as_ref()
            .map(|p| read_trace(&self.path(p)))
            .transpose()
    }

    /// Every referenced artifact exists and parses.
    pub fn verify(&self) -> Result<()> {
        let m = &self.manifest;
        let rows = self.metrics()?;
        if rows.len() as u64 != m.episodes_completed {
            return Err(Error::Format(format!(
                "{} metrics rows for {} episodes",
                rows.len(),
                m.episodes_completed
            )));
        }
        self.trace()?;
        for ck in &m.checkpoints {
            AgentCheckpoint::<Real>::load(&self.path(ck))?;
        }
        if let Some(dump) = &m.replay_dump {
            let path = self.path(dump);
            let file = File::open(&path).map_err(|e| Error::io(&path, e))?;
            crate::replay::read_dump(std::io::BufReader::new(file))?;
        }
        if let Some(o) = &m.oracle {
            OracleCheckpoint::<Real>::load(&self.path(&o.checkpoint))?;
        }
        Ok(())
    }
}

/// Called after each training episode; returning `true` stops the run.
type EpisodeHook<'a> = dyn FnMut(&mut Trainer, &EpisodeStats, &mut RunManifest) -> Result<bool> + 'a;

/// Trains one seed and writes metrics, trace, checkpoints and the
/// manifest under `root/<name>/seed-<seed>`. A failed run still leaves a
/// manifest, flagged incomplete.
pub fn run_seed(cfg: &ExperimentConfig, seed: u64, root: &Path) -> Result<(PathBuf, RunManifest)> {
    run_with_hook(cfg, seed, root, &mut |_, _, _| Ok(false))
}

fn run_with_hook(
    cfg: &ExperimentConfig,
    seed: u64,
    root: &Path,
    hook: &mut EpisodeHook<'_>,
) -> Result<(PathBuf, RunManifest)> {
    cfg.validate()?;
    let dir = run_dir(root, cfg, seed);
    fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    let manifest_path = dir.join("manifest.json");
    let mut manifest = RunManifest {
        format_version: MANIFEST_VERSION,
        crate_version: env!("CARGO_PKG_VERSION").to_string(),
        checkpoint_format: AGENT_FORMAT_VERSION,
        config: cfg.clone(),
        seed,
        complete: false,
        error: None,
        episodes_completed: 0,
        stopped_early: false,
        metrics: PathBuf::from("metrics.csv"),
        trace: None,
        checkpoints: Vec::new(),
        replay_dump: None,
        oracle: None,
        wall_clock_secs: 0.0,
    };
    save_json(&manifest, &manifest_path)?;
    let start = Instant::now();
    let result = train(cfg, seed, root, &dir, &mut manifest, hook);
    manifest.wall_clock_secs = start.elapsed().as_secs_f64();
    match &result {
        Ok(()) => manifest.complete = true,
        Err(e) => manifest.error = Some(e.to_string()),
    }
    save_json(&manifest, &manifest_path)?;
    result.map(|()| (manifest_path, manifest))
}

fn save_checkpoint(trainer: &Trainer, dir: &Path, name: &str, manifest: &mut RunManifest) -> Result<()> {
    let rel = PathBuf::from("checkpoints").join(name);
    trainer.checkpoint().save(&dir.join(&rel))?;
    manifest.checkpoints.push(rel);
    Ok(())
}

fn train(
    cfg: &ExperimentConfig,
    seed: u64,
    root: &Path,
    dir: &Path,
    manifest: &mut RunManifest,
    hook: &mut EpisodeHook<'_>,
) -> Result<()> {
    let agent = Agent::new(
        cfg.agent,
        cfg.hyper.clone(),
        cfg.env.clone(),
        cfg.modules.clone(),
        root,
        &mut init_rng(seed),
    )?;
    let mut trainer = Trainer::new(agent, seed);
    let mut metrics = MetricsWriter::create(&dir.join(&manifest.metrics))?;
    let mut trace = if cfg.trace && cfg.agent.is_modular() {
        let rel = PathBuf::from("trace.csv");
        let writer = TraceWriter::create(&dir.join(&rel))?;
        manifest.trace = Some(rel);
        Some(writer)
    } else {
        None
    };
    let mut average = MovingAverage::new(MOVING_WINDOW);
    while trainer.episode < cfg.episodes as u64 {
        let episode = trainer.episode as usize;
        let mut trace_error = None;
        let stats = trainer.train_episode(|r| {
            let (Some(w), Some(module)) = (trace.as_mut(), r.decision.module) else {
                return;
            };
            let record = SelectionRecord {
                episode,
                t: r.t,
                module,
                epsilon: r.epsilon,
                action: r.decision.action,
                r_star: r.outcome.reward,
                proposals: SelectionRecord::join_proposals(&r.decision.proposals),
                hidden_zero: r.decision.hidden_zero,
                buffer_pushes: r.feedback.buffer_pushes,
            };
            if let Err(e) = w.write(&record) {
                trace_error.get_or_insert(e);
            }
        })?;
        if let Some(e) = trace_error {
            return Err(e);
        }
        let avg = average.push(stats.total_return);
        metrics.write(&MetricsRow::new(seed, &stats, avg, trainer.agent.update_count()))?;
        manifest.episodes_completed = trainer.episode;
        if trainer.episode.is_multiple_of(cfg.checkpoint_every as u64) && trainer.episode < cfg.episodes as u64 {
            save_checkpoint(&trainer, dir, &format!("episode-{:06}.json", trainer.episode), manifest)?;
        }
        if hook(&mut trainer, &stats, manifest)? {
            break;
        }
        // Only a full window counts; one lucky early episode must not stop a run.
        let full_window = trainer.episode >= MOVING_WINDOW as u64;
        if full_window && cfg.stop_at_moving_avg.is_some_and(|th| avg >= th) {
            manifest.stopped_early = true;
            break;
        }
    }
    save_checkpoint(&trainer, dir, "final.json", manifest)?;
    if let Some(w) = trace.as_mut() {
        w.flush()?;
    }
    metrics.finish()?;
    if cfg.dump_replay {
        let rel = PathBuf::from("replay.bin");
        let path = dir.join(&rel);
        let file = File::create(&path).map_err(|e| Error::io(&path, e))?;
        write_dump(BufWriter::new(file), trainer.agent.replay_transitions())?;
        manifest.replay_dump = Some(rel);
    }
    Ok(())
}

/// Trains a DQN on Collect, evaluating it greedily every `eval_every`
/// episodes. The first network to reach the gate is written with
/// `gate_passed = true` and ends training; otherwise the best evaluated
/// network is written with `gate_passed = false`.
pub fn train_oracle(cfg: &ExperimentConfig, root: &Path) -> Result<(PathBuf, RunManifest)> {
    let spec = cfg
        .oracle
        .clone()
        .ok_or_else(|| Error::config("oracle", "missing [oracle] section"))?;
    let seed = cfg.seeds[0];
    let dir = run_dir(root, cfg, seed);
    let target = root.join(&spec.checkpoint);
    let rel_target = relative_to(&dir, root, &spec.checkpoint);
    let mut best = f64::NEG_INFINITY;
    let mut hook = |trainer: &mut Trainer, _: &EpisodeStats, manifest: &mut RunManifest| -> Result<bool> {
        let done = trainer.episode >= cfg.episodes as u64;
        if !trainer.episode.is_multiple_of(spec.eval_every as u64) && !done {
            return Ok(false);
        }
        let env = trainer.agent.env.clone();
        let stats = evaluate(&mut trainer.agent, &env, spec.eval_episodes, seed)?;
        let passed = stats.mean_balls >= spec.gate_balls;
        if passed || stats.mean_balls > best {
            best = best.max(stats.mean_balls);
            let net = trainer
                .agent
                .networks()
                .into_iter()
                .next()
                .expect("dqn has one network");
            let network = crate::nn::QNetwork::<Real>::from_checkpoint(&net.online)?.to_checkpoint(None);
            OracleCheckpoint {
                gate_passed: passed,
                mean_balls: stats.mean_balls,
                eval_episodes: spec.eval_episodes,
                network,
            }
            .save(&target)?;
            manifest.oracle = Some(OracleOutcome {
                checkpoint: rel_target.clone(),
                gate_passed: passed,
                mean_balls: stats.mean_balls,
                evaluated_at_episode: trainer.episode,
            });
        }
        Ok(passed)
    };
    run_with_hook(cfg, seed, root, &mut hook)
}

/// `root/rel` expressed relative to `dir`, where `dir` lies two levels
/// below `root`.
fn relative_to(dir: &Path, root: &Path, rel: &Path) -> PathBuf {
    if rel.is_absolute() {
        return rel.to_path_buf();
    }
    match dir.strip_prefix(root) {
        Ok(inner) => inner
            .components()
            .map(|_| Path::new(".."))
            .collect::<PathBuf>()
            .join(rel),
        Err(_) => root.join(rel),
    }
}

/// Groups completed runs by experiment name and aggregates their moving
/// average returns.
pub fn aggregate_manifests(manifests: &[LoadedManifest]) -> Result<Vec<(String, Vec<AggregateRow>)>> {
    if manifests.is_empty() {
        return Err(Error::config("manifests", "nothing to aggregate"));
    }
    let mut groups: std::collections::BTreeMap<String, Vec<Vec<f64>>> = Default::default();
    for m in manifests {
        if !m.manifest.complete {
            return Err(Error::config("manifests", format!("{} is incomplete", m.dir.display())));
        }
        let curve = m.metrics()?.iter().map(|r| r.moving_avg_30).collect();
        groups.entry(m.manifest.config.name.clone()).or_default().push(curve);
    }
    groups
        .into_iter()
        .map(|(name, curves)| Ok((name, aggregate_curves(&curves)?)))
        .collect()
}
