use std::path::{Path, PathBuf};

use proptest::prelude::*;

use super::*;
use crate::agents::AgentKind;
use crate::env::{EnvKind, EnvSpec};
use crate::knowledge::{ModuleKind, RewardFn};

// Reference hyperparameters typed separately from the preset files, one
// row per key, one column per agent; `-` marks an unused cell.
const COLLECT_LEARNING: &str = "
key                  dqn     dqn-k   drqn    amrl    amrl-ds
epsilon_decay        0.995   0.98    0.98    0.982   0.982
module_lr            0.0008  0.0008  0.0008  0.0036  0.0036
selector_lr          -       -       -       0.0076  0.0076
latent_dim           32      64      64      16      16
combined_latent      -       16      -       -       -
knowledge_latent     -       64      -       -       -
knowledge_embedding  -       8       -       -       -
state_embedding      -       40      -       -       -
batch_size           64      128     128     128     128
buffer_size          100000  50000   50000   50000   50000
update_freq          8       8       8       4       4
soft_update          0.0023  0.0023  0.0023  0.0012  0.0012
lstm_hidden          -       -       16      -       -
lstm_seq_len         -       -       8       -       -
";

const CROSSING_DOORKEY_LEARNING: &str = "
key                  dqn     drqn    amrl    amrl-ds
epsilon_decay        0.995   0.98    0.992   0.992
module_lr            0.0008  0.0008  0.0036  0.0036
selector_lr          -       -       0.0077  0.0077
latent_dim           32      64      64      64
batch_size           64      128     128     128
buffer_size          100000  100000  100000  100000
update_freq          8       8       4       4
soft_update          0.001   0.0023  0.0012  0.0012
lstm_hidden          -       10      -       -
lstm_seq_len         -       16      -       -
";

const ORACLE_PRIOR: &str = "
key                  dqn     dqn-k   amrl    amrl-mem
epsilon_decay        0.996   0.996   0.996   0.996
module_lr            0.0036  0.003   0.0036  0.0057
selector_lr          -       -       0.0007  0.00033
latent_dim           64      64      64      32
combined_latent      -       16      -       -
knowledge_latent     -       64      -       -
knowledge_embedding  -       8       -       -
state_embedding      -       40      -       -
batch_size           128     128     64      64
buffer_size          100000  100000  100000  10000
update_freq          4       8       4       4
soft_update          0.0012  0.0023  0.0012  0.0071
lstm_hidden          -       -       -       64
lstm_seq_len         -       -       -       10
";

const AVOID_LAVA_PRIOR: &str = "
key                  dqn     drqn    amrl    amrl-mem
epsilon_decay        0.99    0.995   0.992   0.997
module_lr            0.0008  0.0008  0.0036  0.00576
selector_lr          -       -       0.0077  0.00053
latent_dim           64      64      64      64
batch_size           64      64      64      64
buffer_size          100000  100000  100000  10000
update_freq          8       8       4       8
soft_update          0.001   0.0023  0.0012  0.0071
lstm_hidden          -       10      -       16
lstm_seq_len         -       16      -       8
";

const EXPLORE_PRIOR: &str = "
key                  dqn     drqn    amrl    amrl-mem
epsilon_decay        0.99    0.995   0.992   0.997
module_lr            0.0008  0.0008  0.0036  0.00576
selector_lr          -       -       0.0077  0.00053
latent_dim           64      64      64      64
batch_size           64      64      128     64
buffer_size          100000  100000  100000  10000
update_freq          8       8       4       8
soft_update          0.001   0.0023  0.0012  0.0071
lstm_hidden          -       10      -       16
lstm_seq_len         -       16      -       8
";

const GET_KEY_PRIOR: &str = "
key                  dqn     drqn    amrl     amrl-mem
epsilon_decay        0.999   0.999   0.999    0.999
module_lr            0.0008  0.0008  0.00086  0.00057
selector_lr          -       -       0.00016  0.000132
latent_dim           64      64      64       32
batch_size           64      128     128      82
buffer_size          100000  100000  100000   10000
update_freq          8       8       8        4
soft_update          0.001   0.0023  0.0012   0.0071
lstm_hidden          -       100     -        200
lstm_seq_len         -       32      -        15
";

fn cell(h: &crate::agents::Hyperparameters, key: &str) -> Option<f64> {
    let u = |v: usize| Some(v as f64);
    match key {
        "epsilon_decay" => Some(h.epsilon_decay),
        "module_lr" => Some(h.module_lr),
        "selector_lr" => h.selector_lr,
        "latent_dim" => u(h.latent_dim),
        "combined_latent" => h.combined_latent.and_then(u),
        "knowledge_latent" => h.knowledge_latent.and_then(u),
        "knowledge_embedding" => h.knowledge_embedding.and_then(u),
        "state_embedding" => h.state_embedding.and_then(u),
        "batch_size" => u(h.batch_size),
        "buffer_size" => u(h.buffer_size),
        "update_freq" => u(h.update_freq),
        "soft_update" => Some(h.soft_update),
        "lstm_hidden" => h.lstm_hidden.and_then(u),
        "lstm_seq_len" => h.lstm_seq_len.and_then(u),
        other => panic!("unknown key {other}"),
    }
}

fn check_table(table: &str, prefixes: &[&str]) -> usize {
    let mut lines = table.lines().filter(|l| !l.trim().is_empty());
    let columns: Vec<&str> = lines.next().unwrap().split_whitespace().skip(1).collect();
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split_whitespace().collect()).collect();
    let mut checked = 0;
    for prefix in prefixes {
        for (c, column) in columns.iter().enumerate() {
            let name = format!("{prefix}-{column}");
            let cfg = load_config(&name).unwrap_or_else(|e| panic!("{name}: {e}"));
            for row in &rows {
                let expected = match row[c + 1] {
                    "-" => None,
                    v => Some(v.parse::<f64>().unwrap()),
                };
                assert_eq!(cell(&cfg.hyper, row[0]), expected, "{name} {}", row[0]);
                checked += 1;
            }
            assert_eq!(cfg.hyper.gamma, 0.99, "{name}");
        }
    }
    checked
}

#[test]
fn presets_match_published_tables() {
    let mut checked = check_table(COLLECT_LEARNING, &["collect-learning"]);
    checked += check_table(CROSSING_DOORKEY_LEARNING, &["crossing-learning", "doorkey-learning"]);
    checked += check_table(ORACLE_PRIOR, &["collect-oracle"]);
    checked += check_table(AVOID_LAVA_PRIOR, &["crossing-avoidlava"]);
    checked += check_table(EXPLORE_PRIOR, &["crossing-explore"]);
    checked += check_table(GET_KEY_PRIOR, &["doorkey-getkey"]);
    assert_eq!(checked, 5 * 14 + 8 * 10 + 4 * 14 + 3 * 4 * 10);
    // The oracle trainer uses the DQN column of the oracle table.
    let trainer = load_config("collect-oracle").unwrap();
    assert_eq!(trainer.hyper, load_config("collect-oracle-dqn").unwrap().hyper);
}

#[test]
fn every_preset_loads_and_names_itself() {
    for (name, _) in PRESETS {
        let cfg = load_config(name).unwrap_or_else(|e| panic!("{name}: {e}"));
        assert_eq!(cfg.name, name);
        assert_eq!(
            cfg.env.max_steps(),
            if cfg.env.kind() == EnvKind::Collect && cfg.env.grid_size() == 20 {
                200
            } else {
                150
            }
        );
    }
    assert_eq!(PRESETS.len(), 30);
}

#[test]
fn oracle_preset_environment() {
    let cfg = load_config("collect-oracle").unwrap();
    let EnvSpec::Collect(c) = &cfg.env else { panic!() };
    assert_eq!((c.grid_size, c.min_mode_dist, c.max_steps), (20, 15.0, 200));
    assert_eq!(cfg.oracle.as_ref().unwrap().gate_balls, 10.0);
    assert_eq!(cfg.oracle.as_ref().unwrap().eval_episodes, 50);
}

#[test]
fn prior_knowledge_presets_wire_their_modules() {
    let kinds = |name: &str| {
        load_config(name)
            .unwrap()
            .modules
            .iter()
            .map(|m| (m.kind, m.reward_fn()))
            .collect::<Vec<_>>()
    };
    assert_eq!(
        kinds("doorkey-getkey-amrl"),
        vec![
            (ModuleKind::GetKey, RewardFn::KeyBonus),
            (ModuleKind::Learnable, RewardFn::Global)
        ]
    );
    assert_eq!(
        kinds("crossing-avoidlava-amrl"),
        vec![
            (ModuleKind::AvoidLava, RewardFn::LavaPenalty),
            (ModuleKind::Learnable, RewardFn::Global)
        ]
    );
    assert_eq!(
        kinds("collect-learning-amrl"),
        vec![
            (ModuleKind::Learnable, RewardFn::ModePickup(0)),
            (ModuleKind::Learnable, RewardFn::ModePickup(1))
        ]
    );
    assert_eq!(
        load_config("collect-learning-amrl-ds").unwrap().agent,
        AgentKind::AmrlDs
    );
}

fn tiny_toml(extra_hyper: &str) -> String {
    format!(
        r#"
name = "tiny"
agent = "dqn"
episodes = 3
seeds = [1, 2]
checkpoint_every = 2

[env]
id = "lava_crossing"
max_steps = 20

[hyper]
epsilon_decay = 0.9
module_lr = 0.001
latent_dim = 8
batch_size = 8
buffer_size = 500
update_freq = 2
soft_update = 0.01
{extra_hyper}
"#
    )
}

#[test]
fn config_defaults_and_rejections() {
    let cfg = ExperimentConfig::from_toml(&tiny_toml(""), "tiny").unwrap();
    assert_eq!(cfg.hyper.gamma, 0.99);
    assert_eq!(cfg.hyper.epsilon_min, 0.05);
    assert!(cfg.trace);
    let no_steps = tiny_toml("").replace("max_steps = 20\n", "");
    assert_eq!(
        ExperimentConfig::from_toml(&no_steps, "t").unwrap().env.max_steps(),
        150
    );

    let err = ExperimentConfig::from_toml(&tiny_toml("").replace("0.001", "-0.001"), "t").unwrap_err();
    assert!(err.is_config() && err.to_string().contains("module_lr"), "{err}");
    let err = ExperimentConfig::from_toml(&tiny_toml("colour = 3"), "t").unwrap_err();
    assert!(err.is_config() && err.to_string().contains("colour"), "{err}");
    let err = ExperimentConfig::from_toml(&tiny_toml("lstm_hidden = 4"), "t").unwrap_err();
    assert!(err.to_string().contains("lstm_hidden"), "{err}");
    let err = ExperimentConfig::from_toml(&tiny_toml("").replace("seeds = [1, 2]", "seeds = [1, 1]"), "t").unwrap_err();
    assert!(err.to_string().contains("seeds"), "{err}");
    let infeasible = tiny_toml("").replace(
        "id = \"lava_crossing\"\nmax_steps = 20",
        "id = \"collect\"\ngrid_size = 8\nview_size = 5\nn_modes = 2\nmin_mode_dist = 30.0\nn_balls = 12\nsigma = 2.0",
    );
    assert!(ExperimentConfig::from_toml(&infeasible, "t").unwrap_err().is_config());
    assert!(load_config("no-such-preset").unwrap_err().is_config());
}

#[test]
fn config_round_trips_through_toml() {
    for (name, _) in PRESETS {
        let cfg = load_config(name).unwrap();
        assert_eq!(ExperimentConfig::from_toml(&cfg.to_toml(), name).unwrap(), cfg);
    }
}

#[test]
fn env_files_accept_bare_or_embedded_tables() {
    let dir = tempfile::tempdir().unwrap();
    let bare = dir.path().join("env.toml");
    std::fs::write(&bare, "id = \"door_key\"\nmax_steps = 40\n").unwrap();
    assert_eq!(
        load_env(bare.to_str().unwrap()).unwrap(),
        EnvSpec::DoorKey { max_steps: 40 }
    );
    assert_eq!(
        load_env("doorkey-getkey-amrl").unwrap(),
        EnvSpec::DoorKey { max_steps: 150 }
    );
}

#[test]
fn moving_average_examples() {
    assert!((moving_average(&[1.0, 0.0, 1.0], 30)[2] - 2.0 / 3.0).abs() < 1e-15);
    assert!(moving_average(&[0.25; 100], 30).iter().all(|&v| v == 0.25));
    let mut series = vec![1.0; 30];
    series.extend([0.0; 30]);
    let avg = moving_average(&series, 30);
    assert_eq!(avg[59], 0.0);
    assert_eq!(avg[29], 1.0);
}

proptest! {
    #[test]
    fn moving_average_is_trailing_mean(values in proptest::collection::vec(-5.0f64..5.0, 1..80), window in 1usize..40) {
        let avg = moving_average(&values, window);
        for e in 0..values.len() {
            let lo = (e + 1).saturating_sub(window);
            let slice = &values[lo..=e];
            let naive = slice.iter().sum::<f64>() / slice.len() as f64;
            prop_assert!((avg[e] - naive).abs() < 1e-12);
        }
    }
}

#[test]
fn aggregate_examples() {
    let curve = vec![0.1, 0.4, 0.2];
    let same = aggregate_curves(&[curve.clone(), curve.clone(), curve.clone()]).unwrap();
    assert!(same
        .iter()
        .zip(&curve)
        .all(|(r, &c)| (r.mean - c).abs() < 1e-15 && r.min == c && r.max == c));
    let single = aggregate_curves(std::slice::from_ref(&curve)).unwrap();
    assert!(single
        .iter()
        .zip(&curve)
        .all(|(r, &c)| r.mean == c && r.min == c && r.max == c));

    let toy = [
        vec![0.1, 0.5, 0.9],
        vec![0.3, 0.2, 0.4],
        vec![0.0, 1.0, 0.6],
        vec![0.7, 0.7, 0.7],
        vec![0.4, 0.1, 0.8, 0.9],
    ];
    let rows = aggregate_curves(&toy).unwrap();
    assert_eq!(rows.len(), 3);
    for (row, (mean, min, max)) in rows.iter().zip([(0.3, 0.0, 0.7), (0.5, 0.1, 1.0), (0.68, 0.4, 0.9)]) {
        assert!(
            (row.mean - mean).abs() < 1e-12 && row.min == min && row.max == max,
            "{row:?}"
        );
    }
    assert!(aggregate_curves(&[]).unwrap_err().is_config());
}

#[test]
fn output_root_precedence() {
    let mut cfg = ExperimentConfig::from_toml(&tiny_toml(""), "t").unwrap();
    cfg.output_dir = Some("from-config".into());
    assert_eq!(
        output_root(Some(Path::new("explicit")), &cfg),
        PathBuf::from("explicit")
    );
    std::env::set_var(OUTPUT_ENV, "from-env");
    assert_eq!(output_root(None, &cfg), PathBuf::from("from-env"));
    std::env::remove_var(OUTPUT_ENV);
    assert_eq!(output_root(None, &cfg), PathBuf::from("from-config"));
    cfg.output_dir = None;
    assert_eq!(output_root(None, &cfg), PathBuf::from("runs"));
}

#[test]
fn runs_are_reproducible_and_manifests_verify() {
    let cfg = ExperimentConfig::from_toml(&tiny_toml(""), "t").unwrap();
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let (pa, ma) = run_seed(&cfg, 1, a.path()).unwrap();
    let (pb, _) = run_seed(&cfg, 1, b.path()).unwrap();
    let read = |p: &Path| std::fs::read(p.parent().unwrap().join("metrics.csv")).unwrap();
    assert_eq!(read(&pa), read(&pb));
    assert!(String::from_utf8(read(&pa)).unwrap().starts_with(
        "seed,episode,return,steps,moving_avg_30,epsilon,balls,lava_death,success,buffer_pushes,updates\n"
    ));
    assert!(ma.complete);
    assert_eq!(ma.episodes_completed, 3);
    assert_eq!(
        ma.checkpoints,
        vec![
            PathBuf::from("checkpoints/episode-000002.json"),
            PathBuf::from("checkpoints/final.json")
        ]
    );
    let loaded = LoadedManifest::load(&pa).unwrap();
    loaded.verify().unwrap();
    let rows = loaded.metrics().unwrap();
    assert_eq!(rows.iter().map(|r| r.episode).collect::<Vec<_>>(), vec![0, 1, 2]);
    assert_eq!(rows[1].epsilon, 0.9);
    assert!(rows.iter().all(|r| r.buffer_pushes == r.steps as u64));
    let other_seed = run_seed(&cfg, 2, a.path()).unwrap().0;
    assert_ne!(read(&pa), read(&other_seed));
}

#[test]
fn modular_runs_trace_every_step_and_dump_replay() {
    let toml = tiny_toml("selector_lr = 0.001")
        .replace("agent = \"dqn\"", "agent = \"amrl_ds\"\ndump_replay = true")
        .replace(
            "[hyper]",
            "[[modules]]\nkind = \"avoid_lava\"\n\n[[modules]]\nkind = \"learnable\"\n\n[hyper]",
        );
    let cfg = ExperimentConfig::from_toml(&toml, "t").unwrap();
    let dir = tempfile::tempdir().unwrap();
    let (path, manifest) = run_seed(&cfg, 1, dir.path()).unwrap();
    let loaded = LoadedManifest::load(&path).unwrap();
    loaded.verify().unwrap();
    let trace = loaded.trace().unwrap().unwrap();
    let rows = loaded.metrics().unwrap();
    assert_eq!(trace.len(), rows.iter().map(|r| r.steps).sum::<usize>());
    for rec in &trace {
        assert_eq!(rec.action, rec.proposal_list().unwrap()[rec.module]);
        assert_eq!(rec.buffer_pushes, 2);
    }
    let dump = std::fs::File::open(loaded.path(manifest.replay_dump.as_ref().unwrap())).unwrap();
    let transitions = crate::replay::read_dump(dump).unwrap();
    assert_eq!(transitions.len(), trace.len());
    assert!(transitions.iter().all(|t| t.action < 2));
}

#[test]
fn failed_runs_leave_incomplete_manifests() {
    let toml = tiny_toml("selector_lr = 0.001")
        .replace("agent = \"dqn\"", "agent = \"amrl\"")
        .replace("id = \"lava_crossing\"\nmax_steps = 20", "id = \"collect\"\ngrid_size = 10\nview_size = 5\nn_modes = 2\nmin_mode_dist = 4.0\nn_balls = 12\nsigma = 2.0")
        .replace("[hyper]", "[[modules]]\nkind = \"oracle\"\ncheckpoint = \"missing.json\"\n\n[hyper]");
    let cfg = ExperimentConfig::from_toml(&toml, "t").unwrap();
    let dir = tempfile::tempdir().unwrap();
    assert!(run_seed(&cfg, 1, dir.path()).is_err());
    let manifest = LoadedManifest::load(&run_dir(dir.path(), &cfg, 1).join("manifest.json")).unwrap();
    assert!(!manifest.manifest.complete);
    assert!(manifest.manifest.error.unwrap().contains("missing.json"));
    assert!(
        aggregate_manifests(&[LoadedManifest::load(&run_dir(dir.path(), &cfg, 1).join("manifest.json")).unwrap()])
            .unwrap_err()
            .is_config()
    );
}

#[test]
fn early_stop_on_moving_average() {
    let toml = tiny_toml("").replace("episodes = 3", "episodes = 40\nstop_at_moving_avg = -1.0");
    let cfg = ExperimentConfig::from_toml(&toml, "t").unwrap();
    let dir = tempfile::tempdir().unwrap();
    let (_, m) = run_seed(&cfg, 1, dir.path()).unwrap();
    assert!(m.stopped_early);
    assert_eq!(m.episodes_completed, MOVING_WINDOW as u64);
}

fn tiny_oracle_toml(gate: f64) -> String {
    format!(
        r#"
name = "tiny-oracle"
agent = "dqn"
episodes = 4
seeds = [3]

[env]
id = "collect"
grid_size = 10
view_size = 5
n_modes = 2
min_mode_dist = 4.0
n_balls = 12
sigma = 2.0
max_steps = 30

[oracle]
gate_balls = {gate:?}
eval_episodes = 3
eval_every = 2
checkpoint = "oracles/tiny.json"

[hyper]
epsilon_decay = 0.9
module_lr = 0.001
latent_dim = 8
batch_size = 8
buffer_size = 500
update_freq = 2
soft_update = 0.01
"#
    )
}

#[test]
fn oracle_gate_outcomes() {
    use crate::knowledge::{KnowledgeModule, OracleCheckpoint};
    let dir = tempfile::tempdir().unwrap();
    let failing = ExperimentConfig::from_toml(&tiny_oracle_toml(13.0), "t").unwrap();
    let (path, m) = train_oracle(&failing, dir.path()).unwrap();
    let outcome = m.oracle.clone().unwrap();
    assert!(!outcome.gate_passed);
    assert_eq!(m.episodes_completed, 4);
    LoadedManifest::load(&path).unwrap().verify().unwrap();
    let ck_path = dir.path().join("oracles/tiny.json");
    assert!(!OracleCheckpoint::<f64>::load(&ck_path).unwrap().gate_passed);
    assert!(KnowledgeModule::<f64>::load_oracle(0, &ck_path).is_err());

    let passing = ExperimentConfig::from_toml(&tiny_oracle_toml(1e-9), "t").unwrap();
    let (_, m) = train_oracle(&passing, dir.path()).unwrap();
    let outcome = m.oracle.unwrap();
    // Any ball at all passes, so training stops at the first evaluation
    // unless the greedy policy collected nothing.
    assert_eq!(outcome.gate_passed, outcome.mean_balls > 0.0);
    let ck = OracleCheckpoint::<f64>::load(&ck_path).unwrap();
    assert_eq!(ck.gate_passed, outcome.gate_passed);
    let bytes = std::fs::read(&ck_path).unwrap();
    ck.save(&dir.path().join("copy.json")).unwrap();
    assert_eq!(bytes, std::fs::read(dir.path().join("copy.json")).unwrap());
}

#[test]
fn aggregate_over_run_manifests() {
    let cfg = ExperimentConfig::from_toml(&tiny_toml(""), "t").unwrap();
    let dir = tempfile::tempdir().unwrap();
    let loaded: Vec<_> = cfg
        .seeds
        .iter()
        .map(|&s| LoadedManifest::load(&run_seed(&cfg, s, dir.path()).unwrap().0).unwrap())
        .collect();
    let groups = aggregate_manifests(&loaded).unwrap();
    assert_eq!(groups.len(), 1);
    assert_eq!(groups[0].0, "tiny");
    let curves: Vec<Vec<f64>> = loaded
        .iter()
        .map(|m| m.metrics().unwrap().iter().map(|r| r.moving_avg_30).collect())
        .collect();
    assert_eq!(groups[0].1, aggregate_curves(&curves).unwrap());
}
