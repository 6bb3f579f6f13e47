//! Shipped experiment configurations, one per agent column of every
//! hyperparameter table, plus the oracle trainer.

pub const PRESETS: [(&str, &str); 30] = [
    (
        "collect-learning-amrl",
        include_str!("../../presets/collect-learning-amrl.toml"),
    ),
    (
        "collect-learning-amrl-ds",
        include_str!("../../presets/collect-learning-amrl-ds.toml"),
    ),
    (
        "collect-learning-dqn",
        include_str!("../../presets/collect-learning-dqn.toml"),
    ),
    (
        "collect-learning-dqn-k",
        include_str!("../../presets/collect-learning-dqn-k.toml"),
    ),
    (
        "collect-learning-drqn",
        include_str!("../../presets/collect-learning-drqn.toml"),
    ),
    ("collect-oracle", include_str!("../../presets/collect-oracle.toml")),
    (
        "collect-oracle-amrl",
        include_str!("../../presets/collect-oracle-amrl.toml"),
    ),
    (
        "collect-oracle-amrl-mem",
        include_str!("../../presets/collect-oracle-amrl-mem.toml"),
    ),
    (
        "collect-oracle-dqn",
        include_str!("../../presets/collect-oracle-dqn.toml"),
    ),
    (
        "collect-oracle-dqn-k",
        include_str!("../../presets/collect-oracle-dqn-k.toml"),
    ),
    (
        "crossing-avoidlava-amrl",
        include_str!("../../presets/crossing-avoidlava-amrl.toml"),
    ),
    (
        "crossing-avoidlava-amrl-mem",
        include_str!("../../presets/crossing-avoidlava-amrl-mem.toml"),
    ),
    (
        "crossing-avoidlava-dqn",
        include_str!("../../presets/crossing-avoidlava-dqn.toml"),
    ),
    (
        "crossing-avoidlava-drqn",
        include_str!("../../presets/crossing-avoidlava-drqn.toml"),
    ),
    (
        "crossing-explore-amrl",
        include_str!("../../presets/crossing-explore-amrl.toml"),
    ),
    (
        "crossing-explore-amrl-mem",
        include_str!("../../presets/crossing-explore-amrl-mem.toml"),
    ),
    (
        "crossing-explore-dqn",
        include_str!("../../presets/crossing-explore-dqn.toml"),
    ),
    (
        "crossing-explore-drqn",
        include_str!("../../presets/crossing-explore-drqn.toml"),
    ),
    (
        "crossing-learning-amrl",
        include_str!("../../presets/crossing-learning-amrl.toml"),
    ),
    (
        "crossing-learning-amrl-ds",
        include_str!("../../presets/crossing-learning-amrl-ds.toml"),
    ),
    (
        "crossing-learning-dqn",
        include_str!("../../presets/crossing-learning-dqn.toml"),
    ),
    (
        "crossing-learning-drqn",
        include_str!("../../presets/crossing-learning-drqn.toml"),
    ),
    (
        "doorkey-getkey-amrl",
        include_str!("../../presets/doorkey-getkey-amrl.toml"),
    ),
    (
        "doorkey-getkey-amrl-mem",
        include_str!("../../presets/doorkey-getkey-amrl-mem.toml"),
    ),
    (
        "doorkey-getkey-dqn",
        include_str!("../../presets/doorkey-getkey-dqn.toml"),
    ),
    (
        "doorkey-getkey-drqn",
        include_str!("../../presets/doorkey-getkey-drqn.toml"),
    ),
    (
        "doorkey-learning-amrl",
        include_str!("../../presets/doorkey-learning-amrl.toml"),
    ),
    (
        "doorkey-learning-amrl-ds",
        include_str!("../../presets/doorkey-learning-amrl-ds.toml"),
    ),
    (
        "doorkey-learning-dqn",
        include_str!("../../presets/doorkey-learning-dqn.toml"),
    ),
    (
        "doorkey-learning-drqn",
        include_str!("../../presets/doorkey-learning-drqn.toml"),
    ),
];

pub fn preset_source(name: &str) -> Option<&'static str> {
    PRESETS.iter().find(|(n, _)| *n == name).map(|(_, text)| *text)
}

pub fn preset_names() -> impl Iterator<Item = &'static str> {
    PRESETS.iter().map(|(n, _)| *n)
}
