//! Partially observable gridworlds: Collect, Lava-Crossing and Door-Key.

mod generate;
mod grid;
mod state;

pub use generate::{
    gen_collect, gen_doorkey, gen_lava_crossing, modes_separated, sample_modes, CollectConfig, EnvSpec,
    DEFAULT_MAX_STEPS, MAX_ATTEMPTS,
};
pub use grid::{Action, AgentPose, CellKind, Heading, Item};
pub use state::{egocentric_view, EnvKind, EnvOutcome, GridState, Observation, StepEvent};

#[cfg(test)]
mod tests;
