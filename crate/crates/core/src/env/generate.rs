//! Procedural generation of the three environments.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::grid::{AgentPose, CellKind, Heading};
use super::state::{EnvKind, GridState, Observation};
use crate::error::{Error, Result};

/// Rejection sampling gives up after this many attempts.
pub const MAX_ATTEMPTS: usize = 100_000;
pub const DEFAULT_MAX_STEPS: usize = 150;

fn default_max_steps() -> usize {
    DEFAULT_MAX_STEPS
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CollectConfig {
    /// Side length including the border wall.
    pub grid_size: usize,
    pub view_size: usize,
    pub n_modes: usize,
    pub min_mode_dist: f64,
    pub n_balls: usize,
    pub sigma: f64,
    #[serde(default = "default_max_steps")]
    pub max_steps: usize,
}

impl Default for CollectConfig {
    fn default() -> Self {
        Self {
            grid_size: 15,
            view_size: 5,
            n_modes: 2,
            min_mode_dist: 10.0,
            n_balls: 12,
            sigma: 2.0,
            max_steps: DEFAULT_MAX_STEPS,
        }
    }
}

impl CollectConfig {
    /// Larger instance used with a pre-trained oracle.
    pub fn oracle_variant() -> Self {
        Self {
            grid_size: 20,
            min_mode_dist: 15.0,
            max_steps: 200,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.grid_size < 4 {
            return Err(Error::config("grid_size", "must be at least 4"));
        }
        if self.view_size < 3 || self.view_size.is_multiple_of(2) {
            return Err(Error::config("view_size", "must be odd and at least 3"));
        }
        if self.n_modes == 0 {
            return Err(Error::config("n_modes", "must be positive"));
        }
        if self.n_balls == 0 {
            return Err(Error::config("n_balls", "must be positive"));
        }
        let interior = (self.grid_size - 2) * (self.grid_size - 2);
        if self.n_balls + 1 > interior {
            return Err(Error::config("n_balls", "more balls than free cells"));
        }
        if !(self.sigma.is_finite() && self.sigma > 0.0) {
            return Err(Error::config("sigma", "must be positive"));
        }
        if !(self.min_mode_dist.is_finite() && self.min_mode_dist >= 0.0) {
            return Err(Error::config("min_mode_dist", "must be non-negative"));
        }
        let span = (self.grid_size - 3) as f64;
        if self.n_modes > 1 && self.min_mode_dist > span * std::f64::consts::SQRT_2 {
            return Err(Error::config(
                "min_mode_dist",
                format!("no two interior cells are {} apart", self.min_mode_dist),
            ));
        }
        if self.max_steps == 0 {
            return Err(Error::config("max_steps", "must be positive"));
        }
        Ok(())
    }
}

/// Environment selection and parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "id", rename_all = "snake_case", deny_unknown_fields)]
pub enum EnvSpec {
    Collect(CollectConfig),
    LavaCrossing {
        #[serde(default = "default_max_steps")]
        max_steps: usize,
    },
    DoorKey {
        #[serde(default = "default_max_steps")]
        max_steps: usize,
    },
}

impl EnvSpec {
    pub fn kind(&self) -> EnvKind {
        match self {
            EnvSpec::Collect(_) => EnvKind::Collect,
            EnvSpec::LavaCrossing { .. } => EnvKind::LavaCrossing,
            EnvSpec::DoorKey { .. } => EnvKind::DoorKey,
        }
    }

    pub fn view_size(&self) -> usize {
        match self {
            EnvSpec::Collect(c) => c.view_size,
            _ => 7,
        }
    }

    pub fn max_steps(&self) -> usize {
        match self {
            EnvSpec::Collect(c) => c.max_steps,
            EnvSpec::LavaCrossing { max_steps } | EnvSpec::DoorKey { max_steps } => *max_steps,
        }
    }

    pub fn grid_size(&self) -> usize {
        match self {
            EnvSpec::Collect(c) => c.grid_size,
            EnvSpec::LavaCrossing { .. } => 9,
            EnvSpec::DoorKey { .. } => 8,
        }
    }

    pub fn action_count(&self) -> usize {
        self.kind().action_count()
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            EnvSpec::Collect(c) => c.validate(),
            EnvSpec::LavaCrossing { max_steps } | EnvSpec::DoorKey { max_steps } => {
                if *max_steps == 0 {
                    Err(Error::config("max_steps", "must be positive"))
                } else {
                    Ok(())
                }
            }
        }
    }

    /// Generates a fresh episode.
    pub fn reset<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<(GridState, Observation)> {
        self.validate()?;
        let state = match self {
            EnvSpec::Collect(c) => gen_collect(c, rng)?,
            EnvSpec::LavaCrossing { max_steps } => gen_lava_crossing(*max_steps, rng),
            EnvSpec::DoorKey { max_steps } => gen_doorkey(*max_steps, rng),
        };
        let obs = state.observe();
        Ok((state, obs))
    }
}

fn distance(a: (usize, usize), b: (usize, usize)) -> f64 {
    let dx = a.0 as f64 - b.0 as f64;
    let dy = a.1 as f64 - b.1 as f64;
    (dx * dx + dy * dy).sqrt()
}

/// Whether every pair of centres is at least `min_dist` apart (Euclidean).
pub fn modes_separated(modes: &[(usize, usize)], min_dist: f64) -> bool {
    modes
        .iter()
        .enumerate()
        .all(|(i, &a)| modes[i + 1..].iter().all(|&b| distance(a, b) >= min_dist))
}

/// Mode centres uniform over interior cells, rejected until separated.
pub fn sample_modes<R: Rng + ?Sized>(
    grid_size: usize,
    n_modes: usize,
    min_dist: f64,
    rng: &mut R,
) -> Result<Vec<(usize, usize)>> {
    for _ in 0..MAX_ATTEMPTS {
        let modes: Vec<(usize, usize)> = (0..n_modes)
            .map(|_| (rng.gen_range(1..grid_size - 1), rng.gen_range(1..grid_size - 1)))
            .collect();
        if modes_separated(&modes, min_dist) {
            return Ok(modes);
        }
    }
    Err(Error::Infeasible(format!(
        "no {n_modes} modes at distance >= {min_dist} on a {grid_size} grid after {MAX_ATTEMPTS} attempts"
    )))
}

pub fn gen_collect<R: Rng + ?Sized>(cfg: &CollectConfig, rng: &mut R) -> Result<GridState> {
    cfg.validate()?;
    let n = cfg.grid_size;
    let mut state = GridState::blank(EnvKind::Collect, n, n, cfg.max_steps, cfg.view_size);
    state.modes = sample_modes(n, cfg.n_modes, cfg.min_mode_dist, rng)?;
    state.n_balls = cfg.n_balls;
    let normal = Normal::new(0.0, cfg.sigma).expect("validated sigma");
    let mut attempts = 0;
    for _ in 0..cfg.n_balls {
        let (mx, my) = state.modes[rng.gen_range(0..cfg.n_modes)];
        loop {
            attempts += 1;
            if attempts > MAX_ATTEMPTS {
                return Err(Error::Infeasible("could not place balls".into()));
            }
            let x = (mx as f64 + normal.sample(rng)).round();
            let y = (my as f64 + normal.sample(rng)).round();
            if x < 1.0 || y < 1.0 || x > (n - 2) as f64 || y > (n - 2) as f64 {
                continue;
            }
            let (x, y) = (x as usize, y as usize);
            if state.get(x, y) == CellKind::Empty {
                state.set(x, y, CellKind::Ball);
                break;
            }
        }
    }
    let free: Vec<(usize, usize)> = (1..n - 1)
        .flat_map(|y| (1..n - 1).map(move |x| (x, y)))
        .filter(|&(x, y)| state.get(x, y) == CellKind::Empty)
        .collect();
    let &(x, y) = free.choose(rng).expect("validated: a free cell remains");
    state.pose = AgentPose::new(x, y, Heading::from_index(rng.gen_range(0..4)));
    Ok(state)
}

/// 9x9 grid, one vertical and one horizontal lava stream, each with a single
/// gap placed so that the goal stays reachable.
pub fn gen_lava_crossing<R: Rng + ?Sized>(max_steps: usize, rng: &mut R) -> GridState {
    const SIZE: usize = 9;
    let mut state = GridState::blank(EnvKind::LavaCrossing, SIZE, SIZE, max_steps, 7);
    state.pose = AgentPose::new(1, 1, Heading::East);
    state.set(SIZE - 2, SIZE - 2, CellKind::Goal);
    let slots: Vec<usize> = (2..SIZE - 2).step_by(2).collect();
    let river_x = *slots.choose(rng).expect("slots");
    let river_y = *slots.choose(rng).expect("slots");
    for i in 1..SIZE - 1 {
        state.set(river_x, i, CellKind::Lava);
        state.set(i, river_y, CellKind::Lava);
    }
    // Crossing order: move right through the vertical stream or down
    // through the horizontal one first.
    let limits_x = [0, river_x, SIZE - 1];
    let limits_y = [0, river_y, SIZE - 1];
    let mut path = [true, false];
    path.shuffle(rng);
    let (mut room_x, mut room_y) = (0, 0);
    for horizontal in path {
        if horizontal {
            let x = limits_x[room_x + 1];
            let y = rng.gen_range(limits_y[room_y] + 1..limits_y[room_y + 1]);
            state.set(x, y, CellKind::Empty);
            room_x += 1;
        } else {
            let x = rng.gen_range(limits_x[room_x] + 1..limits_x[room_x + 1]);
            let y = limits_y[room_y + 1];
            state.set(x, y, CellKind::Empty);
            room_y += 1;
        }
    }
    state
}

/// 8x8 grid split by a wall with one locked door; the key and the agent are
/// left of the wall, the goal is in the bottom-right corner.
pub fn gen_doorkey<R: Rng + ?Sized>(max_steps: usize, rng: &mut R) -> GridState {
    const SIZE: usize = 8;
    let mut state = GridState::blank(EnvKind::DoorKey, SIZE, SIZE, max_steps, 7);
    state.set(SIZE - 2, SIZE - 2, CellKind::Goal);
    let split = rng.gen_range(2..SIZE - 2);
    for y in 1..SIZE - 1 {
        state.set(split, y, CellKind::Wall);
    }
    let door_y = rng.gen_range(1..SIZE - 2);
    state.set(split, door_y, CellKind::DoorLocked);
    state.door = Some((split, door_y));
    let left: Vec<(usize, usize)> = (1..SIZE - 1).flat_map(|y| (1..split).map(move |x| (x, y))).collect();
    let mut picks = left.choose_multiple(rng, 2);
    let &(kx, ky) = picks.next().expect("left room has at least two cells");
    let &(ax, ay) = picks.next().expect("left room has at least two cells");
    state.set(kx, ky, CellKind::Key);
    state.pose = AgentPose::new(ax, ay, Heading::from_index(rng.gen_range(0..4)));
    state
}
