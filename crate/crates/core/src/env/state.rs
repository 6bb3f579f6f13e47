use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::grid::{Action, AgentPose, CellKind, Item, MAX_COLOR, MAX_OBJECT, MAX_STATE};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnvKind {
    Collect,
    LavaCrossing,
    DoorKey,
}

impl EnvKind {
    pub fn action_count(self) -> usize {
        match self {
            EnvKind::Collect => 4,
            EnvKind::LavaCrossing => 3,
            EnvKind::DoorKey => 5,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            EnvKind::Collect => "collect",
            EnvKind::LavaCrossing => "lava_crossing",
            EnvKind::DoorKey => "door_key",
        }
    }
}

/// Egocentric `view x view x 3` integer observation. Row 0 is the farthest
/// row; the agent sits at the bottom row, centre column, facing up.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Observation {
    pub view: usize,
    pub data: Vec<u8>,
}

impl Observation {
    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn cell(&self, row: usize, col: usize) -> [u8; 3] {
        let i = (row * self.view + col) * 3;
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    pub fn kind_at(&self, row: usize, col: usize) -> Option<CellKind> {
        CellKind::decode(self.cell(row, col))
    }

    /// `(row, col)` of the agent.
    pub fn agent_cell(&self) -> (usize, usize) {
        (self.view - 1, self.view / 2)
    }

    /// Kind of the cell directly in front of the agent.
    pub fn ahead(&self) -> Option<CellKind> {
        let (r, c) = self.agent_cell();
        self.kind_at(r - 1, c)
    }

    /// Writes channel-normalised features into `out`.
    pub fn write_features<T: Scalar>(&self, out: &mut [T]) {
        let scale = [
            1.0 / f64::from(MAX_OBJECT),
            1.0 / f64::from(MAX_COLOR),
            1.0 / f64::from(MAX_STATE),
        ];
        for (i, (o, &v)) in out.iter_mut().zip(&self.data).enumerate() {
            *o = T::of(f64::from(v) * scale[i % 3]);
        }
    }

    pub fn batch<'a, T: Scalar>(obs: impl ExactSizeIterator<Item = &'a Observation>) -> Array2<T> {
        let n = obs.len();
        let mut rows: Option<Array2<T>> = None;
        for (k, o) in obs.enumerate() {
            let m = rows.get_or_insert_with(|| Array2::zeros((n, o.len())));
            let mut row = m.row_mut(k);
            o.write_features(row.as_slice_mut().expect("contiguous row"));
        }
        rows.unwrap_or_else(|| Array2::zeros((0, 0)))
    }
}

/// Notable things that happened during a step; used for modular rewards
/// and statistics.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepEvent {
    PickedBall { x: usize, y: usize, nearest_mode: usize },
    PickedKey,
    OpenedDoor,
    ReachedGoal,
    EnteredLava,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnvOutcome {
    pub obs: Observation,
    pub reward: f64,
    pub terminated: bool,
    pub truncated: bool,
    pub event: Option<StepEvent>,
}

impl EnvOutcome {
    pub fn done(&self) -> bool {
        self.terminated || self.truncated
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridState {
    pub kind: EnvKind,
    pub width: usize,
    pub height: usize,
    pub cells: Vec<CellKind>,
    pub pose: AgentPose,
    pub step_count: usize,
    pub max_steps: usize,
    pub view_size: usize,
    /// Collect: mode centres the balls were drawn around.
    pub modes: Vec<(usize, usize)>,
    pub n_balls: usize,
    pub balls_collected: usize,
    pub door: Option<(usize, usize)>,
    pub finished: bool,
}

impl GridState {
    pub(crate) fn blank(kind: EnvKind, width: usize, height: usize, max_steps: usize, view_size: usize) -> Self {
        let mut cells = vec![CellKind::Empty; width * height];
        for y in 0..height {
            for x in 0..width {
                if x == 0 || y == 0 || x + 1 == width || y + 1 == height {
                    cells[y * width + x] = CellKind::Wall;
                }
            }
        }
        Self {
            kind,
            width,
            height,
            cells,
            pose: AgentPose::new(1, 1, super::grid::Heading::East),
            step_count: 0,
            max_steps,
            view_size,
            modes: Vec::new(),
            n_balls: 0,
            balls_collected: 0,
            door: None,
            finished: false,
        }
    }

    pub fn action_count(&self) -> usize {
        self.kind.action_count()
    }

    pub fn get(&self, x: usize, y: usize) -> CellKind {
        if x < self.width && y < self.height {
            self.cells[y * self.width + x]
        } else {
            CellKind::Wall
        }
    }

    pub fn set(&mut self, x: usize, y: usize, kind: CellKind) {
        self.cells[y * self.width + x] = kind;
    }

    pub fn count(&self, kind: CellKind) -> usize {
        self.cells.iter().filter(|&&c| c == kind).count()
    }

    pub fn balls_remaining(&self) -> usize {
        self.count(CellKind::Ball)
    }

    pub fn ahead_cell(&self) -> CellKind {
        match self.pose.ahead() {
            Some((x, y)) => self.get(x, y),
            None => CellKind::Wall,
        }
    }

    /// Success reward for reaching the goal at the current step count.
    pub fn success_reward(&self) -> f64 {
        1.0 - 0.9 * (self.step_count as f64 / self.max_steps as f64)
    }

    fn nearest_mode(&self, x: usize, y: usize) -> usize {
        let d = |&(mx, my): &(usize, usize)| {
            let dx = mx as f64 - x as f64;
            let dy = my as f64 - y as f64;
            dx * dx + dy * dy
        };
        let mut best = 0;
        for (i, m) in self.modes.iter().enumerate() {
            if d(m) < d(&self.modes[best]) {
                best = i;
            }
        }
        best
    }

    pub fn step(&mut self, action: usize) -> Result<EnvOutcome> {
        if self.finished {
            return Err(Error::EpisodeFinished);
        }
        let count = self.action_count();
        let act = Action::from_id(action)
            .filter(|_| action < count)
            .ok_or(Error::InvalidAction { action, count })?;
        self.step_count += 1;
        let mut reward = 0.0;
        let mut terminated = false;
        let mut event = None;
        let ahead = self.pose.ahead();
        let ahead_kind = self.ahead_cell();
        match act {
            Action::Left => self.pose.heading = self.pose.heading.left(),
            Action::Right => self.pose.heading = self.pose.heading.right(),
            Action::Forward => {
                if ahead_kind.can_enter() {
                    let (x, y) = ahead.expect("enterable cell exists");
                    self.pose.x = x;
                    self.pose.y = y;
                    match ahead_kind {
                        CellKind::Goal => {
                            terminated = true;
                            reward = self.success_reward();
                            event = Some(StepEvent::ReachedGoal);
                        }
                        CellKind::Lava => {
                            terminated = true;
                            event = Some(StepEvent::EnteredLava);
                        }
                        _ => {}
                    }
                }
            }
            Action::Pickup => match ahead_kind {
                CellKind::Ball => {
                    let (x, y) = ahead.expect("ball cell exists");
                    self.set(x, y, CellKind::Empty);
                    self.balls_collected += 1;
                    reward = 1.0;
                    event = Some(StepEvent::PickedBall {
                        x,
                        y,
                        nearest_mode: self.nearest_mode(x, y),
                    });
                    if self.balls_remaining() == 0 {
                        terminated = true;
                    }
                }
                CellKind::Key if self.pose.carrying.is_none() => {
                    let (x, y) = ahead.expect("key cell exists");
                    self.set(x, y, CellKind::Empty);
                    self.pose.carrying = Some(Item::Key);
                    event = Some(StepEvent::PickedKey);
                }
                _ => {}
            },
            Action::Toggle => {
                if ahead_kind == CellKind::DoorLocked && self.pose.carrying == Some(Item::Key) {
                    let (x, y) = ahead.expect("door cell exists");
                    self.set(x, y, CellKind::DoorOpen);
                    event = Some(StepEvent::OpenedDoor);
                }
            }
        }
        let truncated = !terminated && self.step_count >= self.max_steps;
        self.finished = terminated || truncated;
        Ok(EnvOutcome {
            obs: self.observe(),
            reward,
            terminated,
            truncated,
            event,
        })
    }

    pub fn observe(&self) -> Observation {
        egocentric_view(self, self.view_size)
    }

    /// One glyph per cell, agent drawn as an arrow, rows separated by `\n`.
    pub fn render(&self) -> String {
        let mut out = String::with_capacity((self.width + 1) * self.height);
        for y in 0..self.height {
            for x in 0..self.width {
                if (x, y) == (self.pose.x, self.pose.y) {
                    out.push(match self.pose.heading {
                        super::grid::Heading::East => '>',
                        super::grid::Heading::South => 'v',
                        super::grid::Heading::West => '<',
                        super::grid::Heading::North => '^',
                    });
                } else {
                    out.push(self.get(x, y).glyph());
                }
            }
            out.push('\n');
        }
        out
    }
}

/// Crop of `view x view` cells ahead of and beside the agent, rotated so the
/// agent faces up. Cells outside the grid read as wall. The agent's own cell
/// shows the carried item, if any.
pub fn egocentric_view(state: &GridState, view: usize) -> Observation {
    let mut data = vec![0u8; view * view * 3];
    let (fx, fy) = state.pose.heading.delta();
    let (rx, ry) = (-fy, fx);
    let half = (view / 2) as i64;
    for row in 0..view {
        let forward = (view - 1 - row) as i64;
        for col in 0..view {
            let lateral = col as i64 - half;
            let wx = state.pose.x as i64 + forward * fx + lateral * rx;
            let wy = state.pose.y as i64 + forward * fy + lateral * ry;
            let kind = if wx < 0 || wy < 0 {
                CellKind::Wall
            } else {
                state.get(wx as usize, wy as usize)
            };
            let code = if forward == 0 && lateral == 0 {
                match state.pose.carrying {
                    Some(Item::Key) => CellKind::Key.encode(),
                    None => kind.encode(),
                }
            } else {
                kind.encode()
            };
            let i = (row * view + col) * 3;
            data[i..i + 3].copy_from_slice(&code);
        }
    }
    Observation { view, data }
}
