use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CellKind {
    Empty,
    Wall,
    Ball,
    Lava,
    Key,
    DoorLocked,
    DoorOpen,
    Goal,
}

// MiniGrid-compatible channel codes.
pub const OBJECT_EMPTY: u8 = 1;
pub const OBJECT_WALL: u8 = 2;
pub const OBJECT_DOOR: u8 = 4;
pub const OBJECT_KEY: u8 = 5;
pub const OBJECT_BALL: u8 = 6;
pub const OBJECT_GOAL: u8 = 8;
pub const OBJECT_LAVA: u8 = 9;
pub const MAX_OBJECT: u8 = 10;
pub const MAX_COLOR: u8 = 5;
pub const DOOR_OPEN: u8 = 0;
pub const DOOR_LOCKED: u8 = 2;
pub const MAX_STATE: u8 = 2;

impl CellKind {
    /// `(object id, color id, state id)`.
    pub fn encode(self) -> [u8; 3] {
        match self {
            CellKind::Empty => [OBJECT_EMPTY, 0, 0],
            CellKind::Wall => [OBJECT_WALL, 5, 0],
            CellKind::Ball => [OBJECT_BALL, 2, 0],
            CellKind::Lava => [OBJECT_LAVA, 0, 0],
            CellKind::Key => [OBJECT_KEY, 4, 0],
            CellKind::DoorLocked => [OBJECT_DOOR, 4, DOOR_LOCKED],
            CellKind::DoorOpen => [OBJECT_DOOR, 4, DOOR_OPEN],
            CellKind::Goal => [OBJECT_GOAL, 1, 0],
        }
    }

    pub fn decode(code: [u8; 3]) -> Option<Self> {
        Some(match code[0] {
            OBJECT_EMPTY => CellKind::Empty,
            OBJECT_WALL => CellKind::Wall,
            OBJECT_BALL => CellKind::Ball,
            OBJECT_LAVA => CellKind::Lava,
            OBJECT_KEY => CellKind::Key,
            OBJECT_DOOR if code[2] == DOOR_OPEN => CellKind::DoorOpen,
            OBJECT_DOOR => CellKind::DoorLocked,
            OBJECT_GOAL => CellKind::Goal,
            _ => return None,
        })
    }

    /// Whether the agent can occupy the cell (lava is enterable but fatal).
    pub fn can_enter(self) -> bool {
        matches!(
            self,
            CellKind::Empty | CellKind::DoorOpen | CellKind::Goal | CellKind::Lava
        )
    }

    pub fn glyph(self) -> char {
        match self {
            CellKind::Empty => '.',
            CellKind::Wall => '#',
            CellKind::Ball => 'o',
            CellKind::Lava => '~',
            CellKind::Key => 'k',
            CellKind::DoorLocked => 'D',
            CellKind::DoorOpen => '/',
            CellKind::Goal => 'G',
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Heading {
    East,
    South,
    West,
    North,
}

impl Heading {
    pub const ALL: [Heading; 4] = [Heading::East, Heading::South, Heading::West, Heading::North];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Self {
        Self::ALL[i % 4]
    }

    pub fn left(self) -> Self {
        Self::from_index(self.index() + 3)
    }

    pub fn right(self) -> Self {
        Self::from_index(self.index() + 1)
    }

    /// Unit step with `y` growing downwards.
    pub fn delta(self) -> (i64, i64) {
        match self {
            Heading::East => (1, 0),
            Heading::South => (0, 1),
            Heading::West => (-1, 0),
            Heading::North => (0, -1),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Item {
    Key,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct AgentPose {
    pub x: usize,
    pub y: usize,
    pub heading: Heading,
    pub carrying: Option<Item>,
}

impl AgentPose {
    pub fn new(x: usize, y: usize, heading: Heading) -> Self {
        Self {
            x,
            y,
            heading,
            carrying: None,
        }
    }

    /// Cell one step along `heading`, if it has non-negative coordinates.
    pub fn ahead_towards(&self, heading: Heading) -> Option<(usize, usize)> {
        let (dx, dy) = heading.delta();
        let nx = self.x as i64 + dx;
        let ny = self.y as i64 + dy;
        (nx >= 0 && ny >= 0).then_some((nx as usize, ny as usize))
    }

    pub fn ahead(&self) -> Option<(usize, usize)> {
        self.ahead_towards(self.heading)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Action {
    Left,
    Right,
    Forward,
    Pickup,
    Toggle,
}

impl Action {
    pub const ALL: [Action; 5] = [
        Action::Left,
        Action::Right,
        Action::Forward,
        Action::Pickup,
        Action::Toggle,
    ];

    pub fn id(self) -> usize {
        self as usize
    }

    pub fn from_id(id: usize) -> Option<Self> {
        Self::ALL.get(id).copied()
    }
}
