//! Fixed decision rules over the egocentric view and pose.

use crate::env::{Action, AgentPose, CellKind, Heading, Observation};

/// `(forward, lateral)` offset of a view cell from the agent; lateral is
/// negative to the left.
fn offset(obs: &Observation, row: usize, col: usize) -> (i64, i64) {
    let (ar, ac) = obs.agent_cell();
    (ar as i64 - row as i64, col as i64 - ac as i64)
}

fn blocked(kind: Option<CellKind>) -> bool {
    !matches!(kind, Some(k) if k.can_enter() && k != CellKind::Lava)
}

/// Nearest visible cell of `kind` by forward + |lateral|, excluding the
/// agent's own cell; ties go to the first cell scanning from the agent's
/// row outward, left to right.
pub fn nearest_visible(obs: &Observation, kind: CellKind) -> Option<(i64, i64)> {
    let (ar, ac) = obs.agent_cell();
    let mut best: Option<(i64, (i64, i64))> = None;
    for row in (0..=ar).rev() {
        for col in 0..obs.view {
            if (row, col) == (ar, ac) || obs.kind_at(row, col) != Some(kind) {
                continue;
            }
            let (f, l) = offset(obs, row, col);
            let d = f + l.abs();
            if best.is_none_or(|(bd, _)| d < bd) {
                best = Some((d, (f, l)));
            }
        }
    }
    best.map(|(_, o)| o)
}

/// Moves toward a target at `(forward, lateral)`: turn toward it once it is
/// more to the side than ahead, otherwise advance. The comparison is
/// rotation-consistent, so the rule never turns back and forth.
pub fn steer(obs: &Observation, (f, l): (i64, i64)) -> Action {
    if f == 1 && l == 0 {
        return Action::Pickup;
    }
    let toward = if l < 0 { Action::Left } else { Action::Right };
    if l.abs() > f || blocked(obs.ahead()) {
        toward
    } else {
        Action::Forward
    }
}

pub fn rule_pickup(obs: &Observation) -> Action {
    if obs.ahead() == Some(CellKind::Ball) {
        return Action::Pickup;
    }
    match nearest_visible(obs, CellKind::Ball) {
        Some(target) => steer(obs, target),
        None if blocked(obs.ahead()) => Action::Right,
        None => Action::Forward,
    }
}

pub fn avoid_lava(obs: &Observation) -> Action {
    if blocked(obs.ahead()) {
        Action::Right
    } else {
        Action::Forward
    }
}

pub fn get_key(obs: &Observation, carrying_key: bool) -> Action {
    if carrying_key {
        return if obs.ahead() == Some(CellKind::DoorLocked) {
            Action::Toggle
        } else {
            Action::Forward
        };
    }
    if obs.ahead() == Some(CellKind::Key) {
        return Action::Pickup;
    }
    match nearest_visible(obs, CellKind::Key) {
        Some(target) => steer(obs, target),
        None if blocked(obs.ahead()) => Action::Left,
        None => Action::Forward,
    }
}

/// Per-episode visit counts over grid cells.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct VisitMemory {
    pub width: usize,
    pub height: usize,
    counts: Vec<u32>,
}

impl VisitMemory {
    pub fn new(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            counts: vec![0; width * height],
        }
    }

    pub fn reset(&mut self, width: usize, height: usize) {
        self.width = width;
        self.height = height;
        self.counts.clear();
        self.counts.resize(width * height, 0);
    }

    pub fn count(&self, x: usize, y: usize) -> u32 {
        if x < self.width && y < self.height {
            self.counts[y * self.width + x]
        } else {
            u32::MAX
        }
    }

    /// Records a visit; returns whether it was the first this episode.
    pub fn visit(&mut self, x: usize, y: usize) -> bool {
        let c = &mut self.counts[y * self.width + x];
        *c += 1;
        *c == 1
    }

    pub fn visited_cells(&self) -> usize {
        self.counts.iter().filter(|&&c| c > 0).count()
    }
}

/// Count-based exploration over the cell ahead and the cells beside the
/// agent. Lava is treated as passable.
pub fn explore(obs: &Observation, pose: &AgentPose, visits: &VisitMemory) -> Action {
    let (ar, ac) = obs.agent_cell();
    let passable = |row: usize, col: usize| obs.kind_at(row, col).is_some_and(CellKind::can_enter);
    let count = |h: Heading| pose.ahead_towards(h).map_or(u32::MAX, |(x, y)| visits.count(x, y));
    let mut best: Option<(u32, Action)> = None;
    let candidates = [
        (passable(ar - 1, ac), pose.heading, Action::Forward),
        (passable(ar, ac - 1), pose.heading.left(), Action::Left),
        (passable(ar, ac + 1), pose.heading.right(), Action::Right),
    ];
    for (ok, heading, action) in candidates {
        if ok {
            let c = count(heading);
            if best.is_none_or(|(bc, _)| c < bc) {
                best = Some((c, action));
            }
        }
    }
    best.map_or(Action::Left, |(_, a)| a)
}

/// Greedy navigation over the mode centres, nearest unvisited first.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct GotoMode {
    reached: Vec<bool>,
}

fn manhattan(a: (usize, usize), b: (usize, usize)) -> usize {
    a.0.abs_diff(b.0) + a.1.abs_diff(b.1)
}

impl GotoMode {
    pub fn reset(&mut self) {
        self.reached.clear();
    }

    /// Index of the current target centre.
    pub fn target(&mut self, centers: &[(usize, usize)], pose: &AgentPose) -> usize {
        if self.reached.len() != centers.len() || self.reached.iter().all(|&r| r) {
            self.reached = vec![false; centers.len()];
        }
        for (i, &c) in centers.iter().enumerate() {
            if c == (pose.x, pose.y) {
                self.reached[i] = true;
            }
        }
        if self.reached.iter().all(|&r| r) {
            self.reached = centers.iter().map(|&c| c == (pose.x, pose.y)).collect();
        }
        let here = (pose.x, pose.y);
        (0..centers.len())
            .filter(|&i| !self.reached[i])
            .min_by_key(|&i| (manhattan(centers[i], here), i))
            .unwrap_or(0)
    }

    pub fn propose(&mut self, centers: &[(usize, usize)], pose: &AgentPose, obs: &Observation) -> Action {
        if centers.is_empty() {
            return Action::Forward;
        }
        let mut i = self.target(centers, pose);
        let ahead_blocked = blocked(obs.ahead());
        if ahead_blocked && pose.ahead() == Some(centers[i]) {
            // The centre itself is occupied; count it as reached.
            self.reached[i] = true;
            i = self.target(centers, pose);
        }
        let (tx, ty) = centers[i];
        let dx = tx as i64 - pose.x as i64;
        let dy = ty as i64 - pose.y as i64;
        let (hx, hy) = pose.heading.delta();
        let closer = (hx != 0 && hx.signum() == dx.signum()) || (hy != 0 && hy.signum() == dy.signum());
        let along_x = hx != 0;
        if closer && !ahead_blocked {
            return Action::Forward;
        }
        // Blocked on the way: turn toward the other axis if it still has a gap.
        let use_x = if closer {
            !along_x && dx != 0
        } else {
            dx.abs() >= dy.abs()
        };
        if closer && (if along_x { dy == 0 } else { dx == 0 }) {
            return Action::Right;
        }
        let desired = if use_x {
            if dx > 0 {
                Heading::East
            } else {
                Heading::West
            }
        } else if dy > 0 {
            Heading::South
        } else {
            Heading::North
        };
        if pose.heading.left() == desired {
            Action::Left
        } else {
            Action::Right
        }
    }
}
