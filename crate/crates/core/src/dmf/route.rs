//! Time-expanded A* over pad positions with a reservation table.

use std::cmp::Reverse;
use std::collections::{BinaryHeap, HashSet};

use serde::{Deserialize, Serialize};

/// Anchor pad of a droplet: its leftmost pad.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Pos {
    pub col: i32,
    pub row: i32,
}

impl Pos {
    pub const fn new(col: i32, row: i32) -> Self {
        Self { col, row }
    }

    fn manhattan(self, other: Pos) -> i32 {
        (self.col - other.col).abs() + (self.row - other.row).abs()
    }
}

/// Chebyshev distance between two horizontal strips.
pub fn strip_distance(a: Pos, a_pads: u32, b: Pos, b_pads: u32) -> i32 {
    let a_right = a.col + a_pads as i32 - 1;
    let b_right = b.col + b_pads as i32 - 1;
    let dx = (b.col - a_right).max(a.col - b_right).max(0);
    dx.max((a.row - b.row).abs())
}

pub(crate) fn clear(a: Pos, a_pads: u32, b: Pos, b_pads: u32) -> bool {
    strip_distance(a, a_pads, b, b_pads) >= 2
}

/// A committed trajectory; the last position holds forever.
#[derive(Debug, Clone)]
pub(crate) struct Reservation {
    pub pads: u32,
    pub path: Vec<Pos>,
}

impl Reservation {
    pub fn at(&self, t: usize) -> Pos {
        self.path[t.min(self.path.len() - 1)]
    }
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct Agent {
    pub pads: u32,
    pub start: Pos,
    pub goal: Pos,
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct Grid {
    pub width: i32,
    pub height: i32,
}

impl Grid {
    pub fn fits(&self, p: Pos, pads: u32) -> bool {
        p.col >= 0 && p.row >= 0 && p.row < self.height && p.col + pads as i32 <= self.width
    }
}

const MAX_EXPANSIONS: usize = 400_000;

/// Earliest-arrival path from `start` to `goal`, avoiding every
/// reservation at every tick and staying at `goal` safely afterwards.
pub(crate) fn astar(grid: Grid, agent: Agent, reservations: &[Reservation], budget: usize) -> Option<Vec<Pos>> {
    let free = |p: Pos, t: usize| reservations.iter().all(|r| clear(p, agent.pads, r.at(t), r.pads));
    if !grid.fits(agent.goal, agent.pads) || !grid.fits(agent.start, agent.pads) {
        return None;
    }
    let horizon = reservations.iter().map(|r| r.path.len()).max().unwrap_or(1);
    if !free(agent.goal, horizon) {
        return None;
    }
    let settle = (0..horizon).rev().find(|&t| !free(agent.goal, t)).map_or(0, |t| t + 1);

    struct Node {
        pos: Pos,
        t: usize,
        parent: usize,
    }
    let mut nodes = vec![Node { pos: agent.start, t: 0, parent: usize::MAX }];
    let mut open = BinaryHeap::new();
    let mut closed: HashSet<(Pos, usize)> = HashSet::new();
    open.push(Reverse((agent.start.manhattan(agent.goal) as usize, Reverse(0usize), 0usize)));
    let mut expansions = 0;
    while let Some(Reverse((_, _, idx))) = open.pop() {
        let (pos, t) = (nodes[idx].pos, nodes[idx].t);
        if !closed.insert((pos, t.min(horizon))) {
            continue;
        }
        if pos == agent.goal && t >= settle {
            let mut path = Vec::new();
            let mut i = idx;
            while i != usize::MAX {
                path.push(nodes[i].pos);
                i = nodes[i].parent;
            }
            path.reverse();
            return Some(path);
        }
        expansions += 1;
        if expansions > MAX_EXPANSIONS || t >= budget {
            if expansions > MAX_EXPANSIONS {
                return None;
            }
            continue;
        }
        for (dc, dr) in [(0, 0), (1, 0), (-1, 0), (0, 1), (0, -1)] {
            let next = Pos::new(pos.col + dc, pos.row + dr);
            if !grid.fits(next, agent.pads) || !free(next, t + 1) || closed.contains(&(next, (t + 1).min(horizon))) {
                continue;
            }
            nodes.push(Node { pos: next, t: t + 1, parent: idx });
            let f = t + 1 + next.manhattan(agent.goal) as usize;
            open.push(Reverse((f, Reverse(t + 1), nodes.len() - 1)));
        }
    }
    None
}

/// Plans agents one after another; each avoids the static obstacles and
/// every path committed before it. Returns the failing agent's index on
/// failure.
pub(crate) fn plan_prioritized(
    grid: Grid,
    agents: &[Agent],
    statics: &[Reservation],
    budget: usize,
) -> Result<Vec<Vec<Pos>>, usize> {
    let mut reservations = statics.to_vec();
    let mut paths = Vec::with_capacity(agents.len());
    for (i, a) in agents.iter().enumerate() {
        let path = astar(grid, *a, &reservations, budget).ok_or(i)?;
        reservations.push(Reservation { pads: a.pads, path: path.clone() });
        paths.push(path);
    }
    Ok(paths)
}
