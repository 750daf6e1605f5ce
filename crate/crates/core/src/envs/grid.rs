use std::collections::VecDeque;

use super::{check_action, step_after_done, EnvId, Environment, StepResult};
use crate::error::Result;
use crate::nnkit::Rng;

pub const STEP_REWARD: f64 = -0.01;
pub const DOOR_BONUS: f64 = 0.1;
pub const GOAL_REWARD: f64 = 1.0;
pub const MAX_STEPS: usize = 400;

const CROSSING_SIZE: usize = 9;
const CROSSING_LINES: usize = 3;
const FOUR_ROOMS_SIZE: usize = 13;

/// Observation channels, in order.
pub const CHANNELS: usize = 4;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GridKind {
    Crossing,
    FourRooms,
}

/// N, S, E, W as `(dx, dy)` with `y` growing downwards.
const MOVES: [(isize, isize); 4] = [(0, -1), (0, 1), (1, 0), (-1, 0)];

/// Walled grid navigation with a fixed start and goal cell.
///
/// Crossing layouts are drawn once per instance from the seed (or on every reset
/// when `resample_on_reset` is set); FourRooms always uses the classic 13x13 map.
#[derive(Clone, Debug)]
pub struct GridWorld {
    kind: GridKind,
    width: usize,
    height: usize,
    walls: Vec<bool>,
    doors: Vec<(usize, usize)>,
    start: (usize, usize),
    goal: (usize, usize),
    agent: (usize, usize),
    visited_doors: Vec<bool>,
    steps: usize,
    done: bool,
    rng: Rng,
    resample_on_reset: bool,
}

impl GridWorld {
    pub fn crossing(seed: u64) -> Self {
        let mut rng = Rng::new(seed);
        let walls = crossing_layout(&mut rng);
        GridWorld {
            kind: GridKind::Crossing,
            width: CROSSING_SIZE,
            height: CROSSING_SIZE,
            walls,
            doors: Vec::new(),
            start: (1, 1),
            goal: (CROSSING_SIZE - 2, CROSSING_SIZE - 2),
            agent: (1, 1),
            visited_doors: Vec::new(),
            steps: 0,
            done: true,
            rng,
            resample_on_reset: false,
        }
    }

    /// Crossing variant that draws a fresh layout at every reset.
    pub fn crossing_resampled(seed: u64) -> Self {
        GridWorld {
            resample_on_reset: true,
            ..Self::crossing(seed)
        }
    }

    pub fn four_rooms(seed: u64) -> Self {
        let n = FOUR_ROOMS_SIZE;
        let mut walls = vec![false; n * n];
        let mid = n / 2;
        for i in 0..n {
            for (x, y) in [(i, 0), (i, n - 1), (0, i), (n - 1, i), (mid, i), (i, mid)] {
                walls[y * n + x] = true;
            }
        }
        let doors = vec![(mid, 3), (mid, 9), (3, mid), (9, mid)];
        for &(x, y) in &doors {
            walls[y * n + x] = false;
        }
        GridWorld {
            kind: GridKind::FourRooms,
            width: n,
            height: n,
            walls,
            visited_doors: vec![false; doors.len()],
            doors,
            start: (1, 1),
            goal: (n - 2, n - 2),
            agent: (1, 1),
            steps: 0,
            done: true,
            rng: Rng::new(seed),
            resample_on_reset: false,
        }
    }

    pub fn kind(&self) -> GridKind {
        self.kind
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn is_wall(&self, x: usize, y: usize) -> bool {
        self.walls[y * self.width + x]
    }

    pub fn walls(&self) -> &[bool] {
        &self.walls
    }

    pub fn doors(&self) -> &[(usize, usize)] {
        &self.doors
    }

    pub fn agent(&self) -> (usize, usize) {
        self.agent
    }

    pub fn goal(&self) -> (usize, usize) {
        self.goal
    }

    pub fn start(&self) -> (usize, usize) {
        self.start
    }

    /// Places the agent on an open cell (test helper for reward checks).
    pub fn place_agent(&mut self, cell: (usize, usize)) {
        assert!(!self.is_wall(cell.0, cell.1), "agent placed on a wall");
        self.agent = cell;
    }

    /// Fewest moves from start to goal, or `None` when unreachable.
    pub fn shortest_path_len(&self) -> Option<usize> {
        bfs_distance(&self.walls, self.width, self.start, self.goal)
    }

    /// Four one-hot channels (wall, agent, goal, door), each `height x width`
    /// row-major, concatenated channel by channel.
    pub fn observation(&self) -> Vec<f64> {
        grid_observation(self)
    }

    /// Room index for FourRooms (doorways get 4); quadrant for Crossing.
    pub fn label_of(&self, (x, y): (usize, usize)) -> u8 {
        let (cx, cy) = (self.width / 2, self.height / 2);
        match self.kind {
            GridKind::FourRooms if x == cx || y == cy => 4,
            _ => u8::from(x > cx) + 2 * u8::from(y > cy),
        }
    }
}

pub fn grid_observation(grid: &GridWorld) -> Vec<f64> {
    let cells = grid.width * grid.height;
    let mut obs = vec![0.0; CHANNELS * cells];
    for (i, &w) in grid.walls.iter().enumerate() {
        if w {
            obs[i] = 1.0;
        }
    }
    let idx = |(x, y): (usize, usize)| y * grid.width + x;
    obs[cells + idx(grid.agent)] = 1.0;
    obs[2 * cells + idx(grid.goal)] = 1.0;
    for &d in &grid.doors {
        obs[3 * cells + idx(d)] = 1.0;
    }
    obs
}

fn crossing_layout(rng: &mut Rng) -> Vec<bool> {
    let n = CROSSING_SIZE;
    let inner = 1..n - 1;
    loop {
        let mut walls = vec![false; n * n];
        for i in 0..n {
            for (x, y) in [(i, 0), (i, n - 1), (0, i), (n - 1, i)] {
                walls[y * n + x] = true;
            }
        }
        // distinct (orientation, position) lines strictly between start and goal rows/columns
        let mut lines: Vec<(usize, usize)> = Vec::with_capacity(CROSSING_LINES);
        while lines.len() < CROSSING_LINES {
            let line = (rng.below(2), 2 + rng.below(n - 4));
            if !lines.contains(&line) {
                lines.push(line);
            }
        }
        for &(orientation, pos) in &lines {
            let gap = 1 + rng.below(n - 2);
            for i in inner.clone().filter(|&i| i != gap) {
                let (x, y) = if orientation == 0 { (i, pos) } else { (pos, i) };
                walls[y * n + x] = true;
            }
        }
        if bfs_distance(&walls, n, (1, 1), (n - 2, n - 2)).is_some() {
            return walls;
        }
    }
}

fn bfs_distance(walls: &[bool], width: usize, from: (usize, usize), to: (usize, usize)) -> Option<usize> {
    let height = walls.len() / width;
    let idx = |(x, y): (usize, usize)| y * width + x;
    if walls[idx(from)] || walls[idx(to)] {
        return None;
    }
    let mut dist = vec![usize::MAX; walls.len()];
    let mut queue = VecDeque::from([from]);
    dist[idx(from)] = 0;
    while let Some(cell) = queue.pop_front() {
        if cell == to {
            return Some(dist[idx(cell)]);
        }
        for (dx, dy) in MOVES {
            let (Some(x), Some(y)) = (cell.0.checked_add_signed(dx), cell.1.checked_add_signed(dy)) else {
                continue;
            };
            if x < width && y < height && !walls[idx((x, y))] && dist[idx((x, y))] == usize::MAX {
                dist[idx((x, y))] = dist[idx(cell)] + 1;
                queue.push_back((x, y));
            }
        }
    }
    None
}

impl Environment for GridWorld {
    fn id(&self) -> EnvId {
        match self.kind {
            GridKind::Crossing => EnvId::Crossing,
            GridKind::FourRooms => EnvId::FourRooms,
        }
    }

    fn obs_dim(&self) -> usize {
        CHANNELS * self.width * self.height
    }

    fn action_count(&self) -> usize {
        4
    }

    fn max_steps(&self) -> usize {
        MAX_STEPS
    }

    fn reset(&mut self) -> Vec<f64> {
        if self.resample_on_reset {
            self.walls = crossing_layout(&mut self.rng);
        }
        self.agent = self.start;
        self.visited_doors.iter_mut().for_each(|v| *v = false);
        self.steps = 0;
        self.done = false;
        self.observation()
    }

    fn step(&mut self, action: usize) -> Result<StepResult> {
        if self.done {
            return Err(step_after_done());
        }
        check_action(action, 4)?;
        let (dx, dy) = MOVES[action];
        // the outer wall ring keeps every neighbour in bounds
        let next = (
            self.agent.0.wrapping_add_signed(dx),
            self.agent.1.wrapping_add_signed(dy),
        );
        if !self.is_wall(next.0, next.1) {
            self.agent = next;
        }
        self.steps += 1;
        let reward = if self.agent == self.goal {
            self.done = true;
            GOAL_REWARD
        } else {
            let mut r = STEP_REWARD;
            if let Some(d) = self.doors.iter().position(|&d| d == self.agent) {
                if !self.visited_doors[d] {
                    self.visited_doors[d] = true;
                    r += DOOR_BONUS;
                }
            }
            self.done = self.steps >= MAX_STEPS;
            r
        };
        Ok(StepResult {
            observation: self.observation(),
            reward,
            done: self.done,
            steps_elapsed: self.steps,
        })
    }

    fn label(&self) -> Option<u8> {
        Some(self.label_of(self.agent))
    }
}
