//! Pac-grid: eat every dot while avoiding patrolling ghosts. Four gate
//! cells hide bugs; the first entry into a gate within an evaluation earns
//! a bounty.

use std::collections::HashSet;

use gsea_core::rng::{derive_seed, seeded, Rng};
use gsea_core::{BugEvent, Environment, Error, Observation, Result, StepOutcome};
use rand::Rng as _;

use crate::grid::{map_rows, reachable, Cell, Direction};

pub const FREE: f64 = 0.0;
pub const WALL: f64 = 1.0;
pub const DOT: f64 = 2.0;
pub const GATE: f64 = 3.0;
pub const PAC: f64 = 4.0;
pub const GHOST: f64 = 5.0;

pub const CODES: [i64; 6] = [0, 1, 2, 3, 4, 5];

/// Action index of staying put; 0..4 are the compass moves.
pub const NOOP: usize = 4;

const DEFAULT_MAP: &str = "
###################
#Aoooooooo#ooooooB#
#o##o###o#o###o##o#
#ooooooooooooooooo#
#o##o#o#####o#o##o#
#oooo#ooo#ooo#oooo#
####o###.#.###o####
####o#.......#o####
####o#.##.##.#o####
#ooooo.#g.g#.ooooo#
####o#.#####.#o####
####o#.......#o####
####o#.#####.#o####
#oooooooo#oooooooo#
#o##o###o#o###o##o#
#oo#oooooPooooo#oo#
##o#o#o#####o#o#o##
#oooo#ooo#ooo#oooo#
#o######o#o######o#
#Cooooooo.ooooooooD
###################
";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PacCell {
    Wall,
    Free,
    Dot,
    /// Gate of type 1..=4.
    Gate(u8),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PacGridSpec {
    pub rows: usize,
    pub cols: usize,
    cells: Vec<PacCell>,
    pub pac_start: Cell,
    pub ghost_starts: Vec<Cell>,
    pub ghost_policy_seed: u64,
}

impl PacGridSpec {
    /// The 21x19 default layout with two ghosts.
    pub fn standard(ghost_policy_seed: u64) -> Self {
        let mut spec = Self::parse(DEFAULT_MAP).expect("shipped map is valid");
        spec.ghost_policy_seed = ghost_policy_seed;
        spec
    }

    /// Text format: `#` wall, `o` dot, `.` free, `A`-`D` gates 1-4, `P` pac
    /// start, `g` ghost start. Start cells carry no dot.
    pub fn parse(text: &str) -> Result<Self> {
        let grid = map_rows(text)?;
        let (rows, cols) = (grid.len(), grid[0].len());
        let mut cells = Vec::with_capacity(rows * cols);
        let mut pac = None;
        let mut ghosts = Vec::new();
        for (r, line) in grid.iter().enumerate() {
            for (c, &ch) in line.iter().enumerate() {
                cells.push(match ch {
                    '#' => PacCell::Wall,
                    'o' => PacCell::Dot,
                    '.' => PacCell::Free,
                    'A'..='D' => PacCell::Gate(ch as u8 - b'A' + 1),
                    'P' => {
                        if pac.replace((r, c)).is_some() {
                            return Err(Error::Parse("more than one pac start".into()));
                        }
                        PacCell::Free
                    }
                    'g' => {
                        ghosts.push((r, c));
                        PacCell::Free
                    }
                    other => return Err(Error::Parse(format!("unknown pac-grid glyph {other:?} at {r},{c}"))),
                });
            }
        }
        let pac_start = pac.ok_or_else(|| Error::Parse("map has no pac start".into()))?;
        let spec = Self { rows, cols, cells, pac_start, ghost_starts: ghosts, ghost_policy_seed: 0 };
        spec.validate()?;
        Ok(spec)
    }

    pub fn to_text(&self) -> String {
        let mut glyphs: Vec<char> = self
            .cells
            .iter()
            .map(|c| match c {
                PacCell::Wall => '#',
                PacCell::Dot => 'o',
                PacCell::Free => '.',
                PacCell::Gate(k) => (b'A' + k - 1) as char,
            })
            .collect();
        glyphs[self.index(self.pac_start)] = 'P';
        for &g in &self.ghost_starts {
            glyphs[self.index(g)] = 'g';
        }
        let mut out = String::new();
        for row in glyphs.chunks(self.cols) {
            out.extend(row);
            out.push('\n');
        }
        out
    }

    /// One gate of each type, starts on open dotless cells, every open cell
    /// reachable from the pac start.
    pub fn validate(&self) -> Result<()> {
        let mut gates: Vec<u8> = self
            .cells
            .iter()
            .filter_map(|c| match c {
                PacCell::Gate(k) => Some(*k),
                _ => None,
            })
            .collect();
        gates.sort_unstable();
        if gates != [1, 2, 3, 4] {
            return Err(Error::Config(format!("need exactly one gate of each type 1-4, found {gates:?}")));
        }
        for &s in std::iter::once(&self.pac_start).chain(&self.ghost_starts) {
            if self.cell(s) != PacCell::Free {
                return Err(Error::Config(format!("start {s:?} must be a dotless open cell")));
            }
        }
        let reach = reachable(self.rows, self.cols, self.pac_start, |c| self.cell(c) != PacCell::Wall);
        if (0..self.cells.len()).any(|i| self.cells[i] != PacCell::Wall && !reach[i]) {
            return Err(Error::Config("some open cells are unreachable".into()));
        }
        Ok(())
    }

    fn index(&self, (r, c): Cell) -> usize {
        r * self.cols + c
    }

    pub fn cell(&self, cell: Cell) -> PacCell {
        self.cells[self.index(cell)]
    }

    pub fn dot_count(&self) -> usize {
        self.cells.iter().filter(|&&c| c == PacCell::Dot).count()
    }

    pub fn gate_cell(&self, kind: u8) -> Option<Cell> {
        let i = self.cells.iter().position(|&c| c == PacCell::Gate(kind))?;
        Some((i / self.cols, i % self.cols))
    }
}

/// When a gate's bounty re-arms.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GateBounty {
    PerEvaluation,
    PerEpisode,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PacRules {
    pub dot_reward: f64,
    pub gate_reward: f64,
    pub step_cap: u32,
    pub ghosts: bool,
    pub bounty: GateBounty,
    /// Chance a ghost keeps its heading when it can.
    pub ghost_persistence: f64,
}

impl Default for PacRules {
    fn default() -> Self {
        Self {
            dot_reward: 1.0,
            gate_reward: 50.0,
            step_cap: 500,
            ghosts: true,
            bounty: GateBounty::PerEvaluation,
            ghost_persistence: 0.8,
        }
    }
}

#[derive(Debug, Clone)]
pub struct PacGrid {
    spec: PacGridSpec,
    rules: PacRules,
    pac: Cell,
    ghosts: Vec<(Cell, Option<Direction>)>,
    dots: Vec<bool>,
    dots_remaining: usize,
    claimed: HashSet<u8>,
    score: f64,
    steps: u32,
    done: bool,
    rng: Rng,
}

impl PacGrid {
    pub fn new(spec: PacGridSpec, rules: PacRules) -> Result<Self> {
        spec.validate()?;
        if rules.step_cap == 0 || !(0.0..=1.0).contains(&rules.ghost_persistence) {
            return Err(Error::Config("step cap must be positive and persistence a probability".into()));
        }
        let mut env = Self {
            pac: spec.pac_start,
            ghosts: Vec::new(),
            dots: Vec::new(),
            dots_remaining: 0,
            claimed: HashSet::new(),
            score: 0.0,
            steps: 0,
            done: false,
            rng: seeded(0),
            spec,
            rules,
        };
        env.reset(0);
        Ok(env)
    }

    pub fn spec(&self) -> &PacGridSpec {
        &self.spec
    }

    pub fn pac(&self) -> Cell {
        self.pac
    }

    pub fn ghost_cells(&self) -> Vec<Cell> {
        self.ghosts.iter().map(|g| g.0).collect()
    }

    pub fn dots_remaining(&self) -> usize {
        self.dots_remaining
    }

    pub fn has_dot(&self, cell: Cell) -> bool {
        self.dots[self.spec.index(cell)]
    }

    /// Reward collected this episode.
    pub fn score(&self) -> f64 {
        self.score
    }

    /// Starts a new evaluation window: every gate bounty re-arms.
    pub fn new_evaluation(&mut self) {
        self.claimed.clear();
    }

    fn open(&self, cell: Cell) -> bool {
        self.spec.cell(cell) != PacCell::Wall
    }

    fn ghost_move(&mut self, (cell, heading): (Cell, Option<Direction>)) -> (Cell, Option<Direction>) {
        let (rows, cols) = (self.spec.rows, self.spec.cols);
        let exits: Vec<(Direction, Cell)> = Direction::ALL
            .iter()
            .filter_map(|&d| d.apply(cell, rows, cols).filter(|&n| self.open(n)).map(|n| (d, n)))
            .collect();
        if exits.is_empty() {
            return (cell, heading);
        }
        let keep = self.rng.gen::<f64>() < self.rules.ghost_persistence;
        if let Some(&(d, n)) = heading.and_then(|h| exits.iter().find(|e| e.0 == h)).filter(|_| keep) {
            return (n, Some(d));
        }
        let (d, n) = exits[self.rng.gen_range(0..exits.len())];
        (n, Some(d))
    }
}

impl Environment for PacGrid {
    fn action_count(&self) -> usize {
        5
    }

    fn observation_shape(&self) -> (usize, usize) {
        (self.spec.rows, self.spec.cols)
    }

    /// Ghost behaviour is a pure function of the spec's ghost seed and
    /// `seed`.
    fn reset(&mut self, seed: u64) -> Observation {
        self.pac = self.spec.pac_start;
        self.ghosts = if self.rules.ghosts {
            self.spec.ghost_starts.iter().map(|&g| (g, None)).collect()
        } else {
            Vec::new()
        };
        self.dots = self.spec.cells.iter().map(|&c| c == PacCell::Dot).collect();
        self.dots_remaining = self.spec.dot_count();
        if self.rules.bounty == GateBounty::PerEpisode {
            self.claimed.clear();
        }
        self.score = 0.0;
        self.steps = 0;
        self.done = self.dots_remaining == 0;
        self.rng = seeded(derive_seed(self.spec.ghost_policy_seed, seed));
        self.observe()
    }

    fn step(&mut self, action: usize) -> Result<StepOutcome> {
        if self.done {
            return Err(Error::State("pac-grid episode is over; reset first".into()));
        }
        if action > NOOP {
            return Err(Error::Index { index: action, len: 5 });
        }
        self.steps += 1;
        let before = self.pac;
        let target = Direction::from_action(action)
            .and_then(|d| d.apply(before, self.spec.rows, self.spec.cols))
            .filter(|&n| self.open(n))
            .unwrap_or(before);

        let old_ghosts: Vec<Cell> = self.ghost_cells();
        let moved: Vec<_> = self.ghosts.clone().into_iter().map(|g| self.ghost_move(g)).collect();
        self.ghosts = moved;
        self.pac = target;
        let caught = old_ghosts.contains(&target) || self.ghosts.iter().any(|g| g.0 == target);

        let mut reward = 0.0;
        let mut events = Vec::new();
        if caught {
            self.done = true;
        } else {
            let i = self.spec.index(target);
            if self.dots[i] {
                self.dots[i] = false;
                self.dots_remaining -= 1;
                reward += self.rules.dot_reward;
            }
            if let PacCell::Gate(kind) = self.spec.cell(target) {
                if target != before {
                    events.push(BugEvent { id: kind as usize, kind: kind as usize });
                    if self.claimed.insert(kind) {
                        reward += self.rules.gate_reward;
                    }
                }
            }
            if self.dots_remaining == 0 || self.steps >= self.rules.step_cap {
                self.done = true;
            }
        }
        self.score += reward;
        Ok(StepOutcome { observation: self.observe(), reward, done: self.done, events })
    }

    fn observe(&self) -> Observation {
        let mut data: Vec<f64> = self
            .spec
            .cells
            .iter()
            .zip(&self.dots)
            .map(|(c, &dot)| match c {
                PacCell::Wall => WALL,
                PacCell::Gate(_) => GATE,
                _ if dot => DOT,
                _ => FREE,
            })
            .collect();
        data[self.spec.index(self.pac)] = PAC;
        for g in &self.ghosts {
            data[self.spec.index(g.0)] = GHOST;
        }
        Observation::new(self.spec.rows, self.spec.cols, data).expect("sized by spec")
    }

    fn is_done(&self) -> bool {
        self.done
    }
}
