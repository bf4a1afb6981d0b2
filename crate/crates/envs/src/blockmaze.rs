//! Blockmaze: reach the goal coin in a walled grid while hidden bugs wait
//! to be found. Type-1 bugs sit on reachable free cells and are recorded on
//! entry; Type-2 bugs sit on blocks and end the episode when the agent
//! tries to move into them.

use std::collections::HashSet;

use gsea_core::rng::stream;
use gsea_core::{BugEvent, Environment, Error, Observation, Result, StepOutcome};
use rand::seq::SliceRandom;
use rand::Rng as _;

use crate::grid::{map_rows, reachable, Cell, Direction};

pub const FREE: f64 = 0.0;
pub const BLOCK: f64 = 1.0;
pub const GOAL: f64 = 2.0;
pub const AGENT: f64 = 3.0;

/// Observation codes, for one-hot encoders.
pub const CODES: [i64; 4] = [0, 1, 2, 3];

const DEFAULT_MAP: &str = "
S...#.......#.......
.##.#.####..#.####..
.#..#....#..#....#..
.#.###.#.#.###.#.#.#
.#.....#.#.....#....
.#####.#.#####.####.
.....#.#.....#......
####.#.#####.#.####.
.....#.....#.#....#.
.#######.#.#.####.#.
.........#.#......#.
.#.#######.########.
.#.#.......#........
.#.#.#####.#.######.
.#...#...#.#.#....#.
.#####.#.#.#.#.##.#.
.......#.#...#..#.#.
.#######.#####.##.#.
.#.......#.........#
...#####...#######.G
";

const SUB_MAP: &str = "
S...#.....
.##.#.###.
.#..#...#.
.#.####.#.
.#......#.
.######.#.
......#.#.
.####.#.#.
.#....#...
...##.##.G
";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MazeCell {
    Free,
    Block,
    Goal,
}

/// Walls, start and goal, without bugs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MazeLayout {
    pub rows: usize,
    pub cols: usize,
    cells: Vec<MazeCell>,
    pub start: Cell,
    pub goal: Cell,
}

impl MazeLayout {
    pub fn new(rows: usize, cols: usize, cells: Vec<MazeCell>, start: Cell) -> Result<Self> {
        if cells.len() != rows * cols || rows == 0 || cols == 0 {
            return Err(Error::Shape(format!("{} cells for a {rows}x{cols} maze", cells.len())));
        }
        let goals: Vec<usize> = (0..cells.len()).filter(|&i| cells[i] == MazeCell::Goal).collect();
        let [g] = goals[..] else {
            return Err(Error::Config(format!("maze needs exactly one goal, found {}", goals.len())));
        };
        let layout = Self { rows, cols, cells, start, goal: (g / cols, g % cols) };
        if start.0 >= rows || start.1 >= cols || layout.cell(start) != MazeCell::Free {
            return Err(Error::Config("start must be a free cell".into()));
        }
        if !layout.reachable_from_start()[g] {
            return Err(Error::Config("goal is not reachable from the start".into()));
        }
        Ok(layout)
    }

    /// The 20x20 default map.
    pub fn standard() -> Self {
        MazeSpec::parse(DEFAULT_MAP).expect("shipped map is valid").layout
    }

    /// A 10x10 sub-maze for quick experiments.
    pub fn small() -> Self {
        MazeSpec::parse(SUB_MAP).expect("shipped map is valid").layout
    }

    /// Random blocks at roughly `density`, start top-left and goal
    /// bottom-right, redrawn until the goal is reachable.
    pub fn generate(rows: usize, cols: usize, density: f64, seed: u64) -> Result<Self> {
        if rows * cols < 2 || !(0.0..1.0).contains(&density) {
            return Err(Error::Config(format!("cannot generate a {rows}x{cols} maze at density {density}")));
        }
        for attempt in 0..1000 {
            let mut rng = stream(seed, attempt);
            let mut cells: Vec<MazeCell> = (0..rows * cols)
                .map(|_| if rng.gen::<f64>() < density { MazeCell::Block } else { MazeCell::Free })
                .collect();
            cells[0] = MazeCell::Free;
            cells[rows * cols - 1] = MazeCell::Goal;
            if let Ok(layout) = Self::new(rows, cols, cells, (0, 0)) {
                return Ok(layout);
            }
        }
        Err(Error::Config(format!("no solvable {rows}x{cols} maze at density {density}")))
    }

    pub fn cell(&self, (r, c): Cell) -> MazeCell {
        self.cells[r * self.cols + c]
    }

    pub fn is_block(&self, cell: Cell) -> bool {
        self.cell(cell) == MazeCell::Block
    }

    /// Row-major flags of cells the agent can reach.
    pub fn reachable_from_start(&self) -> Vec<bool> {
        reachable(self.rows, self.cols, self.start, |c| !self.is_block(c))
    }

    /// Shortest number of moves from start to goal.
    pub fn shortest_path(&self) -> usize {
        let mut dist = vec![usize::MAX; self.rows * self.cols];
        let mut queue = std::collections::VecDeque::from([self.start]);
        dist[self.start.0 * self.cols + self.start.1] = 0;
        while let Some(cell) = queue.pop_front() {
            let d = dist[cell.0 * self.cols + cell.1];
            for dir in Direction::ALL {
                if let Some(n) = dir.apply(cell, self.rows, self.cols) {
                    let i = n.0 * self.cols + n.1;
                    if !self.is_block(n) && dist[i] == usize::MAX {
                        dist[i] = d + 1;
                        queue.push_back(n);
                    }
                }
            }
        }
        dist[self.goal.0 * self.cols + self.goal.1]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BugKind {
    /// Type 1: on a reachable free cell.
    Exploratory = 1,
    /// Type 2: on a block; touching it ends the episode.
    InvalidLocation = 2,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Bug {
    pub id: usize,
    pub cell: Cell,
    pub kind: BugKind,
}

/// How many bugs of each kind to inject.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BugCounts {
    pub exploratory: usize,
    pub invalid: usize,
}

impl BugCounts {
    /// 25 bugs in total.
    pub const STANDARD: BugCounts = BugCounts { exploratory: 13, invalid: 12 };
    pub const SMALL: BugCounts = BugCounts { exploratory: 3, invalid: 3 };

    pub fn total(&self) -> usize {
        self.exploratory + self.invalid
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MazeSpec {
    pub layout: MazeLayout,
    /// Sorted row-major; ids are positions in this list.
    pub bugs: Vec<Bug>,
    /// Injection seed, when the bugs came from `inject_bugs`.
    pub seed: Option<u64>,
}

impl MazeSpec {
    /// The default 20x20 map with 25 bugs placed by `seed`.
    pub fn standard(seed: u64) -> Self {
        inject_bugs(&MazeLayout::standard(), BugCounts::STANDARD, seed).expect("default map has room")
    }

    /// The 10x10 sub-maze with a handful of bugs.
    pub fn small(seed: u64) -> Self {
        inject_bugs(&MazeLayout::small(), BugCounts::SMALL, seed).expect("sub-maze has room")
    }

    /// Parses the text map format: `.` free, `#` block, `G` goal, `S` start,
    /// `1` Type-1 bug on a free cell, `2` Type-2 bug on a block.
    pub fn parse(text: &str) -> Result<Self> {
        let grid = map_rows(text)?;
        let (rows, cols) = (grid.len(), grid[0].len());
        let mut cells = Vec::with_capacity(rows * cols);
        let mut start = None;
        let mut bugs = Vec::new();
        for (r, line) in grid.iter().enumerate() {
            for (c, &ch) in line.iter().enumerate() {
                let cell = match ch {
                    '.' => MazeCell::Free,
                    '#' => MazeCell::Block,
                    'G' => MazeCell::Goal,
                    'S' => {
                        if start.replace((r, c)).is_some() {
                            return Err(Error::Parse("more than one start".into()));
                        }
                        MazeCell::Free
                    }
                    '1' | '2' => {
                        let kind = if ch == '1' { BugKind::Exploratory } else { BugKind::InvalidLocation };
                        bugs.push(Bug { id: bugs.len(), cell: (r, c), kind });
                        if ch == '1' {
                            MazeCell::Free
                        } else {
                            MazeCell::Block
                        }
                    }
                    other => return Err(Error::Parse(format!("unknown maze glyph {other:?} at {r},{c}"))),
                };
                cells.push(cell);
            }
        }
        let start = start.ok_or_else(|| Error::Parse("map has no start".into()))?;
        let spec = Self { layout: MazeLayout::new(rows, cols, cells, start)?, bugs, seed: None };
        spec.validate()?;
        Ok(spec)
    }

    pub fn to_text(&self) -> String {
        let l = &self.layout;
        let mut glyphs: Vec<char> = l
            .cells
            .iter()
            .map(|c| match c {
                MazeCell::Free => '.',
                MazeCell::Block => '#',
                MazeCell::Goal => 'G',
            })
            .collect();
        glyphs[l.start.0 * l.cols + l.start.1] = 'S';
        for b in &self.bugs {
            glyphs[b.cell.0 * l.cols + b.cell.1] = match b.kind {
                BugKind::Exploratory => '1',
                BugKind::InvalidLocation => '2',
            };
        }
        let mut out = String::with_capacity(l.rows * (l.cols + 1));
        for row in glyphs.chunks(l.cols) {
            out.extend(row);
            out.push('\n');
        }
        out
    }

    /// Type-1 bugs on reachable free cells, Type-2 on blocks, none on the
    /// start or goal, one bug per cell.
    pub fn validate(&self) -> Result<()> {
        let l = &self.layout;
        let reach = l.reachable_from_start();
        let mut seen = HashSet::new();
        for (i, b) in self.bugs.iter().enumerate() {
            if b.id != i {
                return Err(Error::Config("bug ids must follow list order".into()));
            }
            if !seen.insert(b.cell) || b.cell == l.start || b.cell == l.goal {
                return Err(Error::Config(format!("bug {} shares a cell", b.id)));
            }
            let ok = match b.kind {
                BugKind::Exploratory => reach[b.cell.0 * l.cols + b.cell.1] && !l.is_block(b.cell),
                BugKind::InvalidLocation => l.is_block(b.cell),
            };
            if !ok {
                return Err(Error::Config(format!("bug {} is on the wrong kind of cell", b.id)));
            }
        }
        Ok(())
    }

    pub fn bug_at(&self, cell: Cell) -> Option<&Bug> {
        self.bugs.iter().find(|b| b.cell == cell)
    }

    pub fn count(&self, kind: BugKind) -> usize {
        self.bugs.iter().filter(|b| b.kind == kind).count()
    }
}

/// Places bugs uniformly at random among the valid candidate cells.
pub fn inject_bugs(layout: &MazeLayout, counts: BugCounts, seed: u64) -> Result<MazeSpec> {
    let reach = layout.reachable_from_start();
    let mut free = Vec::new();
    let mut blocks = Vec::new();
    for r in 0..layout.rows {
        for c in 0..layout.cols {
            let cell = (r, c);
            if cell == layout.start || cell == layout.goal {
                continue;
            }
            match layout.cell(cell) {
                MazeCell::Block => blocks.push(cell),
                MazeCell::Free if reach[r * layout.cols + c] => free.push(cell),
                _ => {}
            }
        }
    }
    if free.len() < counts.exploratory || blocks.len() < counts.invalid {
        return Err(Error::Config(format!(
            "maze has {} free and {} block candidates for {} + {} bugs",
            free.len(),
            blocks.len(),
            counts.exploratory,
            counts.invalid
        )));
    }
    let mut rng = stream(seed, 0xB065);
    free.shuffle(&mut rng);
    blocks.shuffle(&mut rng);
    let mut placed: Vec<(Cell, BugKind)> = free[..counts.exploratory]
        .iter()
        .map(|&c| (c, BugKind::Exploratory))
        .chain(blocks[..counts.invalid].iter().map(|&c| (c, BugKind::InvalidLocation)))
        .collect();
    placed.sort();
    let bugs = placed.into_iter().enumerate().map(|(id, (cell, kind))| Bug { id, cell, kind }).collect();
    Ok(MazeSpec { layout: layout.clone(), bugs, seed: Some(seed) })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MazeRules {
    pub step_penalty: f64,
    pub goal_reward: f64,
    pub step_cap: u32,
    /// Report a Type-1 bug on every entry rather than once per episode.
    pub retrigger_exploratory: bool,
}

impl Default for MazeRules {
    fn default() -> Self {
        Self { step_penalty: -1.0, goal_reward: 100.0, step_cap: 400, retrigger_exploratory: false }
    }
}

#[derive(Debug, Clone)]
pub struct Blockmaze {
    spec: MazeSpec,
    rules: MazeRules,
    agent: Cell,
    steps: u32,
    found: HashSet<usize>,
    done: bool,
}

impl Blockmaze {
    pub fn new(spec: MazeSpec, rules: MazeRules) -> Result<Self> {
        spec.validate()?;
        if rules.step_cap == 0 {
            return Err(Error::Config("step cap must be positive".into()));
        }
        let agent = spec.layout.start;
        Ok(Self { spec, rules, agent, steps: 0, found: HashSet::new(), done: false })
    }

    pub fn spec(&self) -> &MazeSpec {
        &self.spec
    }

    pub fn rules(&self) -> &MazeRules {
        &self.rules
    }

    pub fn agent(&self) -> Cell {
        self.agent
    }

    pub fn steps_taken(&self) -> u32 {
        self.steps
    }
}

impl Environment for Blockmaze {
    fn action_count(&self) -> usize {
        4
    }

    fn observation_shape(&self) -> (usize, usize) {
        (self.spec.layout.rows, self.spec.layout.cols)
    }

    fn reset(&mut self, _seed: u64) -> Observation {
        self.agent = self.spec.layout.start;
        self.steps = 0;
        self.found.clear();
        self.done = false;
        self.observe()
    }

    fn step(&mut self, action: usize) -> Result<StepOutcome> {
        if self.done {
            return Err(Error::State("blockmaze episode is over; reset first".into()));
        }
        let dir = Direction::from_action(action).ok_or(Error::Index { index: action, len: 4 })?;
        let layout = &self.spec.layout;
        self.steps += 1;
        let mut reward = self.rules.step_penalty;
        let mut events = Vec::new();
        match dir.apply(self.agent, layout.rows, layout.cols) {
            None => {}
            Some(target) if layout.is_block(target) => {
                if let Some(bug) = self.spec.bug_at(target) {
                    events.push(BugEvent { id: bug.id, kind: bug.kind as usize });
                    self.done = true;
                }
            }
            Some(target) => {
                self.agent = target;
                if target == layout.goal {
                    reward = self.rules.goal_reward;
                    self.done = true;
                } else if let Some(bug) = self.spec.bug_at(target) {
                    if self.found.insert(bug.id) || self.rules.retrigger_exploratory {
                        events.push(BugEvent { id: bug.id, kind: bug.kind as usize });
                    }
                }
            }
        }
        if self.steps >= self.rules.step_cap {
            self.done = true;
        }
        Ok(StepOutcome { observation: self.observe(), reward, done: self.done, events })
    }

    fn observe(&self) -> Observation {
        let l = &self.spec.layout;
        let mut data: Vec<f64> = l
            .cells
            .iter()
            .map(|c| match c {
                MazeCell::Free => FREE,
                MazeCell::Block => BLOCK,
                MazeCell::Goal => GOAL,
            })
            .collect();
        data[self.agent.0 * l.cols + self.agent.1] = AGENT;
        Observation::new(l.rows, l.cols, data).expect("sized by layout")
    }

    fn is_done(&self) -> bool {
        self.done
    }
}
