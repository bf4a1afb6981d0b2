use gsea_core::{Error, Result};

/// A `(row, col)` grid position.
pub type Cell = (usize, usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Direction {
    North,
    South,
    East,
    West,
}

impl Direction {
    pub const ALL: [Direction; 4] = [Direction::North, Direction::South, Direction::East, Direction::West];

    pub fn from_action(action: usize) -> Option<Self> {
        Self::ALL.get(action).copied()
    }

    pub fn action(self) -> usize {
        self as usize
    }

    /// Neighbour of `cell` inside a `rows x cols` grid, if any.
    pub fn apply(self, (r, c): Cell, rows: usize, cols: usize) -> Option<Cell> {
        let (r, c) = match self {
            Direction::North => (r.checked_sub(1)?, c),
            Direction::South => (r + 1, c),
            Direction::East => (r, c + 1),
            Direction::West => (r, c.checked_sub(1)?),
        };
        (r < rows && c < cols).then_some((r, c))
    }

    pub fn opposite(self) -> Self {
        match self {
            Direction::North => Direction::South,
            Direction::South => Direction::North,
            Direction::East => Direction::West,
            Direction::West => Direction::East,
        }
    }
}

/// Splits map text into equal-width rows of chars, ignoring blank lines
/// and surrounding whitespace.
pub(crate) fn map_rows(text: &str) -> Result<Vec<Vec<char>>> {
    let rows: Vec<Vec<char>> = text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .map(|l| l.chars().collect())
        .collect();
    let width = rows.first().map(Vec::len).ok_or_else(|| Error::Parse("empty map".into()))?;
    if let Some(i) = rows.iter().position(|r| r.len() != width) {
        return Err(Error::Parse(format!("map row {} has {} cells, expected {width}", i + 1, rows[i].len())));
    }
    Ok(rows)
}

/// Cells reachable from `start` through cells where `open` holds.
pub(crate) fn reachable(rows: usize, cols: usize, start: Cell, open: impl Fn(Cell) -> bool) -> Vec<bool> {
    let mut seen = vec![false; rows * cols];
    let mut queue = std::collections::VecDeque::from([start]);
    seen[start.0 * cols + start.1] = true;
    while let Some(cell) = queue.pop_front() {
        for d in Direction::ALL {
            if let Some(n) = d.apply(cell, rows, cols) {
                let i = n.0 * cols + n.1;
                if !seen[i] && open(n) {
                    seen[i] = true;
                    queue.push_back(n);
                }
            }
        }
    }
    seen
}
