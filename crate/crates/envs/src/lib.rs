//! Task environments: the Blockmaze and Pac-grid bug-hunting games and the
//! job-shop scheduling (JSSP) dispatch environment.

pub mod blockmaze;
mod census;
mod grid;
pub mod jssp;
pub mod pacgrid;

pub use census::Census;
pub use grid::{Cell, Direction};
