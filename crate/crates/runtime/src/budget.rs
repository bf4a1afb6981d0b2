use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::time::Instant;

use gsea_core::{Error, Result};
use serde::{Deserialize, Serialize};

/// How much interaction a training run may consume.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "amount", rename_all = "snake_case")]
pub enum Budget {
    Steps(u64),
    Episodes(u64),
    Seconds(f64),
}

impl Budget {
    pub fn validate(&self) -> Result<()> {
        match *self {
            Budget::Seconds(s) if !(s >= 0.0 && s.is_finite()) => {
                Err(Error::Config(format!("seconds budget {s} must be finite and non-negative")))
            }
            _ => Ok(()),
        }
    }

    /// The same kind of budget scaled by `fraction`, rounded down for
    /// counted budgets.
    pub fn scaled(&self, fraction: f64) -> Budget {
        match *self {
            Budget::Steps(n) => Budget::Steps((n as f64 * fraction + 1e-9).floor() as u64),
            Budget::Episodes(n) => Budget::Episodes((n as f64 * fraction + 1e-9).floor() as u64),
            Budget::Seconds(s) => Budget::Seconds(s * fraction),
        }
    }

    pub fn is_zero(&self) -> bool {
        match *self {
            Budget::Steps(n) | Budget::Episodes(n) => n == 0,
            Budget::Seconds(s) => s <= 0.0,
        }
    }
}

/// Source of elapsed training time.
///
/// `Logical` charges a fixed amount per environment step, which makes
/// time budgets reproducible.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ClockKind {
    Wall,
    Logical { seconds_per_step: f64 },
}

/// Shared, thread-safe accounting of a [`Budget`].
#[derive(Debug)]
pub struct BudgetTracker {
    budget: Budget,
    clock: ClockKind,
    start: Instant,
    steps: AtomicU64,
    episodes_started: AtomicU64,
    episodes_done: AtomicU64,
    stopped: AtomicBool,
}

/// A snapshot of what has been consumed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BudgetUsage {
    pub steps: u64,
    pub episodes: u64,
    pub seconds: f64,
}

impl BudgetTracker {
    pub fn new(budget: Budget, clock: ClockKind) -> Result<Self> {
        budget.validate()?;
        if let ClockKind::Logical { seconds_per_step } = clock {
            if !(seconds_per_step > 0.0 && seconds_per_step.is_finite()) {
                return Err(Error::Config("logical clock needs a positive step cost".into()));
            }
        }
        Ok(Self {
            budget,
            clock,
            start: Instant::now(),
            steps: AtomicU64::new(0),
            episodes_started: AtomicU64::new(0),
            episodes_done: AtomicU64::new(0),
            stopped: AtomicBool::new(false),
        })
    }

    pub fn budget(&self) -> Budget {
        self.budget
    }

    /// Restarts the wall clock, e.g. after environments are built.
    pub fn restart_clock(&mut self) {
        self.start = Instant::now();
    }

    pub fn elapsed(&self) -> f64 {
        match self.clock {
            ClockKind::Wall => self.start.elapsed().as_secs_f64(),
            ClockKind::Logical { seconds_per_step } => {
                self.steps.load(Ordering::SeqCst) as f64 * seconds_per_step
            }
        }
    }

    /// Claims one environment step. False once the budget is spent or the
    /// run was stopped.
    pub fn try_acquire_step(&self) -> bool {
        if self.stopped.load(Ordering::SeqCst) {
            return false;
        }
        match self.budget {
            Budget::Steps(limit) => self
                .steps
                .fetch_update(Ordering::SeqCst, Ordering::SeqCst, |s| (s < limit).then_some(s + 1))
                .is_ok(),
            Budget::Episodes(_) => {
                self.steps.fetch_add(1, Ordering::SeqCst);
                true
            }
            Budget::Seconds(limit) => match self.clock {
                ClockKind::Wall => {
                    if self.elapsed() >= limit {
                        return false;
                    }
                    self.steps.fetch_add(1, Ordering::SeqCst);
                    true
                }
                ClockKind::Logical { seconds_per_step } => self
                    .steps
                    .fetch_update(Ordering::SeqCst, Ordering::SeqCst, |s| {
                        (s as f64 * seconds_per_step < limit).then_some(s + 1)
                    })
                    .is_ok(),
            },
        }
    }

    /// Claims the start of a new episode. Episodes already running may
    /// always finish under an episode budget.
    pub fn try_begin_episode(&self) -> bool {
        if self.stopped.load(Ordering::SeqCst) {
            return false;
        }
        match self.budget {
            Budget::Episodes(limit) => self
                .episodes_started
                .fetch_update(Ordering::SeqCst, Ordering::SeqCst, |e| (e < limit).then_some(e + 1))
                .is_ok(),
            _ => {
                if self.exhausted() {
                    return false;
                }
                self.episodes_started.fetch_add(1, Ordering::SeqCst);
                true
            }
        }
    }

    pub fn end_episode(&self) {
        self.episodes_done.fetch_add(1, Ordering::SeqCst);
    }

    /// No further interaction can be claimed.
    pub fn exhausted(&self) -> bool {
        if self.stopped.load(Ordering::SeqCst) {
            return true;
        }
        match self.budget {
            Budget::Steps(limit) => self.steps.load(Ordering::SeqCst) >= limit,
            Budget::Episodes(limit) => self.episodes_started.load(Ordering::SeqCst) >= limit,
            Budget::Seconds(limit) => self.elapsed() >= limit,
        }
    }

    pub fn stop(&self) {
        self.stopped.store(true, Ordering::SeqCst);
    }

    pub fn usage(&self) -> BudgetUsage {
        BudgetUsage {
            steps: self.steps.load(Ordering::SeqCst),
            episodes: self.episodes_done.load(Ordering::SeqCst),
            seconds: self.elapsed(),
        }
    }

    /// Budget left in its own unit.
    pub fn remaining(&self) -> f64 {
        match self.budget {
            Budget::Steps(limit) => limit.saturating_sub(self.steps.load(Ordering::SeqCst)) as f64,
            Budget::Episodes(limit) => {
                limit.saturating_sub(self.episodes_started.load(Ordering::SeqCst)) as f64
            }
            Budget::Seconds(limit) => (limit - self.elapsed()).max(0.0),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn step_budget_stops_at_boundary() {
        let b = BudgetTracker::new(Budget::Steps(3), ClockKind::Wall).unwrap();
        assert!((0..3).all(|_| b.try_acquire_step()));
        assert!(!b.try_acquire_step());
        assert_eq!(b.usage().steps, 3);
        assert!(b.exhausted());
    }

    #[test]
    fn zero_budget_is_exhausted_immediately() {
        for budget in [Budget::Steps(0), Budget::Episodes(0), Budget::Seconds(0.0)] {
            let b = BudgetTracker::new(budget, ClockKind::Logical { seconds_per_step: 1.0 }).unwrap();
            assert!(b.exhausted());
            assert!(!b.try_begin_episode());
            assert!(budget.is_zero());
        }
    }

    #[test]
    fn logical_seconds() {
        let b = BudgetTracker::new(Budget::Seconds(1.0), ClockKind::Logical { seconds_per_step: 0.25 })
            .unwrap();
        let taken = (0..10).filter(|_| b.try_acquire_step()).count();
        assert_eq!(taken, 4);
        assert_eq!(b.elapsed(), 1.0);
    }

    #[test]
    fn scaling() {
        assert_eq!(Budget::Steps(36_000).scaled(0.01), Budget::Steps(360));
        assert_eq!(Budget::Episodes(1000).scaled(0.02), Budget::Episodes(20));
        assert_eq!(Budget::Seconds(43_200.0).scaled(0.01), Budget::Seconds(432.0));
        assert!(Budget::Seconds(-1.0).validate().is_err());
    }
}
