use std::collections::{BTreeMap, BTreeSet};

use gsea_core::BugEvent;

/// Bug detections over one evaluation, which may span many episodes.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Census {
    triggers: BTreeMap<usize, usize>,
    distinct: BTreeSet<BugEvent>,
    episode: BTreeSet<BugEvent>,
    per_episode_distinct: BTreeMap<usize, usize>,
}

impl Census {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn record(&mut self, event: BugEvent) {
        *self.triggers.entry(event.kind).or_default() += 1;
        self.distinct.insert(event);
        if self.episode.insert(event) {
            *self.per_episode_distinct.entry(event.kind).or_default() += 1;
        }
    }

    pub fn record_all(&mut self, events: &[BugEvent]) {
        for &e in events {
            self.record(e);
        }
    }

    pub fn end_episode(&mut self) {
        self.episode.clear();
    }

    /// Every trigger of bugs of `kind`.
    pub fn total(&self, kind: usize) -> usize {
        self.triggers.get(&kind).copied().unwrap_or(0)
    }

    /// Bugs of `kind` triggered at least once in the evaluation.
    pub fn distinct(&self, kind: usize) -> usize {
        self.distinct.iter().filter(|e| e.kind == kind).count()
    }

    /// Sum over episodes of the distinct bugs of `kind` found in each.
    pub fn per_episode_distinct(&self, kind: usize) -> usize {
        self.per_episode_distinct.get(&kind).copied().unwrap_or(0)
    }

    pub fn distinct_total(&self) -> usize {
        self.distinct.len()
    }
}
