//! Job-shop scheduling as sequential dispatch. Each action picks a job; its
//! next operation is appended at `max(job ready, machine free)`. The reward
//! is the drop in the job-chain makespan lower bound, so an episode's
//! return telescopes to `H(s0) - Cmax`.

use std::collections::HashSet;
use std::sync::Arc;

use gsea_core::rng::{derive_seed, seeded};
use gsea_core::{Environment, Error, Observation, Result, StepOutcome};
use rand::seq::SliceRandom;
use rand::Rng as _;

/// Largest instance `brute_force_optimal` will take.
pub const MAX_BRUTE_FORCE_OPS: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Operation {
    pub machine: usize,
    pub time: i64,
}

/// Jobs each visiting every machine once in their own order.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct JsspInstance {
    jobs: usize,
    machines: usize,
    ops: Vec<Vec<Operation>>,
}

impl JsspInstance {
    pub fn new(machines: usize, ops: Vec<Vec<Operation>>) -> Result<Self> {
        if ops.is_empty() || machines == 0 {
            return Err(Error::Config("instance needs at least one job and machine".into()));
        }
        for (j, job) in ops.iter().enumerate() {
            if job.len() != machines {
                return Err(Error::Config(format!("job {j} has {} operations for {machines} machines", job.len())));
            }
            let mut seen = vec![false; machines];
            for op in job {
                if op.machine >= machines || std::mem::replace(&mut seen[op.machine], true) {
                    return Err(Error::Config(format!("job {j} must visit each machine exactly once")));
                }
                if op.time < 1 {
                    return Err(Error::Config(format!("job {j} has a non-positive processing time")));
                }
            }
        }
        Ok(Self { jobs: ops.len(), machines, ops })
    }

    /// Times uniform in `[low, high]`, each job's route a uniform
    /// permutation of the machines.
    pub fn generate(jobs: usize, machines: usize, low: i64, high: i64, seed: u64) -> Result<Self> {
        if jobs == 0 || machines == 0 || low < 1 || low > high {
            return Err(Error::Config(format!(
                "cannot generate {jobs}x{machines} with times in [{low}, {high}]"
            )));
        }
        let mut rng = seeded(seed);
        let ops = (0..jobs)
            .map(|_| {
                let mut route: Vec<usize> = (0..machines).collect();
                route.shuffle(&mut rng);
                route.into_iter().map(|machine| Operation { machine, time: rng.gen_range(low..=high) }).collect()
            })
            .collect();
        Self::new(machines, ops)
    }

    /// `J M` on the first line, then one line per job of `machine time`
    /// pairs.
    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty());
        let header = lines.next().ok_or_else(|| Error::Parse("empty instance".into()))?;
        let nums = |line: &str| -> Result<Vec<i64>> {
            line.split_whitespace()
                .map(|t| t.parse::<i64>().map_err(|e| Error::Parse(format!("{t:?}: {e}"))))
                .collect()
        };
        let head = nums(header)?;
        let [jobs, machines] = head[..] else {
            return Err(Error::Parse("header must be `jobs machines`".into()));
        };
        if jobs < 1 || machines < 1 {
            return Err(Error::Parse("header sizes must be positive".into()));
        }
        let mut ops = Vec::with_capacity(jobs as usize);
        for j in 0..jobs {
            let line = lines.next().ok_or_else(|| Error::Parse(format!("missing line for job {j}")))?;
            let vals = nums(line)?;
            if vals.len() != 2 * machines as usize {
                return Err(Error::Parse(format!("job {j} needs {machines} machine/time pairs")));
            }
            ops.push(
                vals.chunks(2)
                    .map(|p| {
                        let machine = usize::try_from(p[0]).map_err(|_| Error::Parse("negative machine id".into()))?;
                        Ok(Operation { machine, time: p[1] })
                    })
                    .collect::<Result<Vec<_>>>()?,
            );
        }
        if lines.next().is_some() {
            return Err(Error::Parse("trailing lines after the last job".into()));
        }
        Self::new(machines as usize, ops)
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("{} {}\n", self.jobs, self.machines);
        for job in &self.ops {
            let pairs: Vec<String> = job.iter().map(|o| format!("{} {}", o.machine, o.time)).collect();
            out.push_str(&pairs.join(" "));
            out.push('\n');
        }
        out
    }

    pub fn jobs(&self) -> usize {
        self.jobs
    }

    pub fn machines(&self) -> usize {
        self.machines
    }

    pub fn op_count(&self) -> usize {
        self.jobs * self.machines
    }

    pub fn job(&self, j: usize) -> &[Operation] {
        &self.ops[j]
    }

    /// Longest job: the lower bound of an empty schedule.
    pub fn longest_job(&self) -> i64 {
        self.ops.iter().map(|j| j.iter().map(|o| o.time).sum()).max().unwrap_or(0)
    }
}

/// A complete schedule.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScheduleResult {
    /// `starts[job][op]`.
    pub starts: Vec<Vec<i64>>,
    pub makespan: i64,
    /// Jobs in dispatch order.
    pub order: Vec<usize>,
}

impl ScheduleResult {
    /// Checks precedence, machine exclusivity and the makespan against the
    /// start times alone.
    pub fn verify(&self, inst: &JsspInstance) -> Result<()> {
        let mut by_machine: Vec<Vec<(i64, i64)>> = vec![Vec::new(); inst.machines];
        let mut cmax = 0;
        for (j, job) in inst.ops.iter().enumerate() {
            for (k, op) in job.iter().enumerate() {
                let st = self.starts[j][k];
                if k > 0 && st < self.starts[j][k - 1] + job[k - 1].time {
                    return Err(Error::Contract(format!("job {j} op {k} starts before its predecessor ends")));
                }
                by_machine[op.machine].push((st, st + op.time));
                cmax = cmax.max(st + op.time);
            }
        }
        for slots in &mut by_machine {
            slots.sort_unstable();
            if slots.windows(2).any(|w| w[1].0 < w[0].1) {
                return Err(Error::Contract("two operations overlap on a machine".into()));
            }
        }
        if cmax != self.makespan {
            return Err(Error::Contract(format!("makespan {} but operations end at {cmax}", self.makespan)));
        }
        Ok(())
    }
}

/// Partial schedule under append dispatch.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct JsspState {
    instance: Arc<JsspInstance>,
    next: Vec<usize>,
    job_ready: Vec<i64>,
    machine_ready: Vec<i64>,
    starts: Vec<Vec<Option<i64>>>,
    /// Operations in processing order per machine: the oriented
    /// disjunctive arcs.
    machine_sequence: Vec<Vec<(usize, usize)>>,
    order: Vec<usize>,
}

impl JsspState {
    pub fn new(instance: Arc<JsspInstance>) -> Self {
        let (j, m) = (instance.jobs, instance.machines);
        Self {
            next: vec![0; j],
            job_ready: vec![0; j],
            machine_ready: vec![0; m],
            starts: vec![vec![None; m]; j],
            machine_sequence: vec![Vec::new(); m],
            order: Vec::new(),
            instance,
        }
    }

    pub fn instance(&self) -> &JsspInstance {
        &self.instance
    }

    pub fn is_complete(&self) -> bool {
        self.order.len() == self.instance.op_count()
    }

    pub fn eligible(&self) -> Vec<bool> {
        self.next.iter().map(|&n| n < self.instance.machines).collect()
    }

    pub fn start(&self, job: usize, op: usize) -> Option<i64> {
        self.starts[job][op]
    }

    pub fn machine_sequence(&self, machine: usize) -> &[(usize, usize)] {
        &self.machine_sequence[machine]
    }

    /// Index of `job`'s next unscheduled operation.
    pub fn next_op(&self, job: usize) -> usize {
        self.next[job]
    }

    pub fn job_ready(&self, job: usize) -> i64 {
        self.job_ready[job]
    }

    /// Schedules `job`'s next operation and returns the reward
    /// `H(before) - H(after)`.
    pub fn dispatch(&mut self, job: usize) -> Result<i64> {
        if job >= self.instance.jobs {
            return Err(Error::Index { index: job, len: self.instance.jobs });
        }
        let k = self.next[job];
        if k >= self.instance.machines {
            return Err(Error::MaskedAction(job));
        }
        let before = self.lower_bound();
        let op = self.instance.ops[job][k];
        let start = self.job_ready[job].max(self.machine_ready[op.machine]);
        let end = start + op.time;
        self.starts[job][k] = Some(start);
        self.job_ready[job] = end;
        self.machine_ready[op.machine] = end;
        self.machine_sequence[op.machine].push((job, k));
        self.next[job] += 1;
        self.order.push(job);
        Ok(before - self.lower_bound())
    }

    /// Completion lower bound of every operation: actual end if scheduled,
    /// otherwise the job-chain sum from the job's last scheduled end.
    pub fn completion_bounds(&self) -> Vec<Vec<i64>> {
        self.instance
            .ops
            .iter()
            .enumerate()
            .map(|(j, job)| {
                let mut t = 0;
                job.iter()
                    .enumerate()
                    .map(|(k, op)| {
                        t = match self.starts[j][k] {
                            Some(st) => st + op.time,
                            None => t + op.time,
                        };
                        t
                    })
                    .collect()
            })
            .collect()
    }

    /// `H(s)`: the largest completion lower bound.
    pub fn lower_bound(&self) -> i64 {
        (0..self.instance.jobs)
            .map(|j| {
                let rest: i64 = self.instance.ops[j][self.next[j]..].iter().map(|o| o.time).sum();
                self.job_ready[j] + rest
            })
            .max()
            .unwrap_or(0)
    }

    /// Job-chain bound tightened by per-machine remaining load.
    fn combined_bound(&self) -> i64 {
        let mut load = self.machine_ready.clone();
        for (j, job) in self.instance.ops.iter().enumerate() {
            for op in &job[self.next[j]..] {
                load[op.machine] += op.time;
            }
        }
        load.into_iter().max().unwrap_or(0).max(self.lower_bound())
    }

    pub fn makespan(&self) -> i64 {
        self.job_ready.iter().copied().max().unwrap_or(0)
    }

    pub fn result(&self) -> Result<ScheduleResult> {
        if !self.is_complete() {
            return Err(Error::State("schedule is not complete".into()));
        }
        Ok(ScheduleResult {
            starts: self.starts.iter().map(|j| j.iter().map(|s| s.expect("complete")).collect()).collect(),
            makespan: self.makespan(),
            order: self.order.clone(),
        })
    }
}

/// Runs `policy` (returning a job) until the schedule is complete.
pub fn run_dispatch(instance: &JsspInstance, mut policy: impl FnMut(&JsspState) -> usize) -> Result<ScheduleResult> {
    let mut state = JsspState::new(Arc::new(instance.clone()));
    while !state.is_complete() {
        let job = policy(&state);
        state.dispatch(job)?;
    }
    state.result()
}

/// Exact minimum makespan over all dispatch orders, by depth-first search
/// with bound pruning and memoized states.
pub fn brute_force_optimal(instance: &JsspInstance) -> Result<ScheduleResult> {
    if instance.op_count() > MAX_BRUTE_FORCE_OPS {
        return Err(Error::Config(format!(
            "{} operations exceed the exhaustive-search limit of {MAX_BRUTE_FORCE_OPS}",
            instance.op_count()
        )));
    }
    fn search(state: &mut JsspState, best: &mut Option<ScheduleResult>, seen: &mut HashSet<(Vec<usize>, Vec<i64>, Vec<i64>)>) {
        if state.is_complete() {
            if best.as_ref().is_none_or(|b| state.makespan() < b.makespan) {
                *best = state.result().ok();
            }
            return;
        }
        if best.as_ref().is_some_and(|b| state.combined_bound() >= b.makespan) {
            return;
        }
        if !seen.insert((state.next.clone(), state.job_ready.clone(), state.machine_ready.clone())) {
            return;
        }
        for job in 0..state.instance.jobs {
            if state.next[job] < state.instance.machines {
                let mut child = state.clone();
                child.dispatch(job).expect("eligible job");
                search(&mut child, best, seen);
            }
        }
    }
    let mut best = None;
    search(&mut JsspState::new(Arc::new(instance.clone())), &mut best, &mut HashSet::new());
    best.ok_or_else(|| Error::State("search found no schedule".into()))
}

/// Classic priority dispatching rules.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Pdr {
    /// Shortest processing time of the next operation.
    Spt,
    /// Longest processing time of the next operation.
    Lpt,
    /// Most work remaining in the job.
    Mwr,
    /// Job that became ready earliest.
    Fifo,
}

impl Pdr {
    pub const ALL: [Pdr; 4] = [Pdr::Spt, Pdr::Lpt, Pdr::Mwr, Pdr::Fifo];

    pub fn priority(self, state: &JsspState, job: usize) -> i64 {
        let ops = state.instance.job(job);
        let k = state.next[job];
        match self {
            Pdr::Spt => -ops[k].time,
            Pdr::Lpt => ops[k].time,
            Pdr::Mwr => ops[k..].iter().map(|o| o.time).sum(),
            Pdr::Fifo => -state.job_ready[job],
        }
    }

    /// Highest-priority eligible job; ties go to the lowest job id.
    pub fn choose(self, state: &JsspState) -> usize {
        let mut best: Option<(i64, usize)> = None;
        for (job, ok) in state.eligible().into_iter().enumerate() {
            if ok {
                let p = self.priority(state, job);
                if best.is_none_or(|(bp, _)| p > bp) {
                    best = Some((p, job));
                }
            }
        }
        best.expect("called on an incomplete schedule").1
    }
}

pub fn classic_pdr(instance: &JsspInstance, rule: Pdr) -> ScheduleResult {
    run_dispatch(instance, |s| rule.choose(s)).expect("rules only pick eligible jobs")
}

/// Where episodes get their instance.
#[derive(Debug, Clone, PartialEq)]
pub enum InstanceSource {
    Fixed(Arc<JsspInstance>),
    /// A fresh instance per reset, seeded by `(seed, reset seed)`.
    Generated { jobs: usize, machines: usize, low: i64, high: i64, seed: u64 },
}

impl InstanceSource {
    pub fn size(&self) -> (usize, usize) {
        match self {
            InstanceSource::Fixed(i) => (i.jobs, i.machines),
            InstanceSource::Generated { jobs, machines, .. } => (*jobs, *machines),
        }
    }

    pub fn instance(&self, reset_seed: u64) -> Result<Arc<JsspInstance>> {
        match self {
            InstanceSource::Fixed(i) => Ok(i.clone()),
            &InstanceSource::Generated { jobs, machines, low, high, seed } => {
                JsspInstance::generate(jobs, machines, low, high, derive_seed(seed, reset_seed)).map(Arc::new)
            }
        }
    }
}

/// Dispatch environment. Observation rows are operations in (job, op)
/// order with columns `[C_LB / H(s0), scheduled]`.
#[derive(Debug, Clone)]
pub struct JsspEnv {
    source: InstanceSource,
    state: JsspState,
    initial_bound: i64,
}

impl JsspEnv {
    pub fn new(source: InstanceSource) -> Result<Self> {
        let instance = source.instance(0)?;
        let initial_bound = instance.longest_job();
        Ok(Self { state: JsspState::new(instance), source, initial_bound })
    }

    pub fn state(&self) -> &JsspState {
        &self.state
    }

    pub fn initial_bound(&self) -> i64 {
        self.initial_bound
    }
}

impl Environment for JsspEnv {
    fn action_count(&self) -> usize {
        self.source.size().0
    }

    fn observation_shape(&self) -> (usize, usize) {
        let (j, m) = self.source.size();
        (j * m, 2)
    }

    fn reset(&mut self, seed: u64) -> Observation {
        let instance = self.source.instance(seed).expect("source parameters validated at construction");
        self.initial_bound = instance.longest_job();
        self.state = JsspState::new(instance);
        self.observe()
    }

    fn step(&mut self, action: usize) -> Result<StepOutcome> {
        if self.state.is_complete() {
            return Err(Error::State("schedule is complete; reset first".into()));
        }
        let reward = self.state.dispatch(action)?;
        Ok(StepOutcome {
            observation: self.observe(),
            reward: reward as f64,
            done: self.state.is_complete(),
            events: Vec::new(),
        })
    }

    fn observe(&self) -> Observation {
        let scale = self.initial_bound.max(1) as f64;
        let bounds = self.state.completion_bounds();
        let mut data = Vec::with_capacity(self.state.instance.op_count() * 2);
        for (j, row) in bounds.iter().enumerate() {
            for (k, &lb) in row.iter().enumerate() {
                data.push(lb as f64 / scale);
                data.push(if self.state.starts[j][k].is_some() { 1.0 } else { 0.0 });
            }
        }
        Observation::new(self.state.instance.op_count(), 2, data).expect("sized by instance")
    }

    fn is_done(&self) -> bool {
        self.state.is_complete()
    }

    fn action_mask(&self) -> Option<Vec<bool>> {
        Some(self.state.eligible())
    }
}
