use gsea_core::learners::{epsilon_at, DqnLearner, PpoLearner, VTraceLearner};
use gsea_core::nn::{params_to_string, Model};
use gsea_core::rng::{seeded, Rng};
use gsea_core::{Real, Result, Scalar, Trajectory, Transition};

use crate::behavior::{Behavior, EpsilonGreedy, Stochastic};
use crate::replay::ReplayBuffer;

/// A trainable agent as seen by the actor-learner loop.
pub trait Agent: Send {
    type Behavior: Behavior + 'static;

    /// Behavior used by actors during training.
    fn behavior(&self) -> Self::Behavior;

    /// Behavior used for evaluation.
    fn eval_behavior(&self) -> Self::Behavior {
        self.behavior()
    }

    /// Segments the learner batches into one update.
    fn segments_per_update(&self) -> usize;

    /// Learns from a batch of segments; returns the mean loss.
    fn learn(&mut self, segments: &[Trajectory]) -> Result<f64>;

    /// Parameters as checkpoint text.
    fn checkpoint(&self) -> String;
}

impl<A: Agent> Agent for &mut A {
    type Behavior = A::Behavior;

    fn behavior(&self) -> Self::Behavior {
        (**self).behavior()
    }

    fn eval_behavior(&self) -> Self::Behavior {
        (**self).eval_behavior()
    }

    fn segments_per_update(&self) -> usize {
        (**self).segments_per_update()
    }

    fn learn(&mut self, segments: &[Trajectory]) -> Result<f64> {
        (**self).learn(segments)
    }

    fn checkpoint(&self) -> String {
        (**self).checkpoint()
    }
}

/// Actor-critic with V-trace targets.
pub struct VTraceAgent<P: Model<Real>, V: Model<Real>> {
    pub learner: VTraceLearner<Real, P, V>,
    pub batch: usize,
}

impl<P: Model<Real> + 'static, V: Model<Real>> Agent for VTraceAgent<P, V> {
    type Behavior = Stochastic<P>;

    fn behavior(&self) -> Self::Behavior {
        Stochastic::new(self.learner.policy.clone(), self.learner.encoding.clone())
    }

    fn segments_per_update(&self) -> usize {
        self.batch
    }

    fn learn(&mut self, segments: &[Trajectory]) -> Result<f64> {
        Ok(self.learner.update(segments)?.total.as_f64())
    }

    fn checkpoint(&self) -> String {
        params_to_string(self.learner.policy.params())
    }
}

/// Clipped-surrogate policy optimization.
pub struct PpoAgent<P: Model<Real>, V: Model<Real>> {
    pub learner: PpoLearner<Real, P, V>,
    pub batch: usize,
}

impl<P: Model<Real> + 'static, V: Model<Real>> Agent for PpoAgent<P, V> {
    type Behavior = Stochastic<P>;

    fn behavior(&self) -> Self::Behavior {
        Stochastic::new(self.learner.policy.clone(), self.learner.encoding.clone())
    }

    fn segments_per_update(&self) -> usize {
        self.batch
    }

    fn learn(&mut self, segments: &[Trajectory]) -> Result<f64> {
        Ok(self.learner.update(segments)?.total.as_f64())
    }

    fn checkpoint(&self) -> String {
        params_to_string(self.learner.policy.params())
    }
}

/// Q-learning from a transition replay buffer.
pub struct DqnAgent<M: Model<Real>> {
    pub learner: DqnLearner<Real, M>,
    pub replay: ReplayBuffer<Transition>,
    /// Environment steps per gradient update.
    pub train_every: usize,
    /// Exploration rate of the evaluation behavior.
    pub eval_epsilon: f64,
    steps_seen: u64,
    owed: usize,
    rng: Rng,
}

impl<M: Model<Real>> DqnAgent<M> {
    pub fn new(learner: DqnLearner<Real, M>, replay_capacity: usize, train_every: usize, seed: u64) -> Result<Self> {
        if train_every == 0 {
            return Err(gsea_core::Error::Config("train_every must be positive".into()));
        }
        let eval_epsilon = learner.config.epsilon_end.as_f64();
        Ok(Self {
            learner,
            replay: ReplayBuffer::new(replay_capacity)?,
            train_every,
            eval_epsilon,
            steps_seen: 0,
            owed: 0,
            rng: seeded(seed),
        })
    }

    pub fn steps_seen(&self) -> u64 {
        self.steps_seen
    }
}

impl<M: Model<Real> + 'static> Agent for DqnAgent<M> {
    type Behavior = EpsilonGreedy<M>;

    fn behavior(&self) -> Self::Behavior {
        EpsilonGreedy {
            model: self.learner.online.clone(),
            encoding: self.learner.encoding.clone(),
            epsilon: epsilon_at(self.steps_seen, &self.learner.config).as_f64(),
        }
    }

    fn eval_behavior(&self) -> Self::Behavior {
        EpsilonGreedy {
            epsilon: self.eval_epsilon,
            ..self.behavior()
        }
    }

    fn segments_per_update(&self) -> usize {
        1
    }

    fn learn(&mut self, segments: &[Trajectory]) -> Result<f64> {
        for seg in segments {
            for tr in seg.transitions() {
                self.replay.push(tr.clone());
            }
            self.steps_seen += seg.len() as u64;
            self.owed += seg.len();
        }
        let batch = self.learner.config.batch_size;
        let mut total = 0.0;
        let mut count = 0;
        while self.owed >= self.train_every {
            self.owed -= self.train_every;
            if self.replay.len() < batch {
                continue;
            }
            let sample: Vec<Transition> = self.replay.sample(batch, &mut self.rng)?.into_iter().cloned().collect();
            total += self.learner.update(&sample)?.as_f64();
            count += 1;
        }
        Ok(if count == 0 { 0.0 } else { total / count as f64 })
    }

    fn checkpoint(&self) -> String {
        params_to_string(self.learner.online.params())
    }
}
