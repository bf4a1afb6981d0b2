use gsea_core::learners::{epsilon_greedy, policy_dist};
use gsea_core::nn::Model;
use gsea_core::rng::Rng;
use gsea_core::seq::{sample_action, ReturnQuantizer, TokenSequence};
use gsea_core::{Encoding, Observation, Real, Result, Scalar, SequenceModel, Tensor};

/// How an actor picks actions from a parameter snapshot.
///
/// `act` returns the action and its log-probability under the behavior
/// policy. Stateful behaviors (sequence policies) track the episode via
/// `begin_episode` and `observe`.
pub trait Behavior: Clone + Send + Sync {
    fn begin_episode(&mut self) {}

    fn act(&mut self, obs: &Observation, mask: Option<&[bool]>, rng: &mut Rng) -> Result<(usize, f64)>;

    fn observe(&mut self, _action: usize, _reward: f64) -> Result<()> {
        Ok(())
    }

    /// Switches to newer parameters, keeping any per-episode state.
    fn adopt(&mut self, newer: &Self) {
        *self = newer.clone();
    }
}

/// Samples from the softmax policy, or takes its argmax when `greedy`.
#[derive(Debug, Clone)]
pub struct Stochastic<M> {
    pub model: M,
    pub encoding: Encoding,
    pub greedy: bool,
}

impl<M: Model<Real>> Stochastic<M> {
    pub fn new(model: M, encoding: Encoding) -> Self {
        Self { model, encoding, greedy: false }
    }
}

impl<M: Model<Real>> Behavior for Stochastic<M> {
    fn act(&mut self, obs: &Observation, mask: Option<&[bool]>, rng: &mut Rng) -> Result<(usize, f64)> {
        let dist = policy_dist(&self.model, &self.encoding, obs, mask)?;
        if self.greedy {
            return Ok((dist.argmax(), 0.0));
        }
        let action = dist.sample(rng);
        Ok((action, dist.log_prob(action)?.as_f64().min(0.0)))
    }
}

/// Epsilon-greedy over a Q-network.
#[derive(Debug, Clone)]
pub struct EpsilonGreedy<M> {
    pub model: M,
    pub encoding: Encoding,
    pub epsilon: f64,
}

impl<M: Model<Real>> Behavior for EpsilonGreedy<M> {
    fn act(&mut self, obs: &Observation, mask: Option<&[bool]>, rng: &mut Rng) -> Result<(usize, f64)> {
        let x = Tensor::row_vector(self.encoding.encode(obs));
        let q = self.model.predict(&x)?;
        epsilon_greedy(q.data(), mask, self.epsilon, rng)
    }
}

/// Sequence policy conditioned on a target return that shrinks by the
/// rewards collected so far.
#[derive(Debug, Clone)]
pub struct ReturnConditioned {
    pub model: SequenceModel,
    pub quantizer: ReturnQuantizer,
    pub target_return: f64,
    pub temperature: f64,
    remaining: f64,
    context: TokenSequence,
}

impl ReturnConditioned {
    pub fn new(model: SequenceModel, quantizer: ReturnQuantizer, target_return: f64, temperature: f64) -> Self {
        let context = model.empty_sequence();
        Self {
            model,
            quantizer,
            target_return,
            temperature,
            remaining: target_return,
            context,
        }
    }

    pub fn context(&self) -> &TokenSequence {
        &self.context
    }
}

impl Behavior for ReturnConditioned {
    fn begin_episode(&mut self) {
        self.remaining = self.target_return;
        self.context = self.model.empty_sequence();
    }

    fn act(&mut self, obs: &Observation, mask: Option<&[bool]>, rng: &mut Rng) -> Result<(usize, f64)> {
        let step = self.model.step_tokens(obs, self.quantizer.quantize(self.remaining))?;
        self.context.push(step)?;
        let (action, dist) = sample_action(&self.model, &self.context, self.temperature, mask, rng)?;
        Ok((action, dist.log_prob(action)?.as_f64().min(0.0)))
    }

    fn observe(&mut self, action: usize, reward: f64) -> Result<()> {
        self.remaining -= reward;
        self.context.complete_last(action, reward)
    }

    fn adopt(&mut self, newer: &Self) {
        self.model = newer.model.clone();
        self.quantizer = newer.quantizer;
        self.target_return = newer.target_return;
        self.temperature = newer.temperature;
    }
}
