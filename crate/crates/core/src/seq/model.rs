//! Small causal transformer over token sequences. Actions are predicted
//! from the hidden state at each step's return token, which sees the step's
//! patches and return plus everything from earlier steps.

use rand::Rng as _;

use super::tokenize::{PatchGrid, TokenSequence, TokenStep, Vocab};
use crate::error::{Error, Result};
use crate::nn::{Activation, Model, ParamSet, Tape, Tensor, Var};
use crate::rng::Rng;
use crate::scalar::Scalar;
use crate::types::{DiscretePolicyDist, Encoding, Observation};

const LN_EPS: f64 = 1e-5;
const CAUSAL_MASK: f64 = -1e9;

#[derive(Debug, Clone, PartialEq)]
pub struct SeqModelConfig {
    pub grid_rows: usize,
    pub grid_cols: usize,
    pub patches: usize,
    /// Per-cell encoding inside a patch.
    pub cell_encoding: Encoding,
    pub return_bins: usize,
    pub actions: usize,
    /// Context length in timesteps.
    pub context: usize,
    pub width: usize,
    pub heads: usize,
    pub blocks: usize,
    pub ff_width: usize,
    pub activation: Activation,
    /// Start with an all-zero action head (uniform policy).
    pub zero_head: bool,
    /// Return bin fed when the model is used as a plain one-step network.
    /// `None` means the top bin.
    pub conditioning_bin: Option<usize>,
}

impl SeqModelConfig {
    /// Desk-scale defaults: 2 blocks, 4 heads, width 64, 4 timesteps.
    pub fn new(grid_rows: usize, grid_cols: usize, patches: usize, actions: usize) -> Self {
        Self {
            grid_rows,
            grid_cols,
            patches,
            cell_encoding: Encoding::Raw,
            return_bins: 64,
            actions,
            context: 4,
            width: 64,
            heads: 4,
            blocks: 2,
            ff_width: 128,
            activation: Activation::Tanh,
            zero_head: false,
            conditioning_bin: None,
        }
    }

    pub fn validate(&self) -> Result<PatchGrid> {
        let grid = PatchGrid::new(self.grid_rows, self.grid_cols, self.patches)?;
        let positive = [
            ("return_bins", self.return_bins),
            ("actions", self.actions),
            ("context", self.context),
            ("width", self.width),
            ("heads", self.heads),
            ("ff_width", self.ff_width),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(Error::Config(format!("{name} must be positive")));
            }
        }
        if self.width % self.heads != 0 {
            return Err(Error::Config(format!("width {} not divisible by {} heads", self.width, self.heads)));
        }
        if matches!(self.conditioning_bin, Some(b) if b >= self.return_bins) {
            return Err(Error::Config("conditioning bin outside the return vocabulary".into()));
        }
        Ok(grid)
    }
}

// Parameter slots, in `ParamSet` order.
const PATCH_W: usize = 0;
const PATCH_B: usize = 1;
const RETURN_EMB: usize = 2;
const ACTION_EMB: usize = 3;
const REWARD_EMB: usize = 4;
const SLOT_EMB: usize = 5;
const TIME_EMB: usize = 6;
const EMBED_PARAMS: usize = 7;
const BLOCK_PARAMS: usize = 12;

#[derive(Debug, Clone)]
pub struct SequenceModel<S: Scalar> {
    config: SeqModelConfig,
    grid: PatchGrid,
    params: ParamSet<S>,
}

fn uniform<S: Scalar>(rng: &mut Rng, rows: usize, cols: usize, bound: f64) -> Tensor<S> {
    let data = (0..rows * cols).map(|_| S::of(rng.gen_range(-bound..=bound))).collect();
    Tensor::from_vec(rows, cols, data).expect("sized by construction")
}

impl<S: Scalar> SequenceModel<S> {
    pub fn new(config: SeqModelConfig, rng: &mut Rng) -> Result<Self> {
        let grid = config.validate()?;
        let d = config.width;
        let pw = grid.patch_len() * config.cell_encoding.channels();
        let lin = |rng: &mut Rng, i: usize, o: usize| uniform::<S>(rng, i, o, 1.0 / (i as f64).sqrt());
        let emb = |rng: &mut Rng, n: usize| uniform::<S>(rng, n, d, 0.1);
        let mut t = vec![
            lin(rng, pw, d),
            Tensor::zeros(1, d),
            emb(rng, config.return_bins),
            emb(rng, config.actions),
            emb(rng, 3),
            emb(rng, config.patches + 3),
            emb(rng, config.context),
        ];
        for _ in 0..config.blocks {
            t.push(Tensor::filled(1, d, S::one()));
            t.push(Tensor::zeros(1, d));
            for _ in 0..4 {
                t.push(lin(rng, d, d));
            }
            t.push(Tensor::filled(1, d, S::one()));
            t.push(Tensor::zeros(1, d));
            t.push(lin(rng, d, config.ff_width));
            t.push(Tensor::zeros(1, config.ff_width));
            t.push(lin(rng, config.ff_width, d));
            t.push(Tensor::zeros(1, d));
        }
        t.push(Tensor::filled(1, d, S::one()));
        t.push(Tensor::zeros(1, d));
        if config.zero_head {
            t.push(Tensor::zeros(d, config.actions));
        } else {
            t.push(lin(rng, d, config.actions));
        }
        t.push(Tensor::zeros(1, config.actions));
        Ok(Self { config, grid, params: ParamSet::new(t) })
    }

    pub fn from_params(config: SeqModelConfig, params: ParamSet<S>) -> Result<Self> {
        let mut probe = crate::rng::seeded(0);
        let template = Self::new(config, &mut probe)?;
        let same = params.len() == template.params.len()
            && params.tensors.iter().zip(&template.params.tensors).all(|(a, b)| {
                (a.value.rows(), a.value.cols()) == (b.value.rows(), b.value.cols())
            });
        if !same {
            return Err(Error::Shape("parameters do not fit the sequence model config".into()));
        }
        Ok(Self { params, ..template })
    }

    pub fn config(&self) -> &SeqModelConfig {
        &self.config
    }

    pub fn grid(&self) -> &PatchGrid {
        &self.grid
    }

    pub fn vocab(&self) -> Vocab {
        Vocab {
            patches: self.config.patches,
            patch_len: self.grid.patch_len(),
            return_bins: self.config.return_bins,
            actions: self.config.actions,
            context: self.config.context,
        }
    }

    pub fn empty_sequence(&self) -> TokenSequence {
        TokenSequence::new(self.vocab())
    }

    /// Tokens for an observation whose action is not chosen yet.
    pub fn step_tokens(&self, obs: &Observation, return_bin: usize) -> Result<TokenStep> {
        Ok(TokenStep { patches: self.grid.patchify(obs)?, return_bin, action: None, reward: 0 })
    }

    fn conditioning_bin(&self) -> usize {
        self.config.conditioning_bin.unwrap_or(self.config.return_bins - 1)
    }

    /// Action logits at the return token of every step of every sequence,
    /// stacked in order (one row per step).
    pub fn step_logits(&self, tape: &mut Tape<S>, bound: &[Var], seqs: &[&TokenSequence]) -> Result<Var> {
        let vocab = self.vocab();
        for s in seqs {
            if *s.vocab() != vocab {
                return Err(Error::Contract("token sequence built for a different model".into()));
            }
            if s.len() > vocab.context {
                return Err(Error::Contract(format!("context of {} steps exceeds {}", s.len(), vocab.context)));
            }
        }
        let steps: usize = seqs.iter().map(|s| s.len()).sum();
        if steps == 0 {
            return Err(Error::State("no tokens to run".into()));
        }
        let m = vocab.patches;
        let per_step = m + 3;
        let enc = &self.config.cell_encoding;
        let pw = vocab.patch_len * enc.channels();

        let mut patch_x = Vec::with_capacity(steps * m * pw);
        let mut ret_x = vec![S::zero(); steps * vocab.return_bins];
        let mut act_x = vec![S::zero(); steps * vocab.actions];
        let mut rew_x = vec![S::zero(); steps * 3];
        let rows = steps * per_step;
        let mut slot_x = vec![S::zero(); rows * per_step];
        let mut time_x = vec![S::zero(); rows * vocab.context];
        let mut order = Vec::with_capacity(rows);
        let mut g = 0;
        for seq in seqs {
            for (k, st) in seq.steps().iter().enumerate() {
                for p in &st.patches {
                    for &cell in p {
                        enc.encode_cell(cell, &mut patch_x);
                    }
                }
                ret_x[g * vocab.return_bins + st.return_bin] = S::one();
                if let Some(a) = st.action {
                    act_x[g * vocab.actions + a] = S::one();
                }
                rew_x[g * 3 + (st.reward + 1) as usize] = S::one();
                order.extend((0..m).map(|j| g * m + j));
                order.extend([steps * m + g, steps * (m + 1) + g, steps * (m + 2) + g]);
                for slot in 0..per_step {
                    let row = g * per_step + slot;
                    slot_x[row * per_step + slot] = S::one();
                    time_x[row * vocab.context + k] = S::one();
                }
                g += 1;
            }
        }
        let b = bound;
        let patch_in = tape.constant(Tensor::from_vec(steps * m, pw, patch_x)?);
        let pe = tape.matmul(patch_in, b[PATCH_W])?;
        let pe = tape.add_row(pe, b[PATCH_B])?;
        let embed = |x: Vec<S>, cols: usize, table: usize, tape: &mut Tape<S>| -> Result<Var> {
            let c = tape.constant(Tensor::from_vec(x.len() / cols, cols, x)?);
            tape.matmul(c, b[table])
        };
        let re = embed(ret_x, vocab.return_bins, RETURN_EMB, tape)?;
        let ae = embed(act_x, vocab.actions, ACTION_EMB, tape)?;
        let we = embed(rew_x, 3, REWARD_EMB, tape)?;
        let se = embed(slot_x, per_step, SLOT_EMB, tape)?;
        let te = embed(time_x, vocab.context, TIME_EMB, tape)?;
        let stacked = tape.concat_rows(&[pe, re, ae, we])?;
        let mut h = tape.select_rows(stacked, &order)?;
        h = tape.add(h, se)?;
        h = tape.add(h, te)?;

        let lens: Vec<usize> = seqs.iter().filter(|s| !s.is_empty()).map(|s| s.len() * per_step).collect();
        for blk in 0..self.config.blocks {
            let p = &b[EMBED_PARAMS + blk * BLOCK_PARAMS..EMBED_PARAMS + (blk + 1) * BLOCK_PARAMS];
            let a = self.norm(tape, h, p[0], p[1])?;
            let att = self.attention(tape, a, &p[2..6], &lens)?;
            h = tape.add(h, att)?;
            let a = self.norm(tape, h, p[6], p[7])?;
            let f = tape.matmul(a, p[8])?;
            let f = tape.add_row(f, p[9])?;
            let f = self.config.activation.apply(tape, f);
            let f = tape.matmul(f, p[10])?;
            let f = tape.add_row(f, p[11])?;
            h = tape.add(h, f)?;
        }
        let head = EMBED_PARAMS + self.config.blocks * BLOCK_PARAMS;
        let picks: Vec<usize> = (0..steps).map(|s| s * per_step + m).collect();
        let at_return = tape.select_rows(h, &picks)?;
        let normed = self.norm(tape, at_return, b[head], b[head + 1])?;
        let logits = tape.matmul(normed, b[head + 2])?;
        tape.add_row(logits, b[head + 3])
    }

    fn norm(&self, tape: &mut Tape<S>, x: Var, gain: Var, bias: Var) -> Result<Var> {
        let n = tape.layer_norm(x, S::of(LN_EPS));
        let n = tape.mul_row(n, gain)?;
        tape.add_row(n, bias)
    }

    /// Multi-head causal self-attention, run separately per sequence.
    fn attention(&self, tape: &mut Tape<S>, x: Var, w: &[Var], lens: &[usize]) -> Result<Var> {
        let heads = self.config.heads;
        let dh = self.config.width / heads;
        let scale = S::one() / S::of_usize(dh).sqrt();
        let q = tape.matmul(x, w[0])?;
        let k = tape.matmul(x, w[1])?;
        let v = tape.matmul(x, w[2])?;
        let mut outs = Vec::with_capacity(lens.len());
        let mut start = 0;
        for &len in lens {
            let idx: Vec<usize> = (start..start + len).collect();
            start += len;
            let (qs, ks, vs) = (tape.select_rows(q, &idx)?, tape.select_rows(k, &idx)?, tape.select_rows(v, &idx)?);
            let mask = causal_mask::<S>(len);
            let mut per_head = Vec::with_capacity(heads);
            for hd in 0..heads {
                let qh = tape.slice_cols(qs, hd * dh, dh)?;
                let kh = tape.slice_cols(ks, hd * dh, dh)?;
                let vh = tape.slice_cols(vs, hd * dh, dh)?;
                let scores = tape.matmul_nt(qh, kh)?;
                let scores = tape.scale(scores, scale);
                let scores = tape.add_const(scores, &mask)?;
                let weights = tape.softmax(scores);
                per_head.push(tape.matmul(weights, vh)?);
            }
            outs.push(tape.concat_cols(&per_head)?);
        }
        let joined = tape.concat_rows(&outs)?;
        tape.matmul(joined, w[3])
    }

    /// Policy at the latest step of `context`, with masked actions at zero.
    pub fn action_dist(&self, context: &TokenSequence, mask: Option<&[bool]>) -> Result<DiscretePolicyDist<S>> {
        let mut tape = Tape::new();
        let bound = self.params.bind_frozen(&mut tape);
        let logits = self.step_logits(&mut tape, &bound, &[context])?;
        let all = tape.value(logits);
        DiscretePolicyDist::from_logits(all.row(all.rows() - 1), mask)
    }
}

fn causal_mask<S: Scalar>(n: usize) -> Tensor<S> {
    let mut t = Tensor::zeros(n, n);
    for r in 0..n {
        for c in r + 1..n {
            t.set(r, c, S::of(CAUSAL_MASK));
        }
    }
    t
}

impl<S: Scalar> Model<S> for SequenceModel<S> {
    fn params(&self) -> &ParamSet<S> {
        &self.params
    }

    fn params_mut(&mut self) -> &mut ParamSet<S> {
        &mut self.params
    }

    fn input_width(&self) -> usize {
        self.config.grid_rows * self.config.grid_cols
    }

    fn output_width(&self) -> usize {
        self.config.actions
    }

    /// Treats each input row as a one-step context conditioned on the
    /// configured return bin.
    fn forward(&self, tape: &mut Tape<S>, bound: &[Var], x: Var) -> Result<Var> {
        let input = tape.value(x);
        if input.cols() != self.input_width() {
            return Err(Error::Shape(format!(
                "sequence model takes {} cells, got {}",
                self.input_width(),
                input.cols()
            )));
        }
        let bin = self.conditioning_bin();
        let mut seqs = Vec::with_capacity(input.rows());
        for r in 0..input.rows() {
            let cells = input.row(r).iter().map(|v| v.as_f64()).collect();
            let obs = Observation::new(self.config.grid_rows, self.config.grid_cols, cells)?;
            let mut seq = self.empty_sequence();
            seq.push(self.step_tokens(&obs, bin)?)?;
            seqs.push(seq);
        }
        let refs: Vec<&TokenSequence> = seqs.iter().collect();
        self.step_logits(tape, bound, &refs)
    }
}

/// Samples the next action. Temperature 0 picks the argmax and returns the
/// corresponding point-mass distribution.
pub fn sample_action<S: Scalar>(
    model: &SequenceModel<S>,
    context: &TokenSequence,
    temperature: f64,
    mask: Option<&[bool]>,
    rng: &mut Rng,
) -> Result<(usize, DiscretePolicyDist<S>)> {
    if context.len() > model.config.context {
        return Err(Error::Contract(format!(
            "context of {} steps exceeds {}",
            context.len(),
            model.config.context
        )));
    }
    if !(temperature >= 0.0 && temperature.is_finite()) {
        return Err(Error::Config(format!("temperature {temperature} must be finite and non-negative")));
    }
    let mut tape = Tape::new();
    let bound = model.params.bind_frozen(&mut tape);
    let logits = model.step_logits(&mut tape, &bound, &[context])?;
    let all = tape.value(logits);
    let last = all.row(all.rows() - 1);
    if temperature == 0.0 {
        let best = DiscretePolicyDist::from_logits(last, mask)?.argmax();
        let mut probs = vec![S::zero(); model.config.actions];
        probs[best] = S::one();
        return Ok((best, DiscretePolicyDist::new(probs)?));
    }
    let t = S::of(temperature);
    let scaled: Vec<S> = last.iter().map(|&v| v / t).collect();
    let dist = DiscretePolicyDist::from_logits(&scaled, mask)?;
    Ok((dist.sample(rng), dist))
}
