//! Trajectory tokenization: ternary rewards, quantized returns, patches.

use crate::error::{Error, Result};
use crate::types::Observation;

/// Sign of a reward as a token in {-1, 0, +1}.
pub fn ternarize_reward(reward: f64) -> i8 {
    if reward > 0.0 {
        1
    } else if reward < 0.0 {
        -1
    } else {
        0
    }
}

/// Uniform binning of returns over a closed range, clamped at the ends.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReturnQuantizer {
    min: f64,
    max: f64,
    bins: usize,
}

impl ReturnQuantizer {
    pub fn new(min: f64, max: f64, bins: usize) -> Result<Self> {
        if !(min.is_finite() && max.is_finite()) || min >= max {
            return Err(Error::Config(format!("return range [{min}, {max}] is empty")));
        }
        if bins < 2 {
            return Err(Error::Config(format!("need at least 2 return bins, got {bins}")));
        }
        Ok(Self { min, max, bins })
    }

    pub fn bins(&self) -> usize {
        self.bins
    }

    pub fn range(&self) -> (f64, f64) {
        (self.min, self.max)
    }

    pub fn bin_width(&self) -> f64 {
        (self.max - self.min) / self.bins as f64
    }

    pub fn quantize(&self, value: f64) -> usize {
        if value.is_nan() || value <= self.min {
            return 0;
        }
        let bin = ((value - self.min) / self.bin_width()).floor();
        (bin as usize).min(self.bins - 1)
    }

    /// Midpoint of `bin`.
    pub fn dequantize(&self, bin: usize) -> f64 {
        let bin = bin.min(self.bins - 1);
        self.min + (bin as f64 + 0.5) * self.bin_width()
    }
}

/// Row-major tiling of a grid into `tile_rows x tile_cols` equal patches.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PatchGrid {
    pub rows: usize,
    pub cols: usize,
    pub tile_rows: usize,
    pub tile_cols: usize,
}

impl PatchGrid {
    /// Picks the most nearly square tiling with `count` patches that divides
    /// the grid evenly.
    pub fn new(rows: usize, cols: usize, count: usize) -> Result<Self> {
        if count == 0 || rows == 0 || cols == 0 {
            return Err(Error::Shape(format!("cannot tile {rows}x{cols} into {count} patches")));
        }
        (1..=count)
            .filter(|tr| count % tr == 0)
            .map(|tr| (tr, count / tr))
            .filter(|&(tr, tc)| rows % tr == 0 && cols % tc == 0)
            .min_by_key(|&(tr, tc)| tr.abs_diff(tc))
            .map(|(tile_rows, tile_cols)| Self { rows, cols, tile_rows, tile_cols })
            .ok_or_else(|| Error::Shape(format!("{rows}x{cols} grid has no even tiling into {count} patches")))
    }

    pub fn count(&self) -> usize {
        self.tile_rows * self.tile_cols
    }

    /// Height and width of one patch.
    pub fn patch_shape(&self) -> (usize, usize) {
        (self.rows / self.tile_rows, self.cols / self.tile_cols)
    }

    pub fn patch_len(&self) -> usize {
        let (h, w) = self.patch_shape();
        h * w
    }

    pub fn patchify(&self, obs: &Observation) -> Result<Vec<Vec<f64>>> {
        if obs.rows != self.rows || obs.cols != self.cols {
            return Err(Error::Shape(format!(
                "observation is {}x{}, tiling expects {}x{}",
                obs.rows, obs.cols, self.rows, self.cols
            )));
        }
        let (h, w) = self.patch_shape();
        let mut out = Vec::with_capacity(self.count());
        for tr in 0..self.tile_rows {
            for tc in 0..self.tile_cols {
                let mut patch = Vec::with_capacity(h * w);
                for r in tr * h..(tr + 1) * h {
                    let start = r * self.cols + tc * w;
                    patch.extend_from_slice(&obs.data[start..start + w]);
                }
                out.push(patch);
            }
        }
        Ok(out)
    }

    pub fn unpatchify(&self, patches: &[Vec<f64>]) -> Result<Observation> {
        let (h, w) = self.patch_shape();
        if patches.len() != self.count() || patches.iter().any(|p| p.len() != h * w) {
            return Err(Error::Shape("patch set does not match the tiling".into()));
        }
        let mut data = vec![0.0; self.rows * self.cols];
        for (i, patch) in patches.iter().enumerate() {
            let (tr, tc) = (i / self.tile_cols, i % self.tile_cols);
            for pr in 0..h {
                let start = (tr * h + pr) * self.cols + tc * w;
                data[start..start + w].copy_from_slice(&patch[pr * w..(pr + 1) * w]);
            }
        }
        Observation::new(self.rows, self.cols, data)
    }
}

/// One timestep: observation patches, then return, action and reward tokens.
/// `action` is `None` for the step whose action is still to be chosen.
#[derive(Debug, Clone, PartialEq)]
pub struct TokenStep {
    pub patches: Vec<Vec<f64>>,
    pub return_bin: usize,
    pub action: Option<usize>,
    pub reward: i8,
}

/// A token in layout order.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Token<'a> {
    Patch(&'a [f64]),
    Return(usize),
    Action(Option<usize>),
    Reward(i8),
}

/// Vocabulary sizes a sequence is checked against.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Vocab {
    pub patches: usize,
    pub patch_len: usize,
    pub return_bins: usize,
    pub actions: usize,
    pub context: usize,
}

impl Vocab {
    pub fn tokens_per_step(&self) -> usize {
        self.patches + 3
    }
}

/// Up to `context` timesteps of tokens.
#[derive(Debug, Clone, PartialEq)]
pub struct TokenSequence {
    vocab: Vocab,
    steps: Vec<TokenStep>,
}

impl TokenSequence {
    pub fn new(vocab: Vocab) -> Self {
        Self { vocab, steps: Vec::new() }
    }

    pub fn vocab(&self) -> &Vocab {
        &self.vocab
    }

    pub fn steps(&self) -> &[TokenStep] {
        &self.steps
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// Appends a step, dropping the oldest once the context is full.
    pub fn push(&mut self, step: TokenStep) -> Result<()> {
        self.check(&step)?;
        if self.steps.len() == self.vocab.context {
            self.steps.remove(0);
        }
        self.steps.push(step);
        Ok(())
    }

    /// Appends a step, refusing to grow past the context length.
    pub fn push_strict(&mut self, step: TokenStep) -> Result<()> {
        if self.steps.len() >= self.vocab.context {
            return Err(Error::Contract(format!("context already holds {} steps", self.vocab.context)));
        }
        self.check(&step)?;
        self.steps.push(step);
        Ok(())
    }

    /// Fills in the action and reward of the latest step.
    pub fn complete_last(&mut self, action: usize, reward: f64) -> Result<()> {
        if action >= self.vocab.actions {
            return Err(Error::Index { index: action, len: self.vocab.actions });
        }
        let last = self.steps.last_mut().ok_or_else(|| Error::State("empty token sequence".into()))?;
        last.action = Some(action);
        last.reward = ternarize_reward(reward);
        Ok(())
    }

    pub fn tokens(&self) -> Vec<Token<'_>> {
        let mut out = Vec::with_capacity(self.steps.len() * self.vocab.tokens_per_step());
        for s in &self.steps {
            out.extend(s.patches.iter().map(|p| Token::Patch(p)));
            out.push(Token::Return(s.return_bin));
            out.push(Token::Action(s.action));
            out.push(Token::Reward(s.reward));
        }
        out
    }

    fn check(&self, step: &TokenStep) -> Result<()> {
        let v = &self.vocab;
        if step.patches.len() != v.patches || step.patches.iter().any(|p| p.len() != v.patch_len) {
            return Err(Error::Shape(format!(
                "step needs {} patches of {} cells",
                v.patches, v.patch_len
            )));
        }
        if step.return_bin >= v.return_bins {
            return Err(Error::Index { index: step.return_bin, len: v.return_bins });
        }
        if let Some(a) = step.action {
            if a >= v.actions {
                return Err(Error::Index { index: a, len: v.actions });
            }
        }
        if !(-1..=1).contains(&step.reward) {
            return Err(Error::Contract(format!("reward token {} is not ternary", step.reward)));
        }
        Ok(())
    }
}
