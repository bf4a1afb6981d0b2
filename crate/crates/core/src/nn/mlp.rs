use rand::Rng as _;

use crate::error::{Error, Result};
use crate::rng::Rng;
use crate::scalar::Scalar;

use super::model::Model;
use super::params::ParamSet;
use super::tape::{Tape, Var};
use super::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Relu,
    Tanh,
}

impl Activation {
    pub fn apply<S: Scalar>(self, tape: &mut Tape<S>, x: Var) -> Var {
        match self {
            Activation::Relu => tape.relu(x),
            Activation::Tanh => tape.tanh(x),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Activation::Relu => "relu",
            Activation::Tanh => "tanh",
        }
    }
}

/// Layer widths `[input, hidden.., output]` and the hidden nonlinearity.
/// The output layer is linear.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MlpSpec {
    pub layer_widths: Vec<usize>,
    pub nonlinearity: Activation,
}

impl MlpSpec {
    pub fn new(layer_widths: Vec<usize>, nonlinearity: Activation) -> Result<Self> {
        if layer_widths.len() < 2 {
            return Err(Error::Config("an MLP needs input and output widths".into()));
        }
        if layer_widths.contains(&0) {
            return Err(Error::Config("layer widths must be positive".into()));
        }
        Ok(Self {
            layer_widths,
            nonlinearity,
        })
    }

    pub fn layers(&self) -> usize {
        self.layer_widths.len() - 1
    }
}

/// Fully connected network. Parameters are stored as
/// `[w0, b0, w1, b1, ..]` with `w_i` of shape `in x out`.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp<S> {
    spec: MlpSpec,
    params: ParamSet<S>,
}

impl<S: Scalar> Mlp<S> {
    /// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) initialization for weights
    /// and biases.
    pub fn new(spec: MlpSpec, rng: &mut Rng) -> Self {
        let mut values = Vec::with_capacity(2 * spec.layers());
        for w in spec.layer_widths.windows(2) {
            let (fan_in, fan_out) = (w[0], w[1]);
            let bound = 1.0 / (fan_in as f64).sqrt();
            let mut draw = |n: usize| -> Vec<S> {
                (0..n).map(|_| S::of(rng.gen_range(-bound..bound))).collect()
            };
            let weights = draw(fan_in * fan_out);
            let bias = draw(fan_out);
            values.push(Tensor::from_vec(fan_in, fan_out, weights).expect("weight shape"));
            values.push(Tensor::row_vector(bias));
        }
        Self {
            spec,
            params: ParamSet::new(values),
        }
    }

    pub fn from_params(spec: MlpSpec, params: ParamSet<S>) -> Result<Self> {
        if params.len() != 2 * spec.layers() {
            return Err(Error::Shape(format!(
                "{} tensors for a {}-layer MLP",
                params.len(),
                spec.layers()
            )));
        }
        for (l, w) in spec.layer_widths.windows(2).enumerate() {
            let weight = params.tensors[2 * l].value.shape();
            let bias = params.tensors[2 * l + 1].value.shape();
            if weight != (w[0], w[1]) || bias != (1, w[1]) {
                return Err(Error::Shape(format!("layer {l} parameter shapes")));
            }
        }
        Ok(Self { spec, params })
    }

    pub fn spec(&self) -> &MlpSpec {
        &self.spec
    }

    /// Zeroes the final layer so every output starts at zero.
    pub fn zero_output_layer(&mut self) {
        let n = self.params.len();
        for t in &mut self.params.tensors[n - 2..] {
            t.value.data_mut().fill(S::zero());
        }
    }

    /// Straight forward pass on one input vector.
    pub fn forward_vec(&self, input: &[S]) -> Result<Vec<S>> {
        let x = Tensor::row_vector(input.to_vec());
        Ok(self.predict(&x)?.into_data())
    }
}

impl<S: Scalar> Model<S> for Mlp<S> {
    fn params(&self) -> &ParamSet<S> {
        &self.params
    }

    fn params_mut(&mut self) -> &mut ParamSet<S> {
        &mut self.params
    }

    fn input_width(&self) -> usize {
        self.spec.layer_widths[0]
    }

    fn output_width(&self) -> usize {
        *self.spec.layer_widths.last().expect("validated widths")
    }

    fn forward(&self, tape: &mut Tape<S>, bound: &[Var], x: Var) -> Result<Var> {
        let (_, cols) = tape.value(x).shape();
        if cols != self.input_width() {
            return Err(Error::Shape(format!(
                "input width {cols}, expected {}",
                self.input_width()
            )));
        }
        let mut h = x;
        let layers = self.spec.layers();
        for l in 0..layers {
            h = tape.matmul(h, bound[2 * l])?;
            h = tape.add_row(h, bound[2 * l + 1])?;
            if l + 1 < layers {
                h = self.spec.nonlinearity.apply(tape, h);
            }
        }
        Ok(h)
    }
}
