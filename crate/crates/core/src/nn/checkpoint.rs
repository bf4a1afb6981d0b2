//! Parameter checkpoints as plain text:
//!
//! ```text
//! gsea-checkpoint v1
//! tensors <N>
//! <rows> <cols>
//! <row-major values, space separated, shortest round-trip exponent form>
//! ... (two lines per tensor)
//! ```
//!
//! Values go through `f64`, so `f32` and `f64` parameters both round-trip
//! exactly.

use std::io::{BufRead, Write};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

use super::params::ParamSet;
use super::tensor::Tensor;

const MAGIC: &str = "gsea-checkpoint v1";

pub fn write_params<S: Scalar, W: Write>(params: &ParamSet<S>, mut w: W) -> std::io::Result<()> {
    writeln!(w, "{MAGIC}")?;
    writeln!(w, "tensors {}", params.len())?;
    for p in &params.tensors {
        writeln!(w, "{} {}", p.value.rows(), p.value.cols())?;
        let line: Vec<String> = p
            .value
            .data()
            .iter()
            .map(|v| format!("{:e}", v.as_f64()))
            .collect();
        writeln!(w, "{}", line.join(" "))?;
    }
    Ok(())
}

pub fn params_to_string<S: Scalar>(params: &ParamSet<S>) -> String {
    let mut buf = Vec::new();
    write_params(params, &mut buf).expect("writing to memory");
    String::from_utf8(buf).expect("ascii output")
}

pub fn read_params<S: Scalar, R: BufRead>(r: R) -> Result<ParamSet<S>> {
    let mut lines = r.lines();
    let mut next = |what: &str| -> Result<String> {
        lines
            .next()
            .ok_or_else(|| Error::Parse(format!("missing {what}")))?
            .map_err(|e| Error::Parse(e.to_string()))
    };
    if next("header")?.trim() != MAGIC {
        return Err(Error::Parse("not a gsea checkpoint".into()));
    }
    let count_line = next("tensor count")?;
    let count: usize = count_line
        .strip_prefix("tensors ")
        .and_then(|n| n.trim().parse().ok())
        .ok_or_else(|| Error::Parse(format!("bad tensor count line {count_line:?}")))?;
    let mut values = Vec::with_capacity(count);
    for i in 0..count {
        let shape = next("shape")?;
        let dims: Vec<usize> = shape
            .split_whitespace()
            .map(|d| d.parse().map_err(|_| Error::Parse(format!("bad shape {shape:?}"))))
            .collect::<Result<_>>()?;
        let [rows, cols] = dims[..] else {
            return Err(Error::Parse(format!("tensor {i}: shape needs two dims")));
        };
        let data: Vec<S> = next("values")?
            .split_whitespace()
            .map(|v| {
                v.parse::<f64>()
                    .map(S::of)
                    .map_err(|_| Error::Parse(format!("bad value {v:?}")))
            })
            .collect::<Result<_>>()?;
        values.push(Tensor::from_vec(rows, cols, data)?);
    }
    Ok(ParamSet::new(values))
}

pub fn params_from_str<S: Scalar>(s: &str) -> Result<ParamSet<S>> {
    read_params(s.as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{Activation, Mlp, MlpSpec, Model};
    use crate::rng::seeded;

    #[test]
    fn round_trip_is_exact() {
        let spec = MlpSpec::new(vec![5, 7, 3], Activation::Relu).unwrap();
        let net = Mlp::<f64>::new(spec.clone(), &mut seeded(11));
        let text = params_to_string(net.params());
        let back: ParamSet<f64> = params_from_str(&text).unwrap();
        assert_eq!(&back, net.params());
        assert_eq!(params_to_string(&back), text);

        let net32 = Mlp::<f32>::new(spec, &mut seeded(11));
        let back32: ParamSet<f32> = params_from_str(&params_to_string(net32.params())).unwrap();
        assert_eq!(&back32, net32.params());
    }

    #[test]
    fn malformed_checkpoints_rejected() {
        assert!(params_from_str::<f64>("nope\n").is_err());
        assert!(params_from_str::<f64>("gsea-checkpoint v1\ntensors 1\n2 2\n1 2 3\n").is_err());
        assert!(params_from_str::<f64>("gsea-checkpoint v1\ntensors 2\n1 1\n1\n").is_err());
    }
}
