//! Finite-difference gradient oracle, shared by unit and acceptance tests.
//! It only ever evaluates the loss; it never touches the tape's backward
//! pass.

use crate::nn::ParamSet;
use crate::scalar::Scalar;

/// Central differences `(L(θ+h e_i) - L(θ-h e_i)) / 2h` for every scalar
/// parameter, in flattened order.
pub fn central_differences<S: Scalar>(
    params: &ParamSet<S>,
    h: S,
    mut loss: impl FnMut(&ParamSet<S>) -> S,
) -> Vec<S> {
    let mut probe = params.clone();
    let n = params.count();
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let orig = *probe.flat_value_mut(i);
        *probe.flat_value_mut(i) = orig + h;
        let up = loss(&probe);
        *probe.flat_value_mut(i) = orig - h;
        let down = loss(&probe);
        *probe.flat_value_mut(i) = orig;
        out.push((up - down) / (h + h));
    }
    out
}

/// Largest `|a-b| / max(|a|, |b|, floor)` over paired entries.
pub fn max_relative_error<S: Scalar>(a: &[S], b: &[S], floor: S) -> S {
    assert_eq!(a.len(), b.len(), "gradient vectors differ in length");
    a.iter()
        .zip(b)
        .map(|(&x, &y)| (x - y).abs() / x.abs().max(y.abs()).max(floor))
        .fold(S::zero(), S::max)
}
