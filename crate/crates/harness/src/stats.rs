use gsea_core::{Error, Result};
use num_rational::Ratio;
use serde::{Deserialize, Serialize};

use crate::record::{Metric, RunRecord};

/// Probability that a draw from `a` exceeds a draw from `b`, ties counted
/// half, as an exact fraction over all pairs.
pub fn cles_exact(a: &[f64], b: &[f64]) -> Result<Ratio<u64>> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::Config("effect size needs two non-empty samples".into()));
    }
    if a.iter().chain(b).any(|v| v.is_nan()) {
        return Err(Error::Numeric("NaN in effect-size sample".into()));
    }
    let mut half_wins = 0u64;
    for x in a {
        for y in b {
            half_wins += match x.partial_cmp(y).expect("NaN excluded") {
                std::cmp::Ordering::Greater => 2,
                std::cmp::Ordering::Equal => 1,
                std::cmp::Ordering::Less => 0,
            };
        }
    }
    Ok(Ratio::new(half_wins, 2 * a.len() as u64 * b.len() as u64))
}

pub fn cles(a: &[f64], b: &[f64]) -> Result<f64> {
    let r = cles_exact(a, b)?;
    Ok(*r.numer() as f64 / *r.denom() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    /// Population standard deviation.
    pub std: f64,
    pub median: f64,
    pub n: usize,
}

/// Mean, population std and midpoint median. Values are sorted first so
/// the result does not depend on their order.
pub fn summarize(values: &[f64]) -> Result<Summary> {
    if values.is_empty() {
        return Err(Error::State("no values to aggregate".into()));
    }
    let mut v = values.to_vec();
    if v.iter().any(|x| x.is_nan()) {
        return Err(Error::Numeric("NaN in aggregated values".into()));
    }
    v.sort_by(|a, b| a.total_cmp(b));
    let n = v.len();
    let mean = v.iter().sum::<f64>() / n as f64;
    let var = v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n as f64;
    let median = if n % 2 == 1 { v[n / 2] } else { (v[n / 2 - 1] + v[n / 2]) / 2.0 };
    Ok(Summary { mean, std: var.sqrt(), median, n })
}

/// Summary of `metric` over runs. Every run must carry the metric.
pub fn aggregate(runs: &[RunRecord], metric: Metric) -> Result<Summary> {
    let values = runs
        .iter()
        .map(|r| {
            r.metric(metric)
                .ok_or_else(|| Error::State(format!("run {} has no {metric}", r.run_id)))
        })
        .collect::<Result<Vec<_>>>()?;
    summarize(&values)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hand_examples() {
        assert_eq!(cles(&[2.0, 3.0], &[1.0, 1.0]).unwrap(), 1.0);
        assert_eq!(cles(&[1.0, 2.0, 3.0], &[2.0, 2.0, 2.0]).unwrap(), 0.5);
        assert_eq!(cles(&[4.0, 1.0], &[1.0, 4.0]).unwrap(), 0.5);
        assert!(cles(&[], &[1.0]).is_err());
    }

    #[test]
    fn summary_examples() {
        let s = summarize(&[1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!((s.mean, s.median), (2.5, 2.5));
        assert!((s.std - 1.25f64.sqrt()).abs() < 1e-15);
        let one = summarize(&[7.0]).unwrap();
        assert_eq!((one.mean, one.std, one.median), (7.0, 0.0, 7.0));
        assert!(summarize(&[]).is_err());
    }
}
