//! Weight quantization for the smoothness neuron. The target hardware shares
//! axon types across a core, allowing at most 4 unique synaptic weights into
//! any single neuron, so the per-entry log weights must be collapsed.
//!
//! Four strategies: `regress` fits an optimal 4-level step function to the
//! logs (least squares); `inverse` does the same with each point weighted by
//! the reciprocal of its log, favoring the small frequent factors; `uniform`
//! assigns every factor weight 1; `integer` rounds each log to the nearest
//! integer (more accurate, but usually needs more than 4 levels).

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    Regress,
    Inverse,
    Uniform,
    Integer,
}

impl Strategy {
    pub const ALL: [Strategy; 4] =
        [Strategy::Regress, Strategy::Inverse, Strategy::Uniform, Strategy::Integer];
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            Strategy::Regress => "regress",
            Strategy::Inverse => "inverse",
            Strategy::Uniform => "uniform",
            Strategy::Integer => "integer",
        };
        f.write_str(name)
    }
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Strategy> {
        match s {
            "regress" => Ok(Strategy::Regress),
            "inverse" => Ok(Strategy::Inverse),
            "uniform" => Ok(Strategy::Uniform),
            "integer" => Ok(Strategy::Integer),
            other => Err(Error::InvalidArgument(format!("unknown strategy '{other}'"))),
        }
    }
}

/// Maximum number of step levels for the tree-based strategies.
pub const MAX_LEAVES: usize = 4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantizedWeights {
    pub strategy: Strategy,
    /// Signed integer weights aligned to the factor-base entries.
    pub weights: Vec<i64>,
    pub distinct_count: usize,
    /// Scale applied before rounding; weight / scale approximates the log.
    pub scale: f64,
}

/// Quantize positive log weights under the given strategy. For regress and
/// inverse the result provably has at most 4 distinct values.
pub fn quantize(log_weights: &[f64], strategy: Strategy, scale: f64) -> Result<QuantizedWeights> {
    if log_weights.is_empty() {
        return Err(Error::InvalidArgument("no log weights to quantize".into()));
    }
    if log_weights.iter().any(|&v| !v.is_finite() || v <= 0.0) {
        return Err(Error::InvalidArgument("log weights must be positive and finite".into()));
    }
    let (weights, used_scale) = match strategy {
        Strategy::Uniform => (vec![1i64; log_weights.len()], 1.0),
        Strategy::Integer => (log_weights.iter().map(|&v| v.round() as i64).collect(), 1.0),
        Strategy::Regress => (step_fit(log_weights, scale, false), scale),
        Strategy::Inverse => (step_fit(log_weights, scale, true), scale),
    };
    let mut distinct: Vec<i64> = weights.clone();
    distinct.sort_unstable();
    distinct.dedup();
    Ok(QuantizedWeights {
        strategy,
        weights,
        distinct_count: distinct.len(),
        scale: used_scale,
    })
}

/// Ok iff the weight set fits on a single hardware neuron.
pub fn check_constraint(weights: &QuantizedWeights, max_distinct: usize) -> Result<()> {
    if weights.distinct_count <= max_distinct {
        Ok(())
    } else {
        Err(Error::ConstraintViolation { distinct: weights.distinct_count, max_distinct })
    }
}

/// Fit an optimal step function with at most MAX_LEAVES levels to the values
/// and emit round(scale * level) per point. `inverse_weighted` switches the
/// objective from plain SSE to SSE weighted by 1/value.
fn step_fit(values: &[f64], scale: f64, inverse_weighted: bool) -> Vec<i64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let sorted: Vec<f64> = order.iter().map(|&i| values[i]).collect();
    let point_weights: Vec<f64> = if inverse_weighted {
        sorted.iter().map(|&v| 1.0 / v).collect()
    } else {
        vec![1.0; sorted.len()]
    };

    let partition = optimal_partition(&sorted, &point_weights, MAX_LEAVES);

    let mut levels = vec![0.0f64; sorted.len()];
    for group in &partition {
        let (mut num, mut den) = (0.0f64, 0.0f64);
        for i in group.clone() {
            num += point_weights[i] * sorted[i];
            den += point_weights[i];
        }
        let mean = num / den;
        for i in group.clone() {
            levels[i] = mean;
        }
    }

    let mut out = vec![0i64; values.len()];
    for (pos, &orig) in order.iter().enumerate() {
        out[orig] = (scale * levels[pos]).round() as i64;
    }
    out
}

/// Weighted SSE of grouping sorted[i..=j] onto its weighted mean, computed
/// from prefix sums.
struct SegmentCost {
    w: Vec<f64>,
    wv: Vec<f64>,
    wv2: Vec<f64>,
}

impl SegmentCost {
    fn new(sorted: &[f64], weights: &[f64]) -> SegmentCost {
        let mut w = vec![0.0];
        let mut wv = vec![0.0];
        let mut wv2 = vec![0.0];
        for (&v, &u) in sorted.iter().zip(weights) {
            w.push(w.last().unwrap() + u);
            wv.push(wv.last().unwrap() + u * v);
            wv2.push(wv2.last().unwrap() + u * v * v);
        }
        SegmentCost { w, wv, wv2 }
    }

    fn cost(&self, i: usize, j: usize) -> f64 {
        let w = self.w[j + 1] - self.w[i];
        let wv = self.wv[j + 1] - self.wv[i];
        let wv2 = self.wv2[j + 1] - self.wv2[i];
        (wv2 - wv * wv / w).max(0.0)
    }
}

/// Exact DP over contiguous groups of the sorted values: O(k n^2). Returns
/// the index ranges of the optimal partition into at most k groups, breaking
/// ties toward fewer groups and then earlier boundaries.
fn optimal_partition(sorted: &[f64], weights: &[f64], k: usize) -> Vec<std::ops::Range<usize>> {
    let n = sorted.len();
    let k = k.min(n);
    let seg = SegmentCost::new(sorted, weights);

    // dp[g][j]: best cost of splitting 0..=j into g+1 groups; split[g][j]
    // the start of the last group.
    let mut dp = vec![vec![f64::INFINITY; n]; k];
    let mut split = vec![vec![0usize; n]; k];
    for j in 0..n {
        dp[0][j] = seg.cost(0, j);
    }
    for g in 1..k {
        for j in g..n {
            for i in g..=j {
                let c = dp[g - 1][i - 1] + seg.cost(i, j);
                if c < dp[g][j] {
                    dp[g][j] = c;
                    split[g][j] = i;
                }
            }
        }
    }

    let mut best_g = 0;
    for g in 1..k {
        if dp[g][n - 1] < dp[best_g][n - 1] {
            best_g = g;
        }
    }

    let mut bounds = Vec::with_capacity(best_g + 1);
    let mut j = n - 1;
    let mut g = best_g;
    loop {
        let start = if g == 0 { 0 } else { split[g][j] };
        bounds.push(start..j + 1);
        if g == 0 {
            break;
        }
        j = start - 1;
        g -= 1;
    }
    bounds.reverse();
    bounds
}

/// Total objective value of a quantized result measured back in log space;
/// used by tests and the weight-dump CLI for the accuracy comparison.
pub fn quantization_sse(log_weights: &[f64], qw: &QuantizedWeights) -> f64 {
    log_weights
        .iter()
        .zip(&qw.weights)
        .map(|(&v, &w)| {
            let approx = w as f64 / qw.scale;
            (approx - v) * (approx - v)
        })
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn integer_rounds_each_log() {
        let logs = [2f64.ln(), 3f64.ln(), 5f64.ln(), 27f64.ln()];
        let qw = quantize(&logs, Strategy::Integer, 1.0).unwrap();
        assert_eq!(qw.weights, vec![1, 1, 2, 3]);
        assert_eq!(qw.scale, 1.0);
    }

    #[test]
    fn uniform_is_all_ones() {
        let logs = vec![0.7, 1.1, 4.0, 9.9, 12.0];
        let qw = quantize(&logs, Strategy::Uniform, 16.0).unwrap();
        assert_eq!(qw.weights, vec![1; 5]);
        assert_eq!(qw.distinct_count, 1);
    }

    #[test]
    fn regress_with_four_points_is_exact() {
        let logs = [1.0, 2.0, 4.0, 8.0];
        let qw = quantize(&logs, Strategy::Regress, 16.0).unwrap();
        assert_eq!(qw.weights, vec![16, 32, 64, 128]);
        assert_eq!(quantization_sse(&logs, &qw), 0.0);
    }

    #[test]
    fn rejects_empty_and_nonpositive_input() {
        assert!(quantize(&[], Strategy::Uniform, 1.0).is_err());
        assert!(quantize(&[1.0, -0.5], Strategy::Regress, 1.0).is_err());
    }

    #[test]
    fn tree_strategies_respect_the_axon_limit() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..50 {
            let n = rng.gen_range(1..60);
            let logs: Vec<f64> = (0..n).map(|_| rng.gen_range(0.5..13.0)).collect();
            for strategy in [Strategy::Regress, Strategy::Inverse] {
                let qw = quantize(&logs, strategy, 16.0).unwrap();
                assert!(qw.distinct_count <= 4, "{strategy} produced {}", qw.distinct_count);
                check_constraint(&qw, 4).unwrap();
            }
            check_constraint(&quantize(&logs, Strategy::Uniform, 1.0).unwrap(), 4).unwrap();
        }
    }

    #[test]
    fn integer_violates_constraint_on_wide_log_range() {
        // A realistic 64-bit factor base spans ln 2 ..= ln(2^18), which
        // rounds to far more than 4 distinct integers.
        let logs: Vec<f64> = (1..=18).map(|k| (1u64 << k) as f64).map(|v| v.ln()).collect();
        let qw = quantize(&logs, Strategy::Integer, 1.0).unwrap();
        let err = check_constraint(&qw, 4).unwrap_err();
        match err {
            Error::ConstraintViolation { distinct, max_distinct } => {
                assert!(distinct > 4);
                assert_eq!(max_distinct, 4);
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    /// Exhaustive search over every partition of the sorted values into at
    /// most 4 contiguous groups; the independent optimality oracle.
    fn exhaustive_best_cost(values: &[f64], inverse_weighted: bool) -> f64 {
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        let weights: Vec<f64> = if inverse_weighted {
            sorted.iter().map(|&v| 1.0 / v).collect()
        } else {
            vec![1.0; sorted.len()]
        };
        let seg = SegmentCost::new(&sorted, &weights);
        let n = sorted.len();
        let mut best = f64::INFINITY;
        // Choose up to 3 ordered split points.
        fn recurse(seg: &SegmentCost, n: usize, start: usize, groups_left: usize, acc: f64, best: &mut f64) {
            if start == n {
                *best = best.min(acc);
                return;
            }
            if groups_left == 0 {
                return;
            }
            for end in start..n {
                recurse(seg, n, end + 1, groups_left - 1, acc + seg.cost(start, end), best);
            }
        }
        recurse(&seg, n, 0, 4, 0.0, &mut best);
        best
    }

    #[test]
    fn dp_matches_exhaustive_partition_search() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for trial in 0..100 {
            let n = rng.gen_range(1..=12);
            let logs: Vec<f64> = (0..n).map(|_| rng.gen_range(0.5..13.0)).collect();
            for (strategy, inverse) in [(Strategy::Regress, false), (Strategy::Inverse, true)] {
                let mut sorted = logs.clone();
                sorted.sort_by(f64::total_cmp);
                let weights: Vec<f64> = if inverse {
                    sorted.iter().map(|&v| 1.0 / v).collect()
                } else {
                    vec![1.0; sorted.len()]
                };
                let partition = optimal_partition(&sorted, &weights, MAX_LEAVES);
                let seg = SegmentCost::new(&sorted, &weights);
                let dp_cost: f64 =
                    partition.iter().map(|g| seg.cost(g.start, g.end - 1)).sum();
                let oracle = exhaustive_best_cost(&logs, inverse);
                assert!(
                    (dp_cost - oracle).abs() <= 1e-9 * oracle.max(1.0),
                    "trial {trial} {strategy}: dp={dp_cost} oracle={oracle}"
                );
            }
        }
    }

    #[test]
    fn weights_are_monotone_in_the_logs() {
        let mut rng = ChaCha8Rng::seed_from_u64(37);
        for _ in 0..30 {
            let n = rng.gen_range(2..40);
            let logs: Vec<f64> = (0..n).map(|_| rng.gen_range(0.5..13.0)).collect();
            for strategy in Strategy::ALL {
                let qw = quantize(&logs, strategy, 16.0).unwrap();
                let mut pairs: Vec<(f64, i64)> =
                    logs.iter().copied().zip(qw.weights.iter().copied()).collect();
                pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
                for w in pairs.windows(2) {
                    assert!(w[0].1 <= w[1].1, "{strategy}: {pairs:?}");
                }
            }
        }
    }

    #[test]
    fn sse_ordering_uniform_regress_integer() {
        // Log weights shaped like a realistic factor base: dense small
        // values, sparse large power values.
        let mut logs = Vec::new();
        for p in crate::qs::sieve_primes(650) {
            logs.push((p as f64).ln());
        }
        for power in [9u64, 27, 81, 243, 729, 2187, 25, 125, 625, 49, 343, 121, 169] {
            logs.push((power as f64).ln());
        }
        let uniform = quantize(&logs, Strategy::Uniform, 1.0).unwrap();
        let regress = quantize(&logs, Strategy::Regress, 16.0).unwrap();
        let integer = quantize(&logs, Strategy::Integer, 1.0).unwrap();
        let sse_u = quantization_sse(&logs, &uniform);
        let sse_r = quantization_sse(&logs, &regress);
        let sse_i = quantization_sse(&logs, &integer);
        assert!(sse_u >= sse_r, "uniform {sse_u} < regress {sse_r}");
        assert!(sse_r >= sse_i, "regress {sse_r} < integer {sse_i}");
    }
}
