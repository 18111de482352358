//! Baseline von-Neumann log sieve: for each root of each factor-base entry,
//! an (integer-approximated) log increment is added at every hit position in
//! a length-M array, and positions whose accumulated log comes close enough
//! to ln|f(x)| are reported as smooth candidates. Every array addition is
//! counted; the update count is the backend's work measure.

use serde::{Deserialize, Serialize};

use crate::qs::FactorBase;

/// Precision of the accumulated logs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum LogPrecision {
    /// Add round(scale * ln p) per hit. scale = 1 is the coarsest realistic
    /// integer approximation; larger scales refine the ROC.
    Scaled { scale: f64 },
    /// Add ln p exactly (the lossless reference).
    Exact,
}

impl LogPrecision {
    /// Factor converting a natural log into array units.
    fn scale(&self) -> f64 {
        match *self {
            LogPrecision::Scaled { scale } => scale,
            LogPrecision::Exact => 1.0,
        }
    }
}

/// Accumulated sieve array for one interval.
#[derive(Debug, Clone, PartialEq)]
pub struct SieveArray {
    pub values: Vec<f64>,
    pub precision: LogPrecision,
    /// Exact number of array additions performed.
    pub update_count: u64,
}

/// Relative slack absorbing f64 rounding so that exact-mode accumulation at
/// offset 0 reproduces the smooth set bit-for-bit.
const NUMERIC_GUARD: f64 = 1e-9;

/// Sieve the factor base over its interval. `block_size` only changes the
/// iteration order (cache-blocked sweeps), never the resulting array.
pub fn cpu_sieve_run(fb: &FactorBase, precision: LogPrecision, block_size: Option<u64>) -> SieveArray {
    let m_len = fb.interval.len();
    let mut values = vec![0.0f64; m_len as usize];
    let mut update_count = 0u64;

    let increments: Vec<f64> = fb
        .entries
        .iter()
        .map(|entry| match precision {
            LogPrecision::Scaled { scale } => (scale * entry.log_increment).round(),
            LogPrecision::Exact => entry.log_increment,
        })
        .collect();

    match block_size {
        None => {
            for (entry, &inc) in fb.entries.iter().zip(&increments) {
                for &root in &entry.roots_t {
                    let mut t = root;
                    while t < m_len {
                        values[t as usize] += inc;
                        update_count += 1;
                        t += entry.modulus;
                    }
                }
            }
        }
        Some(block) => {
            let block = block.max(1);
            let mut start = 0u64;
            while start < m_len {
                let end = (start + block).min(m_len);
                for (entry, &inc) in fb.entries.iter().zip(&increments) {
                    for &root in &entry.roots_t {
                        let mut t = if root >= start {
                            root
                        } else {
                            root + (start - root).div_ceil(entry.modulus) * entry.modulus
                        };
                        while t < end {
                            values[t as usize] += inc;
                            update_count += 1;
                            t += entry.modulus;
                        }
                    }
                }
                start = end;
            }
        }
    }

    SieveArray { values, precision, update_count }
}

/// Positions x whose accumulated log reaches scale * (ln|f(x)| - offset).
/// Positions with f(x) = 0 are excluded.
pub fn cpu_threshold_candidates(arr: &SieveArray, fb: &FactorBase, threshold_offset: f64) -> Vec<i64> {
    let scale = arr.precision.scale();
    let mut out = Vec::new();
    for t in 0..fb.interval.len() {
        let x = fb.interval.x_at(t);
        let f = fb.poly.eval(x);
        if f == 0 {
            continue;
        }
        let target = scale * ((f.unsigned_abs() as f64).ln() - threshold_offset);
        let guard = NUMERIC_GUARD * target.abs().max(1.0);
        if arr.values[t as usize] >= target - guard {
            out.push(x);
        }
    }
    out
}

/// Per-position score for ROC sweeps: accumulated log minus scale * ln|f(x)|.
/// Thresholding this at -scale * offset is exactly the candidate rule above.
pub fn cpu_deficit_scores(arr: &SieveArray, fb: &FactorBase) -> Vec<f64> {
    let scale = arr.precision.scale();
    (0..fb.interval.len())
        .map(|t| {
            let f = fb.poly.eval(fb.interval.x_at(t));
            if f == 0 {
                return f64::NEG_INFINITY;
            }
            arr.values[t as usize] - scale * (f.unsigned_abs() as f64).ln()
        })
        .collect()
}

/// Generous candidate slack for the factoring driver: twice the log of the
/// smoothness bound, the classical double-large-prime style cutoff. False
/// positives are cheap (trial division rejects them); misses cost relations.
pub fn driver_threshold_offset(bound: u64) -> f64 {
    2.0 * (bound as f64).ln()
}
