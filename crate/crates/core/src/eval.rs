//! Accuracy and work comparison between the two sieving backends: per-
//! position detection scores against the trial-division ground truth, ROC
//! curves with equal-error-rate and FPR-at-matched-TPR readouts, and the
//! multi-instance experiment runner with CSV output.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::arith::gen_semiprime;
use crate::cpu_sieve::{self, LogPrecision};
use crate::error::{Error, Result};
use crate::postproc::Backend;
use crate::qs::{relation_at, FactorBase, FactorBaseParams};
use crate::quantize::{check_constraint, quantize, Strategy};
use crate::snn::{SieveNetwork, SnnConfig, WeightMode, PER_TICK_EPSILON};

/// One sieve position: its sweepable score and trial-division truth.
///
/// Score semantics per backend: the CPU score is the accumulated log minus
/// scale * ln|f(x)| (sweeping it reproduces the threshold-offset rule); the
/// quantized SNN score is the smoothness neuron's raw pre-threshold sum
/// (sweeping it is sweeping tau); the exact-weight SNN score is the sum
/// minus ln|f(x)| (sweeping the reference epsilon).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectionScore {
    pub x: i64,
    pub score: f64,
    pub truth: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RocPoint {
    pub threshold: f64,
    pub tpr: f64,
    pub fpr: f64,
    pub fnr: f64,
}

/// Threshold sweep over all distinct score values, in decreasing threshold
/// order (TPR and FPR nondecreasing along the vector).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RocCurve {
    pub points: Vec<RocPoint>,
    pub positives: usize,
    pub negatives: usize,
}

pub fn roc(scores: &[DetectionScore]) -> Result<RocCurve> {
    let positives = scores.iter().filter(|s| s.truth).count();
    let negatives = scores.len() - positives;
    if positives == 0 || negatives == 0 {
        return Err(Error::UndefinedMetric(format!(
            "ROC needs both classes ({positives} positives, {negatives} negatives)"
        )));
    }
    let mut sorted: Vec<(f64, bool)> = scores.iter().map(|s| (s.score, s.truth)).collect();
    sorted.sort_by(|a, b| b.0.total_cmp(&a.0));

    let mut points = vec![RocPoint { threshold: f64::INFINITY, tpr: 0.0, fpr: 0.0, fnr: 1.0 }];
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut i = 0;
    while i < sorted.len() {
        let threshold = sorted[i].0;
        while i < sorted.len() && sorted[i].0 == threshold {
            if sorted[i].1 {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        let tpr = tp as f64 / positives as f64;
        points.push(RocPoint {
            threshold,
            tpr,
            fpr: fp as f64 / negatives as f64,
            fnr: 1.0 - tpr,
        });
    }
    Ok(RocCurve { points, positives, negatives })
}

/// Equal error rate: linear interpolation between adjacent sweep points
/// around FPR = FNR.
pub fn eer(curve: &RocCurve) -> Result<f64> {
    for pair in curve.points.windows(2) {
        let (a, b) = (pair[0], pair[1]);
        let da = a.fnr - a.fpr;
        let db = b.fnr - b.fpr;
        if da >= 0.0 && db <= 0.0 {
            if da == db {
                return Ok(a.fpr);
            }
            let s = da / (da - db);
            return Ok(a.fpr + s * (b.fpr - a.fpr));
        }
    }
    Err(Error::UndefinedMetric("no FPR = FNR crossing on the curve".into()))
}

/// FPR at the largest threshold whose TPR reaches the target (the smallest
/// detection set with the required sensitivity). A target of 0 sits above
/// the maximum score with FPR 0.
pub fn fpr_at_tpr(curve: &RocCurve, target_tpr: f64) -> f64 {
    for point in &curve.points {
        if point.tpr >= target_tpr {
            return point.fpr;
        }
    }
    1.0
}

/// Scoring configuration for one instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreParams {
    pub fb_params: FactorBaseParams,
    pub cpu_precision: LogPrecision,
    /// None = exact weights (software reference); Some = quantized.
    pub snn_strategy: Option<Strategy>,
    pub snn_scale: f64,
}

impl Default for ScoreParams {
    fn default() -> Self {
        ScoreParams {
            fb_params: FactorBaseParams::default(),
            cpu_precision: LogPrecision::Scaled { scale: 1.0 },
            snn_strategy: None,
            snn_scale: 16.0,
        }
    }
}

/// Score every position of the interval with one backend. Truth comes from
/// trial division alone; f(x) = 0 positions are excluded.
pub fn score_interval(
    backend: Backend,
    n: u128,
    interval_len: u64,
    params: &ScoreParams,
) -> Result<Vec<DetectionScore>> {
    if interval_len == 0 {
        return Ok(Vec::new());
    }
    let fb = FactorBase::build(n, interval_len, &params.fb_params)?;
    score_interval_on(backend, &fb, params)
}

pub fn score_interval_on(
    backend: Backend,
    fb: &FactorBase,
    params: &ScoreParams,
) -> Result<Vec<DetectionScore>> {
    let truths: Vec<(i64, bool)> = fb
        .interval
        .xs()
        .filter(|&x| fb.poly.eval(x) != 0)
        .map(|x| Ok((x, relation_at(fb, x)?.is_some())))
        .collect::<Result<_>>()?;

    let scores: Vec<f64> = match backend {
        Backend::Cpu => {
            let arr = cpu_sieve::cpu_sieve_run(fb, params.cpu_precision, None);
            cpu_sieve::cpu_deficit_scores(&arr, fb)
        }
        Backend::Snn => {
            let config = match params.snn_strategy {
                None => SnnConfig::exact_reference(),
                Some(strategy) => {
                    let qw = quantize(&fb.log_weights(), strategy, params.snn_scale)?;
                    SnnConfig::quantized(qw, 0.0, false)
                }
            };
            let mut network = SieveNetwork::build(fb, &config)?;
            let run = network.run_sieve();
            match config.weights {
                // Exact reference: normalize by ln|f| so a global sweep
                // reproduces the per-tick epsilon rule.
                WeightMode::Exact => run
                    .scores
                    .iter()
                    .enumerate()
                    .map(|(t, &s)| {
                        let f = fb.poly.eval(fb.interval.x_at(t as u64));
                        if f == 0 {
                            f64::NEG_INFINITY
                        } else {
                            s - (f.unsigned_abs() as f64).ln()
                        }
                    })
                    .collect(),
                WeightMode::Quantized(_) => run.scores,
            }
        }
    };

    Ok(truths
        .into_iter()
        .map(|(x, truth)| {
            let t = fb.interval.t_of(x).expect("x in interval") as usize;
            DetectionScore { x, score: scores[t], truth }
        })
        .collect())
}

/// Work accounting for the cost comparison.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WorkCounters {
    pub cpu_updates_per_value: f64,
    pub snn_ticks_per_value: f64,
    pub snn_synaptic_events_per_tick: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub bit_sizes: Vec<u32>,
    pub instances_per_size: usize,
    pub strategies: Vec<Strategy>,
    pub base_seed: u64,
    pub interval_len: u64,
    pub cpu_log_scale: f64,
    /// The CPU backend's operating point; its TPR defines where the SNN
    /// curves are queried.
    pub cpu_threshold_offset: f64,
    pub snn_scale: f64,
    /// Record 4-axon-type violations (metrics are still computed in
    /// unconstrained software mode).
    pub constrained: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            bit_sizes: (32..=64).step_by(2).collect(),
            instances_per_size: 20,
            strategies: Strategy::ALL.to_vec(),
            base_seed: 1,
            interval_len: 1 << 17,
            cpu_log_scale: 1.0,
            cpu_threshold_offset: 1.0,
            snn_scale: 16.0,
            constrained: false,
        }
    }
}

/// One CSV row: a (instance, backend/strategy) pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRow {
    pub bits: u32,
    pub seed: u64,
    pub strategy: String,
    pub backend: Backend,
    pub eer: f64,
    pub fpr_at_cpu_tpr: f64,
    pub cpu_updates_per_value: f64,
    pub snn_ticks_per_value: f64,
    pub relations: usize,
    pub interval_len: u64,
    pub constraint_violation: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrategySummary {
    pub bits: u32,
    pub strategy: String,
    pub backend: Backend,
    pub instances: usize,
    pub mean_eer: f64,
    pub ci95_eer: f64,
    pub mean_fpr_at_cpu_tpr: f64,
    pub ci95_fpr_at_cpu_tpr: f64,
    pub mean_cpu_updates_per_value: f64,
    pub mean_snn_ticks_per_value: f64,
    pub constraint_violations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub rows: Vec<ExperimentRow>,
    pub summaries: Vec<StrategySummary>,
}

pub const ROWS_CSV_HEADER: &str = "bits,seed,strategy,backend,eer,fpr_at_cpu_tpr,cpu_updates_per_value,snn_ticks_per_value,relations,interval_len";

impl ExperimentReport {
    pub fn rows_csv(&self) -> String {
        let mut out = String::from(ROWS_CSV_HEADER);
        out.push('\n');
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{:.6},{:.6},{:.4},{:.8},{},{}\n",
                r.bits,
                r.seed,
                r.strategy,
                r.backend,
                r.eer,
                r.fpr_at_cpu_tpr,
                r.cpu_updates_per_value,
                r.snn_ticks_per_value,
                r.relations,
                r.interval_len
            ));
        }
        out
    }

    pub fn summary_csv(&self) -> String {
        let mut out = String::from(
            "bits,strategy,backend,instances,mean_eer,ci95_eer,mean_fpr_at_cpu_tpr,ci95_fpr_at_cpu_tpr,mean_cpu_updates_per_value,mean_snn_ticks_per_value,constraint_violations\n",
        );
        for s in &self.summaries {
            out.push_str(&format!(
                "{},{},{},{},{:.6},{:.6},{:.6},{:.6},{:.4},{:.8},{}\n",
                s.bits,
                s.strategy,
                s.backend,
                s.instances,
                s.mean_eer,
                s.ci95_eer,
                s.mean_fpr_at_cpu_tpr,
                s.ci95_fpr_at_cpu_tpr,
                s.mean_cpu_updates_per_value,
                s.mean_snn_ticks_per_value,
                s.constraint_violations
            ));
        }
        out
    }
}

/// Everything measured on one generated instance.
struct InstanceResult {
    rows: Vec<ExperimentRow>,
}

/// Deterministic per-instance seed.
pub fn instance_seed(base_seed: u64, bits: u32, index: usize) -> u64 {
    base_seed ^ ((bits as u64) << 32) ^ index as u64
}

/// Run the full accuracy/work comparison. Instances are evaluated in
/// parallel; row order (and therefore CSV bytes) is independent of the
/// parallelism.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentReport> {
    let jobs: Vec<(u32, usize)> = config
        .bit_sizes
        .iter()
        .flat_map(|&bits| (0..config.instances_per_size).map(move |i| (bits, i)))
        .collect();

    let results: Vec<Result<InstanceResult>> = jobs
        .par_iter()
        .map(|&(bits, index)| evaluate_instance(config, bits, index))
        .collect();

    let mut rows = Vec::new();
    for result in results {
        rows.extend(result?.rows);
    }

    let mut summaries = Vec::new();
    for &bits in &config.bit_sizes {
        let mut keys: Vec<(String, Backend)> = vec![("cpu".into(), Backend::Cpu)];
        for strategy in &config.strategies {
            keys.push((strategy.to_string(), Backend::Snn));
        }
        for (strategy, backend) in keys {
            let group: Vec<&ExperimentRow> = rows
                .iter()
                .filter(|r| r.bits == bits && r.backend == backend && r.strategy == strategy)
                .collect();
            if group.is_empty() {
                continue;
            }
            let eers: Vec<f64> = group.iter().map(|r| r.eer).collect();
            let fprs: Vec<f64> = group.iter().map(|r| r.fpr_at_cpu_tpr).collect();
            let (mean_eer, ci95_eer) = mean_ci95(&eers);
            let (mean_fpr, ci95_fpr) = mean_ci95(&fprs);
            summaries.push(StrategySummary {
                bits,
                strategy,
                backend,
                instances: group.len(),
                mean_eer,
                ci95_eer,
                mean_fpr_at_cpu_tpr: mean_fpr,
                ci95_fpr_at_cpu_tpr: ci95_fpr,
                mean_cpu_updates_per_value: mean(
                    &group.iter().map(|r| r.cpu_updates_per_value).collect::<Vec<_>>(),
                ),
                mean_snn_ticks_per_value: mean(
                    &group.iter().map(|r| r.snn_ticks_per_value).collect::<Vec<_>>(),
                ),
                constraint_violations: group.iter().filter(|r| r.constraint_violation).count(),
            });
        }
    }

    Ok(ExperimentReport { rows, summaries })
}

fn evaluate_instance(config: &ExperimentConfig, bits: u32, index: usize) -> Result<InstanceResult> {
    let seed = instance_seed(config.base_seed, bits, index);
    let instance = gen_semiprime(bits, seed)?;
    let fb_params = FactorBaseParams::default();
    let fb = FactorBase::build(instance.n, config.interval_len, &fb_params)?;
    let m_len = fb.interval.len();

    // Ground truth once per instance.
    let truths: Vec<(i64, bool)> = fb
        .interval
        .xs()
        .filter(|&x| fb.poly.eval(x) != 0)
        .map(|x| Ok((x, relation_at(&fb, x)?.is_some())))
        .collect::<Result<_>>()?;
    let relations = truths.iter().filter(|(_, t)| *t).count();

    // CPU backend: scores, its ROC, and its operating point.
    let precision = LogPrecision::Scaled { scale: config.cpu_log_scale };
    let arr = cpu_sieve::cpu_sieve_run(&fb, precision, None);
    let deficits = cpu_sieve::cpu_deficit_scores(&arr, &fb);
    let cpu_scores: Vec<DetectionScore> = truths
        .iter()
        .map(|&(x, truth)| DetectionScore {
            x,
            score: deficits[fb.interval.t_of(x).unwrap() as usize],
            truth,
        })
        .collect();
    let cpu_curve = roc(&cpu_scores)?;
    let cpu_eer = eer(&cpu_curve)?;

    let candidates = cpu_sieve::cpu_threshold_candidates(&arr, &fb, config.cpu_threshold_offset);
    let candidate_set: std::collections::HashSet<i64> = candidates.into_iter().collect();
    let (mut tp, mut fp) = (0usize, 0usize);
    for &(x, truth) in &truths {
        if candidate_set.contains(&x) {
            if truth {
                tp += 1;
            } else {
                fp += 1;
            }
        }
    }
    let positives = cpu_curve.positives;
    let negatives = cpu_curve.negatives;
    let cpu_tpr = tp as f64 / positives as f64;
    let cpu_fpr = fp as f64 / negatives as f64;

    let cpu_updates_per_value = arr.update_count as f64 / m_len as f64;

    let mut rows = Vec::new();
    // run_sieve always runs M + pipeline_delay ticks.
    let mut snn_ticks_per_value = (m_len + 2) as f64 / m_len as f64;

    let mut snn_rows = Vec::new();
    for &strategy in &config.strategies {
        let qw = quantize(&fb.log_weights(), strategy, config.snn_scale)?;
        let violation = config.constrained && check_constraint(&qw, 4).is_err();
        let snn_config = SnnConfig::quantized(qw, 0.0, false);
        let mut network = SieveNetwork::build(&fb, &snn_config)?;
        let run = network.run_sieve();
        snn_ticks_per_value = run.trace.ticks_run as f64 / m_len as f64;

        let scores: Vec<DetectionScore> = truths
            .iter()
            .map(|&(x, truth)| DetectionScore {
                x,
                score: run.scores[fb.interval.t_of(x).unwrap() as usize],
                truth,
            })
            .collect();
        let curve = roc(&scores)?;
        snn_rows.push(ExperimentRow {
            bits,
            seed,
            strategy: strategy.to_string(),
            backend: Backend::Snn,
            eer: eer(&curve)?,
            fpr_at_cpu_tpr: fpr_at_tpr(&curve, cpu_tpr),
            cpu_updates_per_value,
            snn_ticks_per_value,
            relations,
            interval_len: m_len,
            constraint_violation: violation,
        });
    }

    rows.push(ExperimentRow {
        bits,
        seed,
        strategy: "cpu".into(),
        backend: Backend::Cpu,
        eer: cpu_eer,
        fpr_at_cpu_tpr: cpu_fpr,
        cpu_updates_per_value,
        snn_ticks_per_value,
        relations,
        interval_len: m_len,
        constraint_violation: false,
    });
    rows.extend(snn_rows);
    Ok(InstanceResult { rows })
}

fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Normal-approximation 95% confidence half-width.
fn mean_ci95(values: &[f64]) -> (f64, f64) {
    let m = mean(values);
    if values.len() < 2 {
        return (m, 0.0);
    }
    let var =
        values.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (values.len() - 1) as f64;
    (m, 1.96 * (var / values.len() as f64).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scores_from(pairs: &[(f64, bool)]) -> Vec<DetectionScore> {
        pairs
            .iter()
            .enumerate()
            .map(|(i, &(score, truth))| DetectionScore { x: i as i64, score, truth })
            .collect()
    }

    #[test]
    fn roc_on_separable_scores() {
        let scores = scores_from(&[(5.0, true), (4.0, true), (2.0, false), (1.0, false)]);
        let curve = roc(&scores).unwrap();
        assert_eq!(eer(&curve).unwrap(), 0.0);
        assert_eq!(fpr_at_tpr(&curve, 1.0), 0.0);
        assert_eq!(fpr_at_tpr(&curve, 0.0), 0.0);
    }

    #[test]
    fn roc_on_constant_scores_interpolates_to_half() {
        let scores = scores_from(&[(1.0, true), (1.0, false), (1.0, true), (1.0, false)]);
        let curve = roc(&scores).unwrap();
        assert!((eer(&curve).unwrap() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn roc_rejects_degenerate_classes() {
        let all_positive = scores_from(&[(1.0, true), (2.0, true)]);
        assert!(matches!(roc(&all_positive), Err(Error::UndefinedMetric(_))));
        assert!(matches!(roc(&[]), Err(Error::UndefinedMetric(_))));
    }

    #[test]
    fn roc_monotonicity() {
        let scores = scores_from(&[
            (3.0, true),
            (2.5, false),
            (2.5, true),
            (2.0, false),
            (1.0, true),
            (0.5, false),
        ]);
        let curve = roc(&scores).unwrap();
        for pair in curve.points.windows(2) {
            assert!(pair[0].threshold > pair[1].threshold);
            assert!(pair[0].tpr <= pair[1].tpr);
            assert!(pair[0].fpr <= pair[1].fpr);
            assert!((pair[0].fnr - (1.0 - pair[0].tpr)).abs() < 1e-12);
        }
    }

    #[test]
    fn fpr_at_tpr_walks_down_the_curve() {
        let scores = scores_from(&[
            (5.0, true),
            (4.0, false),
            (3.0, true),
            (2.0, false),
            (1.0, false),
        ]);
        let curve = roc(&scores).unwrap();
        assert_eq!(fpr_at_tpr(&curve, 0.5), 0.0); // threshold 5: 1/2 positives, 0 FP
        assert!((fpr_at_tpr(&curve, 1.0) - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn score_interval_on_the_worked_example() {
        let params = ScoreParams {
            fb_params: FactorBaseParams {
                b_bound: Some(5),
                ..FactorBaseParams::default()
            },
            ..ScoreParams::default()
        };

        // Exact-weight SNN: normalized scores separate the smooth set.
        let snn = score_interval(Backend::Snn, 91, 10, &params).unwrap();
        assert_eq!(snn.len(), 10);
        let positives: Vec<i64> =
            snn.iter().filter(|s| s.truth).map(|s| s.x).collect();
        assert_eq!(positives, vec![-2, -1, 0, 1]);
        for s in &snn {
            if s.truth {
                assert!(s.score > -PER_TICK_EPSILON, "x={} score={}", s.x, s.score);
            } else {
                assert!(s.score < -1.0, "x={} score={}", s.x, s.score);
            }
        }

        // CPU in exact mode has the same positive set at offset 0.
        let cpu_params = ScoreParams {
            cpu_precision: LogPrecision::Exact,
            ..params.clone()
        };
        let cpu = score_interval(Backend::Cpu, 91, 10, &cpu_params).unwrap();
        let detected: Vec<i64> =
            cpu.iter().filter(|s| s.score >= -1e-9).map(|s| s.x).collect();
        assert_eq!(detected, positives);

        // Zero-length interval yields no scores.
        assert!(score_interval(Backend::Snn, 91, 0, &params).unwrap().is_empty());
    }

    #[test]
    fn experiment_structure_and_determinism() {
        let config = ExperimentConfig {
            bit_sizes: vec![32],
            instances_per_size: 3,
            strategies: vec![Strategy::Uniform],
            base_seed: 9,
            interval_len: 1 << 14,
            ..ExperimentConfig::default()
        };
        let report = run_experiment(&config).unwrap();
        // One cpu row and one uniform row per instance.
        assert_eq!(report.rows.len(), 6);
        assert_eq!(report.summaries.len(), 2);
        let summary = report
            .summaries
            .iter()
            .find(|s| s.strategy == "uniform")
            .unwrap();
        assert_eq!(summary.instances, 3);

        let again = run_experiment(&config).unwrap();
        assert_eq!(report.rows_csv(), again.rows_csv());
        assert_eq!(report.summary_csv(), again.summary_csv());
    }

    #[test]
    fn constrained_experiment_records_integer_violations() {
        let config = ExperimentConfig {
            bit_sizes: vec![32],
            instances_per_size: 2,
            strategies: vec![Strategy::Integer, Strategy::Uniform],
            base_seed: 3,
            interval_len: 1 << 14,
            constrained: true,
            ..ExperimentConfig::default()
        };
        let report = run_experiment(&config).unwrap();
        let integer = report
            .summaries
            .iter()
            .find(|s| s.strategy == "integer")
            .unwrap();
        // Metrics still computed despite the violations.
        assert_eq!(integer.constraint_violations, 2);
        assert!(integer.mean_eer.is_finite());
        let uniform = report
            .summaries
            .iter()
            .find(|s| s.strategy == "uniform")
            .unwrap();
        assert_eq!(uniform.constraint_violations, 0);
    }

    #[test]
    fn work_counters_shape() {
        let config = ExperimentConfig {
            bit_sizes: vec![28, 32],
            instances_per_size: 2,
            strategies: vec![Strategy::Uniform],
            base_seed: 1,
            interval_len: 1 << 14,
            ..ExperimentConfig::default()
        };
        let report = run_experiment(&config).unwrap();
        for row in &report.rows {
            let m = row.interval_len as f64;
            assert!(row.snn_ticks_per_value >= 1.0);
            assert!(row.snn_ticks_per_value <= 1.0 + 2.0 / m + 1e-12);
            assert!(row.cpu_updates_per_value > 0.5);
        }
    }
}
