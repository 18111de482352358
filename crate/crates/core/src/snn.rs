//! Discrete-time digital LIF simulator and the three-layer sieve network.
//!
//! Layer 1 (tonic): one neuron per (prime power, modular root) pair, firing
//! with period p^e and phase r so that a spike at tick t means p^e divides
//! f(t + x_min). Layer 2 (factor): one stateless neuron per factor-base
//! entry, excited by its own roots and inhibited by tonic neurons of higher
//! powers of the same prime, so only the highest dividing power survives.
//! Layer 3: a single stateless smoothness neuron integrating the log-weighted
//! factor spikes against a threshold.
//!
//! Spikes take one tick per layer hop, so a smoothness spike at tick t
//! reports on f(t + x_min - 2).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qs::FactorBase;
use crate::quantize::QuantizedWeights;

/// Largest tonic period a single hardware neuron can express (the membrane
/// threshold is an unsigned 18-bit integer).
pub const HARDWARE_MAX_PERIOD: u64 = 1 << 18;
/// Hardware synaptic weights are 9-bit signed.
pub const HARDWARE_MAX_WEIGHT: i64 = 1 << 8;
/// Distinct-weight limit per neuron (one per axon type).
pub const HARDWARE_MAX_DISTINCT_WEIGHTS: usize = 4;

/// Digital LIF neuron state update:
/// V <- V + sum(A_i * w_i) + lambda; spike and reset to R when V >= alpha.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LifNeuronConfig {
    pub alpha: i64,
    pub v0: i64,
    pub lambda: i64,
    pub reset: i64,
    pub floor_at_zero: bool,
    /// Clear the potential at the start of every tick (the smoothness
    /// neuron's reset semantics), making the unit purely combinational.
    pub stateless: bool,
}

impl LifNeuronConfig {
    /// Tonic neuron with period `modulus` and phase `root`: alpha = p^e,
    /// lambda = 1, reset = 0. Ticks are 0-indexed and each tick integrates
    /// before comparing, so the initial potential is p^e - 1 - r; the spike
    /// train (ticks ≡ r mod p^e) is the contract, V0 is derived from it.
    pub fn tonic(modulus: u64, root: u64) -> LifNeuronConfig {
        debug_assert!(root < modulus);
        LifNeuronConfig {
            alpha: modulus as i64,
            v0: modulus as i64 - 1 - root as i64,
            lambda: 1,
            reset: 0,
            floor_at_zero: false,
            stateless: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LifNeuron {
    pub config: LifNeuronConfig,
    pub v: i64,
}

impl LifNeuron {
    pub fn new(config: LifNeuronConfig) -> LifNeuron {
        LifNeuron { config, v: config.v0 }
    }

    /// Advance one tick with the given summed synaptic input.
    pub fn step(&mut self, synaptic_input: i64) -> bool {
        if self.config.stateless {
            self.v = 0;
        }
        self.v += synaptic_input + self.config.lambda;
        let spike = self.v >= self.config.alpha;
        if spike {
            self.v = self.config.reset;
        }
        if self.config.floor_at_zero && self.v < 0 {
            self.v = 0;
        }
        spike
    }

    pub fn reset(&mut self) {
        self.v = self.config.v0;
    }
}

/// The smoothness test: spike iff the weighted sum of active inputs reaches
/// tau. Stateless across ticks (alpha = 0, R = 0, potential floored at 0).
pub fn smoothness_fire(active_weights: &[f64], tau: f64) -> bool {
    active_weights.iter().sum::<f64>() >= tau
}

/// Smoothness weights attached to the factor layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum WeightMode {
    /// Unquantized ln(p^e) per entry: the software reference.
    Exact,
    Quantized(QuantizedWeights),
}

/// Smoothness threshold.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ThresholdMode {
    /// Single tau compared against every tick's weighted sum, in the same
    /// units as the weights (hardware semantics).
    Fixed(f64),
    /// Per-tick threshold ln|f(x)| - epsilon (software reference); only
    /// meaningful with exact weights.
    PerTickLog { epsilon: f64 },
}

/// Default slack for the per-tick reference threshold: far above f64
/// accumulation error, far below the ln 3 deficit of any missed factor.
pub const PER_TICK_EPSILON: f64 = 0.25;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnnConfig {
    pub weights: WeightMode,
    pub threshold: ThresholdMode,
    /// Enforce hardware limits (tonic period, weight range, axon types).
    pub constrained: bool,
    /// Ticks per layer hop; the end-to-end pipeline delay is twice this.
    pub hop_delay: u32,
    /// Keep per-spike events for raster export (counters are always kept).
    pub record_spikes: bool,
}

impl SnnConfig {
    /// Software reference: exact weights, per-tick threshold.
    pub fn exact_reference() -> SnnConfig {
        SnnConfig {
            weights: WeightMode::Exact,
            threshold: ThresholdMode::PerTickLog { epsilon: PER_TICK_EPSILON },
            constrained: false,
            hop_delay: 1,
            record_spikes: false,
        }
    }

    pub fn quantized(weights: QuantizedWeights, tau: f64, constrained: bool) -> SnnConfig {
        SnnConfig {
            weights: WeightMode::Quantized(weights),
            threshold: ThresholdMode::Fixed(tau),
            constrained,
            hop_delay: 1,
            record_spikes: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Layer {
    Tonic,
    Factor,
    Smoothness,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpikeEvent {
    pub tick: u64,
    pub neuron_id: u32,
    pub layer: Layer,
}

/// Per-run activity record. `synaptic_event_count` is exactly the number of
/// spike deliveries (emitted spikes times their fan-out).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpikeTrace {
    pub ticks_run: u64,
    pub synaptic_event_count: u64,
    pub events: Option<Vec<SpikeEvent>>,
}

impl SpikeTrace {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("tick,neuron_id,layer\n");
        if let Some(events) = &self.events {
            for e in events {
                let layer = match e.layer {
                    Layer::Tonic => "tonic",
                    Layer::Factor => "factor",
                    Layer::Smoothness => "smoothness",
                };
                out.push_str(&format!("{},{},{}\n", e.tick, e.neuron_id, layer));
            }
        }
        out
    }
}

/// A tonic unit plus its outgoing synapses (to factor-layer neurons).
#[derive(Debug, Clone, Serialize, Deserialize)]
struct TonicUnit {
    neuron: LifNeuron,
    entry: u32,
    root_t: u64,
    /// (target factor neuron, weight): +1 to its own entry, minus the target
    /// excitation sum to every lower power of the same prime.
    edges: Vec<(u32, i32)>,
}

/// What one tick produced. `data_t` is the sieve position the smoothness
/// output refers to (tick minus pipeline delay), when in range.
#[derive(Debug, Clone, PartialEq)]
pub struct TickStep {
    pub tick: u64,
    pub tonic_spikes: Vec<u32>,
    pub factor_spikes: Vec<u32>,
    pub smoothness_sum: f64,
    pub smoothness_spike: bool,
    pub data_t: Option<u64>,
}

/// Result of running a network over its interval.
#[derive(Debug, Clone, PartialEq)]
pub struct SnnRun {
    /// Detected positions in tick order.
    pub detections: Vec<i64>,
    /// Pre-threshold smoothness sums indexed by t.
    pub scores: Vec<f64>,
    pub trace: SpikeTrace,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SieveNetwork {
    tonic: Vec<TonicUnit>,
    /// Excitation each factor neuron needs (1 = its threshold).
    factor_threshold: i32,
    /// Weight of each factor neuron's synapse onto the smoothness neuron.
    smoothness_weights: Vec<f64>,
    threshold: ThresholdMode,
    pub pipeline_delay: u32,
    hop_delay: u32,
    pub constrained_mode: bool,
    record_spikes: bool,
    fb: FactorBase,

    // Simulation state.
    tick: u64,
    /// Ring of pending factor-layer inputs, one slot per hop-delay tick.
    factor_queue: Vec<Vec<i32>>,
    /// Ring of pending smoothness sums.
    smooth_queue: Vec<f64>,
    synaptic_events: u64,
    events: Vec<SpikeEvent>,
}

impl SieveNetwork {
    /// Build the three-layer network for a factor base. Errors in constrained
    /// mode when a tonic period, weight magnitude, or the number of distinct
    /// smoothness weights exceeds the hardware limits.
    pub fn build(fb: &FactorBase, config: &SnnConfig) -> Result<SieveNetwork> {
        let entries = &fb.entries;
        let smoothness_weights: Vec<f64> = match &config.weights {
            WeightMode::Exact => fb.log_weights(),
            WeightMode::Quantized(qw) => {
                if qw.weights.len() != entries.len() {
                    return Err(Error::InvalidArgument(format!(
                        "{} weights for {} factor base entries",
                        qw.weights.len(),
                        entries.len()
                    )));
                }
                if config.constrained {
                    crate::quantize::check_constraint(qw, HARDWARE_MAX_DISTINCT_WEIGHTS)?;
                    if let Some(&w) = qw.weights.iter().find(|w| w.unsigned_abs() > HARDWARE_MAX_WEIGHT as u64) {
                        return Err(Error::InvalidArgument(format!(
                            "weight {w} outside the 9-bit signed synapse range"
                        )));
                    }
                }
                qw.weights.iter().map(|&w| w as f64).collect()
            }
        };

        if config.constrained {
            if let Some(entry) = entries.iter().find(|entry| entry.modulus > HARDWARE_MAX_PERIOD) {
                return Err(Error::RangeError {
                    modulus: entry.modulus,
                    max: HARDWARE_MAX_PERIOD,
                });
            }
        }
        if config.hop_delay == 0 {
            return Err(Error::InvalidArgument("hop delay must be at least 1 tick".into()));
        }

        // Tonic layer: one neuron per (entry, root); excite own factor
        // neuron, veto the factor neurons of lower powers of the same prime.
        let mut tonic = Vec::new();
        for (j, entry) in entries.iter().enumerate() {
            let mut inhibited = Vec::new();
            for (k, lower) in entries.iter().enumerate() {
                if lower.p == entry.p && lower.e < entry.e {
                    inhibited.push((k as u32, -(lower.roots_t.len() as i32)));
                }
            }
            for &root in &entry.roots_t {
                let mut edges = vec![(j as u32, 1)];
                edges.extend_from_slice(&inhibited);
                tonic.push(TonicUnit {
                    neuron: LifNeuron::new(LifNeuronConfig::tonic(entry.modulus, root)),
                    entry: j as u32,
                    root_t: root,
                    edges,
                });
            }
        }

        let hop = config.hop_delay as usize;
        Ok(SieveNetwork {
            tonic,
            factor_threshold: 1,
            smoothness_weights,
            threshold: config.threshold,
            pipeline_delay: 2 * config.hop_delay,
            hop_delay: config.hop_delay,
            constrained_mode: config.constrained,
            record_spikes: config.record_spikes,
            fb: fb.clone(),
            tick: 0,
            factor_queue: vec![vec![0; entries.len()]; hop],
            smooth_queue: vec![0.0; hop],
            synaptic_events: 0,
            events: Vec::new(),
        })
    }

    pub fn tonic_count(&self) -> usize {
        self.tonic.len()
    }

    /// Number of synapses into the smoothness neuron (= factor-base entries).
    pub fn smoothness_connection_count(&self) -> usize {
        self.smoothness_weights.len()
    }

    pub fn current_tick(&self) -> u64 {
        self.tick
    }

    /// Restore the freshly-built state.
    pub fn reset(&mut self) {
        for unit in &mut self.tonic {
            unit.neuron.reset();
        }
        for slot in &mut self.factor_queue {
            slot.iter_mut().for_each(|v| *v = 0);
        }
        self.smooth_queue.iter_mut().for_each(|v| *v = 0.0);
        self.tick = 0;
        self.synaptic_events = 0;
        self.events.clear();
    }

    fn threshold_at(&self, data_t: u64) -> f64 {
        match self.threshold {
            ThresholdMode::Fixed(tau) => tau,
            ThresholdMode::PerTickLog { epsilon } => {
                let x = self.fb.interval.x_min() + data_t as i64;
                let f = self.fb.poly.eval(x);
                if f == 0 {
                    f64::INFINITY
                } else {
                    (f.unsigned_abs() as f64).ln() - epsilon
                }
            }
        }
    }

    /// Advance the whole network one tick.
    pub fn step(&mut self) -> TickStep {
        let tick = self.tick;
        let hop = self.hop_delay as usize;
        let slot = (tick % hop as u64) as usize;

        // Inputs that were emitted hop_delay ticks ago arrive now.
        let factor_inputs = std::mem::replace(
            &mut self.factor_queue[slot],
            vec![0; self.smoothness_weights.len()],
        );
        let smooth_input = std::mem::replace(&mut self.smooth_queue[slot], 0.0);

        // Tonic layer: pure leak integration, no synaptic input.
        let mut tonic_spikes = Vec::new();
        for (idx, unit) in self.tonic.iter_mut().enumerate() {
            if unit.neuron.step(0) {
                tonic_spikes.push(idx as u32);
                for &(target, weight) in &unit.edges {
                    self.factor_queue[slot][target as usize] += weight;
                    self.synaptic_events += 1;
                }
            }
        }

        // Factor layer: stateless threshold units over the delayed inputs.
        let mut factor_spikes = Vec::new();
        for (j, &input) in factor_inputs.iter().enumerate() {
            if input >= self.factor_threshold {
                factor_spikes.push(j as u32);
                self.smooth_queue[slot] += self.smoothness_weights[j];
                self.synaptic_events += 1;
            }
        }

        // Smoothness neuron over the delayed factor sums.
        let data_t = tick.checked_sub(self.pipeline_delay as u64).filter(|&d| d < self.fb.interval.len());
        let smoothness_sum = smooth_input;
        let smoothness_spike = match data_t {
            Some(d) => smoothness_fire(&[smoothness_sum], self.threshold_at(d)),
            None => false,
        };

        if self.record_spikes {
            let n_tonic = self.tonic.len() as u32;
            for &t in &tonic_spikes {
                self.events.push(SpikeEvent { tick, neuron_id: t, layer: Layer::Tonic });
            }
            for &j in &factor_spikes {
                self.events.push(SpikeEvent { tick, neuron_id: n_tonic + j, layer: Layer::Factor });
            }
            if smoothness_spike {
                let id = n_tonic + self.smoothness_weights.len() as u32;
                self.events.push(SpikeEvent { tick, neuron_id: id, layer: Layer::Smoothness });
            }
        }

        self.tick += 1;
        TickStep { tick, tonic_spikes, factor_spikes, smoothness_sum, smoothness_spike, data_t }
    }

    /// Run M + pipeline_delay ticks from the fresh state. A smoothness spike
    /// at tick t is a detection at x = (t - pipeline_delay) + x_min.
    pub fn run_sieve(&mut self) -> SnnRun {
        if self.tick != 0 {
            self.reset();
        }
        let m_len = self.fb.interval.len();
        let total = m_len + self.pipeline_delay as u64;
        let mut detections = Vec::new();
        let mut scores = vec![0.0f64; m_len as usize];
        for _ in 0..total {
            let step = self.step();
            if let Some(d) = step.data_t {
                scores[d as usize] = step.smoothness_sum;
                if step.smoothness_spike {
                    detections.push(self.fb.interval.x_at(d));
                }
            }
        }
        SnnRun {
            detections,
            scores,
            trace: SpikeTrace {
                ticks_run: total,
                synaptic_event_count: self.synaptic_events,
                events: self.record_spikes.then(|| self.events.clone()),
            },
        }
    }

    /// Structural description (ids, periods, phases, weights) for export.
    pub fn describe(&self) -> NetworkDescription {
        let n_tonic = self.tonic.len() as u32;
        NetworkDescription {
            tonic: self
                .tonic
                .iter()
                .enumerate()
                .map(|(idx, unit)| {
                    let entry = &self.fb.entries[unit.entry as usize];
                    TonicDescription {
                        neuron_id: idx as u32,
                        p: entry.p,
                        e: entry.e,
                        period: entry.modulus,
                        phase: unit.root_t,
                        fan_out: unit.edges.len(),
                    }
                })
                .collect(),
            factor: self
                .fb
                .entries
                .iter()
                .enumerate()
                .map(|(j, entry)| FactorDescription {
                    neuron_id: n_tonic + j as u32,
                    p: entry.p,
                    e: entry.e,
                    smoothness_weight: self.smoothness_weights[j],
                })
                .collect(),
            smoothness_neuron_id: n_tonic + self.smoothness_weights.len() as u32,
            threshold: self.threshold,
            pipeline_delay: self.pipeline_delay,
            constrained_mode: self.constrained_mode,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TonicDescription {
    pub neuron_id: u32,
    pub p: u64,
    pub e: u32,
    pub period: u64,
    pub phase: u64,
    pub fan_out: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FactorDescription {
    pub neuron_id: u32,
    pub p: u64,
    pub e: u32,
    pub smoothness_weight: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NetworkDescription {
    pub tonic: Vec<TonicDescription>,
    pub factor: Vec<FactorDescription>,
    pub smoothness_neuron_id: u32,
    pub threshold: ThresholdMode,
    pub pipeline_delay: u32,
    pub constrained_mode: bool,
}
