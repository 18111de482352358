//! Quadratic-sieve integer factorization with two interchangeable sieving
//! backends: a classical array-based log sieve and a simulated spiking
//! neural network built from digital leaky integrate-and-fire neurons.
//!
//! The SNN backend represents the factor base in space (one tonic neuron
//! per modular root of each prime power) and the sieving interval in time
//! (one tick per polynomial value). A middle layer selects the highest
//! prime power dividing the current value and a single output neuron
//! integrates log-weighted factors against a smoothness threshold.
//!
//! # Modules
//!
//! - [`arith`] - primality, semiprime generation, modular square roots,
//!   Hensel lifting, smoothness bound
//! - [`qs`] - polynomial, sieving interval, factor base, trial division
//! - [`cpu_sieve`] - baseline log sieve with memory-update accounting
//! - [`quantize`] - smoothness-weight quantization strategies and the
//!   4-unique-weight constraint check
//! - [`snn`] - the LIF simulator and three-layer sieve network
//! - [`postproc`] - GF(2) linear algebra, congruence of squares, factor
//!   extraction, and the end-to-end driver
//! - [`eval`] - ROC/EER metrics and the accuracy/work comparison harness

pub mod arith;
pub mod cpu_sieve;
pub mod error;
pub mod eval;
pub mod postproc;
pub mod qs;
pub mod quantize;
pub mod snn;

pub use error::{Error, Result};

pub use qs::{FactorBase, FactorBaseParams, QsPolynomial, Relation, SieveInterval};

