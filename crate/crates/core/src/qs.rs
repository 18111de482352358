//! Quadratic-sieve problem setup: the polynomial f(x) = (x + ceil(sqrt n))^2 - n,
//! the sieving interval with its t = x - x_min time coordinate, the factor
//! base of primes and prime powers with roots expressed in t-space, and the
//! trial-division ground truth.

use serde::{Deserialize, Serialize};

use crate::arith::{
    self, isqrt_ceil_u128, legendre_symbol, smoothness_bound, sqrt_mod_prime, OddPrime,
};
use crate::error::{Error, Result};

/// Hard ceiling on any factor-base modulus so p^e arithmetic stays in u64.
const MODULUS_LIMIT: u64 = 1 << 62;

/// f(x) = (x + m)^2 - n with m = ceil(sqrt(n)).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct QsPolynomial {
    n: u128,
    m: u64,
    /// m^2 - n, in [0, 2m]; lets eval avoid forming (x + m)^2.
    c: i128,
}

impl QsPolynomial {
    pub fn new(n: u128) -> Result<QsPolynomial> {
        if n < 2 {
            return Err(Error::InvalidArgument(format!("polynomial undefined for n = {n}")));
        }
        let m_wide = isqrt_ceil_u128(n);
        let m = u64::try_from(m_wide)
            .map_err(|_| Error::InvalidArgument(format!("n = {n} too large: ceil(sqrt n) must fit u64")))?;
        let c = (m_wide * m_wide - n) as i128;
        Ok(QsPolynomial { n, m, c })
    }

    pub fn n(&self) -> u128 {
        self.n
    }

    /// ceil(sqrt(n)), the offset added to x.
    pub fn m(&self) -> u64 {
        self.m
    }

    /// Exact f(x) = x^2 + 2mx + (m^2 - n); stays well inside i128 for the
    /// supported envelope (|x| < 2^32, m < 2^64).
    pub fn eval(&self, x: i64) -> i128 {
        let x = x as i128;
        x * x + 2 * self.m as i128 * x + self.c
    }
}

/// The sieving window [x_min, x_min + len), with t = x - x_min.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SieveInterval {
    x_min: i64,
    len: u64,
}

impl SieveInterval {
    pub fn new(x_min: i64, len: u64) -> Result<SieveInterval> {
        if len < 2 {
            return Err(Error::InvalidArgument(format!("interval length {len} < 2")));
        }
        Ok(SieveInterval { x_min, len })
    }

    /// The default window of length `len` centered at x = 0. When m <= len/2
    /// the window is shifted right so x + m stays positive; otherwise values
    /// at mirrored offsets duplicate each other and produce relations whose
    /// congruences always collapse to x ≡ ±y.
    pub fn centered(len: u64, poly: &QsPolynomial) -> Result<SieveInterval> {
        let half = (len / 2) as i64;
        let lowest_valid = 1 - poly.m() as i64;
        SieveInterval::new((-half).max(lowest_valid), len)
    }

    pub fn x_min(&self) -> i64 {
        self.x_min
    }

    #[allow(clippy::len_without_is_empty)]
    pub fn len(&self) -> u64 {
        self.len
    }

    pub fn x_at(&self, t: u64) -> i64 {
        debug_assert!(t < self.len);
        self.x_min + t as i64
    }

    pub fn t_of(&self, x: i64) -> Option<u64> {
        let d = x - self.x_min;
        (0..self.len as i64).contains(&d).then_some(d as u64)
    }

    pub fn xs(&self) -> impl Iterator<Item = i64> + '_ {
        (0..self.len).map(|t| self.x_at(t))
    }
}

/// One sieving unit: a prime power p^e with its t-space spike phases.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FactorBaseEntry {
    pub p: u64,
    pub e: u32,
    pub modulus: u64,
    /// Residues r mod p^e such that p^e | f(t + x_min) whenever t ≡ r.
    pub roots_t: Vec<u64>,
    /// ln(p^e), the unquantized smoothness weight.
    pub log_weight: f64,
    /// ln(p), the increment the CPU sieve adds per hit of this entry.
    pub log_increment: f64,
}

/// How high prime powers are taken relative to the polynomial magnitude.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PowerCeiling {
    /// min(|f(x_min)|, |f(x_max)|): powers "up to the magnitude of the
    /// polynomial". Reproduces the worked 91 example exactly.
    IntervalMin,
    /// max(|f(x_min)|, |f(x_max)|): every power that could divide any value
    /// in the window. Makes exact-weight sieving lossless.
    IntervalMax,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FactorBaseParams {
    /// Smoothness bound override; defaults to smoothness_bound(n).
    pub b_bound: Option<u64>,
    /// Hard cap on any p^e, mirroring the 18-bit tonic period limit of the
    /// target hardware. None lifts the cap (software-only networks).
    pub max_power: Option<u64>,
    pub power_ceiling: PowerCeiling,
}

impl Default for FactorBaseParams {
    fn default() -> Self {
        FactorBaseParams {
            b_bound: None,
            max_power: Some(1 << 18),
            power_ceiling: PowerCeiling::IntervalMin,
        }
    }
}

/// The factor base: primes p <= B with (n/p) = 1, plus p = 2, plus odd
/// prime powers up to the configured ceiling. Entries are sorted by modulus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FactorBase {
    pub n: u128,
    pub bound: u64,
    /// Number of distinct primes (including 2); b + 1 relations are needed.
    pub b: usize,
    pub entries: Vec<FactorBaseEntry>,
    pub poly: QsPolynomial,
    pub interval: SieveInterval,
}

impl FactorBase {
    pub fn build(n: u128, interval_len: u64, params: &FactorBaseParams) -> Result<FactorBase> {
        let poly = QsPolynomial::new(n)?;
        let interval = SieveInterval::centered(interval_len, &poly)?;
        FactorBase::build_on(n, interval, params)
    }

    pub fn build_on(n: u128, interval: SieveInterval, params: &FactorBaseParams) -> Result<FactorBase> {
        if n % 2 == 0 {
            return Err(Error::InvalidArgument(format!("n = {n} must be odd")));
        }
        let poly = QsPolynomial::new(n)?;
        if (poly.m() as u128) * (poly.m() as u128) == n {
            return Err(Error::InvalidArgument(format!("n = {n} is a perfect square")));
        }
        let bound = match params.b_bound {
            Some(b) => b,
            None => smoothness_bound(n)?,
        };
        if bound < 2 {
            return Err(Error::InvalidArgument(format!("smoothness bound {bound} < 2")));
        }

        let f_lo = poly.eval(interval.x_min()).unsigned_abs();
        let f_hi = poly.eval(interval.x_at(interval.len() - 1)).unsigned_abs();
        let magnitude = match params.power_ceiling {
            PowerCeiling::IntervalMin => f_lo.min(f_hi),
            PowerCeiling::IntervalMax => f_lo.max(f_hi),
        };
        let power_cap = magnitude
            .min(params.max_power.unwrap_or(MODULUS_LIMIT) as u128)
            .min(MODULUS_LIMIT as u128);

        let mut entries = Vec::new();
        // p = 2 always has the single root r = 1 of r^2 ≡ n (mod 2); powers
        // of two are never sieved.
        entries.push(FactorBaseEntry {
            p: 2,
            e: 1,
            modulus: 2,
            roots_t: vec![to_t_space(1, 2, &poly, &interval)],
            log_weight: (2f64).ln(),
            log_increment: (2f64).ln(),
        });

        for p in sieve_primes(bound).into_iter().filter(|&p| p > 2) {
            let prime = OddPrime::new(p)?;
            match legendre_symbol(n as i128, prime) {
                0 => return Err(Error::EarlyFactor { divisor: p }),
                -1 => continue,
                _ => {}
            }
            let (r1, r2) = sqrt_mod_prime(n, prime)?.expect("legendre said residue");
            let log_p = (p as f64).ln();
            let mut roots = vec![r1, r2];
            roots.dedup();
            entries.push(entry_for(p, 1, p, &roots, log_p, &poly, &interval));

            let mut e = 2u32;
            loop {
                let Ok(modulus) = arith::checked_pow(p, e) else { break };
                if modulus as u128 > power_cap {
                    break;
                }
                roots = arith::hensel_lift(&roots, n, prime, e)?;
                entries.push(entry_for(p, e, modulus, &roots, log_p, &poly, &interval));
                e += 1;
            }
        }

        entries.sort_by_key(|entry| entry.modulus);
        let b = entries.iter().filter(|entry| entry.e == 1).count();
        Ok(FactorBase { n, bound, b, entries, poly, interval })
    }

    /// Distinct primes in ascending order; exponent vectors index into this.
    pub fn primes(&self) -> Vec<u64> {
        self.entries.iter().filter(|entry| entry.e == 1).map(|entry| entry.p).collect()
    }

    pub fn log_weights(&self) -> Vec<f64> {
        self.entries.iter().map(|entry| entry.log_weight).collect()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("factor base serializes")
    }
}

fn entry_for(
    p: u64,
    e: u32,
    modulus: u64,
    roots_x: &[u64],
    log_p: f64,
    poly: &QsPolynomial,
    interval: &SieveInterval,
) -> FactorBaseEntry {
    let mut roots_t: Vec<u64> =
        roots_x.iter().map(|&r| to_t_space(r, modulus, poly, interval)).collect();
    roots_t.sort_unstable();
    roots_t.dedup();
    FactorBaseEntry {
        p,
        e,
        modulus,
        roots_t,
        log_weight: e as f64 * log_p,
        log_increment: log_p,
    }
}

/// Convert a root of r^2 ≡ n (mod p^e) from x-space to the t coordinate:
/// p^e | f(t + x_min) iff t ≡ r - m - x_min (mod p^e).
fn to_t_space(r: u64, modulus: u64, poly: &QsPolynomial, interval: &SieveInterval) -> u64 {
    let shifted = r as i128 - poly.m() as i128 - interval.x_min() as i128;
    shifted.rem_euclid(modulus as i128) as u64
}

pub fn sieve_primes(bound: u64) -> Vec<u64> {
    if bound < 2 {
        return Vec::new();
    }
    let limit = bound as usize;
    let mut composite = vec![false; limit + 1];
    let mut primes = Vec::new();
    for i in 2..=limit {
        if !composite[i] {
            primes.push(i as u64);
            for j in (i * i..=limit).step_by(i) {
                composite[j] = true;
            }
        }
    }
    primes
}

/// The exponent vector of a value that factored completely over the base.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SmoothFactorization {
    pub sign_negative: bool,
    /// Indexed by FactorBase::primes().
    pub exponents: Vec<u32>,
}

/// A sieve location whose polynomial value is smooth.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Relation {
    pub x: i64,
    pub value: i128,
    pub sign_negative: bool,
    pub exponents: Vec<u32>,
}

/// Factor |value| over the distinct primes of the base. This is the
/// definite smoothness check; exponents are not capped by the power ceiling.
pub fn trial_divide(value: i128, fb: &FactorBase) -> Result<Option<SmoothFactorization>> {
    if value == 0 {
        return Err(Error::InvalidArgument("cannot trial divide zero".into()));
    }
    let primes = fb.primes();
    let mut exponents = vec![0u32; primes.len()];
    let mut remaining = value.unsigned_abs();
    if let Ok(mut small) = u64::try_from(remaining) {
        for (i, &p) in primes.iter().enumerate() {
            while small % p == 0 {
                small /= p;
                exponents[i] += 1;
            }
        }
        remaining = small as u128;
    } else {
        for (i, &p) in primes.iter().enumerate() {
            let p = p as u128;
            while remaining % p == 0 {
                remaining /= p;
                exponents[i] += 1;
            }
        }
    }
    if remaining == 1 {
        Ok(Some(SmoothFactorization { sign_negative: value < 0, exponents }))
    } else {
        Ok(None)
    }
}

/// Build the relation at position x if f(x) is smooth over the base.
pub fn relation_at(fb: &FactorBase, x: i64) -> Result<Option<Relation>> {
    let value = fb.poly.eval(x);
    if value == 0 {
        return Ok(None);
    }
    Ok(trial_divide(value, fb)?.map(|f| Relation {
        x,
        value,
        sign_negative: f.sign_negative,
        exponents: f.exponents,
    }))
}
