//! Number-theoretic primitives: primality, semiprime generation, Legendre
//! symbol, modular square roots, Hensel lifting, and the smoothness bound.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// An odd prime, validated on construction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct OddPrime(u64);

impl OddPrime {
    pub fn new(value: u64) -> Result<OddPrime> {
        if value < 3 || value % 2 == 0 || !is_prime_u64(value) {
            return Err(Error::InvalidArgument(format!("{value} is not an odd prime")));
        }
        Ok(OddPrime(value))
    }

    pub fn value(self) -> u64 {
        self.0
    }
}

/// A generated semiprime n = p * q with its ground-truth factors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SemiprimeInstance {
    pub n: u128,
    pub p: u64,
    pub q: u64,
    pub bits: u32,
    pub seed: u64,
}

/// Deterministic Miller-Rabin. The witness set is proven complete for all
/// inputs below 3.317e24, which covers the full u64 range.
pub fn is_prime_u64(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    for &p in &[2u64, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37] {
        if n == p {
            return true;
        }
        if n % p == 0 {
            return false;
        }
    }
    let mut d = n - 1;
    let mut s = 0u32;
    while d % 2 == 0 {
        d /= 2;
        s += 1;
    }
    'witness: for &a in &[2u64, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37] {
        let mut x = mod_pow_u64(a, d, n);
        if x == 1 || x == n - 1 {
            continue;
        }
        for _ in 1..s {
            x = mul_mod_u64(x, x, n);
            if x == n - 1 {
                continue 'witness;
            }
        }
        return false;
    }
    true
}

pub fn mul_mod_u64(a: u64, b: u64, m: u64) -> u64 {
    ((a as u128 * b as u128) % m as u128) as u64
}

pub fn mod_pow_u64(mut base: u64, mut exp: u64, m: u64) -> u64 {
    if m == 1 {
        return 0;
    }
    let mut acc = 1u64;
    base %= m;
    while exp > 0 {
        if exp & 1 == 1 {
            acc = mul_mod_u64(acc, base, m);
        }
        base = mul_mod_u64(base, base, m);
        exp >>= 1;
    }
    acc
}

/// (a + b) mod m, valid for any m (including m > 2^127 where a + b wraps).
pub fn add_mod_u128(a: u128, b: u128, m: u128) -> u128 {
    debug_assert!(a < m && b < m);
    let (s, overflow) = a.overflowing_add(b);
    if overflow || s >= m {
        s.wrapping_sub(m)
    } else {
        s
    }
}

/// (a * b) mod m by binary decomposition; m may use the full 128 bits.
pub fn mul_mod_u128(mut a: u128, mut b: u128, m: u128) -> u128 {
    a %= m;
    b %= m;
    if let (Ok(a64), Ok(b64)) = (u64::try_from(a), u64::try_from(b)) {
        let wide = a64 as u128 * b64 as u128;
        return wide % m;
    }
    let mut acc = 0u128;
    while b > 0 {
        if b & 1 == 1 {
            acc = add_mod_u128(acc, a, m);
        }
        a = add_mod_u128(a, a, m);
        b >>= 1;
    }
    acc
}

pub fn mod_pow_u128(mut base: u128, mut exp: u128, m: u128) -> u128 {
    if m == 1 {
        return 0;
    }
    let mut acc = 1u128;
    base %= m;
    while exp > 0 {
        if exp & 1 == 1 {
            acc = mul_mod_u128(acc, base, m);
        }
        base = mul_mod_u128(base, base, m);
        exp >>= 1;
    }
    acc
}

pub fn gcd_u128(mut a: u128, mut b: u128) -> u128 {
    while b != 0 {
        let t = b;
        b = a % b;
        a = t;
    }
    a
}

/// Floor of the integer square root.
pub fn isqrt_u128(n: u128) -> u128 {
    if n < 2 {
        return n;
    }
    // Newton's method from a power-of-two overestimate.
    let mut x = 1u128 << (n.ilog2() / 2 + 1);
    let mut y = (x + n / x) / 2;
    while y < x {
        x = y;
        y = (x + n / x) / 2;
    }
    x
}

/// Smallest m with m * m >= n.
pub fn isqrt_ceil_u128(n: u128) -> u128 {
    let r = isqrt_u128(n);
    if r * r == n {
        r
    } else {
        r + 1
    }
}

/// Legendre symbol (a/p) via Euler's criterion: 0 if p | a, 1 if a is a
/// nonzero quadratic residue mod p, -1 otherwise.
pub fn legendre_symbol(a: i128, p: OddPrime) -> i8 {
    let p_val = p.value();
    let a_mod = a.rem_euclid(p_val as i128) as u64;
    if a_mod == 0 {
        return 0;
    }
    let e = mod_pow_u64(a_mod, (p_val - 1) / 2, p_val);
    if e == 1 {
        1
    } else {
        -1
    }
}

/// Both square roots {r, p - r} of a mod p via Tonelli-Shanks, or None when
/// a is a non-residue. Roots are reported in [1, p-1] with the smaller first.
pub fn sqrt_mod_prime(a: u128, p: OddPrime) -> Result<Option<(u64, u64)>> {
    let p_val = p.value();
    let a_mod = (a % p_val as u128) as u64;
    if a_mod == 0 {
        return Err(Error::InvalidArgument(format!(
            "{p_val} divides the argument; caller must handle the p | n case"
        )));
    }
    if legendre_symbol(a_mod as i128, p) == -1 {
        return Ok(None);
    }
    let r = tonelli_shanks(a_mod, p_val);
    debug_assert_eq!(mul_mod_u64(r, r, p_val), a_mod);
    let other = p_val - r;
    Ok(Some((r.min(other), r.max(other))))
}

/// One square root of the residue a mod odd prime p (a must be a residue).
fn tonelli_shanks(a: u64, p: u64) -> u64 {
    if p % 4 == 3 {
        return mod_pow_u64(a, (p + 1) / 4, p);
    }
    // Write p - 1 = q * 2^s with q odd.
    let mut q = p - 1;
    let mut s = 0u32;
    while q % 2 == 0 {
        q /= 2;
        s += 1;
    }
    // Smallest quadratic non-residue; found quickly in practice.
    let mut z = 2u64;
    while mod_pow_u64(z, (p - 1) / 2, p) != p - 1 {
        z += 1;
    }
    let mut m = s;
    let mut c = mod_pow_u64(z, q, p);
    let mut t = mod_pow_u64(a, q, p);
    let mut r = mod_pow_u64(a, (q + 1) / 2, p);
    while t != 1 {
        let mut i = 0u32;
        let mut t2 = t;
        while t2 != 1 {
            t2 = mul_mod_u64(t2, t2, p);
            i += 1;
        }
        let b = mod_pow_u64(c, 1 << (m - i - 1), p);
        m = i;
        c = mul_mod_u64(b, b, p);
        t = mul_mod_u64(t, c, p);
        r = mul_mod_u64(r, b, p);
    }
    r
}

/// Lift roots of r^2 ≡ a (mod p^(e-1)) to roots mod p^e. Each input root
/// lifts to exactly one root mod p^e; the result is sorted and deduplicated.
pub fn hensel_lift(roots_mod_prev: &[u64], a: u128, p: OddPrime, e: u32) -> Result<Vec<u64>> {
    if e < 2 {
        return Err(Error::InvalidArgument("hensel_lift requires e >= 2".into()));
    }
    let p_val = p.value();
    let pe_prev = checked_pow(p_val, e - 1)?;
    let pe = pe_prev
        .checked_mul(p_val)
        .ok_or_else(|| Error::InvalidArgument(format!("{p_val}^{e} overflows u64")))?;
    let a_mod = (a % pe as u128) as u64;

    let mut lifted = Vec::with_capacity(roots_mod_prev.len());
    for &r in roots_mod_prev {
        if r % p_val == 0 {
            return Err(Error::SingularRoot { root: r, prime: p_val });
        }
        let r_sq = (r as u128 * r as u128 % pe as u128) as u64;
        let diff = (a_mod as u128 + pe as u128 - r_sq as u128) % pe as u128;
        if diff % pe_prev as u128 != 0 {
            return Err(Error::InvalidArgument(format!(
                "root {r} does not satisfy r^2 ≡ a mod {p_val}^{}",
                e - 1
            )));
        }
        // Solve (r + t * p^(e-1))^2 ≡ a (mod p^e) for t in [0, p).
        let rhs = (diff / pe_prev as u128) as u64 % p_val;
        let inv = mod_pow_u64(2 * (r % p_val) % p_val, p_val - 2, p_val);
        let t = mul_mod_u64(rhs, inv, p_val);
        let lifted_root = (r as u128 + t as u128 * pe_prev as u128) % pe as u128;
        debug_assert_eq!(mul_mod_u64(lifted_root as u64, lifted_root as u64, pe), a_mod);
        lifted.push(lifted_root as u64);
    }
    lifted.sort_unstable();
    lifted.dedup();
    Ok(lifted)
}

pub fn checked_pow(base: u64, exp: u32) -> Result<u64> {
    base.checked_pow(exp)
        .ok_or_else(|| Error::InvalidArgument(format!("{base}^{exp} overflows u64")))
}

/// Asymptotically optimal smoothness bound round(exp(0.5 * sqrt(ln n * ln ln n))),
/// floored at 5 so tiny inputs still get a workable factor base.
pub fn smoothness_bound(n: u128) -> Result<u64> {
    if n < 16 {
        return Err(Error::InvalidArgument(format!(
            "smoothness bound undefined for n = {n} < 16"
        )));
    }
    let ln_n = (n as f64).ln();
    let b = (0.5 * (ln_n * ln_n.ln()).sqrt()).exp().round() as u64;
    Ok(b.max(5))
}

/// Deterministically generate a semiprime with the requested bit length.
///
/// p is drawn with p ≡ 3 (mod 4) and q with q ≡ 1 (mod 4), so n ≡ 3 (mod 4).
/// This keeps f(x) = (x + ceil(sqrt(n)))^2 - n free of factors of 4, matching
/// the sieve's exclusion of higher powers of two.
pub fn gen_semiprime(bits: u32, seed: u64) -> Result<SemiprimeInstance> {
    if !(16..=128).contains(&bits) {
        return Err(Error::InvalidArgument(format!(
            "semiprime bit length {bits} outside supported range 16..=128"
        )));
    }
    let p_bits = bits.div_ceil(2);
    let q_bits = bits / 2;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    loop {
        let p = random_prime(&mut rng, p_bits, 3);
        let q = random_prime(&mut rng, q_bits, 1);
        let n = p as u128 * q as u128;
        if 128 - n.leading_zeros() == bits {
            return Ok(SemiprimeInstance { n, p, q, bits, seed });
        }
    }
}

/// Rejection-sample a prime with the given bit length and residue mod 4.
fn random_prime(rng: &mut ChaCha8Rng, bits: u32, residue_mod_4: u64) -> u64 {
    debug_assert!((4..=64).contains(&bits));
    debug_assert!(residue_mod_4 == 1 || residue_mod_4 == 3);
    let top = 1u64 << (bits - 1);
    loop {
        let mut c = top | rng.gen_range(0..top);
        c = c - (c % 4) + residue_mod_4;
        if c >= top && (64 - c.leading_zeros()) == bits && is_prime_u64(c) {
            return c;
        }
    }
}
