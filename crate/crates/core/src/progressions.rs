use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::kahan::Kahan;
use crate::primes::{for_each_prime, gcd, is_prime_u64, PrimeTable};
use crate::runner::Runner;
use crate::series::zeta_em;

/// Count primes `p <= x` with `p = b (mod m)`. Requires `gcd(m, b) = 1`.
pub fn pi_progression(table: &PrimeTable, x: u64, m: u64, b: u64) -> Result<u64> {
    if x > table.limit() {
        return Err(Error::AboveLimit { what: "x", value: x, limit: table.limit() });
    }
    if m == 0 || b >= m {
        return Err(Error::InvalidArgument(alloc::format!(
            "need a positive modulus and residue below it, got {b} mod {m}"
        )));
    }
    if gcd(m, b) != 1 {
        return Err(Error::InvalidArgument(alloc::format!(
            "residue class {b} mod {m} is not coprime"
        )));
    }
    let mut n = b;
    while n < 2 {
        n += m;
    }
    let mut count = 0;
    while n <= x {
        if table.is_prime(n) {
            count += 1;
        }
        n += m;
    }
    Ok(count)
}

/// Smallest prime `p = 1 (mod m)` with `p <= cap`, or `None` if there is
/// none in range.
pub fn least_prime(m: u64, cap: u64) -> Result<Option<u64>> {
    if m == 0 {
        return Err(Error::InvalidArgument(alloc::format!("modulus must be positive, got {m}")));
    }
    let mut k = 1u64;
    loop {
        let candidate = match k.checked_mul(m).and_then(|v| v.checked_add(1)) {
            Some(c) if c <= cap => c,
            _ => return Ok(None),
        };
        if is_prime_u64(candidate) {
            return Ok(Some(candidate));
        }
        k += 1;
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct LinnikRow {
    pub m: u64,
    /// Smallest prime `= 1 (mod m)` within `m^cap_exponent`.
    pub least: Option<u64>,
    /// `log least / log m`, the exponent the least prime realizes.
    pub ratio: Option<f64>,
}

/// Scan of least primes in progressions `1 (mod m)` over a range of
/// moduli.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct LinnikReport {
    pub rows: Vec<LinnikRow>,
    pub max_ratio: f64,
    /// Smallest modulus attaining `max_ratio`.
    pub argmax_m: u64,
    /// Counts of realized exponents in buckets of width 0.25 starting
    /// at 0: entries are `(bucket lower edge, count)`.
    pub histogram: Vec<(f64, u64)>,
    /// Moduli in `[100, m_hi]` whose least prime was found.
    pub chowla_considered: u64,
    /// ... and stayed below `m^1.5`.
    pub chowla_satisfied: u64,
    pub chowla_fraction: f64,
    pub not_found: Vec<u64>,
}

/// For each `m` in `[m_lo, m_hi]`, find the least prime `= 1 (mod m)` up
/// to `m^cap_exponent`. Work is split per modulus through the runner;
/// rows come back in modulus order either way.
pub fn linnik_scan<R: Runner>(
    m_lo: u64,
    m_hi: u64,
    cap_exponent: f64,
    runner: &R,
) -> Result<LinnikReport> {
    if m_lo < 2 || m_hi < m_lo {
        return Err(Error::InvalidArgument(alloc::format!(
            "modulus range must satisfy 2 <= m_lo <= m_hi, got {m_lo}..={m_hi}"
        )));
    }
    if !(1.0..=10.0).contains(&cap_exponent) {
        return Err(Error::InvalidArgument(alloc::format!(
            "cap exponent must lie in [1, 10], got {cap_exponent}"
        )));
    }
    let n = (m_hi - m_lo + 1) as usize;
    let rows = runner.run(n, |i| {
        let m = m_lo + i as u64;
        let cap_f = libm::pow(m as f64, cap_exponent);
        let cap = if cap_f >= u64::MAX as f64 { u64::MAX } else { cap_f as u64 };
        let least = least_prime(m, cap).expect("modulus is positive");
        LinnikRow {
            m,
            least,
            ratio: least.map(|p| libm::log(p as f64) / libm::log(m as f64)),
        }
    });

    let mut max_ratio = f64::NEG_INFINITY;
    let mut argmax_m = 0;
    let buckets = libm::ceil(cap_exponent / 0.25) as usize + 1;
    let mut histogram: Vec<(f64, u64)> = (0..buckets).map(|i| (0.25 * i as f64, 0)).collect();
    let mut chowla_considered = 0;
    let mut chowla_satisfied = 0;
    let mut not_found = Vec::new();
    for row in &rows {
        match (row.least, row.ratio) {
            (Some(p), Some(r)) => {
                if r > max_ratio {
                    max_ratio = r;
                    argmax_m = row.m;
                }
                let bucket = ((r / 0.25) as usize).min(buckets - 1);
                histogram[bucket].1 += 1;
                if row.m >= 100 {
                    chowla_considered += 1;
                    if (p as f64) < libm::pow(row.m as f64, 1.5) {
                        chowla_satisfied += 1;
                    }
                }
            }
            _ => not_found.push(row.m),
        }
    }
    let chowla_fraction = if chowla_considered > 0 {
        chowla_satisfied as f64 / chowla_considered as f64
    } else {
        0.0
    };
    Ok(LinnikReport {
        rows,
        max_ratio,
        argmax_m,
        histogram,
        chowla_considered,
        chowla_satisfied,
        chowla_fraction,
        not_found,
    })
}

/// How to accumulate the progression-weighted square sum.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BvStrategy {
    /// One pass over primes, distributing each `p - 1` to all its
    /// divisors.
    DivisorTranspose,
    /// One strided primality scan per modulus.
    DirectStride,
}

/// `sum over a <= t of a^delta * pi(t; a, 1)^2`, the dispersion-style
/// weighted sum controlling second moments of progression counts.
///
/// Both strategies produce the same counts and add the same nonzero terms
/// in the same order, so their results are identical to the last bit.
pub fn bv_weighted_sum(
    table: &PrimeTable,
    t: u64,
    delta: f64,
    strategy: BvStrategy,
) -> Result<f64> {
    if t > table.limit() {
        return Err(Error::AboveLimit { what: "t", value: t, limit: table.limit() });
    }
    if t < 2 {
        return Err(Error::InvalidArgument(alloc::format!("t must be at least 2, got {t}")));
    }
    if !(0.0..1.0).contains(&delta) {
        return Err(Error::InvalidArgument(alloc::format!(
            "delta must lie in [0, 1), got {delta}"
        )));
    }
    let mut sum = Kahan::new();
    match strategy {
        BvStrategy::DivisorTranspose => {
            let mut counts = vec![0u32; t as usize + 1];
            for &p in table.primes() {
                if p > t {
                    break;
                }
                table.factor(p - 1)?.for_each_divisor(|d| counts[d as usize] += 1);
            }
            for a in 1..=t {
                let c = counts[a as usize] as f64;
                sum.add(libm::pow(a as f64, delta) * c * c);
            }
        }
        BvStrategy::DirectStride => {
            for a in 1..=t {
                let mut count = 0u32;
                let mut n = a + 1;
                while n <= t {
                    if table.is_prime(n) {
                        count += 1;
                    }
                    n += a;
                }
                let c = count as f64;
                sum.add(libm::pow(a as f64, delta) * c * c);
            }
        }
    }
    Ok(sum.value())
}

/// The limit constant `sum over a >= 1 of a^delta / phi(a)^2`, with a
/// certified truncation bound.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct BDeltaEstimate {
    pub value: f64,
    /// Absolute bound on the truncation error of `value`.
    pub tail_bound: f64,
    /// Primes up to this cutoff entered the Euler product exactly.
    pub prime_cutoff: u64,
    /// The zeta factor `zeta(2 - delta)` split off the closed form.
    pub zeta_factor: f64,
}

const B_DELTA_SIEVE_CAP: u64 = 1 << 28;

/// Evaluate `sum of a^delta / phi(a)^2` by its Euler-product form
/// `zeta(2 - delta) * prod over p of (1 + (2p - 1)/(p - 1)^2 * p^(delta - 2))`.
///
/// The identity comes from expanding `(a/phi(a))^2` as a divisor sum
/// over a squarefree-supported multiplicative weight; it turns a series
/// with an `x^(delta - 1)` truncation error into a product whose tail
/// decays like `p^(delta - 2)`, which is what makes tight certificates
/// affordable. The direct partial sum survives in the tests as an oracle.
pub fn b_delta(delta: f64, tail_epsilon: f64) -> Result<BDeltaEstimate> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::InvalidArgument(alloc::format!(
            "delta must lie strictly between 0 and 1, got {delta}"
        )));
    }
    if !(tail_epsilon > 0.0 && tail_epsilon < 1.0) {
        return Err(Error::InvalidArgument(alloc::format!(
            "tail_epsilon must lie in (0, 1), got {tail_epsilon}"
        )));
    }
    let zeta_factor = zeta_em(2.0 - delta)?;
    // First pass fixes the scale, second pass certifies. The local factor
    // is below 1 + 2.1 * p^(delta - 3) from p = 37 on, so the log-tail
    // past P is below 2.1 * P^(delta - 2)/(2 - delta).
    let mut cutoff = 100_000u64;
    loop {
        let value = zeta_factor * local_product(delta, cutoff);
        let tail_log = 2.1 * libm::pow(cutoff as f64, delta - 2.0) / (2.0 - delta);
        let tail_bound = value * tail_log * 1.05;
        if tail_bound <= tail_epsilon {
            return Ok(BDeltaEstimate { value, tail_bound, prime_cutoff: cutoff, zeta_factor });
        }
        // Solve the tail bound for the required cutoff, with headroom.
        let needed_log = tail_epsilon / (value * 1.10);
        let required = libm::pow(needed_log * (2.0 - delta) / 2.1, 1.0 / (delta - 2.0));
        if !(required.is_finite()) || required > B_DELTA_SIEVE_CAP as f64 {
            return Err(Error::TailNotCertifiable {
                requested: tail_epsilon,
                bound: B_DELTA_SIEVE_CAP,
            });
        }
        cutoff = (libm::ceil(required) as u64).max(cutoff * 2);
    }
}

fn local_product(delta: f64, cutoff: u64) -> f64 {
    let mut product = 1.0f64;
    for_each_prime(cutoff, |p| {
        let pf = p as f64;
        let h = (2.0 * pf - 1.0) / ((pf - 1.0) * (pf - 1.0));
        product *= 1.0 + h * libm::pow(pf, delta - 2.0);
    });
    product
}
