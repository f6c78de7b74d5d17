use alloc::{vec, vec::Vec};

use crate::error::{Error, Result};

const SEGMENT: usize = 1 << 18;

/// Primes and smallest prime factors up to a fixed limit.
///
/// The factor table stores one `u32` per integer, so the hard cap on
/// `limit` is `u32::MAX`; memory is the practical cap before that
/// (4 bytes per integer: a limit of 1e8 allocates ~400 MB).
pub struct PrimeTable {
    limit: u64,
    primes: Vec<u64>,
    spf: Vec<u32>,
}

impl PrimeTable {
    /// Segmented sieve filling the smallest-prime-factor table.
    ///
    /// Within each segment the marking primes run in increasing order and
    /// only unmarked entries are written, so `spf[n]` ends up as the
    /// smallest prime factor of `n`.
    pub fn sieve(limit: u64) -> Result<Self> {
        if !(2..=u32::MAX as u64).contains(&limit) {
            return Err(Error::SieveLimit(limit));
        }
        let n = limit as usize;
        let mut spf = vec![0u32; n + 1];

        // Base primes up to sqrt(limit) by a plain boolean sieve.
        let root = isqrt(limit) as usize;
        let mut is_comp = vec![false; root + 1];
        let mut base: Vec<usize> = Vec::new();
        for p in 2..=root {
            if !is_comp[p] {
                base.push(p);
                let mut m = p * p;
                while m <= root {
                    is_comp[m] = true;
                    m += p;
                }
            }
        }

        let mut lo = 2usize;
        while lo <= n {
            let hi = (lo + SEGMENT - 1).min(n);
            for &p in &base {
                if p * p > hi {
                    break;
                }
                let mut m = (p * p).max((lo + p - 1) / p * p);
                while m <= hi {
                    if spf[m] == 0 {
                        spf[m] = p as u32;
                    }
                    m += p;
                }
            }
            lo = hi + 1;
        }

        let mut primes = Vec::new();
        for m in 2..=n {
            if spf[m] == 0 {
                spf[m] = m as u32;
                primes.push(m as u64);
            }
        }
        Ok(PrimeTable { limit, primes, spf })
    }

    pub fn limit(&self) -> u64 {
        self.limit
    }

    /// All primes up to the limit, in increasing order.
    pub fn primes(&self) -> &[u64] {
        &self.primes
    }

    pub fn prime_count(&self) -> usize {
        self.primes.len()
    }

    pub fn is_prime(&self, n: u64) -> bool {
        debug_assert!(n <= self.limit);
        n >= 2 && self.spf[n as usize] as u64 == n
    }

    pub fn smallest_prime_factor(&self, n: u64) -> Result<u64> {
        self.check(n, "n")?;
        if n < 2 {
            return Err(Error::InvalidArgument(alloc::format!(
                "smallest prime factor undefined for {n}"
            )));
        }
        Ok(self.spf[n as usize] as u64)
    }

    fn check(&self, n: u64, what: &'static str) -> Result<()> {
        if n > self.limit {
            return Err(Error::AboveLimit { what, value: n, limit: self.limit });
        }
        Ok(())
    }

    /// Lazy factor iterator; yields `(p, e)` with `p` increasing.
    /// `n` must be within the table limit. `n = 1` yields nothing.
    #[inline]
    pub fn prime_factors(&self, n: u64) -> SpfFactors<'_> {
        debug_assert!(n >= 1 && n <= self.limit);
        SpfFactors { spf: &self.spf, n: n as u32 }
    }

    pub fn factor(&self, n: u64) -> Result<Factorization> {
        self.check(n, "n")?;
        if n == 0 {
            return Err(Error::InvalidArgument(alloc::format!("cannot factor {n}")));
        }
        Ok(Factorization { n, factors: self.prime_factors(n).collect() })
    }
}

/// Iterator over `(prime, exponent)` pairs from a smallest-prime-factor
/// table; allocation-free so bulk loops can factor every integer in range.
pub struct SpfFactors<'a> {
    spf: &'a [u32],
    n: u32,
}

impl Iterator for SpfFactors<'_> {
    type Item = (u64, u32);

    #[inline]
    fn next(&mut self) -> Option<(u64, u32)> {
        if self.n <= 1 {
            return None;
        }
        let p = self.spf[self.n as usize];
        let mut e = 0u32;
        while self.n % p == 0 {
            self.n /= p;
            e += 1;
        }
        Some((p as u64, e))
    }
}

/// A positive integer with its prime factorization, primes increasing.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Factorization {
    n: u64,
    factors: Vec<(u64, u32)>,
}

impl Factorization {
    /// Build directly from trial division; independent of any sieve, and
    /// valid for any `n >= 1` (used for small inputs and as a cross-check).
    pub fn trial_division(n: u64) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidArgument(alloc::format!("cannot factor {n}")));
        }
        let mut m = n;
        let mut factors = Vec::new();
        let mut p = 2u64;
        while p.saturating_mul(p) <= m {
            if m % p == 0 {
                let mut e = 0;
                while m % p == 0 {
                    m /= p;
                    e += 1;
                }
                factors.push((p, e));
            }
            p += if p == 2 { 1 } else { 2 };
        }
        if m > 1 {
            factors.push((m, 1));
        }
        Ok(Factorization { n, factors })
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    pub fn factors(&self) -> &[(u64, u32)] {
        &self.factors
    }

    pub fn distinct_primes(&self) -> impl Iterator<Item = u64> + '_ {
        self.factors.iter().map(|&(p, _)| p)
    }

    /// Exponent of `p` in `n`.
    pub fn nu(&self, p: u64) -> u32 {
        self.factors.iter().find(|&&(q, _)| q == p).map_or(0, |&(_, e)| e)
    }

    /// Product of the distinct prime factors; 1 for `n = 1`.
    pub fn radical(&self) -> u64 {
        self.factors.iter().map(|&(p, _)| p).product()
    }

    pub fn euler_phi(&self) -> u64 {
        let mut phi = self.n;
        for &(p, _) in &self.factors {
            phi = phi / p * (p - 1);
        }
        phi
    }

    pub fn moebius(&self) -> i32 {
        if self.factors.iter().any(|&(_, e)| e > 1) {
            0
        } else if self.factors.len() % 2 == 0 {
            1
        } else {
            -1
        }
    }

    pub fn is_squarefree(&self) -> bool {
        self.factors.iter().all(|&(_, e)| e == 1)
    }

    pub fn divisor_count(&self) -> u64 {
        self.factors.iter().map(|&(_, e)| (e + 1) as u64).product()
    }

    /// `Some((p, j))` iff `n = p^j` with `j >= 1`.
    pub fn prime_power(&self) -> Option<(u64, u32)> {
        match self.factors.as_slice() {
            [(p, e)] => Some((*p, *e)),
            _ => None,
        }
    }

    /// Normalized von Mangoldt weight: `1/j` when `n = p^j`, else 0
    /// (0 for `n = 1` as well).
    pub fn lambda_prime(&self) -> f64 {
        match self.prime_power() {
            Some((_, j)) => 1.0 / j as f64,
            None => 0.0,
        }
    }

    /// Visit every divisor of `n`, in no particular order.
    pub fn for_each_divisor<F: FnMut(u64)>(&self, mut f: F) {
        fn walk<F: FnMut(u64)>(factors: &[(u64, u32)], i: usize, d: u64, f: &mut F) {
            if i == factors.len() {
                f(d);
                return;
            }
            let (p, e) = factors[i];
            let mut d = d;
            for k in 0..=e {
                walk(factors, i + 1, d, f);
                if k < e {
                    d *= p;
                }
            }
        }
        walk(&self.factors, 0, 1, &mut f);
    }
}

pub(crate) fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

fn isqrt(n: u64) -> u64 {
    let mut r = libm::sqrt(n as f64) as u64;
    while r * r > n {
        r -= 1;
    }
    while (r + 1) * (r + 1) <= n {
        r += 1;
    }
    r
}

#[inline]
fn mulmod(a: u64, b: u64, m: u64) -> u64 {
    (a as u128 * b as u128 % m as u128) as u64
}

fn powmod(mut base: u64, mut exp: u64, m: u64) -> u64 {
    let mut acc = 1u64;
    base %= m;
    while exp > 0 {
        if exp & 1 == 1 {
            acc = mulmod(acc, base, m);
        }
        base = mulmod(base, base, m);
        exp >>= 1;
    }
    acc
}

/// Deterministic Miller-Rabin, valid for the full `u64` range
/// (witness set due to Sinclair; verified exhaustively below 2^64).
pub fn is_prime_u64(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    for p in [2u64, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37] {
        if n % p == 0 {
            return n == p;
        }
    }
    let s = (n - 1).trailing_zeros();
    let d = (n - 1) >> s;
    'witness: for a in [2u64, 325, 9375, 28178, 450775, 9780504, 1795265022] {
        let a = a % n;
        if a == 0 {
            continue;
        }
        let mut x = powmod(a, d, n);
        if x == 1 || x == n - 1 {
            continue;
        }
        for _ in 1..s {
            x = mulmod(x, x, n);
            if x == n - 1 {
                continue 'witness;
            }
        }
        return false;
    }
    true
}

/// Visit every prime `<= limit` in increasing order without materializing
/// a factor table (segmented boolean sieve; ~1 MB of scratch).
pub fn for_each_prime<F: FnMut(u64)>(limit: u64, mut f: F) {
    if limit < 2 {
        return;
    }
    let root = isqrt(limit) as usize;
    let mut is_comp = vec![false; root + 1];
    let mut base: Vec<usize> = Vec::new();
    for p in 2..=root {
        if !is_comp[p] {
            base.push(p);
            let mut m = p * p;
            while m <= root {
                is_comp[m] = true;
                m += p;
            }
        }
    }
    const SEG: usize = 1 << 20;
    let mut comp = vec![false; SEG];
    let mut lo = 2u64;
    while lo <= limit {
        let hi = (lo + SEG as u64 - 1).min(limit);
        let len = (hi - lo + 1) as usize;
        comp[..len].fill(false);
        for &p in &base {
            let p64 = p as u64;
            if p64 * p64 > hi {
                break;
            }
            let mut m = (p64 * p64).max((lo + p64 - 1) / p64 * p64);
            while m <= hi {
                comp[(m - lo) as usize] = true;
                m += p64;
            }
        }
        for i in 0..len {
            if !comp[i] {
                f(lo + i as u64);
            }
        }
        lo = hi + 1;
    }
}

/// Offset logarithmic integral `∫_2^x dt / log t`.
///
/// Adaptive Simpson on the substituted integrand `e^u / u` over
/// `[log 2, log x]`; relative error well below 1e-9 over the supported
/// range. Deterministic: the refinement pattern depends only on `x`.
pub fn log_integral(x: f64) -> Result<f64> {
    if !(x >= 2.0) || !x.is_finite() {
        return Err(Error::InvalidArgument(alloc::format!(
            "log_integral domain is x >= 2, got {x}"
        )));
    }
    Ok(li_segment(libm::log(2.0), libm::log(x)))
}

/// Values of [`log_integral`] on an increasing grid, integrating each gap
/// once instead of restarting from 2.
pub fn log_integral_grid(xs: &[f64]) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(xs.len());
    let mut prev_x = 2.0f64;
    let mut acc = 0.0f64;
    for &x in xs {
        if !(x >= prev_x) || !x.is_finite() {
            return Err(Error::InvalidArgument(alloc::format!(
                "log_integral_grid needs an increasing grid with x >= 2, got {x}"
            )));
        }
        acc += li_segment(libm::log(prev_x), libm::log(x));
        out.push(acc);
        prev_x = x;
    }
    Ok(out)
}

fn li_segment(a: f64, b: f64) -> f64 {
    if b <= a {
        return 0.0;
    }
    #[inline]
    fn g(u: f64) -> f64 {
        libm::exp(u) / u
    }
    fn simpson(a: f64, fa: f64, b: f64, fb: f64, fm: f64, whole: f64, tol: f64, depth: u32) -> f64 {
        let m = 0.5 * (a + b);
        let lm = 0.5 * (a + m);
        let rm = 0.5 * (m + b);
        let flm = g(lm);
        let frm = g(rm);
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        let split = left + right;
        if depth == 0 || libm::fabs(split - whole) <= 15.0 * tol {
            return split + (split - whole) / 15.0;
        }
        simpson(a, fa, m, fm, flm, left, 0.5 * tol, depth - 1)
            + simpson(m, fm, b, fb, frm, right, 0.5 * tol, depth - 1)
    }
    let fa = g(a);
    let fb = g(b);
    let fm = g(0.5 * (a + b));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    let tol = 1e-13 * libm::fabs(whole) + 1e-300;
    simpson(a, fa, b, fb, fm, whole, tol, 48)
}
