use alloc::collections::BTreeMap;
use alloc::string::ToString;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::kahan::Kahan;
use crate::ledger::{CheckpointLedger, LedgerBuilder};
use crate::primes::{for_each_prime, is_prime_u64, log_integral_grid, Factorization, PrimeTable};
use crate::sets::{self, PrimeSet};

/// A cap on prime exponents: `n` is admissible when `nu_p(n) <= f(p)`
/// for every prime `p`.
///
/// `Support` caps by membership: exponent 1 on member primes, 0 outside.
/// The prime 2 always carries exponent 1 there, because the intended use
/// is shifted primes `p - 1`, which are even for every `p > 2`.
#[derive(Debug, Clone, PartialEq)]
pub enum ExponentBound {
    Constant { default: u32, exceptions: BTreeMap<u64, u32> },
    Support(PrimeSet),
}

impl ExponentBound {
    pub fn constant(default: u32) -> Self {
        ExponentBound::Constant { default, exceptions: BTreeMap::new() }
    }

    /// The cap at `p`. Fails only when a support query is out of range.
    pub fn value(&self, p: u64) -> Result<u32> {
        match self {
            ExponentBound::Constant { default, exceptions } => {
                Ok(exceptions.get(&p).copied().unwrap_or(*default))
            }
            ExponentBound::Support(set) => {
                if p == 2 {
                    Ok(1)
                } else {
                    Ok(set.contains(p)? as u32)
                }
            }
        }
    }
}

/// Parse an exponent-bound description.
///
/// Grammar:
///
/// ```text
/// const:<k>
/// const:<k>;except:p1=e1,p2=e2,...
/// support:(<set-spec>)
/// ```
pub fn parse_f_spec(spec: &str, bound: u64) -> Result<ExponentBound> {
    let spec = spec.trim();
    if let Some(rest) = spec.strip_prefix("support:") {
        let inner = rest
            .strip_prefix('(')
            .and_then(|s| s.strip_suffix(')'))
            .ok_or(Error::FSpec { token: spec.into(), reason: "expected support:(<set-spec>)" })?;
        return Ok(ExponentBound::Support(sets::parse_set_spec(inner, bound)?));
    }
    if let Some(rest) = spec.strip_prefix("const:") {
        let mut parts = rest.split(';');
        let k_tok = parts.next().unwrap_or("").trim();
        let default: u32 = k_tok
            .parse()
            .map_err(|_| Error::FSpec { token: k_tok.into(), reason: "not an exponent" })?;
        let mut exceptions = BTreeMap::new();
        for part in parts {
            let entries = part.strip_prefix("except:").ok_or(Error::FSpec {
                token: part.into(),
                reason: "expected except:p1=e1,...",
            })?;
            for entry in entries.split(',') {
                let entry = entry.trim();
                let (p_tok, e_tok) = entry.split_once('=').ok_or(Error::FSpec {
                    token: entry.into(),
                    reason: "expected <prime>=<exponent>",
                })?;
                let p: u64 = p_tok.trim().parse().map_err(|_| Error::FSpec {
                    token: p_tok.trim().into(),
                    reason: "not an integer",
                })?;
                if !is_prime_u64(p) {
                    return Err(Error::FSpec { token: p.to_string(), reason: "not a prime" });
                }
                let e: u32 = e_tok.trim().parse().map_err(|_| Error::FSpec {
                    token: e_tok.trim().into(),
                    reason: "not an exponent",
                })?;
                exceptions.insert(p, e);
            }
        }
        return Ok(ExponentBound::Constant { default, exceptions });
    }
    Err(Error::FSpec { token: spec.into(), reason: "unknown exponent-bound form" })
}

/// Whether every prime exponent of `n` respects the cap.
pub fn is_f_bounded(fact: &Factorization, f: &ExponentBound) -> Result<bool> {
    for &(p, e) in fact.factors() {
        if e > f.value(p)? {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Inclusion-exclusion detector of the same property: sums
/// `(-1)^|A|` over subsets `A` of the prime divisors whose exponent
/// exceeds the cap. Always 0 or 1; an independent route used to
/// cross-check [`is_f_bounded`].
pub fn mu_f(fact: &Factorization, f: &ExponentBound) -> Result<u64> {
    let mut exceeds = Vec::with_capacity(fact.factors().len());
    for &(p, e) in fact.factors() {
        exceeds.push(e >= f.value(p)? + 1);
    }
    let k = exceeds.len();
    let mut total: i64 = 0;
    for mask in 0u32..(1 << k) {
        let mut include = true;
        for (i, &x) in exceeds.iter().enumerate() {
            if mask >> i & 1 == 1 && !x {
                include = false;
                break;
            }
        }
        if include {
            total += if mask.count_ones() % 2 == 0 { 1 } else { -1 };
        }
    }
    debug_assert!(total == 0 || total == 1);
    Ok(total.max(0) as u64)
}

/// Count primes `p <= x` whose shifted value `p - 1` respects the cap,
/// with checkpoints at halving cutoffs. `p = 2` always qualifies.
pub fn count_u_f(table: &PrimeTable, x: u64, f: &ExponentBound) -> Result<CheckpointLedger> {
    let builder = LedgerBuilder::geometric("primes with exponent-capped shifted factorization", x)?;
    count_into(table, x, f, builder)
}

fn count_into(
    table: &PrimeTable,
    x: u64,
    f: &ExponentBound,
    mut builder: LedgerBuilder,
) -> Result<CheckpointLedger> {
    if x > table.limit() {
        return Err(Error::AboveLimit { what: "x", value: x, limit: table.limit() });
    }
    for &p in table.primes() {
        if p > x {
            break;
        }
        if is_f_bounded(&table.factor(p - 1)?, f)? {
            builder.add(p, 1.0);
        }
    }
    Ok(builder.finish())
}

/// Density constant with a certified truncation error.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct LambdaEstimate {
    pub value: f64,
    /// Absolute bound on the truncation error of `value`.
    pub tail_bound: f64,
    /// Primes up to this cutoff entered the product exactly.
    pub cutoff: u64,
    /// Caps with `f(2) = 0` force the constant to exact zero.
    pub zero_at_two: bool,
}

const LAMBDA_SIEVE_CAP: u64 = 1 << 28;

/// The density of primes with exponent-capped shifted factorization:
/// the product over primes of `1 - 1/((p-1) p^f(p))`.
///
/// The product is evaluated exactly up to a cutoff chosen so that the
/// remaining factors move the value by less than `tail_epsilon`; the
/// classical Chebyshev-type bound `pi(t) < 1.26 t / log t` controls the
/// tail. That needs `f(p)` to be at least 1 for every prime past the
/// cutoff, hence:
///
/// - caps with default 0 (an infinite zero set) are rejected as not thin,
/// - support caps need a provable bound above which all primes are
///   members, within the set's queryable range,
/// - `f(2) = 0` short-circuits to an exact zero (the factor at 2
///   vanishes).
pub fn lambda_f(f: &ExponentBound, tail_epsilon: f64) -> Result<LambdaEstimate> {
    if !(tail_epsilon > 0.0 && tail_epsilon < 1.0) {
        return Err(Error::InvalidArgument(alloc::format!(
            "tail_epsilon must lie in (0, 1), got {tail_epsilon}"
        )));
    }
    if f.value(2)? == 0 {
        return Ok(LambdaEstimate { value: 0.0, tail_bound: 0.0, cutoff: 2, zero_at_two: true });
    }
    // Exponent applying to every prime beyond some structural bound `b`.
    let (d_tail, b) = match f {
        ExponentBound::Constant { default: 0, .. } => return Err(Error::NotThick),
        ExponentBound::Constant { default, .. } => (*default, 2),
        ExponentBound::Support(set) => {
            let b = sets::nonmembers_bounded_above(set.kind()).ok_or(Error::NotThick)?;
            if b > set.bound() {
                return Err(Error::TailNotCertifiable {
                    requested: tail_epsilon,
                    bound: set.bound(),
                });
            }
            (1, b)
        }
    };
    let mut cutoff = 64u64.max(b);
    while 1.05 * tail_u_bound(cutoff as f64, d_tail as f64) > tail_epsilon {
        cutoff *= 2;
        if cutoff > LAMBDA_SIEVE_CAP {
            return Err(Error::TailNotCertifiable {
                requested: tail_epsilon,
                bound: LAMBDA_SIEVE_CAP,
            });
        }
    }

    let mut value = 1.0f64;
    match f {
        ExponentBound::Constant { default, exceptions } => {
            for_each_prime(cutoff, |p| {
                let e = exceptions.get(&p).copied().unwrap_or(*default);
                value *= 1.0 - recip_weight(p, e);
            });
            // Exceptions past the cutoff: swap the assumed factor for the
            // exact one; the tail bound still covers all other primes.
            for (&p, &e) in exceptions.range(cutoff + 1..) {
                value *= (1.0 - recip_weight(p, e)) / (1.0 - recip_weight(p, *default));
            }
        }
        ExponentBound::Support(set) => {
            let kind = set.kind();
            for_each_prime(cutoff, |p| {
                let e = u32::from(p == 2 || p > b || sets::member(kind, p));
                value *= 1.0 - recip_weight(p, e);
            });
        }
    }
    let tail_bound = 1.05 * tail_u_bound(cutoff as f64, d_tail as f64) * value;
    Ok(LambdaEstimate { value, tail_bound, cutoff, zero_at_two: false })
}

/// `1 / ((p - 1) p^e)`.
fn recip_weight(p: u64, e: u32) -> f64 {
    1.0 / ((p - 1) as f64 * libm::pow(p as f64, e as f64))
}

/// Upper bound on `sum over primes p > p0 of 1/((p-1) p^d)`, valid for
/// `p0 >= 64` and `d >= 1`.
fn tail_u_bound(p0: f64, d: f64) -> f64 {
    1.02 * 1.26 * (d + 1.0) / (d * libm::log(p0)) * libm::pow(p0, -d)
}

/// One cutoff of a count-versus-prediction comparison.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct MirskyRow {
    pub x: u64,
    pub count: u64,
    pub li: f64,
    /// Predicted count: the density constant times the integral.
    pub lambda_li: f64,
    pub abs_dev: f64,
    pub rel_dev: f64,
}

/// Counts at decade cutoffs against the predicted density.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct MirskyReport {
    pub lambda: LambdaEstimate,
    pub rows: Vec<MirskyRow>,
}

pub fn mirsky_report(
    table: &PrimeTable,
    x: u64,
    f: &ExponentBound,
    tail_epsilon: f64,
) -> Result<MirskyReport> {
    if x < 2 {
        return Err(Error::InvalidArgument(alloc::format!("x must be at least 2, got {x}")));
    }
    let lambda = lambda_f(f, tail_epsilon)?;
    let mut thresholds = Vec::new();
    let mut t = 10u64;
    while t < x {
        thresholds.push(t);
        t = t.saturating_mul(10);
    }
    thresholds.push(x);
    let ledger = count_into(
        table,
        x,
        f,
        LedgerBuilder::at_thresholds("counts at decade cutoffs", thresholds)?,
    )?;
    let xs: Vec<f64> = ledger.checkpoints().iter().map(|c| c.x as f64).collect();
    let lis = log_integral_grid(&xs)?;
    let rows = ledger
        .checkpoints()
        .iter()
        .zip(lis)
        .map(|(c, li)| {
            let lambda_li = lambda.value * li;
            let abs_dev = c.a - lambda_li;
            MirskyRow {
                x: c.x,
                count: c.a as u64,
                li,
                lambda_li,
                abs_dev,
                rel_dev: if lambda_li > 0.0 { abs_dev / lambda_li } else { 0.0 },
            }
        })
        .collect();
    Ok(MirskyReport { lambda, rows })
}

/// Harmonic sum over the counted primes, against its predicted
/// `lambda * log log x` growth.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct HarmonicReport {
    pub x: u64,
    pub harmonic_sum: f64,
    pub lambda: f64,
    pub lambda_log_log: f64,
    /// `harmonic_sum - lambda * log log x`; settles toward a constant.
    pub difference: f64,
}

pub fn harmonic_u_f(
    table: &PrimeTable,
    x: u64,
    f: &ExponentBound,
    tail_epsilon: f64,
) -> Result<HarmonicReport> {
    if x < 3 {
        return Err(Error::InvalidArgument(alloc::format!("x must be at least 3, got {x}")));
    }
    if x > table.limit() {
        return Err(Error::AboveLimit { what: "x", value: x, limit: table.limit() });
    }
    let lambda = lambda_f(f, tail_epsilon)?;
    let mut sum = Kahan::new();
    for &p in table.primes() {
        if p > x {
            break;
        }
        if is_f_bounded(&table.factor(p - 1)?, f)? {
            sum.add(1.0 / p as f64);
        }
    }
    let lambda_log_log = lambda.value * libm::log(libm::log(x as f64));
    Ok(HarmonicReport {
        x,
        harmonic_sum: sum.value(),
        lambda: lambda.value,
        lambda_log_log,
        difference: sum.value() - lambda_log_log,
    })
}
