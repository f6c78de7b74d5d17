use alloc::boxed::Box;
use alloc::collections::BTreeSet;
use alloc::string::ToString;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::ledger::{CheckpointLedger, LedgerBuilder};
use crate::primes::{is_prime_u64, Factorization, PrimeTable};
use crate::random;
use crate::stream::{stream_u64, unit_f64};

/// Description of a set of primes.
///
/// `DeltaSample` is a deterministic pseudo-random set: membership of `p`
/// is decided by hashing `(seed, p)`, so it is a fixed set once the seed
/// is chosen, and queries are order-independent.
#[derive(Debug, Clone, PartialEq)]
pub enum SetKind {
    All,
    Explicit(BTreeSet<u64>),
    Congruence { modulus: u64, residues: BTreeSet<u64> },
    Complement(Box<SetKind>),
    DeltaSample { delta: f64, seed: u64 },
}

/// A prime set with a bound up to which membership may be queried.
///
/// The bound makes downstream truncation errors honest: routines that
/// need membership beyond it fail loudly instead of extrapolating.
#[derive(Debug, Clone, PartialEq)]
pub struct PrimeSet {
    kind: SetKind,
    bound: u64,
}

impl PrimeSet {
    pub fn new(kind: SetKind, bound: u64) -> Result<Self> {
        if bound < 2 {
            return Err(Error::InvalidArgument(alloc::format!(
                "set bound must be at least 2, got {bound}"
            )));
        }
        validate_kind(&kind, bound)?;
        Ok(PrimeSet { kind, bound })
    }

    pub fn kind(&self) -> &SetKind {
        &self.kind
    }

    pub fn bound(&self) -> u64 {
        self.bound
    }

    /// Membership test. `p` must be prime and within the bound.
    pub fn contains(&self, p: u64) -> Result<bool> {
        if !is_prime_u64(p) {
            return Err(Error::NotPrime(p));
        }
        if p > self.bound {
            return Err(Error::AboveSetBound { prime: p, bound: self.bound });
        }
        Ok(member(&self.kind, p))
    }
}

/// Membership without the primality and bound guards, for crate-internal
/// loops that have already established both.
pub(crate) fn member(kind: &SetKind, p: u64) -> bool {
    match kind {
        SetKind::All => true,
        SetKind::Explicit(s) => s.contains(&p),
        SetKind::Congruence { modulus, residues } => residues.contains(&(p % modulus)),
        SetKind::Complement(inner) => !member(inner, p),
        SetKind::DeltaSample { delta, seed } => {
            unit_f64(stream_u64(*seed, p)) < random::inclusion_probability(p, *delta)
        }
    }
}

fn validate_kind(kind: &SetKind, bound: u64) -> Result<()> {
    match kind {
        SetKind::All => Ok(()),
        SetKind::Explicit(s) => {
            for &p in s {
                if !is_prime_u64(p) {
                    return Err(Error::SetSpec { token: p.to_string(), reason: "not a prime" });
                }
                if p > bound {
                    return Err(Error::AboveSetBound { prime: p, bound });
                }
            }
            Ok(())
        }
        SetKind::Congruence { modulus, residues } => {
            if *modulus == 0 {
                return Err(Error::SetSpec {
                    token: modulus.to_string(),
                    reason: "modulus must be positive",
                });
            }
            if residues.is_empty() {
                return Err(Error::SetSpec {
                    token: modulus.to_string(),
                    reason: "needs at least one residue",
                });
            }
            for &r in residues {
                if r >= *modulus {
                    return Err(Error::SetSpec {
                        token: r.to_string(),
                        reason: "residue must be smaller than the modulus",
                    });
                }
            }
            Ok(())
        }
        SetKind::Complement(inner) => validate_kind(inner, bound),
        SetKind::DeltaSample { delta, .. } => {
            if !(*delta > 0.0 && *delta < 1.0) {
                return Err(Error::SetSpec {
                    token: alloc::format!("{delta}"),
                    reason: "delta must lie strictly between 0 and 1",
                });
            }
            Ok(())
        }
    }
}

/// Parse a set description.
///
/// Grammar:
///
/// ```text
/// all
/// none
/// explicit:p1,p2,...
/// mod:m:r1,r2,...
/// complement:(<spec>)
/// delta:<delta>:<seed>
/// ```
pub fn parse_set_spec(spec: &str, bound: u64) -> Result<PrimeSet> {
    PrimeSet::new(parse_kind(spec.trim())?, bound)
}

fn parse_kind(spec: &str) -> Result<SetKind> {
    if spec == "all" {
        return Ok(SetKind::All);
    }
    if spec == "none" {
        return Ok(SetKind::Explicit(BTreeSet::new()));
    }
    if let Some(rest) = spec.strip_prefix("explicit:") {
        if rest.is_empty() {
            return Err(Error::SetSpec {
                token: spec.into(),
                reason: "needs at least one prime (use `none` for the empty set)",
            });
        }
        let mut s = BTreeSet::new();
        for tok in rest.split(',') {
            let p = parse_u64(tok)?;
            s.insert(p);
        }
        return Ok(SetKind::Explicit(s));
    }
    if let Some(rest) = spec.strip_prefix("mod:") {
        let (m_tok, r_toks) = rest.split_once(':').ok_or(Error::SetSpec {
            token: spec.into(),
            reason: "expected mod:<modulus>:<residues>",
        })?;
        let modulus = parse_u64(m_tok)?;
        let mut residues = BTreeSet::new();
        for tok in r_toks.split(',') {
            residues.insert(parse_u64(tok)?);
        }
        return Ok(SetKind::Congruence { modulus, residues });
    }
    if let Some(rest) = spec.strip_prefix("complement:") {
        let inner = rest
            .strip_prefix('(')
            .and_then(|s| s.strip_suffix(')'))
            .ok_or(Error::SetSpec {
                token: spec.into(),
                reason: "expected complement:(<spec>)",
            })?;
        return Ok(SetKind::Complement(Box::new(parse_kind(inner)?)));
    }
    if let Some(rest) = spec.strip_prefix("delta:") {
        let (d_tok, seed_tok) = rest.split_once(':').ok_or(Error::SetSpec {
            token: spec.into(),
            reason: "expected delta:<delta>:<seed>",
        })?;
        let d_tok = d_tok.trim();
        let delta: f64 = d_tok.parse().map_err(|_| Error::SetSpec {
            token: d_tok.into(),
            reason: "not a real number",
        })?;
        if !(delta > 0.0 && delta < 1.0) {
            return Err(Error::SetSpec {
                token: d_tok.into(),
                reason: "delta must lie strictly between 0 and 1",
            });
        }
        let seed = parse_u64(seed_tok)?;
        return Ok(SetKind::DeltaSample { delta, seed });
    }
    Err(Error::SetSpec { token: spec.into(), reason: "unknown set form" })
}

fn parse_u64(tok: &str) -> Result<u64> {
    let tok = tok.trim();
    tok.parse().map_err(|_| Error::SetSpec { token: tok.into(), reason: "not an integer" })
}

/// If every member prime is `<= B` for a provable `B`, return one such
/// bound. `None` means "possibly unbounded", not "provably unbounded".
pub(crate) fn members_bounded_above(kind: &SetKind) -> Option<u64> {
    match kind {
        SetKind::All => None,
        SetKind::Explicit(s) => Some(s.iter().max().copied().unwrap_or(1)),
        SetKind::Congruence { modulus, residues } => {
            // If no residue class coprime to the modulus is included, the
            // only possible members divide the modulus.
            if unit_residues(*modulus).any(|u| residues.contains(&u)) {
                None
            } else {
                Some(*modulus)
            }
        }
        SetKind::Complement(inner) => nonmembers_bounded_above(inner),
        SetKind::DeltaSample { .. } => None,
    }
}

/// Dual of [`members_bounded_above`]: a provable bound above which every
/// prime is a member.
pub(crate) fn nonmembers_bounded_above(kind: &SetKind) -> Option<u64> {
    match kind {
        SetKind::All => Some(1),
        SetKind::Explicit(_) => None,
        SetKind::Congruence { modulus, residues } => {
            // Covering every coprime residue class leaves only divisors of
            // the modulus outside.
            if unit_residues(*modulus).all(|u| residues.contains(&u)) {
                Some(*modulus)
            } else {
                None
            }
        }
        SetKind::Complement(inner) => members_bounded_above(inner),
        SetKind::DeltaSample { .. } => None,
    }
}

fn unit_residues(modulus: u64) -> impl Iterator<Item = u64> {
    (0..modulus).filter(move |&r| crate::primes::gcd(r, modulus) == 1)
}

/// Bitmap of set members up to the bound, for membership in bulk loops.
///
/// Agrees with [`PrimeSet::contains`] on every prime within the bound;
/// composites and 0, 1 simply read as non-members.
pub struct MaterializedSet {
    bound: u64,
    bits: Vec<u64>,
}

impl MaterializedSet {
    pub fn build(set: &PrimeSet, table: &PrimeTable) -> Result<Self> {
        let bound = set.bound();
        if bound > table.limit() {
            return Err(Error::AboveLimit { what: "set bound", value: bound, limit: table.limit() });
        }
        let mut bits = vec![0u64; (bound as usize >> 6) + 1];
        for &p in table.primes() {
            if p > bound {
                break;
            }
            if member(set.kind(), p) {
                bits[(p >> 6) as usize] |= 1 << (p & 63);
            }
        }
        Ok(MaterializedSet { bound, bits })
    }

    pub fn bound(&self) -> u64 {
        self.bound
    }

    #[inline]
    pub fn contains(&self, p: u64) -> bool {
        p <= self.bound && self.bits[(p >> 6) as usize] >> (p & 63) & 1 == 1
    }

    pub fn member_count(&self) -> usize {
        self.bits.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn members(&self) -> impl Iterator<Item = u64> + '_ {
        (2..=self.bound).filter(move |&p| self.contains(p))
    }
}

/// Largest divisor of `n` supported on member primes; 1 if none divide.
pub fn s_part<F: Fn(u64) -> bool>(fact: &Factorization, member: F) -> u64 {
    fact.factors()
        .iter()
        .filter(|&&(p, _)| member(p))
        .map(|&(p, e)| p.pow(e))
        .product()
}

/// Product of the distinct member primes dividing `n`; 1 if none divide.
pub fn s_radical<F: Fn(u64) -> bool>(fact: &Factorization, member: F) -> u64 {
    fact.factors().iter().filter(|&&(p, _)| member(p)).map(|&(p, _)| p).product()
}

/// Split of `n` into its member-supported part and the rest.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct SPartDecomposition {
    pub n: u64,
    /// Member-supported part; `n = s_part * co_part`.
    pub s_part: u64,
    pub co_part: u64,
    /// Product of the distinct member primes dividing `n`.
    pub s_radical: u64,
}

pub fn s_decompose(set: &MaterializedSet, fact: &Factorization) -> SPartDecomposition {
    let sp = s_part(fact, |p| set.contains(p));
    SPartDecomposition {
        n: fact.n(),
        s_part: sp,
        co_part: fact.n() / sp,
        s_radical: s_radical(fact, |p| set.contains(p)),
    }
}

/// Count integers `m <= x` all of whose prime factors are members
/// (including `m = 1`), with checkpoints at halving cutoffs.
pub fn count_s_numbers(
    set: &MaterializedSet,
    table: &PrimeTable,
    x: u64,
) -> Result<CheckpointLedger> {
    if x > table.limit() {
        return Err(Error::AboveLimit { what: "x", value: x, limit: table.limit() });
    }
    if x > set.bound() {
        return Err(Error::AboveLimit { what: "x", value: x, limit: set.bound() });
    }
    let mut builder = LedgerBuilder::geometric("integers with all prime factors in the set", x)?;
    builder.add(1, 1.0);
    for m in 2..=x {
        if table.prime_factors(m).all(|(p, _)| set.contains(p)) {
            builder.add(m, 1.0);
        }
    }
    Ok(builder.finish())
}
