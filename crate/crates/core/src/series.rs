use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::kahan::Kahan;
use crate::ledger::{CheckpointLedger, LedgerBuilder};
use crate::primes::PrimeTable;
use crate::sets::{s_part, s_radical, MaterializedSet, PrimeSet};

/// The two extreme procyclic groups built from a set of primes.
///
/// Both are inverse limits of cyclic groups whose orders are supported on
/// the member primes; they differ in which powers occur.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GroupKind {
    /// Product over member primes of the cyclic group of order `p`:
    /// the smallest choice, every member prime appears to the first power.
    Minimal,
    /// Product over member primes of the additive group of `p`-adic
    /// integers: the largest choice, all member prime powers occur.
    Maximal,
}

/// One coefficient of the logarithmic zeta series: the prime power
/// `n = p^j` together with the member-supported invariants of `n - 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct WeilTerm {
    pub n: u64,
    pub p: u64,
    pub j: u32,
    /// Product of distinct member primes dividing `n - 1`.
    pub s_radical: u64,
    /// Member-supported part of `n - 1`.
    pub s_part: u64,
}

/// All prime powers `n = p^j <= x` with the invariants of `n - 1`,
/// sorted by `n`.
pub fn weil_terms(
    set: &MaterializedSet,
    table: &PrimeTable,
    x: u64,
) -> Result<Vec<WeilTerm>> {
    check_range(set, table, x)?;
    let mut terms = Vec::new();
    for &p in table.primes() {
        if p > x {
            break;
        }
        let mut n = p;
        let mut j = 1u32;
        loop {
            let fact = table.factor(n - 1)?;
            terms.push(WeilTerm {
                n,
                p,
                j,
                s_radical: s_radical(&fact, |q| set.contains(q)),
                s_part: s_part(&fact, |q| set.contains(q)),
            });
            match n.checked_mul(p) {
                Some(m) if m <= x => {
                    n = m;
                    j += 1;
                }
                _ => break,
            }
        }
    }
    terms.sort_unstable_by_key(|t| t.n);
    Ok(terms)
}

/// Number of homomorphisms from the chosen procyclic group into the
/// multiplicative group of the field with `p^j` elements.
///
/// That target is cyclic of order `p^j - 1`, so the count depends only on
/// the member-supported structure of `p^j - 1`: each member prime `q`
/// contributes its full power `q^v` for the maximal group and `q` alone
/// for the minimal one.
pub fn hom_count(
    kind: GroupKind,
    set: &PrimeSet,
    table: &PrimeTable,
    p: u64,
    j: u32,
) -> Result<u64> {
    if j == 0 {
        return Err(Error::InvalidArgument(String::from("field degree j must be positive")));
    }
    if p > table.limit() || !table.is_prime(p) {
        return Err(Error::NotPrime(p));
    }
    let n = p
        .checked_pow(j)
        .filter(|&n| n <= table.limit())
        .ok_or(Error::AboveLimit { what: "p^j", value: p, limit: table.limit() })?;
    let fact = table.factor(n - 1)?;
    let mut acc = 1u64;
    for (q, e) in fact.factors().iter().copied() {
        if set.contains(q)? {
            acc *= match kind {
                GroupKind::Minimal => q,
                GroupKind::Maximal => q.pow(e),
            };
        }
    }
    Ok(acc)
}

/// Truncated logarithm of the zeta function of the chosen group:
/// the sum of `hom(n) * n^-s / j` over prime powers `n = p^j <= x`.
///
/// Also returns the ledger of coefficient partial sums
/// `A(x') = sum of hom(n)/j over n <= x'`, whose growth exponent is the
/// abscissa of convergence of the full series.
pub fn log_weil_partial(
    kind: GroupKind,
    set: &MaterializedSet,
    table: &PrimeTable,
    s: f64,
    x: u64,
) -> Result<(f64, CheckpointLedger)> {
    check_s(s)?;
    let terms = weil_terms(set, table, x)?;
    let description = match kind {
        GroupKind::Minimal => "log zeta coefficients, minimal procyclic group",
        GroupKind::Maximal => "log zeta coefficients, maximal procyclic group",
    };
    let mut builder = LedgerBuilder::geometric(description, x)?;
    let mut total = Kahan::new();
    for t in &terms {
        let hom = match kind {
            GroupKind::Minimal => t.s_radical,
            GroupKind::Maximal => t.s_part,
        } as f64;
        let coeff = hom / t.j as f64;
        builder.add(t.n, coeff);
        total.add(coeff * libm::pow(t.n as f64, -s));
    }
    Ok((total.value(), builder.finish()))
}

/// The same truncated logarithm for the maximal group, computed by a
/// different route: scan every integer `n <= x`, keep prime powers via
/// their factorization, and weight by the member-supported part of
/// `n - 1` over the power. Used to cross-check [`log_weil_partial`].
pub fn log_weil_lambda_form(
    set: &MaterializedSet,
    table: &PrimeTable,
    s: f64,
    x: u64,
) -> Result<f64> {
    check_s(s)?;
    check_range(set, table, x)?;
    let mut total = Kahan::new();
    for n in 2..=x {
        let fact = table.factor(n)?;
        let weight = fact.lambda_prime();
        if weight == 0.0 {
            continue;
        }
        let shifted = table.factor(n - 1)?;
        let part = s_part(&shifted, |q| set.contains(q)) as f64;
        total.add(part * weight * libm::pow(n as f64, -s));
    }
    Ok(total.value())
}

/// Truncated Dirichlet series over integers with all prime factors in
/// the set (`m = 1` included): `sum of m^-s over member-supported m <= x`.
pub fn zeta_s_truncated(
    set: &MaterializedSet,
    table: &PrimeTable,
    s: f64,
    x: u64,
) -> Result<f64> {
    check_s(s)?;
    check_range(set, table, x)?;
    let mut total = Kahan::new();
    total.add(1.0);
    for m in 2..=x {
        if table.prime_factors(m).all(|(p, _)| set.contains(p)) {
            total.add(libm::pow(m as f64, -s));
        }
    }
    Ok(total.value())
}

/// Euler product over member primes `p <= x` of `(1 - p^-s)^-1`.
///
/// Not the same truncation as [`zeta_s_truncated`]: the product also
/// covers member-supported integers above `x` whose prime factors are
/// all `<= x`, so it dominates the sum form.
pub fn zeta_s_euler_truncated(
    set: &MaterializedSet,
    table: &PrimeTable,
    s: f64,
    x: u64,
) -> Result<f64> {
    check_s(s)?;
    check_range(set, table, x)?;
    let mut product = 1.0f64;
    for &p in table.primes() {
        if p > x {
            break;
        }
        if set.contains(p) {
            product /= 1.0 - libm::pow(p as f64, -s);
        }
    }
    Ok(product)
}

/// `sum of m_S * m^-s over all m <= x`, where `m_S` is the
/// member-supported part of `m`. Dominates the truncated log zeta of the
/// maximal group term by term, and is itself dominated by
/// `zeta_S(s-1) * zeta_S'(s)` with `S'` the complementary set.
pub fn s_weighted_sum(
    set: &MaterializedSet,
    table: &PrimeTable,
    s: f64,
    x: u64,
) -> Result<f64> {
    check_s(s)?;
    check_range(set, table, x)?;
    let mut total = Kahan::new();
    total.add(1.0);
    for m in 2..=x {
        let fact = table.factor(m)?;
        let part = s_part(&fact, |p| set.contains(p)) as f64;
        total.add(part * libm::pow(m as f64, -s));
    }
    Ok(total.value())
}

/// Truncated series of `m^-s` over squarefree member-supported `m <= x`;
/// converges to `zeta_S(s) / zeta_S(2s)`.
pub fn mu2_series_truncated(
    set: &MaterializedSet,
    table: &PrimeTable,
    s: f64,
    x: u64,
) -> Result<f64> {
    check_s(s)?;
    check_range(set, table, x)?;
    let mut total = Kahan::new();
    total.add(1.0);
    for m in 2..=x {
        if table.prime_factors(m).all(|(p, e)| e == 1 && set.contains(p)) {
            total.add(libm::pow(m as f64, -s));
        }
    }
    Ok(total.value())
}

/// Riemann zeta for real `s > 1` by Euler-Maclaurin at cutoff 64 with
/// Bernoulli corrections through order 12; full double precision over
/// the range used here (roughly `s <= 50`).
pub fn zeta_em(s: f64) -> Result<f64> {
    if !(s > 1.0) || !s.is_finite() {
        return Err(Error::InvalidArgument(alloc::format!("zeta_em domain is s > 1, got {s}")));
    }
    const N: u64 = 64;
    let nf = N as f64;
    let mut sum = Kahan::new();
    for n in 1..N {
        sum.add(libm::pow(n as f64, -s));
    }
    sum.add(libm::pow(nf, 1.0 - s) / (s - 1.0));
    sum.add(0.5 * libm::pow(nf, -s));
    // B_2, B_4, ..., B_12.
    let bernoulli = [1.0 / 6.0, -1.0 / 30.0, 1.0 / 42.0, -1.0 / 30.0, 5.0 / 66.0, -691.0 / 2730.0];
    let mut rising = 1.0f64; // product of (s + i) for i = 0 .. 2k-2
    let mut factorial = 1.0f64; // (2k)!
    for (k, b) in bernoulli.iter().enumerate() {
        let k = k as f64 + 1.0;
        rising *= if k == 1.0 { s } else { (s + 2.0 * k - 3.0) * (s + 2.0 * k - 2.0) };
        factorial *= (2.0 * k - 1.0) * (2.0 * k);
        sum.add(b / factorial * rising * libm::pow(nf, -s - 2.0 * k + 1.0));
    }
    Ok(sum.value())
}

fn check_s(s: f64) -> Result<()> {
    if !s.is_finite() {
        return Err(Error::InvalidArgument(alloc::format!("s must be finite, got {s}")));
    }
    Ok(())
}

pub(crate) fn check_range(set: &MaterializedSet, table: &PrimeTable, x: u64) -> Result<()> {
    if x > table.limit() {
        return Err(Error::AboveLimit { what: "x", value: x, limit: table.limit() });
    }
    if x > set.bound() {
        return Err(Error::AboveLimit { what: "x", value: x, limit: set.bound() });
    }
    if x < 2 {
        return Err(Error::InvalidArgument(alloc::format!("cutoff x must be at least 2, got {x}")));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sets::parse_set_spec;

    fn setup(spec: &str, limit: u64) -> (PrimeTable, PrimeSet, MaterializedSet) {
        let table = PrimeTable::sieve(limit).unwrap();
        let set = parse_set_spec(spec, limit).unwrap();
        let mat = MaterializedSet::build(&set, &table).unwrap();
        (table, set, mat)
    }

    #[test]
    fn term_enumeration_counts_prime_powers() {
        let (table, _, mat) = setup("all", 100);
        let terms = weil_terms(&mat, &table, 100).unwrap();
        // 25 primes and 10 proper prime powers up to 100.
        assert_eq!(terms.len(), 35);
        assert!(terms.windows(2).all(|w| w[0].n < w[1].n));
        for t in &terms {
            assert_eq!(t.p.pow(t.j), t.n);
            assert_eq!(t.s_part % t.s_radical, 0);
            assert_eq!((t.n - 1) % t.s_part.max(1), 0);
        }
    }

    #[test]
    fn hom_counts_match_cyclic_target_oracle() {
        // The target group is cyclic of order p^j - 1. Against an explicit
        // member set, count homomorphisms factor by factor: a cyclic group
        // of prime order q maps in gcd(q, m) ways, the q-adic integers in
        // q^v ways where q^v is the q-part of m.
        let (table, set, _) = setup("explicit:2,3", 100_000);
        for &p in table.primes().iter().take_while(|&&p| p < 200) {
            for j in 1..=3u32 {
                let n = match p.checked_pow(j) {
                    Some(n) if n <= table.limit() => n,
                    _ => continue,
                };
                let m = n - 1;
                let mut min_oracle = 1u64;
                let mut max_oracle = 1u64;
                for q in [2u64, 3] {
                    min_oracle *= gcd(q, m);
                    let mut qpart = 1;
                    let mut r = m;
                    while r % q == 0 {
                        qpart *= q;
                        r /= q;
                    }
                    max_oracle *= qpart;
                }
                assert_eq!(hom_count(GroupKind::Minimal, &set, &table, p, j).unwrap(), min_oracle);
                assert_eq!(hom_count(GroupKind::Maximal, &set, &table, p, j).unwrap(), max_oracle);
            }
        }
    }

    fn gcd(a: u64, b: u64) -> u64 {
        if b == 0 {
            a
        } else {
            gcd(b, a % b)
        }
    }

    #[test]
    fn hom_count_full_set_examples() {
        let (table, set, _) = setup("all", 1000);
        // Full set: maximal count is p^j - 1 itself, minimal its radical.
        assert_eq!(hom_count(GroupKind::Maximal, &set, &table, 7, 1).unwrap(), 6);
        assert_eq!(hom_count(GroupKind::Minimal, &set, &table, 7, 1).unwrap(), 6);
        assert_eq!(hom_count(GroupKind::Maximal, &set, &table, 5, 2).unwrap(), 24);
        assert_eq!(hom_count(GroupKind::Minimal, &set, &table, 5, 2).unwrap(), 6);
        assert!(hom_count(GroupKind::Maximal, &set, &table, 6, 1).is_err());
        assert!(hom_count(GroupKind::Maximal, &set, &table, 7, 0).is_err());
    }

    #[test]
    fn lambda_form_agrees_with_term_form() {
        let (table, _, mat) = setup("mod:4:1", 10_000);
        let (direct, _) = log_weil_partial(GroupKind::Maximal, &mat, &table, 2.5, 10_000).unwrap();
        let scanned = log_weil_lambda_form(&mat, &table, 2.5, 10_000).unwrap();
        assert!(
            (direct - scanned).abs() <= 1e-13 * direct.abs().max(1.0),
            "direct {direct} vs scanned {scanned}"
        );
    }

    #[test]
    fn minimal_never_exceeds_maximal() {
        let (table, _, mat) = setup("delta:0.5:7", 10_000);
        for s in [1.5, 2.5, 4.0] {
            let (g, _) = log_weil_partial(GroupKind::Minimal, &mat, &table, s, 10_000).unwrap();
            let (h, _) = log_weil_partial(GroupKind::Maximal, &mat, &table, s, 10_000).unwrap();
            assert!(g <= h + 1e-12, "s={s}: minimal {g} > maximal {h}");
            assert!(g > 0.0);
        }
    }

    #[test]
    fn upper_bound_chain_holds() {
        for spec in ["all", "mod:4:1", "explicit:2,3,5"] {
            let (table, _, mat) = setup(spec, 10_000);
            let complement = parse_set_spec(&alloc::format!("complement:({spec})"), 10_000).unwrap();
            let co_mat = MaterializedSet::build(&complement, &table).unwrap();
            for s in [2.1, 2.5, 3.0] {
                let (log_zeta, _) =
                    log_weil_partial(GroupKind::Maximal, &mat, &table, s, 10_000).unwrap();
                let weighted = s_weighted_sum(&mat, &table, s, 10_000).unwrap();
                let member_factor = zeta_s_truncated(&mat, &table, s - 1.0, 10_000).unwrap();
                let co_factor = zeta_s_truncated(&co_mat, &table, s, 10_000).unwrap();
                // The outer inequality is an equality for the full set, so
                // allow rounding noise there.
                let rhs = member_factor * co_factor;
                assert!(
                    log_zeta <= weighted && weighted <= rhs * (1.0 + 1e-12),
                    "{spec} s={s}: {log_zeta} vs {weighted} vs {rhs}"
                );
            }
        }
    }

    #[test]
    fn squarefree_series_matches_zeta_ratio() {
        let (table, _, mat) = setup("all", 100_000);
        let mu2 = mu2_series_truncated(&mat, &table, 2.0, 100_000).unwrap();
        let ratio = zeta_s_truncated(&mat, &table, 2.0, 100_000).unwrap()
            / zeta_s_truncated(&mat, &table, 4.0, 100_000).unwrap();
        assert!((mu2 - ratio).abs() < 1e-4, "mu2 {mu2} vs ratio {ratio}");
        let exact = zeta_em(2.0).unwrap() / zeta_em(4.0).unwrap();
        assert!((mu2 - exact).abs() < 1e-4);
    }

    #[test]
    fn euler_product_dominates_sum_form() {
        let (table, _, mat) = setup("all", 10_000);
        let sum = zeta_s_truncated(&mat, &table, 3.0, 10_000).unwrap();
        let product = zeta_s_euler_truncated(&mat, &table, 3.0, 10_000).unwrap();
        assert!(product >= sum);
        assert!((product - sum) < 1e-7);
        assert!((product - zeta_em(3.0).unwrap()).abs() < 1e-9);
    }

    #[test]
    fn zeta_reference_values() {
        // 21-digit reference values for the Riemann zeta function.
        let cases = [
            (1.25, 4.595_111_825_842_943_380_7),
            (1.5, 2.612_375_348_685_488_343_3),
            (1.75, 1.962_320_099_451_341_990_2),
            (2.0, 1.644_934_066_848_226_436_5),
            (3.0, 1.202_056_903_159_594_285_4),
            (4.0, 1.082_323_233_711_138_191_5),
        ];
        for (s, want) in cases {
            let got = zeta_em(s).unwrap();
            assert!(
                (got - want).abs() <= 1e-14 * want,
                "zeta({s}) = {got:.18}, want {want:.18}"
            );
        }
        assert!(zeta_em(1.0).is_err());
        assert!(zeta_em(0.5).is_err());
    }

    #[test]
    fn restricted_zeta_on_single_prime_is_geometric() {
        let (table, _, mat) = setup("explicit:2", 10_000);
        // Members are powers of two; the series is geometric in 2^-s.
        let got = zeta_s_truncated(&mat, &table, 2.0, 10_000).unwrap();
        let want = (0..=13).map(|k| libm::pow(4.0, -(k as f64))).sum::<f64>();
        assert!((got - want).abs() < 1e-15);
        let product = zeta_s_euler_truncated(&mat, &table, 2.0, 10_000).unwrap();
        assert!((product - 4.0 / 3.0).abs() < 1e-15);
    }
}
