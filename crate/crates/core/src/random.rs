//! Random prime sets of tunable density and the experiments run on them.
//!
//! Membership of each prime is an independent coin flip with
//! `P(p in S) = (p^(1-delta) - 1) / (p - 1)`, realized by counter-mode
//! hashing so that a `(delta, seed)` pair names one fixed, replayable
//! set. The closed-form moments here are the exact expectations of the
//! sampled quantities; the experiment drivers compare samples against
//! them and against the predicted growth exponent `2 - delta`.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use libm::{pow, sqrt};

use crate::error::{Error, Result};
use crate::kahan::Kahan;
use crate::ledger::{estimate_abscissa, AbscissaEstimate, LedgerBuilder};
use crate::primes::{Factorization, PrimeTable};
use crate::progressions::{bv_weighted_sum, BvStrategy};
use crate::runner::Runner;
use crate::series;
use crate::sets::{self, MaterializedSet, PrimeSet, SetKind};
use crate::stream::stream_u64;

/// Membership probability of the prime `p` at density parameter `delta`.
#[inline]
pub(crate) fn inclusion_probability(p: u64, delta: f64) -> f64 {
    let p = p as f64;
    (pow(p, 1.0 - delta) - 1.0) / (p - 1.0)
}

fn check_delta(delta: f64) -> Result<()> {
    if delta > 0.0 && delta < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!(
            "delta must lie strictly inside (0, 1), got {delta}"
        )))
    }
}

/// Sampling model for random prime sets with density exponent `delta`.
///
/// A model owns a master seed; every sampled set and per-trial seed is a
/// pure function of it, so experiments replay bit for bit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeltaModel {
    delta: f64,
    master_seed: u64,
}

impl DeltaModel {
    /// `delta` must lie strictly inside `(0, 1)`: the endpoints
    /// degenerate to the full set and the empty set.
    pub fn new(delta: f64, master_seed: u64) -> Result<Self> {
        check_delta(delta)?;
        Ok(DeltaModel { delta, master_seed })
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn master_seed(&self) -> u64 {
        self.master_seed
    }

    /// `P(p in S)`, strictly inside `(0, 1)` for every prime `p`.
    pub fn inclusion_probability(&self, p: u64) -> f64 {
        inclusion_probability(p, self.delta)
    }

    /// Seed of the `trial`-th independent sample.
    pub fn trial_seed(&self, trial: u64) -> u64 {
        stream_u64(self.master_seed, trial)
    }

    /// The set named by the master seed itself, queryable up to `bound`.
    pub fn sample_set(&self, bound: u64) -> Result<PrimeSet> {
        PrimeSet::new(SetKind::DeltaSample { delta: self.delta, seed: self.master_seed }, bound)
    }

    /// An independent sample for the given trial index.
    pub fn trial_set(&self, trial: u64, bound: u64) -> Result<PrimeSet> {
        PrimeSet::new(
            SetKind::DeltaSample { delta: self.delta, seed: self.trial_seed(trial) },
            bound,
        )
    }
}

/// Probability that every prime factor of `n` is a member, which is the
/// expectation of the indicator that `n` is member-supported.
///
/// Equals `rad(n)^-delta` times the product of `(p - p^delta)/(p - 1)`
/// over the distinct primes of `n`; in particular it is at most
/// `rad(n)^-delta`.
pub fn expected_i(fact: &Factorization, delta: f64) -> f64 {
    let mut prob = 1.0;
    for &(p, _) in fact.factors() {
        prob *= inclusion_probability(p, delta);
    }
    prob
}

/// Expectation of the member radical of `n`: exactly `rad(n)^(1-delta)`.
///
/// Each prime contributes `1 + (p - 1) P(p in S) = p^(1-delta)`
/// independently, so the product telescopes to a power of the radical.
pub fn expected_r(fact: &Factorization, delta: f64) -> f64 {
    pow(fact.radical() as f64, 1.0 - delta)
}

/// Exact expectation of the product of the member radicals of `n` and
/// `m`, paired with the simpler upper bound
/// `2 rad(n)^(1-delta) rad(m)^(1-delta) rad(gcd(n, m))^delta`.
///
/// A prime dividing only one of the two contributes `p^(1-delta)` as in
/// [`expected_r`]; a shared prime couples the two radicals and
/// contributes `p^(2-delta) (1 - p^(delta-1) + 1/p)`.
pub fn expected_rr(fact_n: &Factorization, fact_m: &Factorization, delta: f64) -> (f64, f64) {
    let fs_n = fact_n.factors();
    let fs_m = fact_m.factors();
    let mut i = 0;
    let mut j = 0;
    let mut value = 1.0;
    let mut shared_rad = 1.0;
    // Both factor lists are sorted by prime, so walk them as a merge.
    loop {
        match (fs_n.get(i), fs_m.get(j)) {
            (None, None) => break,
            (Some(&(p, _)), None) => {
                value *= pow(p as f64, 1.0 - delta);
                i += 1;
            }
            (None, Some(&(q, _))) => {
                value *= pow(q as f64, 1.0 - delta);
                j += 1;
            }
            (Some(&(p, _)), Some(&(q, _))) => {
                if p == q {
                    let pf = p as f64;
                    value *= pow(pf, 2.0 - delta) * (1.0 - pow(pf, delta - 1.0) + 1.0 / pf);
                    shared_rad *= pf;
                    i += 1;
                    j += 1;
                } else if p < q {
                    value *= pow(p as f64, 1.0 - delta);
                    i += 1;
                } else {
                    value *= pow(q as f64, 1.0 - delta);
                    j += 1;
                }
            }
        }
    }
    let bound = 2.0
        * pow(fact_n.radical() as f64, 1.0 - delta)
        * pow(fact_m.radical() as f64, 1.0 - delta)
        * pow(shared_rad, delta);
    (value, bound)
}

/// Realized growth sum over a sampled set: for primes `p <= t`, the
/// member radical of `p - 1` weighted by `p^(delta-1)`.
pub fn x_t(set: &MaterializedSet, table: &PrimeTable, t: u64, delta: f64) -> Result<f64> {
    check_delta(delta)?;
    series::check_range(set, table, t)?;
    let mut sum = Kahan::new();
    for &p in table.primes() {
        if p > t {
            break;
        }
        let fact = table.factor(p - 1)?;
        let r = sets::s_radical(&fact, |q| set.contains(q));
        sum.add(r as f64 * pow(p as f64, delta - 1.0));
    }
    Ok(sum.value())
}

/// Exact expectation of the growth sum at cutoff `t`: the sum of
/// `rad(p-1)^(1-delta) p^(delta-1)` over primes `p <= t`.
///
/// Every term lies in `(0, 1]`, so the sum is at most the number of
/// primes up to `t`; terms with `p - 1` squarefree are at least
/// `2^(delta-1)`, which pins the sum between two prime counts.
pub fn expected_x(table: &PrimeTable, t: u64, delta: f64) -> Result<f64> {
    check_delta(delta)?;
    if t > table.limit() {
        return Err(Error::AboveLimit { what: "t", value: t, limit: table.limit() });
    }
    if t < 2 {
        return Err(Error::InvalidArgument(format!("cutoff t must be at least 2, got {t}")));
    }
    let mut sum = Kahan::new();
    for &p in table.primes() {
        if p > t {
            break;
        }
        let rad = table.factor(p - 1)?.radical();
        sum.add(pow(rad as f64, 1.0 - delta) * pow(p as f64, delta - 1.0));
    }
    Ok(sum.value())
}

/// Realized truncated Dirichlet sum over a sampled set: `m^-s` summed
/// over the member-supported `m <= x`, the `m = 1` term included.
pub fn y_s(set: &MaterializedSet, table: &PrimeTable, s: f64, x: u64) -> Result<f64> {
    check_positive_s(s)?;
    series::zeta_s_truncated(set, table, s, x)
}

/// Exact expectation of the truncated Dirichlet sum: the sum over
/// `m <= x` of the member-support probability of `m` times `m^-s`.
pub fn expected_y_truncated(table: &PrimeTable, s: f64, x: u64, delta: f64) -> Result<f64> {
    check_delta(delta)?;
    check_positive_s(s)?;
    if x > table.limit() {
        return Err(Error::AboveLimit { what: "x", value: x, limit: table.limit() });
    }
    if x < 1 {
        return Err(Error::InvalidArgument(String::from("truncation x must be at least 1")));
    }
    let mut sum = Kahan::new();
    sum.add(1.0);
    for m in 2..=x {
        let mut prob = 1.0;
        for (p, _) in table.prime_factors(m) {
            prob *= inclusion_probability(p, delta);
        }
        sum.add(prob * pow(m as f64, -s));
    }
    Ok(sum.value())
}

/// Product upper bound for the truncated Dirichlet expectation: over
/// primes `p <= x`, the product of `1 + p^(-delta-s) / (1 - p^-s)`.
///
/// Dominates [`expected_y_truncated`] at the same truncation because the
/// membership probability is at most `p^-delta` and the product also
/// covers member-supported integers above `x`. Stays bounded as `x`
/// grows only when `s + delta > 1`.
pub fn expected_y_product_bound(table: &PrimeTable, s: f64, x: u64, delta: f64) -> Result<f64> {
    check_delta(delta)?;
    check_positive_s(s)?;
    if x > table.limit() {
        return Err(Error::AboveLimit { what: "x", value: x, limit: table.limit() });
    }
    let mut prod = 1.0;
    for &p in table.primes() {
        if p > x {
            break;
        }
        let pf = p as f64;
        prod *= 1.0 + pow(pf, -delta - s) / (1.0 - pow(pf, -s));
    }
    Ok(prod)
}

fn check_positive_s(s: f64) -> Result<()> {
    if s.is_finite() && s > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("exponent s must be positive, got {s}")))
    }
}

/// Sample statistics of one Monte Carlo batch.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct MonteCarloSummary {
    pub trials: u64,
    pub mean: f64,
    /// Bessel-corrected sample variance.
    pub sample_variance: f64,
    /// `sqrt(sample_variance / trials)`.
    pub standard_error: f64,
    pub master_seed: u64,
    /// How per-trial seeds derive from the master seed.
    pub seed_rule: String,
}

fn summarize(samples: &[f64], master_seed: u64, seed_rule: &str) -> MonteCarloSummary {
    let n = samples.len();
    let mut sum = Kahan::new();
    for &x in samples {
        sum.add(x);
    }
    let mean = sum.value() / n as f64;
    let mut squares = Kahan::new();
    for &x in samples {
        let d = x - mean;
        squares.add(d * d);
    }
    let sample_variance =
        if n > 1 { (squares.value() / (n - 1) as f64).max(0.0) } else { 0.0 };
    MonteCarloSummary {
        trials: n as u64,
        mean,
        sample_variance,
        standard_error: sqrt(sample_variance / n as f64),
        master_seed,
        seed_rule: String::from(seed_rule),
    }
}

/// One cutoff row of [`variance_experiment`].
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct VarianceRow {
    pub t: u64,
    /// Exact expectation of the growth sum at this cutoff.
    pub exact_mean: f64,
    pub mc: MonteCarloSummary,
    /// Sample variance over the exact mean squared.
    pub ratio: f64,
    /// Monte Carlo second moment and its standard error.
    pub second_moment: f64,
    pub second_moment_se: f64,
    /// Exact upper bound on the second moment: twice the weighted
    /// progression sum at the same cutoff and delta.
    pub second_moment_bound: f64,
    /// Sampled mean within 3 standard errors of the exact mean.
    pub mean_ok: bool,
    /// `ratio <= 2`.
    pub ratio_ok: bool,
    /// Second moment below its bound, within 3 standard errors.
    pub second_moment_ok: bool,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct VarianceReport {
    pub delta: f64,
    pub master_seed: u64,
    pub trials: u64,
    pub rows: Vec<VarianceRow>,
    pub all_ok: bool,
}

const VARIANCE_SEED_RULE: &str = "trial seed = stream_u64(stream_u64(master_seed, t), trial)";

/// Monte Carlo check that the variance of the growth sum stays within a
/// fixed multiple of its squared mean, with the exact second-moment
/// bound `2 * sum of a^delta * pi(t; a, 1)^2` evaluated alongside.
///
/// Each cutoff row draws its trial seeds from an independent stream, so
/// extending the grid never perturbs existing rows.
pub fn variance_experiment<R: Runner>(
    model: &DeltaModel,
    table: &PrimeTable,
    t_grid: &[u64],
    trials: u64,
    runner: &R,
) -> Result<VarianceReport> {
    if trials < 2 {
        return Err(Error::InvalidArgument(format!("need at least 2 trials, got {trials}")));
    }
    if t_grid.is_empty() {
        return Err(Error::InvalidArgument(String::from("cutoff grid is empty")));
    }
    let delta = model.delta();
    let mut rows = Vec::with_capacity(t_grid.len());
    let mut all_ok = true;
    for &t in t_grid {
        let exact_mean = expected_x(table, t, delta)?;
        let row_stream = stream_u64(model.master_seed(), t);
        let samples: Vec<f64> = runner
            .run(trials as usize, |i| -> Result<f64> {
                let seed = stream_u64(row_stream, i as u64);
                let set = PrimeSet::new(SetKind::DeltaSample { delta, seed }, t)?;
                let mat = MaterializedSet::build(&set, table)?;
                x_t(&mat, table, t, delta)
            })
            .into_iter()
            .collect::<Result<Vec<f64>>>()?;
        let mc = summarize(&samples, model.master_seed(), VARIANCE_SEED_RULE);
        let squared: Vec<f64> = samples.iter().map(|&x| x * x).collect();
        let mc2 = summarize(&squared, model.master_seed(), VARIANCE_SEED_RULE);
        let second_moment_bound =
            2.0 * bv_weighted_sum(table, t, delta, BvStrategy::DivisorTranspose)?;
        let ratio = mc.sample_variance / (exact_mean * exact_mean);
        let mean_ok = (mc.mean - exact_mean).abs() <= 3.0 * mc.standard_error;
        let ratio_ok = ratio <= 2.0;
        let second_moment_ok = mc2.mean <= second_moment_bound + 3.0 * mc2.standard_error;
        all_ok &= mean_ok && ratio_ok && second_moment_ok;
        rows.push(VarianceRow {
            t,
            exact_mean,
            mc,
            ratio,
            second_moment: mc2.mean,
            second_moment_se: mc2.standard_error,
            second_moment_bound,
            mean_ok,
            ratio_ok,
            second_moment_ok,
        });
    }
    Ok(VarianceReport {
        delta,
        master_seed: model.master_seed(),
        trials,
        rows,
        all_ok,
    })
}

/// Fit window, in decades, for every abscissa estimate below.
const FIT_WINDOW: f64 = 2.5;
/// Tolerance band around the predicted exponent `2 - delta`.
const BAND: f64 = 0.15;
/// Estimator slack allowed when comparing the two group exponents.
const ORDER_SLACK: f64 = 0.05;

/// One sampled set's abscissa estimates against the prediction.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct AbscissaRun {
    pub delta: f64,
    pub trial: u64,
    pub seed: u64,
    /// Predicted exponent `2 - delta` shared by the three estimates.
    pub target: f64,
    /// Fitted exponent of the coefficient ledger weighting each prime
    /// power by the member radical of `n - 1`.
    pub alpha_minimal: AbscissaEstimate,
    /// Fitted exponent of the coefficient ledger weighting each prime
    /// power by the member part of `n - 1`.
    pub alpha_maximal: AbscissaEstimate,
    /// Fitted exponent of the member-prime counting ledger; predicted to
    /// sit one below the coefficient exponents.
    pub alpha_count: AbscissaEstimate,
    pub member_count: u64,
    /// Realized and expected growth sums at the cutoff.
    pub x_t: f64,
    pub expected_x: f64,
    pub minimal_in_band: bool,
    pub maximal_in_band: bool,
    /// `alpha_minimal <= alpha_maximal + slack`.
    pub ordered: bool,
    pub count_in_band: bool,
    /// Band and ordering checks together.
    pub ok: bool,
    /// Heuristic only: the realized growth sum reached at least a tenth
    /// of its expectation, a finite-sample stand-in for the claim that
    /// the ratio stays positive. Not folded into `ok`.
    pub heuristic_growth_ok: bool,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct AbscissaReport {
    pub master_seed: u64,
    pub cutoff: u64,
    pub window_decades: f64,
    pub trials_per_delta: u64,
    pub runs: Vec<AbscissaRun>,
    /// Every run passed its band and ordering checks.
    pub all_ok: bool,
    /// Every run also passed the heuristic growth check.
    pub growth_ok: bool,
}

/// Battery of sampled-set runs measuring growth exponents against the
/// predicted `2 - delta`.
///
/// Per run, one sweep over the prime powers `n <= cutoff` feeds two
/// coefficient ledgers (member radical and member part of `n - 1`, each
/// divided by the power index) and the member primes feed a counting
/// ledger. All three sums carry one inverse logarithm on top of their
/// power law, as sums over primes do, and are fitted with the matching
/// correction; the count exponent is compared shifted up by one.
///
/// Each delta draws trial seeds from its own stream keyed by the bit
/// pattern of delta, so adding deltas or trials never perturbs existing
/// runs. Runs appear grouped by delta in input order, trials ascending.
pub fn abscissa_experiment<R: Runner>(
    master_seed: u64,
    deltas: &[f64],
    trials_per_delta: u64,
    cutoff: u64,
    table: &PrimeTable,
    runner: &R,
) -> Result<AbscissaReport> {
    if deltas.is_empty() {
        return Err(Error::InvalidArgument(String::from("need at least one delta")));
    }
    for &d in deltas {
        check_delta(d)?;
    }
    if trials_per_delta == 0 {
        return Err(Error::InvalidArgument(String::from("need at least one trial per delta")));
    }
    if cutoff < 1000 {
        return Err(Error::InvalidArgument(format!(
            "cutoff {cutoff} leaves too few checkpoints in a {FIT_WINDOW}-decade window"
        )));
    }
    if cutoff > table.limit() {
        return Err(Error::AboveLimit { what: "cutoff", value: cutoff, limit: table.limit() });
    }
    // Expectations depend only on delta; compute once, not per trial.
    let mut expected = Vec::with_capacity(deltas.len());
    for &d in deltas {
        expected.push(expected_x(table, cutoff, d)?);
    }
    let trials = trials_per_delta as usize;
    let runs: Vec<AbscissaRun> = runner
        .run(deltas.len() * trials, |idx| -> Result<AbscissaRun> {
            let delta = deltas[idx / trials];
            let trial = (idx % trials) as u64;
            let dstream = stream_u64(master_seed, delta.to_bits());
            let seed = stream_u64(dstream, trial);
            abscissa_run(delta, trial, seed, cutoff, expected[idx / trials], table)
        })
        .into_iter()
        .collect::<Result<Vec<AbscissaRun>>>()?;
    let all_ok = runs.iter().all(|r| r.ok);
    let growth_ok = runs.iter().all(|r| r.heuristic_growth_ok);
    Ok(AbscissaReport {
        master_seed,
        cutoff,
        window_decades: FIT_WINDOW,
        trials_per_delta,
        runs,
        all_ok,
        growth_ok,
    })
}

fn abscissa_run(
    delta: f64,
    trial: u64,
    seed: u64,
    cutoff: u64,
    expected_x_value: f64,
    table: &PrimeTable,
) -> Result<AbscissaRun> {
    let set = PrimeSet::new(SetKind::DeltaSample { delta, seed }, cutoff)?;
    let mat = MaterializedSet::build(&set, table)?;

    let mut minimal = LedgerBuilder::geometric("minimal coefficient sum", cutoff)?;
    let mut maximal = LedgerBuilder::geometric("maximal coefficient sum", cutoff)?;
    for term in series::weil_terms(&mat, table, cutoff)? {
        let weight = 1.0 / term.j as f64;
        minimal.add(term.n, term.s_radical as f64 * weight);
        maximal.add(term.n, term.s_part as f64 * weight);
    }
    let mut count = LedgerBuilder::geometric("member prime count", cutoff)?;
    for &p in table.primes() {
        if p > cutoff {
            break;
        }
        if mat.contains(p) {
            count.add(p, 1.0);
        }
    }

    let alpha_minimal = estimate_abscissa(&minimal.finish(), FIT_WINDOW, -1)?;
    let alpha_maximal = estimate_abscissa(&maximal.finish(), FIT_WINDOW, -1)?;
    let alpha_count = estimate_abscissa(&count.finish(), FIT_WINDOW, -1)?;
    let realized_x = x_t(&mat, table, cutoff, delta)?;

    let target = 2.0 - delta;
    let minimal_in_band = (alpha_minimal.slope - target).abs() <= BAND;
    let maximal_in_band = (alpha_maximal.slope - target).abs() <= BAND;
    let ordered = alpha_minimal.slope <= alpha_maximal.slope + ORDER_SLACK;
    let count_in_band = (alpha_count.slope + 1.0 - target).abs() <= BAND;
    Ok(AbscissaRun {
        delta,
        trial,
        seed,
        target,
        alpha_minimal,
        alpha_maximal,
        alpha_count,
        member_count: mat.member_count() as u64,
        x_t: realized_x,
        expected_x: expected_x_value,
        minimal_in_band,
        maximal_in_band,
        ordered,
        count_in_band,
        ok: minimal_in_band && maximal_in_band && ordered && count_in_band,
        heuristic_growth_ok: realized_x >= 0.1 * expected_x_value,
    })
}

/// A statistic sampled in the moment grid, with its exact expectation.
#[derive(Debug, Clone, Copy)]
enum MomentStat {
    /// Indicator that every prime factor of `n` is a member.
    IndicatorProduct { n: u64 },
    /// Member radical of `n`.
    Radical { n: u64 },
    /// Product of the member radicals of `n` and `m`.
    RadicalPair { n: u64, m: u64 },
    /// Growth sum at cutoff `t`.
    GrowthSum { t: u64 },
    /// Truncated Dirichlet sum at exponent `s`.
    DirichletSum { s: f64, x: u64 },
}

impl MomentStat {
    /// Largest prime the statistic may query membership for.
    fn bound(&self) -> u64 {
        match *self {
            MomentStat::IndicatorProduct { n } | MomentStat::Radical { n } => n.max(2),
            MomentStat::RadicalPair { n, m } => n.max(m).max(2),
            MomentStat::GrowthSum { t } => t,
            MomentStat::DirichletSum { x, .. } => x,
        }
    }

    fn label(&self) -> String {
        match *self {
            MomentStat::IndicatorProduct { n } => format!("E[I_{n}]"),
            MomentStat::Radical { n } => format!("E[R_{n}]"),
            MomentStat::RadicalPair { n, m } => format!("E[R_{n} R_{m}]"),
            MomentStat::GrowthSum { t } => format!("E[X_{t}]"),
            MomentStat::DirichletSum { s, x } => format!("E[Y({s}) truncated at {x}]"),
        }
    }

    fn exact(&self, table: &PrimeTable, delta: f64) -> Result<f64> {
        match *self {
            MomentStat::IndicatorProduct { n } => Ok(expected_i(&table.factor(n)?, delta)),
            MomentStat::Radical { n } => Ok(expected_r(&table.factor(n)?, delta)),
            MomentStat::RadicalPair { n, m } => {
                Ok(expected_rr(&table.factor(n)?, &table.factor(m)?, delta).0)
            }
            MomentStat::GrowthSum { t } => expected_x(table, t, delta),
            MomentStat::DirichletSum { s, x } => expected_y_truncated(table, s, x, delta),
        }
    }

    fn sample(&self, mat: &MaterializedSet, table: &PrimeTable, delta: f64) -> Result<f64> {
        match *self {
            MomentStat::IndicatorProduct { n } => {
                let supported = table.prime_factors(n).all(|(p, _)| mat.contains(p));
                Ok(if supported { 1.0 } else { 0.0 })
            }
            MomentStat::Radical { n } => {
                Ok(sets::s_radical(&table.factor(n)?, |q| mat.contains(q)) as f64)
            }
            MomentStat::RadicalPair { n, m } => {
                let rn = sets::s_radical(&table.factor(n)?, |q| mat.contains(q)) as f64;
                let rm = sets::s_radical(&table.factor(m)?, |q| mat.contains(q)) as f64;
                Ok(rn * rm)
            }
            MomentStat::GrowthSum { t } => x_t(mat, table, t, delta),
            MomentStat::DirichletSum { s, x } => y_s(mat, table, s, x),
        }
    }
}

/// The fixed 20-configuration grid: four per closed-form expectation,
/// spread over deltas and parameter sizes.
fn moment_grid() -> [(MomentStat, f64); 20] {
    use MomentStat::{DirichletSum, GrowthSum, IndicatorProduct, Radical, RadicalPair};
    [
        (IndicatorProduct { n: 12 }, 0.5),
        (IndicatorProduct { n: 30 }, 0.25),
        (IndicatorProduct { n: 4 }, 0.75),
        (IndicatorProduct { n: 97 }, 0.5),
        (Radical { n: 12 }, 0.5),
        (Radical { n: 30 }, 0.5),
        (Radical { n: 210 }, 0.25),
        (Radical { n: 60 }, 0.75),
        (RadicalPair { n: 12, m: 18 }, 0.5),
        (RadicalPair { n: 30, m: 70 }, 0.25),
        (RadicalPair { n: 12, m: 35 }, 0.5),
        (RadicalPair { n: 210, m: 330 }, 0.75),
        (GrowthSum { t: 10_000 }, 0.25),
        (GrowthSum { t: 10_000 }, 0.5),
        (GrowthSum { t: 100_000 }, 0.5),
        (GrowthSum { t: 100_000 }, 0.75),
        (DirichletSum { s: 1.0, x: 10_000 }, 0.5),
        (DirichletSum { s: 0.8, x: 10_000 }, 0.5),
        (DirichletSum { s: 1.2, x: 10_000 }, 0.25),
        (DirichletSum { s: 1.0, x: 10_000 }, 0.75),
    ]
}

/// One grid configuration's sampled-versus-exact comparison.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct MomentConfigResult {
    pub index: usize,
    pub label: String,
    pub delta: f64,
    pub exact: f64,
    pub mc: MonteCarloSummary,
    /// Standardized deviation of the sampled mean from the exact value;
    /// absent when the sample shows zero variance.
    pub z: Option<f64>,
    /// Within 4 standard errors (exact agreement when variance is zero).
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct MomentGridReport {
    pub master_seed: u64,
    pub trials: u64,
    pub results: Vec<MomentConfigResult>,
    pub pass_count: usize,
    pub pass_fraction: f64,
    /// At most one configuration missed its 4-standard-error band.
    pub ok: bool,
}

const MOMENT_SEED_RULE: &str =
    "trial seed = stream_u64(stream_u64(master_seed, config index), trial)";

/// Cross-check of every closed-form expectation against Monte Carlo
/// sampling over a fixed 20-configuration grid.
pub fn moment_grid_experiment<R: Runner>(
    master_seed: u64,
    trials: u64,
    table: &PrimeTable,
    runner: &R,
) -> Result<MomentGridReport> {
    if trials < 2 {
        return Err(Error::InvalidArgument(format!("need at least 2 trials, got {trials}")));
    }
    let grid = moment_grid();
    let mut results = Vec::with_capacity(grid.len());
    for (index, &(stat, delta)) in grid.iter().enumerate() {
        let exact = stat.exact(table, delta)?;
        let config_stream = stream_u64(master_seed, index as u64);
        let bound = stat.bound();
        let samples: Vec<f64> = runner
            .run(trials as usize, |i| -> Result<f64> {
                let seed = stream_u64(config_stream, i as u64);
                let set = PrimeSet::new(SetKind::DeltaSample { delta, seed }, bound)?;
                let mat = MaterializedSet::build(&set, table)?;
                stat.sample(&mat, table, delta)
            })
            .into_iter()
            .collect::<Result<Vec<f64>>>()?;
        let mc = summarize(&samples, master_seed, MOMENT_SEED_RULE);
        let (z, pass) = if mc.standard_error > 0.0 {
            let z = (mc.mean - exact) / mc.standard_error;
            (Some(z), z.abs() <= 4.0)
        } else {
            (None, mc.mean == exact)
        };
        results.push(MomentConfigResult { index, label: stat.label(), delta, exact, mc, z, pass });
    }
    let pass_count = results.iter().filter(|r| r.pass).count();
    let pass_fraction = pass_count as f64 / results.len() as f64;
    let ok = pass_count + 1 >= results.len();
    Ok(MomentGridReport { master_seed, trials, results, pass_count, pass_fraction, ok })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mirsky::{count_u_f, ExponentBound};
    use crate::runner::Serial;
    use crate::sets::parse_set_spec;

    fn table(limit: u64) -> PrimeTable {
        PrimeTable::sieve(limit).unwrap()
    }

    #[test]
    fn inclusion_probability_matches_formula() {
        assert!((inclusion_probability(2, 0.5) - (2f64.sqrt() - 1.0)).abs() < 1e-15);
        assert!(inclusion_probability(2, 0.999) < 0.01);
    }

    #[test]
    fn inclusion_probability_tracks_power_law() {
        // For large p the probability behaves like p^-delta.
        for p in [1009u64, 9973, 99991] {
            let ratio = inclusion_probability(p, 0.5) / (p as f64).powf(-0.5);
            assert!(ratio > 0.9 && ratio < 1.1, "p = {p}: ratio {ratio}");
        }
    }

    #[test]
    fn inclusion_probability_is_a_probability() {
        let t = table(1000);
        for &p in t.primes() {
            for delta in [0.1, 0.25, 0.5, 0.75, 0.9] {
                let v = inclusion_probability(p, delta);
                assert!(v > 0.0 && v < 1.0, "p = {p}, delta = {delta}: {v}");
            }
        }
    }

    #[test]
    fn inclusion_probability_decreases_in_delta() {
        for p in [2u64, 13, 997] {
            assert!(inclusion_probability(p, 0.25) > inclusion_probability(p, 0.5));
            assert!(inclusion_probability(p, 0.5) > inclusion_probability(p, 0.75));
        }
    }

    #[test]
    fn model_validates_delta() {
        assert!(DeltaModel::new(0.5, 7).is_ok());
        for bad in [0.0, 1.0, -0.2, 1.5, f64::NAN] {
            assert!(DeltaModel::new(bad, 7).is_err(), "accepted delta {bad}");
        }
        let m = DeltaModel::new(0.25, 99).unwrap();
        assert_eq!(m.delta(), 0.25);
        assert_eq!(m.master_seed(), 99);
        assert_eq!(m.trial_seed(3), stream_u64(99, 3));
    }

    #[test]
    fn sampled_frequency_matches_inclusion_probability() {
        // Binomial check: over many independent seeds the empirical
        // inclusion frequency of a fixed prime must match the formula.
        let model = DeltaModel::new(0.5, 42).unwrap();
        let trials = 10_000u64;
        for p in [2u64, 101, 9973] {
            let q = model.inclusion_probability(p);
            let mut hits = 0u64;
            for trial in 0..trials {
                let set = model.trial_set(trial, 10_000).unwrap();
                if set.contains(p).unwrap() {
                    hits += 1;
                }
            }
            let freq = hits as f64 / trials as f64;
            let sd = (q * (1.0 - q) / trials as f64).sqrt();
            assert!(
                (freq - q).abs() <= 4.0 * sd,
                "p = {p}: freq {freq}, expected {q}, sd {sd}"
            );
        }
    }

    #[test]
    fn near_zero_delta_includes_almost_everything() {
        let model = DeltaModel::new(0.01, 5).unwrap();
        let t = table(100);
        for &p in t.primes() {
            let mut hits = 0u64;
            let trials = 500u64;
            for trial in 0..trials {
                if model.trial_set(trial, 100).unwrap().contains(p).unwrap() {
                    hits += 1;
                }
            }
            assert!(hits as f64 / trials as f64 > 0.9, "p = {p}: {hits}/{trials}");
        }
    }

    #[test]
    fn expected_i_matches_radical_form() {
        // The inclusion product equals rad(n)^-delta times the product
        // of (p - p^delta)/(p - 1), its usual closed form.
        let t = table(2000);
        for n in 1..=2000u64 {
            let fact = t.factor(n).unwrap();
            for delta in [0.25, 0.5, 0.75] {
                let direct = expected_i(&fact, delta);
                let mut closed = (fact.radical() as f64).powf(-delta);
                for &(p, _) in fact.factors() {
                    let pf = p as f64;
                    closed *= (pf - pf.powf(delta)) / (pf - 1.0);
                }
                assert!(
                    (direct - closed).abs() <= 1e-12 * closed.max(1e-300),
                    "n = {n}, delta = {delta}: {direct} vs {closed}"
                );
            }
        }
    }

    #[test]
    fn expected_i_examples() {
        let t = table(100);
        assert_eq!(expected_i(&t.factor(1).unwrap(), 0.5), 1.0);
        let e12 = expected_i(&t.factor(12).unwrap(), 0.5);
        let by_hand = (2f64.sqrt() - 1.0) * ((3f64.sqrt() - 1.0) / 2.0);
        assert!((e12 - by_hand).abs() < 1e-15);
    }

    #[test]
    fn expected_i_bounded_by_radical_power() {
        let t = table(10_000);
        for n in 1..=10_000u64 {
            let fact = t.factor(n).unwrap();
            for delta in [0.25, 0.5, 0.75] {
                let cap = (fact.radical() as f64).powf(-delta);
                assert!(
                    expected_i(&fact, delta) <= cap * (1.0 + 1e-12),
                    "n = {n}, delta = {delta}"
                );
            }
        }
    }

    #[test]
    fn expected_r_matches_per_prime_product() {
        let t = table(1000);
        for n in 1..=1000u64 {
            let fact = t.factor(n).unwrap();
            for delta in [0.25, 0.5, 0.75] {
                // Each prime contributes 1 + (p-1) P(p in S).
                let mut product = 1.0;
                for &(p, _) in fact.factors() {
                    product *= 1.0 + (p - 1) as f64 * inclusion_probability(p, delta);
                }
                let direct = expected_r(&fact, delta);
                assert!(
                    (direct - product).abs() <= 1e-12 * product,
                    "n = {n}, delta = {delta}: {direct} vs {product}"
                );
            }
        }
    }

    #[test]
    fn expected_r_examples() {
        let t = table(100);
        let f12 = t.factor(12).unwrap();
        assert!((expected_r(&f12, 0.5) - 6f64.sqrt()).abs() < 1e-15);
        assert!((expected_r(&f12, 1e-9) - 6.0).abs() < 1e-6);
    }

    #[test]
    fn expected_rr_factorizes_for_coprime_arguments() {
        let t = table(1000);
        for (n, m) in [(12u64, 35u64), (8, 9), (30, 77), (97, 961)] {
            let fn_ = t.factor(n).unwrap();
            let fm = t.factor(m).unwrap();
            for delta in [0.25, 0.5, 0.75] {
                let (value, _) = expected_rr(&fn_, &fm, delta);
                let split = expected_r(&fn_, delta) * expected_r(&fm, delta);
                assert!(
                    (value - split).abs() <= 1e-12 * split,
                    "n = {n}, m = {m}, delta = {delta}"
                );
            }
        }
    }

    #[test]
    fn expected_rr_shared_prime_factor() {
        let t = table(100);
        let f12 = t.factor(12).unwrap();
        let delta = 0.5;
        let (value, _) = expected_rr(&f12, &f12, delta);
        let mut by_hand = 1.0;
        for p in [2f64, 3.0] {
            by_hand *= p.powf(2.0 - delta) * (1.0 - p.powf(delta - 1.0) + 1.0 / p);
        }
        assert!((value - by_hand).abs() <= 1e-12 * by_hand);
    }

    #[test]
    fn expected_rr_is_symmetric() {
        let t = table(500);
        for (n, m) in [(12u64, 18u64), (30, 70), (210, 330), (1, 64)] {
            let fn_ = t.factor(n).unwrap();
            let fm = t.factor(m).unwrap();
            assert_eq!(expected_rr(&fn_, &fm, 0.5), expected_rr(&fm, &fn_, 0.5));
        }
    }

    #[test]
    fn expected_rr_stays_below_its_bound() {
        let t = table(500);
        let facts: Vec<Factorization> = (1..=500).map(|n| t.factor(n).unwrap()).collect();
        for delta in [0.25, 0.5, 0.75] {
            for fn_ in &facts {
                for fm in &facts {
                    let (value, bound) = expected_rr(fn_, fm, delta);
                    assert!(
                        value <= bound * (1.0 + 1e-12),
                        "n = {}, m = {}, delta = {delta}: {value} > {bound}",
                        fn_.n(),
                        fm.n()
                    );
                }
            }
        }
    }

    #[test]
    fn x_t_full_set_example() {
        let t = table(100);
        let all = parse_set_spec("all", 100).unwrap();
        let mat = MaterializedSet::build(&all, &t).unwrap();
        // rad(1)/sqrt(2) + rad(2)/sqrt(3) + rad(4)/sqrt(5) + rad(6)/sqrt(7)
        let by_hand = 1.0 / 2f64.sqrt() + 2.0 / 3f64.sqrt() + 2.0 / 5f64.sqrt()
            + 6.0 / 7f64.sqrt();
        let value = x_t(&mat, &t, 10, 0.5).unwrap();
        assert!((value - by_hand).abs() < 1e-12, "{value} vs {by_hand}");
        assert!((by_hand - 5.024).abs() < 1e-3);
    }

    #[test]
    fn x_t_empty_set_drops_radicals() {
        let t = table(200);
        let none = parse_set_spec("none", 200).unwrap();
        let mat = MaterializedSet::build(&none, &t).unwrap();
        let delta = 0.5;
        let value = x_t(&mat, &t, 100, delta).unwrap();
        let mut direct = 0.0;
        for &p in t.primes() {
            if p > 100 {
                break;
            }
            direct += (p as f64).powf(delta - 1.0);
        }
        assert!((value - direct).abs() < 1e-12);
    }

    #[test]
    fn x_t_dominated_by_full_set() {
        let t = table(10_000);
        let all = MaterializedSet::build(&parse_set_spec("all", 10_000).unwrap(), &t).unwrap();
        let ceiling = x_t(&all, &t, 10_000, 0.5).unwrap();
        let model = DeltaModel::new(0.5, 11).unwrap();
        for trial in 0..5 {
            let mat =
                MaterializedSet::build(&model.trial_set(trial, 10_000).unwrap(), &t).unwrap();
            let value = x_t(&mat, &t, 10_000, 0.5).unwrap();
            assert!(value <= ceiling, "trial {trial}: {value} > {ceiling}");
        }
    }

    #[test]
    fn x_t_validates_input() {
        let t = table(100);
        let mat = MaterializedSet::build(&parse_set_spec("all", 50).unwrap(), &t).unwrap();
        assert!(x_t(&mat, &t, 80, 0.5).is_err());
        assert!(x_t(&mat, &t, 1, 0.5).is_err());
        assert!(x_t(&mat, &t, 50, 0.0).is_err());
        assert!(x_t(&mat, &t, 50, 1.0).is_err());
    }

    #[test]
    fn expected_x_example() {
        let t = table(100);
        let by_hand = 1.0 / 2f64.sqrt()
            + 2f64.sqrt() / 3f64.sqrt()
            + 2f64.sqrt() / 5f64.sqrt()
            + 6f64.sqrt() / 7f64.sqrt();
        let value = expected_x(&t, 10, 0.5).unwrap();
        assert!((value - by_hand).abs() < 1e-12);
        assert!((by_hand - 3.081).abs() < 1e-3);
    }

    #[test]
    fn expected_x_sits_between_prime_counts() {
        // Squarefree shifted primes contribute at least 2^(delta-1), all
        // terms at most 1.
        let t = table(10_000);
        let squarefree = ExponentBound::constant(1);
        for cutoff in [100u64, 1000, 10_000] {
            let u1 = count_u_f(&t, cutoff, &squarefree).unwrap().last().unwrap().a;
            let pi = t.primes().iter().take_while(|&&p| p <= cutoff).count() as f64;
            for delta in [0.25, 0.5, 0.75] {
                let e = expected_x(&t, cutoff, delta).unwrap();
                let floor = 2f64.powf(delta - 1.0) * u1;
                assert!(e <= pi, "cutoff {cutoff}, delta {delta}: {e} > pi {pi}");
                assert!(e >= floor, "cutoff {cutoff}, delta {delta}: {e} < floor {floor}");
            }
        }
    }

    #[test]
    fn y_s_empty_set_is_one() {
        let t = table(100);
        let none = MaterializedSet::build(&parse_set_spec("none", 100).unwrap(), &t).unwrap();
        for s in [0.5, 1.0, 2.0] {
            assert_eq!(y_s(&none, &t, s, 100).unwrap(), 1.0);
        }
    }

    #[test]
    fn y_s_rejects_nonpositive_exponent() {
        let t = table(100);
        let all = MaterializedSet::build(&parse_set_spec("all", 100).unwrap(), &t).unwrap();
        assert!(y_s(&all, &t, 0.0, 100).is_err());
        assert!(y_s(&all, &t, -1.0, 100).is_err());
    }

    #[test]
    fn expected_y_is_the_inclusion_weighted_sum() {
        let t = table(300);
        let delta = 0.5;
        let s = 1.2;
        let direct = expected_y_truncated(&t, s, 300, delta).unwrap();
        let mut by_sum = 1.0;
        for m in 2..=300u64 {
            by_sum += expected_i(&t.factor(m).unwrap(), delta) * (m as f64).powf(-s);
        }
        assert!((direct - by_sum).abs() <= 1e-12 * by_sum);
    }

    #[test]
    fn expected_y_respects_product_bound() {
        let t = table(100_000);
        for (s, x, delta) in [(0.8, 100_000u64, 0.5), (1.2, 10_000, 0.25), (1.0, 10_000, 0.75)] {
            let sum = expected_y_truncated(&t, s, x, delta).unwrap();
            let bound = expected_y_product_bound(&t, s, x, delta).unwrap();
            assert!(sum <= bound, "s = {s}, x = {x}, delta = {delta}: {sum} > {bound}");
        }
    }

    #[test]
    fn expected_y_decreases_in_delta() {
        let t = table(1000);
        let lo = expected_y_truncated(&t, 1.0, 1000, 0.25).unwrap();
        let hi = expected_y_truncated(&t, 1.0, 1000, 0.75).unwrap();
        assert!(lo > hi);
    }

    #[test]
    fn summary_statistics_are_textbook() {
        let mc = summarize(&[1.0, 2.0, 3.0, 4.0], 9, "rule");
        assert_eq!(mc.trials, 4);
        assert!((mc.mean - 2.5).abs() < 1e-15);
        assert!((mc.sample_variance - 5.0 / 3.0).abs() < 1e-15);
        assert!((mc.standard_error - (5.0 / 12.0f64).sqrt()).abs() < 1e-15);
        assert_eq!(mc.master_seed, 9);
    }

    #[test]
    fn variance_experiment_structure_and_determinism() {
        let t = table(3000);
        let model = DeltaModel::new(0.5, 42).unwrap();
        let report = variance_experiment(&model, &t, &[300, 3000], 40, &Serial).unwrap();
        assert_eq!(report.rows.len(), 2);
        assert_eq!(report.trials, 40);
        for row in &report.rows {
            assert!(row.exact_mean > 0.0);
            assert_eq!(row.mc.trials, 40);
            assert!(row.ratio >= 0.0);
            assert!(row.second_moment_bound > 0.0);
            assert!(row.second_moment > 0.0);
        }
        let expected_all = report
            .rows
            .iter()
            .all(|r| r.mean_ok && r.ratio_ok && r.second_moment_ok);
        assert_eq!(report.all_ok, expected_all);
        let again = variance_experiment(&model, &t, &[300, 3000], 40, &Serial).unwrap();
        assert_eq!(report, again);
    }

    #[test]
    fn variance_experiment_validates_input() {
        let t = table(1000);
        let model = DeltaModel::new(0.5, 1).unwrap();
        assert!(variance_experiment(&model, &t, &[], 10, &Serial).is_err());
        assert!(variance_experiment(&model, &t, &[100], 1, &Serial).is_err());
        assert!(variance_experiment(&model, &t, &[2000], 10, &Serial).is_err());
    }

    #[test]
    fn abscissa_experiment_structure_and_determinism() {
        let t = table(100_000);
        let report =
            abscissa_experiment(42, &[0.5, 0.25], 2, 100_000, &t, &Serial).unwrap();
        assert_eq!(report.runs.len(), 4);
        assert_eq!(report.window_decades, FIT_WINDOW);
        // Runs grouped by delta in input order, trials ascending.
        assert_eq!(report.runs[0].delta, 0.5);
        assert_eq!(report.runs[1].delta, 0.5);
        assert_eq!(report.runs[2].delta, 0.25);
        assert_eq!(report.runs[3].delta, 0.25);
        for run in &report.runs {
            let dstream = stream_u64(42, run.delta.to_bits());
            assert_eq!(run.seed, stream_u64(dstream, run.trial));
            assert_eq!(run.target, 2.0 - run.delta);
            assert!(run.alpha_minimal.n_points >= 4);
            assert!(run.alpha_maximal.n_points >= 4);
            assert!(run.alpha_count.n_points >= 4);
            assert!(run.member_count > 0);
            assert!(run.x_t > 0.0 && run.expected_x > 0.0);
            let ok = run.minimal_in_band
                && run.maximal_in_band
                && run.ordered
                && run.count_in_band;
            assert_eq!(run.ok, ok);
        }
        let again = abscissa_experiment(42, &[0.5, 0.25], 2, 100_000, &t, &Serial).unwrap();
        assert_eq!(report, again);
    }

    #[test]
    fn abscissa_experiment_validates_input() {
        let t = table(10_000);
        assert!(abscissa_experiment(1, &[], 2, 10_000, &t, &Serial).is_err());
        assert!(abscissa_experiment(1, &[0.5], 0, 10_000, &t, &Serial).is_err());
        assert!(abscissa_experiment(1, &[0.5], 2, 500, &t, &Serial).is_err());
        assert!(abscissa_experiment(1, &[0.5], 2, 20_000, &t, &Serial).is_err());
        assert!(abscissa_experiment(1, &[1.5], 2, 10_000, &t, &Serial).is_err());
    }

    #[test]
    fn moment_grid_covers_and_passes() {
        let t = table(100_000);
        let report = moment_grid_experiment(42, 60, &t, &Serial).unwrap();
        assert_eq!(report.results.len(), 20);
        for r in &report.results {
            assert!(r.exact > 0.0, "{}: exact {}", r.label, r.exact);
            assert!(r.mc.mean.is_finite());
            assert_eq!(r.mc.trials, 60);
        }
        assert_eq!(
            report.pass_count,
            report.results.iter().filter(|r| r.pass).count()
        );
        assert!(
            (report.pass_fraction - report.pass_count as f64 / 20.0).abs() < 1e-15
        );
        assert!(report.ok, "pass_count = {}", report.pass_count);
        let again = moment_grid_experiment(42, 60, &t, &Serial).unwrap();
        assert_eq!(report, again);
    }

    #[test]
    fn moment_grid_validates_trials() {
        let t = table(100_000);
        assert!(moment_grid_experiment(1, 1, &t, &Serial).is_err());
    }
}
