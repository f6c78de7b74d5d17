use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::kahan::Kahan;

/// Partial sum `a` of a series, taken over terms with index `<= x`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct Checkpoint {
    pub x: u64,
    pub a: f64,
}

/// Partial sums of a nonnegative-term series recorded at increasing
/// cutoffs, the raw material for growth-exponent fits.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct CheckpointLedger {
    description: String,
    checkpoints: Vec<Checkpoint>,
}

impl CheckpointLedger {
    /// Cutoffs must be strictly increasing and values finite,
    /// nonnegative and non-decreasing.
    pub fn new(description: impl Into<String>, checkpoints: Vec<Checkpoint>) -> Result<Self> {
        let mut prev_x = 0u64;
        let mut prev_a = 0.0f64;
        for c in &checkpoints {
            if c.x <= prev_x {
                return Err(Error::InvalidArgument(alloc::format!(
                    "ledger cutoffs must increase, got {} after {}",
                    c.x, prev_x
                )));
            }
            if !c.a.is_finite() || c.a < prev_a {
                return Err(Error::InvalidArgument(alloc::format!(
                    "ledger values must be finite and non-decreasing, got {} after {}",
                    c.a, prev_a
                )));
            }
            prev_x = c.x;
            prev_a = c.a;
        }
        Ok(CheckpointLedger { description: description.into(), checkpoints })
    }

    pub fn description(&self) -> &str {
        &self.description
    }

    pub fn checkpoints(&self) -> &[Checkpoint] {
        &self.checkpoints
    }

    pub fn last(&self) -> Option<Checkpoint> {
        self.checkpoints.last().copied()
    }

    pub fn len(&self) -> usize {
        self.checkpoints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.checkpoints.is_empty()
    }
}

/// Accumulates a series term by term (indices non-decreasing) and records
/// the running sum whenever a cutoff threshold is passed.
pub struct LedgerBuilder {
    description: String,
    thresholds: Vec<u64>,
    next: usize,
    sum: Kahan,
    last_n: u64,
    out: Vec<Checkpoint>,
}

impl LedgerBuilder {
    /// Halving cutoffs `x_max, x_max/2, x_max/4, ...` down to 2.
    pub fn geometric(description: impl Into<String>, x_max: u64) -> Result<Self> {
        if x_max < 2 {
            return Err(Error::InvalidArgument(alloc::format!(
                "geometric ledger needs x_max >= 2, got {x_max}"
            )));
        }
        let mut thresholds = Vec::new();
        let mut x = x_max;
        while x >= 2 {
            thresholds.push(x);
            x /= 2;
        }
        thresholds.reverse();
        Self::at_thresholds(description, thresholds)
    }

    /// Explicit cutoffs, strictly increasing, all `>= 2`.
    pub fn at_thresholds(description: impl Into<String>, thresholds: Vec<u64>) -> Result<Self> {
        if thresholds.is_empty() || thresholds[0] < 2 || thresholds.windows(2).any(|w| w[0] >= w[1])
        {
            return Err(Error::InvalidArgument(String::from(
                "ledger thresholds must be strictly increasing and >= 2",
            )));
        }
        Ok(LedgerBuilder {
            description: description.into(),
            thresholds,
            next: 0,
            sum: Kahan::new(),
            last_n: 0,
            out: Vec::new(),
        })
    }

    pub fn max_threshold(&self) -> u64 {
        *self.thresholds.last().unwrap()
    }

    /// Add the term at index `n`. Indices must arrive in non-decreasing
    /// order; a checkpoint at cutoff `x` captures exactly the terms with
    /// `n <= x`.
    #[inline]
    pub fn add(&mut self, n: u64, da: f64) {
        assert!(n >= self.last_n, "ledger terms must arrive in order");
        self.last_n = n;
        while self.next < self.thresholds.len() && self.thresholds[self.next] < n {
            self.out.push(Checkpoint { x: self.thresholds[self.next], a: self.sum.value() });
            self.next += 1;
        }
        self.sum.add(da);
    }

    /// Running sum over everything added so far.
    pub fn value(&self) -> f64 {
        self.sum.value()
    }

    pub fn finish(mut self) -> CheckpointLedger {
        while self.next < self.thresholds.len() {
            self.out.push(Checkpoint { x: self.thresholds[self.next], a: self.sum.value() });
            self.next += 1;
        }
        CheckpointLedger { description: self.description, checkpoints: self.out }
    }
}

/// Least-squares growth exponent fitted to the tail of a ledger.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct AbscissaEstimate {
    /// Fitted exponent: the slope of `log a` against `log x`.
    pub slope: f64,
    /// Standard error of the slope under the usual linear-model noise
    /// assumptions; a scale for comparing fits, not a rigorous bound.
    pub stderr: f64,
    pub intercept: f64,
    /// Range of cutoffs that entered the fit.
    pub window: (f64, f64),
    pub n_points: usize,
}

/// Fit `log a = intercept + slope * log x` over the trailing
/// `window_decades` decades of the ledger.
///
/// `log_correction` subtracts `k * log log x` from the ordinate first.
/// For quantities growing like `x^beta * (log x)^k` the plain fit is
/// biased by about `k / log x` at finite range, roughly `0.07 k` at
/// cutoffs near 1e7; passing the matching `k` removes the bias exactly
/// for that shape. Checkpoints with `a = 0` are skipped.
pub fn estimate_abscissa(
    ledger: &CheckpointLedger,
    window_decades: f64,
    log_correction: i32,
) -> Result<AbscissaEstimate> {
    if !(window_decades > 0.0) {
        return Err(Error::InvalidArgument(alloc::format!(
            "window must span a positive number of decades, got {window_decades}"
        )));
    }
    let hi = match ledger.last() {
        Some(c) => c.x as f64,
        None => return Err(Error::InsufficientData { needed: 4, found: 0 }),
    };
    let cut = hi / libm::pow(10.0, window_decades);
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for c in ledger.checkpoints() {
        let x = c.x as f64;
        if x >= cut && c.x >= 2 && c.a > 0.0 {
            let lx = libm::log(x);
            xs.push(lx);
            ys.push(libm::log(c.a) - log_correction as f64 * libm::log(lx));
        }
    }
    let n = xs.len();
    if n < 4 {
        return Err(Error::InsufficientData { needed: 4, found: n });
    }
    let nf = n as f64;
    let mx = xs.iter().sum::<f64>() / nf;
    let my = ys.iter().sum::<f64>() / nf;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    let mut syy = 0.0;
    for i in 0..n {
        let dx = xs[i] - mx;
        let dy = ys[i] - my;
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    let slope = sxy / sxx;
    let resid = (syy - slope * sxy).max(0.0);
    let stderr = libm::sqrt(resid / ((nf - 2.0) * sxx));
    Ok(AbscissaEstimate {
        slope,
        stderr,
        intercept: my - slope * mx,
        window: (libm::exp(xs[0]), libm::exp(xs[n - 1])),
        n_points: n,
    })
}
