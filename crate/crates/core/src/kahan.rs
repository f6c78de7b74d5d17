/// Kahan-compensated accumulator.
///
/// Every bulk sum in this crate adds terms in increasing order of the
/// summation index through one of these, which pins the result to a
/// single well-defined floating point value regardless of how the work
/// was produced (serially or by reassembled parallel chunks).
#[derive(Debug, Clone, Copy, Default)]
pub(crate) struct Kahan {
    sum: f64,
    carry: f64,
}

impl Kahan {
    pub(crate) fn new() -> Self {
        Self::default()
    }

    /// Exact zeros are skipped: textbook Kahan would fold a pending
    /// carry back in when fed 0.0, so "term absent" and "term zero"
    /// would otherwise produce different bit patterns downstream.
    #[inline]
    pub(crate) fn add(&mut self, x: f64) {
        if x == 0.0 {
            return;
        }
        let y = x - self.carry;
        let t = self.sum + y;
        self.carry = (t - self.sum) - y;
        self.sum = t;
    }

    #[inline]
    pub(crate) fn value(&self) -> f64 {
        self.sum
    }
}
