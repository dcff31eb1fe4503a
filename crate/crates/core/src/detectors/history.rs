/// A monitored scalar stream with compensated prefix sums.
///
/// Prefix sums are kept as an unevaluated pair `hi + lo` (Knuth two-sum), so
/// window means stay accurate to a few ulps even for long streams of
/// non-dyadic values.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ScalarHistory {
    values: Vec<f64>,
    hi: Vec<f64>,
    lo: Vec<f64>,
    sq: Vec<f64>,
}

#[inline]
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

impl ScalarHistory {
    pub fn new() -> Self {
        Self {
            values: Vec::new(),
            hi: vec![0.0],
            lo: vec![0.0],
            sq: vec![0.0],
        }
    }

    pub fn from_values(values: &[f64]) -> Self {
        let mut h = Self::new();
        for &x in values {
            h.push(x);
        }
        h
    }

    pub fn push(&mut self, x: f64) {
        if self.hi.is_empty() {
            *self = Self::new();
        }
        let n = self.values.len();
        let (s, e) = two_sum(self.hi[n], x);
        self.hi.push(s);
        self.lo.push(self.lo[n] + e);
        self.sq.push(self.sq[n] + x * x);
        self.values.push(x);
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn clear(&mut self) {
        self.values.clear();
        self.hi.truncate(1);
        self.lo.truncate(1);
        self.sq.truncate(1);
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Sum of observations `a..=b` (1-based, inclusive).
    #[inline]
    pub fn sum(&self, a: usize, b: usize) -> f64 {
        debug_assert!(a >= 1 && a <= b + 1 && b <= self.len());
        let (dh, dl) = two_sum(self.hi[b], -self.hi[a - 1]);
        dh + (dl + (self.lo[b] - self.lo[a - 1]))
    }

    /// Mean of observations `a..=b` (1-based, inclusive).
    #[inline]
    pub fn mean(&self, a: usize, b: usize) -> f64 {
        self.sum(a, b) / (b + 1 - a) as f64
    }

    /// Mean of all observations, 0 when empty.
    pub fn total_mean(&self) -> f64 {
        if self.is_empty() {
            0.0
        } else {
            self.mean(1, self.len())
        }
    }

    /// Sample variance (population form) of observations `a..=b`.
    pub fn variance(&self, a: usize, b: usize) -> f64 {
        let m = self.mean(a, b);
        let sq = (self.sq[b] - self.sq[a - 1]) / (b + 1 - a) as f64;
        (sq - m * m).max(0.0)
    }

    /// Leading part of the prefix sums, `prefix[0] = 0`. Accurate to about one
    /// ulp of the running sum; used for screening bounds that carry slack.
    #[inline]
    pub(crate) fn prefix(&self) -> &[f64] {
        if self.hi.is_empty() {
            &[0.0]
        } else {
            &self.hi
        }
    }
}
