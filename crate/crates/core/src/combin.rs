//! Small combinatorial and summation helpers.

/// Exact binomial coefficient. Returns 0 when `k > n`.
///
/// Panics on overflow of `u128`, which needs `n` far beyond any catalog size
/// used with the sixth-order multiplicities.
pub fn binomial(n: u64, k: u64) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        // acc * (n - i) is divisible by (i + 1) after the multiplication.
        acc = acc
            .checked_mul(u128::from(n - i))
            .expect("binomial overflow")
            / u128::from(i + 1);
    }
    acc
}

/// Binomial coefficient in floating point, `C(n, k)`, with `C(n, k) = 0` for
/// `k < 0` or `k > n`.
pub fn binomial_f64(n: i64, k: i64) -> f64 {
    if k < 0 || n < 0 || k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    let mut acc = 1.0_f64;
    for i in 0..k {
        acc = acc * (n - i) as f64 / (i + 1) as f64;
    }
    acc
}

/// Probability that a uniformly random `k`-subset of `n` items contains a
/// fixed set of `m` items: `C(n - m, k - m) / C(n, k)`.
///
/// Computed as a ratio of falling factorials `(k)_m / (n)_m`, so it never
/// forms large intermediate values. Returns 0 when `m > k`.
pub fn inclusion_ratio(k: usize, n: usize, m: usize) -> f64 {
    if m > k {
        return 0.0;
    }
    debug_assert!(k <= n);
    let mut acc = 1.0;
    for i in 0..m {
        acc *= (k - i) as f64 / (n - i) as f64;
    }
    acc
}

/// Falling factorial `(x)_m = x (x - 1) ... (x - m + 1)` in floating point.
pub fn falling(x: usize, m: usize) -> f64 {
    if m > x {
        return 0.0;
    }
    (0..m).map(|i| (x - i) as f64).product()
}

/// Neumaier compensated sum.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    #[inline]
    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

impl std::iter::FromIterator<f64> for CompensatedSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut s = CompensatedSum::new();
        for x in iter {
            s.add(x);
        }
        s
    }
}

pub fn compensated_sum<I: IntoIterator<Item = f64>>(iter: I) -> f64 {
    iter.into_iter().collect::<CompensatedSum>().value()
}
