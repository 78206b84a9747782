//! Small numerical helpers: compensated summation and the trigamma function.

/// Neumaier's variant of Kahan summation.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: f64,
    compensation: f64,
}

impl CompensatedSum {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.compensation += (self.sum - t) + x;
        } else {
            self.compensation += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.compensation
    }
}

impl Extend<f64> for CompensatedSum {
    fn extend<I: IntoIterator<Item = f64>>(&mut self, iter: I) {
        for x in iter {
            self.add(x);
        }
    }
}

pub fn compensated_sum<I: IntoIterator<Item = f64>>(iter: I) -> f64 {
    let mut acc = CompensatedSum::new();
    acc.extend(iter);
    acc.value()
}

/// Below this argument the recurrence `ψ'(x) = ψ'(x + 1) + 1/x²` is applied
/// before switching to the asymptotic series.
const TRIGAMMA_ASYMPTOTIC_FROM: f64 = 20.0;

/// Trigamma function `ψ'(x) = Σ_{k≥0} 1/(x + k)²` for `x > 0`.
///
/// Gives the zeta-type tails used by the closed-form spectra:
/// `Σ_{k>n} 1/k² = ψ'(n + 1)` and `Σ_{k>n} 1/(k − ½)² = ψ'(n + ½)`.
pub fn trigamma(x: f64) -> f64 {
    assert!(x > 0.0, "trigamma requires a positive argument, got {x}");
    let mut shift = 0usize;
    let mut y = x;
    while y < TRIGAMMA_ASYMPTOTIC_FROM {
        y += 1.0;
        shift += 1;
    }
    // Asymptotic expansion in Bernoulli numbers; at y ≥ 20 the first omitted
    // term is below 1e-22 relative.
    let inv = 1.0 / y;
    let inv2 = inv * inv;
    let series = inv2
        * (1.0 / 6.0
            + inv2
                * (-1.0 / 30.0
                    + inv2
                        * (1.0 / 42.0
                            + inv2 * (-1.0 / 30.0 + inv2 * (5.0 / 66.0 + inv2 * (-691.0 / 2730.0))))));
    let asymptotic = inv + 0.5 * inv2 + inv * series;

    // Recurrence terms, added smallest first.
    let mut acc = CompensatedSum::new();
    acc.add(asymptotic);
    for i in (0..shift).rev() {
        let z = x + i as f64;
        acc.add(1.0 / (z * z));
    }
    acc.value()
}

/// SplitMix64 output function; used to derive independent stream seeds from a
/// master seed.
pub fn splitmix64(state: u64) -> u64 {
    let mut z = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
