//! Small numerical helpers shared by the kernels: log-space binomials,
//! log-sum-exp and compensated summation.

/// Largest `n` for which binomial coefficients are formed exactly in integers.
const EXACT_BINOMIAL_MAX: u64 = 64;

fn binomial_exact(n: u64, k: u64) -> u128 {
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        // acc * (n - i) is divisible by (i + 1) at every step.
        acc = acc * (n - i) as u128 / (i + 1) as u128;
    }
    acc
}

/// `ln C(n, k)`, `-inf` when `k > n`.
pub fn ln_binomial(n: u64, k: u64) -> f64 {
    if k > n {
        return f64::NEG_INFINITY;
    }
    if n <= EXACT_BINOMIAL_MAX {
        (binomial_exact(n, k) as f64).ln()
    } else {
        statrs::function::factorial::ln_binomial(n, k)
    }
}

/// `ln m! − Σ ln k_i!` for counts summing to `m`.
pub fn ln_multinomial(counts: &[usize]) -> f64 {
    let mut total = 0u64;
    let mut acc = 0.0;
    for &c in counts {
        total += c as u64;
        acc += ln_binomial(total, c as u64);
    }
    acc
}

/// `n · ln x` with the convention `0 · ln 0 = 0`.
pub fn ln_pow(x: f64, n: u64) -> f64 {
    if n == 0 {
        0.0
    } else {
        n as f64 * x.ln()
    }
}

/// Log of the binomial probability `C(n,k) x^k (1−x)^(n−k)`.
pub fn ln_binomial_pmf(n: u64, k: u64, x: f64) -> f64 {
    if k > n {
        return f64::NEG_INFINITY;
    }
    ln_binomial(n, k) + ln_pow(x, k) + ln_pow(1.0 - x, n - k)
}

/// Full binomial law `B(n, x)` in log space, indexed by `k = 0..=n`.
pub fn ln_binomial_law(n: usize, x: f64) -> Vec<f64> {
    (0..=n as u64).map(|k| ln_binomial_pmf(n as u64, k, x)).collect()
}

/// `ln Σ exp(v_i)`, returning `-inf` for an empty or all `-inf` input.
pub fn log_sum_exp(values: impl IntoIterator<Item = f64>) -> f64 {
    let values: Vec<f64> = values.into_iter().collect();
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    if max == f64::INFINITY {
        return f64::INFINITY;
    }
    let mut sum = NeumaierSum::default();
    for v in values {
        sum.add((v - max).exp());
    }
    max + sum.value().ln()
}

/// Neumaier's compensated summation.
#[derive(Debug, Default, Clone, Copy)]
pub struct NeumaierSum {
    sum: f64,
    compensation: f64,
}

impl NeumaierSum {
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

pub fn compensated_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut s = NeumaierSum::default();
    for v in values {
        s.add(v);
    }
    s.value()
}
