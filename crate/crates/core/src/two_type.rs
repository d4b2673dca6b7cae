//! Exact finite-`m` computations for the two-type master-count chain `Z^θ`.
//!
//! From `h` masters, `i` parents are masters with probability
//! `Binom(m, σh/((σ−1)h+m))(i)`; each master stays a master with probability
//! `M_H(0,0)` and each background chromosome (class `θ`) becomes one with
//! probability `M_H(θ,0)`. The last two binomials only depend on `i`, so
//! their convolution is formed once per `i` and the kernel is a single
//! weighted sum per row.

use rayon::prelude::*;

use crate::coupling::Theta;
use crate::error::{Error, Result};
use crate::markov::{absorbing_functional, expected_hitting_times, AbsorbingSolution, DenseMatrix};
use crate::model::ln_mutation_entry;
use crate::numeric::{compensated_sum, ln_binomial_law, log_sum_exp};
use crate::params::ModelParams;

/// Largest population size accepted by [`TwoTypeKernel::build`].
pub const MAX_M: usize = 2000;

#[derive(Debug, Clone)]
pub struct TwoTypeKernel {
    params: ModelParams,
    theta: Theta,
    ln_p: Vec<f64>,
    linear: DenseMatrix,
}

impl TwoTypeKernel {
    pub fn build(params: &ModelParams, theta: Theta) -> Result<Self> {
        let m = params.m();
        if m > MAX_M {
            return Err(Error::Precondition(format!(
                "m = {m} exceeds {MAX_M} for the dense two-type kernel"
            )));
        }
        let n = m + 1;
        let stay = ln_mutation_entry(0, 0, params).exp();
        let enter = ln_mutation_entry(theta.class(params.ell()), 0, params).exp();
        let sigma = params.sigma();

        // conv[i][k]: law of the master count among offspring of i master and
        // m − i background parents.
        let conv: Vec<Vec<f64>> = (0..n)
            .into_par_iter()
            .map(|i| {
                let from_masters = ln_binomial_law(i, stay);
                let from_background = ln_binomial_law(m - i, enter);
                (0..n)
                    .map(|k| {
                        let lo = k.saturating_sub(m - i);
                        let hi = k.min(i);
                        if lo > hi {
                            return f64::NEG_INFINITY;
                        }
                        log_sum_exp((lo..=hi).map(|j| from_masters[j] + from_background[k - j]))
                    })
                    .collect()
            })
            .collect();

        let rows: Vec<Vec<f64>> = (0..n)
            .into_par_iter()
            .map(|h| {
                let x = sigma * h as f64 / ((sigma - 1.0) * h as f64 + m as f64);
                let select = ln_binomial_law(m, x);
                (0..n)
                    .map(|k| log_sum_exp((0..n).map(|i| select[i] + conv[i][k])))
                    .collect()
            })
            .collect();

        let ln_p = rows.concat();
        let mut linear = DenseMatrix::zeros(n);
        for h in 0..n {
            for k in 0..n {
                linear.set(h, k, ln_p[h * n + k].exp());
            }
        }
        Ok(Self {
            params: *params,
            theta,
            ln_p,
            linear,
        })
    }

    pub fn m(&self) -> usize {
        self.params.m()
    }

    pub fn theta(&self) -> Theta {
        self.theta
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn ln_prob(&self, h: usize, k: usize) -> f64 {
        self.ln_p[h * (self.m() + 1) + k]
    }

    pub fn prob(&self, h: usize, k: usize) -> f64 {
        self.linear.get(h, k)
    }

    pub fn matrix(&self) -> &DenseMatrix {
        &self.linear
    }

    pub fn max_row_sum_error(&self) -> f64 {
        self.linear.max_row_sum_error()
    }

    /// `E(τ₀ | Z₀ = i)` for `i = 0..=m` (zero at `i = 0`).
    pub fn expected_hitting_time(&self) -> Result<AbsorbingSolution> {
        expected_hitting_times(&self.linear, &self.absorbing_target())
    }

    /// `E(Σ_{n=0}^{τ₀} f(Z_n/m) | Z₀ = i)` for `i = 0..=m`; both endpoints are
    /// included, so the terminal `f(0)` is added to every entry.
    pub fn occupation_functional(&self, f: impl Fn(f64) -> f64) -> Result<Vec<f64>> {
        let m = self.m() as f64;
        let rhs: Vec<f64> = (0..=self.m()).map(|i| f(i as f64 / m)).collect();
        let terminal = f(0.0);
        let sol = absorbing_functional(&self.linear, &self.absorbing_target(), &rhs)?;
        Ok(sol.values.into_iter().map(|u| u + terminal).collect())
    }

    fn absorbing_target(&self) -> Vec<bool> {
        (0..=self.m()).map(|i| i == 0).collect()
    }

    /// Whether every row of `self` stochastically dominates the same row of
    /// `other`, up to `tol` on the tail sums.
    pub fn dominates(&self, other: &TwoTypeKernel, tol: f64) -> bool {
        let n = self.m() + 1;
        if other.m() + 1 != n {
            return false;
        }
        (0..n).all(|h| {
            let (mut a, mut b) = (0.0, 0.0);
            (0..n).rev().all(|k| {
                a += self.prob(h, k);
                b += other.prob(h, k);
                a >= b - tol
            })
        })
    }
}

/// Row sums after exponentiation, with compensation.
pub fn row_sums(kernel: &TwoTypeKernel) -> Vec<f64> {
    (0..=kernel.m())
        .map(|h| compensated_sum(kernel.matrix().row(h).iter().copied()))
        .collect()
}
