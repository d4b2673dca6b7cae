//! The single-chromosome mutation chain `Y_n` on Hamming classes and the
//! discovery time of the master sequence.
//!
//! `Y_n` has transition matrix `M_H` and is reversible with respect to the
//! binomial law `𝓑(ℓ, 1 − 1/κ)`. Before the first master appears, selection
//! plays no role (every chromosome has fitness 1), so the discovery time is a
//! functional of the neutral chain.

use rand::Rng;
use rayon::prelude::*;

use crate::coupling::CheckStatus;
use crate::error::{Error, Result};
use crate::markov::{expected_hitting_times, DenseMatrix};
use crate::model::{LumpedModel, MutationKernel};
use crate::numeric::{ln_binomial, ln_binomial_pmf};
use crate::params::ModelParams;
use crate::rng::{stream, uniform};
use crate::state::{DistanceVector, OccupancyDistribution};
use crate::stats::{chi_square_gof, mean_and_se, ChiSquareResult};

/// `𝓑(b) = C(ℓ,b) (1−1/κ)^b (1/κ)^{ℓ−b}`.
pub fn binomial_equilibrium(b: usize, ell: usize, kappa: usize) -> Result<f64> {
    if b > ell {
        return Err(Error::Domain(format!("class {b} outside 0..={ell}")));
    }
    if kappa < 2 {
        return Err(Error::invalid("kappa", kappa, "kappa >= 2"));
    }
    Ok(ln_binomial_pmf(ell as u64, b as u64, 1.0 - 1.0 / kappa as f64).exp())
}

pub fn binomial_equilibrium_law(ell: usize, kappa: usize) -> Vec<f64> {
    (0..=ell)
        .map(|b| binomial_equilibrium(b, ell, kappa).expect("b <= ell"))
        .collect()
}

/// The chain `Y_n` with kernel `M_H`.
#[derive(Debug, Clone)]
pub struct MutationChain {
    params: ModelParams,
    kernel: MutationKernel,
}

impl MutationChain {
    pub fn new(ell: usize, kappa: usize, q: f64) -> Result<Self> {
        let params = ModelParams::new(1.0, ell, 1, kappa, q)?;
        Ok(Self {
            kernel: MutationKernel::new(&params),
            params,
        })
    }

    pub fn ell(&self) -> usize {
        self.params.ell()
    }

    pub fn kernel(&self) -> &DenseMatrix {
        self.kernel.matrix()
    }

    /// `max |𝓑(b)M_H(b,c) − 𝓑(c)M_H(c,b)|`.
    pub fn detailed_balance_error(&self) -> f64 {
        let law = binomial_equilibrium_law(self.ell(), self.params.kappa());
        let mut worst = 0.0f64;
        for b in 0..=self.ell() {
            for c in 0..=self.ell() {
                let lhs = law[b] * self.kernel.get(b, c);
                let rhs = law[c] * self.kernel.get(c, b);
                worst = worst.max((lhs - rhs).abs());
            }
        }
        worst
    }

    /// Law of `Y_n` given `Y_0 = from`.
    pub fn n_step_law(&self, from: usize, n: usize) -> Vec<f64> {
        let mut law = vec![0.0; self.ell() + 1];
        law[from] = 1.0;
        self.propagate(&law, n)
    }

    /// Push an initial law forward `n` steps.
    pub fn propagate(&self, law: &[f64], n: usize) -> Vec<f64> {
        let mut law = law.to_vec();
        for _ in 0..n {
            law = self.kernel().left_mul(&law);
        }
        law
    }

    /// `E(inf{n ≥ 0 : Y_n ∈ target} | Y_0 = from)`.
    pub fn hitting_time(&self, from: usize, target: &[usize]) -> Result<f64> {
        if target.is_empty() {
            return Err(Error::Domain("empty target set".into()));
        }
        if from > self.ell() || target.iter().any(|&t| t > self.ell()) {
            return Err(Error::Domain("class outside 0..=ell".into()));
        }
        let mut mask = vec![false; self.ell() + 1];
        for &t in target {
            mask[t] = true;
        }
        Ok(expected_hitting_times(self.kernel(), &mask)?.values[from])
    }
}

/// `E(τ | Y_0 = from)` for the hitting time of `target`.
pub fn hitting_time_y(ell: usize, kappa: usize, q: f64, from: usize, target: &[usize]) -> Result<f64> {
    MutationChain::new(ell, kappa, q)?.hitting_time(from, target)
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct BoundReport {
    pub checked: usize,
    pub violations: usize,
    /// Largest `value / bound` seen.
    pub worst_ratio: f64,
}

impl BoundReport {
    pub fn holds(&self) -> bool {
        self.violations == 0
    }
}

/// Relative slack granted to exactly computed bounds for rounding.
const BOUND_SLACK: f64 = 1e-12;

/// `P(Y_n = 0 | Y_0 = b) ≤ 𝓑(0)/𝓑(b)` for every `b` and `n ≤ n_max`.
pub fn return_probability_bound_check(ell: usize, kappa: usize, q: f64, n_max: usize) -> Result<BoundReport> {
    let chain = MutationChain::new(ell, kappa, q)?;
    let law = binomial_equilibrium_law(ell, kappa);
    // Column 0 of P^n: P(Y_n = 0 | Y_0 = b) for every b at once.
    let mut hit: Vec<f64> = (0..=ell).map(|b| if b == 0 { 1.0 } else { 0.0 }).collect();
    let mut report = BoundReport {
        checked: 0,
        violations: 0,
        worst_ratio: 0.0,
    };
    for n in 0..=n_max {
        if n > 0 {
            hit = chain.kernel().mul_vec(&hit);
        }
        for b in 0..=ell {
            let bound = law[0] / law[b];
            let ratio = hit[b] / bound;
            report.checked += 1;
            report.worst_ratio = report.worst_ratio.max(ratio);
            if ratio > 1.0 + BOUND_SLACK {
                report.violations += 1;
            }
        }
    }
    Ok(report)
}

/// `κ^{−ℓ}(ℓ/2b)^b ≤ 𝓑(b) ≤ ℓ^b κ^{−(ℓ−b)}` for all `b ≤ ℓ/2`, in log space.
pub fn equilibrium_sandwich_check(ell: usize, kappa: usize) -> Result<BoundReport> {
    if kappa < 2 || ell == 0 {
        return Err(Error::Domain("need ell >= 1 and kappa >= 2".into()));
    }
    let lk = (kappa as f64).ln();
    let le = (ell as f64).ln();
    let mut report = BoundReport {
        checked: 0,
        violations: 0,
        worst_ratio: 0.0,
    };
    for b in 0..=ell / 2 {
        let ln_b =
            ln_binomial(ell as u64, b as u64) + b as f64 * (1.0 - 1.0 / kappa as f64).ln() - (ell - b) as f64 * lk;
        let lower = -(ell as f64) * lk
            + if b == 0 {
                0.0
            } else {
                b as f64 * (ell as f64 / (2.0 * b as f64)).ln()
            };
        let upper = b as f64 * le - (ell - b) as f64 * lk;
        report.checked += 1;
        let worst = (lower - ln_b).max(ln_b - upper);
        report.worst_ratio = report.worst_ratio.max(worst.exp());
        if lower > ln_b + BOUND_SLACK || ln_b > upper + BOUND_SLACK {
            report.violations += 1;
        }
    }
    Ok(report)
}

/// `P(Y_n ≥ ln ℓ | Y_0 = 0)`: a diagnostic for how fast a single chromosome
/// leaves the neighbourhood of the master. Reported, not asserted.
pub fn escape_probability(ell: usize, kappa: usize, q: f64, n: usize) -> Result<f64> {
    let chain = MutationChain::new(ell, kappa, q)?;
    let law = chain.n_step_law(0, n);
    let threshold = (ell as f64).ln();
    Ok(law
        .iter()
        .enumerate()
        .filter(|(b, _)| *b as f64 >= threshold)
        .map(|(_, p)| p)
        .sum())
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct AncestralReport {
    /// Empirical law of `D_n(1)` against the `n`-step law of `Y`.
    pub marginal: ChiSquareResult,
    /// Smallest p-value over the per-class transition tests along sampled
    /// ancestral lines, if any class had enough visits.
    pub ancestral_min_p: Option<f64>,
    pub status: CheckStatus,
}

/// Samples below which the marginal test is reported as indeterminate.
const MIN_ANCESTRAL_SAMPLES: usize = 200;
/// p-value threshold of the goodness-of-fit tests.
pub const GOF_LEVEL: f64 = 1e-3;

/// Compare the marginal law of one individual of the neutral distance process
/// with the mutation chain `Y`, starting from i.i.d. classes drawn from
/// `start_law`, and the transitions along the ancestral line of that
/// individual with the rows of `M_H`.
pub fn ancestral_marginal_check<R: Rng + ?Sized>(
    params: &ModelParams,
    start_law: &[f64],
    n: usize,
    samples: usize,
    rng: &mut R,
) -> Result<AncestralReport> {
    if !params.is_neutral() {
        return Err(Error::Precondition(
            "the ancestral-line identity needs sigma = 1".into(),
        ));
    }
    let ell = params.ell();
    if start_law.len() != ell + 1 {
        return Err(Error::Domain("start law must have ell + 1 entries".into()));
    }
    let model = LumpedModel::new(*params);
    let chain = MutationChain::new(ell, params.kappa(), params.q())?;
    let cumulative: Vec<f64> = start_law
        .iter()
        .scan(0.0, |acc, &p| {
            *acc += p;
            Some(*acc)
        })
        .collect();

    let mut marginal = vec![0u64; ell + 1];
    let mut transitions = vec![vec![0u64; ell + 1]; ell + 1];
    let mut history: Vec<(DistanceVector, Vec<usize>)> = Vec::with_capacity(n);
    for _ in 0..samples {
        let start: Vec<usize> = (0..params.m())
            .map(|_| {
                let u = uniform(rng);
                cumulative.iter().position(|&c| u < c).unwrap_or(ell)
            })
            .collect();
        let mut d = DistanceVector::new(start)?;
        history.clear();
        for _ in 0..n {
            let (next, parents) = model.step_distance_traced(&d, rng);
            history.push((d, parents));
            d = next;
        }
        marginal[d.classes()[0]] += 1;
        // Walk the line of individual 0 back to time 0, then read it forwards.
        let mut who = 0;
        let mut line = vec![d.classes()[0]];
        for (state, parents) in history.iter().rev() {
            who = parents[who];
            line.push(state.classes()[who]);
        }
        for w in line.windows(2) {
            // w[1] is the ancestor of w[0].
            transitions[w[1]][w[0]] += 1;
        }
    }

    let expected = chain.propagate(start_law, n);
    let marginal = chi_square_gof(&marginal, &expected)?;
    let mut ancestral_min_p: Option<f64> = None;
    for (b, counts) in transitions.iter().enumerate() {
        let total: u64 = counts.iter().sum();
        if total < 100 {
            continue;
        }
        let p = chi_square_gof(counts, chain.kernel().row(b))?.p_value;
        ancestral_min_p = Some(ancestral_min_p.map_or(p, |q| q.min(p)));
    }
    let status = if samples < MIN_ANCESTRAL_SAMPLES {
        CheckStatus::Indeterminate
    } else if marginal.p_value > GOF_LEVEL && ancestral_min_p.is_none_or(|p| p > GOF_LEVEL) {
        CheckStatus::Pass
    } else {
        CheckStatus::Fail
    };
    Ok(AncestralReport {
        marginal,
        ancestral_min_p,
        status,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct DiscoveryEstimate {
    pub mean: f64,
    pub se: f64,
    pub censored_fraction: f64,
    /// Set when more than 10% of replicas hit the horizon: the mean then
    /// only bounds `E(τ*)` from below.
    pub lower_bound_only: bool,
    pub replicas: usize,
    pub horizon: u64,
}

/// Censoring fraction above which the estimate is flagged.
pub const MAX_CENSORED_FRACTION: f64 = 0.1;

/// Default horizon `50 κ^ℓ`, saturating.
pub fn default_horizon(ell: usize, kappa: usize) -> u64 {
    (kappa as u64)
        .checked_pow(ell as u32)
        .and_then(|k| k.checked_mul(50))
        .unwrap_or(u64::MAX)
}

/// Monte Carlo estimate of `E(τ*)` for the occupancy chain started in `start`
/// (no master present). Replica `r` uses stream `r` of `seed`; results are
/// reduced in replica order so the estimate does not depend on threading.
pub fn discovery_time_mc(
    params: &ModelParams,
    start: &OccupancyDistribution,
    replicas: usize,
    horizon: Option<u64>,
    seed: u64,
) -> Result<DiscoveryEstimate> {
    start.check(params)?;
    if start.has_master() {
        return Err(Error::Precondition(
            "discovery time needs a start without master sequence".into(),
        ));
    }
    if replicas == 0 {
        return Err(Error::invalid("replicas", replicas, "replicas >= 1"));
    }
    let horizon = horizon.unwrap_or_else(|| default_horizon(params.ell(), params.kappa()));
    // Selection is invisible before the first master appears.
    let model = LumpedModel::new(params.with_sigma(1.0)?);
    let times: Vec<(u64, bool)> = (0..replicas)
        .into_par_iter()
        .map(|r| {
            let mut rng = stream(seed, r as u64);
            let mut o = start.clone();
            let mut n = 0u64;
            while n < horizon {
                o = model.step_occupancy(&o, &mut rng);
                n += 1;
                if o.has_master() {
                    return (n, false);
                }
            }
            (n, true)
        })
        .collect();
    let values: Vec<f64> = times.iter().map(|&(t, _)| t as f64).collect();
    let censored = times.iter().filter(|t| t.1).count() as f64 / replicas as f64;
    let (mean, se) = mean_and_se(&values);
    Ok(DiscoveryEstimate {
        mean,
        se,
        censored_fraction: censored,
        lower_bound_only: censored > MAX_CENSORED_FRACTION,
        replicas,
        horizon,
    })
}

/// Occupancy states accepted by [`discovery_time_exact`].
pub const MAX_EXACT_STATES: usize = 1500;

/// Exact `E(τ*)` by an absorbing solve on the occupancy chain with the
/// master-containing states as target.
pub fn discovery_time_exact(params: &ModelParams, start: &OccupancyDistribution) -> Result<f64> {
    start.check(params)?;
    let model = LumpedModel::new(params.with_sigma(1.0)?);
    let states = OccupancyDistribution::enumerate(params.m(), params.ell());
    if states.len() > MAX_EXACT_STATES {
        return Err(Error::Precondition(format!(
            "{} occupancy states exceed {MAX_EXACT_STATES}",
            states.len()
        )));
    }
    let (states, kernel) = model.occupancy_kernel();
    let target: Vec<bool> = states.iter().map(|o| o.has_master()).collect();
    let t = expected_hitting_times(&kernel, &target)?;
    let idx = states.binary_search(start).expect("validated state");
    Ok(t.values[idx])
}

/// The bound `m · E(τ₀ | Y_0 = ℓ)` on the expected discovery time.
pub fn discovery_upper_bound(params: &ModelParams) -> Result<f64> {
    Ok(params.m() as f64 * hitting_time_y(params.ell(), params.kappa(), params.q(), params.ell(), &[0])?)
}
