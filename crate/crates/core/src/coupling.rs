//! Shared-randomness coupling of the distance and occupancy chains, the
//! lower/upper bounding processes and the two-type master-count chain.
//!
//! One generation consumes an `m × (ℓ+1)` matrix of uniforms: column 0 picks
//! the parent, columns `1..=ℓ` drive the per-locus mutation thresholds. Every
//! chain built from the same matrix sees the same randomness, which is what
//! makes the order-preservation properties checkable path by path.
//!
//! Indices are 0-based throughout; a parent index `i` here is individual
//! `i + 1` in 1-based numbering.

use rand::Rng;

use crate::error::{Error, Result};
use crate::params::ModelParams;
use crate::rng::uniform;
use crate::state::{DistanceVector, OccupancyDistribution};
use crate::stats::covariance_with_se;

/// Which bounding process: `Lower` sends non-master chromosomes to class `ℓ`,
/// `Upper` to class `1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Theta {
    Lower,
    Upper,
}

impl Theta {
    /// The Hamming class `θ` the background is pushed to.
    pub fn class(self, ell: usize) -> usize {
        match self {
            Theta::Lower => ell,
            Theta::Upper => 1,
        }
    }
}

/// Random input of one generation.
#[derive(Debug, Clone, PartialEq)]
pub struct RandomInputMatrix {
    m: usize,
    width: usize,
    entries: Vec<f64>,
}

impl RandomInputMatrix {
    pub fn new(m: usize, ell: usize, entries: Vec<f64>) -> Result<Self> {
        if entries.len() != m * (ell + 1) {
            return Err(Error::Domain(format!(
                "expected {} entries, got {}",
                m * (ell + 1),
                entries.len()
            )));
        }
        if entries.iter().any(|u| !(0.0..1.0).contains(u)) {
            return Err(Error::Domain("random inputs must lie in [0, 1)".into()));
        }
        Ok(Self {
            m,
            width: ell + 1,
            entries,
        })
    }

    pub fn sample<R: Rng + ?Sized>(m: usize, ell: usize, rng: &mut R) -> Self {
        let mut r = Self {
            m,
            width: ell + 1,
            entries: vec![0.0; m * (ell + 1)],
        };
        r.refill(rng);
        r
    }

    /// Overwrite with fresh uniforms, reusing the buffer.
    pub fn refill<R: Rng + ?Sized>(&mut self, rng: &mut R) {
        for v in &mut self.entries {
            *v = uniform(rng);
        }
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn ell(&self) -> usize {
        self.width - 1
    }

    /// Selection variable of offspring `i`.
    #[inline]
    pub fn selection(&self, i: usize) -> f64 {
        self.entries[i * self.width]
    }

    /// Mutation variables of offspring `i`.
    #[inline]
    pub fn mutation(&self, i: usize) -> &[f64] {
        &self.entries[i * self.width + 1..(i + 1) * self.width]
    }
}

/// The coupled maps for a fixed parameter set.
#[derive(Debug, Clone, Copy)]
pub struct Coupling {
    params: ModelParams,
    back: f64,
    up_threshold: f64,
}

impl Coupling {
    pub fn new(params: ModelParams) -> Self {
        Self {
            params,
            back: params.back_rate(),
            up_threshold: 1.0 - params.up_rate(),
        }
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    /// `𝓜_H(b, u)`: the first `b` loci may mutate back, the remaining ones away.
    #[inline]
    pub fn mutate(&self, b: usize, u: &[f64]) -> usize {
        let (lost, gained) = u.split_at(b);
        let down = lost.iter().filter(|&&x| x < self.back).count();
        let up = gained.iter().filter(|&&x| x > self.up_threshold).count();
        b - down + up
    }

    /// `𝓢_H(d, s)`: index whose cumulative fitness interval contains `s`.
    pub fn select_distance(&self, d: &[usize], s: f64) -> usize {
        let sigma = self.params.sigma();
        let w = |c: usize| if c == 0 { sigma } else { 1.0 };
        let total: f64 = d.iter().map(|&c| w(c)).sum();
        let target = s * total;
        let mut acc = 0.0;
        for (i, &c) in d.iter().enumerate() {
            acc += w(c);
            if target < acc {
                return i;
            }
        }
        d.len() - 1
    }

    /// `𝓢_O(o, s)`: class whose cumulative `o·A_H` interval contains `s`.
    pub fn select_occupancy(&self, o: &[usize], s: f64) -> usize {
        let sigma = self.params.sigma();
        let total = o[0] as f64 * sigma + (o.iter().sum::<usize>() - o[0]) as f64;
        let target = s * total;
        let mut acc = 0.0;
        let mut last = 0;
        for (k, &c) in o.iter().enumerate() {
            if c == 0 {
                continue;
            }
            acc += c as f64 * if k == 0 { sigma } else { 1.0 };
            last = k;
            if target < acc {
                return k;
            }
        }
        last
    }

    /// `Ψ_H(d, R)`.
    pub fn step_distance(&self, d: &DistanceVector, r: &RandomInputMatrix) -> DistanceVector {
        let classes = d.classes();
        let next = (0..classes.len())
            .map(|i| {
                let parent = self.select_distance(classes, r.selection(i));
                self.mutate(classes[parent], r.mutation(i))
            })
            .collect();
        DistanceVector::new(next).expect("m >= 1")
    }

    /// `Ψ_O(o, R)`.
    pub fn step_occupancy(&self, o: &OccupancyDistribution, r: &RandomInputMatrix) -> OccupancyDistribution {
        let counts = o.counts();
        let mut next = vec![0; counts.len()];
        for i in 0..r.m() {
            let parent = self.select_occupancy(counts, r.selection(i));
            next[self.mutate(parent, r.mutation(i))] += 1;
        }
        OccupancyDistribution::new(next).expect("m >= 1")
    }

    /// `Ψ_O^θ(o, R)`: the bounding map, which agrees with `Ψ_O` until a master
    /// sequence appears and then collapses the background onto class `θ`.
    pub fn bounded_step(
        &self,
        o: &OccupancyDistribution,
        r: &RandomInputMatrix,
        theta: Theta,
    ) -> OccupancyDistribution {
        if o.has_master() {
            project(&self.step_occupancy(&project(o, theta), r), theta)
        } else {
            let next = self.step_occupancy(o, r);
            if next.has_master() {
                project(&next, theta)
            } else {
                next
            }
        }
    }

    /// One step of `Z^θ`: the master count after `Ψ_O^θ` applied to `Ξ^θ(z)`.
    pub fn two_type_step(&self, z: usize, r: &RandomInputMatrix, theta: Theta) -> usize {
        let o = xi(z, self.params.m(), self.params.ell(), theta);
        self.bounded_step(&o, r, theta).masters()
    }
}

/// `π_ℓ(o) = (o(0), 0, …, 0, m − o(0))`.
pub fn project_lower(o: &OccupancyDistribution) -> OccupancyDistribution {
    project(o, Theta::Lower)
}

/// `π_1(o) = (o(0), m − o(0), 0, …, 0)`.
pub fn project_upper(o: &OccupancyDistribution) -> OccupancyDistribution {
    project(o, Theta::Upper)
}

pub fn project(o: &OccupancyDistribution, theta: Theta) -> OccupancyDistribution {
    xi(o.masters(), o.m(), o.ell(), theta)
}

/// `Ξ^θ(i)`: `i` masters, the other `m − i` chromosomes in class `θ`.
pub fn xi(i: usize, m: usize, ell: usize, theta: Theta) -> OccupancyDistribution {
    let mut counts = vec![0; ell + 1];
    counts[0] = i;
    counts[theta.class(ell)] += m - i;
    OccupancyDistribution::new(counts).expect("m >= 1")
}

pub fn mutate_coupled(b: usize, u: &[f64], params: &ModelParams) -> Result<usize> {
    params.check_class(b)?;
    if u.len() != params.ell() {
        return Err(Error::Domain(format!(
            "need {} mutation uniforms, got {}",
            params.ell(),
            u.len()
        )));
    }
    Ok(Coupling::new(*params).mutate(b, u))
}

pub fn select_coupled_distance(d: &DistanceVector, s: f64, params: &ModelParams) -> Result<usize> {
    d.check(params)?;
    Ok(Coupling::new(*params).select_distance(d.classes(), s))
}

pub fn select_coupled_occupancy(o: &OccupancyDistribution, s: f64, params: &ModelParams) -> Result<usize> {
    o.check(params)?;
    Ok(Coupling::new(*params).select_occupancy(o.counts(), s))
}

pub fn coupled_step_distance(
    d: &DistanceVector,
    r: &RandomInputMatrix,
    params: &ModelParams,
) -> Result<DistanceVector> {
    d.check(params)?;
    check_input(r, params)?;
    Ok(Coupling::new(*params).step_distance(d, r))
}

pub fn coupled_step_occupancy(
    o: &OccupancyDistribution,
    r: &RandomInputMatrix,
    params: &ModelParams,
) -> Result<OccupancyDistribution> {
    o.check(params)?;
    check_input(r, params)?;
    Ok(Coupling::new(*params).step_occupancy(o, r))
}

pub fn bounded_step(
    o: &OccupancyDistribution,
    r: &RandomInputMatrix,
    params: &ModelParams,
    theta: Theta,
) -> Result<OccupancyDistribution> {
    o.check(params)?;
    check_input(r, params)?;
    Ok(Coupling::new(*params).bounded_step(o, r, theta))
}

pub fn two_type_step(z: usize, r: &RandomInputMatrix, params: &ModelParams, theta: Theta) -> Result<usize> {
    if z > params.m() {
        return Err(Error::Domain(format!("master count {z} exceeds m={}", params.m())));
    }
    check_input(r, params)?;
    Ok(Coupling::new(*params).two_type_step(z, r, theta))
}

fn check_input(r: &RandomInputMatrix, params: &ModelParams) -> Result<()> {
    if r.m() != params.m() || r.ell() != params.ell() {
        return Err(Error::Domain("random input shape does not match (m, ell)".into()));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub struct MonotonicityReport {
    pub trials: usize,
    pub violations: usize,
}

/// `Ψ_O` order preservation on random pairs `o ⪯ o′` with random inputs.
///
/// `o` is the occupancy of i.i.d. uniform classes; `o′` lowers each of those
/// classes to a uniform value below it, which reaches every pair above `o`.
pub fn monotonicity_random<R: Rng + ?Sized>(params: &ModelParams, trials: usize, rng: &mut R) -> MonotonicityReport {
    let (m, ell) = (params.m(), params.ell());
    let coupling = Coupling::new(*params);
    let mut r = RandomInputMatrix::sample(m, ell, rng);
    let mut violations = 0;
    for _ in 0..trials {
        let low: Vec<usize> = (0..m).map(|_| rng.random_range(0..=ell)).collect();
        let high: Vec<usize> = low.iter().map(|&c| rng.random_range(0..=c)).collect();
        let o = DistanceVector::new(low).expect("m >= 1").occupancy(ell);
        let o2 = DistanceVector::new(high).expect("m >= 1").occupancy(ell);
        debug_assert!(o.precedes(&o2));
        r.refill(rng);
        if !coupling
            .step_occupancy(&o, &r)
            .precedes(&coupling.step_occupancy(&o2, &r))
        {
            violations += 1;
        }
    }
    MonotonicityReport { trials, violations }
}

/// `Ψ_O` order preservation over every comparable pair of occupancy states,
/// for `inputs` random input matrices.
pub fn monotonicity_exhaustive<R: Rng + ?Sized>(
    params: &ModelParams,
    inputs: usize,
    rng: &mut R,
) -> MonotonicityReport {
    let (m, ell) = (params.m(), params.ell());
    let coupling = Coupling::new(*params);
    let states = OccupancyDistribution::enumerate(m, ell);
    let mut report = MonotonicityReport {
        trials: 0,
        violations: 0,
    };
    for _ in 0..inputs {
        let r = RandomInputMatrix::sample(m, ell, rng);
        let images: Vec<_> = states.iter().map(|o| coupling.step_occupancy(o, &r)).collect();
        for (i, a) in states.iter().enumerate() {
            for (j, b) in states.iter().enumerate() {
                if a.precedes(b) {
                    report.trials += 1;
                    if !images[i].precedes(&images[j]) {
                        report.violations += 1;
                    }
                }
            }
        }
    }
    report
}

/// The original occupancy chain and its two bounding processes, all driven by
/// the same random input.
#[derive(Debug, Clone)]
pub struct Sandwich {
    coupling: Coupling,
    pub lower: OccupancyDistribution,
    pub middle: OccupancyDistribution,
    pub upper: OccupancyDistribution,
}

impl Sandwich {
    pub fn new(params: ModelParams, start: OccupancyDistribution) -> Result<Self> {
        start.check(&params)?;
        Ok(Self {
            coupling: Coupling::new(params),
            lower: start.clone(),
            middle: start.clone(),
            upper: start,
        })
    }

    pub fn step(&mut self, r: &RandomInputMatrix) {
        self.lower = self.coupling.bounded_step(&self.lower, r, Theta::Lower);
        self.middle = self.coupling.step_occupancy(&self.middle, r);
        self.upper = self.coupling.bounded_step(&self.upper, r, Theta::Upper);
    }

    /// `O^ℓ ⪯ O ⪯ O^1`.
    pub fn ordered(&self) -> bool {
        self.lower.precedes(&self.middle) && self.middle.precedes(&self.upper)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SandwichReport {
    pub steps: usize,
    pub violations: usize,
    pub first_violation: Option<usize>,
}

/// Run the sandwich for `steps` generations and count order violations.
pub fn sandwich_run<R: Rng + ?Sized>(
    params: &ModelParams,
    start: OccupancyDistribution,
    steps: usize,
    rng: &mut R,
) -> Result<SandwichReport> {
    let mut sandwich = Sandwich::new(*params, start)?;
    let mut r = RandomInputMatrix::sample(params.m(), params.ell(), rng);
    let mut report = SandwichReport {
        steps,
        violations: 0,
        first_violation: None,
    };
    for n in 1..=steps {
        r.refill(rng);
        sandwich.step(&r);
        if !sandwich.ordered() {
            report.violations += 1;
            report.first_violation.get_or_insert(n);
        }
    }
    Ok(report)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub enum CheckStatus {
    Pass,
    Fail,
    Indeterminate,
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct CovarianceEstimate {
    pub label: String,
    pub covariance: f64,
    pub se: f64,
    pub status: CheckStatus,
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct CorrelationReport {
    pub estimates: Vec<CovarianceEstimate>,
}

impl CorrelationReport {
    pub fn status(&self) -> CheckStatus {
        if self.estimates.iter().any(|e| e.status == CheckStatus::Fail) {
            CheckStatus::Fail
        } else if self.estimates.iter().any(|e| e.status == CheckStatus::Indeterminate) {
            CheckStatus::Indeterminate
        } else {
            CheckStatus::Pass
        }
    }
}

/// Batches used for the standard error of each covariance.
const CORRELATION_BATCHES: usize = 20;

/// Monte Carlo check that non-decreasing functions of the neutral distance
/// process `D_n` are non-negatively correlated, starting from the product law
/// with i.i.d. coordinates drawn from `start_law`.
///
/// Each covariance passes when it is at least `−3σ̂`; it is indeterminate
/// when `σ̂` exceeds `max_se` or cannot be estimated.
pub fn positive_correlations_check<R: Rng + ?Sized>(
    params: &ModelParams,
    start_law: &[f64],
    n: usize,
    samples: usize,
    max_se: f64,
    rng: &mut R,
) -> Result<CorrelationReport> {
    if !params.is_neutral() {
        return Err(Error::Precondition(
            "positive correlations are only claimed for sigma = 1".into(),
        ));
    }
    if start_law.len() != params.ell() + 1 {
        return Err(Error::Domain("start law must have ell + 1 entries".into()));
    }
    let (m, ell) = (params.m(), params.ell());
    let coupling = Coupling::new(*params);
    let cumulative: Vec<f64> = start_law
        .iter()
        .scan(0.0, |acc, &p| {
            *acc += p;
            Some(*acc)
        })
        .collect();
    let draw_class = |u: f64| cumulative.iter().position(|&c| u < c).unwrap_or(ell);

    let mut r = RandomInputMatrix::sample(m, ell, rng);
    let mut finals = Vec::with_capacity(samples);
    for _ in 0..samples {
        let start: Vec<usize> = (0..m).map(|_| draw_class(uniform(rng))).collect();
        let mut d = DistanceVector::new(start).expect("m >= 1");
        for _ in 0..n {
            r.refill(rng);
            d = coupling.step_distance(&d, &r);
        }
        finals.push(d);
    }

    // Non-decreasing test functions: threshold indicators on the first two
    // coordinates, the first coordinate itself and the total distance.
    type TestFn = Box<dyn Fn(&DistanceVector) -> f64>;
    let mut functions: Vec<(String, TestFn)> = Vec::new();
    let second = 1.min(m - 1);
    for c in 1..=ell {
        functions.push((
            format!("1{{d1>={c}}}"),
            Box::new(move |d: &DistanceVector| (d.classes()[0] >= c) as u8 as f64),
        ));
        functions.push((
            format!("1{{d{}>={c}}}", second + 1),
            Box::new(move |d: &DistanceVector| (d.classes()[second] >= c) as u8 as f64),
        ));
    }
    functions.push(("d1".into(), Box::new(|d: &DistanceVector| d.classes()[0] as f64)));
    functions.push((
        "sum".into(),
        Box::new(|d: &DistanceVector| d.classes().iter().sum::<usize>() as f64),
    ));

    let values: Vec<Vec<f64>> = functions.iter().map(|(_, f)| finals.iter().map(f).collect()).collect();
    let mut estimates = Vec::new();
    for i in 0..functions.len() {
        for j in i..functions.len() {
            let (cov, se) = covariance_with_se(&values[i], &values[j], CORRELATION_BATCHES);
            let status = if cov == 0.0 && values[i].iter().chain(&values[j]).all(|&v| v == values[i][0]) {
                CheckStatus::Pass
            } else if !se.is_finite() || se > max_se {
                CheckStatus::Indeterminate
            } else if cov >= -3.0 * se {
                CheckStatus::Pass
            } else {
                CheckStatus::Fail
            };
            estimates.push(CovarianceEstimate {
                label: format!("{},{}", functions[i].0, functions[j].0),
                covariance: cov,
                se,
                status,
            });
        }
    }
    Ok(CorrelationReport { estimates })
}
