//! Lumped kernels and single-generation sampling for the genotype, distance
//! and occupancy chains.
//!
//! A generation is built in two stages: `m` parents are drawn with
//! replacement, proportionally to fitness, and each drawn chromosome then
//! mutates locus by locus. Fitness is `σ` on the master sequence and `1`
//! elsewhere, so both stages factor through the Hamming class.

use rand::Rng;

use crate::error::{Error, Result};
use crate::markov::DenseMatrix;
use crate::numeric::{ln_binomial, ln_multinomial, ln_pow, log_sum_exp, NeumaierSum};
use crate::params::ModelParams;
use crate::rng::uniform;
use crate::state::{hamming_class, DistanceVector, GenotypePopulation, OccupancyDistribution};

/// Lumped fitness `A_H(k)`: `σ` on class 0, `1` elsewhere.
pub fn fitness_lumped(k: usize, params: &ModelParams) -> Result<f64> {
    params.check_class(k)?;
    Ok(class_fitness(k, params.sigma()))
}

#[inline]
fn class_fitness(k: usize, sigma: f64) -> f64 {
    if k == 0 {
        sigma
    } else {
        1.0
    }
}

/// `ln M_H(b, c)` from the double binomial sum over `k` loci mutating away
/// from the master and `l` loci mutating back, with `k − l = c − b`.
pub(crate) fn ln_mutation_entry(b: usize, c: usize, params: &ModelParams) -> f64 {
    let ell = params.ell();
    let up = params.up_rate();
    let back = params.back_rate();
    let shift = c as i64 - b as i64;
    let terms = (0..=(ell - b)).filter_map(|k| {
        let l = k as i64 - shift;
        if l < 0 || l > b as i64 {
            return None;
        }
        let (k, l) = (k as u64, l as u64);
        let away = (ell - b) as u64;
        let b = b as u64;
        Some(
            ln_binomial(away, k)
                + ln_binomial(b, l)
                + ln_pow(up, k)
                + ln_pow(1.0 - up, away - k)
                + ln_pow(back, l)
                + ln_pow(1.0 - back, b - l),
        )
    });
    log_sum_exp(terms)
}

/// Single entry `M_H(b, c)` of the lumped mutation matrix.
pub fn mutation_kernel_lumped(b: usize, c: usize, params: &ModelParams) -> Result<f64> {
    params.check_class(b)?;
    params.check_class(c)?;
    Ok(ln_mutation_entry(b, c, params).exp())
}

/// The full `(ℓ+1) × (ℓ+1)` lumped mutation matrix with cumulative rows for
/// sampling.
#[derive(Debug, Clone)]
pub struct MutationKernel {
    matrix: DenseMatrix,
    cumulative: DenseMatrix,
}

impl MutationKernel {
    pub fn new(params: &ModelParams) -> Self {
        let n = params.ell() + 1;
        let mut matrix = DenseMatrix::zeros(n);
        let mut cumulative = DenseMatrix::zeros(n);
        for b in 0..n {
            let mut acc = NeumaierSum::default();
            for c in 0..n {
                let v = ln_mutation_entry(b, c, params).exp();
                matrix.set(b, c, v);
                acc.add(v);
                cumulative.set(b, c, acc.value());
            }
        }
        Self { matrix, cumulative }
    }

    pub fn ell(&self) -> usize {
        self.matrix.n() - 1
    }

    #[inline]
    pub fn get(&self, b: usize, c: usize) -> f64 {
        self.matrix.get(b, c)
    }

    pub fn row(&self, b: usize) -> &[f64] {
        self.matrix.row(b)
    }

    pub fn matrix(&self) -> &DenseMatrix {
        &self.matrix
    }

    /// Class reached by mutating a chromosome of class `b`.
    pub fn sample<R: Rng + ?Sized>(&self, b: usize, rng: &mut R) -> usize {
        sample_cumulative(self.cumulative.row(b), uniform(rng))
    }
}

/// Inverse-CDF lookup on a cumulative row; falls back to the last class with
/// positive mass when rounding leaves the total slightly below one.
fn sample_cumulative(cumulative: &[f64], u: f64) -> usize {
    let total = *cumulative.last().unwrap();
    let target = u * total;
    match cumulative.iter().position(|&c| target < c) {
        Some(i) => i,
        None => {
            let mut i = cumulative.len() - 1;
            while i > 0 && cumulative[i] == cumulative[i - 1] {
                i -= 1;
            }
            i
        }
    }
}

/// The lumped model: parameters plus the precomputed mutation matrix.
#[derive(Debug, Clone)]
pub struct LumpedModel {
    params: ModelParams,
    mutation: MutationKernel,
}

impl LumpedModel {
    pub fn new(params: ModelParams) -> Self {
        let mutation = MutationKernel::new(&params);
        Self { params, mutation }
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn mutation(&self) -> &MutationKernel {
        &self.mutation
    }

    #[inline]
    pub fn fitness(&self, k: usize) -> f64 {
        class_fitness(k, self.params.sigma())
    }

    fn total_fitness(&self, o: &OccupancyDistribution) -> f64 {
        o.counts()
            .iter()
            .enumerate()
            .map(|(k, &c)| c as f64 * self.fitness(k))
            .sum()
    }

    /// `F_O(k, o)`: probability that a sampled parent lies in class `k`.
    pub fn selection_weight(&self, k: usize, o: &OccupancyDistribution) -> f64 {
        o.get(k) as f64 * self.fitness(k) / self.total_fitness(o)
    }

    /// The whole selection law `F_O(·, o)`.
    pub fn selection_law(&self, o: &OccupancyDistribution) -> Vec<f64> {
        let total = self.total_fitness(o);
        o.counts()
            .iter()
            .enumerate()
            .map(|(k, &c)| c as f64 * self.fitness(k) / total)
            .collect()
    }

    /// Class law of a single offspring: `Σ_k F_O(k,o) M_H(k,h)`.
    pub fn offspring_law(&self, o: &OccupancyDistribution) -> Vec<f64> {
        let sel = self.selection_law(o);
        let n = self.params.ell() + 1;
        (0..n)
            .map(|h| {
                let mut acc = NeumaierSum::default();
                for (k, &w) in sel.iter().enumerate() {
                    if w > 0.0 {
                        acc.add(w * self.mutation.get(k, h));
                    }
                }
                acc.value()
            })
            .collect()
    }

    /// `ln p_O(o, o')`, including the multinomial factor `m!/∏ o'(h)!` that
    /// turns the ordered-offspring product into a kernel on occupancy states.
    pub fn ln_transition_prob_occupancy(&self, o: &OccupancyDistribution, next: &OccupancyDistribution) -> f64 {
        let law = self.offspring_law(o);
        let mut acc = ln_multinomial(next.counts());
        for (h, &count) in next.counts().iter().enumerate() {
            if count > 0 {
                if law[h] <= 0.0 {
                    return f64::NEG_INFINITY;
                }
                acc += count as f64 * law[h].ln();
            }
        }
        acc
    }

    pub fn transition_prob_occupancy(&self, o: &OccupancyDistribution, next: &OccupancyDistribution) -> f64 {
        self.ln_transition_prob_occupancy(o, next).exp()
    }

    /// `p_H(d, e) = ∏_i Σ_k F_H(k,d) M_H(k, e(i))`.
    pub fn transition_prob_distance(&self, d: &DistanceVector, e: &DistanceVector) -> f64 {
        let law = self.offspring_law(&d.occupancy(self.params.ell()));
        e.classes().iter().map(|&c| law[c]).product()
    }

    /// Dense occupancy kernel on all of `𝒫^m_{ℓ+1}`, states in
    /// [`OccupancyDistribution::enumerate`] order.
    pub fn occupancy_kernel(&self) -> (Vec<OccupancyDistribution>, DenseMatrix) {
        let states = OccupancyDistribution::enumerate(self.params.m(), self.params.ell());
        let n = states.len();
        let mut kernel = DenseMatrix::zeros(n);
        for (i, o) in states.iter().enumerate() {
            let law = self.offspring_law(o);
            for (j, next) in states.iter().enumerate() {
                let mut acc = ln_multinomial(next.counts());
                for (h, &count) in next.counts().iter().enumerate() {
                    if count > 0 {
                        acc += count as f64 * law[h].ln();
                    }
                }
                kernel.set(i, j, acc.exp());
            }
        }
        (states, kernel)
    }

    /// One generation of the occupancy chain.
    pub fn step_occupancy<R: Rng + ?Sized>(&self, o: &OccupancyDistribution, rng: &mut R) -> OccupancyDistribution {
        let cumulative = cumulate(&self.selection_law(o));
        let mut counts = vec![0; self.params.ell() + 1];
        for _ in 0..self.params.m() {
            let parent = sample_cumulative(&cumulative, uniform(rng));
            counts[self.mutation.sample(parent, rng)] += 1;
        }
        OccupancyDistribution::new(counts).expect("m >= 1")
    }

    /// One generation of the distance chain.
    pub fn step_distance<R: Rng + ?Sized>(&self, d: &DistanceVector, rng: &mut R) -> DistanceVector {
        self.step_distance_traced(d, rng).0
    }

    /// One generation of the distance chain, also returning the parent index
    /// of every offspring.
    pub fn step_distance_traced<R: Rng + ?Sized>(
        &self,
        d: &DistanceVector,
        rng: &mut R,
    ) -> (DistanceVector, Vec<usize>) {
        let weights: Vec<f64> = d.classes().iter().map(|&c| self.fitness(c)).collect();
        let cumulative = cumulate(&weights);
        let mut parents = Vec::with_capacity(d.m());
        let next = (0..d.m())
            .map(|_| {
                let parent = sample_cumulative(&cumulative, uniform(rng));
                parents.push(parent);
                self.mutation.sample(d.classes()[parent], rng)
            })
            .collect();
        (DistanceVector::new(next).expect("m >= 1"), parents)
    }
}

fn cumulate(weights: &[f64]) -> Vec<f64> {
    let mut acc = NeumaierSum::default();
    weights
        .iter()
        .map(|&w| {
            acc.add(w);
            acc.value()
        })
        .collect()
}

/// `F_O(k, o)` without a precomputed model.
pub fn selection_weight(k: usize, o: &OccupancyDistribution, params: &ModelParams) -> Result<f64> {
    params.check_class(k)?;
    o.check(params)?;
    let total: f64 = o
        .counts()
        .iter()
        .enumerate()
        .map(|(h, &c)| c as f64 * class_fitness(h, params.sigma()))
        .sum();
    Ok(o.get(k) as f64 * class_fitness(k, params.sigma()) / total)
}

pub fn transition_prob_occupancy(
    o: &OccupancyDistribution,
    next: &OccupancyDistribution,
    params: &ModelParams,
) -> Result<f64> {
    o.check(params)?;
    next.check(params)?;
    Ok(LumpedModel::new(*params).transition_prob_occupancy(o, next))
}

pub fn step_occupancy<R: Rng + ?Sized>(
    o: &OccupancyDistribution,
    params: &ModelParams,
    rng: &mut R,
) -> Result<OccupancyDistribution> {
    o.check(params)?;
    Ok(LumpedModel::new(*params).step_occupancy(o, rng))
}

pub fn step_distance<R: Rng + ?Sized>(d: &DistanceVector, params: &ModelParams, rng: &mut R) -> Result<DistanceVector> {
    d.check(params)?;
    Ok(LumpedModel::new(*params).step_distance(d, rng))
}

// Genotype level. These follow the unlumped definitions literally and serve
// as the reference the lumped kernels are checked against.

/// Fitness `A(u)` of a chromosome.
pub fn genotype_fitness(u: &[u8], params: &ModelParams) -> f64 {
    if u.iter().all(|&x| x == 0) {
        params.sigma()
    } else {
        1.0
    }
}

/// `M(u, v) = ∏_j ((1−q)·1{u_j = v_j} + q/(κ−1)·1{u_j ≠ v_j})`.
pub fn genotype_mutation_prob(u: &[u8], v: &[u8], params: &ModelParams) -> f64 {
    let q = params.q();
    let off = q / (params.kappa() as f64 - 1.0);
    u.iter()
        .zip(v)
        .map(|(a, b)| if a == b { 1.0 - q } else { off })
        .product()
}

/// `F(u, x)`: probability of sampling chromosome `u` from population `x`.
pub fn genotype_selection(u: &[u8], x: &GenotypePopulation, params: &ModelParams) -> f64 {
    let total: f64 = x.rows().map(|r| genotype_fitness(r, params)).sum();
    let copies = x.rows().filter(|r| *r == u).count();
    genotype_fitness(u, params) * copies as f64 / total
}

/// One generation of the genotype chain.
pub fn step_genotype<R: Rng + ?Sized>(
    x: &GenotypePopulation,
    params: &ModelParams,
    rng: &mut R,
) -> Result<GenotypePopulation> {
    Ok(step_genotype_traced(x, params, rng)?.0)
}

/// One generation of the genotype chain with parent indices.
pub fn step_genotype_traced<R: Rng + ?Sized>(
    x: &GenotypePopulation,
    params: &ModelParams,
    rng: &mut R,
) -> Result<(GenotypePopulation, Vec<usize>)> {
    if x.m() != params.m() || x.ell() != params.ell() || x.kappa() != params.kappa() {
        return Err(Error::InvalidState("population shape does not match parameters".into()));
    }
    let weights: Vec<f64> = x.rows().map(|r| genotype_fitness(r, params)).collect();
    let cumulative = cumulate(&weights);
    let kappa = params.kappa() as u8;
    let q = params.q();
    let mut letters = Vec::with_capacity(x.m() * x.ell());
    let mut parents = Vec::with_capacity(x.m());
    for _ in 0..x.m() {
        let parent = sample_cumulative(&cumulative, uniform(rng));
        parents.push(parent);
        for &letter in x.row(parent) {
            if uniform(rng) < q {
                // Uniform over the κ−1 other letters.
                let shift = rng.random_range(1..kappa);
                letters.push((letter + shift) % kappa);
            } else {
                letters.push(letter);
            }
        }
    }
    Ok((GenotypePopulation::from_letters(x.ell(), x.kappa(), letters), parents))
}

/// Hamming class of every chromosome in `x`.
pub fn distance_projection(x: &GenotypePopulation) -> DistanceVector {
    x.distances()
}

/// Number of copies of the master sequence in a genotype population.
pub fn master_count(x: &GenotypePopulation) -> usize {
    x.rows().filter(|r| hamming_class(r) == 0).count()
}
