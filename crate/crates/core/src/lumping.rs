//! Brute-force checks that the genotype chain lumps exactly onto the distance
//! chain, and the distance chain onto the occupancy chain.
//!
//! Only feasible at tiny sizes: the genotype check visits every pair of
//! populations in `(𝒜^ℓ)^m`.

use crate::error::{Error, Result};
use crate::model::{genotype_fitness, genotype_mutation_prob, genotype_selection, LumpedModel};
use crate::params::ModelParams;
use crate::state::{genotype_from_index, hamming_class, DistanceVector, GenotypePopulation, OccupancyDistribution};

/// Upper limit on `|𝒜^ℓ|^m` for the genotype enumeration.
pub const MAX_GENOTYPE_POPULATIONS: usize = 1 << 16;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LumpingReport {
    /// `max |Σ_{y: ℍ(y)=e} P(x,y) − p_H(ℍ(x), e)|` over all `x`, `e`.
    pub genotype_to_distance: f64,
    /// `max |Σ_{e: 𝒪_H(e)=o'} p_H(d,e) − p_O(𝒪_H(d), o')|` over all `d`, `o'`.
    pub distance_to_occupancy: f64,
}

impl LumpingReport {
    pub fn max_error(&self) -> f64 {
        self.genotype_to_distance.max(self.distance_to_occupancy)
    }
}

pub fn lumping_errors(params: &ModelParams) -> Result<LumpingReport> {
    Ok(LumpingReport {
        genotype_to_distance: genotype_to_distance_error(params)?,
        distance_to_occupancy: distance_to_occupancy_error(params)?,
    })
}

/// Law of one offspring genotype, `v ↦ Σ_u F(u,x) M(u,v)`, from the
/// unlumped definitions.
fn offspring_genotype_law(x: &GenotypePopulation, genotypes: &[Vec<u8>], params: &ModelParams) -> Vec<f64> {
    let selection: Vec<f64> = genotypes.iter().map(|u| genotype_selection(u, x, params)).collect();
    genotypes
        .iter()
        .map(|v| {
            genotypes
                .iter()
                .zip(&selection)
                .filter(|(_, &w)| w > 0.0)
                .map(|(u, &w)| w * genotype_mutation_prob(u, v, params))
                .sum()
        })
        .collect()
}

/// Genotype transition probability `P(x, y) = ∏_i Σ_u F(u,x) M(u, y_i)`.
pub fn genotype_transition_prob(x: &GenotypePopulation, y: &GenotypePopulation, params: &ModelParams) -> f64 {
    let total: f64 = x.rows().map(|r| genotype_fitness(r, params)).sum();
    y.rows()
        .map(|v| {
            x.rows()
                .map(|u| genotype_fitness(u, params) / total * genotype_mutation_prob(u, v, params))
                .sum::<f64>()
        })
        .product()
}

pub fn genotype_to_distance_error(params: &ModelParams) -> Result<f64> {
    let (ell, m, kappa) = (params.ell(), params.m(), params.kappa());
    let g = kappa
        .checked_pow(ell as u32)
        .ok_or_else(|| Error::Precondition("alphabet too large".into()))?;
    let populations = g
        .checked_pow(m as u32)
        .filter(|&n| n <= MAX_GENOTYPE_POPULATIONS)
        .ok_or_else(|| {
            Error::Precondition(format!(
                "(kappa^ell)^m too large for enumeration (ell={ell}, m={m}, kappa={kappa})"
            ))
        })?;

    let genotypes: Vec<Vec<u8>> = (0..g).map(|i| genotype_from_index(i, ell, kappa)).collect();
    let class: Vec<usize> = genotypes.iter().map(|u| hamming_class(u)).collect();
    let model = LumpedModel::new(*params);
    let distances = DistanceVector::enumerate(m, ell);
    let mut buckets = vec![0.0; distances.len()];
    let mut worst = 0.0f64;

    for xi in 0..populations {
        let x = GenotypePopulation::from_index(xi, m, ell, kappa);
        let law = offspring_genotype_law(&x, &genotypes, params);
        buckets.iter_mut().for_each(|b| *b = 0.0);
        accumulate(&law, &class, ell + 1, m, 1.0, 0, &mut buckets);
        let d = x.distances();
        for (e, &mass) in distances.iter().zip(&buckets) {
            worst = worst.max((mass - model.transition_prob_distance(&d, e)).abs());
        }
    }
    Ok(worst)
}

/// Sum `∏_i law(y_i)` over all offspring populations `y`, bucketed by the
/// index of `ℍ(y)`.
fn accumulate(
    law: &[f64],
    class: &[usize],
    base: usize,
    remaining: usize,
    prod: f64,
    index: usize,
    buckets: &mut [f64],
) {
    if remaining == 0 {
        buckets[index] += prod;
        return;
    }
    for (v, &w) in law.iter().enumerate() {
        if w > 0.0 {
            accumulate(
                law,
                class,
                base,
                remaining - 1,
                prod * w,
                index * base + class[v],
                buckets,
            );
        }
    }
}

pub fn distance_to_occupancy_error(params: &ModelParams) -> Result<f64> {
    let (ell, m) = (params.ell(), params.m());
    let model = LumpedModel::new(*params);
    let distances = DistanceVector::enumerate(m, ell);
    let occupancies = OccupancyDistribution::enumerate(m, ell);
    let mut worst = 0.0f64;
    for d in &distances {
        let mut buckets: Vec<f64> = vec![0.0; occupancies.len()];
        for e in &distances {
            let o = e.occupancy(ell);
            let slot = occupancies.binary_search(&o).expect("enumeration is sorted");
            buckets[slot] += model.transition_prob_distance(d, e);
        }
        let from = d.occupancy(ell);
        for (o, &mass) in occupancies.iter().zip(&buckets) {
            worst = worst.max((mass - model.transition_prob_occupancy(&from, o)).abs());
        }
    }
    Ok(worst)
}
