//! State spaces of the three nested chains.
//!
//! A genotype population is an `m × ℓ` array over `{0,…,κ−1}`; the master
//! sequence is the all-zero chromosome. Mapping each chromosome to its Hamming
//! class gives a [`DistanceVector`], and counting classes gives an
//! [`OccupancyDistribution`].

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::ModelParams;

/// Counts `o(0), …, o(ℓ)` of chromosomes per Hamming class.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct OccupancyDistribution(Vec<usize>);

impl OccupancyDistribution {
    pub fn new(counts: Vec<usize>) -> Result<Self> {
        if counts.is_empty() {
            return Err(Error::InvalidState("occupancy needs at least one class".into()));
        }
        if counts.iter().sum::<usize>() == 0 {
            return Err(Error::InvalidState("occupancy of an empty population".into()));
        }
        Ok(Self(counts))
    }

    /// All `m` chromosomes in class `class`.
    pub fn concentrated(m: usize, ell: usize, class: usize) -> Self {
        let mut counts = vec![0; ell + 1];
        counts[class] = m;
        Self(counts)
    }

    pub fn counts(&self) -> &[usize] {
        &self.0
    }

    pub fn get(&self, class: usize) -> usize {
        self.0[class]
    }

    pub fn m(&self) -> usize {
        self.0.iter().sum()
    }

    pub fn ell(&self) -> usize {
        self.0.len() - 1
    }

    /// Number of master sequences `o(0)`.
    pub fn masters(&self) -> usize {
        self.0[0]
    }

    /// Whether the population contains the master sequence (`o ∈ 𝒲*`).
    pub fn has_master(&self) -> bool {
        self.0[0] >= 1
    }

    /// Partial-sum order: every prefix sum of `self` is at most that of `other`.
    pub fn precedes(&self, other: &Self) -> bool {
        debug_assert_eq!(self.0.len(), other.0.len());
        let (mut a, mut b) = (0usize, 0usize);
        for (x, y) in self.0.iter().zip(&other.0) {
            a += x;
            b += y;
            if a > b {
                return false;
            }
        }
        true
    }

    pub fn check(&self, params: &ModelParams) -> Result<()> {
        if self.0.len() != params.ell() + 1 || self.m() != params.m() {
            return Err(Error::InvalidState(format!(
                "occupancy {self} is not a partition of m={} into {} classes",
                params.m(),
                params.ell() + 1
            )));
        }
        Ok(())
    }

    /// Every ordered partition of `m` into `ell + 1` parts, in lexicographic
    /// order of the count vector.
    pub fn enumerate(m: usize, ell: usize) -> Vec<Self> {
        fn rec(remaining: usize, slots: usize, prefix: &mut Vec<usize>, out: &mut Vec<OccupancyDistribution>) {
            if slots == 1 {
                prefix.push(remaining);
                out.push(OccupancyDistribution(prefix.clone()));
                prefix.pop();
                return;
            }
            for c in 0..=remaining {
                prefix.push(c);
                rec(remaining - c, slots - 1, prefix, out);
                prefix.pop();
            }
        }
        let mut out = Vec::new();
        rec(m, ell + 1, &mut Vec::with_capacity(ell + 1), &mut out);
        out
    }
}

impl fmt::Display for OccupancyDistribution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, c) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{c}")?;
        }
        write!(f, ")")
    }
}

/// Hamming classes `d(1), …, d(m)` of the individuals of a population.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DistanceVector(Vec<usize>);

impl DistanceVector {
    pub fn new(classes: Vec<usize>) -> Result<Self> {
        if classes.is_empty() {
            return Err(Error::InvalidState("empty distance vector".into()));
        }
        Ok(Self(classes))
    }

    pub fn uniform(m: usize, class: usize) -> Self {
        Self(vec![class; m])
    }

    pub fn classes(&self) -> &[usize] {
        &self.0
    }

    pub fn m(&self) -> usize {
        self.0.len()
    }

    /// Componentwise order.
    pub fn le(&self, other: &Self) -> bool {
        self.0.iter().zip(&other.0).all(|(a, b)| a <= b)
    }

    /// Occupancy projection `𝒪_H(d)`.
    pub fn occupancy(&self, ell: usize) -> OccupancyDistribution {
        let mut counts = vec![0; ell + 1];
        for &c in &self.0 {
            counts[c] += 1;
        }
        OccupancyDistribution(counts)
    }

    pub fn has_master(&self) -> bool {
        self.0.contains(&0)
    }

    pub fn check(&self, params: &ModelParams) -> Result<()> {
        if self.0.len() != params.m() || self.0.iter().any(|&c| c > params.ell()) {
            return Err(Error::InvalidState(format!(
                "distance vector {:?} incompatible with m={}, ell={}",
                self.0,
                params.m(),
                params.ell()
            )));
        }
        Ok(())
    }

    /// `{0,…,ℓ}^m` in lexicographic order.
    pub fn enumerate(m: usize, ell: usize) -> Vec<Self> {
        let base = ell + 1;
        let total = base.pow(m as u32);
        (0..total)
            .map(|mut idx| {
                let mut v = vec![0; m];
                for slot in v.iter_mut().rev() {
                    *slot = idx % base;
                    idx /= base;
                }
                Self(v)
            })
            .collect()
    }

    /// Position of this vector in [`DistanceVector::enumerate`].
    pub fn index(&self, ell: usize) -> usize {
        self.0.iter().fold(0, |acc, &c| acc * (ell + 1) + c)
    }
}

impl From<DistanceVector> for Vec<usize> {
    fn from(d: DistanceVector) -> Self {
        d.0
    }
}

/// An `m × ℓ` population over the alphabet `{0,…,κ−1}`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct GenotypePopulation {
    ell: usize,
    kappa: usize,
    letters: Vec<u8>,
}

impl GenotypePopulation {
    pub fn new(ell: usize, kappa: usize, rows: &[Vec<u8>]) -> Result<Self> {
        if rows.is_empty() || kappa > u8::MAX as usize + 1 {
            return Err(Error::InvalidState("empty population or alphabet too large".into()));
        }
        let mut letters = Vec::with_capacity(rows.len() * ell);
        for row in rows {
            if row.len() != ell || row.iter().any(|&x| x as usize >= kappa) {
                return Err(Error::InvalidState(format!("bad chromosome {row:?}")));
            }
            letters.extend_from_slice(row);
        }
        Ok(Self { ell, kappa, letters })
    }

    /// Population of `m` copies of the master sequence.
    pub fn master(m: usize, ell: usize, kappa: usize) -> Self {
        Self {
            ell,
            kappa,
            letters: vec![0; m * ell],
        }
    }

    pub(crate) fn from_letters(ell: usize, kappa: usize, letters: Vec<u8>) -> Self {
        debug_assert!(ell == 0 || letters.len().is_multiple_of(ell));
        Self { ell, kappa, letters }
    }

    pub fn m(&self) -> usize {
        self.letters.len() / self.ell
    }

    pub fn ell(&self) -> usize {
        self.ell
    }

    pub fn kappa(&self) -> usize {
        self.kappa
    }

    pub fn row(&self, i: usize) -> &[u8] {
        &self.letters[i * self.ell..(i + 1) * self.ell]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[u8]> {
        self.letters.chunks(self.ell)
    }

    /// `ℍ(x)`: Hamming distance of every chromosome to the all-zero master.
    pub fn distances(&self) -> DistanceVector {
        DistanceVector(self.rows().map(hamming_class).collect())
    }

    /// Population number `index` in the enumeration of `(𝒜^ℓ)^m`, individual 1
    /// being the most significant digit.
    pub fn from_index(index: usize, m: usize, ell: usize, kappa: usize) -> Self {
        let g = kappa.pow(ell as u32);
        let mut letters = vec![0u8; m * ell];
        let mut idx = index;
        for i in (0..m).rev() {
            let row = idx % g;
            idx /= g;
            letters[i * ell..(i + 1) * ell].copy_from_slice(&genotype_from_index(row, ell, kappa));
        }
        Self { ell, kappa, letters }
    }
}

/// Hamming class of a chromosome relative to the all-zero master.
pub fn hamming_class(u: &[u8]) -> usize {
    u.iter().filter(|&&x| x != 0).count()
}

/// Chromosome number `index` in the base-`κ` enumeration of `𝒜^ℓ`.
pub fn genotype_from_index(mut index: usize, ell: usize, kappa: usize) -> Vec<u8> {
    let mut u = vec![0u8; ell];
    for slot in u.iter_mut().rev() {
        *slot = (index % kappa) as u8;
        index /= kappa;
    }
    u
}

pub fn genotype_index(u: &[u8], kappa: usize) -> usize {
    u.iter().fold(0, |acc, &x| acc * kappa + x as usize)
}
