//! The model tuple (σ, ℓ, m, κ, q) and its derived quantities.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Parameters of the Wright–Fisher model on the sharp-peak landscape.
///
/// Only the five primary values are serialized; the coupling parameter `p`,
/// the mutation intensity `a = ℓq` and the ratio `α = m/ℓ` are always derived.
///
/// `q = 0` is accepted as the degenerate mutation-free model so that the
/// no-mutation limits can be exercised; everything that needs mutation to be
/// irreducible reports an error instead.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawModelParams", into = "RawModelParams")]
pub struct ModelParams {
    sigma: f64,
    ell: usize,
    m: usize,
    kappa: usize,
    q: f64,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawModelParams {
    sigma: f64,
    ell: usize,
    m: usize,
    kappa: usize,
    q: f64,
}

impl TryFrom<RawModelParams> for ModelParams {
    type Error = Error;

    fn try_from(raw: RawModelParams) -> Result<Self> {
        ModelParams::new(raw.sigma, raw.ell, raw.m, raw.kappa, raw.q)
    }
}

impl From<ModelParams> for RawModelParams {
    fn from(p: ModelParams) -> Self {
        RawModelParams {
            sigma: p.sigma,
            ell: p.ell,
            m: p.m,
            kappa: p.kappa,
            q: p.q,
        }
    }
}

impl ModelParams {
    pub fn new(sigma: f64, ell: usize, m: usize, kappa: usize, q: f64) -> Result<Self> {
        if !(sigma.is_finite() && sigma >= 1.0) {
            return Err(Error::invalid("sigma", sigma, "sigma >= 1 and finite"));
        }
        if ell == 0 {
            return Err(Error::invalid("ell", ell, "ell >= 1"));
        }
        if m == 0 {
            return Err(Error::invalid("m", m, "m >= 1"));
        }
        if kappa < 2 {
            return Err(Error::invalid("kappa", kappa, "kappa >= 2"));
        }
        let q_max = 1.0 - 1.0 / kappa as f64;
        if !(q.is_finite() && q >= 0.0 && q < q_max) {
            return Err(Error::invalid("q", q, "0 <= q < 1 - 1/kappa"));
        }
        Ok(ModelParams {
            sigma,
            ell,
            m,
            kappa,
            q,
        })
    }

    /// Parameters in the scaling regime: `q = a / ℓ`.
    pub fn from_intensity(sigma: f64, ell: usize, m: usize, kappa: usize, a: f64) -> Result<Self> {
        if !(a.is_finite() && a > 0.0) {
            return Err(Error::invalid("a", a, "a > 0"));
        }
        Self::new(sigma, ell, m, kappa, a / ell.max(1) as f64)
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn ell(&self) -> usize {
        self.ell
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn kappa(&self) -> usize {
        self.kappa
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    /// `p = κq/(κ−1)`, so that `p(1 − 1/κ) = q`.
    pub fn p(&self) -> f64 {
        let k = self.kappa as f64;
        k * self.q / (k - 1.0)
    }

    /// Per-locus probability that a locus agreeing with the master mutates away.
    pub fn up_rate(&self) -> f64 {
        self.p() * (1.0 - 1.0 / self.kappa as f64)
    }

    /// Per-locus probability that a locus differing from the master mutates back.
    pub fn back_rate(&self) -> f64 {
        self.p() / self.kappa as f64
    }

    /// Mutation intensity `a = ℓq`.
    pub fn a(&self) -> f64 {
        self.ell as f64 * self.q
    }

    /// Population-to-length ratio `α = m/ℓ`.
    pub fn alpha(&self) -> f64 {
        self.m as f64 / self.ell as f64
    }

    pub fn is_neutral(&self) -> bool {
        self.sigma == 1.0
    }

    pub fn with_sigma(&self, sigma: f64) -> Result<Self> {
        Self::new(sigma, self.ell, self.m, self.kappa, self.q)
    }

    pub fn with_q(&self, q: f64) -> Result<Self> {
        Self::new(self.sigma, self.ell, self.m, self.kappa, q)
    }

    pub fn with_m(&self, m: usize) -> Result<Self> {
        Self::new(self.sigma, self.ell, m, self.kappa, self.q)
    }

    pub(crate) fn check_class(&self, k: usize) -> Result<()> {
        if k > self.ell {
            return Err(Error::Domain(format!("Hamming class {k} outside 0..={}", self.ell)));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derived_quantities() {
        let p = ModelParams::new(2.0, 10, 20, 4, 0.03).unwrap();
        assert!((p.p() * (1.0 - 0.25) - 0.03).abs() < 1e-15);
        assert!((p.up_rate() - 0.03).abs() < 1e-15);
        assert!((p.back_rate() - 0.01).abs() < 1e-15);
        assert!((p.a() - 0.3).abs() < 1e-15);
        assert_eq!(p.alpha(), 2.0);
    }

    #[test]
    fn rejects_out_of_range() {
        assert!(ModelParams::new(0.5, 3, 3, 2, 0.1).is_err());
        assert!(ModelParams::new(2.0, 0, 3, 2, 0.1).is_err());
        assert!(ModelParams::new(2.0, 3, 0, 2, 0.1).is_err());
        assert!(ModelParams::new(2.0, 3, 3, 1, 0.1).is_err());
        assert!(ModelParams::new(2.0, 3, 3, 2, 0.5).is_err());
        assert!(ModelParams::new(2.0, 3, 3, 2, -0.1).is_err());
        assert!(ModelParams::new(f64::NAN, 3, 3, 2, 0.1).is_err());
        let err = ModelParams::new(2.0, 3, 3, 3, 0.7).unwrap_err();
        assert!(err.to_string().contains("1 - 1/kappa"));
    }

    #[test]
    fn json_has_only_primary_keys() {
        let p = ModelParams::new(2.0, 4, 6, 3, 0.05).unwrap();
        let s = serde_json::to_string(&p).unwrap();
        let v: serde_json::Value = serde_json::from_str(&s).unwrap();
        let mut keys: Vec<_> = v.as_object().unwrap().keys().cloned().collect();
        keys.sort();
        assert_eq!(keys, ["ell", "kappa", "m", "q", "sigma"]);
        let back: ModelParams = serde_json::from_str(&s).unwrap();
        assert_eq!(back, p);
    }

    #[test]
    fn json_validation_and_unknown_keys() {
        let bad = r#"{"sigma":2.0,"ell":3,"m":3,"kappa":2,"q":0.6}"#;
        assert!(serde_json::from_str::<ModelParams>(bad).is_err());
        let extra = r#"{"sigma":2.0,"ell":3,"m":3,"kappa":2,"q":0.1,"p":0.2}"#;
        assert!(serde_json::from_str::<ModelParams>(extra).is_err());
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn json_round_trip_is_lossless(sigma in 1.0f64..10.0, ell in 1usize..100, m in 1usize..100, kappa in 2usize..6, q in 0.0f64..0.5) {
                let p = ModelParams::new(sigma, ell, m, kappa, q).unwrap();
                let back: ModelParams = serde_json::from_str(&serde_json::to_string(&p).unwrap()).unwrap();
                prop_assert_eq!(back, p);
            }
        }
    }
}
