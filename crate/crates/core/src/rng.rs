//! Seeded, splittable random streams.
//!
//! Every sampling routine takes its generator explicitly. Independent
//! replicas draw from disjoint ChaCha streams of one seed, so results do not
//! depend on scheduling or thread count.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

/// Generator for stream `stream` of master seed `seed`.
pub fn stream(seed: u64, stream: u64) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Uniform draw on `[0, 1)`.
#[inline]
pub fn uniform<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    rng.random::<f64>()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn streams_are_reproducible_and_distinct() {
        let a: Vec<f64> = (0..4).map(|_| uniform(&mut stream(7, 0))).collect();
        let mut r0 = stream(7, 0);
        let mut r1 = stream(7, 1);
        let x0: Vec<f64> = (0..4).map(|_| uniform(&mut r0)).collect();
        let x1: Vec<f64> = (0..4).map(|_| uniform(&mut r1)).collect();
        assert_eq!(a[0], x0[0]);
        assert_ne!(x0, x1);
        assert!(x0.iter().chain(&x1).all(|&u| (0.0..1.0).contains(&u)));
    }
}
