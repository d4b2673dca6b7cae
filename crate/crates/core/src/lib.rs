//! Wright–Fisher dynamics on the sharp-peak fitness landscape.
//!
//! The crate is organised bottom-up:
//!
//! * [`params`] and [`state`] hold the model tuple and the three state spaces
//!   (genotype populations, distance vectors, occupancy distributions).
//! * [`model`] evaluates the lumped selection and mutation kernels and samples
//!   single generations of each chain; [`lumping`] checks the lumped kernels
//!   against brute-force enumeration of the genotype chain.
//! * [`coupling`] realises all chains from one shared random input matrix per
//!   generation, together with the lower/upper bounding processes and the
//!   two-type master-count chain.
//! * [`two_type`] builds the exact two-type kernel and solves for absorption
//!   times and occupation functionals; [`markov`] holds the generic
//!   finite-chain linear algebra behind it.
//! * [`rate`] contains the binomial rate function, the drift map, the one-step
//!   cost and the grid shortest-path solver for the quasipotential.
//! * [`neutral`] covers the single-chromosome mutation chain and the discovery
//!   time of the master sequence.
//! * [`verify`] bundles the property battery used by the command-line tool.

pub mod coupling;
pub mod error;
pub mod lumping;
pub mod markov;
pub mod model;
pub mod neutral;
pub mod numeric;
pub mod params;
pub mod rate;
pub mod rng;
pub mod state;
pub mod stats;
pub mod two_type;
pub mod verify;

pub use error::{Error, Result};
pub use params::ModelParams;
pub use state::{DistanceVector, GenotypePopulation, OccupancyDistribution};
