//! Farkas certificates and witnessing subsystems for probabilistic
//! reachability in Markov decision processes.
//!
//! The model layer is exact throughout. Linear programs, the Farkas system
//! and the polytope heuristics are generic over [`Scalar`] and run over
//! `f64`, `f32` or exact [`Rational`]s; the aliases below name the common
//! instantiations.

pub mod certificates;
pub mod error;
pub mod hardness;
pub mod linsys;
pub mod model;
pub mod scalar;
pub mod treedp;
pub mod witness;

pub use certificates::{generate_certificate, verify_certificate, CertificateKind, FarkasCertificate};
pub use linsys::{build_farkas_system, reach_probabilities, reach_probability, FarkasSystem, LinearProgram, LpSolution};
pub use model::{parse_model, serialize_model, Direction, PropertySpec, ReachMdp, Relation, Subsystem};
pub use scalar::{Rational, Scalar};
pub use witness::{exact_minimal_witness, qs_heuristic, Flavor, PolytopeSpec, WitnessResult};

pub type ExactFarkasSystem = FarkasSystem<Rational>;
pub type FloatFarkasSystem = FarkasSystem<f64>;
pub type SingleFarkasSystem = FarkasSystem<f32>;

pub type ExactLp = LinearProgram<Rational>;
pub type FloatLp = LinearProgram<f64>;
pub type SingleLp = LinearProgram<f32>;

pub type ExactLpSolution = LpSolution<Rational>;
pub type FloatLpSolution = LpSolution<f64>;
