//! Numerical core for graphs moving by powers of Gauss curvature.
//!
//! The evolution law is the parabolic Monge-Ampere problem
//! `u_t = det(D^2 u)^alpha / (1 + |grad u|^2)^(alpha beta)` on a bounded
//! strictly convex planar domain with zero Dirichlet data. The crate
//! provides the uniform-grid machinery (domains with cut cells, discrete
//! Monge-Ampere operators), the elliptic self-similar profile solver, an
//! explicit time stepper with sub/supersolution envelopes, closed-form
//! self-similar algebra and the diagnostics used to check asymptotic rates.
//!
//! The crate is `no_std` and only needs `alloc`. IO, configuration and the
//! command line live in the `gcflow` companion crate.

#![no_std]

extern crate alloc;
#[cfg(any(test, feature = "std"))]
extern crate std;

pub mod analysis;
pub mod banded;
pub mod domain;
mod error;
pub mod field;
pub mod flow;
mod math;
pub mod operator;
pub mod params;
pub mod profile;
pub mod radial;
pub mod selfsim;

pub use analysis::{RateFit, RateSeries, Sample, SymmetryMode};
pub use domain::{Domain, DomainKind};
pub use error::{Error, Result};
pub use field::ScalarField;
pub use flow::{Envelope, EvolutionState, FlowOptions, InitialData, Trajectory};
pub use operator::{OperatorOptions, Rotations, Scheme};
pub use params::FlowParams;
pub use profile::{ProfileOptions, ProfileSolution};
pub use selfsim::SelfSimilarLaw;
