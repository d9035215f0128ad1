//! Certified worst-case bus voltage-magnitude bounds for radial and meshed
//! distribution networks whose power injections are only known to lie in an
//! ellipsoid.
//!
//! The power-flow equations and operating limits are written as Hermitian
//! quadratic forms in the monomial vector `[v_a conj(v_b); v; 1]`. A bound
//! `vmin_sq <= |v_k|²` is certified by a positive semidefinite combination of
//! those forms, augmented with "link" forms that vanish on every monomial
//! vector. Finding the tightest bounds is a semidefinite program, solved by
//! the interior-point method in [`sdp`]. [`oracle`] provides an independent
//! Monte-Carlo power-flow check.
//!
//! All numerical code is generic over [`Scalar`] (`f32` or `f64`); the
//! aliases below fix the scalar to `f64`.
//!
//! ```no_run
//! use voltbound::{solve_bounds, BoundsOptions, Network};
//!
//! let model = Network::from_json_file("network.json").unwrap();
//! let result = solve_bounds(&model, &BoundsOptions::default()).unwrap();
//! for bus in &result.buses {
//!     println!("bus {}: [{}, {}]", bus.bus, bus.vmin, bus.vmax);
//! }
//! ```

// `!(x > 0)` deliberately rejects NaN as well as non-positive values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bounds;
pub mod error;
pub mod feasibility;
pub mod linalg;
pub mod links;
pub mod network;
pub mod oracle;
pub mod quadratics;
pub mod scalar;
pub mod sdp;

pub use bounds::{solve_bounds, verify_result, BoundsOptions, SolveMode, VerifyOptions};
pub use error::{BoundsError, ModelError, Side, VerificationError};
pub use num_complex::Complex;
pub use scalar::Scalar;

pub type Network = network::NetworkModel<f64>;
pub type Admittance = network::AdmittanceMatrix<f64>;
pub type Form = quadratics::QuadraticForm<f64>;
pub type Catalog = links::LinkCatalog<f64>;
pub type Problem = sdp::SdpProblem<f64>;
pub type Bounds = bounds::BoundsResult<f64>;
pub type Envelope = oracle::Envelope<f64>;
