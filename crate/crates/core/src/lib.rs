//! Trajectory simulation on pullback state-spaces.
//!
//! The library integrates dynamical trajectories on simulation manifolds that
//! carry a metric and a symplectic structure induced by a coordinate map
//! `F: M -> N` into a native state-space. The same machinery covers
//! classical mechanics (geodesics on a torus, quaternionic rigid bodies) and
//! open quantum systems (Lindblad channels unravelled into stochastic
//! Schrödinger trajectories, pulled back onto diagonal tensor-network
//! state-spaces of fixed Schmidt rank).
//!
//! Module map:
//!
//! * [`geometry`] — pullback metrics, SVD subbundle splittings, verification
//!   projectors, and symplectic integration of geodesic flow.
//! * [`stochastic`] — seeded noise streams and generic Itô / Stratonovich
//!   stepping.
//! * [`quantum`] — spin operators, Lindblad channels, Kraus-pair
//!   unravellings, Bloch thermalization, and the normalized Itô stochastic
//!   Schrödinger increment with measurement records.
//! * [`pullback`] — reduced-dimension quantum simulation: pulled-back Kähler
//!   metrics, pseudo-inverse musical solves, the factored `O(r^2 n)` metric
//!   matvec on diagonal matrix-product states, and projected Itô increments
//!   with the noncovariant drift correction.
//! * [`experiments`] — the three reference scenarios (torus geodesics, water
//!   molecule, two-spin dynamic nuclear polarization) with dense oracles.
//! * [`record`] — trajectory records shared by all runners.

pub mod error;
pub mod experiments;
pub mod geometry;
pub mod linalg;
pub mod pullback;
pub mod quantum;
pub mod record;
pub mod stochastic;

pub use error::Error;

/// Scalar type used throughout. All tolerances in this crate assume IEEE-754
/// double precision.
pub type Real = f64;

/// Complex scalar for Hilbert-space amplitudes.
pub type C64 = num_complex::Complex<f64>;
