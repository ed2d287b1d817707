//! Pullback metrics, subbundle splittings, verification projectors, and
//! symplectic integration of geodesic flow on simulation state-spaces.
//!
//! The construction pipeline is: a coordinate map `F: M -> N` and a constant
//! native metric `g_N` induce the pulled-back metric `P = J^T g_N J` on the
//! simulation space. An SVD of `P` splits the (co)tangent space into a range
//! sector, where `P` is faithful, and a kernel (gauge) sector, which the
//! map does not see. Adding a gauge mass on the kernel sector yields a
//! full-rank metric whose geodesic flow leaves the gauge directions inert.

pub mod fields;
pub mod flow;
pub mod map;
pub mod quaternion;
pub mod subbundle;

pub use fields::{NaturalMetricField, TorusMetricField, WaterMetricField};
pub use flow::{
    geodesic_hamiltonian, hamiltonian_flow, integrate_symplectic, GeodesicFlow, IntegratorOptions,
    MetricField, Method, Monitor, PhaseFlow, PhaseState, Potential,
};
pub use map::{pullback_metric, pushforward_trajectory, rigid_body_map, torus_map, NativeMetric, PullbackMap};
pub use quaternion::quaternion_rotation;
pub use subbundle::{
    natural_metric, split_subbundles, verification_projector, FNaturalMetric, SubbundleSplit,
};
