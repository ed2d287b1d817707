//! The reference scenarios: torus geodesics, rigid-body water dynamics,
//! and two-spin dynamic nuclear polarization, each wired to its analytic
//! or dense oracle.

pub mod dnp;
pub mod torus;
pub mod water;

pub use dnp::{dnp_oracle, run_dnp, CouplingModel, DnpEquilibria, DnpScenario, DnpSummary, Scheme};
pub use torus::{run_torus, ThreadClass, TorusScenario, TorusSummary};
pub use water::{run_water, WaterScenario, WaterSummary};
