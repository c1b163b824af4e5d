//! Monte Carlo for a two-dimensional neutron transport process: unit-speed
//! straight flights whose direction is redrawn uniformly at rate `λ`,
//! killed on hitting the boundary of a disk or convex polygon.
//!
//! Every particle draws from its own counter-based stream keyed by
//! `(seed, particle index)`, so results do not depend on the number of
//! worker threads.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bound;
pub mod error;
pub mod geometry;
pub mod qsd;
pub mod sim;
pub mod survival;

pub use bound::{
    check_disk_assumption_b, disk_assumption_b_params, verify_transport_density_bound, AssumptionBParams, BoundTable,
    CellPartition,
};
pub use error::{NeutronError, Result};
pub use geometry::{Domain, Point, Region};
pub use qsd::{estimate_qsd, Bins, QsdHistogram, QsdMode};
pub use sim::{particle_rng, simulate_path, InitLaw, Neutron, NeutronSpec, PathRecord, PdmpState};
pub use survival::{estimate_lambda0, estimate_survival_curve, Lambda0Estimate, SurvivalCurve};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
