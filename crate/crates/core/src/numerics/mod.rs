//! Numeric kernels: dense LP, hull certificates, derivative-free descent,
//! ray root finding, finite-difference checks, and deterministic RNG streams.
//!
//! Everything here is self-contained and independent of the geometry types so
//! each kernel can be tested against hand-computable oracles.

pub(crate) mod lp;

mod fd;
mod hull;
mod neldermead;
mod rng;
mod root;

pub use fd::finite_diff_check;
pub use hull::{caratheodory_reduce, conv_membership, hull_distance, HullMembershipCertificate};
pub use neldermead::{minimize_local, project_unit_blocks, DescentOptions};
pub use rng::{random_unit_vector, stream_rng};
pub use root::root_on_ray;
