//! Shortest closed Minkowski billiard trajectories on products of centrally
//! symmetric convex bodies, and the volume-product checks they feed.
//!
//! The crate has four layers:
//!
//! * [`geometry`] — convex bodies in several closed-form representations,
//!   with gauges, supports, polars, and relative inradii;
//! * [`path`] — closed polygonal paths measured in a dual gauge, together
//!   with certificate-producing length-bound verifiers;
//! * [`billiard`] / [`capacity`] — trajectory criticality, the bounce map,
//!   and the shortest-trajectory capacity estimators;
//! * [`mahler`] — volumes, volume products, and the classical inequality
//!   checks at the end of the pipeline.
//!
//! Everything is deterministic given the seeds passed in; randomized searches
//! derive per-instance streams from a single seed.

pub mod billiard;
pub mod capacity;
pub mod error;
pub mod exports;
pub mod geometry;
pub mod mahler;
pub(crate) mod numerics;
pub mod path;
pub mod tol;

pub use error::{Error, Result};
pub use geometry::{BodySpec, ConvexBody, Direction, Inradius};
pub use tol::Tolerances;

/// Re-exported numeric helpers that are part of the public testing surface.
pub mod numeric {
    pub use crate::numerics::{
        caratheodory_reduce, conv_membership, finite_diff_check, hull_distance,
        random_unit_vector, stream_rng, HullMembershipCertificate,
    };
}
