//! Isotropic realizability of current fields `j = σ∇u` and reconstruction of
//! the conductivity `σ` from flows of the field.

pub mod catalog;
pub mod dsl;
pub mod export;
pub mod field;
pub mod flows;
pub mod func1d;
pub mod geometry;
pub mod invariants;
pub mod ode;
pub mod optimize;
pub mod periodic;
pub mod planar;
pub mod realizer;

pub use field::{FieldError, VectorField};
pub use geometry::{Aabb, Point3, Vec3};
