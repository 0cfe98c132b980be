//! Exact construction and verification of frequently universal harmonic
//! functions on rooted trees with rational transition weights.
//!
//! Vertices are numbered breadth-first; all arithmetic is over
//! [`num_rational::BigRational`].

pub mod builder;
pub mod density;
pub mod error;
pub mod gen;
pub mod genericity;
pub mod harmonic;
mod intern;
pub mod l0;
pub mod measure;
pub mod rational;
pub mod schedule;
pub mod tree;
pub mod value;

pub use error::{Error, Result};
pub use harmonic::{check_harmonic, HarmonicFunction};
pub use l0::{l0_distance, Ball, StepFunction};
pub use rational::Q;
pub use tree::{Tree, Vertex, VertexEnumeration, Weights};
pub use value::{Value, ValueSpace};
