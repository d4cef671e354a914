//! Compositional deterministic hybrid dynamical systems.
//!
//! Hybrid phase spaces are directed reflexive multigraphs whose nodes carry
//! box-shaped continuous state spaces and whose edges carry jump relations.
//! On top of them the crate builds morphisms, open systems (surjective
//! submersions with a control pair `(X, ρ)`), products and interconnections,
//! event-driven executions with Zeno detection, networks of open systems with
//! a verifier for the induced-morphism theorem, an exact finite-set backend
//! for the same categorical machinery, and empirical Lyapunov stability with
//! transport along open maps.

pub mod error;
pub mod execution;
pub mod expr;
pub mod finite_cat;
pub mod morphisms;
pub mod networks;
pub mod numerics;
pub mod phase_space;
pub mod scenario;
pub mod stability;
pub mod systems;

pub mod catalog;

pub use error::Error;
