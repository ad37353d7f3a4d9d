//! A workbench for automaton groups acting on rooted m-ary trees: exact
//! tree-automorphism algebra, activity classification, mother groups and
//! their level subgroups, pattern measures with the ascension operators
//! (exact and Monte Carlo), and entropy estimation for random walks.

pub mod activity;
pub mod ascend;
pub mod bisim;
pub mod checks;
pub mod element;
pub mod entropy;
pub mod error;
pub mod evaluate;
pub mod measure;
pub mod mother;
pub mod orbits;
pub mod pattern;
pub mod perm;
pub mod rng;
pub mod spec;
pub mod walk;
pub mod weight;

pub use bisim::{Key, KeyMode, DEFAULT_CLOSURE_BUDGET};
pub use element::{Element, Portrait};
pub use error::{Error, Result};
pub use perm::{Letter, Permutation};
pub use spec::{AutomatonSpec, Gen, StateId, Word};

/// Numerical slack for float mass accounting.
pub const EPS_NUM: f64 = 1e-12;
