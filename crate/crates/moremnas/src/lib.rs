//! Constrained multi-objective architecture search for super-resolution
//! networks: an NSGA-II variant with cell-level crossover and forward-gap
//! crowding, hierarchical mutation whose dominant branch is an LSTM
//! controller trained by REINFORCE, and an analytic cost model paired with
//! a deterministic surrogate (or external trainer) for the quality axis.

pub mod controller;
pub mod error;
pub mod eval;
pub mod genetic;
pub mod moo;
pub mod pipeline;
pub mod space;

pub use error::{Error, Result};
