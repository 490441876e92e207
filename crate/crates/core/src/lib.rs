//! Co-evolution of candidate programs and unit tests, steered by per-individual
//! beliefs that are updated from execution outcomes and anchored on the
//! problem's public examples.

pub mod belief;
pub mod engine;
pub mod gateway;
pub mod harness;
pub mod lab;
pub mod operators;
pub mod population;
pub mod sandbox;
