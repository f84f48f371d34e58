//! Example Driven Modelling (EDM) for rule-based decision support systems.
//!
//! A decision problem is written down once as an exact rule ladder (the
//! oracle). From the oracle we generate a condition-covering labeled example
//! set, split it into train/test/blind parts, train a feed-forward network by
//! backpropagation (optionally evolving the input-variable subset with a
//! genetic algorithm), and finally blind-test the learned model against the
//! oracle. A separate module provides a census of spreadsheet formula
//! operator usage by vendor function class.

pub mod evaluation;
pub mod example_gen;
pub mod formula_census;
pub mod genetic_opt;
pub mod neural_net;
pub mod pipeline;
pub mod rule_model;

pub use rule_model::{DataRecord, DecisionLadder};
