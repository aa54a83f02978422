//! Multiple-proposal Markov chain Monte Carlo driven by pseudo-random or
//! completely uniformly distributed (CUD) sequences.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod diagnostics;
pub mod discrepancy;
pub mod driving;
pub mod finite_chain;
pub mod par;
pub mod proposals;
pub mod runner;
pub mod samplers;
pub mod targets;
