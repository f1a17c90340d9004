//! Hawkes-process models of online discussion trees.

pub mod baselines;
pub mod eval;
pub mod hawkes;
pub mod ingest;
pub mod kernels;
pub mod optim;
pub mod rng;
pub mod special;
pub mod temporal;
pub mod tree;
