//! Saddle-node heterodimensional cycles, numerically.
pub mod central;
pub mod domains;
pub mod hypotheses;
pub mod numeric;
pub mod return_map;
pub mod scanner;
pub mod skew;
pub mod tree;
