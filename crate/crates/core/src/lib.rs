//! Dwell-time stability certificates for linear switched systems whose
//! switching is constrained by a directed graph.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod certify;
pub mod format;
pub mod graph;
pub mod matrix;
pub mod planar;
pub mod scaling;
mod scan;
pub mod sim;
