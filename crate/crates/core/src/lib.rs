#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod cli;
pub mod datadriven;
pub mod graph;
pub mod lmi;
pub mod matrixcore;
pub mod sdpsolve;
pub mod synthesis;
pub mod truthoracle;
