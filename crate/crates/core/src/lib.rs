// `!(x > 0.0)` is used throughout to reject NaN along with out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod assoc;
pub mod costmodel;
pub mod itcs;
pub mod network;
pub mod scenario;
pub mod simcore;
pub mod sor;
pub mod vehicle;
pub mod world;
