// `!(a <= b)` is used on purpose so that NaN fails every gate.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod acceptance;
pub mod charfun;
pub mod error;
pub mod experiment;
pub mod fourier;
pub mod generators;
pub mod grid;
pub mod operators;
pub mod stieltjes;
pub mod verify;
