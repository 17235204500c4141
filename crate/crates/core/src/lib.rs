#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod grid;
pub mod tensor;
pub mod solver;
pub mod energy;
pub mod init;
mod spectral;
pub mod scheme;
pub mod verify;
