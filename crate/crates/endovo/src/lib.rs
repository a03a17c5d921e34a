//! Files and batch jobs around [`endovo_core`].
//!
//! [`io`] reads and writes every on-disk format the toolkit understands,
//! [`report`] produces the versioned JSON reports, and [`cli`] wires both to
//! the algorithms behind the `endovo` binary.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod io;
pub mod report;

pub use endovo_core as core;
