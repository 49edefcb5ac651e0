//! Analytical simulator and scheduler for heterogeneous sparse
//! matrix-multiplication accelerators.

pub mod archtemplate;
pub mod cli;
pub mod costmodel;
pub mod error;
pub mod formats;
pub mod kernel_spec;
pub mod kernels;
pub mod scheduler;
pub mod workloads;

pub use error::{Error, Result};
pub use kernel_spec::KernelSpec;
