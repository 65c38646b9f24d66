//! Test support: random fixtures and reference implementations.
//!
//! Nothing in [`oracle`] calls into `una_core::metrics` or `una_core::tide`;
//! it only borrows the plain data types.

pub mod fixtures;
pub mod oracle;
