//! Exact enforcement of Dirichlet, Neumann and Robin boundary conditions through
//! solution structures, with uniform-grid calculus and a small trainable ansatz.

pub mod expr;
pub mod geometry;
pub mod grid;
pub mod structure;
pub mod train;
