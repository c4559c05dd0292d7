//! Spectra of quantum graphs: the negative second derivative on a compact
//! metric graph under Neumann-Kirchhoff vertex conditions.
//!
//! Eigenvalues of equilateral graphs reduce to a linear eigenvalue problem
//! on the underlying combinatorial graph. General graphs are handled by
//! sandwiching them between equilateral floor and ceil approximations whose
//! mapped spectra supply starting values for a Newton-trace iteration on
//! the vertex nonlinear eigenvalue problem `H(lambda) Phi = 0`; converged
//! vertex values then determine the eigenfunctions edge by edge.

pub mod eigenfunction;
pub mod equilateral;
pub mod generate;
pub mod graph;
pub mod io;
pub mod laplacian;
pub mod nep;

pub use graph::{clean, extend, gcd_representation, CombinatorialGraph, GraphError, MetricGraph};
