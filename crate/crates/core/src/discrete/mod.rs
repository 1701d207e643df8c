//! Discrete covariant calculus on structured chart meshes.

pub mod field;
pub mod graph;
pub mod io;
pub mod mesh;
pub mod norms;
pub mod ops;

pub use field::{multisets, DiscreteField, SymTensorField, TensorField};
pub use graph::{coprime_offsets, LatticeGraph};
pub use io::{from_binary, from_csv, to_binary, to_csv, GridData};
pub use mesh::{Lattice, Mesh};
pub use norms::{integrate_nodes, l2_inner, lp_norm, sobolev_norm, NormReport};
pub use ops::{
    antisymmetry, bochner_laplacian, covariant_derivative, d_s, d_s_star, gradient, hessian,
    laplacian, sampson_laplacian, symmetrize, trace_first_pair, weitzenbock_action,
    weitzenbock_at, weitzenbock_constant, MAX_SYM_DEGREE,
};
