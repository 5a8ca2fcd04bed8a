//! Spectral laboratory for magnetic Schrödinger operators `-(∇ - iA)²` with
//! Robin boundary conditions on exterior domains.
//!
//! The pipeline is: [`geometry`] builds a masked lattice for the exterior
//! region Ω, the obstacle K and the full truncated box; [`field`] turns a
//! magnetic field model into Peierls link phases; [`assembly`] builds sparse
//! Hermitian matrices from the discrete quadratic form; [`eigensolve`]
//! extracts certified spectra; [`spectra`] compares eigenvalue clusters with
//! Landau levels and probes the resolvent difference; [`cli`] runs whole
//! experiments from flat config files.

pub mod assembly;
pub mod cli;
pub mod eigensolve;
pub mod exec;
pub mod field;
pub mod geometry;
pub mod spectra;

pub use num_complex::Complex64;

pub use assembly::{apply_form, assemble, direct_sum, HermitianOperator, InnerBoundary, Region};
pub use eigensolve::{eigs_lowest, eigs_window, residual, SolverOptions, SpectrumResult};
pub use field::{field_matrix, link_phase, vector_potential, FieldKind, FieldSpec, LinkPhases};
pub use geometry::{boundary_measure, build_grid, DomainSpec, MaskedGrid, Obstacle, TruncationShape};
pub use spectra::{cluster_report, landau_levels, ClusterReport, EssentialSpectrumModel};
