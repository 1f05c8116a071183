//! Space-time isogeometric Petrov-Galerkin discretization of the linear
//! Schrodinger equation with B-splines of maximal smoothness.

pub mod bspline;
pub mod conditioning;
pub mod eigen;
pub mod error;
pub mod experiments;
pub mod linalg;
pub mod quadrature;
pub mod spacetime;
pub mod spatial;
pub mod structure;
pub mod temporal;
pub mod wave;

pub use bspline::{open_uniform_knots, KnotVector};
pub use conditioning::{conditioning_sweep, gevp_spectrum, ConditioningReport, NormKind, PencilSpectrum};
pub use error::{Error, Result};
pub use experiments::{ExperimentConfig, HarmonicOscillator};
pub use nalgebra::{DMatrix, DVector};
pub use num_complex::Complex64;
pub use spacetime::{assemble_spacetime, bartels_stewart_solve, direct_solve, DiscreteField, FieldValue, SpaceTimeSystem};
pub use spatial::{assemble_spatial, spatial_space, SpatialSpace, SpatialSystem};
pub use structure::{NearlyToeplitz, SplineSymbols, SymbolPolynomial};
pub use temporal::{assemble_temporal, scaled_system, solve_scalar_ivp, TemporalMatrices};
pub use wave::{assemble_block_system, BlockKind, BlockSystem};
