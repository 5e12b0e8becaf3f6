//! Fundamental solutions, Weyl disks and the Weyl–Titchmarsh m-function for
//! half-line Schrödinger operators whose potential is a locally finite signed
//! Borel measure (atoms plus a piecewise polynomial density), together with
//! verification harnesses for the high-energy asymptotics of m.

pub mod asymptotics;
pub mod distributional;
pub mod error;
pub mod fundamental;
pub mod measure;
pub mod moments;
pub mod poly;
pub mod quad;
pub mod spectral;
pub mod weyl;

pub use asymptotics::{
    expansion, extract_error_function, first_order_m, residual_sweep, second_order_m,
    AsymptoticExpansion, ErrorFunctionIndex, RaySpec, ResidualRow,
};
pub use distributional::{
    bump, distributional_residual_sweep, lhs_integral, rhs_prediction, DistributionalRow,
    RhsPrediction, TestFunction,
};
pub use error::{Error, Result};
pub use fundamental::{
    solve_fundamental, transfer_matrix_oracle, transfer_matrix_oracle_normalized, wronskian,
    FundamentalSystem, NormalizedSolutions,
};
pub use measure::{Atom, DensityPiece, SignedMeasure, TotalVariationBudget};
pub use spectral::SpectralParameter;
pub use weyl::{exact_m_compact, m_shifted, m_truncated, weyl_disk, MEstimate, WeylDisk};
