//! Compatibility and attainability of matrices of rank-based concordance
//! measures.

// `!(x > 0.0)` is used on purpose so that NaN fails range checks.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bern;
pub mod block;
pub mod hierarchy;
pub mod matrix;
pub mod measure;
pub mod sample;
pub mod samplers;
pub mod transforms;

pub use matrix::{CandidateMatrix, LowerTriangular, Matrix, MatrixError};
pub use measure::Measure;
pub use sample::SampleMatrix;

// Book chapters run as doctests.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/measures.md")]
    mod measures {}
    #[doc = include_str!("../../../book/src/compatibility.md")]
    mod compatibility {}
    #[doc = include_str!("../../../book/src/attainment.md")]
    mod attainment {}
    #[doc = include_str!("../../../book/src/block.md")]
    mod block {}
    #[doc = include_str!("../../../book/src/hierarchical.md")]
    mod hierarchical {}
    #[doc = include_str!("../../../book/src/bounds.md")]
    mod bounds {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
