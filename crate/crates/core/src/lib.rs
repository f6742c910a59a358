//! Spline regression with knots chosen by trend filtering.
//!
//! A penalty path of the trend filter proposes knot sets, least-squares
//! splines are fitted on each, and an extended BIC picks one. Full grids and
//! scattered points in any dimension are handled with tensor-product bases.
//! The guide in `book/` walks through each stage.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod clusterext;
pub mod error;
pub mod evalbench;
pub mod genlasso;
pub mod knotsel1d;
pub mod linalg;
pub mod metrics;
pub mod penalty;
pub mod splinekit;
pub mod tensorfit;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/bsplines.md")]
    mod bsplines {}
    #[doc = include_str!("../../../book/src/penalty_path.md")]
    mod penalty_path {}
    #[doc = include_str!("../../../book/src/knot_selection.md")]
    mod knot_selection {}
    #[doc = include_str!("../../../book/src/grids.md")]
    mod grids {}
    #[doc = include_str!("../../../book/src/scattered.md")]
    mod scattered {}
    #[doc = include_str!("../../../book/src/benchmarks.md")]
    mod benchmarks {}
}
