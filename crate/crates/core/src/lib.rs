//! Near-field localization of several users through fully digital, hybrid
//! and dynamic metasurface (DMA) receive arrays.
//!
//! The crate simulates spherical-wavefront pilots arriving at a planar array,
//! estimates user positions by alternating projection over a polar grid, and
//! designs the analog combining weights for hypothesized positions.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod channel;
pub mod error;
pub mod frontend;
pub mod geometry;
pub mod likelihood;
pub mod localizer;
pub mod metrics;
pub mod pipeline;
pub mod tuning;

pub use error::{Error, Result};

#[cfg(test)]
mod testutil;

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/array-and-channel.md")]
    mod array_and_channel {}
    #[doc = include_str!("../../../book/src/front-ends.md")]
    mod front_ends {}
    #[doc = include_str!("../../../book/src/localization.md")]
    mod localization {}
    #[doc = include_str!("../../../book/src/tuning.md")]
    mod tuning {}
    #[doc = include_str!("../../../book/src/experiments.md")]
    mod experiments {}
}
