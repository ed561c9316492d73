//! Generative design toolkit for vacuum-jammed chainmail shells.
//!
//! The crate is organised along the design workflow:
//!
//! - [`units`]: chainmail unit-cell geometry (solid-to-gap ratio, section constants, sheet weight)
//! - [`profile2d`]: sinusoidal section profiles and the per-shape deformation envelope
//! - [`shell3d`]: seeded control grids, spline surfaces, triangle meshes and depth maps
//! - [`filter`]: perimeter/area measurement and greedy selection of distinct forms
//! - [`loads`]: dead, live, snow and wind load cases and the span deflection limit
//! - [`fem`]: a linear-elastic 3D beam-frame solver used for shell and shelter checks
//! - [`optimizer`]: drainage gating, shelter metrics, grading and weighted ranking

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod fem;
pub mod filter;
pub mod loads;
pub mod optimizer;
pub mod profile2d;
pub mod rng;
pub mod shell3d;
pub mod spline;
pub mod units;

pub use error::{Error, Result};
