//! Design, simulation and analysis toolkit for variable-stiffness
//! layer-jamming links with an internal flexible spine.
//!
//! The crate is organised bottom-up:
//!
//! - [`sheath`]: closed-form model of the jamming sheath (length envelope,
//!   bend limit, friction holding force).
//! - [`spine`]: flexible spine geometry (central pass-through gap, ligament
//!   sizing, length envelope, sheath compatibility).
//! - [`kinematics`]: constant-curvature arc pose and slot usage.
//! - [`stiffness`]: quasi-static resisting-force model, trace synthesis and
//!   calibration against measured maxima.
//! - [`pattern`]: flat cut pattern generation and SVG export.
//! - [`optimize`]: constrained grid search with coordinate refinement.
//! - [`analyze`]: experiment log ingestion and metrics.
//! - [`design`] and [`cli`]: the JSON design file and the `jamlink` command.
//!
//! Units at every public boundary are millimetres, degrees, kilopascals and
//! newtons.

pub mod analyze;
pub mod cli;
pub mod config;
pub mod design;
pub mod error;
pub mod kinematics;
pub mod optimize;
pub mod pattern;
pub mod sheath;
pub mod spine;
pub mod stiffness;

pub use error::{Error, Result};
