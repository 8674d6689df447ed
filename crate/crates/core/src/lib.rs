//! Numerical workbench for prescribing scalar curvature in a conformal
//! class on tetrahedral meshes.

pub mod cli;
pub mod error;
pub mod geometry;
pub mod global_iteration;
pub mod local_yamabe;
pub mod operators;
pub mod sphere_tools;

pub use error::{CywError, Result, Stage};
