//! Shallow-arch rod toolkit.
//!
//! Pipeline: a polygonal cross-section is normalized to principal axes and
//! triangulated; 2D cell problems on the section condense the elastic energy
//! into a per-station 4×4 stiffness acting on the generalized strain
//! (stretch, two bending curvature rates, twist rate); the 1D rod energy is
//! minimized with Hermite/linear elements under loads and boundary
//! conditions; and the 1D limit density is compared against the full 3D
//! energy of an explicit recovery deformation of the thin tube.

pub mod analytic;
pub mod cell;
pub mod config;
pub mod energy;
pub mod error;
pub mod gamma;
pub mod geometry;
pub mod material;
pub mod quadrature;
pub mod report;
pub mod section;
pub mod solver;

pub use error::{Error, Result};
