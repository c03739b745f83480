//! Left-Right splitting operator series for scattering of a TM wave by a
//! rough one-dimensional perfectly conducting surface, with the tools used
//! to control its convergence: residual stopping, dilating eigencomponent
//! analysis and subtraction, and scalar/vector Shanks acceleration.

pub mod eigen;
pub mod exec;
pub mod harness;
pub mod kernel;
pub mod linalg;
pub mod lr_series;
pub mod shanks;
pub mod specfun;
pub mod surface;

pub use exec::Execution;
pub use kernel::{incident_plane_wave, Discretization, IncidentField};
pub use linalg::CMatrix;
pub use lr_series::SeriesState;
pub use num_complex::Complex64;
pub use surface::SurfaceProfile;
