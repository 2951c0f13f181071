pub mod circle;
pub mod contour;
pub mod eigen;
pub mod experiment;
pub mod error;
pub mod linalg;
pub mod ode;
pub mod perturb;
pub mod profile;
pub mod quadrature;
pub mod resonance;
pub mod segment;
