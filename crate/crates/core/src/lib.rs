//! Linear and non-linear Fourier-Pade approximants for Angelesco systems
//! of Markov functions, the associated vector logarithmic-potential
//! equilibrium problems, and harnesses measuring nth-root convergence
//! rates of the approximants.

pub mod equilibrium;
pub mod error;
pub mod linear_fp;
pub mod measures;
pub mod multipoint_pade;
pub mod nonlinear_fp;
pub mod orthopoly;
pub mod poly;

pub use error::{Error, Result};
pub use measures::{AngelescoSystem, Interval, MeasureSpec, Quadrature, Weight};
pub use poly::PolynomialRep;
