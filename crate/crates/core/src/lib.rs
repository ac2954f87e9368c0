//! Explicit deep convolutional networks with downsampling that approximate
//! composite functions `f(Q(x))` and radial functions `f(|x|²)`.
//!
//! Modules, bottom up:
//! - [`sequences`]: filters, convolution, Toeplitz layers, downsampling.
//! - [`polyfactor`]: factorization of long filters into short ones.
//! - [`spline`]: knot grids, ReLU hat functions and difference operators.
//! - [`ridge`]: ridge bases and ridge decompositions of polynomials.
//! - [`netbuild`]: assembly of complete networks.
//! - [`neteval`]: forward evaluation and hypothesis-space checks.
//! - [`bounds`]: closed-form constants and error bounds.
//! - [`harness`]: rate sweeps, the ERM experiment and reports.

pub mod bounds;
pub mod error;
pub mod harness;
pub mod netbuild;
pub mod neteval;
pub mod polyfactor;
pub mod ridge;
pub mod sequences;
pub mod spline;

pub use error::{Error, Result};
pub use netbuild::{NetworkSpec, TargetFunction};
pub use sequences::{ConvLayerSpec, Filter};
