//! Numerical toolkit for conformal metrics `g = u^{4/(n-2)} g0` on punctured
//! balls: curvature, Q-curvature and Gauss-Bonnet-Chern boundary terms in
//! dimension four, the cylinder picture with its three-circle dichotomy, and
//! geodesic distances, ball volumes and blow-downs.

pub mod background;
pub mod conformal_4d;
pub mod curvature;
pub mod cylinder;
pub mod dim;
pub mod error;
pub mod expr;
pub mod factor;
mod fd;
pub mod grid;
pub mod integrate;
pub mod jet;
pub mod metric_lab;
pub mod quadrature;

pub use dim::Dimension;
pub use error::{Error, Result};
pub use expr::Expr;
pub use jet::{Dual, Jet, JetSpace, Scalar};
