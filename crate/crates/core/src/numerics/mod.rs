//! General-purpose numerical kernels used by the model code.

pub mod chebyshev;
pub mod minimize;
pub mod quadrature;
pub mod roots;
pub mod tridiagonal;

pub use chebyshev::Chebyshev;
pub use minimize::{golden_section, grid_then_golden};
pub use quadrature::{gauss10, integrate, Integral, QuadratureOptions};
pub use roots::{bisect, bisect_polish, safeguarded_newton};
pub use tridiagonal::Tridiagonal;
