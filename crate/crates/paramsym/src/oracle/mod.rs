//! Independent numerical ground truth: quadrature, lattice sums and fits.

pub mod eigensum;
pub mod fit;
pub mod quad;

pub use eigensum::{circle_resolvent_trace, eigensum_trace, EigensumReport};
pub use fit::{fit_asymptotics, AsymptoticFit, BasisTerm};
pub use quad::{quad_kernel_diagonal, QuadResult};
